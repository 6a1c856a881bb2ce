"""Scenario files: TOML with four sections.

``[system]`` selects the model (``density_flow``, ``saint_venant`` or
``generic``), ``[boundary]`` the feedback, ``[sim]`` the numerical
experiment and ``[analysis]`` the estimator budget.  Parsing fills in all
defaults, so the normalized dictionary is a complete description; it is
echoed into every output file and parses back to the same scenario.
"""
from __future__ import annotations

import copy
import re
import sys
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .boundary import BoundaryControl
from .errors import ParseError, UnknownParameterPath
from .models import (
    DENSITY_FLOW_MASKS,
    DensityFlowParams,
    SaintVenantParams,
    density_flow,
    saint_venant,
)
from .riemann import HyperbolicSystem, RiemannForm, to_riemann
from .simulator import Profile, SimConfig
from .stability import Budget

ECHO_BEGIN = "# --- scenario ---"
ECHO_END = "# --- end scenario ---"

SYSTEM_TYPES = ("density_flow", "saint_venant", "generic")
SECTIONS = ("system", "boundary", "sim", "analysis")

REQUIRED, OPTIONAL = object(), object()

# per-type schema: key -> (kind, default)
_SYSTEM = {
    "density_flow": {
        "lambda1": ("float", REQUIRED),
        "lambda2": ("float", REQUIRED),
        "H_star": ("float", 0.0),
        "Q_star": ("float", 0.0),
        "L": ("float", 1.0),
    },
    "saint_venant": {
        "H_star": ("float", REQUIRED),
        "V_star": ("float", REQUIRED),
        "g": ("float", 9.81),
        "C_f": ("float", 0.1),
        "L": ("float", 1.0),
    },
    "generic": {
        "M": ("matrix", REQUIRED),
        "N": ("matrix", OPTIONAL),
        "L": ("float", 1.0),
    },
}

_MODEL_BOUNDARY = {
    "k0_11": ("float", 0.0),
    "k0_12": ("float", 0.0),
    "kL_21": ("float", 0.0),
    "kL_22": ("float", 0.0),
    "obs0": ("bools", [True, True]),
    "obsL": ("bools", [True, True]),
    "strict": ("bool", False),
}

_GENERIC_BOUNDARY = {
    "A": ("matrix", REQUIRED),
    "B": ("matrix", REQUIRED),
    "K0": ("matrix", OPTIONAL),
    "KL": ("matrix", OPTIONAL),
    "obs0": ("bools", OPTIONAL),
    "obsL": ("bools", OPTIONAL),
    "strict": ("bool", False),
}

_SIM = {
    "dx": ("float", 0.01),
    "cfl_factor": ("float", 0.75),
    "t_end": ("float", 20.0),
    "sample_stride": ("int", 1),
    "initial": ("profiles", OPTIONAL),
    "equilibrium": ("floats", OPTIONAL),
    "fit_window": ("floats", [0.3, 1.0]),
}

_ANALYSIS = {
    "seed": ("int", 0),
    "rho0_grid": ("int", 64),
    "rho0_max_grid": ("int", 32768),
    "rho0_seeds": ("int", 5),
    "rho0_random": ("int", 200),
    "rho1_starts": ("int", 20),
    "rho1_span": ("float", 3.0),
    "boundary_tol": ("float", 1e-6),
    "force_numeric": ("bool", False),
}


def _locate(text: Optional[str], section: str, key: Optional[str] = None) -> Optional[int]:
    """Best-effort 1-based line of ``key`` inside ``[section]`` (or of the header)."""
    if text is None:
        return None
    current = None
    header = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        m = re.match(r"^\[\s*([A-Za-z0-9_]+)\s*\]$", line)
        if m:
            current = m.group(1)
            if current == section:
                header = lineno
            continue
        if current == section and key is not None and re.match(rf"^{re.escape(key)}\s*=", line):
            return lineno
    return header


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _coerce(kind, value, where):
    section, key, text = where

    def fail(msg):
        raise ParseError(msg, line=_locate(text, section, key), key=f"{section}.{key}")

    if kind == "float":
        if not _is_number(value):
            fail(f"expected a number, got {value!r}")
        return float(value)
    if kind == "int":
        if not isinstance(value, int) or isinstance(value, bool):
            fail(f"expected an integer, got {value!r}")
        return int(value)
    if kind == "bool":
        if not isinstance(value, bool):
            fail(f"expected true or false, got {value!r}")
        return value
    if kind == "bools":
        if not isinstance(value, list) or not all(isinstance(v, bool) for v in value):
            fail(f"expected a list of booleans, got {value!r}")
        return list(value)
    if kind == "floats":
        if not isinstance(value, list) or not all(_is_number(v) for v in value):
            fail(f"expected a list of numbers, got {value!r}")
        return [float(v) for v in value]
    if kind == "matrix":
        ok = (
            isinstance(value, list)
            and value
            and all(isinstance(row, list) and len(row) == len(value) for row in value)
            and all(_is_number(v) for row in value for v in row)
        )
        if not ok:
            fail("expected a square matrix written as a list of equal-length rows")
        return [[float(v) for v in row] for row in value]
    if kind == "profiles":
        ok = isinstance(value, list) and all(
            isinstance(p, list) and len(p) == 3 and all(_is_number(v) for v in p) for p in value
        )
        if not ok:
            fail("expected a list of [c, a, f] triples, one per physical variable")
        return [[float(v) for v in p] for p in value]
    raise AssertionError(kind)


def _fill(section, schema, raw, text):
    raw = dict(raw)
    out = {}
    for key, (kind, default) in schema.items():
        if key in raw:
            out[key] = _coerce(kind, raw.pop(key), (section, key, text))
        elif default is REQUIRED:
            raise ParseError(
                f"missing required key in [{section}]",
                line=_locate(text, section),
                key=f"{section}.{key}",
            )
        elif default is not OPTIONAL:
            out[key] = copy.deepcopy(default)
    for key in raw:
        raise ParseError(
            f"unknown key in [{section}]; allowed: {', '.join(schema)}",
            line=_locate(text, section, key),
            key=f"{section}.{key}",
        )
    return out


@dataclass
class Scenario:
    """Normalized scenario; ``data`` maps section name to a complete key/value dict."""

    data: Dict[str, Dict[str, Any]]
    source: Optional[str] = field(default=None, repr=False, compare=False)

    @property
    def kind(self) -> str:
        return self.data["system"]["type"]

    def echo(self) -> str:
        body = tomli_w.dumps(self.data)
        lines = [ECHO_BEGIN]
        lines += [("# " + ln) if ln else "#" for ln in body.rstrip("\n").splitlines()]
        lines.append(ECHO_END)
        return "\n".join(lines) + "\n"


def parse(text: str) -> Scenario:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ParseError(f"malformed scenario: {exc}", line=int(m.group(1)) if m else None) from None
    for name in raw:
        if name not in SECTIONS:
            raise ParseError(
                f"unknown section [{name}]; allowed: {', '.join(SECTIONS)}",
                line=_locate(text, name),
                key=name,
            )
        if not isinstance(raw[name], dict):
            raise ParseError(f"'{name}' must be a [section]", line=_locate(text, "", name), key=name)
    for name in ("system", "boundary"):
        if name not in raw:
            raise ParseError(f"missing required section [{name}]")

    system = dict(raw["system"])
    kind = system.pop("type", None)
    if kind not in SYSTEM_TYPES:
        raise ParseError(
            f"system type must be one of {', '.join(SYSTEM_TYPES)}, got {kind!r}",
            line=_locate(text, "system", "type"),
            key="system.type",
        )
    data = {"system": {"type": kind, **_fill("system", _SYSTEM[kind], system, text)}}
    bschema = _GENERIC_BOUNDARY if kind == "generic" else _MODEL_BOUNDARY
    data["boundary"] = _fill("boundary", bschema, raw["boundary"], text)
    if "sim" in raw:
        data["sim"] = _fill("sim", _SIM, raw["sim"], text)
    data["analysis"] = _fill("analysis", _ANALYSIS, raw.get("analysis", {}), text)
    scn = Scenario(data, source=text)
    _check_shapes(scn, text)
    return scn


def _check_shapes(scn: Scenario, text):
    n = system_size(scn)

    def bad(section, key, msg):
        raise ParseError(msg, line=_locate(text, section, key), key=f"{section}.{key}")

    sys_ = scn.data["system"]
    if "N" in sys_ and len(sys_["N"]) != n:
        bad("system", "N", f"N must be {n}x{n}")
    for key in ("A", "B", "K0", "KL"):
        if key in scn.data["boundary"] and len(scn.data["boundary"][key]) != n:
            bad("boundary", key, f"{key} must be {n}x{n}")
    for key in ("obs0", "obsL"):
        if key in scn.data["boundary"] and len(scn.data["boundary"][key]) != n:
            bad("boundary", key, f"{key} needs {n} flags")
    sim = scn.data.get("sim")
    if sim is not None:
        for key in ("initial", "equilibrium"):
            if key in sim and len(sim[key]) != n:
                bad("sim", key, f"{key} needs {n} entries, one per physical variable")
        if len(sim["fit_window"]) != 2:
            bad("sim", "fit_window", "fit_window is [start, end] as fractions of t_end")


def system_size(scn: Scenario) -> int:
    if scn.kind == "generic":
        return len(scn.data["system"]["M"])
    return 2


def load(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return parse(fh.read())


def extract_echo(text: str) -> Scenario:
    """Re-parse the scenario echoed between the comment markers of an output file."""
    lines = text.splitlines()
    try:
        start = lines.index(ECHO_BEGIN)
        stop = lines.index(ECHO_END, start)
    except ValueError:
        raise ParseError("no echoed scenario block found") from None
    body = [ln[2:] if ln.startswith("# ") else ln[1:] for ln in lines[start + 1 : stop]]
    return parse("\n".join(body) + "\n")


# ---------------------------------------------------------------------------
# parameter paths

_PATH = re.compile(r"^([A-Za-z_]+)\.([A-Za-z0-9_]+)(?:\[(\d+)(?:\s*,\s*(\d+))?\])?$")


def with_param(scn: Scenario, path: str, value: float) -> Scenario:
    """Copy of `scn` with the scalar at ``section.key`` (or ``section.key[i,j]``) replaced."""
    m = _PATH.match(path.strip())
    if not m:
        raise UnknownParameterPath(f"malformed parameter path {path!r}; expected section.key or section.key[i,j]")
    section, key, i, j = m.groups()
    data = copy.deepcopy(scn.data)
    if section not in data or key not in data[section]:
        raise UnknownParameterPath(f"{section}.{key} is not set in this scenario")
    target = data[section][key]
    idx = [int(k) for k in (i, j) if k is not None]
    try:
        if not idx:
            if not _is_number(target):
                raise UnknownParameterPath(f"{section}.{key} is not a scalar")
            data[section][key] = type(target)(value)
        elif len(idx) == 1:
            if not _is_number(target[idx[0]]):
                raise UnknownParameterPath(f"{path} does not address a scalar")
            target[idx[0]] = float(value)
        else:
            if not _is_number(target[idx[0]][idx[1]]):
                raise UnknownParameterPath(f"{path} does not address a scalar")
            target[idx[0]][idx[1]] = float(value)
    except (IndexError, TypeError):
        raise UnknownParameterPath(f"{path} does not address a scalar") from None
    return parse(tomli_w.dumps(data))


# ---------------------------------------------------------------------------
# construction


@dataclass(frozen=True)
class Built:
    system: HyperbolicSystem
    bc: BoundaryControl
    rf: RiemannForm
    params: Any = None  # DensityFlowParams / SaintVenantParams for built-in models


def model_params(scn: Scenario):
    if scn.kind == "generic":
        return None
    s, b = scn.data["system"], scn.data["boundary"]
    common = dict(
        k0_11=b["k0_11"],
        k0_12=b["k0_12"],
        kL_21=b["kL_21"],
        kL_22=b["kL_22"],
        obs0=tuple(b["obs0"]),
        obsL=tuple(b["obsL"]),
        L=s["L"],
        strict=b["strict"],
    )
    if scn.kind == "density_flow":
        return DensityFlowParams(s["lambda1"], s["lambda2"], H_star=s["H_star"], Q_star=s["Q_star"], **common)
    return SaintVenantParams(s["H_star"], s["V_star"], g=s["g"], C_f=s["C_f"], **common)


def build(scn: Scenario) -> Built:
    params = model_params(scn)
    if scn.kind == "density_flow":
        system, bc = density_flow(params)
    elif scn.kind == "saint_venant":
        system, bc = saint_venant(params)
    else:
        s, b = scn.data["system"], scn.data["boundary"]
        system = HyperbolicSystem(np.array(s["M"]), None if "N" not in s else np.array(s["N"]), s["L"])
        bc = BoundaryControl(
            np.array(b["A"]),
            np.array(b["B"]),
            None if "K0" not in b else np.array(b["K0"]),
            None if "KL" not in b else np.array(b["KL"]),
            b.get("obs0"),
            b.get("obsL"),
            strict=b["strict"],
        )
    return Built(system, bc, to_riemann(system), params)


def budget(scn: Scenario, seed: Optional[int] = None) -> Budget:
    a = scn.data["analysis"]
    return Budget(
        rho0_grid=a["rho0_grid"],
        rho0_max_grid=a["rho0_max_grid"],
        rho0_seeds=a["rho0_seeds"],
        rho0_random=a["rho0_random"],
        rho1_starts=a["rho1_starts"],
        rho1_span=a["rho1_span"],
        seed=a["seed"] if seed is None else seed,
        boundary_tol=a["boundary_tol"],
    )


def sim_config(scn: Scenario) -> SimConfig:
    sim = scn.data.get("sim")
    if sim is None:
        raise ParseError("scenario has no [sim] section", key="sim")
    params = model_params(scn)
    if "equilibrium" in sim:
        eq = tuple(sim["equilibrium"])
    elif params is not None:
        eq = tuple(float(v) for v in params.equilibrium)
    else:
        eq = None
    initial = tuple(Profile(*p) for p in sim["initial"]) if "initial" in sim else ()
    try:
        return SimConfig(
            dx=sim["dx"],
            cfl_factor=sim["cfl_factor"],
            t_end=sim["t_end"],
            sample_stride=sim["sample_stride"],
            initial=initial,
            equilibrium=eq,
            fit_window=tuple(sim["fit_window"]),
        )
    except ValueError as exc:
        raise ParseError(str(exc), key="sim") from None


def density_flow_case(params: DensityFlowParams) -> Optional[str]:
    """Observability case matching the scenario masks, if any."""
    for case, (obs0, obsL) in DENSITY_FLOW_MASKS.items():
        if tuple(params.obs0) == obs0 and tuple(params.obsL) == obsL:
            return case
    return None
