"""Stability analysis of boundary-controlled linear hyperbolic systems.

Typical use::

    from hypstab import to_riemann, build_coupling, verdict_conservation
    rf = to_riemann(system)
    K = build_coupling(rf, boundary)
    report = verdict_conservation(K)
"""
__version__ = "0.1.0"

from .boundary import BoundaryControl, CouplingMatrix, build_coupling, detect_structure
from .errors import HypstabError
from .riemann import HyperbolicSystem, RiemannForm, to_riemann
from .simulator import Profile, SimConfig, SimResult, fit_decay, run
from .stability import Budget, rho0, rho1, verdict_balance, verdict_conservation

__all__ = [
    "BoundaryControl",
    "Budget",
    "CouplingMatrix",
    "HyperbolicSystem",
    "HypstabError",
    "Profile",
    "RiemannForm",
    "SimConfig",
    "SimResult",
    "build_coupling",
    "detect_structure",
    "fit_decay",
    "rho0",
    "rho1",
    "run",
    "to_riemann",
    "verdict_balance",
    "verdict_conservation",
]
