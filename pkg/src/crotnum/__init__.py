"""Complex rotation numbers of analytic circle diffeomorphisms."""
from .atlas import ScalingConfig, ScanConfig, scaling, scan, verify_q2_bound
from .cf import (
    PHI, CFExpansion, MobiusInt, TangentDisc, T_pq, brjuno_partial, cf_of, convergents, disc_image, disc_size,
    gauss_branch, n_of_alpha,
)
from .circle import FourierLift, MonotoneFamily, rotation, standard_family, standard_map
from .errors import CrotError, NumericalError, VerificationError
from .hyperbolic import build_suitable, crot_bands, koenigs, periodic_orbits
from .renorm import fundamental_data, renormalize, verify_mobius
from .rotation import is_hyperbolic, locking_interval, rot
from .torus import crot, crot_hyperbolic, crot_omega, solve_torus

__all__ = [
    "PHI", "CFExpansion", "CrotError", "FourierLift", "MobiusInt", "MonotoneFamily", "NumericalError",
    "ScalingConfig", "ScanConfig", "T_pq", "TangentDisc", "VerificationError", "brjuno_partial", "build_suitable",
    "cf_of", "convergents", "crot", "crot_bands", "crot_hyperbolic", "crot_omega", "disc_image", "disc_size",
    "fundamental_data", "gauss_branch", "is_hyperbolic", "koenigs", "locking_interval", "n_of_alpha",
    "periodic_orbits", "renormalize", "rot", "rotation", "scaling", "scan", "solve_torus", "standard_family",
    "standard_map", "verify_mobius", "verify_q2_bound",
]
