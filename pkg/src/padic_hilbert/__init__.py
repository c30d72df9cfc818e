"""p-adic Hilbert modular q-expansions over real quadratic fields."""

from .connection import IterationPlan, nabla_classical, nabla_power_closed, nabla_s, nabla_sigma
from .errors import (
    ConfigError,
    ConvergenceBudgetExceeded,
    DomainError,
    IdentityViolation,
    NotDepleted,
    PadicHilbertError,
    SingularWeight,
)
from .field import LocalSetup, RationalSetup, RealQuadField
from .hecke import EigenData, U_full, U_noc, U_partial, V_full, V_partial, deplete, synthetic_eigenform
from .padic import PadicCtx, UnramElem, hensel_root, padic_exp, padic_log, teichmuller
from .projection import oc_project
from .qexp import NOCForm, QExp, noc_from_modular
from .triple import diag_restrict, verify_depletion_identities
from .weight import Weight

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConvergenceBudgetExceeded",
    "DomainError",
    "EigenData",
    "IdentityViolation",
    "IterationPlan",
    "LocalSetup",
    "NOCForm",
    "NotDepleted",
    "PadicCtx",
    "PadicHilbertError",
    "QExp",
    "RationalSetup",
    "RealQuadField",
    "SingularWeight",
    "U_full",
    "U_noc",
    "U_partial",
    "UnramElem",
    "V_full",
    "V_partial",
    "Weight",
    "deplete",
    "diag_restrict",
    "hensel_root",
    "nabla_classical",
    "nabla_power_closed",
    "nabla_s",
    "nabla_sigma",
    "noc_from_modular",
    "oc_project",
    "padic_exp",
    "padic_log",
    "synthetic_eigenform",
    "teichmuller",
    "verify_depletion_identities",
]
