"""Linear analysis of the Vlasov-Poisson system around homogeneous equilibria.

Modules
-------
equilibrium
    Radial equilibria and their Fourier profiles ``M``.
symbols
    ``m_VP``, ``m_VB`` and ``m_KE`` with error estimates.
penrose
    Nyquist winding and zero-structure stability checks.
dispersion
    Langmuir-branch root tracking and residue amplitudes.
kernel
    Green kernel by Volterra and contour routes; regular/singular split.
evolution
    Density evolution for Gaussian data and decay fits.
cli
    Command-line runner (``vplinear``).
"""

__version__ = "0.1.0"

from .dispersion import LangmuirBranch, residue_amplitude, track_branch
from .equilibrium import Equilibrium, load_custom, make_custom, make_maxwellian, make_power_law
from .errors import (
    CertificationError,
    ConfigError,
    ConvergenceError,
    DivergentMomentError,
    DomainError,
    InconclusiveError,
    QuadratureError,
    ResolutionError,
    VPError,
)
from .evolution import DensityRun, InitialData, decompose_density, solve_density, source
from .fitting import DecayReport, fit_decay
from .kernel import KernelDecomposition, decompose_kernel, ghat_contour, ghat_volterra
from .penrose import check_h1, check_h2, check_stability
from .symbols import SymbolQuery, SymbolValue, evaluate, m_ke, m_vb, m_vp

__all__ = [
    "__version__",
    "Equilibrium",
    "make_maxwellian",
    "make_power_law",
    "make_custom",
    "load_custom",
    "SymbolQuery",
    "SymbolValue",
    "evaluate",
    "m_vp",
    "m_vb",
    "m_ke",
    "check_h1",
    "check_h2",
    "check_stability",
    "LangmuirBranch",
    "track_branch",
    "residue_amplitude",
    "KernelDecomposition",
    "ghat_volterra",
    "ghat_contour",
    "decompose_kernel",
    "InitialData",
    "DensityRun",
    "source",
    "solve_density",
    "decompose_density",
    "DecayReport",
    "fit_decay",
    "VPError",
    "DomainError",
    "DivergentMomentError",
    "CertificationError",
    "QuadratureError",
    "ConvergenceError",
    "InconclusiveError",
    "ConfigError",
    "ResolutionError",
]
