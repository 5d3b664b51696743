"""Pricing and calibration engine for a shift-extended two-factor CIR-difference model.

The short rate is the difference of two independent CIR factors plus a
deterministic shift that fits the market zero curve exactly.  The package
provides closed-form bond pricing, Gram-Charlier swaption pricing, surface
calibration, truncated-Euler Monte Carlo, CMS par rates, and least-squares
Monte Carlo Bermudan pricing, plus a batch CLI (``cirdiff``).
"""

from .market_data import (
    CurvePoint,
    DiscountCurve,
    SwaptionQuote,
    SwaptionSurface,
    bachelier_price,
    load_curve,
    load_surface,
)
from .model import (
    FactorParams,
    ModelParams,
    ShiftedModel,
    bond_AB,
    forward_rate_model,
    ksigma_from_phi,
    phi_from_ksigma,
    zcb_cirminus,
    zcb_shifted,
)
from .gram_charlier import (
    Schedule,
    SwapSpec,
    cumulants_from_moments,
    enumerate_multiindices,
    gc_price,
    hermite,
    riccati_terminal,
    swap_moments,
)
from .calibration import (
    CalibrationOptions,
    CalibrationResult,
    CalibrationTarget,
    calibrate,
    objective,
    project_admissible,
    target_from_surface,
)
from .simulation import PathSet, SimulationConfig, mc_swaption, mc_zcb, simulate
from .products import (
    BermudanSpec,
    CmsSpec,
    RegressionBasis,
    annuity,
    cms_par_rate,
    lsmc_bermudan,
    par_rate,
    swap_value,
)

__version__ = "0.1.0"
