import math
from pathlib import Path

import numpy as np
import pytest

from cirdiff.calibration import calibrate, target_from_surface
from cirdiff.market_data import load_curve, load_surface
from cirdiff.model import ModelParams, ShiftedModel

DATA_DIR = Path(__file__).resolve().parents[1] / "data"

# fitted parameter sets for the two reference columns (tenor 5 and tenor 10)
FITTED_PI_TENOR5 = (0.109, 0.0846, 1.99, 0.584, 0.597, 1.26, 0.00017, 0.0021)
# note: phi1_y/phi2_y as published violate sigma_y^2 >= 0; swapped here
FITTED_PI_TENOR10 = (0.118, 0.092, 2.0, 0.00151, 0.00741, 1.73, 0.00151, 0.0988)


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture(scope="session")
def curve():
    return load_curve(DATA_DIR / "curve_2019-12-30.csv")


@pytest.fixture(scope="session")
def payer_surface():
    return load_surface(DATA_DIR / "swaptions_payer_2019-12-30.csv", "payer")


@pytest.fixture(scope="session")
def receiver_surface():
    return load_surface(DATA_DIR / "swaptions_receiver_2019-12-30.csv", "receiver")


@pytest.fixture(scope="session")
def model_t5(curve):
    """Shifted model with the fitted tenor-5 parameter set."""
    return ShiftedModel(params=ModelParams(pi=FITTED_PI_TENOR5), curve=curve)


@pytest.fixture(scope="session")
def calibrated_t5_i1(curve, payer_surface):
    target = target_from_surface(payer_surface, tenor=5.0, maturities=[5, 7, 10, 15])
    return calibrate(target, curve, initial="I1"), target


@pytest.fixture(scope="session")
def calibrated_t7_i2(curve, payer_surface):
    target = target_from_surface(payer_surface, tenor=7.0, maturities=[5, 7, 10, 15])
    return calibrate(target, curve, initial="I2"), target


def random_admissible_pi(rng: np.random.Generator) -> np.ndarray:
    """Interior-admissible Pi with realistic magnitudes."""
    phi1x = rng.uniform(0.02, 0.8)
    phi2x = rng.uniform(0.5 * phi1x, phi1x)
    phi1y = rng.uniform(0.02, 0.8)
    phi2y = rng.uniform(phi1y, 1.5 * phi1y)
    return np.array([
        phi1x, phi2x, rng.uniform(1.0, 3.0),
        phi1y, phi2y, rng.uniform(1.0, 3.0),
        rng.uniform(0.0, 0.05), rng.uniform(0.0, 0.05),
    ])
