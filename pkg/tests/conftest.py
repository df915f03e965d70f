from pathlib import Path

import numpy as np
import pytest

import fidux as fx

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


def make_model3_dataset(seed: int = 0, n: int = 20) -> fx.SurvivalDataset:
    """One draw from the two-binary-covariate benchmark design."""
    design = fx.SimulationDesign(n=n, beta_true=np.array([0.5, 1.0]))
    return fx.generate_standard(design, fx.substream(seed))


@pytest.fixture(scope="session")
def model3_risk() -> fx.RiskStructure:
    ds = make_model3_dataset(seed=0)
    return fx.build_risk_structure(ds)


@pytest.fixture(scope="session")
def density_risk(fixtures_dir) -> fx.RiskStructure:
    ds = fx.load_dataset(fixtures_dir / "density_n15.csv")
    return fx.build_risk_structure(ds)


def random_dataset(rng: np.random.Generator, n: int, p: int,
                   censor_frac: float = 0.4) -> fx.SurvivalDataset:
    """Small random right-censored dataset with at least one failure."""
    while True:
        x = rng.standard_normal((n, p))
        t = rng.exponential(1.0, n)
        c = rng.exponential(1.0 / censor_frac, n) if censor_frac > 0 else np.full(n, np.inf)
        c = np.maximum(c, 1e-6)
        y = np.minimum(t, c)
        delta = (t <= c).astype(int)
        if delta.sum() >= 1:
            return fx.SurvivalDataset(x=x, y=y, delta=delta)
