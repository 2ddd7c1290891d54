"""Shared fixtures: models, frozen oracle data, and the self-estimated
growth rate of the default model (computed once per session for the
support-trend test)."""

import json
from pathlib import Path

import numpy as np
import pytest

from ibflow import (
    SpectralModel,
    build_mode_set,
    default_spectral_model,
    estimate_stable_norm,
)

DATA_DIR = Path(__file__).parent / "data"


def random_spectral_model(rng: np.random.Generator) -> SpectralModel:
    """A random valid model: 1-3 shells, any angular order, any mix."""
    n_shells = int(rng.integers(1, 4))
    base = float(rng.uniform(0.2, 1.0))
    ks = base * np.cumprod(rng.uniform(1.3, 2.2, n_shells))
    w = rng.uniform(0.2, 1.0, n_shells)
    w = w / w.sum()
    L = int(rng.choice([4, 6, 8, 12, 16, 32]))
    s = float(rng.uniform(0.0, 1.0))
    return SpectralModel(wavenumbers=tuple(ks), weights=tuple(w),
                         angular_order=L, solenoidal_fraction=s)


@pytest.fixture(scope="session")
def default_mode_set():
    return build_mode_set(default_spectral_model())


@pytest.fixture(scope="session")
def frozen_lip_oracle():
    return json.loads((DATA_DIR / "lip_oracle_frozen.json").read_text())


@pytest.fixture(scope="session")
def default_k_hat(default_mode_set):
    """Self-estimated linear growth rate of the default model.

    Reduced-budget first-passage estimate (the support-trend test only
    needs a self-consistent speed, not a high-precision one).
    """
    est = estimate_stable_norm(
        default_mode_set, (1.0, 0.0), (10.0, 14.0), R=1.0, dt=0.1,
        n_rep=12, t_max_factor=2.0, rng=20260801, h_max=0.1,
        vertex_cap=6000)
    assert np.isfinite(est.k_hat) and est.k_hat > 0
    return est.k_hat
