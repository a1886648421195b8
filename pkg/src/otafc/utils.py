"""Shared numeric helpers: seeded RNG handling and complex Gaussian draws."""

import numpy as np


def as_rng(seed) -> np.random.Generator:
    """Normalize an integer seed / SeedSequence / Generator into a Generator."""
    return np.random.default_rng(seed)


def complex_normal(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    """Draw i.i.d. circular complex Gaussian CN(0, var) samples.

    Real and imaginary parts each carry var/2 so the per-entry second
    moment E|x|^2 equals var.
    """
    if var < 0:
        raise ValueError(f"variance must be nonnegative, got {var}")
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def hermitize(m: np.ndarray) -> np.ndarray:
    """Symmetrize a nominally Hermitian matrix to kill rounding skew."""
    return 0.5 * (m + m.conj().T)
