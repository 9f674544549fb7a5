"""Shared factories for randomized sweeps.

All randomness is seeded by the caller; no test draws from global state.
"""

import numpy as np
import pytest

from jdpp.core import HatKernel, JKernelMatrix, SplitSpace, unhat_transform
from jdpp.spectral import SpectralTriple


def random_valid_kernel(
    rng: np.random.Generator,
    n1: int,
    n2: int,
    weights: np.ndarray | None = None,
    lo: float = 0.05,
    hi: float = 0.95,
) -> JKernelMatrix:
    """Random kernel whose hat spectrum lies strictly inside (0, 1).

    Draws a Haar-ish unitary and a spectrum in [lo, hi], assembles the hat of
    the measure-symmetrized matrix, then inverts the hat transform and the
    weighting; the result is exactly J-Hermitian and valid by construction.
    """
    space = (
        SplitSpace.counting(n1, n2)
        if weights is None
        else SplitSpace(n1, n2, weights)
    )
    n = n1 + n2
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, _ = np.linalg.qr(z)
    lam = rng.uniform(lo, hi, n)
    hat = (q * lam[None, :]) @ q.conj().T
    hat = (hat + hat.conj().T) / 2.0
    weighted = unhat_transform(HatKernel(space, hat)).entries
    s = space.sqrt_weights
    entries = weighted / np.outer(s, s)
    return JKernelMatrix(space, entries)


def random_invalid_kernel(
    rng: np.random.Generator, n1: int, n2: int, overshoot: float = 0.3
) -> JKernelMatrix:
    """Random J-Hermitian kernel whose hat spectrum leaves [0, 1] on both sides."""
    space = SplitSpace.counting(n1, n2)
    n = n1 + n2
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, _ = np.linalg.qr(z)
    lam = rng.uniform(0.1, 0.9, n)
    lam[0] = -overshoot
    if n > 1:
        lam[1] = 1.0 + overshoot
    hat = (q * lam[None, :]) @ q.conj().T
    hat = (hat + hat.conj().T) / 2.0
    return unhat_transform(HatKernel(space, hat))


def random_valid_triple(
    rng: np.random.Generator,
    n: int,
    margin: float = 0.05,
    coupling_scale: float | None = None,
) -> SpectralTriple:
    """Random admissible spectral triple: coupling inside both product bounds.

    ``coupling_scale`` in [0, 1] scales |G| relative to the admissible limit
    sqrt(min(F(1-H), H(1-F))); None draws it uniformly per frequency.
    """
    fhat = rng.uniform(margin, 1.0 - margin, n)
    hhat = rng.uniform(margin, 1.0 - margin, n)
    limit = np.sqrt(np.minimum(fhat * (1.0 - hhat), hhat * (1.0 - fhat)))
    scale = (
        rng.uniform(0.0, 0.95, n) if coupling_scale is None else coupling_scale
    )
    phase = np.exp(2j * np.pi * rng.uniform(0.0, 1.0, n))
    return SpectralTriple(N=n, Fhat=fhat, Hhat=hhat, Ghat=limit * scale * phase)


def random_invalid_triple(rng: np.random.Generator, n: int) -> SpectralTriple:
    """Random triple violating a coupling bound at one frequency."""
    triple = random_valid_triple(rng, n)
    fhat = np.array(triple.Fhat)
    hhat = np.array(triple.Hhat)
    ghat = np.array(triple.Ghat)
    k = int(rng.integers(n))
    limit = np.sqrt(min(fhat[k] * (1 - hhat[k]), hhat[k] * (1 - fhat[k])))
    ghat[k] = (limit + 0.1) * np.exp(2j * np.pi * rng.uniform())
    return SpectralTriple(N=n, Fhat=fhat, Hhat=hhat, Ghat=ghat)


def boundary_triple(rng: np.random.Generator, n: int) -> SpectralTriple:
    """Triple saturating the coupling bound exactly (margin ~ 0)."""
    fhat = rng.uniform(0.2, 0.8, n)
    hhat = fhat.copy()  # F(1-H) == H(1-F), so one bound saturates both
    ghat = np.sqrt(fhat * (1.0 - hhat)) * np.exp(2j * np.pi * rng.uniform(0, 1, n))
    return SpectralTriple(N=n, Fhat=fhat, Hhat=hhat, Ghat=ghat)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260822)
