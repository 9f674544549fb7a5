"""Brute-force ground truth on tiny spaces.

Enumerates all ``2^n`` configurations of a finite kernel, computes each
probability from the determinant likelihood

    ``p(S) = (-1)^{n - |S|} det(M - I_{complement of S})``

(``M`` the measure-symmetrized kernel matrix, ``I_T`` the diagonal indicator
of ``T``), and derives exact statistic distributions and cumulants from the
full configuration law.  The alternating-determinant identity makes the
probabilities sum to 1 for *every* kernel; they are all non-negative exactly
when the kernel is valid.

Subsets are represented as integer bitmasks: bit ``i`` (least significant =
point 0) set means point ``i`` belongs to the configuration.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Iterable, Sequence

import numpy as np

from .core import (
    DEFAULT_TOL,
    InvalidKernelError,
    JKernelMatrix,
    SplitSpace,
    _hat_matrix,
    validity_check,
    weighted_matrix,
)
from .moments import CumulantSeries, TestFunction

#: Hard cap on the space size for exact enumeration (2^20 configurations).
MAX_ORACLE_POINTS = 20

#: Chunk size for batched determinant evaluation.
_DET_CHUNK = 4096

#: Absolute imaginary residual allowed on determinant-derived probabilities.
_IMAG_ATOL = 1e-9


@dataclasses.dataclass(frozen=True, eq=False)
class ConfigurationDistribution:
    """Full probability law over all ``2^n`` configurations of a space."""

    space: SplitSpace
    probabilities: dict[int, float]

    def __post_init__(self) -> None:
        if self.space.n > MAX_ORACLE_POINTS:
            raise ValueError(
                f"exact enumeration is capped at {MAX_ORACLE_POINTS} points, "
                f"got {self.space.n}"
            )
        if len(self.probabilities) != 2**self.space.n:
            raise ValueError(
                f"expected {2 ** self.space.n} probabilities, "
                f"got {len(self.probabilities)}"
            )

    @property
    def total(self) -> float:
        return float(sum(self.probabilities.values()))

    @property
    def min_probability(self) -> float:
        return float(min(self.probabilities.values()))


def indices_to_mask(indices: Iterable[int]) -> int:
    """Bitmask of a set of point indices."""
    mask = 0
    for i in indices:
        mask |= 1 << int(i)
    return mask


def mask_to_indices(mask: int) -> tuple[int, ...]:
    """Sorted point indices of a bitmask."""
    out = []
    i = 0
    m = int(mask)
    while m:
        if m & 1:
            out.append(i)
        m >>= 1
        i += 1
    return tuple(out)


def _as_mask(subset, n: int) -> int:
    if isinstance(subset, (int, np.integer)):
        mask = int(subset)
    else:
        mask = indices_to_mask(subset)
    if mask < 0 or mask >= (1 << n):
        raise ValueError(f"subset {subset!r} is out of range for {n} points")
    return mask


def _membership_table(n_masks: int, n: int, offset: int = 0) -> np.ndarray:
    """Boolean matrix: row m, column i says whether bit i is set in m+offset."""
    masks = np.arange(offset, offset + n_masks, dtype=np.uint64)
    bits = (masks[:, None] >> np.arange(n, dtype=np.uint64)[None, :]) & np.uint64(1)
    return bits.astype(bool)


def _subset_probabilities_matrix(matrix: np.ndarray, space: SplitSpace) -> dict[int, float]:
    """Determinant likelihood of every configuration for a raw matrix."""
    n = space.n
    if n > MAX_ORACLE_POINTS:
        raise ValueError(
            f"exact enumeration is capped at {MAX_ORACLE_POINTS} points, got {n}"
        )
    total_masks = 1 << n
    probabilities: dict[int, float] = {}
    diag_idx = np.arange(n)
    for start in range(0, total_masks, _DET_CHUNK):
        count = min(_DET_CHUNK, total_masks - start)
        member = _membership_table(count, n, offset=start)
        batch = np.broadcast_to(matrix, (count, n, n)).copy()
        # Subtract the identity on the complement of each configuration.
        batch[:, diag_idx, diag_idx] -= (~member).astype(np.float64)
        dets = np.linalg.det(batch)
        # (-1)^{|complement|}
        comp_sizes = n - member.sum(axis=1)
        signs = np.where(comp_sizes % 2 == 0, 1.0, -1.0)
        values = signs * dets
        bad = np.abs(values.imag) > _IMAG_ATOL
        if np.any(bad):
            worst = float(np.max(np.abs(values.imag)))
            raise ArithmeticError(
                f"configuration probability has imaginary residual {worst:.3e}"
            )
        for offset_i in range(count):
            probabilities[start + offset_i] = float(values[offset_i].real)
    return probabilities


def subset_probabilities(kernel: JKernelMatrix) -> ConfigurationDistribution:
    """Exact probability of every configuration of the kernel's process.

    Works for invalid kernels too (the probabilities then sum to 1 but some
    are negative), which is how validity is cross-examined.
    """
    probs = _subset_probabilities_matrix(weighted_matrix(kernel), kernel.space)
    return ConfigurationDistribution(kernel.space, probs)


def correlation(kernel: JKernelMatrix, subset) -> float:
    """Correlation of a subset: determinant of the principal kernel minor.

    ``subset`` may be a bitmask or an iterable of point indices.  Equals the
    sum of configuration probabilities over all supersets of the subset.
    """
    n = kernel.space.n
    mask = _as_mask(subset, n)
    idx = np.array(mask_to_indices(mask), dtype=np.intp)
    if idx.size == 0:
        return 1.0
    minor = weighted_matrix(kernel)[np.ix_(idx, idx)]
    value = complex(np.linalg.det(minor))
    if abs(value.imag) > _IMAG_ATOL:
        raise ArithmeticError(
            f"correlation has imaginary residual {value.imag:.3e}"
        )
    return float(value.real)


def particle_hole_map(subset, space: SplitSpace) -> int:
    """Keep side-1 membership, complement side-2 membership.

    An involution on bitmasks: applying it twice returns the input.
    """
    mask = _as_mask(subset, space.n)
    side2 = ((1 << space.n2) - 1) << space.n1
    return mask ^ side2


def duality_check(kernel: JKernelMatrix, tol: float = 1e-10) -> float:
    """Largest deviation between the process law and its particle-hole dual.

    Computes the configuration law of the kernel and of its hat matrix (as an
    ordinary Hermitian correlation kernel) and returns

        ``max_S | p_K(S) - p_hat(particle_hole_map(S)) |``,

    which should be at most ``tol`` (default 1e-10) for every valid kernel.
    The kernel must be valid; ``InvalidKernelError`` is raised otherwise.
    """
    report = validity_check(kernel)
    if not report.is_valid:
        raise InvalidKernelError(
            "duality check requires a valid kernel; "
            f"hat spectrum in [{report.min_eigenvalue:.6g}, "
            f"{report.max_eigenvalue:.6g}], residual "
            f"{report.hermiticity_residual:.3e}"
        )
    space = kernel.space
    p_direct = _subset_probabilities_matrix(weighted_matrix(kernel), space)
    hat = _hat_matrix(weighted_matrix(kernel), space.n1)
    p_dual = _subset_probabilities_matrix(hat, space)
    worst = 0.0
    for mask, p in p_direct.items():
        dev = abs(p - p_dual[particle_hole_map(mask, space)])
        if dev > worst:
            worst = dev
    return worst


def exact_statistic_distribution(
    distribution: ConfigurationDistribution, f: TestFunction
) -> list[tuple[float, float]]:
    """Pushforward of the configuration law under ``S_f``.

    Returns ``(value, probability)`` atoms sorted by value, with equal values
    aggregated.  Probabilities sum to 1 (to the accuracy of the input law).
    """
    if f.space.n != distribution.space.n:
        raise ValueError("test function and distribution live on different spaces")
    n = distribution.space.n
    atoms: dict[float, float] = {}
    masks = sorted(distribution.probabilities)
    values = np.array(
        [float(f.values[np.array(mask_to_indices(m), dtype=np.intp)].sum()) if m else 0.0 for m in masks]
    )
    for mask, value in zip(masks, values):
        key = float(value)
        atoms[key] = atoms.get(key, 0.0) + distribution.probabilities[mask]
    return sorted(atoms.items())


def exact_cumulants(
    atoms: Sequence[tuple[float, float]], nmax: int
) -> CumulantSeries:
    """Cumulants of a finite atomic distribution via the moment recursion.

    Raw moments ``m_k = sum p v^k`` feed the recursion

        ``C_n = m_n - sum_{k=1}^{n-1} binom(n-1, k-1) C_k m_{n-k}``.

    The probabilities must sum to 1 within 1e-10.
    """
    if not isinstance(nmax, int) or not 1 <= nmax <= 12:
        raise ValueError("nmax must be an integer in [1, 12]")
    if not atoms:
        raise ValueError("empty distribution")
    values = np.array([a[0] for a in atoms], dtype=np.float64)
    probs = np.array([a[1] for a in atoms], dtype=np.float64)
    if not np.all(np.isfinite(values)) or not np.all(np.isfinite(probs)):
        raise ValueError("distribution contains non-finite entries")
    total = float(np.sum(probs))
    if abs(total - 1.0) > 1e-10:
        raise ValueError(f"probabilities sum to {total!r}, not 1")
    raw = [1.0] + [float(np.sum(probs * values**k)) for k in range(1, nmax + 1)]
    c = np.zeros(nmax + 1)
    for n in range(1, nmax + 1):
        acc = raw[n]
        for k in range(1, n):
            acc -= math.comb(n - 1, k - 1) * c[k] * raw[n - k]
        c[n] = acc
    return CumulantSeries(nmax, c[1:])
