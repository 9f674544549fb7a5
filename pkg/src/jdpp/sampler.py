"""Exact sampling of J-Hermitian determinantal processes via the Hermitian
dual.

Pipeline: eigendecompose the hat matrix, keep eigenvector ``i`` with
probability ``lambda_i`` (independent Bernoullis, consumed in eigenvalue-index
order), sample the resulting projection process point-by-point in fixed index
order, then complement side-2 membership (particle-hole flip) to turn the
dual Hermitian sample into a sample of the original process.

The projection phase keeps the running conditional kernel in Gram form
``M = (Q T)(Q T)^H``: ``Q`` holds the kept eigenvector columns and the small
square transform ``T`` absorbs one rank-1 right-factor per visited point (the
Gram-Schmidt downdate for an inclusion, the complementary stretch for an
exclusion).  Conditional intensities are squared row norms, so they are
nonnegative by construction; the only numerical breakdowns left are
intensities above ``1 + tol`` and impossible divisions.  Factors are folded
into ``T`` in fixed-size step blocks so the heavy work runs as matrix-matrix
products; within a block the pending factors are applied to single rows on
the fly.

Replicas are processed in groups, zero-padded to the widest rank in the
group; a padded slot aliases eigenvector column 0 but its transform row and
column are identically zero, so it contributes exact zeros appended after the
live terms and results do not depend on the grouping.  When the hat matrix is
real symmetric (for instance a torus kernel whose spectral data is real and
even in frequency), the eigenbasis is real and the whole chain runs in real
arithmetic.

Randomness: replica ``i`` of stream ``s`` uses a counter-based generator with
key ``(seed, (s << 40) | i)`` and consumes exactly ``m + n`` uniforms (one per
eigenvalue, then one per point), so identical ``(seed, kernel)`` inputs
reproduce identical batches no matter how the work is split.
"""

from __future__ import annotations

import dataclasses
import logging
import math

import numpy as np

from .core import (
    DEFAULT_TOL,
    HatKernel,
    InvalidKernelError,
    JKernelMatrix,
    SplitSpace,
    _freeze,
    _hat_matrix,
    weighted_matrix,
)
from .moments import TestFunction
from .spectral import SpectralTriple, block_diagonalize, synthesize_kernel, to_jkernel

logger = logging.getLogger("jdpp.sampler")

#: Conditional intensities above ``1 + BREAKDOWN_TOL`` are a numerical
#: breakdown (the replica is flagged and discarded); intensities within
#: ``[-BREAKDOWN_TOL, 0)`` would clamp to 0, though the Gram form cannot
#: produce a negative intensity.
BREAKDOWN_TOL = 1e-9

#: Inclusion with intensity below this (or exclusion with survival
#: probability below it) cannot be conditioned on safely; the replica is
#: flagged instead.
_DIVISION_FLOOR = 1e-12

#: Default number of replicas advanced in lockstep by the projection engine.
DEFAULT_GROUP_SIZE = 64

#: Number of visited points whose rank-1 factors are folded into the running
#: transform in one pair of matrix products.  Fixed: the exact floating-point
#: output is reproducible only for a fixed block size.
_STEP_BLOCK = 16

_MASK64 = (1 << 64) - 1
_MAX_REPLICAS = 1 << 40
_MAX_STREAMS = 1 << 24


@dataclasses.dataclass(frozen=True, eq=False)
class EigenSystem:
    """Spectral form of a Hermitian hat matrix.

    ``eigenvalues`` lie in [0, 1] (clamped after a tolerance assertion at
    construction time by the factories); ``eigenvectors`` holds orthonormal
    columns, kept in real storage when the matrix admits a real eigenbasis.
    Column order is ascending for the dense path and frequency-major for the
    torus path.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.eigenvalues, dtype=np.float64).reshape(-1)
        vectors = np.array(self.eigenvectors)
        if vectors.dtype != np.float64:
            vectors = vectors.astype(np.complex128)
        if vectors.ndim != 2 or vectors.shape[1] != values.shape[0]:
            raise ValueError(
                "eigenvectors must be a matrix with one column per eigenvalue"
            )
        if np.any(values < 0.0) or np.any(values > 1.0):
            raise ValueError("eigenvalues must lie in [0, 1] (clamp before construction)")
        gram = vectors.conj().T @ vectors
        dev = float(np.max(np.abs(gram - np.eye(vectors.shape[1]))))
        if dev > 1e-10:
            raise ValueError(f"eigenvector columns are not orthonormal (dev {dev:.3e})")
        object.__setattr__(self, "eigenvalues", _freeze(values))
        object.__setattr__(self, "eigenvectors", _freeze(vectors))

    @property
    def n(self) -> int:
        return self.eigenvectors.shape[0]

    @property
    def m(self) -> int:
        return self.eigenvalues.shape[0]


@dataclasses.dataclass(frozen=True, eq=False)
class SampleBatch:
    """A reproducible batch of sampled configurations.

    ``configurations[i]`` is the bitmask of replica ``i`` (bit ``j`` set =
    point ``j`` present), or ``None`` if that replica was discarded after a
    numerical breakdown (indices also listed in ``discarded``).
    ``statistic_values`` (when a test function was supplied) aligns with
    ``configurations`` and holds NaN at discarded slots.
    """

    seed: int
    replicas: int
    configurations: list
    space: SplitSpace
    stream: int = 0
    discarded: tuple = ()
    statistic_values: np.ndarray | None = None

    def __post_init__(self) -> None:
        if len(self.configurations) != self.replicas:
            raise ValueError("configurations must have one entry per replica")
        if self.statistic_values is not None:
            sv = np.array(self.statistic_values, dtype=np.float64)
            if sv.shape != (self.replicas,):
                raise ValueError("statistic_values must have one entry per replica")
            object.__setattr__(self, "statistic_values", _freeze(sv))

    @property
    def kept_indices(self) -> np.ndarray:
        """Replica indices that survived (were not discarded)."""
        bad = set(self.discarded)
        return np.array([i for i in range(self.replicas) if i not in bad], dtype=np.intp)


def _replica_generator(seed: int, stream: int, replica: int) -> np.random.Generator:
    key = np.array(
        [seed & _MASK64, ((stream << 40) | replica) & _MASK64], dtype=np.uint64
    )
    return np.random.Generator(np.random.Philox(key=key))


def _validated_seed(seed: int) -> int:
    if not isinstance(seed, (int, np.integer)):
        raise ValueError("seed must be an integer")
    seed = int(seed)
    if not 0 <= seed <= _MASK64:
        raise ValueError("seed must fit in 64 bits")
    return seed


def eigendecompose_hat(hat: HatKernel, tol: float = DEFAULT_TOL) -> EigenSystem:
    """Dense eigendecomposition of a hat matrix.

    Eigenvalues must lie within ``[-tol, 1 + tol]`` (otherwise the kernel is
    invalid and ``InvalidKernelError`` is raised); they are then clamped to
    [0, 1].  The reconstruction ``V diag(lambda) V^H`` is verified against the
    input to 1e-8 in max norm.  A real symmetric hat matrix gets a real
    eigenbasis.
    """
    matrix = (hat.entries + hat.entries.conj().T) / 2.0
    if not np.any(matrix.imag):
        matrix = matrix.real
    values, vectors = np.linalg.eigh(matrix)
    return _finish_eigensystem(values, vectors, matrix, tol)


def _finish_eigensystem(
    values: np.ndarray, vectors: np.ndarray, matrix: np.ndarray, tol: float
) -> EigenSystem:
    lo = float(values.min())
    hi = float(values.max())
    if lo < -tol or hi > 1.0 + tol:
        raise InvalidKernelError(
            f"hat eigenvalues [{lo:.6g}, {hi:.6g}] leave the band "
            f"[-{tol:.0e}, 1 + {tol:.0e}]; the kernel is invalid"
        )
    clamped = np.clip(values, 0.0, 1.0)
    system = EigenSystem(clamped, vectors)
    recon = (vectors * clamped[None, :]) @ vectors.conj().T
    residual = float(np.max(np.abs(recon - matrix)))
    if residual > 1e-8:
        raise ArithmeticError(
            f"eigendecomposition reconstruction residual {residual:.3e} exceeds 1e-8"
        )
    return system


def _torus_spectrum_is_real_even(triple: SpectralTriple) -> bool:
    """True when the assembled kernel (hence the hat matrix) is exactly real.

    Requires the coupling sequence to be real and all three sequences to be
    even in frequency (``X(k) == X(-k mod N)``), checked exactly so the real
    fast path never silently changes the arithmetic of borderline inputs.
    """
    if np.any(triple.Ghat.imag != 0.0):
        return False
    flipped = (-np.arange(triple.N)) % triple.N
    return bool(
        np.all(triple.Fhat == triple.Fhat[flipped])
        and np.all(triple.Hhat == triple.Hhat[flipped])
        and np.all(triple.Ghat.real == triple.Ghat.real[flipped])
    )


def _torus_eigensystem_complex(triple: SpectralTriple) -> tuple:
    n = triple.N
    m1, _ = block_diagonalize(triple)
    values2, vectors2 = np.linalg.eigh(m1)  # (N, 2), (N, 2, 2)
    fourier = np.exp(2j * np.pi * np.outer(np.arange(n), np.arange(n)) / n) / math.sqrt(n)
    doubled = np.repeat(fourier, 2, axis=1)  # column 2k+b is Fourier column k
    top = doubled * vectors2[:, 0, :].reshape(-1)[None, :]
    bottom = doubled * vectors2[:, 1, :].reshape(-1)[None, :]
    return values2.reshape(-1), np.vstack([top, bottom])


def _torus_eigensystem_real(triple: SpectralTriple) -> tuple:
    """Real orthonormal eigenbasis for a real-even triple.

    Frequency shells: the constant mode at ``k = 0``, cosine and sine modes
    for each pair ``{k, N-k}``, and the alternating mode at ``k = N/2`` for
    even ``N``.  Each shell contributes the two eigenvectors of its real 2x2
    block (ascending); shells are visited in increasing ``k``.
    """
    n = triple.N
    m1, _ = block_diagonalize(triple)
    values2, vectors2 = np.linalg.eigh(m1.real)  # (N, 2), (N, 2, 2) real
    grid = np.arange(n)
    columns = []
    values = []

    def add_shell(profile: np.ndarray, k: int) -> None:
        for which in (0, 1):
            alpha, beta = vectors2[k, 0, which], vectors2[k, 1, which]
            columns.append(np.concatenate([alpha * profile, beta * profile]))
            values.append(float(values2[k, which]))

    add_shell(np.full(n, 1.0 / math.sqrt(n)), 0)
    for k in range(1, (n + 1) // 2):
        angle = 2.0 * np.pi * k * grid / n
        add_shell(np.cos(angle) * math.sqrt(2.0 / n), k)
        add_shell(np.sin(angle) * math.sqrt(2.0 / n), k)
    if n % 2 == 0:
        half = n // 2
        add_shell(np.where(grid % 2 == 0, 1.0, -1.0) / math.sqrt(n), half)
    return np.array(values), np.column_stack(columns)


def eigendecompose_torus(triple: SpectralTriple, tol: float = DEFAULT_TOL) -> EigenSystem:
    """Eigendecompose the hat matrix of a torus kernel frequency by frequency.

    Solves the ``N`` independent 2x2 Hermitian blocks and assembles the full
    eigenvector matrix from Fourier vectors, avoiding a dense ``2N x 2N``
    eigensolve.  Real-even spectral data yields a real eigenbasis (cosine and
    sine shells).  The assembled system is verified against the densely
    constructed hat matrix to the same tolerances as the dense path.
    """
    n = triple.N
    if _torus_spectrum_is_real_even(triple):
        values, vectors = _torus_eigensystem_real(triple)
    else:
        values, vectors = _torus_eigensystem_complex(triple)
    kernel = to_jkernel(synthesize_kernel(triple), SplitSpace.counting(n, n))
    hat = _hat_matrix(kernel.entries, n)
    hat = (hat + hat.conj().T) / 2.0
    if vectors.dtype == np.float64:
        residual = float(np.max(np.abs(hat.imag)))
        if residual > 1e-12:
            raise ArithmeticError(
                f"real-even triple produced a non-real hat matrix ({residual:.3e})"
            )
        hat = hat.real
    return _finish_eigensystem(values, vectors, hat, tol)


def _phase1_keep(eigenvalues: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Bernoulli-thin eigenvalues; uniforms consumed in eigenvalue-index order."""
    return uniforms < eigenvalues[None, :]


def _chain_sample_group(
    vectors: np.ndarray,
    cols: np.ndarray,
    ranks: np.ndarray,
    uniforms: np.ndarray,
) -> tuple:
    """Sequential projection sampling for one group of replicas.

    ``vectors``: shared (n, m) eigenvector matrix (real or complex).
    ``cols``: (B, r_pad) kept-column indices per replica, zero-padded past
    each replica's rank (padded transform slots are zeroed, so the aliased
    column is inert).  ``ranks``: (B,) live column counts.  ``uniforms``:
    (B, n) phase-2 draws.  Returns boolean decisions (B, n) and breakdown
    flags (B,).
    """
    n = vectors.shape[0]
    batch, r_pad = cols.shape
    dtype = vectors.dtype
    transform = np.zeros((batch, r_pad, r_pad), dtype=dtype)
    idx = np.arange(r_pad)
    transform[:, idx, idx] = (idx[None, :] < ranks[:, None]).astype(np.float64)
    decisions = np.zeros((batch, n), dtype=bool)
    broken = np.zeros(batch, dtype=bool)
    for start in range(0, n, _STEP_BLOCK):
        stop = min(start + _STEP_BLOCK, n)
        width = stop - start
        block_rows = vectors[np.arange(start, stop)[None, :, None], cols[:, None, :]]
        rows_pre = block_rows @ transform  # (B, width, r_pad)
        u_fac = np.zeros((batch, r_pad, width), dtype=dtype)
        v_fac = np.zeros((batch, width, r_pad), dtype=dtype)
        for j in range(width):
            row = rows_pre[:, j : j + 1, :]
            if j:
                row = row + (row @ u_fac[:, :, :j]) @ v_fac[:, :j, :]
            col = np.conj(np.swapaxes(row, 1, 2))
            p_raw = np.matmul(row, col).real[:, 0, 0]
            broken |= (p_raw < -BREAKDOWN_TOL) | (p_raw > 1.0 + BREAKDOWN_TOL)
            p = np.clip(p_raw, 0.0, 1.0)
            include = uniforms[:, start + j] < p
            decisions[:, start + j] = include
            survive = 1.0 - p
            broken |= include & (p < _DIVISION_FLOOR)
            broken |= ~include & (survive < _DIVISION_FLOOR)
            # Inclusion factor I - q^H q / p annihilates the visited point's
            # direction (Gram-Schmidt downdate); exclusion factor I + g q^H q
            # with (1 + g p)^2 = 1/(1 - p) realizes the survival-conditioned
            # kernel, g computed stably via expm1/log1p.
            safe_p = np.where(p < _DIVISION_FLOOR, 1.0, p)
            g_exc = np.expm1(
                -0.5 * np.log1p(-np.where(survive < _DIVISION_FLOOR, 0.0, p))
            )
            gamma = np.where(include, -1.0, g_exc) / safe_p
            gamma = np.where(broken, 0.0, gamma)
            if j:
                mixed = col + u_fac[:, :, :j] @ (v_fac[:, :j, :] @ col)
            else:
                mixed = col
            u_fac[:, :, j] = gamma[:, None] * mixed[:, :, 0]
            v_fac[:, j, :] = row[:, 0, :]
        transform += (transform @ u_fac) @ v_fac
    broken |= decisions.sum(axis=1) != ranks
    return decisions, broken


def _sample_decision_matrix(
    system: EigenSystem,
    replicas: int,
    seed: int,
    stream: int,
    group_size: int,
) -> tuple:
    """Phase 1 + phase 2 for a whole batch; returns decisions and breakdown flags."""
    n, m = system.n, system.m
    decisions = np.zeros((replicas, n), dtype=bool)
    broken = np.zeros(replicas, dtype=bool)
    for start in range(0, replicas, group_size):
        stop = min(start + group_size, replicas)
        size = stop - start
        uniforms = np.empty((size, m + n))
        for offset in range(size):
            gen = _replica_generator(seed, stream, start + offset)
            uniforms[offset] = gen.random(m + n)
        keep = _phase1_keep(system.eigenvalues, uniforms[:, :m])
        ranks = keep.sum(axis=1).astype(np.int64)
        r_pad = max(1, int(ranks.max()))
        cols = np.zeros((size, r_pad), dtype=np.intp)
        for offset in range(size):
            live = np.flatnonzero(keep[offset])
            cols[offset, : live.shape[0]] = live
        group_dec, group_broken = _chain_sample_group(
            system.eigenvectors, cols, ranks, uniforms[:, m:]
        )
        decisions[start:stop] = group_dec
        broken[start:stop] = group_broken
    return decisions, broken


def _decisions_to_masks(decisions: np.ndarray) -> list:
    packed = np.packbits(decisions, axis=1, bitorder="little")
    return [int.from_bytes(row.tobytes(), "little") for row in packed]


def sample_hermitian_dpp(system: EigenSystem, rng: np.random.Generator) -> int:
    """Draw one configuration of the Hermitian process defined by ``system``.

    Consumes exactly ``m + n`` uniforms from ``rng``.  Returns the subset as a
    bitmask.  Raises ``ArithmeticError`` on numerical breakdown (conditional
    intensity outside the tolerance band).
    """
    n, m = system.n, system.m
    uniforms = rng.random(m + n).reshape(1, -1)
    keep = _phase1_keep(system.eigenvalues, uniforms[:, :m])
    ranks = keep.sum(axis=1).astype(np.int64)
    r_pad = max(1, int(ranks.max()))
    cols = np.zeros((1, r_pad), dtype=np.intp)
    live = np.flatnonzero(keep[0])
    cols[0, : live.shape[0]] = live
    decisions, broken = _chain_sample_group(
        system.eigenvectors, cols, ranks, uniforms[:, m:]
    )
    if broken[0]:
        raise ArithmeticError(
            "numerical breakdown while sampling (conditional intensity left "
            f"the [-{BREAKDOWN_TOL:.0e}, 1 + {BREAKDOWN_TOL:.0e}] band)"
        )
    return _decisions_to_masks(decisions)[0]


def _dual_eigensystem(kernel: JKernelMatrix, tol: float) -> EigenSystem:
    hat = _hat_matrix(weighted_matrix(kernel), kernel.space.n1)
    hat = (hat + hat.conj().T) / 2.0
    if not np.any(hat.imag):
        hat = hat.real
    values, vectors = np.linalg.eigh(hat)
    return _finish_eigensystem(values, vectors, hat, tol)


def sample_jdpp(
    kernel: JKernelMatrix, rng: np.random.Generator, tol: float = DEFAULT_TOL
) -> int:
    """Draw one configuration of the J-Hermitian process.

    Samples the Hermitian dual (the hat matrix of the measure-symmetrized
    kernel) and applies the particle-hole flip to side 2.  Consumes exactly
    ``2n`` uniforms from ``rng``.
    """
    system = _dual_eigensystem(kernel, tol)
    dual_mask = sample_hermitian_dpp(system, rng)
    side2 = ((1 << kernel.space.n2) - 1) << kernel.space.n1
    return dual_mask ^ side2


def _batch_from_decisions(
    decisions: np.ndarray,
    broken: np.ndarray,
    space: SplitSpace,
    seed: int,
    stream: int,
    f: TestFunction | None,
    flip_side2: bool,
) -> SampleBatch:
    if flip_side2 and space.n2:
        decisions = decisions.copy()
        decisions[:, space.n1 :] ^= True
    masks = _decisions_to_masks(decisions)
    discarded = tuple(int(i) for i in np.flatnonzero(broken))
    configurations: list = list(masks)
    for i in discarded:
        configurations[i] = None
    statistic = None
    if f is not None:
        statistic = decisions.astype(np.float64) @ f.values
        statistic[list(discarded)] = np.nan
    if discarded:
        logger.warning(
            "discarded %d of %d replicas after numerical breakdown (indices %s)",
            len(discarded),
            decisions.shape[0],
            list(discarded)[:20],
        )
    return SampleBatch(
        seed=seed,
        replicas=decisions.shape[0],
        configurations=configurations,
        space=space,
        stream=stream,
        discarded=discarded,
        statistic_values=statistic,
    )


def sample_jdpp_batch(
    kernel: JKernelMatrix,
    replicas: int,
    seed: int,
    stream: int = 0,
    f: TestFunction | None = None,
    group_size: int = DEFAULT_GROUP_SIZE,
    tol: float = DEFAULT_TOL,
) -> SampleBatch:
    """Reproducible batch of configurations of a J-Hermitian process.

    Replica ``i`` is a pure function of ``(seed, stream, i, kernel)``; the
    batch is identical however it is grouped internally.  Discarded replicas
    (numerical breakdown) are reported, not silently dropped.
    """
    seed = _validated_seed(seed)
    _validate_batch_args(replicas, stream, group_size)
    system = _dual_eigensystem(kernel, tol)
    decisions, broken = _sample_decision_matrix(system, replicas, seed, stream, group_size)
    return _batch_from_decisions(
        decisions, broken, kernel.space, seed, stream, f, flip_side2=True
    )


def sample_torus_batch(
    triple: SpectralTriple,
    replicas: int,
    seed: int,
    stream: int = 0,
    f: TestFunction | None = None,
    group_size: int = DEFAULT_GROUP_SIZE,
    tol: float = DEFAULT_TOL,
) -> SampleBatch:
    """Batch sampling for a torus kernel via per-frequency eigenproblems.

    Equivalent to assembling the full kernel and calling
    :func:`sample_jdpp_batch` with the counting measure, but the
    eigendecomposition costs ``N`` 2x2 solves instead of a dense ``2N x 2N``
    one, and real-even spectral data runs the chain in real arithmetic.
    (The phase-1 eigenvalue order differs from the dense path, so the two
    paths draw different — equally exact — samples for a given seed.)
    """
    seed = _validated_seed(seed)
    _validate_batch_args(replicas, stream, group_size)
    system = eigendecompose_torus(triple, tol)
    space = SplitSpace.counting(triple.N, triple.N)
    decisions, broken = _sample_decision_matrix(system, replicas, seed, stream, group_size)
    return _batch_from_decisions(
        decisions, broken, space, seed, stream, f, flip_side2=True
    )


def _validate_batch_args(replicas: int, stream: int, group_size: int) -> None:
    if not isinstance(replicas, (int, np.integer)) or replicas < 1:
        raise ValueError("replicas must be a positive integer")
    if replicas >= _MAX_REPLICAS:
        raise ValueError(f"replicas must be below {_MAX_REPLICAS}")
    if not isinstance(stream, (int, np.integer)) or not 0 <= stream < _MAX_STREAMS:
        raise ValueError(f"stream must be an integer in [0, {_MAX_STREAMS})")
    if not isinstance(group_size, (int, np.integer)) or group_size < 1:
        raise ValueError("group_size must be a positive integer")
