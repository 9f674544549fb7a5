"""Finite split spaces, J-Hermitian kernel matrices, the hat transform, and
spectral validity checking.

A *split space* is a finite index set partitioned into side 1 (indices
``0..n1-1``) and side 2 (indices ``n1..n1+n2-1``), each point carrying a
strictly positive measure weight.  A kernel matrix on the split space is
*J-Hermitian* when its diagonal blocks are Hermitian and its lower-left block
equals minus the conjugate transpose of the upper-right block.  The *hat
transform* maps such a matrix to an ordinary Hermitian matrix

    ``[[K11, K12], [K12^H, I - K22]]``

whose spectrum decides whether a determinantal point process with the given
kernel exists: it does if and only if every eigenvalue of the (weighted) hat
matrix lies in ``[0, 1]``.

Measure convention: kernels are stored weight-free; spectral and
probabilistic computations conjugate by ``diag(sqrt(weights))`` internally,
and trace functionals insert ``diag(weights)`` explicitly.  For unit weights
(counting measure) everything reduces to the plain stored entries.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os

import numpy as np

#: Default absolute tolerance for Hermiticity residuals and eigenvalue bounds.
DEFAULT_TOL = 1e-9

#: Absolute slack allowed between `entries` block 22 and the complement of a
#: carried `block22_complement` (one rounding of `1 - (1 - x)` on the diagonal).
_COMPLEMENT_CONSISTENCY_TOL = 1e-12


class InvalidKernelError(ValueError):
    """Raised when a kernel violates a structural or spectral requirement."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def _as_square_complex(matrix, n: int, name: str) -> np.ndarray:
    out = np.array(matrix, dtype=np.complex128, order="C")
    if out.shape != (n, n):
        raise ValueError(f"{name} must be {n}x{n}, got shape {out.shape}")
    if not np.all(np.isfinite(out.real)) or not np.all(np.isfinite(out.imag)):
        raise ValueError(f"{name} contains non-finite entries")
    return out


def _hermiticity_residual(matrix: np.ndarray) -> float:
    if matrix.size == 0:
        return 0.0
    return float(np.max(np.abs(matrix - matrix.conj().T)))


@dataclasses.dataclass(frozen=True, eq=False)
class SplitSpace:
    """A finite two-part index set with per-point measure weights.

    Points ``0..n1-1`` form side 1 and points ``n1..n1+n2-1`` form side 2.
    ``weights[i]`` is the measure of point ``i`` (1.0 everywhere = counting
    measure).  ``h`` and ``d`` are optional grid metadata for spaces obtained
    by discretizing a continuum (grid spacing and dimension); they do not
    affect kernel algebra, only grid-aware statistics.
    """

    n1: int
    n2: int
    weights: np.ndarray
    h: float = 1.0
    d: int = 1

    def __post_init__(self) -> None:
        if not isinstance(self.n1, int) or not isinstance(self.n2, int):
            raise ValueError("n1 and n2 must be integers")
        if self.n1 < 0 or self.n2 < 0 or self.n1 + self.n2 < 1:
            raise ValueError("need n1 >= 0, n2 >= 0 and n1 + n2 >= 1")
        w = np.array(self.weights, dtype=np.float64).reshape(-1)
        if w.shape != (self.n1 + self.n2,):
            raise ValueError(
                f"weights must have length {self.n1 + self.n2}, got {w.shape[0]}"
            )
        if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
            raise ValueError("weights must be strictly positive and finite")
        object.__setattr__(self, "weights", _freeze(w))
        if not (isinstance(self.h, (int, float)) and math.isfinite(self.h) and self.h > 0):
            raise ValueError("grid spacing h must be a positive finite number")
        object.__setattr__(self, "h", float(self.h))
        if not isinstance(self.d, int) or self.d < 1:
            raise ValueError("grid dimension d must be an integer >= 1")

    @classmethod
    def counting(cls, n1: int, n2: int, h: float = 1.0, d: int = 1) -> "SplitSpace":
        """Split space with unit weights (counting measure)."""
        return cls(n1, n2, np.ones(n1 + n2), h, d)

    @property
    def n(self) -> int:
        return self.n1 + self.n2

    @property
    def side1(self) -> slice:
        return slice(0, self.n1)

    @property
    def side2(self) -> slice:
        return slice(self.n1, self.n)

    @property
    def j_signs(self) -> np.ndarray:
        """Vector of +1 on side 1 and -1 on side 2."""
        signs = np.ones(self.n)
        signs[self.side2] = -1.0
        return signs

    @property
    def sqrt_weights(self) -> np.ndarray:
        return np.sqrt(self.weights)


@dataclasses.dataclass(frozen=True, eq=False)
class JKernelMatrix:
    """A complex kernel matrix on a split space.

    The J-Hermitian block structure (``K11``/``K22`` Hermitian, ``K21 =
    -K12^H``) is *not* enforced at construction — matrices violating it can be
    built deliberately for negative tests — but every operation that assumes
    the structure verifies it first via :func:`check_j_hermitian`.

    ``block22_complement``, when present, is the hat-side lower-right block
    whose elementwise complement ``I - (.)`` produced this matrix's ``K22``;
    it is carried so that ``hat_transform`` can restore that block
    bit-for-bit instead of recomputing ``I - (I - x)``.
    """

    space: SplitSpace
    entries: np.ndarray
    block22_complement: np.ndarray | None = None

    def __post_init__(self) -> None:
        n = self.space.n
        m = _as_square_complex(self.entries, n, "entries")
        object.__setattr__(self, "entries", _freeze(m))
        if self.block22_complement is not None:
            c = _as_square_complex(
                self.block22_complement, self.space.n2, "block22_complement"
            )
            eye = np.eye(self.space.n2, dtype=np.complex128)
            dev = np.max(np.abs((eye - c) - self.k22)) if self.space.n2 else 0.0
            if dev > _COMPLEMENT_CONSISTENCY_TOL:
                raise ValueError(
                    "block22_complement is inconsistent with entries "
                    f"(max deviation {dev:.3e})"
                )
            object.__setattr__(self, "block22_complement", _freeze(c))

    @property
    def n(self) -> int:
        return self.space.n

    @property
    def k11(self) -> np.ndarray:
        s = self.space
        return self.entries[s.side1, s.side1]

    @property
    def k12(self) -> np.ndarray:
        s = self.space
        return self.entries[s.side1, s.side2]

    @property
    def k21(self) -> np.ndarray:
        s = self.space
        return self.entries[s.side2, s.side1]

    @property
    def k22(self) -> np.ndarray:
        s = self.space
        return self.entries[s.side2, s.side2]


@dataclasses.dataclass(frozen=True, eq=False)
class HatKernel:
    """A Hermitian matrix on a split space, typically the hat transform of a
    J-Hermitian kernel.

    ``block22_complement``, when present, is the original J-kernel's ``K22``
    block (this matrix's lower-right block equals ``I - K22``); it is carried
    so that ``unhat_transform`` restores ``K22`` bit-for-bit.
    """

    space: SplitSpace
    entries: np.ndarray
    block22_complement: np.ndarray | None = None

    def __post_init__(self) -> None:
        n = self.space.n
        m = _as_square_complex(self.entries, n, "entries")
        resid = _hermiticity_residual(m)
        if resid > DEFAULT_TOL:
            raise ValueError(
                f"hat kernel must be Hermitian; residual {resid:.3e} exceeds "
                f"{DEFAULT_TOL:.0e}"
            )
        object.__setattr__(self, "entries", _freeze(m))
        if self.block22_complement is not None:
            c = _as_square_complex(
                self.block22_complement, self.space.n2, "block22_complement"
            )
            s = self.space
            eye = np.eye(s.n2, dtype=np.complex128)
            dev = (
                np.max(np.abs((eye - c) - self.entries[s.side2, s.side2]))
                if s.n2
                else 0.0
            )
            if dev > _COMPLEMENT_CONSISTENCY_TOL:
                raise ValueError(
                    "block22_complement is inconsistent with entries "
                    f"(max deviation {dev:.3e})"
                )
            object.__setattr__(self, "block22_complement", _freeze(c))

    @property
    def n(self) -> int:
        return self.space.n

    @property
    def hermiticity_residual(self) -> float:
        return _hermiticity_residual(self.entries)


@dataclasses.dataclass(frozen=True)
class ValidityReport:
    """Spectral validity verdict for a J-Hermitian kernel.

    ``is_valid`` holds exactly when the smallest hat eigenvalue is at least
    ``-tolerance``, the largest is at most ``1 + tolerance``, and the
    J-Hermiticity residual is at most ``tolerance``.  ``eigenvalues`` carries
    the full ascending hat spectrum for diagnostics.
    """

    min_eigenvalue: float
    max_eigenvalue: float
    hermiticity_residual: float
    is_valid: bool
    tolerance: float
    eigenvalues: np.ndarray = dataclasses.field(repr=False, compare=False, default=None)

    def __post_init__(self) -> None:
        if self.eigenvalues is not None:
            ev = np.array(self.eigenvalues, dtype=np.float64)
            object.__setattr__(self, "eigenvalues", _freeze(ev))


def _j_block_residual(matrix: np.ndarray, n1: int, n2: int) -> float:
    """Max absolute violation of the three J-Hermitian block relations."""
    k11 = matrix[:n1, :n1]
    k22 = matrix[n1:, n1:]
    k12 = matrix[:n1, n1:]
    k21 = matrix[n1:, :n1]
    residual = max(_hermiticity_residual(k11), _hermiticity_residual(k22))
    if n1 and n2:
        residual = max(residual, float(np.max(np.abs(k21 + k12.conj().T))))
    return residual


def check_j_hermitian(kernel: JKernelMatrix, tol: float = DEFAULT_TOL) -> tuple[bool, float]:
    """Check the J-Hermitian block structure of a kernel.

    Returns ``(passes, residual)`` where ``residual`` is the largest absolute
    violation across the three block relations (``K11`` Hermitian, ``K22``
    Hermitian, ``K21 = -K12^H``) and ``passes`` is ``residual <= tol``.
    """
    residual = _j_block_residual(kernel.entries, kernel.space.n1, kernel.space.n2)
    return residual <= tol, residual


def assemble_from_blocks(
    k11,
    k12,
    k22,
    space: SplitSpace,
    tol: float = DEFAULT_TOL,
) -> JKernelMatrix:
    """Build a J-Hermitian kernel from its three defining blocks.

    ``k11`` (``n1 x n1``) and ``k22`` (``n2 x n2``) must be Hermitian within
    ``tol``; ``k12`` (``n1 x n2``) is arbitrary.  The lower-left block is set
    to ``-k12^H``, so the result satisfies the sign rule exactly.
    """
    n1, n2 = space.n1, space.n2
    a = np.array(k11, dtype=np.complex128).reshape(n1, n1) if n1 else np.zeros((0, 0), np.complex128)
    b = np.array(k12, dtype=np.complex128).reshape(n1, n2) if (n1 and n2) else np.zeros((n1, n2), np.complex128)
    c = np.array(k22, dtype=np.complex128).reshape(n2, n2) if n2 else np.zeros((0, 0), np.complex128)
    for name, block in (("k11", a), ("k12", b), ("k22", c)):
        if block.size and not np.all(np.isfinite(block.real) & np.isfinite(block.imag)):
            raise ValueError(f"{name} contains non-finite entries")
    ra, rc = _hermiticity_residual(a), _hermiticity_residual(c)
    if ra > tol:
        raise InvalidKernelError(f"k11 is not Hermitian (residual {ra:.3e} > {tol:.0e})")
    if rc > tol:
        raise InvalidKernelError(f"k22 is not Hermitian (residual {rc:.3e} > {tol:.0e})")
    full = np.zeros((space.n, space.n), dtype=np.complex128)
    full[:n1, :n1] = a
    full[:n1, n1:] = b
    full[n1:, :n1] = -b.conj().T
    full[n1:, n1:] = c
    return JKernelMatrix(space, full)


def _hat_matrix(matrix: np.ndarray, n1: int) -> np.ndarray:
    """Hat-transform a raw J-Hermitian matrix: [[K11, K12], [K12^H, I-K22]]."""
    n = matrix.shape[0]
    out = np.array(matrix, dtype=np.complex128)
    k12 = matrix[:n1, n1:]
    out[n1:, :n1] = k12.conj().T
    out[n1:, n1:] = np.eye(n - n1, dtype=np.complex128) - matrix[n1:, n1:]
    return out


def hat_transform(kernel: JKernelMatrix, tol: float = DEFAULT_TOL) -> HatKernel:
    """Map a J-Hermitian kernel to its Hermitian hat matrix.

    Columns on side 1 are kept; the lower-left block becomes ``K12^H`` and the
    lower-right block becomes ``I - K22``.  The input must pass
    :func:`check_j_hermitian` within ``tol``.  The original ``K22`` is carried
    on the result so the inverse transform reproduces it bit-for-bit.
    """
    passes, residual = check_j_hermitian(kernel, tol)
    if not passes:
        raise InvalidKernelError(
            f"kernel is not J-Hermitian (residual {residual:.3e} > {tol:.0e})"
        )
    n1 = kernel.space.n1
    out = _hat_matrix(kernel.entries, n1)
    if kernel.block22_complement is not None:
        # This kernel's K22 was produced as I - C; restore C exactly.
        out[n1:, n1:] = kernel.block22_complement
    return HatKernel(kernel.space, out, block22_complement=np.array(kernel.k22))


def unhat_transform(hat: HatKernel) -> JKernelMatrix:
    """Invert the hat transform: [[A, B], [B^H, C]] -> [[A, B], [-B^H, I-C]].

    If the hat kernel carries the original ``K22`` (because it was produced by
    :func:`hat_transform`), that block is restored bit-for-bit; round trips
    are then exact for kernels whose lower-left block satisfies the sign rule
    exactly (as all kernels built by :func:`assemble_from_blocks` do).
    """
    n1 = hat.space.n1
    n = hat.space.n
    out = np.array(hat.entries, dtype=np.complex128)
    b = hat.entries[:n1, n1:]
    out[n1:, :n1] = -b.conj().T
    if hat.block22_complement is not None:
        out[n1:, n1:] = hat.block22_complement
    else:
        out[n1:, n1:] = np.eye(n - n1, dtype=np.complex128) - hat.entries[n1:, n1:]
    return JKernelMatrix(
        hat.space, out, block22_complement=np.array(hat.entries[n1:, n1:])
    )


def weighted_matrix(kernel: JKernelMatrix) -> np.ndarray:
    """Measure-symmetrized matrix ``diag(sqrt(w)) K diag(sqrt(w))``.

    This is the operator whose hat spectrum decides validity and whose
    determinants give configuration probabilities; for unit weights it is the
    stored matrix itself.
    """
    s = kernel.space.sqrt_weights
    return kernel.entries * np.outer(s, s)


def validity_check(kernel: JKernelMatrix, tol: float = DEFAULT_TOL) -> ValidityReport:
    """Decide whether the kernel defines a point process.

    Computes the eigenvalues of the hat transform of the measure-symmetrized
    matrix (explicitly Hermitized as ``(M + M^H)/2`` before the eigensolve)
    and reports the spectral bounds.  The process exists exactly when all
    eigenvalues lie in ``[0, 1]``; eigenvalue slack and the J-Hermiticity
    residual are both measured against ``tol``.
    """
    _, residual = check_j_hermitian(kernel, tol)
    hat = _hat_matrix(weighted_matrix(kernel), kernel.space.n1)
    hat = (hat + hat.conj().T) / 2.0
    if not np.all(np.isfinite(hat.real) & np.isfinite(hat.imag)):
        raise InvalidKernelError("hat matrix contains non-finite entries")
    eigenvalues = np.linalg.eigvalsh(hat)
    lo = float(eigenvalues[0])
    hi = float(eigenvalues[-1])
    valid = (lo >= -tol) and (hi <= 1.0 + tol) and (residual <= tol)
    return ValidityReport(
        min_eigenvalue=lo,
        max_eigenvalue=hi,
        hermiticity_residual=residual,
        is_valid=valid,
        tolerance=tol,
        eigenvalues=eigenvalues,
    )


def save_kernel(kernel: JKernelMatrix, path: str | os.PathLike) -> None:
    """Write a kernel to a JSON file.

    Format: ``{"n1", "n2", "weights": [real], "entries": [[re, im], ...]}``
    with entries flattened row-major.  Doubles survive the round trip
    bit-for-bit (floats are emitted with shortest-round-trip precision).
    Grid metadata (``h``, ``d``) and any carried complement block are not part
    of the format and are dropped.
    """
    flat = kernel.entries.reshape(-1)
    payload = {
        "n1": kernel.space.n1,
        "n2": kernel.space.n2,
        "weights": [float(w) for w in kernel.space.weights],
        "entries": [[float(z.real), float(z.imag)] for z in flat],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, allow_nan=False)
        fh.write("\n")


def load_kernel(path: str | os.PathLike) -> JKernelMatrix:
    """Read a kernel from a JSON file written by :func:`save_kernel`.

    Unknown keys are rejected; all values must be finite.  The resulting
    space uses the stored weights with default grid metadata (h=1, d=1).
    """
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if not isinstance(payload, dict):
        raise ValueError("kernel file must contain a JSON object")
    expected = {"n1", "n2", "weights", "entries"}
    unknown = set(payload) - expected
    if unknown:
        raise ValueError(f"unknown keys in kernel file: {sorted(unknown)}")
    missing = expected - set(payload)
    if missing:
        raise ValueError(f"missing keys in kernel file: {sorted(missing)}")
    n1, n2 = payload["n1"], payload["n2"]
    if not isinstance(n1, int) or not isinstance(n2, int):
        raise ValueError("n1 and n2 must be integers")
    n = n1 + n2
    weights = np.array(payload["weights"], dtype=np.float64)
    entries = payload["entries"]
    if len(entries) != n * n:
        raise ValueError(f"expected {n * n} entries, got {len(entries)}")
    flat = np.empty(n * n, dtype=np.complex128)
    for i, pair in enumerate(entries):
        if not (isinstance(pair, list) and len(pair) == 2):
            raise ValueError("each entry must be a [re, im] pair")
        flat[i] = complex(pair[0], pair[1])
    space = SplitSpace(n1, n2, weights)
    return JKernelMatrix(space, flat.reshape(n, n))
