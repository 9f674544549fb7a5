"""Translation-invariant J-Hermitian kernels on a discrete torus, defined by
frequency-domain data and validated per frequency.

A kernel family on ``Z_N ⊔ Z_N`` is specified by three frequency vectors
``Fhat`` (real), ``Hhat`` (real) and ``Ghat`` (complex).  The corresponding
real-space kernel has circulant blocks built from the inverse transforms
``F``, ``H``, ``G``, and the hat matrix of the assembled ``2N x 2N`` kernel is
unitarily block-diagonalized by the Fourier basis into ``N`` independent
``2 x 2`` Hermitian blocks

    ``M1(k) = [[Fhat(k), Ghat(k)], [conj(Ghat(k)), 1 - Hhat(k)]]``

so spectral validity reduces to four scalar inequalities per frequency:

    ``0 <= Fhat <= 1``, ``0 <= Hhat <= 1``,
    ``|Ghat|^2 <= Fhat (1 - Hhat)``, ``|Ghat|^2 <= Hhat (1 - Fhat)``.

DFT convention: forward transform ``v_hat(k) = sum_j v(j) e^{-2 pi i k j / N}``
and inverse ``v(j) = (1/N) sum_k v_hat(k) e^{+2 pi i k j / N}`` (numpy's
``fft``/``ifft``).  Frequency index ``k`` corresponds to frequency ``k / N``.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from typing import Callable

import numpy as np

from .core import (
    DEFAULT_TOL,
    JKernelMatrix,
    SplitSpace,
    _freeze,
    assemble_from_blocks,
)


@dataclasses.dataclass(frozen=True, eq=False)
class SpectralTriple:
    """Frequency-domain definition of a translation-invariant kernel.

    ``Fhat`` and ``Hhat`` are real vectors of length ``N`` (symbols of the
    diagonal blocks), ``Ghat`` is a complex vector of length ``N`` (symbol of
    the coupling block).  ``d`` is the grid dimension tag (only ``d = 1`` is
    exercised by the experiment harness).
    """

    N: int
    Fhat: np.ndarray
    Hhat: np.ndarray
    Ghat: np.ndarray
    d: int = 1

    def __post_init__(self) -> None:
        if not isinstance(self.N, int) or self.N < 1:
            raise ValueError("N must be a positive integer")
        if not isinstance(self.d, int) or self.d < 1:
            raise ValueError("d must be an integer >= 1")
        fhat = np.array(self.Fhat, dtype=np.float64).reshape(-1)
        hhat = np.array(self.Hhat, dtype=np.float64).reshape(-1)
        ghat = np.array(self.Ghat, dtype=np.complex128).reshape(-1)
        for name, vec in (("Fhat", fhat), ("Hhat", hhat)):
            if vec.shape != (self.N,):
                raise ValueError(f"{name} must have length {self.N}")
            if not np.all(np.isfinite(vec)):
                raise ValueError(f"{name} contains non-finite entries")
        if ghat.shape != (self.N,):
            raise ValueError(f"Ghat must have length {self.N}")
        if not np.all(np.isfinite(ghat.real) & np.isfinite(ghat.imag)):
            raise ValueError("Ghat contains non-finite entries")
        object.__setattr__(self, "Fhat", _freeze(fhat))
        object.__setattr__(self, "Hhat", _freeze(hhat))
        object.__setattr__(self, "Ghat", _freeze(ghat))


@dataclasses.dataclass(frozen=True, eq=False)
class TranslationKernel:
    """Real-space data of a translation-invariant kernel on the torus.

    ``F``, ``G``, ``H`` are lag vectors of length ``N``: the assembled kernel
    blocks are ``K11[i, j] = F((i - j) mod N)``, ``K12[i, j] = G((i - j) mod
    N)``, ``K22[i, j] = H((i - j) mod N)`` (and ``K21 = -K12^H``).  ``h`` is
    the grid spacing (1.0 for the pure torus).
    """

    N: int
    F: np.ndarray
    G: np.ndarray
    H: np.ndarray
    h: float = 1.0

    def __post_init__(self) -> None:
        if not isinstance(self.N, int) or self.N < 1:
            raise ValueError("N must be a positive integer")
        for name in ("F", "G", "H"):
            vec = np.array(getattr(self, name), dtype=np.complex128).reshape(-1)
            if vec.shape != (self.N,):
                raise ValueError(f"{name} must have length {self.N}")
            if not np.all(np.isfinite(vec.real) & np.isfinite(vec.imag)):
                raise ValueError(f"{name} contains non-finite entries")
            object.__setattr__(self, name, _freeze(vec))
        if not (math.isfinite(self.h) and self.h > 0):
            raise ValueError("grid spacing h must be positive and finite")
        object.__setattr__(self, "h", float(self.h))


@dataclasses.dataclass(frozen=True, eq=False)
class FrequencyValidity:
    """Per-frequency admissibility verdicts for a spectral triple.

    The four boolean vectors record, per frequency, whether each condition
    holds within the tolerance; ``margins`` holds the per-frequency worst
    slack (negative = violated), ``worst_margin`` the most negative slack
    overall, and ``valid`` whether every condition holds at every frequency.
    """

    f_in_range: np.ndarray
    h_in_range: np.ndarray
    coupling_vs_f: np.ndarray
    coupling_vs_h: np.ndarray
    margins: np.ndarray
    worst_margin: float
    valid: bool
    tolerance: float

    def __post_init__(self) -> None:
        for name in ("f_in_range", "h_in_range", "coupling_vs_f", "coupling_vs_h"):
            object.__setattr__(self, name, _freeze(np.asarray(getattr(self, name), dtype=bool)))
        object.__setattr__(self, "margins", _freeze(np.asarray(self.margins, dtype=np.float64)))

    def summary(self) -> str:
        """One-paragraph human-readable summary."""
        n = self.margins.shape[0]
        counts = {
            "F range": int(np.sum(~self.f_in_range)),
            "H range": int(np.sum(~self.h_in_range)),
            "|G|^2 vs F(1-H)": int(np.sum(~self.coupling_vs_f)),
            "|G|^2 vs H(1-F)": int(np.sum(~self.coupling_vs_h)),
        }
        lines = [
            f"frequencies: {n}",
            f"valid: {self.valid}",
            f"worst_margin: {self.worst_margin!r}",
        ]
        for label, bad in counts.items():
            lines.append(f"violations [{label}]: {bad}")
        return "\n".join(lines)


def dft_forward(vector) -> np.ndarray:
    """Forward DFT: ``out(k) = sum_j v(j) e^{-2 pi i k j / N}``."""
    return np.fft.fft(np.asarray(vector, dtype=np.complex128))


def dft_inverse(vector) -> np.ndarray:
    """Inverse DFT: ``out(j) = (1/N) sum_k v(k) e^{+2 pi i k j / N}``."""
    return np.fft.ifft(np.asarray(vector, dtype=np.complex128))


def dft_pair(vector) -> tuple[np.ndarray, np.ndarray]:
    """Both transforms of a vector: ``(dft_forward(v), dft_inverse(v))``."""
    return dft_forward(vector), dft_inverse(vector)


def check_frequency_admissibility(
    triple: SpectralTriple, tol: float = DEFAULT_TOL
) -> FrequencyValidity:
    """Check the four per-frequency admissibility conditions.

    Each condition's slack is measured with ``tol`` of absolute allowance, so
    boundary-saturating triples (equalities) are declared valid.  The reported
    ``worst_margin`` is the most negative slack over all conditions and
    frequencies (0 when the tightest condition is exactly saturated).
    """
    fh = triple.Fhat
    hh = triple.Hhat
    g2 = np.abs(triple.Ghat) ** 2
    margin_f = np.minimum(fh, 1.0 - fh)
    margin_h = np.minimum(hh, 1.0 - hh)
    margin_gf = fh * (1.0 - hh) - g2
    margin_gh = hh * (1.0 - fh) - g2
    f_ok = margin_f >= -tol
    h_ok = margin_h >= -tol
    gf_ok = margin_gf >= -tol
    gh_ok = margin_gh >= -tol
    margins = np.minimum(np.minimum(margin_f, margin_h), np.minimum(margin_gf, margin_gh))
    worst = float(np.min(margins)) if margins.size else 0.0
    valid = bool(np.all(f_ok) and np.all(h_ok) and np.all(gf_ok) and np.all(gh_ok))
    return FrequencyValidity(
        f_in_range=f_ok,
        h_in_range=h_ok,
        coupling_vs_f=gf_ok,
        coupling_vs_h=gh_ok,
        margins=margins,
        worst_margin=worst,
        valid=valid,
        tolerance=tol,
    )


def block_diagonalize(triple: SpectralTriple) -> tuple[np.ndarray, np.ndarray]:
    """Per-frequency 2x2 Hermitian blocks of the hat matrix and complements.

    Returns ``(M1, M2)`` with shapes ``(N, 2, 2)``:
    ``M1[k] = [[Fhat(k), Ghat(k)], [conj(Ghat(k)), 1 - Hhat(k)]]`` and
    ``M2[k] = I - M1[k]``.  The union over ``k`` of the eigenvalues of
    ``M1[k]`` equals the spectrum of the full ``2N x 2N`` hat matrix of the
    assembled kernel (Fourier conjugation makes the hat matrix block
    diagonal).
    """
    n = triple.N
    m1 = np.empty((n, 2, 2), dtype=np.complex128)
    m1[:, 0, 0] = triple.Fhat
    m1[:, 0, 1] = triple.Ghat
    m1[:, 1, 0] = triple.Ghat.conj()
    m1[:, 1, 1] = 1.0 - triple.Hhat
    m2 = np.broadcast_to(np.eye(2, dtype=np.complex128), (n, 2, 2)) - m1
    return m1, m2


def synthesize_kernel(triple: SpectralTriple) -> TranslationKernel:
    """Inverse-transform a spectral triple to real-space lag vectors.

    ``F = idft(Fhat)``, ``G = idft(Ghat)``, ``H = idft(Hhat)``; the result has
    unit grid spacing.  Synthesis is allowed for invalid triples too (for
    negative tests).
    """
    return TranslationKernel(
        N=triple.N,
        F=dft_inverse(triple.Fhat),
        G=dft_inverse(triple.Ghat),
        H=dft_inverse(triple.Hhat),
        h=1.0,
    )


def to_jkernel(kernel: TranslationKernel, space: SplitSpace) -> JKernelMatrix:
    """Assemble the full ``2N x 2N`` circulant-block kernel matrix.

    The space must have ``n1 = n2 = N``.  Block entries are lag lookups
    ``F/G/H((i - j) mod N)``; the lower-left block is forced to ``-K12^H``,
    which agrees with the lag rule because ``Fhat``/``Hhat`` are real.
    """
    n = kernel.N
    if space.n1 != n or space.n2 != n:
        raise ValueError(f"space must have n1 = n2 = {n}, got ({space.n1}, {space.n2})")
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return assemble_from_blocks(
        kernel.F[idx], kernel.G[idx], kernel.H[idx], space
    )


def sigma_squared(kernel: TranslationKernel) -> float:
    """Limiting variance density of the signed statistic family.

    Computes ``F(0) + H(0) - h [ sum|F|^2 + sum|H|^2 + 2 sum|G|^2 ]`` with the
    lag sums weighted by the grid spacing (dimension 1).  Non-negative for
    every admissible triple.
    """
    f0 = kernel.F[0]
    h0 = kernel.H[0]
    if abs(f0.imag) > 1e-10 or abs(h0.imag) > 1e-10:
        raise ValueError("F(0) and H(0) must be real (Fhat/Hhat real)")
    quad = (
        np.sum(np.abs(kernel.F) ** 2)
        + np.sum(np.abs(kernel.H) ** 2)
        + 2.0 * np.sum(np.abs(kernel.G) ** 2)
    )
    return float(f0.real + h0.real - kernel.h * quad)


def tail_diagnostic(
    family: Callable[[float], TranslationKernel],
    kappa: Callable[[float], float],
    L: float,
) -> float:
    """Mass of the kernel's squared lag profile beyond the cutoff ``L / kappa(L)``.

    Sums ``|F|^2 + |H|^2 + 2 |G|^2`` (weighted by the grid spacing) over lags
    whose circular distance exceeds the cutoff.  For families meeting the
    vanishing-tail hypothesis this decreases toward 0 along the L grid.  If
    the cutoff exceeds the grid extent the result is 0 and a warning is
    issued.
    """
    if L <= 0:
        raise ValueError("L must be positive")
    k = float(kappa(L))
    if not (math.isfinite(k) and k > 0):
        raise ValueError("kappa(L) must be positive and finite")
    kernel = family(L)
    n, h = kernel.N, kernel.h
    cutoff = L / k
    lags = np.arange(n)
    dist = np.minimum(lags, n - lags) * h
    max_dist = float(np.max(dist)) if n > 1 else 0.0
    if cutoff >= max_dist:
        warnings.warn(
            f"tail cutoff {cutoff:.6g} exceeds the grid extent {max_dist:.6g}; "
            "tail mass reported as 0",
            stacklevel=2,
        )
        return 0.0
    mask = dist > cutoff
    w = (
        np.abs(kernel.F) ** 2
        + np.abs(kernel.H) ** 2
        + 2.0 * np.abs(kernel.G) ** 2
    )
    return float(h * np.sum(w[mask]))


def save_spectral_triple(triple: SpectralTriple, path) -> None:
    """Write a spectral triple to JSON.

    Format: ``{"N", "d", "Fhat": [real], "Hhat": [real],
    "Ghat": [[re, im], ...]}``.
    """
    import json

    payload = {
        "N": triple.N,
        "d": triple.d,
        "Fhat": [float(x) for x in triple.Fhat],
        "Hhat": [float(x) for x in triple.Hhat],
        "Ghat": [[float(z.real), float(z.imag)] for z in triple.Ghat],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, allow_nan=False)
        fh.write("\n")


def load_spectral_triple(path) -> SpectralTriple:
    """Read a spectral triple from JSON (strict keys, finite values)."""
    import json

    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if not isinstance(payload, dict):
        raise ValueError("spectral triple file must contain a JSON object")
    expected = {"N", "d", "Fhat", "Hhat", "Ghat"}
    unknown = set(payload) - expected
    if unknown:
        raise ValueError(f"unknown keys in spectral triple file: {sorted(unknown)}")
    missing = expected - set(payload)
    if missing:
        raise ValueError(f"missing keys in spectral triple file: {sorted(missing)}")
    ghat_pairs = payload["Ghat"]
    ghat = np.empty(len(ghat_pairs), dtype=np.complex128)
    for i, pair in enumerate(ghat_pairs):
        if not (isinstance(pair, list) and len(pair) == 2):
            raise ValueError("each Ghat entry must be a [re, im] pair")
        ghat[i] = complex(pair[0], pair[1])
    return SpectralTriple(
        N=payload["N"],
        Fhat=np.array(payload["Fhat"], dtype=np.float64),
        Hhat=np.array(payload["Hhat"], dtype=np.float64),
        Ghat=ghat,
        d=payload["d"],
    )
