"""Exact moments and cumulants of linear statistics via trace formulas.

For a point process with kernel ``K`` on a weighted split space, the linear
statistic ``S_f = sum_{x in xi} f(x)`` has exact moments expressible through
traces of products ``K D_1 K D_2 ... K D_m`` with ``D_i = diag(f_i * w)``
(``w`` the measure weights).  The n-th cumulant is the composition sum

    ``C_n = sum_{m=1}^{n} sum_{(n_1..n_m) |= n}
            ((-1)^{m+1} / m) * n! / (n_1! ... n_m!)
            * Tr(K f^{n_1} K f^{n_2} ... K f^{n_m})``

over all ordered compositions of ``n``, with ``K f^{p}`` meaning ``K`` times
the diagonal of the pointwise ``p``-th power of ``f`` (times the weights).

Conventions pinned here: compositions are enumerated in lexicographic order
with exact integer multinomial coefficients; each trace chain is evaluated by
sequential matrix products strictly left to right; function powers are formed
pointwise before being placed on the diagonal.  A single chain with three or
more factors need not be real, so :func:`trace_product` returns a complex
number; realness is asserted only where it is guaranteed (single-factor and
two-factor traces, and full composition-symmetrized cumulants).
"""

from __future__ import annotations

import dataclasses
import json
import math
from typing import Iterator, Sequence

import numpy as np

from .core import JKernelMatrix, SplitSpace, _freeze
from .spectral import TranslationKernel, dft_forward

#: Largest cumulant order supported by the composition enumeration.
MAX_CUMULANT_ORDER = 12

#: Absolute imaginary residual allowed when asserting a trace value is real.
_REALNESS_ATOL = 1e-9


@dataclasses.dataclass(frozen=True, eq=False)
class TestFunction:
    """A real test function given by its values at every point of a space."""

    # Keep pytest from collecting this class (its name matches the default
    # test-class pattern).
    __test__ = False

    space: SplitSpace
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=np.float64).reshape(-1)
        if v.shape != (self.space.n,):
            raise ValueError(f"values must have length {self.space.n}, got {v.shape[0]}")
        if not np.all(np.isfinite(v)):
            raise ValueError("test function values must be finite")
        object.__setattr__(self, "values", _freeze(v))

    @property
    def support(self) -> np.ndarray:
        """Boolean mask of points where the function is nonzero."""
        return self.values != 0.0

    def __mul__(self, scalar: float) -> "TestFunction":
        return TestFunction(self.space, self.values * float(scalar))

    __rmul__ = __mul__

    def power(self, exponent: int) -> "TestFunction":
        """Pointwise power of the function."""
        return TestFunction(self.space, self.values**exponent)

    def abs(self) -> "TestFunction":
        return TestFunction(self.space, np.abs(self.values))


@dataclasses.dataclass(frozen=True, eq=False)
class CumulantSeries:
    """Cumulants ``C_1 .. C_nmax`` of a linear statistic."""

    nmax: int
    values: np.ndarray

    def __post_init__(self) -> None:
        if not isinstance(self.nmax, int) or self.nmax < 1:
            raise ValueError("nmax must be a positive integer")
        v = np.array(self.values, dtype=np.float64).reshape(-1)
        if v.shape != (self.nmax,):
            raise ValueError(f"values must have length {self.nmax}")
        object.__setattr__(self, "values", _freeze(v))

    def order(self, n: int) -> float:
        """The n-th cumulant (1-indexed)."""
        if not 1 <= n <= self.nmax:
            raise ValueError(f"order must be in [1, {self.nmax}]")
        return float(self.values[n - 1])


def _check_same_space(kernel: JKernelMatrix, fs: Sequence[TestFunction]) -> None:
    for f in fs:
        if f.space.n != kernel.space.n:
            raise ValueError(
                f"test function length {f.space.n} does not match kernel size "
                f"{kernel.space.n}"
            )


def _assert_real(value: complex, what: str, atol: float = _REALNESS_ATOL) -> float:
    # Allow a little relative slack on top of the absolute band so that
    # large-magnitude traces on big spaces are not rejected for benign
    # rounding in the last few bits.
    bound = atol + 1e-12 * abs(value.real)
    if abs(value.imag) > bound:
        raise ArithmeticError(
            f"{what} should be real; imaginary residual {value.imag:.3e} "
            f"exceeds {bound:.3e}"
        )
    return float(value.real)


def trace_product(kernel: JKernelMatrix, fs: Sequence[TestFunction]) -> complex:
    """Trace of the alternating product ``K D_1 K D_2 ... K D_m``.

    ``D_i = diag(f_i * weights)``.  For ``m = 1`` this is
    ``sum_x f(x) K(x, x) w(x)``.  The value is returned as a complex number:
    single chains with three or more factors are not real in general (only
    composition-symmetrized combinations are), so no realness is asserted
    here.
    """
    fs = list(fs)
    if not fs:
        raise ValueError("fs must contain at least one test function")
    _check_same_space(kernel, fs)
    w = kernel.space.weights
    k = kernel.entries
    factors = [k * (f.values * w)[None, :] for f in fs]
    if len(factors) == 1:
        return complex(np.trace(factors[0]))
    product = factors[0]
    for factor in factors[1:]:
        product = product @ factor
    return complex(np.trace(product))


def expectation(kernel: JKernelMatrix, f: TestFunction) -> float:
    """Exact mean of ``S_f``: ``sum_x f(x) K(x, x) w(x)``."""
    return _assert_real(trace_product(kernel, [f]), "expectation")


def variance(kernel: JKernelMatrix, f: TestFunction) -> float:
    """Exact variance of ``S_f``: ``Tr(K f^2) - Tr(K f K f)``."""
    t1 = _assert_real(trace_product(kernel, [f.power(2)]), "variance first term")
    t2 = _assert_real(trace_product(kernel, [f, f]), "variance second term")
    return t1 - t2


def variance_spectral(kernel: TranslationKernel, f: TestFunction) -> float:
    """Variance of ``S_f`` for a torus kernel, computed entirely in frequency
    space.

    Uses the exact discrete Plancherel identity: with ``a``/``b`` the side-1 /
    side-2 values of ``f`` and ``W_X`` the DFT of the squared lag profile
    ``|X|^2``,

        ``Var = F(0) sum a^2 + H(0) sum b^2
                - (1/N) Re sum_k [ W_F |a_hat|^2 + W_H |b_hat|^2
                                   - 2 W_G conj(a_hat) b_hat ]``.

    Assumes the counting measure on the ``2N``-point torus space (matching
    ``variance(to_jkernel(T, space), f)`` for unit-weight spaces).
    """
    n = kernel.N
    if f.space.n1 != n or f.space.n2 != n:
        raise ValueError(f"test function must live on an (N, N) = ({n}, {n}) space")
    a = f.values[: n]
    b = f.values[n :]
    f0 = kernel.F[0]
    h0 = kernel.H[0]
    ahat = dft_forward(a)
    bhat = dft_forward(b)
    wf = dft_forward(np.abs(kernel.F) ** 2)
    wh = dft_forward(np.abs(kernel.H) ** 2)
    wg = dft_forward(np.abs(kernel.G) ** 2)
    quad = (
        np.sum(wf * np.abs(ahat) ** 2)
        + np.sum(wh * np.abs(bhat) ** 2)
        - 2.0 * np.sum(wg * ahat.conj() * bhat)
    )
    total = f0 * np.sum(a * a) + h0 * np.sum(b * b) - quad / n
    return _assert_real(complex(total), "spectral variance")


def compositions(n: int) -> Iterator[tuple[int, ...]]:
    """Ordered compositions of ``n`` into positive parts, lexicographically."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        yield (1,)
        return
    for first in range(1, n + 1):
        if first == n:
            yield (n,)
        else:
            for rest in compositions(n - first):
                yield (first,) + rest


def cumulants(kernel: JKernelMatrix, f: TestFunction, nmax: int) -> CumulantSeries:
    """Cumulants ``C_1 .. C_nmax`` of ``S_f`` by the composition formula.

    Every ordered composition ``(n_1 .. n_m)`` of ``n`` contributes
    ``((-1)^{m+1}/m) * n!/(n_1! ... n_m!) * Tr(K f^{n_1} ... K f^{n_m})``;
    multinomial coefficients are exact integers, terms are accumulated in
    lexicographic composition order, and each assembled cumulant is asserted
    real (the imaginary parts of individual chains cancel in the sum by the
    J-Hermitian reversal symmetry).

    The first two orders are cross-checked against :func:`expectation` and
    :func:`variance` rather than assumed.
    """
    if not isinstance(nmax, int) or not 1 <= nmax <= MAX_CUMULANT_ORDER:
        raise ValueError(f"nmax must be an integer in [1, {MAX_CUMULANT_ORDER}]")
    _check_same_space(kernel, [f])
    powers: dict[int, TestFunction] = {
        p: f.power(p) for p in range(1, nmax + 1)
    }
    values = np.zeros(nmax)
    for n in range(1, nmax + 1):
        total = 0.0 + 0.0j
        factorial_n = math.factorial(n)
        for comp in compositions(n):
            m = len(comp)
            multinomial = factorial_n
            for part in comp:
                multinomial //= math.factorial(part)
            coefficient = ((-1) ** (m + 1)) * multinomial / m
            chain = trace_product(kernel, [powers[p] for p in comp])
            total += coefficient * chain
        values[n - 1] = _assert_real(total, f"cumulant C_{n}")
    series = CumulantSeries(nmax, values)
    _crosscheck_low_orders(kernel, f, series)
    return series


def _crosscheck_low_orders(
    kernel: JKernelMatrix, f: TestFunction, series: CumulantSeries
) -> None:
    mean = expectation(kernel, f)
    if not math.isclose(series.order(1), mean, rel_tol=1e-10, abs_tol=1e-12):
        raise ArithmeticError(
            f"C_1 = {series.order(1)!r} disagrees with the expectation {mean!r}"
        )
    if series.nmax >= 2:
        var = variance(kernel, f)
        if not math.isclose(series.order(2), var, rel_tol=1e-10, abs_tol=1e-12):
            raise ArithmeticError(
                f"C_2 = {series.order(2)!r} disagrees with the variance {var!r}"
            )


def signed_mean_identity(
    kernel: TranslationKernel, f_samples, L: float, h: float
) -> float:
    """Exact mean of the signed scaled statistic from the diagonal lag values.

    Returns ``(F(0) - H(0)) * L * (h * sum(f))`` (dimension 1), where ``f``
    holds the samples of the profile on its own grid and ``h`` is that grid's
    spacing, so ``h * sum(f)`` stands in for the profile's integral.  On the
    torus this equals the exact expectation of the statistic with values
    ``+f`` on side 1 and ``-f`` on side 2 (with Riemann point weights), not
    just its limit.
    """
    f_arr = np.asarray(f_samples, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(f_arr)):
        raise ValueError("f samples must be finite")
    if L <= 0 or h <= 0:
        raise ValueError("L and h must be positive")
    f0 = kernel.F[0]
    h0 = kernel.H[0]
    diff = _assert_real(complex(f0 - h0), "F(0) - H(0)")
    return diff * float(L) * (float(h) * float(np.sum(f_arr)))


def load_test_function(path, space: SplitSpace) -> TestFunction:
    """Read a test function from JSON ``{"values": [real]}`` (strict keys)."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if not isinstance(payload, dict):
        raise ValueError("test function file must contain a JSON object")
    unknown = set(payload) - {"values"}
    if unknown:
        raise ValueError(f"unknown keys in test function file: {sorted(unknown)}")
    if "values" not in payload:
        raise ValueError("test function file must contain 'values'")
    return TestFunction(space, np.array(payload["values"], dtype=np.float64))


def save_test_function(f: TestFunction, path) -> None:
    """Write a test function to JSON ``{"values": [real]}``."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"values": [float(v) for v in f.values]}, fh, allow_nan=False)
        fh.write("\n")
