"""Semiclassically scaled Hermite polynomials and functions in d dimensions.

With ``y = x / sqrt(hbar)``,

    p_n(x)   = prod_j H_{n_j}(y_j)              (physicists' Hermite polynomials)
    psi_n(x) = p_n(x) psi_0(x) / c_n,           c_n = sqrt(2^{|n|} n!)
    psi_0(x) = (pi hbar)^{-d/4} exp(-|x|^2 / (2 hbar)).

Multi-indices are plain tuples of non-negative integers, enumerated in
graded-lexicographic order: by total degree, then lexicographically
with larger leading entries first, so ``(1, 0)`` precedes ``(0, 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np
from scipy.special import betainc

from .errors import InvalidInputError

MultiIndex = tuple[int, ...]


def validate_index(n, d: int | None = None) -> MultiIndex:
    """Coerce ``n`` to a multi-index tuple, checking non-negativity and length."""
    n = tuple(int(k) for k in np.atleast_1d(n))
    if any(k < 0 for k in n):
        raise InvalidInputError(f"multi-index entries must be non-negative, got {n}")
    if d is not None and len(n) != d:
        raise InvalidInputError(f"multi-index {n} has length {len(n)}, expected {d}")
    return n


def graded_lex_key(n: MultiIndex) -> tuple:
    """Sort key of the graded-lexicographic order."""
    return (sum(n), tuple(-k for k in n))


@lru_cache(maxsize=None)
def multi_indices(d: int, N: int) -> tuple[MultiIndex, ...]:
    """All ``n`` with ``|n| <= N`` in graded-lexicographic order."""
    if d < 1 or N < 0:
        raise InvalidInputError(f"need d >= 1 and N >= 0, got d={d}, N={N}")
    out = [n for n in product(range(N + 1), repeat=d) if sum(n) <= N]
    return tuple(sorted(out, key=graded_lex_key))


def indices_of_order(d: int, k: int) -> tuple[MultiIndex, ...]:
    """All ``n`` with ``|n| = k`` in graded-lexicographic order."""
    return tuple(n for n in multi_indices(d, k) if sum(n) == k)


def index_factorial(n: MultiIndex) -> int:
    """``n! = prod_j n_j!``."""
    return math.prod(math.factorial(k) for k in n)


def c_n(n: MultiIndex) -> float:
    """Normalization ``c_n = sqrt(2^{|n|} n!)``."""
    return math.sqrt(2.0 ** sum(n) * index_factorial(n))


def monomial(w: np.ndarray, n: MultiIndex) -> np.ndarray:
    """``w^n = prod_j w_j^{n_j}`` along the last axis of ``w``."""
    w = np.asarray(w)
    out = np.ones(w.shape[:-1], dtype=w.dtype)
    for j, k in enumerate(n):
        if k:
            out = out * w[..., j] ** k
    return out


@dataclass(frozen=True)
class HermiteContext:
    """Dimension, semiclassical parameter and order budget."""

    d: int
    hbar: float = 1.0
    max_order: int = 0

    def __post_init__(self) -> None:
        if int(self.d) < 1:
            raise InvalidInputError("dimension must be positive")
        if not float(self.hbar) > 0.0:
            raise InvalidInputError("hbar must be positive")
        if int(self.max_order) < 0:
            raise InvalidInputError("max_order must be non-negative")

    def check(self, n) -> MultiIndex:
        n = validate_index(n, self.d)
        if sum(n) > self.max_order:
            raise InvalidInputError(f"|n| = {sum(n)} exceeds the order budget {self.max_order}")
        return n


def _points(x, d: int) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim == 0 or x.shape[-1] != d:
        if d == 1 and x.ndim <= 1:
            return x.reshape(-1, 1) if x.ndim == 1 else x.reshape(1)
        raise InvalidInputError(f"points must have trailing dimension {d}, got shape {x.shape}")
    return x


def hermite_poly_1d(kmax: int, y: np.ndarray) -> np.ndarray:
    """Physicists' Hermite polynomials ``H_0..H_kmax`` at ``y`` (stacked on axis 0)."""
    y = np.asarray(y)
    H = np.empty((kmax + 1,) + y.shape, dtype=np.result_type(y, float))
    H[0] = 1.0
    if kmax >= 1:
        H[1] = 2.0 * y
    for k in range(1, kmax):
        H[k + 1] = 2.0 * y * H[k] - 2.0 * k * H[k - 1]
    return H


def hermite_fn_1d(kmax: int, y: np.ndarray) -> np.ndarray:
    """Normalized Hermite functions (unit scale) ``h_0..h_kmax`` at ``y``.

    Uses the normalized recurrence
    ``h_{k+1} = sqrt(2/(k+1)) y h_k - sqrt(k/(k+1)) h_{k-1}``,
    which stays bounded where the polynomial recurrence overflows.
    """
    y = np.asarray(y)
    h = np.empty((kmax + 1,) + y.shape, dtype=np.result_type(y, float))
    h[0] = np.pi ** -0.25 * np.exp(-0.5 * y * y)
    if kmax >= 1:
        h[1] = np.sqrt(2.0) * y * h[0]
    for k in range(1, kmax):
        h[k + 1] = np.sqrt(2.0 / (k + 1)) * y * h[k] - np.sqrt(k / (k + 1)) * h[k - 1]
    return h


def hermite_poly_eval(ctx: HermiteContext, n, x) -> np.ndarray:
    """``p^hbar_n(x) = prod_j H_{n_j}(x_j / sqrt(hbar))``.

    ``x`` has shape ``(..., d)``; the result has shape ``x.shape[:-1]``.
    Complex arguments are allowed.

    Examples:
        >>> float(hermite_poly_eval(HermiteContext(1, 1.0, 2), (2,), [1.0]))
        2.0
    """
    n = ctx.check(n)
    y = _points(x, ctx.d) / np.sqrt(ctx.hbar)
    out = np.ones(y.shape[:-1], dtype=np.result_type(y, float))
    for j, k in enumerate(n):
        out = out * hermite_poly_1d(k, y[..., j])[k]
    return out


def hermite_fn_eval(ctx: HermiteContext, n, x) -> np.ndarray:
    """``psi^hbar_n(x) = p^hbar_n(x) psi^hbar_0(x) / c_n``, via the normalized recurrence."""
    n = ctx.check(n)
    y = _points(x, ctx.d) / np.sqrt(ctx.hbar)
    out = np.full(y.shape[:-1], ctx.hbar ** (-0.25 * ctx.d), dtype=np.result_type(y, float))
    for j, k in enumerate(n):
        out = out * hermite_fn_1d(k, y[..., j])[k]
    return out


def hermite_fn_table(ctx: HermiteContext, x) -> dict[MultiIndex, np.ndarray]:
    """All ``psi^hbar_n`` with ``|n| <= max_order`` at the points ``x``."""
    y = _points(x, ctx.d) / np.sqrt(ctx.hbar)
    N = ctx.max_order
    per_axis = [hermite_fn_1d(N, y[..., j]) for j in range(ctx.d)]
    scale = ctx.hbar ** (-0.25 * ctx.d)
    table = {}
    for n in multi_indices(ctx.d, N):
        v = np.full(y.shape[:-1], scale, dtype=per_axis[0].dtype)
        for j, k in enumerate(n):
            v = v * per_axis[j][k]
        table[n] = v
    return table


def hermite_ground(ctx: HermiteContext, x) -> np.ndarray:
    """``psi^hbar_0(x) = (pi hbar)^{-d/4} exp(-|x|^2 / 2 hbar)``."""
    x = _points(x, ctx.d)
    return (np.pi * ctx.hbar) ** (-0.25 * ctx.d) * np.exp(-np.sum(x * x, axis=-1) / (2.0 * ctx.hbar))


def hermite_generating(ctx: HermiteContext, w, x, polynomial: bool = False) -> np.ndarray:
    """Generating function of the Hermite functions (or polynomials).

    ``Gamma(w, x) = (pi hbar)^{-d/4} exp(-|x|^2/2hbar + (2/sqrt(hbar)) w^T x - w^T w)``
    equals ``sum_n psi_n(x) c_n w^n / n!``.  With ``polynomial=True`` the
    Gaussian factor is dropped, giving ``gamma = sum_n p_n(x) w^n / n!``.
    """
    x = _points(x, ctx.d)
    w = np.asarray(w, dtype=complex)
    if w.shape[-1] != ctx.d:
        raise InvalidInputError(f"w must have trailing dimension {ctx.d}")
    expo = (2.0 / np.sqrt(ctx.hbar)) * np.sum(w * x, axis=-1) - np.sum(w * w, axis=-1)
    if not polynomial:
        expo = expo - np.sum(x * x, axis=-1) / (2.0 * ctx.hbar) - 0.25 * ctx.d * np.log(np.pi * ctx.hbar)
    return np.exp(expo)


def geometric_tail(N: int, rho: float, d: int) -> float:
    """``sum_{l > N} binom(l + d - 1, d - 1) rho^l`` in closed form.

    The sum is ``(1 - rho)^{-d} I_rho(N + 1, d)`` with ``I`` the regularized
    incomplete beta function (negative binomial tail).  Returns ``inf`` for
    ``rho >= 1``.
    """
    if rho >= 1.0:
        return math.inf
    if rho <= 0.0:
        return 0.0
    return float((1.0 - rho) ** (-d) * betainc(N + 1, d, rho))


def hermite_tail_bound(ctx: HermiteContext, N: int, r: float, x, w, scale: float = 1.0) -> float:
    """Upper bound on ``|sum_{|n| > N} p^hbar_n(x) w^n / n!|``.

    Each polynomial obeys ``|p_n(y)| <= (n!/r^{|n|}) exp(d r^2 + 2 r ||y||_1)``
    with ``y = x / sqrt(hbar)``, and ``sum_{|n| = l} |w^n| <= (d scale ||w||_1)^l``
    is counted with ``binom(l + d - 1, d - 1)`` terms, giving a
    negative-binomial tail.  ``scale`` is ``|| |Q|^{-1} conj(Q) ||_inf`` when
    the bound is applied to Hagedorn polynomials and 1 for Hermite ones.

    Returns ``inf`` when ``d scale ||w||_1 >= r``.
    """
    if not r > 0.0:
        raise InvalidInputError("r must be positive")
    if N < 0:
        raise InvalidInputError("N must be non-negative")
    y = np.asarray(_points(x, ctx.d), dtype=float).reshape(-1)[: ctx.d] / np.sqrt(ctx.hbar)
    w = np.asarray(w, dtype=complex).reshape(-1)
    w1 = float(np.sum(np.abs(w)))
    if w1 == 0.0:
        return 0.0
    rho = ctx.d * scale * w1 / r
    if rho >= 1.0:
        return math.inf
    tail = geometric_tail(N, rho, ctx.d)
    if tail == 0.0:
        return 0.0
    log_bound = ctx.d * r * r + 2.0 * r * float(np.sum(np.abs(y))) + math.log(tail)
    return math.exp(log_bound) if log_bound < 700.0 else math.inf
