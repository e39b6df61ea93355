"""Hagedorn wave packets, Hagedorn polynomials and their generating functions.

For a parameter set ``(Q, P, q, p, hbar)`` the ground state is

    phi_0(x) = det(Q)^{-1/2} (pi hbar)^{-d/4}
               exp((i/hbar) [ (x-q)^T P Q^{-1} (x-q) / 2 + p . (x-q) ]),

with the principal square root.  Writing ``x_hat - q`` in terms of the
ladder operators and applying it to ``phi_n`` gives the pointwise recurrence

    sqrt(n_j + 1) phi_{n+e_j} = sqrt(2/hbar) (Q^{-1}(x-q))_j phi_n
                                - sum_k (Q^{-1} conj(Q))_{jk} sqrt(n_k) phi_{n-e_k}.

All packets are evaluated as ``phi_0 * r_n`` where ``r_n = phi_n / phi_0``
follows the same recurrence seeded with 1; the Hagedorn polynomial is
``P_n = c_n r_n``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, SingularityError
from .hermite import (
    HermiteContext,
    MultiIndex,
    c_n,
    hermite_poly_eval,
    hermite_tail_bound,
    index_factorial,
    indices_of_order,
    monomial,
    multi_indices,
    validate_index,
)
from .symplectic import COND_LIMIT, NormalizedPair

LOG_TINY = math.log(1e-300)


@dataclass(frozen=True)
class HagedornBasisSpec:
    """A parameter set together with an order budget ``N``."""

    pair: NormalizedPair
    max_order: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.pair, NormalizedPair):
            raise InvalidInputError("expected a NormalizedPair")
        if int(self.max_order) < 0:
            raise InvalidInputError("max_order must be non-negative")
        object.__setattr__(self, "max_order", int(self.max_order))

    @property
    def d(self) -> int:
        return self.pair.d

    @property
    def indices(self) -> tuple[MultiIndex, ...]:
        return multi_indices(self.d, self.max_order)

    def check(self, n) -> MultiIndex:
        n = validate_index(n, self.d)
        if sum(n) > self.max_order:
            raise InvalidInputError(f"|n| = {sum(n)} exceeds the order budget {self.max_order}")
        return n


def _points(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != d:
        raise InvalidInputError(f"points must have trailing dimension {d}, got shape {x.shape}")
    return x


@dataclass(frozen=True)
class _Factors:
    """Matrices reused by every evaluation for one parameter set."""

    Qinv: np.ndarray
    Z: np.ndarray
    M: np.ndarray
    half_logdet: complex


def _factors(pair: NormalizedPair) -> _Factors:
    Q = pair.Q
    sv = np.linalg.svd(Q, compute_uv=False)
    if sv[-1] <= COND_LIMIT * sv[0]:
        raise SingularityError("Q is singular or ill-conditioned")
    Qinv = np.linalg.inv(Q)
    Z = pair.P @ Qinv
    Z = 0.5 * (Z + Z.T)
    det = complex(np.linalg.det(Q))
    return _Factors(Qinv, Z, Qinv @ Q.conj(), 0.5 * complex(np.log(det)))


def ground_state_log(pair: NormalizedPair, x) -> np.ndarray:
    """Complex logarithm of ``phi_0`` (principal branch for ``det Q``)."""
    f = _factors(pair)
    y = _points(x, pair.d) - pair.q
    quad = 0.5 * np.einsum("...i,ij,...j->...", y, f.Z, y) + y @ pair.p
    return -f.half_logdet - 0.25 * pair.d * math.log(math.pi * pair.hbar) + (1j / pair.hbar) * quad


def ground_state_eval(pair: NormalizedPair, x) -> np.ndarray:
    """Ground state ``phi_0`` at points ``x`` of shape ``(..., d)``.

    Examples:
        >>> import numpy as np
        >>> pair = NormalizedPair(np.eye(1), 1j * np.eye(1))
        >>> round(float(ground_state_eval(pair, [0.0]).real), 7)
        0.7511255
    """
    return np.exp(ground_state_log(pair, x))


def _ratio_table(pair: NormalizedPair, x: np.ndarray, N: int) -> dict[MultiIndex, np.ndarray]:
    """``r_n = phi_n / phi_0`` for ``|n| <= N``."""
    f = _factors(pair)
    d = pair.d
    u = (_points(x, d) - pair.q) @ f.Qinv.T * math.sqrt(2.0 / pair.hbar)
    shape = u.shape[:-1]
    table: dict[MultiIndex, np.ndarray] = {(0,) * d: np.ones(shape, dtype=complex)}
    for m in multi_indices(d, N)[1:]:
        j = next(i for i, k in enumerate(m) if k > 0)
        n = m[:j] + (m[j] - 1,) + m[j + 1:]
        acc = u[..., j] * table[n]
        for k in range(d):
            if n[k] > 0:
                lower = n[:k] + (n[k] - 1,) + n[k + 1:]
                acc = acc - f.M[j, k] * math.sqrt(n[k]) * table[lower]
        table[m] = acc / math.sqrt(n[j] + 1)
    return table


def _times_ground(log0: np.ndarray, r: np.ndarray) -> np.ndarray:
    """``exp(log0) * r`` without producing ``inf * 0`` far in the tails."""
    tiny = log0.real < LOG_TINY
    if not np.any(tiny):
        return np.exp(log0) * r
    out = np.exp(np.where(tiny, 0.0, log0)) * r
    with np.errstate(divide="ignore"):
        logr = np.where(r != 0, np.log(np.where(r != 0, r, 1.0)), -np.inf)
    return np.where(tiny, np.exp(log0 + logr), out)


@dataclass(frozen=True)
class PacketTable:
    """Values of every packet ``phi_n`` with ``|n| <= N`` at a list of points.

    ``weights`` is set when the points are quadrature nodes.
    """

    points: np.ndarray
    values: dict
    spec: HagedornBasisSpec
    weights: np.ndarray | None = None

    @property
    def indices(self) -> tuple[MultiIndex, ...]:
        return self.spec.indices

    def matrix(self) -> np.ndarray:
        """Values as an array of shape ``(num_points, num_indices)``, graded-lex columns."""
        return np.stack([self.values[n] for n in self.indices], axis=-1)

    def gram(self) -> np.ndarray:
        """Quadrature Gram matrix ``<phi_m, phi_n>``; needs ``weights``."""
        if self.weights is None:
            raise InvalidInputError("table has no quadrature weights")
        V = self.matrix()
        return V.conj().T @ (self.weights[:, None] * V)

    def header(self) -> list[str]:
        d = self.spec.d
        cols = [f"x{j + 1}" for j in range(d)]
        if self.weights is not None:
            cols.append("weight")
        for n in self.indices:
            tag = "_".join(str(k) for k in n)
            cols += [f"re_{tag}", f"im_{tag}"]
        return cols

    def to_csv(self) -> str:
        """CSV text: coordinates, optional weight, then Re/Im per multi-index in graded-lex order."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header())
        V = self.matrix()
        for i, x in enumerate(self.points):
            row = [repr(float(v)) for v in x]
            if self.weights is not None:
                row.append(repr(float(self.weights[i])))
            for v in V[i]:
                row += [repr(float(v.real)), repr(float(v.imag))]
            writer.writerow(row)
        return buf.getvalue()

    def to_dict(self) -> dict:
        V = self.matrix()
        out = {
            "pair": self.spec.pair.to_dict(),
            "order": self.spec.max_order,
            "indices": [list(n) for n in self.indices],
            "points": self.points.tolist(),
            "values": {"re": V.real.tolist(), "im": V.imag.tolist()},
        }
        if self.weights is not None:
            out["weights"] = self.weights.tolist()
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "PacketTable":
        try:
            pair = NormalizedPair.from_dict(data["pair"])
            spec = HagedornBasisSpec(pair, int(data["order"]))
            points = np.asarray(data["points"], dtype=float).reshape(-1, pair.d)
            V = np.asarray(data["values"]["re"], dtype=float) + 1j * np.asarray(data["values"]["im"], dtype=float)
            indices = [tuple(n) for n in data["indices"]]
            weights = np.asarray(data["weights"], dtype=float) if "weights" in data else None
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"malformed packet table: {exc!r}") from exc
        if indices != list(spec.indices) or V.shape != (points.shape[0], len(indices)):
            raise InvalidInputError("packet table indices or shapes are inconsistent")
        return cls(points, {n: V[:, i] for i, n in enumerate(indices)}, spec, weights)


def packet_eval_all(spec: HagedornBasisSpec, points, weights=None) -> PacketTable:
    """Evaluate every ``phi_n`` with ``|n| <= N`` at the given points.

    Args:
        spec: Parameter set and order budget.
        points: Array of shape ``(num_points, d)``.
        weights: Optional quadrature weights stored alongside the values.

    Returns:
        A :class:`PacketTable`.
    """
    pair = spec.pair
    x = _points(points, pair.d).reshape(-1, pair.d)
    log0 = ground_state_log(pair, x)
    ratios = _ratio_table(pair, x, spec.max_order)
    values = {n: _times_ground(log0, r) for n, r in ratios.items()}
    w = None if weights is None else np.asarray(weights, dtype=float).reshape(-1)
    return PacketTable(x, values, spec, w)


def packet_values(pair: NormalizedPair, N: int, x) -> dict[MultiIndex, np.ndarray]:
    """Packets at points of arbitrary leading shape ``(..., d)``."""
    x = _points(x, pair.d)
    log0 = ground_state_log(pair, x)
    return {n: _times_ground(log0, r) for n, r in _ratio_table(pair, x, N).items()}


def hagedorn_poly_eval(spec: HagedornBasisSpec, n, x) -> np.ndarray:
    """Hagedorn polynomial ``P_n = c_n phi_n / phi_0``, computed without Gaussian factors."""
    n = spec.check(n)
    x = _points(x, spec.d)
    return c_n(n) * _ratio_table(spec.pair, x, sum(n))[n]


def hagedorn_poly_table(spec: HagedornBasisSpec, x) -> dict[MultiIndex, np.ndarray]:
    x = _points(x, spec.d)
    return {n: c_n(n) * r for n, r in _ratio_table(spec.pair, x, spec.max_order).items()}


def generating_eval(spec: HagedornBasisSpec, w, x) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form generating functions ``(Gamma, gamma)``.

    ``gamma = exp((2/sqrt(hbar)) w^T Q^{-1}(x-q) - w^T Q^{-1} conj(Q) w)``
    generates the Hagedorn polynomials, ``sum_n P_n w^n / n!``, and
    ``Gamma = phi_0 gamma`` generates the packets as ``sum_n phi_n c_n w^n / n!``.
    """
    pair = spec.pair
    f = _factors(pair)
    x = _points(x, pair.d)
    w = np.asarray(w, dtype=complex)
    if w.shape[-1] != pair.d:
        raise InvalidInputError(f"w must have trailing dimension {pair.d}")
    u = (x - pair.q) @ f.Qinv.T
    expo = (2.0 / math.sqrt(pair.hbar)) * np.sum(w * u, axis=-1) - np.einsum("...i,ij,...j->...", w, f.M, w)
    gamma = np.exp(expo)
    return np.exp(ground_state_log(pair, x) + expo), gamma


def generating_series(spec: HagedornBasisSpec, w, x, with_cn: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Partial sums up to ``|n| <= N`` matching :func:`generating_eval`.

    ``with_cn=False`` drops the ``c_n`` weight from the packet series, which is
    the alternative normalization ``sum_n phi_n w^n / n!``.
    """
    x = _points(x, spec.d)
    w = np.asarray(w, dtype=complex)
    log0 = ground_state_log(spec.pair, x)
    ratios = _ratio_table(spec.pair, x, spec.max_order)
    packet = 0.0
    poly = 0.0
    for n, r in ratios.items():
        wn = monomial(w, n) / index_factorial(n)
        cn = c_n(n)
        poly = poly + cn * r * wn
        packet = packet + (cn if with_cn else 1.0) * r * wn
    return np.exp(log0) * packet, poly


def abs_Q(Q: np.ndarray) -> np.ndarray:
    """``|Q| = (Q Q^*)^{1/2}``; real symmetric for Lubich pairs."""
    G = Q @ Q.conj().T
    w, V = np.linalg.eigh(0.5 * (G + G.conj().T))
    R = (V * np.sqrt(w)) @ V.conj().T
    return R.real if np.max(np.abs(R.imag)) <= 1e-12 * np.max(np.abs(R)) else R


def expansion_matrix(Q: np.ndarray) -> np.ndarray:
    """``M = |Q|^{-1} conj(Q)``."""
    return np.linalg.solve(abs_Q(Q), Q.conj())


@dataclass(frozen=True)
class HermiteExpansion:
    """Coefficients ``f^k_n`` of ``(M w)^k = sum_n f^k_n w^n``, ``M = |Q|^{-1} conj(Q)``."""

    k_index: MultiIndex
    coeffs: dict = field(default_factory=dict)

    def evaluate(self, w) -> np.ndarray:
        """``sum_n f^k_n w^n``."""
        w = np.asarray(w, dtype=complex)
        return sum(c * monomial(w, n) for n, c in self.coeffs.items())

    def abs_sum(self) -> float:
        return float(sum(abs(c) for c in self.coeffs.values()))


def _poly_mul(a: dict, b: dict) -> dict:
    out: dict = {}
    for na, ca in a.items():
        for nb, cb in b.items():
            n = tuple(i + j for i, j in zip(na, nb))
            out[n] = out.get(n, 0.0) + ca * cb
    return out


def hermite_expansion_coeffs(pair: NormalizedPair, k) -> HermiteExpansion:
    """Multinomial coefficients of ``prod_j ((M w)_j)^{k_j}``.

    Only ``|n| = |k|`` entries occur, so the invariant ``f^k_n = 0`` for
    ``|n| != |k|`` holds by construction.
    """
    d = pair.d
    k = validate_index(k, d)
    M = expansion_matrix(pair.Q)
    rows = [{tuple(int(i == l) for i in range(d)): M[j, l] for l in range(d)} for j in range(d)]
    poly: dict = {(0,) * d: 1.0 + 0.0j}
    for j, kj in enumerate(k):
        for _ in range(kj):
            poly = _poly_mul(poly, rows[j])
    order = sum(k)
    coeffs = {n: complex(poly.get(n, 0.0)) for n in indices_of_order(d, order)}
    return HermiteExpansion(k, coeffs)


def expand_in_hermite(spec: HagedornBasisSpec, n, x) -> np.ndarray:
    """``P_n(x) = sum_{|k|=|n|} (n!/k!) f^k_n p^hbar_k(|Q|^{-1}(x - q))``."""
    n = spec.check(n)
    pair = spec.pair
    x = _points(x, pair.d)
    y = (x - pair.q) @ np.linalg.inv(abs_Q(pair.Q)).T
    order = sum(n)
    ctx = HermiteContext(pair.d, pair.hbar, order)
    nfact = index_factorial(n)
    total = np.zeros(x.shape[:-1], dtype=complex)
    for k in indices_of_order(pair.d, order):
        f = hermite_expansion_coeffs(pair, k).coeffs[n]
        if f != 0.0:
            total = total + (nfact / index_factorial(k)) * f * hermite_poly_eval(ctx, k, y)
    return total


def generating_tail_bound(spec: HagedornBasisSpec, N: int, r: float, w, x, packet: bool = True) -> float:
    """Bound on the truncation error of :func:`generating_series` at order ``N``.

    The Hagedorn polynomial series at ``w`` equals the Hermite series at
    ``M w`` and ``|Q|^{-1}(x - q)``, so the Hermite bound applies with the
    scale ``||M||_inf``.  For the packet series it is multiplied by ``|phi_0(x)|``.
    """
    pair = spec.pair
    x = _points(x, pair.d).reshape(-1)
    y = np.linalg.solve(abs_Q(pair.Q), x - pair.q).real
    M = expansion_matrix(pair.Q)
    scale = float(np.max(np.sum(np.abs(M), axis=1)))
    ctx = HermiteContext(pair.d, pair.hbar, N)
    bound = hermite_tail_bound(ctx, N, r, y, w, scale=scale)
    if packet and math.isfinite(bound):
        bound *= float(np.abs(ground_state_eval(pair, x)))
    return bound


def optimal_tail_bound(spec: HagedornBasisSpec, N: int, w, x, packet: bool = True, samples: int = 80) -> float:
    """:func:`generating_tail_bound` minimized over a logarithmic sweep of ``r``.

    Admissible radii exceed ``d ||M||_inf ||w||_1``; the sweep spans one to
    ``10^3`` times that threshold (or ``[1e-3, 10]`` when ``w = 0``).
    """
    w_arr = np.asarray(w, dtype=complex).reshape(-1)
    scale = float(np.max(np.sum(np.abs(expansion_matrix(spec.pair.Q)), axis=1)))
    r0 = spec.d * scale * float(np.sum(np.abs(w_arr)))
    radii = np.geomspace(1e-3, 10.0, samples) if r0 == 0.0 else r0 * np.geomspace(1.01, 1e3, samples)
    return min(generating_tail_bound(spec, N, float(r), w_arr, x, packet) for r in radii)
