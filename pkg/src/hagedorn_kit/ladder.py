"""Coefficient algebra of operators linear in position and momentum.

A coefficient vector ``c`` in C^{2d} stands for the operator

    varrho(c; z_hat - z) = c^T J (z_hat - z) = c_p . (p_hat - p) - c_q . (x_hat - q),

where ``c = (c_q, c_p)``.  Commutators of such operators are scalars,
``[varrho(a), varrho(b)] = i hbar a^T J b``, so every identity here is a
matrix identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .symplectic import (
    NormalizedPair,
    as_matrix,
    check_symplectic,
    constant_frames,
    symplectic_form,
)

TOL_LADDER = 1e-8


def _frozen(a, dtype) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LinearObservable:
    """The operator ``coeff^T J (z_hat - center)``."""

    coeff: np.ndarray
    center: np.ndarray = None
    hbar: float = 1.0

    def __post_init__(self) -> None:
        c = np.atleast_1d(np.asarray(self.coeff, dtype=complex))
        if c.ndim != 1 or c.size % 2:
            raise InvalidInputError(f"coefficient vector must have even length, got shape {c.shape}")
        z = np.zeros(c.size) if self.center is None else np.atleast_1d(np.asarray(self.center, dtype=float))
        if z.shape != c.shape:
            raise InvalidInputError("center and coefficient vector differ in length")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(z))):
            raise InvalidInputError("observable has non-finite entries")
        if not float(self.hbar) > 0.0:
            raise InvalidInputError("hbar must be positive")
        object.__setattr__(self, "coeff", _frozen(c, complex))
        object.__setattr__(self, "center", _frozen(z, float))
        object.__setattr__(self, "hbar", float(self.hbar))

    @property
    def d(self) -> int:
        return self.coeff.size // 2

    def xp_coefficients(self) -> tuple[np.ndarray, np.ndarray]:
        """``(a, b)`` such that the operator equals ``a . (x_hat - q) + b . (p_hat - p)``."""
        d = self.d
        return -self.coeff[d:], self.coeff[:d].copy()

    @classmethod
    def from_xp(cls, a, b, center=None, hbar: float = 1.0) -> "LinearObservable":
        """Build the observable ``a . (x_hat - q) + b . (p_hat - p)``."""
        a = np.atleast_1d(np.asarray(a, dtype=complex))
        b = np.atleast_1d(np.asarray(b, dtype=complex))
        return cls(np.concatenate([b, -a]), center, hbar)


def commutator(a: LinearObservable, b: LinearObservable) -> complex:
    """Scalar value of ``[a, b] = i hbar a^T J b``.

    Examples:
        >>> commutator(LinearObservable([1, 0]), LinearObservable([0, 1]))
        1j
    """
    if a.coeff.shape != b.coeff.shape:
        raise InvalidInputError("observables act on different dimensions")
    if a.hbar != b.hbar or not np.array_equal(a.center, b.center):
        raise InvalidInputError("observables must share hbar and center")
    J = symplectic_form(a.d)
    return complex(1j * a.hbar * (a.coeff @ J @ b.coeff))


@dataclass(frozen=True)
class OperatorTuple:
    """The tuple ``rho(X; z_hat - z) = X^T J (z_hat - z)``.

    Operator ``j`` has coefficient vector ``X[:, j]``; the first ``d``
    operators form the flat half and the last ``d`` the sharp half.
    """

    X: np.ndarray
    center: np.ndarray = None
    hbar: float = 1.0

    def __post_init__(self) -> None:
        X = np.atleast_2d(np.asarray(self.X, dtype=complex))
        if X.ndim != 2 or X.shape[0] != X.shape[1] or X.shape[0] % 2:
            raise InvalidInputError(f"X must be square of even dimension, got {X.shape}")
        z = np.zeros(X.shape[0]) if self.center is None else np.atleast_1d(np.asarray(self.center, dtype=float))
        if z.shape != (X.shape[0],):
            raise InvalidInputError("center has the wrong length")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(z))):
            raise InvalidInputError("operator tuple has non-finite entries")
        if not float(self.hbar) > 0.0:
            raise InvalidInputError("hbar must be positive")
        object.__setattr__(self, "X", _frozen(X, complex))
        object.__setattr__(self, "center", _frozen(z, float))
        object.__setattr__(self, "hbar", float(self.hbar))

    @property
    def d(self) -> int:
        return self.X.shape[0] // 2

    def observable(self, j: int) -> LinearObservable:
        return LinearObservable(self.X[:, j], self.center, self.hbar)

    @property
    def flat(self) -> list[LinearObservable]:
        return [self.observable(j) for j in range(self.d)]

    @property
    def sharp(self) -> list[LinearObservable]:
        return [self.observable(j) for j in range(self.d, 2 * self.d)]

    def commutator_matrix(self) -> np.ndarray:
        """Matrix of ``[rho_j, rho_k] = i hbar (X^T J X)_{jk}``."""
        J = symplectic_form(self.d)
        return 1j * self.hbar * (self.X.T @ J @ self.X)


@dataclass(frozen=True)
class LadderVerdict:
    """Outcome of :func:`is_ladder`."""

    accepted: bool
    S: np.ndarray | None = None
    reason: str | None = None
    residuals: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "S": None if self.S is None else self.S.tolist(),
            "reason": self.reason,
            "residuals": dict(sorted(self.residuals.items())),
        }


def _max_norm(M: np.ndarray) -> float:
    return float(np.max(np.abs(M)))


def is_ladder(X: np.ndarray, hbar: float = 1.0, tol: float = TOL_LADDER) -> LadderVerdict:
    """Decide whether ``rho(X; z_hat)`` is a set of ladder operators.

    The conditions are checked in order:

    1. ``X^T J X = -(i/hbar) J``, relative to ``max(||X||_max^2, 1/hbar)``;
    2. the sharp blocks are conjugates of the flat ones, ``B = conj(A)`` and
       ``D = conj(C)``, relative to ``||X||_max``;
    3. ``S = X W_hbar^{-1}`` is real and symplectic.

    Args:
        X: Complex ``2d x 2d`` matrix.
        hbar: Semiclassical parameter.
        tol: Relative tolerance.

    Returns:
        A :class:`LadderVerdict`; on rejection ``reason`` names the first
        violated condition.
    """
    X = np.asarray(X, dtype=complex)
    if X.ndim != 2 or X.shape[0] != X.shape[1] or X.shape[0] % 2:
        raise InvalidInputError(f"X must be square of even dimension, got {X.shape}")
    d = X.shape[0] // 2
    J = symplectic_form(d)
    xmax = _max_norm(X)
    res = {}

    res["commutation"] = _max_norm(X.T @ J @ X + (1j / hbar) * J) / max(xmax**2, 1.0 / hbar)
    if res["commutation"] > tol:
        return LadderVerdict(False, reason="X^T J X != -(i/hbar) J", residuals=res)

    res["adjoint"] = max(_max_norm(X[:d, d:] - X[:d, :d].conj()), _max_norm(X[d:, d:] - X[d:, :d].conj())) / xmax
    if res["adjoint"] > tol:
        return LadderVerdict(False, reason="sharp blocks are not conjugates of flat blocks", residuals=res)

    S = X @ constant_frames(d, hbar).W_hbar_inv
    smax = _max_norm(S)
    res["imaginary"] = _max_norm(S.imag) / smax
    if res["imaginary"] > tol:
        return LadderVerdict(False, reason="X W_hbar^{-1} is not real", residuals=res)
    S = S.real
    ok, sres = check_symplectic(S, tol * max(1.0, smax**2))
    res["symplectic"] = sres
    if not ok:
        return LadderVerdict(False, reason="X W_hbar^{-1} is not symplectic", residuals=res)
    return LadderVerdict(True, S=S, residuals=res)


def ladder_matrix(S, hbar: float = 1.0) -> np.ndarray:
    """``X = S W_hbar``, the coefficient matrix of the ladder tuple for ``S``."""
    M = as_matrix(S)
    return M @ constant_frames(M.shape[0] // 2, hbar).W_hbar


def recover_symplectic(X: np.ndarray, hbar: float = 1.0) -> np.ndarray:
    """Closed-form inverse of :func:`ladder_matrix`.

    With flat blocks ``A = A1 + i A2`` and ``C = C1 + i C2`` the matrix is
    ``sqrt(2 hbar) [[A2, -A1], [C2, -C1]]``.
    """
    X = np.asarray(X, dtype=complex)
    d = X.shape[0] // 2
    A, C = X[:d, :d], X[d:, :d]
    return np.sqrt(2.0 * hbar) * np.block([[A.imag, -A.real], [C.imag, -C.real]])


@dataclass(frozen=True)
class HagedornLadder:
    """Lowering and raising operators of a Hagedorn parameter set.

    Row ``j`` of ``lowering`` is the coefficient vector (in the
    ``c^T J (z_hat - z)`` convention) of the lowering operator ``A_j``;
    ``raising`` holds the conjugate rows for ``A_j^*``.
    """

    lowering: np.ndarray
    raising: np.ndarray
    pair: NormalizedPair

    @property
    def tuple(self) -> OperatorTuple:
        """The full tuple ``(A, A^*)`` as an :class:`OperatorTuple`."""
        return OperatorTuple(np.vstack([self.lowering, self.raising]).T, self.pair.z, self.pair.hbar)

    def commutator_matrix(self) -> np.ndarray:
        """Matrix of ``[rho_j, rho_k]``; equals ``J`` for a valid ladder."""
        return self.tuple.commutator_matrix()


def hagedorn_ladder(pair: NormalizedPair) -> HagedornLadder:
    """Ladder operators ``A = -(i/sqrt(2 hbar)) [P^T (x_hat - q) - Q^T (p_hat - p)]``.

    In ``x/p`` coefficients, row ``j`` of the lowering operator has
    ``a = -(i/sqrt(2 hbar)) P[:, j]`` and ``b = (i/sqrt(2 hbar)) Q[:, j]``.
    """
    if not isinstance(pair, NormalizedPair):
        raise InvalidInputError("expected a NormalizedPair")
    s = 1j / np.sqrt(2.0 * pair.hbar)
    a = -s * pair.P.T
    b = s * pair.Q.T
    lowering = np.hstack([b, -a])
    return HagedornLadder(_frozen(lowering, complex), _frozen(lowering.conj(), complex), pair)


def transform_by_symplectic(S0, t: OperatorTuple) -> OperatorTuple:
    """Conjugation by the metaplectic operator of ``S0``: ``X -> S0 X``, ``z -> S0 z``."""
    M = as_matrix(S0)
    if M.shape != t.X.shape:
        raise InvalidInputError(f"dimension mismatch: S0 is {M.shape}, X is {t.X.shape}")
    return OperatorTuple(M @ t.X, M @ t.center, t.hbar)


def transform_by_translation(z0, t: OperatorTuple) -> OperatorTuple:
    """Conjugation by the Heisenberg-Weyl operator: ``z -> z + z0``."""
    z0 = np.atleast_1d(np.asarray(z0, dtype=float))
    if z0.shape != t.center.shape:
        raise InvalidInputError(f"dimension mismatch: z0 has length {z0.size}, expected {t.center.size}")
    return OperatorTuple(t.X, t.center + z0, t.hbar)
