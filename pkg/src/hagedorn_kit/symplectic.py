"""Real symplectic matrices, the Lubich (Q, P) parametrization and Siegel space.

Conventions
-----------
Phase-space vectors are ordered ``z = (q, p)`` and the symplectic form is

    J = [[0, I], [-I, 0]].

A real ``2d x 2d`` matrix ``S = [[A, B], [C, D]]`` is symplectic when
``S^T J S = J``.  Such a matrix is encoded by the complex pair
``Q = A + iB``, ``P = C + iD``, and the product ``P Q^{-1}`` is a point of
the Siegel upper half space.
"""

from __future__ import annotations

import json
from dataclasses import InitVar, dataclass
from typing import Any

import numpy as np

from .errors import (
    FactorizationError,
    InvalidInputError,
    NotFreeError,
    ParametrizationError,
    SingularityError,
)

TOL_SYMPLECTIC = 1e-10
TOL_FREE = 1e-8
# Smallest-to-largest singular value ratio below which a matrix counts as singular.
COND_LIMIT = 1e-12

# Shift parameters tried by free_factorize after R0 = 0 fails.
FREE_RETRY_SEQUENCE = (0.5, 1.0, 2.0, -0.5, -1.0, -2.0, 0.25, 4.0,
                       -0.25, -4.0, 1.5, -1.5, 3.0, -3.0, 0.75, -0.75)


def symplectic_form(d: int) -> np.ndarray:
    """Return the standard symplectic form ``J`` of size ``2d x 2d``."""
    if d < 1:
        raise InvalidInputError(f"dimension must be positive, got {d}")
    eye = np.eye(d)
    zero = np.zeros((d, d))
    return np.block([[zero, eye], [-eye, zero]])


def V_matrix(R: np.ndarray) -> np.ndarray:
    """Symplectic image ``[[I, 0], [R, I]]`` of the chirp ``exp(i x^T R x / 2 hbar)``."""
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if not np.allclose(R, R.T, atol=1e-12, rtol=0.0):
        raise InvalidInputError("V_R requires a symmetric matrix R")
    d = R.shape[0]
    eye = np.eye(d)
    return np.block([[eye, np.zeros((d, d))], [R, eye]])


def M_matrix(L: np.ndarray) -> np.ndarray:
    """Symplectic image ``[[L^{-1}, 0], [0, L^T]]`` of the dilation ``psi(Lx)``."""
    L = np.atleast_2d(np.asarray(L, dtype=float))
    _require_invertible(L, "L")
    d = L.shape[0]
    zero = np.zeros((d, d))
    return np.block([[np.linalg.inv(L), zero], [zero, L.T]])


def blocks(M: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Split a ``2d x 2d`` matrix into its ``d x d`` blocks ``A, B, C, D``."""
    M = np.asarray(M)
    d = M.shape[0] // 2
    return M[:d, :d], M[:d, d:], M[d:, :d], M[d:, d:]


def _max_norm(M: np.ndarray) -> float:
    return float(np.max(np.abs(M))) if np.size(M) else 0.0


def _require_square_even(M: np.ndarray, name: str = "matrix") -> int:
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidInputError(f"{name} must be square, got shape {M.shape}")
    if M.shape[0] % 2 or M.shape[0] == 0:
        raise InvalidInputError(f"{name} must have even positive dimension, got {M.shape[0]}")
    return M.shape[0] // 2


def _require_invertible(M: np.ndarray, name: str, error=SingularityError) -> None:
    if not np.all(np.isfinite(M)):
        raise InvalidInputError(f"{name} has non-finite entries")
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] < COND_LIMIT * sv[0]:
        raise error(f"{name} is singular or ill-conditioned (singular values {sv[-1]:.3e}..{sv[0]:.3e})")


def symplectic_residual(M: np.ndarray) -> float:
    """Max-norm of ``M^T J M - J``."""
    M = np.asarray(M, dtype=float)
    d = _require_square_even(M)
    J = symplectic_form(d)
    return _max_norm(M.T @ J @ M - J)


def check_symplectic(M: np.ndarray, tol: float = TOL_SYMPLECTIC) -> tuple[bool, float]:
    """Test whether ``M`` is symplectic.

    Args:
        M: Real square matrix of even dimension.
        tol: Absolute tolerance on the max-norm of ``M^T J M - J``.

    Returns:
        ``(is_symplectic, residual)``.

    Raises:
        InvalidInputError: If ``M`` is not square with even dimension.
    """
    M = np.asarray(M)
    if np.iscomplexobj(M):
        raise InvalidInputError("symplectic matrices must be real")
    res = symplectic_residual(M)
    return res <= tol, res


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SymplecticMatrix:
    """A certified real symplectic matrix.

    The residual ``||S^T J S - J||_max`` must not exceed ``tol * max(1, ||S||_max^2)``,
    so large products of generators are not rejected for round-off alone.
    """

    entries: np.ndarray
    tol: InitVar[float] = TOL_SYMPLECTIC

    def __post_init__(self, tol: float) -> None:
        M = np.asarray(self.entries)
        if np.iscomplexobj(M):
            if _max_norm(M.imag) > tol * max(1.0, _max_norm(M.real)):
                raise InvalidInputError("symplectic matrices must be real")
            M = M.real
        M = np.asarray(M, dtype=float)
        _require_square_even(M, "symplectic matrix")
        if not np.all(np.isfinite(M)):
            raise InvalidInputError("symplectic matrix has non-finite entries")
        res = symplectic_residual(M)
        if res > tol * max(1.0, _max_norm(M) ** 2):
            raise InvalidInputError(f"matrix is not symplectic: ||S^T J S - J||_max = {res:.3e}")
        object.__setattr__(self, "entries", _frozen(M))

    @property
    def dim(self) -> int:
        return self.entries.shape[0] // 2

    @property
    def A(self) -> np.ndarray:
        return blocks(self.entries)[0]

    @property
    def B(self) -> np.ndarray:
        return blocks(self.entries)[1]

    @property
    def C(self) -> np.ndarray:
        return blocks(self.entries)[2]

    @property
    def D(self) -> np.ndarray:
        return blocks(self.entries)[3]

    def inverse(self) -> "SymplecticMatrix":
        """Return ``S^{-1} = -J S^T J``."""
        J = symplectic_form(self.dim)
        return SymplecticMatrix(-J @ self.entries.T @ J)

    def __matmul__(self, other: Any):
        if isinstance(other, SymplecticMatrix):
            return SymplecticMatrix(self.entries @ other.entries)
        return self.entries @ np.asarray(other)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


def as_matrix(S: "SymplecticMatrix | np.ndarray") -> np.ndarray:
    """Return the entries of ``S`` as a float array, checking shape."""
    M = S.entries if isinstance(S, SymplecticMatrix) else np.asarray(S, dtype=float)
    _require_square_even(M)
    return M


def as_symplectic(S: "SymplecticMatrix | np.ndarray", tol: float = TOL_SYMPLECTIC) -> SymplecticMatrix:
    """Coerce ``S`` to a certified :class:`SymplecticMatrix`."""
    return S if isinstance(S, SymplecticMatrix) else SymplecticMatrix(np.asarray(S, dtype=float), tol=tol)


def pair_residuals(Q: np.ndarray, P: np.ndarray) -> dict[str, float]:
    """Residuals of the two Lubich conditions for arbitrary complex ``Q, P``.

    Returns a dict with keys ``"QtP - PtQ"`` (should vanish) and
    ``"Q*P - P*Q - 2iI"`` (should vanish).
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=complex))
    P = np.atleast_2d(np.asarray(P, dtype=complex))
    d = Q.shape[0]
    sym = Q.T @ P - P.T @ Q
    herm = Q.conj().T @ P - P.conj().T @ Q - 2j * np.eye(d)
    return {"QtP - PtQ": _max_norm(sym), "Q*P - P*Q - 2iI": _max_norm(herm)}


@dataclass(frozen=True)
class NormalizedPair:
    """Hagedorn parameter set ``(Q, P, q, p, hbar)``.

    ``Q`` and ``P`` satisfy ``Q^T P - P^T Q = 0`` and ``Q* P - P* Q = 2iI``.
    Validation happens on construction and raises
    :class:`~hagedorn_kit.errors.ParametrizationError` naming the first
    violated condition.  The tolerance is scaled by ``max(1, |Q|_max |P|_max)``.
    """

    Q: np.ndarray
    P: np.ndarray
    q: np.ndarray = None
    p: np.ndarray = None
    hbar: float = 1.0
    tol: InitVar[float] = TOL_SYMPLECTIC

    def __post_init__(self, tol: float) -> None:
        Q = np.atleast_2d(np.asarray(self.Q, dtype=complex))
        P = np.atleast_2d(np.asarray(self.P, dtype=complex))
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or P.shape != Q.shape:
            raise InvalidInputError(f"Q and P must be square of equal shape, got {Q.shape}, {P.shape}")
        d = Q.shape[0]
        q = np.zeros(d) if self.q is None else np.atleast_1d(np.asarray(self.q, dtype=float))
        p = np.zeros(d) if self.p is None else np.atleast_1d(np.asarray(self.p, dtype=float))
        if q.shape != (d,) or p.shape != (d,):
            raise InvalidInputError(f"q and p must have length {d}")
        if not (np.all(np.isfinite(Q)) and np.all(np.isfinite(P)) and np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise InvalidInputError("pair has non-finite entries")
        hbar = float(self.hbar)
        if not hbar > 0.0:
            raise InvalidInputError(f"hbar must be positive, got {hbar}")
        scale = max(1.0, _max_norm(Q) * _max_norm(P))
        res = pair_residuals(Q, P)
        if res["QtP - PtQ"] > tol * scale:
            raise ParametrizationError(f"Q^T P - P^T Q != 0 (residual {res['QtP - PtQ']:.3e})")
        if res["Q*P - P*Q - 2iI"] > tol * scale:
            raise ParametrizationError(f"Q*P - P*Q != 2iI (residual {res['Q*P - P*Q - 2iI']:.3e})")
        _require_invertible(Q, "Q", ParametrizationError)
        _require_invertible(P, "P", ParametrizationError)
        Z = np.linalg.solve(Q.T, P.T).T
        if np.min(np.linalg.eigvalsh(0.5 * (Z.imag + Z.imag.T))) <= 0.0:
            raise ParametrizationError("Im(P Q^-1) is not positive definite")
        object.__setattr__(self, "Q", _frozen(Q))
        object.__setattr__(self, "P", _frozen(P))
        object.__setattr__(self, "q", _frozen(q))
        object.__setattr__(self, "p", _frozen(p))
        object.__setattr__(self, "hbar", hbar)

    @property
    def d(self) -> int:
        return self.Q.shape[0]

    @property
    def z(self) -> np.ndarray:
        """Phase-space center ``(q, p)``."""
        return np.concatenate([self.q, self.p])

    def with_center(self, q=None, p=None) -> "NormalizedPair":
        return NormalizedPair(self.Q, self.P, self.q if q is None else q, self.p if p is None else p, self.hbar)

    def to_dict(self) -> dict:
        """Serialize to the canonical JSON schema."""
        return {
            "hbar": self.hbar,
            "d": self.d,
            "Q": {"re": self.Q.real.tolist(), "im": self.Q.imag.tolist()},
            "P": {"re": self.P.real.tolist(), "im": self.P.imag.tolist()},
            "q": self.q.tolist(),
            "p": self.p.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict, tol: float = TOL_SYMPLECTIC) -> "NormalizedPair":
        """Parse the canonical JSON schema, validating shapes and Lubich conditions."""
        Q, P, q, p, hbar = parse_pair_dict(data)
        return cls(Q, P, q, p, hbar, tol=tol)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str, tol: float = TOL_SYMPLECTIC) -> "NormalizedPair":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"malformed JSON: {exc}") from exc
        return cls.from_dict(data, tol=tol)


def parse_pair_dict(data: dict) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, float]:
    """Read ``(Q, P, q, p, hbar)`` from a schema dict without checking the Lubich conditions."""
    if not isinstance(data, dict):
        raise InvalidInputError("pair JSON must be an object")
    try:
        d = int(data["d"])
        hbar = float(data["hbar"])
        Q = np.asarray(data["Q"]["re"], dtype=float) + 1j * np.asarray(data["Q"]["im"], dtype=float)
        P = np.asarray(data["P"]["re"], dtype=float) + 1j * np.asarray(data["P"]["im"], dtype=float)
        q = np.asarray(data.get("q", [0.0] * d), dtype=float)
        p = np.asarray(data.get("p", [0.0] * d), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"pair JSON does not follow the schema: {exc!r}") from exc
    Q = np.atleast_2d(Q)
    P = np.atleast_2d(P)
    if Q.shape != (d, d) or P.shape != (d, d) or q.shape != (d,) or p.shape != (d,):
        raise InvalidInputError(f"pair JSON shapes inconsistent with d = {d}")
    return Q, P, q, p, hbar


@dataclass(frozen=True)
class SiegelPoint:
    """Symmetric complex matrix with positive definite imaginary part."""

    Z: np.ndarray
    tol: InitVar[float] = 1e-9

    def __post_init__(self, tol: float) -> None:
        Z = np.atleast_2d(np.asarray(self.Z, dtype=complex))
        if Z.ndim != 2 or Z.shape[0] != Z.shape[1]:
            raise InvalidInputError(f"Siegel point must be square, got {Z.shape}")
        if _max_norm(Z - Z.T) > tol * max(1.0, _max_norm(Z)):
            raise InvalidInputError("Siegel point is not symmetric")
        Z = 0.5 * (Z + Z.T)
        if np.min(np.linalg.eigvalsh(Z.imag)) <= 0.0:
            raise InvalidInputError("Siegel point has Im Z not positive definite")
        object.__setattr__(self, "Z", _frozen(Z))

    @property
    def d(self) -> int:
        return self.Z.shape[0]


@dataclass(frozen=True)
class ConstantFrames:
    """The constant matrices ``W``, ``W_hbar``, ``calW`` and ``calW_hbar``."""

    W: np.ndarray
    W_hbar: np.ndarray
    calW: np.ndarray
    calW_hbar: np.ndarray
    W_hbar_inv: np.ndarray
    hbar: float


def constant_frames(d: int, hbar: float = 1.0) -> ConstantFrames:
    """Build the frames for dimension ``d``.

    ``W = [[iI, -iI], [-I, -I]] / sqrt(2)`` is unitary, ``W_hbar = W / sqrt(hbar)``
    and ``calW = W^T J``.  The inverse ``W_hbar^{-1} = sqrt(hbar) W^*`` is exact.
    """
    eye = np.eye(d)
    W = np.block([[1j * eye, -1j * eye], [-eye, -eye]]) / np.sqrt(2.0)
    calW = np.block([[eye, 1j * eye], [eye, -1j * eye]]) / np.sqrt(2.0)
    s = np.sqrt(hbar)
    return ConstantFrames(
        W=_frozen(W),
        W_hbar=_frozen(W / s),
        calW=_frozen(calW),
        calW_hbar=_frozen(calW / s),
        W_hbar_inv=_frozen(s * W.conj().T),
        hbar=float(hbar),
    )


@dataclass(frozen=True)
class SymplecticRotation:
    """Orthogonal symplectic matrix ``[[U, V], [-V, U]]``."""

    U: np.ndarray
    V: np.ndarray
    tol: InitVar[float] = 1e-9

    def __post_init__(self, tol: float) -> None:
        U = np.atleast_2d(np.asarray(self.U, dtype=float))
        V = np.atleast_2d(np.asarray(self.V, dtype=float))
        if U.shape != V.shape or U.shape[0] != U.shape[1]:
            raise InvalidInputError("U and V must be square of equal shape")
        d = U.shape[0]
        if _max_norm(U.T @ V - V.T @ U) > tol:
            raise InvalidInputError("rotation violates U^T V = V^T U")
        if _max_norm(U.T @ U + V.T @ V - np.eye(d)) > tol:
            raise InvalidInputError("rotation violates U^T U + V^T V = I")
        object.__setattr__(self, "U", _frozen(U))
        object.__setattr__(self, "V", _frozen(V))

    @property
    def matrix(self) -> np.ndarray:
        return np.block([[self.U, self.V], [-self.V, self.U]])


def pair_from_symplectic(S, q=None, p=None, hbar: float = 1.0) -> NormalizedPair:
    """Read off ``Q = A + iB`` and ``P = C + iD`` from the blocks of ``S``.

    Examples:
        >>> pair = pair_from_symplectic(symplectic_form(1))
        >>> complex(pair.Q[0, 0]), complex(pair.P[0, 0])
        (1j, (-1+0j))
    """
    S = as_symplectic(S)
    A, B, C, D = blocks(S.entries)
    return NormalizedPair(A + 1j * B, C + 1j * D, q, p, hbar)


def symplectic_from_pair(pair: NormalizedPair) -> SymplecticMatrix:
    """Assemble ``S = [[Re Q, Im Q], [Re P, Im P]]``."""
    if not isinstance(pair, NormalizedPair):
        raise InvalidInputError("expected a NormalizedPair")
    S = np.block([[pair.Q.real, pair.Q.imag], [pair.P.real, pair.P.imag]])
    return SymplecticMatrix(S)


def siegel_project(pair: NormalizedPair) -> SiegelPoint:
    """Return ``Z = P Q^{-1}``."""
    _require_invertible(pair.Q, "Q")
    Z = np.linalg.solve(pair.Q.T, pair.P.T).T
    return SiegelPoint(Z)


def _denominator(S, Z) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    M = as_matrix(S)
    Zm = Z.Z if isinstance(Z, SiegelPoint) else np.atleast_2d(np.asarray(Z, dtype=complex))
    A, B, C, D = blocks(M)
    if Zm.shape != A.shape:
        raise InvalidInputError(f"dimension mismatch: S is {M.shape}, Z is {Zm.shape}")
    return A + B @ Zm, C + D @ Zm, Zm


def siegel_action(S, Z) -> SiegelPoint:
    """Linear fractional action ``(C + DZ)(A + BZ)^{-1}``."""
    den, num, _ = _denominator(S, Z)
    _require_invertible(den, "A + BZ")
    return SiegelPoint(np.linalg.solve(den.T, num.T).T)


def mu_factor(S, Z) -> complex:
    """Branch factor ``det(A + BZ)^{-1/2}`` on the principal square root branch."""
    den, _, _ = _denominator(S, Z)
    det = complex(np.linalg.det(den))
    if abs(det) == 0.0 or not np.isfinite(det):
        raise SingularityError("det(A + BZ) vanishes")
    _require_invertible(den, "A + BZ")
    return 1.0 / np.sqrt(det)


def _sign_normalize(u: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(u) > 1e-12)
    if nz.size and u[nz[0]] < 0:
        return -u
    return u


def symplectic_diagonalize(S, pair_tol: float = 1e-8) -> tuple[SymplecticRotation, np.ndarray]:
    """Orthogonal symplectic ``R`` with ``R S S^T R^T = diag(lam, 1/lam)``.

    The eigenvectors of ``G = S S^T`` for eigenvalues ``lam > 1`` form an
    isotropic set automatically.  The eigenspace of ``lam = 1`` is invariant
    under ``J`` and is given an isotropic basis by Gram-Schmidt against the
    vectors already chosen and their ``J`` images.

    Args:
        S: Symplectic matrix.
        pair_tol: Relative tolerance under which an eigenvalue counts as 1.

    Returns:
        ``(R, lambdas)`` with ``lambdas`` sorted descending.
    """
    M = as_matrix(as_symplectic(S))
    d = M.shape[0] // 2
    J = symplectic_form(d)
    G = M @ M.T
    G = 0.5 * (G + G.T)
    evals, evecs = np.linalg.eigh(G)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]

    n_strict = int(np.sum(np.log(evals[:d]) > pair_tol))
    chosen = [evecs[:, j] for j in range(n_strict)]
    unit = evecs[:, n_strict:2 * d - n_strict]
    # Projecting the coordinate axes onto the unit eigenspace gives S = I the answer R = I.
    unit_proj = unit @ unit.T
    W = [u for u in chosen] + [-J @ u for u in chosen]
    for _ in range(d - n_strict):
        cand = unit_proj.copy()
        if W:
            Wm = np.column_stack(W)
            cand = cand - Wm @ (Wm.T @ cand)
        norms = np.linalg.norm(cand, axis=0)
        k = int(np.flatnonzero(norms >= 0.5 * norms.max())[0])
        u = cand[:, k] / np.linalg.norm(cand[:, k])
        chosen.append(u)
        W.extend([u, -J @ u])

    rows = np.array(chosen)
    X = rows[:, :d] + 1j * rows[:, d:]
    # Polar cleanup keeps the [[U, V], [-V, U]] structure and makes it exactly orthogonal.
    w, vecs = np.linalg.eigh(X @ X.conj().T)
    X = (vecs * (1.0 / np.sqrt(w))) @ vecs.conj().T @ X
    rows = np.hstack([X.real, X.imag])
    rows = np.array([_sign_normalize(r) for r in rows])
    lams = np.einsum("ij,jk,ik->i", rows, G, rows)

    idx = sorted(range(d), key=lambda j: (-round(float(lams[j]), 10), tuple(-np.round(rows[j], 12))))
    rows = rows[idx]
    lams = lams[idx]
    R = SymplecticRotation(rows[:, :d], rows[:, d:])
    return R, lams


def free_generator_matrices(S) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Parameters of ``S = V_{D B^-1} M_{B^-1} J V_{B^-1 A}`` for free ``S``.

    Returns ``(D B^{-1}, B^{-1}, B^{-1} A, B)``.
    """
    M = as_matrix(S)
    A, B, C, D = blocks(M)
    sv = np.linalg.svd(B, compute_uv=False)
    if sv[-1] <= COND_LIMIT * max(1.0, sv[0]):
        raise NotFreeError("B block is singular; matrix is not free")
    Binv = np.linalg.inv(B)
    R_out = D @ Binv
    R_in = Binv @ A
    return 0.5 * (R_out + R_out.T), Binv, 0.5 * (R_in + R_in.T), B


def _shift_matrix(d: int, t: float) -> np.ndarray:
    """``S2 = J V_{tI}``; its B block is the identity, so it is always free."""
    return symplectic_form(d) @ V_matrix(t * np.eye(d))


def _free_candidate(M: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
    d = M.shape[0] // 2
    S2 = _shift_matrix(d, t)
    J = symplectic_form(d)
    S2_inv = -J @ S2.T @ J
    return M @ S2_inv, S2


def _factor_cost(S1: np.ndarray, t: float) -> float:
    R_out, Binv, R_in, _ = free_generator_matrices(S1)
    return max(np.linalg.norm(R_out, 2), np.linalg.norm(Binv, 2), np.linalg.norm(R_in, 2), abs(t))


def free_factorize(S, tol: float = TOL_FREE, well_conditioned: bool = False) -> tuple[SymplecticMatrix, SymplecticMatrix]:
    """Write ``S = S1 S2`` with both factors free (invertible B block).

    The right factor is ``S2 = J V_{t I}``, starting from ``t = 0`` and
    stepping through :data:`FREE_RETRY_SEQUENCE` while
    ``|det B(S1)| <= tol * ||S1||_max``.  The B block of ``S1`` equals
    ``tB - A``, so shifting ``t`` changes it, whereas a left shift
    ``V_{tI} J`` would leave it at ``-A`` for every ``t``.

    Args:
        S: Symplectic matrix.
        tol: Freeness threshold.
        well_conditioned: Scan every candidate ``t`` and keep the one whose
            generator parameters are smallest in norm instead of the first
            free one.  Grid realizations use this.

    Returns:
        ``(S1, S2)``.

    Raises:
        FactorizationError: If no candidate is free.
    """
    M = as_matrix(as_symplectic(S))
    best = None
    for t in (0.0,) + FREE_RETRY_SEQUENCE:
        S1, S2 = _free_candidate(M, t)
        detB = abs(np.linalg.det(blocks(S1)[1]))
        if detB <= tol * _max_norm(S1):
            continue
        if not well_conditioned:
            return SymplecticMatrix(S1), SymplecticMatrix(S2)
        cost = _factor_cost(S1, t)
        if best is None or cost < best[0] - 1e-12:
            best = (cost, S1, S2)
    if best is None:
        raise FactorizationError("no free factorization found within the retry budget")
    return SymplecticMatrix(best[1]), SymplecticMatrix(best[2])
