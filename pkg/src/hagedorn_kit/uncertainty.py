"""Ground-state uncertainty: covariance, minimal-uncertainty rotation, 1D angle.

For the ground state ``phi_0`` of ``(Q, P, q, p, hbar)`` the covariance of
``z_hat - z`` is ``(hbar/2) (S S^T + i J)`` with ``S`` the symplectic matrix
of the pair.  An orthogonal symplectic ``R`` with ``R S S^T R^T =
diag(lambda, 1/lambda)`` turns the rotated coordinates ``zeta = R(z_hat - z)
= (xi, eta)`` into pairs with ``Delta xi_j Delta eta_j = hbar/2``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .symplectic import (
    NormalizedPair,
    SymplecticRotation,
    as_matrix,
    symplectic_diagonalize,
    symplectic_form,
    symplectic_from_pair,
)


@dataclass(frozen=True)
class UncertaintyReport:
    """Rotation, Williamson values and per-axis standard deviations."""

    rotation: SymplecticRotation
    lambdas: np.ndarray
    xi_std: np.ndarray
    eta_std: np.ndarray
    hbar: float

    @property
    def products(self) -> np.ndarray:
        return self.xi_std * self.eta_std

    def to_dict(self) -> dict:
        return {
            "hbar": self.hbar,
            "lambdas": self.lambdas.tolist(),
            "rotation": {"U": self.rotation.U.tolist(), "V": self.rotation.V.tolist()},
            "axes": [
                {"delta_xi": float(a), "delta_eta": float(b), "product": float(a * b)}
                for a, b in zip(self.xi_std, self.eta_std)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def ground_covariance(pair: NormalizedPair) -> tuple[np.ndarray, np.ndarray]:
    """Real covariance ``(hbar/2) S S^T`` of ``z_hat - z`` in ``phi_0`` and its imaginary part ``(hbar/2) J``.

    Examples:
        >>> pair = NormalizedPair(np.eye(1), 1j * np.eye(1))
        >>> ground_covariance(pair)[0].tolist()
        [[0.5, 0.0], [0.0, 0.5]]
    """
    S = as_matrix(symplectic_from_pair(pair))
    G = S @ S.T
    return 0.5 * pair.hbar * 0.5 * (G + G.T), 0.5 * pair.hbar * symplectic_form(pair.d)


def rotated_std(pair: NormalizedPair, R) -> tuple[np.ndarray, np.ndarray]:
    """Standard deviations of ``R(z_hat - z)`` split into its two halves."""
    cov, _ = ground_covariance(pair)
    R = as_matrix(R) if not isinstance(R, SymplecticRotation) else R.matrix
    var = np.diag(R @ cov @ R.T)
    d = pair.d
    return np.sqrt(var[:d]), np.sqrt(var[d:])


def minimal_rotation(pair: NormalizedPair) -> UncertaintyReport:
    """Rotation attaining ``Delta xi_j Delta eta_j = hbar/2`` for every ``j``.

    The standard deviations come from the closed form
    ``Delta xi_j^2 = (hbar/2) lambda_j`` and ``Delta eta_j^2 = (hbar/2) / lambda_j``.
    """
    R, lam = symplectic_diagonalize(symplectic_from_pair(pair))
    h2 = 0.5 * pair.hbar
    return UncertaintyReport(R, lam, np.sqrt(h2 * lam), np.sqrt(h2 / lam), pair.hbar)


def _scalar(v, name: str) -> complex:
    a = np.asarray(v, dtype=complex)
    if a.size != 1:
        raise InvalidInputError(f"{name} must be a scalar")
    return complex(a.reshape(()))


def theta_1d(Q, P) -> float:
    """Angle with ``tan(2 theta) = 2 Re(P conj(Q)) / (|Q|^2 - |P|^2)``.

    The branch is ``(-pi/4, pi/4)`` when the denominator is non-zero; a zero
    denominator gives ``pi/4`` (or 0 if the numerator vanishes too).  Rotating
    by ``[[cos, sin], [-sin, cos]]`` diagonalizes ``S S^T``.

    Examples:
        >>> theta_1d(1.0, 1j)
        0.0
    """
    Q = _scalar(Q, "Q")
    P = _scalar(P, "P")
    if Q == 0:
        raise InvalidInputError("Q must be non-zero")
    num = 2.0 * (P * Q.conjugate()).real
    den = abs(Q) ** 2 - abs(P) ** 2
    if den == 0.0:
        return 0.25 * math.pi if num != 0.0 else 0.0
    return 0.5 * math.atan(num / den)


def rotation_1d(theta: float) -> SymplecticRotation:
    return SymplecticRotation(np.array([[math.cos(theta)]]), np.array([[math.sin(theta)]]))


def product_sweep(pair: NormalizedPair, thetas) -> np.ndarray:
    """``Delta xi Delta eta`` after rotating a 1D pair by each angle in ``thetas``."""
    if pair.d != 1:
        raise InvalidInputError("the angle sweep is one-dimensional")
    out = []
    for t in np.atleast_1d(thetas):
        a, b = rotated_std(pair, rotation_1d(float(t)))
        out.append(float(a[0] * b[0]))
    return np.array(out)
