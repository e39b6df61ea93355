"""Grids, quadrature and realizations of the Heisenberg-Weyl and metaplectic operators.

Three kinds of functions are supported:

* :class:`GridFunction` -- samples on a uniform tensor grid.  Fourier
  transforms use the FFT, derivatives are spectral, dilations ``psi(Lx)``
  are split into axis scalings and shears that are evaluated by
  trigonometric interpolation.
* :class:`GaussianForm` -- callables ``g(x) exp(x^T M x / 2 + v^T x + c)``
  with ``g`` analytic (polynomial in practice).  Quadratic Fourier
  transforms of such functions are computed by completing the square and
  Gauss-Hermite quadrature along the shifted contour, which is exact for
  polynomial ``g`` of low degree.
* plain callables -- supported for the pointwise operators; quadratic
  Fourier transforms fall back to Gauss-Legendre quadrature with a warning.

Operator conventions: ``(T_z f)(x) = exp((i/hbar) p.(x - q/2)) f(x - q)``,
``J = i^{-d/2} F_hbar``, ``V_R f = exp((i/2hbar) x^T R x) f``,
``M_L f = det(L)^{1/2} f(Lx)``.
"""

from __future__ import annotations

import io
import math
import struct
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import sqrtm

from .errors import InvalidInputError, QuadratureWarning, TruncationWarning
from .hermite import HermiteContext, c_n, hermite_poly_eval
from .ladder import LinearObservable
from .symplectic import (
    COND_LIMIT,
    M_matrix,
    NormalizedPair,
    V_matrix,
    as_matrix,
    blocks,
    free_factorize,
    free_generator_matrices,
    symplectic_form,
)

DEFAULT_POINTS = {1: 256, 2: 128, 3: 64}
BOUNDARY_TOL = 1e-10


# ---------------------------------------------------------------------------
# Grids


@dataclass(frozen=True)
class GridSpec:
    """Uniform tensor grid; axis ``a`` has points ``center - L + j h``, ``h = 2L/m``."""

    centers: tuple[float, ...]
    half_widths: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        c = tuple(float(v) for v in self.centers)
        L = tuple(float(v) for v in self.half_widths)
        m = tuple(int(v) for v in self.counts)
        if not (len(c) == len(L) == len(m)) or not c:
            raise InvalidInputError("grid axes must have matching, non-empty parameter lists")
        for Li, mi in zip(L, m):
            if not Li > 0.0:
                raise InvalidInputError(f"half-width must be positive, got {Li}")
            if mi < 16 or mi & (mi - 1):
                raise InvalidInputError(f"point count must be a power of two >= 16, got {mi}")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "half_widths", L)
        object.__setattr__(self, "counts", m)

    @classmethod
    def uniform(cls, d: int, half_width: float, m: int | None = None, center=0.0) -> "GridSpec":
        m = DEFAULT_POINTS.get(d, 64) if m is None else m
        centers = np.broadcast_to(np.asarray(center, dtype=float), (d,))
        return cls(tuple(centers), (half_width,) * d, (m,) * d)

    @classmethod
    def matched(cls, d: int, hbar: float = 1.0, m: int | None = None) -> "GridSpec":
        """Centered grid equal to its own Fourier dual: ``h = sqrt(2 pi hbar / m)``."""
        m = DEFAULT_POINTS.get(d, 64) if m is None else m
        return cls.uniform(d, math.sqrt(math.pi * hbar * m / 2.0), m)

    @classmethod
    def for_pair(cls, pair: NormalizedPair, m: int | None = None, order: int = 0) -> "GridSpec":
        """Default grid for packets up to ``order``, centered at ``q``.

        ``L = (8 + sqrt(2 order)) sqrt(hbar lambda_max)`` with ``lambda_max`` the
        largest eigenvalue of ``(Im P Q^{-1})^{-1}``; the extra width covers the
        turning point of the order-``N`` Hermite function.
        """
        Z = np.linalg.solve(pair.Q.T, pair.P.T).T
        lam = float(np.max(np.linalg.eigvalsh(np.linalg.inv(0.5 * (Z.imag + Z.imag.T)))))
        width = (8.0 + math.sqrt(2.0 * order)) * math.sqrt(pair.hbar * lam)
        return cls.uniform(pair.d, width, m, pair.q)

    @property
    def d(self) -> int:
        return len(self.counts)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.counts

    @property
    def spacings(self) -> np.ndarray:
        return 2.0 * np.asarray(self.half_widths) / np.asarray(self.counts)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacings))

    def axis(self, a: int) -> np.ndarray:
        h = 2.0 * self.half_widths[a] / self.counts[a]
        return self.centers[a] - self.half_widths[a] + h * np.arange(self.counts[a])

    def axes(self) -> list[np.ndarray]:
        return [self.axis(a) for a in range(self.d)]

    def points(self) -> np.ndarray:
        """Grid points, shape ``(*shape, d)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def wavenumbers(self, a: int) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.counts[a], 2.0 * self.half_widths[a] / self.counts[a])

    def dual(self, hbar: float, centers=None) -> "GridSpec":
        """Momentum grid with spacing ``2 pi hbar / (m h)``."""
        c = np.zeros(self.d) if centers is None else np.broadcast_to(np.asarray(centers, dtype=float), (self.d,))
        widths = tuple(math.pi * hbar / h for h in self.spacings)
        return GridSpec(tuple(c), widths, self.counts)

    def same_as(self, other: "GridSpec", rtol: float = 1e-12) -> bool:
        return (self.counts == other.counts
                and np.allclose(self.centers, other.centers, rtol=0.0, atol=rtol * max(self.half_widths))
                and np.allclose(self.half_widths, other.half_widths, rtol=rtol, atol=0.0))


@dataclass(frozen=True)
class GridFunction:
    """Complex samples on a :class:`GridSpec`.

    ``values`` has shape ``batch + spec.shape``; a non-empty batch holds
    several functions that are transformed together.
    """

    spec: GridSpec
    values: np.ndarray
    hbar: float = 1.0

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=complex, copy=True)
        if v.shape[v.ndim - self.spec.d:] != self.spec.shape:
            raise InvalidInputError(f"values of shape {v.shape} do not match grid shape {self.spec.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("grid function has non-finite values")
        if not float(self.hbar) > 0.0:
            raise InvalidInputError("hbar must be positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "hbar", float(self.hbar))

    @classmethod
    def sample(cls, spec: GridSpec, f: Callable, hbar: float = 1.0) -> "GridFunction":
        return cls(spec, f(spec.points()), hbar)

    @property
    def d(self) -> int:
        return self.spec.d

    @property
    def grid_axes(self) -> tuple[int, ...]:
        return tuple(range(-self.d, 0))

    def with_values(self, values: np.ndarray, spec: GridSpec | None = None) -> "GridFunction":
        return GridFunction(self.spec if spec is None else spec, values, self.hbar)

    def norm(self) -> np.ndarray:
        return np.sqrt(np.sum(np.abs(self.values) ** 2, axis=self.grid_axes) * self.spec.cell_volume)

    def boundary_ratio(self) -> float:
        """Largest boundary magnitude relative to the overall maximum."""
        v = np.abs(self.values)
        peak = float(np.max(v)) if v.size else 0.0
        if peak == 0.0:
            return 0.0
        edge = 0.0
        for a in self.grid_axes:
            edge = max(edge, float(np.max(np.take(v, 0, axis=a))), float(np.max(np.take(v, -1, axis=a))))
        return edge / peak

    # -- I/O ---------------------------------------------------------------

    def to_bytes(self) -> bytes:
        """Binary format: int64 d; per axis int64 m, float64 center, float64 L; float64 hbar;
        then interleaved little-endian float64 Re/Im in row-major order."""
        if self.values.ndim != self.d:
            raise InvalidInputError("binary output holds a single function")
        head = struct.pack("<q", self.d)
        for c, L, m in zip(self.spec.centers, self.spec.half_widths, self.spec.counts):
            head += struct.pack("<qdd", m, c, L)
        head += struct.pack("<d", self.hbar)
        payload = np.empty(self.values.size * 2, dtype="<f8")
        flat = self.values.reshape(-1)
        payload[0::2] = flat.real
        payload[1::2] = flat.imag
        return head + payload.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "GridFunction":
        try:
            (d,) = struct.unpack_from("<q", data, 0)
            off = 8
            centers, widths, counts = [], [], []
            for _ in range(d):
                m, c, L = struct.unpack_from("<qdd", data, off)
                off += 24
                counts.append(m)
                centers.append(c)
                widths.append(L)
            (hbar,) = struct.unpack_from("<d", data, off)
            off += 8
            spec = GridSpec(tuple(centers), tuple(widths), tuple(counts))
            payload = np.frombuffer(data, dtype="<f8", offset=off)
        except struct.error as exc:
            raise InvalidInputError(f"truncated grid file: {exc}") from exc
        if payload.size != 2 * int(np.prod(spec.shape)):
            raise InvalidInputError("grid file payload size does not match its header")
        values = (payload[0::2] + 1j * payload[1::2]).reshape(spec.shape)
        return cls(spec, values, hbar)

    def to_csv(self) -> str:
        """CSV with columns ``x1..xd, re, im`` in row-major order."""
        if self.values.ndim != self.d:
            raise InvalidInputError("CSV output holds a single function")
        pts = self.spec.points().reshape(-1, self.d)
        vals = self.values.reshape(-1)
        buf = io.StringIO()
        buf.write(",".join([f"x{j + 1}" for j in range(self.d)] + ["re", "im"]) + "\n")
        for x, v in zip(pts, vals):
            buf.write(",".join(repr(float(t)) for t in x) + f",{float(v.real)!r},{float(v.imag)!r}\n")
        return buf.getvalue()


def l2_error(a: GridFunction, b: GridFunction, up_to_sign: bool = False) -> tuple[float, int]:
    """Relative L2 distance ``||a - s b|| / ||b||`` and the sign ``s`` used.

    With ``up_to_sign`` the sign in {+1, -1} minimizing the distance is chosen.
    """
    if not a.spec.same_as(b.spec):
        raise InvalidInputError("grid functions live on different grids")
    s = 1
    if up_to_sign and np.real(np.vdot(b.values, a.values)) < 0:
        s = -1
    num = np.sqrt(np.sum(np.abs(a.values - s * b.values) ** 2))
    den = np.sqrt(np.sum(np.abs(b.values) ** 2))
    return float(num / den), s


# ---------------------------------------------------------------------------
# Pointwise and spectral operators on grids


def _axis_shape(d: int, a: int, n: int) -> tuple[int, ...]:
    shape = [1] * d
    shape[a] = n
    return tuple(shape)


def _axis_values(f: GridFunction, a: int, vec: np.ndarray) -> np.ndarray:
    """Broadcast a per-axis vector against the trailing grid axes."""
    return np.reshape(vec, _axis_shape(f.d, a, vec.size))


def _nyquist_symbol(kappa: np.ndarray, shift: np.ndarray) -> np.ndarray:
    """``exp(i kappa s)``, with the Nyquist mode replaced by ``cos(kappa s)``."""
    out = np.exp(1j * np.multiply.outer(shift, kappa)) if np.ndim(shift) else np.exp(1j * kappa * shift)
    m = kappa.size
    if m % 2 == 0:
        out[..., m // 2] = np.cos(np.multiply.outer(shift, kappa[m // 2]) if np.ndim(shift) else kappa[m // 2] * shift)
    return out


def position_apply(f: GridFunction, a: int) -> GridFunction:
    """``x_a f``."""
    return f.with_values(f.values * _axis_values(f, a, f.spec.axis(a)))


def derivative(f: GridFunction, a: int) -> GridFunction:
    """Spectral derivative along axis ``a`` (Nyquist mode dropped)."""
    ax = a - f.d
    kappa = f.spec.wavenumbers(a)
    sym = 1j * kappa
    m = kappa.size
    if m % 2 == 0:
        sym[m // 2] = 0.0
    F = np.fft.fft(f.values, axis=ax)
    F = F * np.reshape(sym, _axis_shape(f.d, a, m))
    return f.with_values(np.fft.ifft(F, axis=ax))


def momentum_apply(f: GridFunction, a: int) -> GridFunction:
    """``p_a f = -i hbar d f / dx_a``."""
    return f.with_values(-1j * f.hbar * derivative(f, a).values)


def observable_apply(obs: LinearObservable, f: GridFunction) -> GridFunction:
    """Apply ``a . (x_hat - q) + b . (p_hat - p)`` for the observable's ``(a, b)``."""
    if obs.d != f.d:
        raise InvalidInputError("observable and grid function differ in dimension")
    if obs.hbar != f.hbar:
        raise InvalidInputError("observable and grid function differ in hbar")
    a_coef, b_coef = obs.xp_coefficients()
    q, p = obs.center[: f.d], obs.center[f.d:]
    out = np.zeros_like(f.values)
    for j in range(f.d):
        if a_coef[j] != 0:
            out = out + a_coef[j] * (position_apply(f, j).values - q[j] * f.values)
        if b_coef[j] != 0:
            out = out + b_coef[j] * (momentum_apply(f, j).values - p[j] * f.values)
    return f.with_values(out)


def shift_apply(f: GridFunction, q, fourier_shift: bool = True) -> GridFunction:
    """``f(x - q)``.

    Shifts that are integer multiples of the spacing use index rolls; other
    shifts multiply by ``exp(-i kappa q)`` in frequency space and raise
    :class:`InvalidInputError` when ``fourier_shift`` is disabled.
    """
    q = np.broadcast_to(np.asarray(q, dtype=float), (f.d,))
    v = f.values
    for a in range(f.d):
        if q[a] == 0.0:
            continue
        h = f.spec.spacings[a]
        steps = q[a] / h
        ax = a - f.d
        if abs(steps - round(steps)) <= 1e-12 * max(1.0, abs(steps)):
            v = np.roll(v, int(round(steps)), axis=ax)
        elif fourier_shift:
            sym = _nyquist_symbol(f.spec.wavenumbers(a), -q[a])
            v = np.fft.ifft(np.fft.fft(v, axis=ax) * np.reshape(sym, _axis_shape(f.d, a, sym.size)), axis=ax)
        else:
            raise InvalidInputError(f"shift {q[a]} is not a multiple of the spacing {h} on axis {a}")
    return f.with_values(v)


def chirp_apply(f: GridFunction, R: np.ndarray) -> GridFunction:
    """``exp((i/2hbar) x^T R x) f``."""
    R = np.atleast_2d(np.asarray(R, dtype=float))
    x = f.spec.points()
    phase = np.einsum("...i,ij,...j->...", x, R, x)
    return f.with_values(f.values * np.exp((0.5j / f.hbar) * phase))


def _interp_matrix(spec: GridSpec, a: int, targets: np.ndarray) -> np.ndarray:
    """Matrix evaluating the trigonometric interpolant along axis ``a`` at ``targets``.

    Targets outside the sampled interval give zero rows.
    """
    x0 = spec.axis(a)[0]
    m = spec.counts[a]
    h = spec.spacings[a]
    kappa = spec.wavenumbers(a)
    E = _nyquist_symbol(kappa, targets - x0) / m
    dft = np.exp(-2j * np.pi * np.outer(np.arange(m), np.arange(m)) / m)
    Mat = E @ dft
    outside = (targets < x0 - 1e-12 * h) | (targets > x0 + (m - 1) * h + 1e-12 * h)
    Mat[outside] = 0.0
    return Mat


def _scale_axis(f: GridFunction, a: int, s: float) -> np.ndarray:
    """Values of ``x -> f(..., s x_a, ...)``."""
    Mat = _interp_matrix(f.spec, a, s * f.spec.axis(a))
    v = np.moveaxis(f.values, a - f.d, -1)
    v = v @ Mat.T
    return np.moveaxis(v, -1, a - f.d)


def _shear_axis(f: GridFunction, a: int, b: int, t: float) -> np.ndarray:
    """Values of ``x -> f(x + t x_b e_a)``; points leaving the grid are zeroed."""
    spec = f.spec
    ax = a - f.d
    xb = spec.axis(b)
    kappa = spec.wavenumbers(a)
    sym = _nyquist_symbol(kappa, t * xb)  # shape (m_b, m_a)
    shape = [1] * f.d
    shape[b] = xb.size
    shape[a] = kappa.size
    if a < b:
        sym = sym.T
    v = np.fft.ifft(np.fft.fft(f.values, axis=ax) * np.reshape(sym, shape), axis=ax)
    xa = spec.axis(a)
    h = spec.spacings[a]
    target = np.add.outer(xa, t * xb) if a < b else np.add.outer(t * xb, xa)
    inside = (target >= xa[0] - 1e-12 * h) & (target <= xa[-1] + 1e-12 * h)
    shape2 = [1] * f.d
    shape2[a] = xa.size
    shape2[b] = xb.size
    return v * np.reshape(inside, shape2)


def _rotation_factors(d: int, i: int, j: int, phi: float) -> list[tuple]:
    """Plane rotation by ``phi`` in coordinates ``(i, j)`` as three shears.

    Angles beyond ``pi/2`` split off a half turn ``diag(-1, -1)`` so that every
    shear coefficient stays in ``[-1, 1]``.
    """
    out: list[tuple] = []
    if abs(phi) > 0.5 * math.pi:
        flip = np.ones(d)
        flip[[i, j]] = -1.0
        out.append(("diag", flip))
        phi -= math.copysign(math.pi, phi)
    if phi == 0.0:
        return out
    t = -math.tan(0.5 * phi)
    return out + [("shear", i, j, t), ("shear", j, i, math.sin(phi)), ("shear", i, j, t)]


def _orthogonal_factors(U: np.ndarray) -> list[tuple]:
    """Givens factorization of an orthogonal ``U`` into rotations and a sign diagonal."""
    U = np.array(U, dtype=float)
    d = U.shape[0]
    out: list[tuple] = []
    for c in range(d):
        for r in range(c + 1, d):
            a, b = U[c, c], U[r, c]
            if b == 0.0:
                continue
            phi = math.atan2(b, a)
            cs, sn = math.cos(phi), math.sin(phi)
            U[[c, r]] = np.array([cs * U[c] + sn * U[r], -sn * U[c] + cs * U[r]])
            out += _rotation_factors(d, c, r, phi)
    return out + [("diag", np.sign(np.diag(U)))]


def elementary_factors(L: np.ndarray) -> list[tuple]:
    """Split ``L`` into ``E_1 E_2 ... E_k`` of axis scalings and shears.

    Factors are ``("diag", s)`` for ``diag(s)`` and ``("shear", a, b, t)`` for
    ``I + t e_a e_b^T``.  With ``L = U diag(sigma) V^T`` both orthogonal
    factors are written as plane rotations, each as three shears bounded by
    one, so intermediate functions stay as compact as the input.
    """
    L = np.atleast_2d(np.asarray(L, dtype=float))
    U, sigma, Vt = np.linalg.svd(L)
    if sigma[-1] < COND_LIMIT * max(1.0, sigma[0]):
        raise InvalidInputError("L is singular")
    return _orthogonal_factors(U) + [("diag", sigma)] + _orthogonal_factors(Vt)


def elementary_product(factors: list[tuple], d: int) -> np.ndarray:
    out = np.eye(d)
    for f in factors:
        if f[0] == "diag":
            E = np.diag(f[1])
        else:
            E = np.eye(d)
            E[f[1], f[2]] += f[3]
        out = out @ E
    return out


def dilation_apply(f: GridFunction, L: np.ndarray) -> GridFunction:
    """``det(L)^{1/2} f(Lx)`` on the same grid, principal square root."""
    L = np.atleast_2d(np.asarray(L, dtype=float))
    if L.shape != (f.d, f.d):
        raise InvalidInputError("L has the wrong shape")
    g = f
    for fac in elementary_factors(L):
        if fac[0] == "diag":
            for a, s in enumerate(fac[1]):
                if s != 1.0:
                    g = g.with_values(_scale_axis(g, a, float(s)))
        else:
            g = g.with_values(_shear_axis(g, fac[1], fac[2], float(fac[3])))
    return g.with_values(g.values * np.sqrt(complex(np.linalg.det(L))))


def fourier_semiclassical(f: GridFunction, out_center=None, warn: bool = True) -> GridFunction:
    """``(F_hbar f)(xi) = (2 pi hbar)^{-d/2} int exp(-(i/hbar) x . xi) f(x) dx`` by FFT.

    The output lives on the dual grid (spacing ``2 pi hbar / (m h)``) centered
    at ``out_center`` (default 0).  Emits :class:`TruncationWarning` when the
    input does not decay at the grid boundary.
    """
    if warn and f.boundary_ratio() > BOUNDARY_TOL:
        warnings.warn(f"grid function does not decay at the boundary (ratio {f.boundary_ratio():.2e})",
                      TruncationWarning, stacklevel=2)
    spec = f.spec
    out = spec.dual(f.hbar, out_center)
    v = f.values
    hb = f.hbar
    for a in range(f.d):
        x = spec.axis(a)
        xi = out.axis(a)
        pre = np.exp(-1j * (x - x[0]) * xi[0] / hb)
        post = np.exp(-1j * x[0] * xi / hb) * spec.spacings[a] / math.sqrt(2.0 * math.pi * hb)
        ax = a - f.d
        v = v * np.reshape(pre, _axis_shape(f.d, a, x.size))
        v = np.fft.fft(v, axis=ax)
        v = v * np.reshape(post, _axis_shape(f.d, a, xi.size))
    return GridFunction(out, v, f.hbar)


# ---------------------------------------------------------------------------
# Gaussian forms


@dataclass(frozen=True)
class GaussianForm:
    """The function ``g(x) exp(x^T M x / 2 + v^T x + c)``.

    ``g`` maps arrays of shape ``(..., d)`` (possibly complex) to ``(...)``;
    ``None`` means ``g = 1``.  ``degree`` is the polynomial degree of ``g``
    and sets the quadrature order of transforms.
    """

    M: np.ndarray
    v: np.ndarray
    c: complex
    hbar: float = 1.0
    g: Callable | None = None
    degree: int = 0

    def __post_init__(self) -> None:
        M = np.atleast_2d(np.asarray(self.M, dtype=complex))
        object.__setattr__(self, "M", 0.5 * (M + M.T))
        object.__setattr__(self, "v", np.atleast_1d(np.asarray(self.v, dtype=complex)))
        object.__setattr__(self, "c", complex(self.c))

    @property
    def d(self) -> int:
        return self.M.shape[0]

    def envelope_log(self, x: np.ndarray) -> np.ndarray:
        return 0.5 * np.einsum("...i,ij,...j->...", x, self.M, x) + x @ self.v + self.c

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x)
        if self.d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        out = np.exp(self.envelope_log(x))
        if self.g is not None:
            out = out * self.g(x)
        return out


def hermite_form(n, hbar: float = 1.0) -> GaussianForm:
    """``psi^hbar_n`` as a :class:`GaussianForm`."""
    n = tuple(int(k) for k in n)
    d = len(n)
    ctx = HermiteContext(d, hbar, sum(n))
    cn = c_n(n)
    return GaussianForm(-np.eye(d) / hbar, np.zeros(d), -0.25 * d * math.log(math.pi * hbar), hbar,
                        None if sum(n) == 0 else (lambda x: hermite_poly_eval(ctx, n, x) / cn), sum(n))


def hermite_generating_form(w, hbar: float = 1.0) -> GaussianForm:
    """``Gamma^hbar(w, .)`` as a :class:`GaussianForm`."""
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    d = w.size
    return GaussianForm(-np.eye(d) / hbar, (2.0 / math.sqrt(hbar)) * w,
                        -(w @ w) - 0.25 * d * math.log(math.pi * hbar), hbar)


def _gh_nodes(d: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    y, w = np.polynomial.hermite.hermgauss(k)
    Y = np.stack(np.meshgrid(*([y] * d), indexing="ij"), axis=-1).reshape(-1, d)
    Wt = np.prod(np.stack(np.meshgrid(*([w] * d), indexing="ij"), axis=-1).reshape(-1, d), axis=-1)
    return Y, Wt


def _chunked(fun: Callable, x: np.ndarray, width: int) -> np.ndarray:
    """Evaluate ``fun`` on the leading points of ``x`` in blocks of bounded work."""
    lead = x.shape[:-1]
    flat = x.reshape(-1, x.shape[-1])
    block = max(1, 200000 // max(1, width))
    if flat.shape[0] <= block:
        return fun(flat).reshape(lead)
    parts = [fun(flat[i:i + block]) for i in range(0, flat.shape[0], block)]
    return np.concatenate(parts).reshape(lead)


def _qft_gaussian(S: np.ndarray, f: GaussianForm, extra_nodes: int = 2) -> GaussianForm:
    d = f.d
    hb = f.hbar
    A, B, C, D = blocks(S)
    _, Binv, R_in, _ = free_generator_matrices(S)
    K = -(f.M + (1j / hb) * R_in)
    if np.min(np.linalg.eigvalsh(K.real)) <= 0.0:
        raise InvalidInputError("integrand has no decaying Gaussian envelope")
    Kinv = np.linalg.inv(K)
    Kinv = 0.5 * (Kinv + Kinv.T)
    T = -(1j / hb) * Binv  # u(x) = v + T x
    M_new = (1j / hb) * (D @ Binv) + T.T @ Kinv @ T
    v_new = T.T @ Kinv @ f.v
    detB = complex(np.linalg.det(B))
    log_pref = (-0.5 * np.log(detB) - 0.5 * d * np.log(2j * math.pi * hb)
                + 0.5 * d * math.log(2.0) - 0.5 * _log_det_principal(K) + 0.5 * d * math.log(math.pi))
    c_new = f.c + 0.5 * (f.v @ Kinv @ f.v) + log_pref
    if f.g is None:
        return GaussianForm(M_new, v_new, c_new, hb, None, 0)

    k = f.degree // 2 + 1 + extra_nodes
    Y, Wt = _gh_nodes(d, k)
    shift = math.sqrt(2.0) * (Y @ np.linalg.inv(sqrtm(K)).T)  # rows: sqrt(2) K^{-1/2} y
    Wt = Wt / math.pi ** (0.5 * d)
    g_in, v_in = f.g, f.v

    def block(x: np.ndarray) -> np.ndarray:
        centers = (v_in + x @ T.T) @ Kinv.T
        args = centers[:, None, :] + shift[None, :, :]
        vals = g_in(args)
        return vals @ Wt

    def g_new(x: np.ndarray) -> np.ndarray:
        return _chunked(block, np.asarray(x, dtype=complex), Wt.size)

    return GaussianForm(M_new, v_new, c_new, hb, g_new, f.degree)


def _log_det_principal(K: np.ndarray) -> complex:
    """``sum_j Log(lambda_j)`` over eigenvalues with positive real part."""
    return complex(np.sum(np.log(np.linalg.eigvals(K))))


def _gauss_legendre_qft(S: np.ndarray, f: Callable, hbar: float, half_width: float, nodes: int) -> Callable:
    A, B, C, D = blocks(S)
    d = A.shape[0]
    R_out, Binv, R_in, _ = free_generator_matrices(S)
    y, w = np.polynomial.legendre.leggauss(nodes)
    y = y * half_width
    w = w * half_width
    Y = np.stack(np.meshgrid(*([y] * d), indexing="ij"), axis=-1).reshape(-1, d)
    Wt = np.prod(np.stack(np.meshgrid(*([w] * d), indexing="ij"), axis=-1).reshape(-1, d), axis=-1)
    fy = np.asarray(f(Y), dtype=complex) * np.exp((0.5j / hbar) * np.einsum("ki,ij,kj->k", Y, R_in, Y)) * Wt
    pref = np.sqrt(complex(np.linalg.det(B))) ** -1 * (2j * math.pi * hbar) ** (-0.5 * d)

    def out(x):
        x = np.asarray(x, dtype=float)
        if d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        phase = np.exp((0.5j / hbar) * np.einsum("...i,ij,...j->...", x, R_out, x))
        kern = np.exp(-(1j / hbar) * (x @ Binv.T) @ Y.T)
        return pref * phase * (kern @ fy)

    return out


def quadratic_fourier_apply(S, f, hbar: float | None = None, half_width: float = 12.0, nodes: int = 160):
    """Quadratic Fourier transform of a free symplectic ``S``.

    ``(S f)(x) = det(B)^{-1/2} (2 pi hbar i)^{-d/2} int exp((i/hbar) W_S(x~, x)) f(x~) dx~``
    with ``W_S(x~, x) = x~^T B^{-1}A x~ / 2 - x~^T B^{-1} x + x^T D B^{-1} x / 2``.

    A :class:`GaussianForm` input is transformed exactly (for polynomial
    ``g``) and the result is again a :class:`GaussianForm`.  Other callables
    are integrated with tensor Gauss-Legendre quadrature on
    ``[-half_width, half_width]^d`` and a :class:`QuadratureWarning` is emitted.

    Raises:
        NotFreeError: If the B block of ``S`` is singular.
    """
    M = as_matrix(S)
    free_generator_matrices(M)
    if isinstance(f, GaussianForm):
        if M.shape[0] // 2 != f.d:
            raise InvalidInputError("dimension mismatch")
        return _qft_gaussian(M, f)
    warnings.warn("integrand has no Gaussian envelope; using Gauss-Legendre quadrature", QuadratureWarning,
                  stacklevel=2)
    return _gauss_legendre_qft(M, f, 1.0 if hbar is None else hbar, half_width, nodes)


# ---------------------------------------------------------------------------
# Metaplectic generators


@dataclass(frozen=True)
class MetaplecticFactor:
    """One generator: ``kind`` in {"J", "V", "M", "freeQFT"} with its parameter.

    ``V`` takes a symmetric ``R``, ``M`` an invertible ``L``, ``freeQFT`` a
    free symplectic ``S``.  ``sign`` multiplies the operator and records the
    branch of the double cover.
    """

    kind: str
    param: np.ndarray | None = None
    sign: int = 1

    def __post_init__(self) -> None:
        if self.kind not in ("J", "V", "M", "freeQFT"):
            raise InvalidInputError(f"unknown generator kind {self.kind!r}")
        if self.sign not in (1, -1):
            raise InvalidInputError("sign must be +1 or -1")
        if self.kind == "J":
            return
        P = np.atleast_2d(np.asarray(self.param, dtype=float))
        if self.kind == "V" and np.max(np.abs(P - P.T)) > 1e-12 * max(1.0, np.max(np.abs(P))):
            raise InvalidInputError("V requires a symmetric R")
        if self.kind == "M":
            sv = np.linalg.svd(P, compute_uv=False)
            if sv[-1] <= COND_LIMIT * sv[0]:
                raise InvalidInputError("M requires an invertible L")
        if self.kind == "freeQFT":
            free_generator_matrices(P)
        object.__setattr__(self, "param", P)

    def matrix(self, d: int) -> np.ndarray:
        if self.kind == "J":
            return symplectic_form(d)
        if self.kind == "V":
            return V_matrix(self.param)
        if self.kind == "M":
            return M_matrix(self.param)
        return self.param.copy()


def word_matrix(word: list[MetaplecticFactor], d: int) -> np.ndarray:
    """Product of the generator matrices, left to right."""
    S = np.eye(2 * d)
    for g in word:
        S = S @ g.matrix(d)
    return S


def free_word(S) -> list[MetaplecticFactor]:
    """``[V_{D B^-1}, M_{B^-1}, J, V_{B^-1 A}]`` whose product is the free matrix ``S``."""
    R_out, Binv, R_in, _ = free_generator_matrices(S)
    return [MetaplecticFactor("V", R_out), MetaplecticFactor("M", Binv), MetaplecticFactor("J"),
            MetaplecticFactor("V", R_in)]


def _pointwise_callable(kind: str, param, f: Callable, hbar: float) -> Callable:
    if kind == "V":
        R = param

        def out(x):
            x = np.asarray(x)
            if R.shape[0] == 1 and (x.ndim == 0 or x.shape[-1] != 1):
                x = x[..., None]
            return np.exp((0.5j / hbar) * np.einsum("...i,ij,...j->...", x, R, x)) * f(x)
        return out
    L = param
    det_sqrt = np.sqrt(complex(np.linalg.det(L)))

    def out(x):
        x = np.asarray(x)
        if L.shape[0] == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        return det_sqrt * f(x @ L.T)
    return out


def metaplectic_generator_apply(gen: MetaplecticFactor, f, hbar: float | None = None):
    """Apply one generator to a grid function, Gaussian form or callable."""
    if isinstance(f, GridFunction):
        if gen.kind == "J":
            out = fourier_semiclassical(f)
            out = out.with_values(out.values * (1j) ** (-0.5 * f.d))
        elif gen.kind == "V":
            out = chirp_apply(f, gen.param)
        elif gen.kind == "M":
            out = dilation_apply(f, gen.param)
        else:
            out = apply_word(free_word(gen.param), f)
        return out if gen.sign == 1 else out.with_values(-out.values)

    if isinstance(f, GaussianForm):
        d = f.d
        if gen.kind == "J":
            out = _qft_gaussian(symplectic_form(d), f)
        elif gen.kind == "V":
            out = GaussianForm(f.M + (1j / f.hbar) * gen.param, f.v, f.c, f.hbar, f.g, f.degree)
        elif gen.kind == "M":
            L = gen.param
            g = None if f.g is None else (lambda x, g0=f.g: g0(x @ L.T))
            out = GaussianForm(L.T @ f.M @ L, L.T @ f.v, f.c + 0.5 * np.log(complex(np.linalg.det(L))),
                               f.hbar, g, f.degree)
        else:
            out = _qft_gaussian(gen.param, f)
        if gen.sign == -1:
            out = GaussianForm(out.M, out.v, out.c + 1j * math.pi, out.hbar, out.g, out.degree)
        return out

    hb = 1.0 if hbar is None else hbar
    if gen.kind in ("V", "M"):
        out = _pointwise_callable(gen.kind, gen.param, f, hb)
    else:
        d = np.atleast_2d(gen.param).shape[0] // 2 if gen.kind == "freeQFT" else None
        if d is None:
            raise InvalidInputError("J on a plain callable needs a Gaussian form; use quadratic_fourier_apply")
        out = quadratic_fourier_apply(gen.param, f, hb)
    if gen.sign == -1:
        return lambda x, h=out: -h(x)
    return out


def apply_word(word: list[MetaplecticFactor], f, hbar: float | None = None):
    """Apply the operator of a generator word (the rightmost factor acts first)."""
    for gen in reversed(word):
        f = metaplectic_generator_apply(gen, f, hbar)
    return f


def metaplectic_apply(S, f, hbar: float | None = None):
    """Realize the metaplectic operator of ``S`` (up to sign) on ``f``.

    ``S`` is split into two free factors and each is applied as a quadratic
    Fourier transform: exactly for :class:`GaussianForm` inputs, and through
    the generator sequence ``V M J V`` for grid functions.  Grid
    realizations pick the best-conditioned factorization.
    """
    well = isinstance(f, GridFunction)
    S1, S2 = free_factorize(S, well_conditioned=well)
    f = metaplectic_generator_apply(MetaplecticFactor("freeQFT", S2.entries), f, hbar)
    return metaplectic_generator_apply(MetaplecticFactor("freeQFT", S1.entries), f, hbar)


def heisenberg_weyl_apply(z, f, hbar: float | None = None, fourier_shift: bool = True):
    """``(T_z f)(x) = exp((i/hbar) p . (x - q/2)) f(x - q)``."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.size % 2:
        raise InvalidInputError("z must have even length")
    d = z.size // 2
    q, p = z[:d], z[d:]
    if isinstance(f, GridFunction):
        if f.d != d:
            raise InvalidInputError("dimension mismatch")
        g = shift_apply(f, q, fourier_shift)
        x = f.spec.points()
        return g.with_values(g.values * np.exp((1j / f.hbar) * ((x - 0.5 * q) @ p)))
    if isinstance(f, GaussianForm):
        hb = f.hbar
        g = None if f.g is None else (lambda x, g0=f.g: g0(x - q))
        return GaussianForm(f.M, f.v - f.M @ q + (1j / hb) * p,
                            f.c + 0.5 * (q @ f.M @ q) - f.v @ q - (0.5j / hb) * (p @ q), hb, g, f.degree)
    hb = 1.0 if hbar is None else hbar

    def out(x):
        x = np.asarray(x, dtype=float)
        if d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        return np.exp((1j / hb) * ((x - 0.5 * q) @ p)) * f(x - q)
    return out


# ---------------------------------------------------------------------------
# Quadrature


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor Gauss-Hermite rule mapped by ``x = shift + T y``.

    The weights include ``|det T|`` and the factor ``exp(|y|^2)`` that removes
    the Hermite weight, so ``sum_k w_k f(x_k)`` approximates ``int f dx`` and
    is exact when ``f(shift + T y) exp(|y|^2)`` is a polynomial of degree at
    most ``2 nodes - 1`` per axis.
    """

    nodes: np.ndarray
    weights: np.ndarray
    shift: np.ndarray
    T: np.ndarray

    @property
    def d(self) -> int:
        return self.shift.size

    def reference_points(self) -> np.ndarray:
        return np.stack(np.meshgrid(*([self.nodes] * self.d), indexing="ij"), axis=-1).reshape(-1, self.d)

    def points(self) -> np.ndarray:
        return self.shift + self.reference_points() @ self.T.T

    def point_weights(self) -> np.ndarray:
        Y = self.reference_points()
        w = np.prod(np.stack(np.meshgrid(*([self.weights] * self.d), indexing="ij"), axis=-1).reshape(-1, self.d),
                    axis=-1)
        return w * abs(np.linalg.det(self.T)) * np.exp(np.sum(Y * Y, axis=-1))


def gauss_hermite_rule(d: int, nodes: int, shift=None, T=None) -> QuadratureRule:
    y, w = np.polynomial.hermite.hermgauss(nodes)
    shift = np.zeros(d) if shift is None else np.asarray(shift, dtype=float)
    T = np.eye(d) if T is None else np.asarray(T, dtype=float)
    return QuadratureRule(y, w, shift, T)


def adapted_rule(pair: NormalizedPair, nodes: int) -> QuadratureRule:
    """Rule for integrands with envelope ``exp(-(x-q)^T Im(PQ^{-1}) (x-q) / hbar)``.

    ``T = sqrt(hbar) Im(PQ^{-1})^{-1/2}`` with the symmetric square root.
    """
    Z = np.linalg.solve(pair.Q.T, pair.P.T).T
    G = 0.5 * (Z.imag + Z.imag.T)
    w, V = np.linalg.eigh(G)
    T = math.sqrt(pair.hbar) * (V / np.sqrt(w)) @ V.T
    return gauss_hermite_rule(pair.d, nodes, pair.q, T)


def standard_rule(d: int, hbar: float, nodes: int) -> QuadratureRule:
    """Rule adapted to ``psi^hbar_n`` products: ``T = sqrt(hbar) I``."""
    return gauss_hermite_rule(d, nodes, np.zeros(d), math.sqrt(hbar) * np.eye(d))


def inner_product(f, g, rule: QuadratureRule | None = None) -> complex:
    """``<f, g> = int conj(f) g``, conjugate-linear in ``f``.

    Grid functions on a common grid use the Riemann sum (spectrally accurate
    for decaying smooth functions); callables need a quadrature rule.
    """
    if isinstance(f, GridFunction) and isinstance(g, GridFunction):
        if not f.spec.same_as(g.spec) or f.hbar != g.hbar:
            raise InvalidInputError("incompatible grids")
        return complex(np.sum(np.conj(f.values) * g.values, axis=f.grid_axes) * f.spec.cell_volume)
    if isinstance(f, GridFunction) or isinstance(g, GridFunction):
        raise InvalidInputError("cannot mix grid functions and callables")
    if rule is None:
        raise InvalidInputError("callables need a quadrature rule")
    X = rule.points()
    return complex(np.sum(rule.point_weights() * np.conj(f(X)) * g(X)))
