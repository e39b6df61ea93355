import math
import warnings

import numpy as np
import pytest
from scipy.integrate import quad

from hagedorn_kit.errors import InvalidInputError, NotFreeError, QuadratureWarning, TruncationWarning
from hagedorn_kit.grid import (
    GridFunction,
    GridSpec,
    MetaplecticFactor,
    apply_word,
    chirp_apply,
    dilation_apply,
    elementary_factors,
    elementary_product,
    fourier_semiclassical,
    free_word,
    gauss_hermite_rule,
    heisenberg_weyl_apply,
    hermite_form,
    hermite_generating_form,
    inner_product,
    l2_error,
    metaplectic_apply,
    metaplectic_generator_apply,
    momentum_apply,
    observable_apply,
    position_apply,
    quadratic_fourier_apply,
    shift_apply,
    standard_rule,
    word_matrix,
)
from hagedorn_kit.hagedorn import HagedornBasisSpec, generating_eval, packet_values
from hagedorn_kit.hermite import HermiteContext, hermite_fn_eval, hermite_fn_table
from hagedorn_kit.ladder import LinearObservable
from hagedorn_kit.sampling import make_rng, random_pair, random_symplectic
from hagedorn_kit.symplectic import (
    M_matrix,
    NormalizedPair,
    V_matrix,
    pair_from_symplectic,
    symplectic_form,
)


def psi(n, hbar=1.0):
    ctx = HermiteContext(len(n), hbar, sum(n))
    return lambda x: hermite_fn_eval(ctx, n, x).astype(complex)


def grid_psi(n, hbar=1.0, m=None):
    spec = GridSpec.matched(len(n), hbar, m)
    return GridFunction.sample(spec, psi(n, hbar), hbar)


def random_free(rng, d):
    """A free symplectic matrix ``V_R M_L J V_R'`` with random parameters."""
    R1, R2 = (rng.standard_normal((d, d)) for _ in range(2))
    L = np.eye(d) + 0.3 * rng.standard_normal((d, d))
    word = [MetaplecticFactor("V", R1 + R1.T), MetaplecticFactor("M", L), MetaplecticFactor("J"),
            MetaplecticFactor("V", R2 + R2.T)]
    return word_matrix(word, d)


def l2(a, b):
    return l2_error(a, b)[0]


# -- grids and inner products ------------------------------------------------


def test_grid_spec_validation():
    with pytest.raises(InvalidInputError):
        GridSpec((0.0,), (1.0,), (24,))
    with pytest.raises(InvalidInputError):
        GridSpec((0.0,), (1.0,), (8,))
    with pytest.raises(InvalidInputError):
        GridSpec((0.0,), (-1.0,), (16,))
    with pytest.raises(InvalidInputError):
        GridSpec((0.0, 0.0), (1.0,), (16,))
    with pytest.raises(InvalidInputError):
        GridFunction(GridSpec.uniform(1, 1.0, 16), np.zeros(32))
    with pytest.raises(InvalidInputError):
        GridFunction(GridSpec.uniform(1, 1.0, 16), np.full(16, np.nan))


def test_matched_grid_is_self_dual():
    for d, hbar in [(1, 1.0), (2, 0.3)]:
        spec = GridSpec.matched(d, hbar)
        assert spec.same_as(spec.dual(hbar))
        assert np.allclose(spec.spacings, spec.axis(0)[1] - spec.axis(0)[0])


def test_inner_product_examples():
    rule = standard_rule(1, 1.0, 8)
    assert inner_product(psi((0,)), psi((0,)), rule) == pytest.approx(1.0, abs=1e-12)
    assert abs(inner_product(psi((1,)), psi((0,)), rule)) < 1e-12
    f, g = grid_psi((0,)), grid_psi((1,))
    assert inner_product(f, f) == pytest.approx(1.0, abs=1e-12)
    assert abs(inner_product(g, f)) < 1e-12


def test_inner_product_conjugate_linear():
    f, g = grid_psi((0, 1)), grid_psi((0, 1))
    a = 0.3 - 0.7j
    h = f.with_values(a * f.values)
    assert inner_product(h, g) == pytest.approx(np.conj(a) * inner_product(f, g))
    assert inner_product(g, h) == pytest.approx(a * inner_product(g, f))


def test_inner_product_hagedorn_gram_d2():
    pair = random_pair(make_rng(0, "ip"), 2, 0.7)
    Z = np.linalg.solve(pair.Q.T, pair.P.T).T
    w, V = np.linalg.eigh(Z.imag)
    rule = gauss_hermite_rule(2, 8, pair.q, math.sqrt(pair.hbar) * (V / np.sqrt(w)) @ V.T)
    spec = HagedornBasisSpec(pair, 4)
    fns = {n: (lambda x, n=n: packet_values(pair, 4, x)[n]) for n in spec.indices}
    for m in spec.indices:
        for n in spec.indices:
            assert abs(inner_product(fns[m], fns[n], rule) - (m == n)) < 1e-8


def test_inner_product_errors():
    f = grid_psi((0,))
    g = GridFunction.sample(GridSpec.uniform(1, 5.0, 64), psi((0,)))
    with pytest.raises(InvalidInputError):
        inner_product(f, g)
    with pytest.raises(InvalidInputError):
        inner_product(f, psi((0,)), standard_rule(1, 1.0, 4))
    with pytest.raises(InvalidInputError):
        inner_product(psi((0,)), psi((0,)))


# -- Heisenberg-Weyl ---------------------------------------------------------


def test_translation_identity_and_composition():
    hbar = 0.5
    f = psi((0,), hbar)
    x = np.linspace(-3, 3, 41)[:, None]
    assert np.allclose(heisenberg_weyl_apply([0.0, 0.0], f, hbar)(x), f(x))
    z1, z2 = np.array([0.3, -0.4]), np.array([-0.7, 0.9])
    lhs = heisenberg_weyl_apply(z1, heisenberg_weyl_apply(z2, f, hbar), hbar)(x)
    phase = np.exp((0.5j / hbar) * (z1[1] * z2[0] - z2[1] * z1[0]))
    rhs = phase * heisenberg_weyl_apply(z1 + z2, f, hbar)(x)
    assert np.sqrt(np.sum(np.abs(lhs - rhs) ** 2) / np.sum(np.abs(rhs) ** 2)) < 1e-10


def test_translation_realizations_agree():
    hbar = 0.8
    z = np.array([0.37, -0.21, 0.5, 1.1])
    g = grid_psi((1, 0), hbar)
    on_grid = heisenberg_weyl_apply(z, g)
    form = heisenberg_weyl_apply(z, hermite_form((1, 0), hbar))
    call = heisenberg_weyl_apply(z, psi((1, 0), hbar), hbar)
    pts = g.spec.points()
    assert l2(on_grid, g.with_values(form(pts))) < 1e-10
    assert l2(on_grid, g.with_values(call(pts))) < 1e-10
    assert abs(on_grid.norm() - 1.0) < 1e-10


def test_commensurate_shift_is_exact_roll():
    g = grid_psi((0,))
    h = g.spec.spacings[0]
    out = shift_apply(g, 3 * h, fourier_shift=False)
    assert np.array_equal(out.values, np.roll(g.values, 3))
    with pytest.raises(InvalidInputError):
        shift_apply(g, 0.3 * h, fourier_shift=False)
    with pytest.raises(InvalidInputError):
        heisenberg_weyl_apply([0.1, 0.2, 0.3], g)


@pytest.mark.parametrize("gen", [
    MetaplecticFactor("J"),
    MetaplecticFactor("V", [[0.7]]),
    MetaplecticFactor("M", [[1.3]]),
])
def test_symplectic_covariance_on_grid(gen):
    # S T_z f = T_{Sz} S f for each generator
    f = grid_psi((1,))
    z = np.array([0.4, -0.3])
    Sz = gen.matrix(1) @ z
    lhs = metaplectic_generator_apply(gen, heisenberg_weyl_apply(z, f))
    rhs = heisenberg_weyl_apply(Sz, metaplectic_generator_apply(gen, f))
    assert l2(lhs, rhs) < 1e-9


# -- position, momentum and ladders -----------------------------------------


def test_canonical_commutator():
    hbar = 0.6
    f = grid_psi((1, 2), hbar)
    for j in range(2):
        for k in range(2):
            xp = position_apply(momentum_apply(f, k), j).values
            px = momentum_apply(position_apply(f, j), k).values
            ref = 1j * hbar * f.values if j == k else 0.0 * f.values
            assert np.sqrt(np.sum(np.abs(xp - px - ref) ** 2) * f.spec.cell_volume) < 1e-8


def test_hermite_ladder_relations_on_grid():
    hbar = 0.5
    spec = GridSpec.matched(2, hbar)
    pts = spec.points()
    tab = hermite_fn_table(HermiteContext(2, hbar, 5), pts)
    s = 1 / math.sqrt(2 * hbar)
    for j in range(2):
        e = np.eye(2)[j]
        raise_j = LinearObservable.from_xp(s * e, -1j * s * e, hbar=hbar)
        lower_j = LinearObservable.from_xp(s * e, 1j * s * e, hbar=hbar)
        for n, v in tab.items():
            if sum(n) == 5:
                continue
            up = tuple(k + (i == j) for i, k in enumerate(n))
            out = observable_apply(raise_j, GridFunction(spec, v, hbar)).values
            assert np.sqrt(np.sum(np.abs(out - math.sqrt(n[j] + 1) * tab[up]) ** 2) * spec.cell_volume) < 1e-8
            down = observable_apply(lower_j, GridFunction(spec, tab[up], hbar)).values
            assert np.sqrt(np.sum(np.abs(down - math.sqrt(n[j] + 1) * v) ** 2) * spec.cell_volume) < 1e-8


# -- semiclassical Fourier transform ----------------------------------------


def test_fourier_ground_state_fixed():
    f = grid_psi((0,))
    F = fourier_semiclassical(f)
    assert F.spec.same_as(f.spec)
    assert l2(F, f) < 1e-9
    assert abs(F.norm() - 1.0) < 1e-12


def test_fourier_first_hermite_against_direct_integral():
    hbar = 0.7
    f = grid_psi((1,), hbar)
    F = fourier_semiclassical(f)
    assert l2(F, f.with_values(-1j * f.values)) < 1e-9
    h1 = psi((1,), hbar)
    for xi in (-1.3, 0.0, 0.45, 2.1):
        re = quad(lambda x: (np.cos(x * xi / hbar) * h1(np.array([x]))).real.item(), -20, 20)[0]
        im = quad(lambda x: (-np.sin(x * xi / hbar) * h1(np.array([x]))).real.item(), -20, 20)[0]
        direct = (re + 1j * im) / math.sqrt(2 * math.pi * hbar)
        assert abs(direct - (-1j) * complex(h1(np.array([xi])))) < 1e-10


@pytest.mark.parametrize("n", [(0, 0), (1, 0), (2, 1), (3, 3)])
def test_fourier_hermite_eigenfunctions_d2(n):
    f = grid_psi(n, 1.3)
    assert l2(fourier_semiclassical(f), f.with_values((-1j) ** sum(n) * f.values)) < 1e-9


def test_fourier_hagedorn_covariance_1d():
    hbar = 1.0
    pair = random_pair(make_rng(1, "fcov"), 1, hbar, center_scale=0.5)
    spec = GridSpec.matched(1, hbar, 512)
    pts = spec.points()
    swapped = NormalizedPair(pair.P, -pair.Q, pair.p, -pair.q, hbar)
    a = packet_values(pair, 3, pts)
    b = packet_values(swapped, 3, pts)
    phase = 1j ** 0.5 * np.exp(-1j * pair.p[0] * pair.q[0] / hbar)
    for n in a:
        F = fourier_semiclassical(GridFunction(spec, a[n], hbar))
        err, _ = l2_error(F, GridFunction(spec, phase * b[n], hbar), up_to_sign=True)
        assert err < 1e-6


def test_fourier_truncation_warning():
    spec = GridSpec.uniform(1, 2.0, 64)
    f = GridFunction.sample(spec, psi((0,)))
    with pytest.warns(TruncationWarning):
        fourier_semiclassical(f)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        fourier_semiclassical(grid_psi((0,)))


# -- metaplectic generators -------------------------------------------------


def test_identity_generators():
    f = grid_psi((2, 1), 0.5)
    assert l2(metaplectic_generator_apply(MetaplecticFactor("V", np.zeros((2, 2))), f), f) == 0.0
    assert l2(metaplectic_generator_apply(MetaplecticFactor("M", np.eye(2)), f), f) < 1e-15
    form = hermite_form((1,))
    x = np.linspace(-2, 2, 9)[:, None]
    assert np.allclose(metaplectic_generator_apply(MetaplecticFactor("V", [[0.0]]), form)(x), form(x))
    assert np.allclose(metaplectic_generator_apply(MetaplecticFactor("M", [[1.0]]), form)(x), form(x))


def test_generator_validation():
    with pytest.raises(InvalidInputError):
        MetaplecticFactor("V", [[0.0, 1.0], [0.0, 0.0]])
    with pytest.raises(InvalidInputError):
        MetaplecticFactor("M", np.zeros((2, 2)))
    with pytest.raises(InvalidInputError):
        MetaplecticFactor("X")
    with pytest.raises(InvalidInputError):
        MetaplecticFactor("J", sign=2)
    with pytest.raises(NotFreeError):
        MetaplecticFactor("freeQFT", np.eye(2))


def test_generator_matrices():
    R = np.array([[0.3, 0.1], [0.1, -0.2]])
    L = np.array([[1.2, 0.4], [-0.3, 0.9]])
    assert np.array_equal(MetaplecticFactor("V", R).matrix(2), V_matrix(R))
    assert np.array_equal(MetaplecticFactor("M", L).matrix(2), M_matrix(L))
    assert np.array_equal(MetaplecticFactor("J").matrix(2), symplectic_form(2))
    S = random_free(make_rng(0, "fw"), 2)
    assert np.allclose(word_matrix(free_word(S), 2), S, atol=1e-10)


@pytest.mark.parametrize("seed", range(5))
def test_elementary_factorization(seed):
    rng = np.random.default_rng(seed)
    d = 2 + seed % 2
    L = rng.standard_normal((d, d)) + 0.5 * np.eye(d)
    fac = elementary_factors(L)
    assert np.allclose(elementary_product(fac, d), L, atol=1e-12)
    assert all(abs(f[3]) <= 1.0 + 1e-12 for f in fac if f[0] == "shear")


def test_dilation_general_matrix():
    hbar = 0.5
    L = np.array([[1.1, 0.4], [-0.3, 0.8]])
    f = grid_psi((1, 0), hbar)
    out = dilation_apply(f, L)
    pts = f.spec.points()
    ref = np.sqrt(np.linalg.det(L)) * psi((1, 0), hbar)(pts @ L.T)
    assert l2(out, f.with_values(ref)) < 1e-10
    assert abs(out.norm() - 1.0) < 1e-10
    with pytest.raises(InvalidInputError):
        dilation_apply(f, np.eye(3))


def test_chirp_is_pointwise_phase():
    f = grid_psi((1,), 0.4)
    out = chirp_apply(f, [[2.0]])
    x = f.spec.axis(0)
    assert np.allclose(out.values, np.exp((0.5j / 0.4) * 2.0 * x**2) * f.values)


def test_J_on_grid_and_form():
    hbar = 0.8
    for n in [(0,), (2,), (1, 1)]:
        d = len(n)
        f = grid_psi(n, hbar)
        g = metaplectic_generator_apply(MetaplecticFactor("J"), f)
        ref = (1j) ** (-0.5 * d) * (-1j) ** sum(n) * f.values
        assert l2(g, f.with_values(ref)) < 1e-9
        form = metaplectic_generator_apply(MetaplecticFactor("J"), hermite_form(n, hbar))
        assert l2(g, f.with_values(form(f.spec.points()))) < 1e-8
        qft = quadratic_fourier_apply(symplectic_form(d), hermite_form(n, hbar))
        assert l2(g, f.with_values(qft(f.spec.points()))) < 1e-8


def test_sign_tag():
    f = grid_psi((0,))
    plus = metaplectic_generator_apply(MetaplecticFactor("V", [[1.0]]), f)
    minus = metaplectic_generator_apply(MetaplecticFactor("V", [[1.0]], sign=-1), f)
    assert np.allclose(minus.values, -plus.values)
    x = np.linspace(-1, 1, 5)[:, None]
    fm = metaplectic_generator_apply(MetaplecticFactor("J", sign=-1), hermite_form((1,)))
    fp = metaplectic_generator_apply(MetaplecticFactor("J"), hermite_form((1,)))
    assert np.allclose(fm(x), -fp(x))


@pytest.mark.parametrize("seed", range(4))
def test_free_qft_of_ground_state_1d(seed):
    hbar = 0.9
    S = random_free(make_rng(seed, "qft1"), 1)
    out = quadratic_fourier_apply(S, hermite_form((0,), hbar))
    pair = pair_from_symplectic(S, [0.0], [0.0], hbar)
    spec = GridSpec.for_pair(pair, 512)
    ref = packet_values(pair, 0, spec.points())[(0,)]
    err, _ = l2_error(GridFunction(spec, out(spec.points()), hbar), GridFunction(spec, ref, hbar), True)
    assert err < 1e-10


@pytest.mark.parametrize("d", [1, 2])
def test_generating_function_covariance(d):
    hbar = 0.6
    S = random_symplectic(make_rng(d, "gamma"), d)
    pair = pair_from_symplectic(S, np.zeros(d), np.zeros(d), hbar)
    w = np.full(d, 0.2 - 0.1j)
    out = metaplectic_apply(S, hermite_generating_form(w, hbar))
    x = np.random.default_rng(0).standard_normal((20, d))
    ref, _ = generating_eval(HagedornBasisSpec(pair), w, x)
    got = out(x)
    s = np.sign(np.real(np.vdot(ref, got)))
    assert np.max(np.abs(got - s * ref)) < 1e-7 * np.max(np.abs(ref))


@pytest.mark.parametrize("d", [1, 2])
def test_two_realizations_agree(d):
    hbar = 1.0
    S = random_symplectic(make_rng(d, "two"), d, strength=0.5)
    pair = pair_from_symplectic(S, np.zeros(d), np.zeros(d), hbar)
    spec = GridSpec.matched(d, hbar, 256 if d == 1 else 128)
    on_grid = metaplectic_apply(S, GridFunction.sample(spec, psi((0,) * d, hbar), hbar))
    form = metaplectic_apply(S, hermite_form((0,) * d, hbar))
    err, _ = l2_error(on_grid, on_grid.with_values(form(on_grid.spec.points())), True)
    assert err < 1e-7
    ref = packet_values(pair, 0, on_grid.spec.points())[(0,) * d]
    assert l2_error(on_grid, on_grid.with_values(ref), True)[0] < 1e-7
    assert abs(on_grid.norm() - 1.0) < 1e-7


def test_apply_word_order():
    # word [V, M] acts as V(M f)
    f = hermite_form((1,))
    word = [MetaplecticFactor("V", [[0.5]]), MetaplecticFactor("M", [[2.0]])]
    x = np.linspace(-1, 1, 7)[:, None]
    ref = np.exp(0.25j * x[:, 0] ** 2) * np.sqrt(2.0) * f(2 * x)
    assert np.allclose(apply_word(word, f)(x), ref)


def test_callable_fallback_warns():
    hbar = 1.0
    with pytest.warns(QuadratureWarning):
        out = quadratic_fourier_apply(symplectic_form(1), lambda x: psi((1,), hbar)(x), hbar)
    x = np.linspace(-2, 2, 9)[:, None]
    ref = (1j) ** -0.5 * (-1j) * psi((1,), hbar)(x)
    assert np.max(np.abs(out(x) - ref)) < 1e-8
    with pytest.raises(NotFreeError):
        quadratic_fourier_apply(np.eye(2), hermite_form((0,)))
    with pytest.raises(InvalidInputError):
        metaplectic_generator_apply(MetaplecticFactor("J"), psi((0,)))


def test_callable_pointwise_generators():
    f = psi((1,), 0.5)
    x = np.linspace(-1, 1, 5)[:, None]
    V = metaplectic_generator_apply(MetaplecticFactor("V", [[1.5]]), f, 0.5)
    assert np.allclose(V(x), np.exp(1.5j * x[:, 0] ** 2) * f(x))
    M = metaplectic_generator_apply(MetaplecticFactor("M", [[0.5]]), f, 0.5)
    assert np.allclose(M(x), np.sqrt(0.5) * f(0.5 * x))


def test_gaussian_form_normalization():
    rule = standard_rule(2, 0.5, 10)
    for n in [(0, 0), (2, 1)]:
        h = hermite_form(n, 0.5)
        assert inner_product(h, h, rule) == pytest.approx(1.0, abs=1e-12)


# -- I/O ---------------------------------------------------------------------


def test_binary_round_trip():
    f = GridFunction(GridSpec((0.5, -1.0), (3.0, 2.0), (16, 32)),
                     np.random.default_rng(0).standard_normal((16, 32)) + 1j, 0.25)
    data = f.to_bytes()
    assert len(data) == 8 + 2 * 24 + 8 + 16 * 16 * 32
    back = GridFunction.from_bytes(data)
    assert back.spec == f.spec and back.hbar == 0.25
    assert np.array_equal(back.values, f.values)
    with pytest.raises(InvalidInputError):
        GridFunction.from_bytes(data[:-8])
    with pytest.raises(InvalidInputError):
        GridFunction.from_bytes(data[:20])


def test_csv_output():
    f = grid_psi((0,), 1.0, 16)
    lines = f.to_csv().splitlines()
    assert lines[0] == "x1,re,im"
    assert len(lines) == 17
    x, re, im = (float(t) for t in lines[5].split(","))
    assert x == f.spec.axis(0)[4] and re == f.values[4].real and im == f.values[4].imag
    batch = GridFunction(f.spec, np.stack([f.values, f.values]))
    with pytest.raises(InvalidInputError):
        batch.to_csv()
    with pytest.raises(InvalidInputError):
        batch.to_bytes()


def test_l2_error_sign():
    f = grid_psi((1,))
    g = f.with_values(-f.values)
    assert l2_error(f, g) == (pytest.approx(2.0), 1)
    err, s = l2_error(f, g, up_to_sign=True)
    assert err == 0.0 and s == -1
