import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hagedorn_kit.errors import InvalidInputError, ParametrizationError
from hagedorn_kit.ladder import (
    LinearObservable,
    OperatorTuple,
    commutator,
    hagedorn_ladder,
    is_ladder,
    ladder_matrix,
    recover_symplectic,
    transform_by_symplectic,
    transform_by_translation,
)
from hagedorn_kit.sampling import make_rng, random_pair, random_symplectic
from hagedorn_kit.symplectic import (
    NormalizedPair,
    constant_frames,
    pair_from_symplectic,
    symplectic_form,
    symplectic_from_pair,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)
dims = st.sampled_from([1, 2, 3])
hbars = st.floats(min_value=0.05, max_value=3.0)


def test_commutator_canonical_pair():
    assert commutator(LinearObservable([1, 0]), LinearObservable([0, 1])) == 1j


def test_commutator_antisymmetry_and_self():
    a = LinearObservable([1.0, 2.0 + 1j, -0.5, 3.0])
    b = LinearObservable([0.3j, -1.0, 2.0, 0.1])
    assert commutator(a, a) == 0
    assert commutator(a, b) == pytest.approx(-commutator(b, a))


def test_commutator_bilinear():
    rng = make_rng(0, "bilinear")
    c = [rng.standard_normal(4) + 1j * rng.standard_normal(4) for _ in range(3)]
    al, be = 0.7 - 0.2j, -1.3 + 0.5j
    lhs = commutator(LinearObservable(al * c[0] + be * c[1]), LinearObservable(c[2]))
    rhs = al * commutator(LinearObservable(c[0]), LinearObservable(c[2])) + be * commutator(
        LinearObservable(c[1]), LinearObservable(c[2]))
    assert lhs == pytest.approx(rhs, abs=1e-13)


def test_commutator_mismatch():
    with pytest.raises(InvalidInputError):
        commutator(LinearObservable([1, 0], hbar=1.0), LinearObservable([0, 1], hbar=0.5))
    with pytest.raises(InvalidInputError):
        commutator(LinearObservable([1, 0], [0.0, 0.0]), LinearObservable([0, 1], [1.0, 0.0]))
    with pytest.raises(InvalidInputError):
        commutator(LinearObservable([1, 0]), LinearObservable([0, 1, 0, 0]))


def test_observable_xp_round_trip():
    obs = LinearObservable.from_xp([1.0, 2.0], [3.0, 4.0])
    a, b = obs.xp_coefficients()
    assert np.array_equal(a, [1.0, 2.0]) and np.array_equal(b, [3.0, 4.0])
    # x and p observables: [x, p] = i hbar
    x = LinearObservable.from_xp([1.0], [0.0], hbar=0.3)
    p = LinearObservable.from_xp([0.0], [1.0], hbar=0.3)
    assert commutator(x, p) == pytest.approx(0.3j)


@pytest.mark.parametrize("d,hbar", [(1, 1.0), (2, 0.5), (3, 2.0)])
def test_W_hbar_is_harmonic_ladder(d, hbar):
    v = is_ladder(constant_frames(d, hbar).W_hbar, hbar)
    assert v.accepted
    assert np.allclose(v.S, np.eye(2 * d), atol=1e-14)


@given(seeds, dims, hbars)
def test_ladder_round_trip(seed, d, hbar):
    S = random_symplectic(make_rng(seed, "lad"), d)
    X = ladder_matrix(S, hbar)
    v = is_ladder(X, hbar)
    assert v.accepted
    assert np.max(np.abs(v.S - S)) < 1e-10 * max(1.0, np.max(np.abs(S)))
    assert np.max(np.abs(recover_symplectic(X, hbar) - S)) < 1e-10 * max(1.0, np.max(np.abs(S)))


def test_perturbed_entries_rejected():
    for d in (1, 2):
        W = np.array(constant_frames(d, 1.0).W_hbar)
        for i in range(2 * d):
            for j in range(2 * d):
                X = W.copy()
                X[i, j] += 1e-3
                v = is_ladder(X, 1.0)
                assert not v.accepted
                assert v.reason


def test_rejection_reasons():
    d = 1
    W = np.array(constant_frames(d, 1.0).W_hbar)
    assert "X^T J X" in is_ladder(2 * W).reason
    # a complex symplectic squeeze of W keeps the commutators but breaks the adjoint pairing
    v = is_ladder(W @ np.diag([2.0, 0.5]))
    assert not v.accepted and "conjugate" in v.reason
    # a phase rotation of the lowering operators is a genuine ladder (S = J)
    v = is_ladder(W @ np.diag([1j, -1j]))
    assert v.accepted and np.allclose(v.S, symplectic_form(1))
    with pytest.raises(InvalidInputError):
        is_ladder(np.eye(3))


def test_verdict_serialization():
    d = is_ladder(constant_frames(1).W_hbar).to_dict()
    assert d["accepted"] is True and d["reason"] is None
    assert list(d["residuals"]) == sorted(d["residuals"])


def test_harmonic_oscillator_lowering():
    hbar = 0.7
    lad = hagedorn_ladder(NormalizedPair(np.eye(1), 1j * np.eye(1), hbar=hbar))
    a, b = LinearObservable(lad.lowering[0], hbar=hbar).xp_coefficients()
    s = 1 / math.sqrt(2 * hbar)
    assert a[0] == pytest.approx(s) and b[0] == pytest.approx(1j * s)


def test_squeezed_lowering_example():
    s = math.sqrt(2.0)
    pair = NormalizedPair([[s]], [[1j / s]], q=[1.0], p=[0.0])
    lad = hagedorn_ladder(pair)
    a, b = LinearObservable(lad.lowering[0], pair.z).xp_coefficients()
    # A = -(i/sqrt 2) [ (i/sqrt 2)(x - 1) - sqrt 2 p ]
    assert a[0] == pytest.approx(-(1j / s) * (1j / s))
    assert b[0] == pytest.approx((1j / s) * s)
    assert lad.commutator_matrix() == pytest.approx(symplectic_form(1))
    lo = LinearObservable(lad.lowering[0], pair.z)
    hi = LinearObservable(lad.raising[0], pair.z)
    assert commutator(lo, hi) == pytest.approx(1.0)


@given(seeds, dims, hbars)
def test_hagedorn_ladder_commutators(seed, d, hbar):
    pair = random_pair(make_rng(seed, "hl"), d, hbar)
    lad = hagedorn_ladder(pair)
    assert np.max(np.abs(lad.commutator_matrix() - symplectic_form(d))) < 1e-12 * max(
        1.0, np.max(np.abs(lad.lowering)) ** 2 * hbar)
    assert np.array_equal(lad.raising, lad.lowering.conj())
    X = lad.tuple.X
    S = symplectic_from_pair(pair).entries
    assert np.allclose(X, ladder_matrix(S, hbar), atol=1e-13 * max(1.0, np.max(np.abs(X))))
    v = is_ladder(X, hbar)
    assert v.accepted


def test_transform_identity_and_J():
    pair = random_pair(make_rng(3, "tj"), 2, 0.5)
    t = hagedorn_ladder(pair).tuple
    same = transform_by_symplectic(np.eye(4), t)
    assert np.array_equal(same.X, t.X) and np.array_equal(same.center, t.center)
    J = symplectic_form(2)
    moved = transform_by_symplectic(J, t)
    ref = hagedorn_ladder(NormalizedPair(pair.P, -pair.Q, pair.p, -pair.q, pair.hbar)).tuple
    assert np.allclose(moved.X, ref.X, atol=1e-14)
    assert np.allclose(moved.center, ref.center)


@given(seeds, seeds, dims)
def test_coefficient_covariance(s1, s2, d):
    pair = random_pair(make_rng(s1, "cov"), d)
    S0 = random_symplectic(make_rng(s2, "cov0"), d)
    t = transform_by_symplectic(S0, hagedorn_ladder(pair).tuple)
    S = symplectic_from_pair(pair).entries
    z = S0 @ pair.z
    ref = hagedorn_ladder(pair_from_symplectic(S0 @ S, z[:d], z[d:], pair.hbar)).tuple
    assert np.max(np.abs(t.X - ref.X)) < 1e-12 * max(1.0, np.max(np.abs(ref.X)))


def test_translation():
    t = OperatorTuple(constant_frames(1).W_hbar)
    assert np.array_equal(transform_by_translation([0.0, 0.0], t).center, [0.0, 0.0])
    a = transform_by_translation([1.0, 2.0], transform_by_translation([0.5, -1.0], t))
    assert np.allclose(a.center, [1.5, 1.0]) and np.array_equal(a.X, t.X)
    with pytest.raises(InvalidInputError):
        transform_by_translation([1.0], t)
    with pytest.raises(InvalidInputError):
        transform_by_symplectic(np.eye(4), t)


def test_operator_tuple_views():
    t = OperatorTuple(constant_frames(2, 0.5).W_hbar, hbar=0.5)
    assert len(t.flat) == 2 and len(t.sharp) == 2
    assert np.allclose(t.commutator_matrix(), symplectic_form(2))


def test_invalid_pair_propagates():
    with pytest.raises(ParametrizationError):
        hagedorn_ladder(NormalizedPair([[1.0]], [[1.0]]))
