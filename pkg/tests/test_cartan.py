import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from cartanqec.cartan import (
    BASES,
    FIXED_LOCAL,
    FULL,
    NONLOCAL,
    CartanParams,
    Encoder,
    build_unitary,
    code_from_unitary,
    factor_unitaries,
    logical_columns,
    param_count,
    params_from_json,
    params_to_json,
    su2,
)
from cartanqec.channels import amplitude_damping, tensor_power
from cartanqec.errors import InvalidArgument
from cartanqec.numerics import haar_random_unitary
from cartanqec.qec import fidelity_loss

import oracle

MODES = (FULL, NONLOCAL, FIXED_LOCAL)
HAD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def gen_sum(strings, coeffs, n):
    return sum(c * oracle.pauli(s.labels + "I" * (n - len(s.labels))) for s, c in zip(strings, coeffs))


def reference_unitary(x, n, mode, fixed=None):
    """Independent evaluation of the recursion from the flat vector, using expm of summed generators."""
    x = list(np.asarray(x, dtype=float))
    pos = [0]

    def take(k):
        out = x[pos[0] : pos[0] + k]
        pos[0] += k
        return out

    def local():
        if mode == FULL:
            px, py, pz = take(3)
            return expm(-1j * (px * oracle.X + py * oracle.Y + pz * oracle.Z))
        return np.eye(2)

    def level(m):
        b = BASES[m]
        if m == 2:
            u1, u2 = local(), local()
            c = take(3)
            u3, u4 = local(), local()
            mid = expm(-1j * gen_sum(b.h_strings, c, 2))
            return np.kron(u1, u2) @ mid @ np.kron(u3, u4)

        def k():
            a = level(m - 1)
            return np.kron(a, local())

        k1 = k()
        f1 = expm(-1j * gen_sum(b.f_strings, take(len(b.f_strings)), m))
        k2 = k()
        j = expm(-1j * gen_sum(b.h_strings, take(len(b.h_strings)), m))
        k3 = k()
        f2 = expm(-1j * gen_sum(b.f_strings, take(len(b.f_strings)), m))
        k4 = k()
        return k1 @ f1 @ k2 @ j @ k3 @ f2 @ k4

    u = level(n)
    assert pos[0] == len(x)
    if mode == FIXED_LOCAL:
        u = oracle.nfold([fixed], n)[0] @ u
    return u


def test_param_counts():
    assert param_count(2, FULL) == 15
    assert param_count(3, FULL) == 82
    assert param_count(4, FULL) == 362
    assert param_count(2, NONLOCAL) == 3
    assert param_count(3, NONLOCAL) == 22
    assert param_count(4, NONLOCAL) == 110
    with pytest.raises(InvalidArgument):
        param_count(5)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_bases_are_abelian(n):
    b = BASES[n]
    for group in (b.h_strings, b.f_strings):
        for p in group:
            for q in group:
                assert p.commutes_with(q)


def test_su2_examples():
    assert np.allclose(su2((0, 0, 0)), np.eye(2))
    assert np.allclose(su2((0, 0, np.pi / 2)), -1j * oracle.Z)


@given(st.tuples(*[st.floats(-7, 7)] * 3))
def test_su2_special_unitary(p):
    u = su2(p)
    assert np.max(np.abs(u.conj().T @ u - np.eye(2))) < 1e-12
    assert abs(np.linalg.det(u) - 1) < 1e-12
    assert np.allclose(u, expm(-1j * (p[0] * oracle.X + p[1] * oracle.Y + p[2] * oracle.Z)))


@pytest.mark.parametrize("n", [2, 3, 4])
@pytest.mark.parametrize("mode", MODES)
def test_zero_params_give_frame(n, mode):
    p = CartanParams.unflatten(np.zeros(param_count(n, mode)), n, mode)
    u = build_unitary(p, mode, HAD if mode == FIXED_LOCAL else None)
    if mode == FIXED_LOCAL:
        assert np.allclose(u, oracle.nfold([HAD], n)[0], atol=1e-14)
    else:
        assert np.allclose(u, np.eye(2**n), atol=1e-14)


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("mode", MODES)
def test_matches_reference_recursion(n, mode, rng):
    x = rng.uniform(-np.pi, np.pi, param_count(n, mode))
    fixed = haar_random_unitary(2, 4)
    got = build_unitary(CartanParams.unflatten(x, n, mode), mode, fixed)
    assert np.max(np.abs(got - reference_unitary(x, n, mode, fixed))) < 1e-10


def test_matches_reference_recursion_n4(rng):
    x = rng.uniform(-np.pi, np.pi, param_count(4, FULL))
    got = build_unitary(CartanParams.unflatten(x, 4, FULL), FULL)
    assert np.max(np.abs(got - reference_unitary(x, 4, FULL))) < 1e-10


@pytest.mark.parametrize("n", [2, 3, 4])
@pytest.mark.parametrize("mode", MODES)
def test_unitarity_many_draws(n, mode):
    rng = np.random.default_rng(n)
    draws = 1000 if n < 4 else 200
    d = 2**n
    for _ in range(draws):
        x = rng.uniform(-np.pi, np.pi, param_count(n, mode))
        u = build_unitary(CartanParams.unflatten(x, n, mode), mode, HAD)
        assert np.max(np.abs(u.conj().T @ u - np.eye(d))) < 1e-10


@pytest.mark.parametrize("n", [3, 4])
def test_abelian_factorisation(n, rng):
    p = CartanParams.random(n, rng, mode=NONLOCAL)
    f = factor_unitaries(p)
    b = BASES[n]
    assert np.max(np.abs(f["F1"] - expm(-1j * gen_sum(b.f_strings, p.c1, n)))) < 1e-10
    assert np.max(np.abs(f["J"] - expm(-1j * gen_sum(b.h_strings, p.a, n)))) < 1e-10
    assert np.max(np.abs(f["F2"] - expm(-1j * gen_sum(b.f_strings, p.c2, n)))) < 1e-10


@given(st.integers(2, 4), st.sampled_from(MODES), st.integers(0, 10_000))
def test_flatten_roundtrip(n, mode, seed):
    x = np.random.default_rng(seed).normal(size=param_count(n, mode))
    assert np.array_equal(CartanParams.unflatten(x, n, mode).flatten(mode), x)


def test_flatten_length_mismatch():
    with pytest.raises(InvalidArgument):
        CartanParams.unflatten(np.zeros(21), 3, NONLOCAL)


def test_u8_sparsity_pattern(rng):
    x = np.zeros(22)
    x[3:6] = rng.normal(size=3)  # F1
    x[9:13] = rng.normal(size=4)  # J
    x[16:19] = rng.normal(size=3)  # F2
    u = build_unitary(CartanParams.unflatten(x, 3, NONLOCAL), NONLOCAL)
    block = np.array([0, 0, 1, 1, 1, 1, 0, 0])
    zero = block[:, None] != block[None, :]
    assert np.max(np.abs(u[zero])) < 1e-12
    assert np.min(np.abs(u[~zero])) > 1e-6


def test_structured_generators_preserve_parity():
    zz = oracle.pauli("ZZ")
    for n in (3, 4):
        par = np.kron(zz, np.eye(2 ** (n - 2)))
        b = BASES[n]
        for s in b.h_strings + b.f_strings:
            m = oracle.pauli(s.labels)
            assert np.allclose(m @ par, par @ m)


def test_logical_columns_and_code_from_unitary():
    assert logical_columns(3) == (0, 4)
    assert logical_columns(4) == (0, 8)
    c = code_from_unitary(np.eye(8))
    assert np.array_equal(c.v1, oracle.ket("000")) and np.array_equal(c.v2, oracle.ket("100"))
    xii = oracle.pauli("XII")
    c = code_from_unitary(xii)
    assert np.array_equal(c.v1, oracle.ket("100")) and np.array_equal(c.v2, oracle.ket("000"))
    c = code_from_unitary(np.eye(8), columns=(0, 1))
    assert np.array_equal(c.v2, oracle.ket("001"))
    with pytest.raises(InvalidArgument):
        code_from_unitary(2 * np.eye(8))


@given(st.integers(0, 10_000))
def test_code_from_random_cartan_is_orthonormal(seed):
    rng = np.random.default_rng(seed)
    p = CartanParams.random(3, rng)
    c = code_from_unitary(build_unitary(p))
    g = c.basis.conj().T @ c.basis
    assert np.max(np.abs(g - np.eye(2))) < 1e-10


@given(st.integers(0, 10_000))
def test_logical_gauge_invariance(seed):
    rng = np.random.default_rng(seed)
    u = build_unitary(CartanParams.random(3, rng))
    i, j = logical_columns(3)
    v = haar_random_unitary(2, rng)
    g = np.eye(8, dtype=complex)
    g[np.ix_([i, j], [i, j])] = v
    ch = tensor_power(amplitude_damping(0.2), 3)
    a = fidelity_loss(ch, code_from_unitary(u))[0]
    b = fidelity_loss(ch, code_from_unitary(u @ g))[0]
    assert abs(a - b) < 1e-8


def test_encoder_consistency(rng):
    enc = Encoder(3, FIXED_LOCAL, HAD)
    x = rng.normal(size=enc.size)
    u = enc.unitary(x)
    i, j = enc.columns
    assert np.allclose(enc.basis(x), u[:, [i, j]])
    code = enc.code(x)
    assert np.allclose(code.v2, u[:, j])


def test_params_json_roundtrip(rng):
    x = rng.normal(size=22)
    back, n, mode = params_from_json(params_to_json(x, 3, NONLOCAL))
    assert np.array_equal(back, x) and n == 3 and mode == NONLOCAL
    doc = {"eta": 0.1, "params": {"n": 3, "mode": NONLOCAL, "values": list(x)}}
    assert np.array_equal(params_from_json(json.dumps(doc))[0], x)
    with pytest.raises(InvalidArgument):
        params_from_json(json.dumps({"n": 3, "mode": NONLOCAL, "values": [0.0]}))
    with pytest.raises(InvalidArgument):
        params_from_json("{}")
