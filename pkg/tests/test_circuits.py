import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cartanqec.circuits import (
    Circuit,
    Gate,
    circuit_unitary,
    emit_qasm_like,
    kron_gate,
    nonlocal_target,
    parse_qasm_like,
    phase_distance,
    rz_multiplier,
    structured_target,
    synth_nonlocal_encoder,
    synth_string_rotation,
    synth_structured_encoder,
)
from cartanqec.errors import InvalidArgument, UnsupportedString
from cartanqec.numerics import pauli_string_exp

import oracle

GENERATORS = ["ZZZ", "XXZ", "YYZ", "XXX", "YYX", "ZZX", "IIX"]
angles = st.floats(-6, 6, allow_nan=False)
vec = lambda k: st.lists(angles, min_size=k, max_size=k)  # noqa: E731


def test_gate_validation():
    with pytest.raises(InvalidArgument):
        Gate("CNOT", (1, 1))
    with pytest.raises(InvalidArgument):
        Gate("RZ", (1,))
    with pytest.raises(InvalidArgument):
        Gate("H", (1,), 0.3)
    with pytest.raises(InvalidArgument):
        Circuit(2, (Gate("H", (3,)),))


def test_circuit_unitary_examples():
    assert np.array_equal(circuit_unitary(Circuit(3)), np.eye(8))
    cx = circuit_unitary(Circuit(2, (Gate("CNOT", (1, 2)),)))
    assert np.array_equal(cx, np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]]))
    hh = circuit_unitary(Circuit(1, (Gate("H", (1,)), Gate("H", (1,)))))
    assert np.allclose(hh, np.eye(2))


def test_gate_order_and_wire_embedding():
    c = Circuit(3, (Gate("H", (2,)), Gate("S", (3,))))
    expect = kron_gate(c.gates[1], 3) @ kron_gate(c.gates[0], 3)
    assert np.allclose(circuit_unitary(c), expect)
    assert np.allclose(kron_gate(Gate("H", (2,)), 3), np.kron(np.kron(np.eye(2), c.gates[0].matrix()), np.eye(2)))
    # CNOT with control below target
    rev = circuit_unitary(Circuit(2, (Gate("CNOT", (2, 1)),)))
    assert np.allclose(rev @ oracle.ket("01"), oracle.ket("11"))


def test_conjugation_identities():
    h = Gate("H", (1,)).matrix()
    s = Gate("S", (1,)).matrix()
    assert np.allclose(s, (np.eye(2) + 1j * oracle.X) / np.sqrt(2))
    assert np.allclose(h @ oracle.Z @ h, oracle.X)
    assert np.allclose(s @ oracle.Z @ s.conj().T, oracle.Y)
    assert np.allclose(Gate("SDAG", (1,)).matrix(), s.conj().T)


def test_rz_convention():
    m = Gate("RZ", (1,), 0.4).matrix()
    assert np.allclose(m, np.diag([np.exp(-0.2j), np.exp(0.2j)]))


def test_zzz_template():
    c = synth_string_rotation("ZZZ", 0.3)
    kinds = [(g.kind, g.qubits) for g in c.gates]
    assert kinds == [("CNOT", (1, 2)), ("CNOT", (2, 3)), ("RZ", (3,)), ("CNOT", (2, 3)), ("CNOT", (1, 2))]
    assert c.gates[2].angle == pytest.approx(rz_multiplier("ZZZ") * 0.3)
    assert phase_distance(circuit_unitary(synth_string_rotation("ZZZ", 0.0)), np.eye(8)) < 1e-12


@pytest.mark.parametrize("s", GENERATORS + ["XYI", "ZIZ", "YXZ", "X"])
def test_string_rotation_matches_oracle(s):
    for a in (0.7, -1.3, 2.9):
        assert phase_distance(circuit_unitary(synth_string_rotation(s, a)), pauli_string_exp(s, a)) < 1e-10


def test_unsupported_strings():
    with pytest.raises(UnsupportedString):
        synth_string_rotation("III", 0.2)
    with pytest.raises(UnsupportedString):
        synth_string_rotation("XQZ", 0.2)


def test_structured_single_factor():
    c = synth_structured_encoder([0] * 4, [0.1, 0, 0], [0] * 3)
    assert phase_distance(circuit_unitary(c), pauli_string_exp("XXZ", 0.1)) < 1e-12


def test_structured_zero_is_identity():
    c = synth_structured_encoder([0] * 4, [0] * 3, [0] * 3)
    assert phase_distance(circuit_unitary(c), np.eye(8)) < 1e-12


@given(vec(4), vec(3), vec(3))
def test_structured_encoder_matches_product(a, c1, c2):
    c = synth_structured_encoder(a, c1, c2)
    assert phase_distance(circuit_unitary(c), structured_target(a, c1, c2)) < 1e-9


def test_structured_target_equals_cartan_build(rng):
    a, c1, c2 = rng.normal(size=4), rng.normal(size=3), rng.normal(size=3)
    x = np.zeros(22)
    x[3:6], x[9:13], x[16:19] = c1, a, c2
    assert np.max(np.abs(structured_target(a, c1, c2) - nonlocal_target(x))) < 1e-12


@given(vec(22))
def test_full_structured_encoder(x):
    assert phase_distance(circuit_unitary(synth_nonlocal_encoder(x)), nonlocal_target(x)) < 1e-9


def test_nonlocal_encoder_rejects_wrong_size():
    with pytest.raises(InvalidArgument):
        synth_nonlocal_encoder(np.zeros(110))


def test_only_angles_change(rng):
    a = synth_structured_encoder(rng.normal(size=4), rng.normal(size=3), rng.normal(size=3))
    b = synth_structured_encoder(np.zeros(4), np.zeros(3), np.zeros(3))
    assert a.skeleton() == b.skeleton()
    assert {g.kind for g, h in zip(a.gates, b.gates) if g != h} == {"RZ"}


def test_qasm_format():
    c = Circuit(3, (Gate("CNOT", (1, 2)), Gate("RZ", (3,), -0.25), Gate("SDAG", (2,))))
    lines = emit_qasm_like(c).splitlines()
    assert lines[1:] == ["CNOT 1 2", "RZ 3 -0.250000000000", "SDAG 2"]


@given(vec(4), vec(3), vec(3))
def test_qasm_roundtrip(a, c1, c2):
    c = synth_structured_encoder(a, c1, c2)
    text = emit_qasm_like(c)
    back = parse_qasm_like(text)
    assert back.width == c.width and back.skeleton() == c.skeleton()
    for g, h in zip(c.gates, back.gates):
        if g.angle is not None:
            assert h.angle == pytest.approx(g.angle, rel=1e-11, abs=1e-12)
    assert emit_qasm_like(back) == text
    assert phase_distance(circuit_unitary(back), circuit_unitary(c)) < 1e-9


def test_parse_errors():
    with pytest.raises(InvalidArgument, match="line 2"):
        parse_qasm_like("QUBITS 2\nRZ 1\n")


def test_phase_distance():
    u = pauli_string_exp("XYZ", 0.4)
    assert phase_distance(np.exp(0.7j) * u, u) < 1e-12
    assert phase_distance(u, -u) < 1e-12
    assert phase_distance(np.eye(2), np.diag([1, -1])) > 0.9
