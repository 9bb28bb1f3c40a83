"""Gate-level circuits for structured 3-qubit encoders.

Every Pauli-string exponential ``exp(-i t P)`` is built from a basis change
onto Z (H for X, S-dagger for Y), a CNOT ladder over the non-identity wires,
one Rz on the last of them, and the mirrored ladder and basis change. Wire 1
is the left-most label of a Pauli string. Gates are listed in time order, so
the circuit unitary is ``G_last ... G_2 G_1``.

``Rz(theta) = diag(exp(-i theta / 2), exp(i theta / 2))`` and
``S = (1 + i X) / sqrt(2)``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .cartan import BASES, NONLOCAL, CartanParams, build_unitary, param_count
from .errors import InvalidArgument, UnsupportedString
from .numerics import PauliString, kron_all, pauli_string_exp

GATE_KINDS = ("CNOT", "H", "HDAG", "S", "SDAG", "RZ")
SYNTH_WIDTH = 3
EQUIV_TOL = 1e-9

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_S = np.array([[1, 1j], [1j, 1]], dtype=complex) / np.sqrt(2)


def rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


@dataclass(frozen=True)
class Gate:
    """One gate; qubit indices are 1-based."""

    kind: str
    qubits: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise InvalidArgument(f"unknown gate {self.kind!r}")
        q = tuple(int(i) for i in self.qubits)
        object.__setattr__(self, "qubits", q)
        arity = 2 if self.kind == "CNOT" else 1
        if len(q) != arity:
            raise InvalidArgument(f"{self.kind} acts on {arity} qubit(s), got {q}")
        if self.kind == "CNOT" and q[0] == q[1]:
            raise InvalidArgument("CNOT control and target must differ")
        if (self.kind == "RZ") != (self.angle is not None):
            raise InvalidArgument("RZ needs an angle and other gates take none")
        if self.angle is not None:
            object.__setattr__(self, "angle", float(self.angle))

    def matrix(self) -> np.ndarray:
        """Matrix on the gate's own qubits (control first for CNOT)."""
        if self.kind == "CNOT":
            m = np.eye(4, dtype=complex)
            m[2:, 2:] = [[0, 1], [1, 0]]
            return m
        if self.kind in ("H", "HDAG"):
            return _H.copy()
        if self.kind == "S":
            return _S.copy()
        if self.kind == "SDAG":
            return _S.conj().T
        return rz(self.angle)


def cnot(control: int, target: int) -> Gate:
    return Gate("CNOT", (control, target))


@dataclass(frozen=True)
class Circuit:
    width: int
    gates: tuple[Gate, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.width < 1:
            raise InvalidArgument("circuit width must be positive")
        gates = tuple(self.gates)
        for g in gates:
            if any(not 1 <= q <= self.width for q in g.qubits):
                raise InvalidArgument(f"{g} addresses a qubit outside width {self.width}")
        object.__setattr__(self, "gates", gates)

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.width != self.width:
            raise InvalidArgument("cannot concatenate circuits of different width")
        return Circuit(self.width, self.gates + other.gates)

    def skeleton(self) -> tuple[tuple[str, tuple[int, ...]], ...]:
        """Gate sequence with the rotation angles dropped."""
        return tuple((g.kind, g.qubits) for g in self.gates)


def _apply_gate(g: Gate, state: np.ndarray, width: int) -> np.ndarray:
    t = state.reshape((2,) * width + (-1,))
    axes = [q - 1 for q in g.qubits]
    k = len(axes)
    m = g.matrix().reshape((2,) * (2 * k))
    t = np.tensordot(m, t, axes=(list(range(k, 2 * k)), axes))
    t = np.moveaxis(t, list(range(k)), axes)
    return t.reshape(state.shape)


def circuit_unitary(c: Circuit) -> np.ndarray:
    """Product of the gate matrices, first gate acting first."""
    u = np.eye(2**c.width, dtype=complex)
    for g in c.gates:
        u = _apply_gate(g, u, c.width)
    return u


def phase_distance(a, b) -> float:
    """``min_phi max|exp(i phi) a - b|``."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise InvalidArgument(f"shape mismatch {a.shape} vs {b.shape}")
    ov = np.vdot(a, b)
    phi0 = float(np.angle(ov)) if abs(ov) > 0 else 0.0

    def dist(phi):
        return float(np.max(np.abs(np.exp(1j * phi) * a - b)))

    r = minimize_scalar(dist, bounds=(phi0 - 0.05, phi0 + 0.05), method="bounded", options={"xatol": 1e-14})
    return min(dist(phi0), float(r.fun))


# ---------------------------------------------------------------------------
# Synthesis


def _template(labels: str) -> tuple[list[Gate], list[Gate], list[Gate], int]:
    """(basis change in, ladder, mirror ladder + basis change out, rz wire)."""
    for ch in labels:
        if ch not in "IXYZ":
            raise UnsupportedString(f"unsupported Pauli label {ch!r} in {labels!r}")
    active = [i + 1 for i, ch in enumerate(labels) if ch != "I"]
    if not active:
        raise UnsupportedString("the identity string has no circuit template")
    pre, post = [], []
    for q in active:
        ch = labels[q - 1]
        if ch == "X":
            pre.append(Gate("H", (q,)))
            post.append(Gate("H", (q,)))
        elif ch == "Y":
            pre.append(Gate("SDAG", (q,)))
            post.append(Gate("S", (q,)))
    ladder = [cnot(a, b) for a, b in zip(active, active[1:])]
    return pre, ladder, list(reversed(ladder)) + post, active[-1]


@functools.lru_cache(maxsize=None)
def rz_multiplier(labels: str) -> float:
    """Factor ``m`` with ``exp(-i t P) ~ template(Rz(m t))``, fixed against the oracle."""
    _template(labels)
    p = PauliString(labels)
    ref = 0.37
    for m in (2.0, -2.0, 1.0, -1.0):
        c = _string_circuit(labels, m * ref)
        if phase_distance(circuit_unitary(c), pauli_string_exp(p, ref)) < 1e-12:
            return m
    raise UnsupportedString(f"no Rz multiplier reproduces exp(-i t {labels})")


def _string_circuit(labels: str, theta: float) -> Circuit:
    pre, ladder, post, wire = _template(labels)
    return Circuit(len(labels), tuple(pre + ladder + [Gate("RZ", (wire,), theta)] + post))


def synth_string_rotation(p: PauliString | str, angle: float) -> Circuit:
    """Circuit for ``exp(-i angle P)``, equal to it up to a global phase.

    Raises:
        UnsupportedString: for labels outside IXYZ or the all-identity string.
    """
    labels = p.labels if isinstance(p, PauliString) else str(p)
    return _string_circuit(labels, rz_multiplier(labels) * float(angle))


def _exp_block(strings: Iterable[PauliString], coeffs: Sequence[float], width: int) -> Circuit:
    c = Circuit(width)
    for s, t in zip(strings, coeffs):
        labels = s.labels + "I" * (width - len(s.labels))
        c = c + synth_string_rotation(labels, t)
    return c


def _check3(name: str, v, size: int) -> np.ndarray:
    v = np.asarray(v, dtype=float).ravel()
    if v.size != size:
        raise InvalidArgument(f"{name} needs {size} values, got {v.size}")
    return v


def synth_structured_encoder(a, c1, c2) -> Circuit:
    """Circuit for ``F1 J F2`` on three qubits.

    ``F1 = exp(-i sum c1_k f_k)``, ``J = exp(-i sum a_k h_k)`` and
    ``F2 = exp(-i sum c2_k f_k)``. F2 acts first, so its gates come first.
    Every rotation is emitted even at zero angle, so encoders differ only in
    their Rz angles.
    """
    b = BASES[SYNTH_WIDTH]
    a = _check3("a", a, len(b.h_strings))
    c1 = _check3("c1", c1, len(b.f_strings))
    c2 = _check3("c2", c2, len(b.f_strings))
    return (
        _exp_block(b.f_strings, c2, SYNTH_WIDTH)
        + _exp_block(b.h_strings, a, SYNTH_WIDTH)
        + _exp_block(b.f_strings, c1, SYNTH_WIDTH)
    )


def _synth_params(p: CartanParams, width: int) -> Circuit:
    b = BASES[p.n]
    if p.n == 2:
        return _exp_block(b.h_strings, p.a, width)
    k = [_synth_params(f.sub, width) for f in p.k]
    return (
        k[3]
        + _exp_block(b.f_strings, p.c2, width)
        + k[2]
        + _exp_block(b.h_strings, p.a, width)
        + k[1]
        + _exp_block(b.f_strings, p.c1, width)
        + k[0]
    )


def synth_nonlocal_encoder(x) -> Circuit:
    """Circuit for the full structured 3-qubit encoder with flat parameters ``x``.

    Unlike :func:`synth_structured_encoder` this includes the nested
    two-qubit exponentials on wires 1 and 2.
    """
    x = np.asarray(x, dtype=float).ravel()
    expected = param_count(SYNTH_WIDTH, NONLOCAL)
    if x.size != expected:
        raise InvalidArgument(
            f"structured 3-qubit encoders take {expected} parameters, got {x.size}; "
            "only width-3 synthesis is supported"
        )
    return _synth_params(CartanParams.unflatten(x, SYNTH_WIDTH, NONLOCAL), SYNTH_WIDTH)


def structured_target(a, c1, c2) -> np.ndarray:
    """Reference matrix ``F1 J F2`` as a product of Pauli exponentials."""
    b = BASES[SYNTH_WIDTH]
    u = np.eye(2**SYNTH_WIDTH, dtype=complex)
    for strings, coeffs in ((b.f_strings, c1), (b.h_strings, a), (b.f_strings, c2)):
        for s, t in zip(strings, coeffs):
            u = u @ pauli_string_exp(s, float(t))
    return u


def nonlocal_target(x) -> np.ndarray:
    return build_unitary(CartanParams.unflatten(x, SYNTH_WIDTH, NONLOCAL), NONLOCAL)


# ---------------------------------------------------------------------------
# Text format


def _fmt(angle: float) -> str:
    return format(angle, "#.12g")


def emit_qasm_like(c: Circuit) -> str:
    """One gate per line: ``GATE q[ q2][ angle]``; the first line declares the width."""
    lines = [f"QUBITS {c.width}"]
    for g in c.gates:
        parts = [g.kind, *(str(q) for q in g.qubits)]
        if g.angle is not None:
            parts.append(_fmt(g.angle))
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def parse_qasm_like(text: str) -> Circuit:
    width = None
    gates = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            if parts[0] == "QUBITS":
                width = int(parts[1])
            elif parts[0] == "CNOT":
                gates.append(Gate("CNOT", (int(parts[1]), int(parts[2]))))
            elif parts[0] == "RZ":
                gates.append(Gate("RZ", (int(parts[1]),), float(parts[2])))
            else:
                gates.append(Gate(parts[0], (int(parts[1]),)))
        except (IndexError, ValueError) as exc:
            raise InvalidArgument(f"line {lineno}: cannot parse {raw!r} ({exc})") from None
    if width is None:
        width = max((q for g in gates for q in g.qubits), default=1)
    return Circuit(width, tuple(gates))


def kron_gate(g: Gate, width: int) -> np.ndarray:
    """Full matrix of a single-qubit gate; used as an independent check."""
    if len(g.qubits) != 1:
        raise InvalidArgument("kron_gate handles single-qubit gates only")
    ops = [np.eye(2, dtype=complex)] * width
    ops[g.qubits[0] - 1] = g.matrix()
    return kron_all(ops)
