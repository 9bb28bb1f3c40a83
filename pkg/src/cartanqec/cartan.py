"""Recursive Cartan parameterisation of n-qubit unitaries, n = 2, 3, 4.

For n = 2::

    U = (U1 (x) U2) exp(-i (c1 XX + c2 YY + c3 ZZ)) (U3 (x) U4)

and for n > 2::

    U = K1 F1 K2 J K3 F2 K4,   K = A (x) u,  A in SU(2^(n-1)), u in SU(2)

with ``F = exp(-i sum c_k f_k)`` and ``J = exp(-i sum a_k h_k)`` over the
commuting Pauli strings of :data:`BASES`. The SU(2) factor of every ``K``
acts on the last qubit.

Flat parameter vectors are ordered depth first. For n = 2:
``U1, U2, (c1, c2, c3), U3, U4`` (each U a triple). For n > 2:
``K1, F1, K2, J, K3, F2, K4`` with each K written as (sub-unitary params,
SU(2) triple). The nonlocal views drop every SU(2) triple.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidArgument
from .numerics import PauliString, apply_pauli_exp, is_unitary
from .qec import Code


@dataclass(frozen=True)
class CartanBasis:
    n: int
    h_strings: tuple[PauliString, ...]
    f_strings: tuple[PauliString, ...]


def _basis(n: int, h: Sequence[str], f: Sequence[str]) -> CartanBasis:
    return CartanBasis(n, tuple(PauliString(s) for s in h), tuple(PauliString(s) for s in f))


BASES = {
    2: _basis(2, ["XX", "YY", "ZZ"], []),
    3: _basis(3, ["XXX", "YYX", "ZZX", "IIX"], ["XXZ", "YYZ", "ZZZ"]),
    4: _basis(
        4,
        ["IIIX", "XXIX", "YYIX", "ZZIX", "IIXX", "XXXX", "YYXX", "ZZXX"],
        ["XXIZ", "YYIZ", "ZZIZ", "IIXZ", "XXXZ", "YYXZ", "ZZXZ"],
    ),
}

FULL = "full"
NONLOCAL = "nonlocal_only"
FIXED_LOCAL = "fixed_local"
MODES = (FULL, NONLOCAL, FIXED_LOCAL)


def cartan_basis(n: int) -> CartanBasis:
    try:
        return BASES[n]
    except KeyError:
        raise InvalidArgument(f"Cartan parameterisation is available for n in {sorted(BASES)}, got {n}") from None


def _check_mode(mode: str) -> str:
    if mode not in MODES:
        raise InvalidArgument(f"unknown mode {mode!r}; expected one of {MODES}")
    return mode


def param_count(n: int, mode: str = FULL) -> int:
    """Length of the flat parameter vector for ``n`` qubits."""
    _check_mode(mode)
    b = cartan_basis(n)
    local = 3 if mode == FULL else 0
    if n == 2:
        return 3 + 4 * local
    return len(b.h_strings) + 2 * len(b.f_strings) + 4 * (param_count(n - 1, mode) + local)


def su2(p) -> np.ndarray:
    """``exp(-i (px X + py Y + pz Z))``."""
    px, py, pz = (float(t) for t in p)
    th = np.sqrt(px * px + py * py + pz * pz)
    if th < 1e-300:
        return np.eye(2, dtype=complex)
    s = np.sin(th) / th
    c = np.cos(th)
    return np.array(
        [[c - 1j * s * pz, -1j * s * px - s * py], [-1j * s * px + s * py, c + 1j * s * pz]],
        dtype=complex,
    )


@dataclass(frozen=True)
class KFactor:
    """``sub (x) local``: ``sub`` is None for the single-qubit factors at n = 2."""

    sub: "CartanParams | None"
    local: np.ndarray


@dataclass(frozen=True)
class CartanParams:
    """Structured Cartan parameters.

    For n = 2, ``a`` holds ``(c1, c2, c3)`` and ``k`` holds U1..U4 with no
    sub-parameters. For n > 2, ``a`` are the J coefficients, ``c1``/``c2`` the
    F1/F2 coefficients and ``k`` the four factors K1..K4.
    """

    n: int
    a: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    k: tuple[KFactor, KFactor, KFactor, KFactor]

    def flatten(self, mode: str = FULL) -> np.ndarray:
        _check_mode(mode)
        out: list[np.ndarray] = []
        _flatten_into(self, mode == FULL, out)
        return np.concatenate(out) if out else np.zeros(0)

    @classmethod
    def unflatten(cls, x, n: int, mode: str = FULL) -> "CartanParams":
        _check_mode(mode)
        cartan_basis(n)
        x = np.asarray(x, dtype=float).ravel()
        expected = param_count(n, mode)
        if x.size != expected:
            raise InvalidArgument(f"n={n} mode={mode} needs {expected} parameters, got {x.size}")
        p, used = _unflatten(x, 0, n, mode == FULL)
        assert used == x.size
        return p

    @classmethod
    def zeros(cls, n: int) -> "CartanParams":
        return cls.unflatten(np.zeros(param_count(n)), n)

    @classmethod
    def random(cls, n: int, rng, scale: float = np.pi, mode: str = FULL) -> "CartanParams":
        x = rng.uniform(-scale, scale, size=param_count(n, mode))
        return cls.unflatten(x, n, mode)


def _flatten_into(p: CartanParams, with_local: bool, out: list) -> None:
    def k_into(f: KFactor):
        if f.sub is not None:
            _flatten_into(f.sub, with_local, out)
        if with_local:
            out.append(np.asarray(f.local, dtype=float))

    if p.n == 2:
        k_into(p.k[0])
        k_into(p.k[1])
        out.append(p.a)
        k_into(p.k[2])
        k_into(p.k[3])
        return
    k_into(p.k[0])
    out.append(p.c1)
    k_into(p.k[1])
    out.append(p.a)
    k_into(p.k[2])
    out.append(p.c2)
    k_into(p.k[3])


def _unflatten(x: np.ndarray, i: int, n: int, with_local: bool) -> tuple[CartanParams, int]:
    b = BASES[n]
    zero3 = np.zeros(3)

    def take(count: int):
        nonlocal i
        seg = x[i : i + count].copy()
        i += count
        return seg

    def k_factor(sub_n: int | None) -> KFactor:
        nonlocal i
        sub = None
        if sub_n is not None:
            sub, i = _unflatten(x, i, sub_n, with_local)
        return KFactor(sub, take(3) if with_local else zero3.copy())

    if n == 2:
        u1, u2 = k_factor(None), k_factor(None)
        a = take(3)
        u3, u4 = k_factor(None), k_factor(None)
        return CartanParams(2, a, np.zeros(0), np.zeros(0), (u1, u2, u3, u4)), i
    k1 = k_factor(n - 1)
    c1 = take(len(b.f_strings))
    k2 = k_factor(n - 1)
    a = take(len(b.h_strings))
    k3 = k_factor(n - 1)
    c2 = take(len(b.f_strings))
    k4 = k_factor(n - 1)
    return CartanParams(n, a, c1, c2, (k1, k2, k3, k4)), i


# ---------------------------------------------------------------------------
# Evaluation

LocalFn = Callable[[np.ndarray], "np.ndarray | None"]


def _check_local(fixed_local) -> np.ndarray:
    if fixed_local is None:
        raise InvalidArgument("fixed_local mode needs a 2x2 unitary")
    u = np.asarray(fixed_local, dtype=complex)
    if u.shape != (2, 2) or not is_unitary(u, 1e-10):
        raise InvalidArgument("fixed_local must be a 2x2 unitary")
    return u


def _local_fn(mode: str) -> LocalFn:
    return su2 if mode == FULL else (lambda _: None)


def _apply_frame(u: np.ndarray, x: np.ndarray, n: int) -> np.ndarray:
    """``u`` on every qubit of the ``(2^n, m)`` block ``x``."""
    m = x.shape[1]
    y = x.reshape((2,) * n + (m,))
    for q in range(n):
        y = _apply_1q(u, y, q)
    return y.reshape(2**n, m)


def _exp_sum(strings: Sequence[PauliString], coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
    for s, c in zip(strings, coeffs):
        if c != 0.0:
            x = apply_pauli_exp(s, c, x)
    return x


def _apply_1q(u: np.ndarray | None, x: np.ndarray, axis: int) -> np.ndarray:
    if u is None:
        return x
    return np.moveaxis(np.tensordot(u, x, axes=([1], [axis])), 0, axis)


def _apply_k(f: KFactor, x: np.ndarray, local: LocalFn) -> np.ndarray:
    d, m = x.shape
    y = x.reshape(d // 2, 2, m)
    y = _apply_1q(local(f.local), y, 1)
    y = y.reshape(d // 2, 2 * m)
    y = _apply(f.sub, y, local)
    return y.reshape(d, m)


def _apply(p: CartanParams, x: np.ndarray, local: LocalFn) -> np.ndarray:
    """``U(p) @ x`` for a ``(2^n, m)`` block ``x``."""
    b = BASES[p.n]
    if p.n == 2:
        m = x.shape[1]
        y = x.reshape(2, 2, m)
        y = _apply_1q(local(p.k[3].local), y, 1)
        y = _apply_1q(local(p.k[2].local), y, 0)
        y = _exp_sum(b.h_strings, p.a, y.reshape(4, m))
        y = y.reshape(2, 2, m)
        y = _apply_1q(local(p.k[1].local), y, 1)
        y = _apply_1q(local(p.k[0].local), y, 0)
        return y.reshape(4, m)
    y = _apply_k(p.k[3], x, local)
    y = _exp_sum(b.f_strings, p.c2, y)
    y = _apply_k(p.k[2], y, local)
    y = _exp_sum(b.h_strings, p.a, y)
    y = _apply_k(p.k[1], y, local)
    y = _exp_sum(b.f_strings, p.c1, y)
    return _apply_k(p.k[0], y, local)


def apply_unitary(p: CartanParams, x, mode: str = FULL, fixed_local=None) -> np.ndarray:
    """``U(p) @ x`` without forming ``U``."""
    _check_mode(mode)
    x = np.asarray(x, dtype=complex)
    if x.shape[0] != 2**p.n:
        raise InvalidArgument(f"block has {x.shape[0]} rows, expected {2**p.n}")
    squeeze = x.ndim == 1
    frame = _check_local(fixed_local) if mode == FIXED_LOCAL else None
    out = _apply(p, x.reshape(2**p.n, -1), _local_fn(mode))
    if frame is not None:
        out = _apply_frame(frame, out, p.n)
    return out[:, 0] if squeeze else out


def build_unitary(p: CartanParams, mode: str = FULL, fixed_local=None) -> np.ndarray:
    """The full ``2^n x 2^n`` unitary.

    ``mode`` selects how the SU(2) factors are realised: ``full`` uses the
    parameters and ``nonlocal_only`` replaces them by the identity.
    ``fixed_local`` fixes the output-side local factors to ``fixed_local``
    on every qubit and the inner ones to the identity, so that
    ``U = fixed_local^(x n) U_nonlocal``.
    """
    return apply_unitary(p, np.eye(2**p.n, dtype=complex), mode, fixed_local)


def factor_unitaries(p: CartanParams) -> dict[str, np.ndarray]:
    """The top-level nonlocal factors ``F1``, ``J``, ``F2`` as matrices (n > 2)."""
    b = BASES[p.n]
    eye = np.eye(2**p.n, dtype=complex)
    return {
        "F1": _exp_sum(b.f_strings, p.c1, eye),
        "J": _exp_sum(b.h_strings, p.a, eye),
        "F2": _exp_sum(b.f_strings, p.c2, eye),
    }


# ---------------------------------------------------------------------------
# Codes from unitaries

def logical_columns(n: int) -> tuple[int, int]:
    """Computational-basis indices mapped to the codewords by ``U``.

    The codewords are ``U|00...0>`` and ``U|10...0>``. Every nonlocal
    generator commutes with Z on qubits 1 and 2 jointly, so the two inputs
    must differ in that parity for structured encoders to reach codes whose
    codewords sit in different parity sectors.
    """
    return (0, 2 ** (n - 1))


def code_from_unitary(u, columns: tuple[int, int] | None = None) -> Code:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise InvalidArgument("encoding unitary must be square")
    if not is_unitary(u, 1e-8):
        raise InvalidArgument("encoding matrix is not unitary")
    n = int(round(np.log2(u.shape[0])))
    i, j = columns if columns is not None else logical_columns(n)
    return Code(u[:, i], u[:, j])


class Encoder:
    """Flat parameter vector -> ``d x 2`` codeword basis, for one (n, mode)."""

    def __init__(self, n: int, mode: str = FULL, fixed_local=None, columns=None):
        _check_mode(mode)
        cartan_basis(n)
        self.n = n
        self.mode = mode
        self.fixed_local = None if fixed_local is None else np.asarray(fixed_local, dtype=complex)
        self.size = param_count(n, mode)
        self.columns = tuple(columns) if columns is not None else logical_columns(n)
        if mode == FIXED_LOCAL:
            _check_local(self.fixed_local)
        self._x0 = np.zeros((2**n, 2), dtype=complex)
        self._x0[self.columns[0], 0] = 1.0
        self._x0[self.columns[1], 1] = 1.0

    def params(self, x) -> CartanParams:
        return CartanParams.unflatten(x, self.n, self.mode)

    def basis(self, x) -> np.ndarray:
        return apply_unitary(self.params(x), self._x0, self.mode, self.fixed_local)

    def unitary(self, x) -> np.ndarray:
        return build_unitary(self.params(x), self.mode, self.fixed_local)

    def code(self, x) -> Code:
        b = self.basis(x)
        return Code(b[:, 0], b[:, 1])


def params_to_json(x, n: int, mode: str) -> str:
    return json.dumps({"n": n, "mode": mode, "values": [float(t) for t in np.asarray(x).ravel()]})


def params_from_json(text: str) -> tuple[np.ndarray, int, str]:
    """Inverse of :func:`params_to_json`; a search result document works too."""
    try:
        d = json.loads(text)
        if isinstance(d.get("params"), dict):
            d = d["params"]
        n, mode = int(d["n"]), str(d["mode"])
        x = np.asarray(d["values"], dtype=float)
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise InvalidArgument(f"malformed parameter document: {exc}") from None
    _check_mode(mode)
    cartan_basis(n)
    if x.size != param_count(n, mode):
        raise InvalidArgument(f"expected {param_count(n, mode)} parameters for n={n} {mode}, got {x.size}")
    return x, n, mode
