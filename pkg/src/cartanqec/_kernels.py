"""Compiled hot path for the search objective.

The Cartan recursion is flattened into a gate program: one Pauli-string
exponential per nonlocal parameter and one single-qubit gate per local
factor, listed in product order (which coincides with the flat parameter
order). In fixed-local mode the program starts with the fixed frame on every
qubit. The program is applied right to left to the two logical columns and
the Petz fidelity loss is evaluated on the result, all inside numba.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .cartan import BASES, FIXED_LOCAL, FULL, NONLOCAL, param_count
from .numerics import PauliString

PAULI_EXP = 0
SU2 = 1
FIXED = 2


class Program:
    """Gate program for ``n`` qubits in one parameter mode."""

    def __init__(self, n: int, mode: str):
        self.n = n
        self.mode = mode
        d = 2**n
        kinds: list[int] = []
        qubits: list[int] = []
        offsets: list[int] = []
        strings: list[PauliString | None] = []
        off = 0

        def local(q: int):
            nonlocal off
            if mode == FULL:
                kinds.append(SU2)
                qubits.append(q)
                offsets.append(off)
                strings.append(None)
                off += 3

        def exps(m: int, labels):
            nonlocal off
            for s in labels:
                kinds.append(PAULI_EXP)
                qubits.append(-1)
                offsets.append(off)
                strings.append(PauliString(s.labels + "I" * (n - m)))
                off += 1

        def level(m: int):
            b = BASES[m]
            if m == 2:
                local(0)
                local(1)
                exps(2, b.h_strings)
                local(0)
                local(1)
                return

            def k():
                level(m - 1)
                local(m - 1)

            k()
            exps(m, b.f_strings)
            k()
            exps(m, b.h_strings)
            k()
            exps(m, b.f_strings)
            k()

        if mode == FIXED_LOCAL:
            for q in range(n):
                kinds.append(FIXED)
                qubits.append(q)
                offsets.append(-1)
                strings.append(None)
        level(n)
        assert mode in (FULL, NONLOCAL, FIXED_LOCAL)
        assert off == param_count(n, mode)
        self.size = off
        self.kinds = np.array(kinds, dtype=np.int64)
        self.qubits = np.array(qubits, dtype=np.int64)
        self.offsets = np.array(offsets, dtype=np.int64)
        self.perms = np.zeros((len(kinds), d), dtype=np.int64)
        self.phases = np.zeros((len(kinds), d), dtype=np.complex128)
        for i, s in enumerate(strings):
            if s is not None:
                perm, phase = s.action
                self.perms[i] = perm
                self.phases[i] = phase


@njit(cache=True)
def _su2(px, py, pz):
    u = np.empty((2, 2), dtype=np.complex128)
    th = np.sqrt(px * px + py * py + pz * pz)
    if th < 1e-300:
        u[0, 0] = 1.0
        u[0, 1] = 0.0
        u[1, 0] = 0.0
        u[1, 1] = 1.0
        return u
    s = np.sin(th) / th
    c = np.cos(th)
    u[0, 0] = c - 1j * s * pz
    u[0, 1] = -1j * s * px - s * py
    u[1, 0] = -1j * s * px + s * py
    u[1, 1] = c + 1j * s * pz
    return u


@njit(cache=True)
def _apply_1q(state, u, q, n):
    shift = n - 1 - q
    bit = 1 << shift
    d, m = state.shape
    for i in range(d):
        if i & bit:
            continue
        j = i | bit
        for c in range(m):
            a = state[i, c]
            b = state[j, c]
            state[i, c] = u[0, 0] * a + u[0, 1] * b
            state[j, c] = u[1, 0] * a + u[1, 1] * b


@njit(cache=True)
def encode(x, kinds, qubits, offsets, perms, phases, fixed, n, x0):
    """Apply the program to the columns ``x0`` (right-most factor first)."""
    state = x0.copy()
    d, m = state.shape
    tmp = np.empty_like(state)
    for k in range(kinds.shape[0] - 1, -1, -1):
        kind = kinds[k]
        if kind == 0:
            ang = x[offsets[k]]
            if ang == 0.0:
                continue
            c = np.cos(ang)
            s = -1j * np.sin(ang)
            for y in range(d):
                src = perms[k, y]
                ph = phases[k, y]
                for col in range(m):
                    tmp[y, col] = c * state[y, col] + s * ph * state[src, col]
            state[:, :] = tmp
        elif kind == 1:
            o = offsets[k]
            _apply_1q(state, _su2(x[o], x[o + 1], x[o + 2]), qubits[k], n)
        else:
            _apply_1q(state, fixed, qubits[k], n)
    return state


@njit(cache=True)
def transfer_matrix(basis, kraus, rel_tol):
    """Pauli transfer matrix of Petz recovery after noise, on the code ``basis``.

    Returns a 4x4 real matrix; a degenerate ``E(P)`` yields NaNs.
    """
    nk, d, _ = kraus.shape
    w2 = 2 * nk
    b = np.zeros((d, w2), dtype=np.complex128)
    for k in range(nk):
        for i in range(d):
            acc0 = 0j
            acc1 = 0j
            for t in range(d):
                e = kraus[k, i, t]
                if e != 0:
                    acc0 += e * basis[t, 0]
                    acc1 += e * basis[t, 1]
            b[i, 2 * k] = acc0
            b[i, 2 * k + 1] = acc1
    ep = np.empty((d, d), dtype=np.complex128)
    for i in range(d):
        for j in range(i, d):
            acc = 0j
            for col in range(w2):
                acc += b[i, col] * np.conj(b[j, col])
            ep[i, j] = acc
            ep[j, i] = np.conj(acc)
    w, v = np.linalg.eigh(ep)
    out = np.full((4, 4), np.nan)
    top = w[d - 1]
    if not top > 1e-14:
        return out
    r = 0
    for i in range(d):
        if w[i] > rel_tol * top:
            r += 1
    c = np.empty((r, w2), dtype=np.complex128)
    row = 0
    for i in range(d):
        if w[i] > rel_tol * top:
            scale = 1.0 / np.sqrt(np.sqrt(w[i]))
            for col in range(w2):
                acc = 0j
                for t in range(d):
                    acc += np.conj(v[t, i]) * b[t, col]
                c[row, col] = acc * scale
            row += 1
    g = np.empty((w2, w2), dtype=np.complex128)
    for i in range(w2):
        for j in range(i, w2):
            acc = 0j
            for t in range(r):
                acc += np.conj(c[t, i]) * c[t, j]
            g[i, j] = acc
            g[j, i] = np.conj(acc)
    # Liouville form L[p, s, q, u] = sum_ij K_ij[p, q] conj(K_ij[s, u]), K_ij = g[2i:2i+2, 2j:2j+2]
    lio = np.zeros((2, 2, 2, 2), dtype=np.complex128)
    for i in range(nk):
        for j in range(nk):
            for p in range(2):
                for q in range(2):
                    kpq = g[2 * i + p, 2 * j + q]
                    for s in range(2):
                        for u in range(2):
                            lio[p, s, q, u] += kpq * np.conj(g[2 * i + s, 2 * j + u])
    paulis = np.zeros((4, 2, 2), dtype=np.complex128)
    paulis[0, 0, 0] = 1.0
    paulis[0, 1, 1] = 1.0
    paulis[1, 0, 1] = 1.0
    paulis[1, 1, 0] = 1.0
    paulis[2, 0, 1] = -1j
    paulis[2, 1, 0] = 1j
    paulis[3, 0, 0] = 1.0
    paulis[3, 1, 1] = -1.0
    # M_ab = Tr(sigma_a K sigma_b K^dagger) / 2 = sum sigma_a[s, p] L[p, s, q, u] sigma_b[q, u] / 2
    for a in range(4):
        for bb in range(4):
            acc = 0j
            for p in range(2):
                for s in range(2):
                    sa = paulis[a, s, p]
                    if sa == 0:
                        continue
                    for q in range(2):
                        for u in range(2):
                            sb = paulis[bb, q, u]
                            if sb != 0:
                                acc += sa * lio[p, s, q, u] * sb
            out[a, bb] = 0.5 * acc.real
    return out


@njit(cache=True)
def eta_from_transfer(m):
    t = m[1:, 1:]
    ts = 0.5 * (t + t.T)
    return 0.5 * (1.0 - np.linalg.eigvalsh(ts)[0])


@njit(cache=True)
def objective(x, kinds, qubits, offsets, perms, phases, fixed, n, x0, kraus, rel_tol):
    basis = encode(x, kinds, qubits, offsets, perms, phases, fixed, n, x0)
    return eta_from_transfer(transfer_matrix(basis, kraus, rel_tol))
