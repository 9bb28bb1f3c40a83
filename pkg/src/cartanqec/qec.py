"""Qubit codes, the Petz recovery and the worst-case fidelity loss.

For a two-dimensional code with orthonormal basis ``(v1, v2)`` the noise
followed by its Petz recovery is a unital qubit channel on the code. Its
Pauli transfer matrix has the block form ``diag(1, T)`` and the worst-case
fidelity loss is ``(1 - t_min) / 2`` where ``t_min`` is the smallest
eigenvalue of ``(T + T^T) / 2``. :func:`grid_oracle` evaluates the same
quantity by brute-force minimisation over the Bloch sphere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import minimize

from .channels import QuantumChannel, apply
from .errors import ConsistencyError, DegenerateChannelError, InvalidArgument
from .numerics import DEFAULT_REL_TOL, dagger, hermitian_eig, pinv_sqrt, support_projector

ORTHO_TOL = 1e-9
IMAG_WARN = 1e-8
IMAG_FAIL = 1e-6
UNITAL_FAIL = 1e-6


@dataclass(frozen=True)
class Code:
    """A qubit codespace spanned by the orthonormal codewords ``v1``, ``v2``."""

    v1: np.ndarray
    v2: np.ndarray

    def __post_init__(self):
        v1 = np.asarray(self.v1, dtype=complex).ravel()
        v2 = np.asarray(self.v2, dtype=complex).ravel()
        if v1.shape != v2.shape:
            raise InvalidArgument("codewords must have the same dimension")
        n = int(round(np.log2(v1.size)))
        if v1.size < 2 or 2**n != v1.size:
            raise InvalidArgument(f"codeword dimension {v1.size} is not a power of two")
        resid = orthonormality_residual(v1, v2)
        if resid > ORTHO_TOL:
            raise InvalidArgument(f"codewords are not orthonormal (residual {resid:.3e})")
        v1.setflags(write=False)
        v2.setflags(write=False)
        object.__setattr__(self, "v1", v1)
        object.__setattr__(self, "v2", v2)

    @classmethod
    def orthonormalized(cls, v1, v2) -> "Code":
        """Gram-Schmidt ``(v1, v2)`` before building the code."""
        v1 = np.asarray(v1, dtype=complex).ravel()
        v2 = np.asarray(v2, dtype=complex).ravel()
        v1 = v1 / np.linalg.norm(v1)
        v2 = v2 - np.vdot(v1, v2) * v1
        return cls(v1, v2 / np.linalg.norm(v2))

    @property
    def n_qubits(self) -> int:
        return int(round(np.log2(self.v1.size)))

    @property
    def dim(self) -> int:
        return self.v1.size

    @cached_property
    def basis(self) -> np.ndarray:
        """``d x 2`` isometry with the codewords as columns."""
        b = np.column_stack([self.v1, self.v2])
        b.setflags(write=False)
        return b

    @cached_property
    def projector(self) -> np.ndarray:
        return self.basis @ dagger(self.basis)

    def logical_paulis(self) -> list[np.ndarray]:
        """``[sigma_0, sigma_x, sigma_y, sigma_z]`` as ``d x d`` operators on the code."""
        a, b = self.v1[:, None], self.v2[:, None]
        ab, ba = a @ dagger(b), b @ dagger(a)
        return [
            self.projector,
            ab + ba,
            -1j * (ab - ba),
            a @ dagger(a) - b @ dagger(b),
        ]

    def embed(self, logical) -> np.ndarray:
        """Map a logical 2-vector into the physical space."""
        return self.basis @ np.asarray(logical, dtype=complex)

    def to_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "v1": [[float(z.real), float(z.imag)] for z in self.v1],
            "v2": [[float(z.real), float(z.imag)] for z in self.v2],
        }

    @classmethod
    def from_dict(cls, d: dict, orthonormalize: bool = False) -> "Code":
        try:
            v1 = np.array([complex(re, im) for re, im in d["v1"]])
            v2 = np.array([complex(re, im) for re, im in d["v2"]])
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidArgument(f"malformed code document: {exc}") from exc
        if "n_qubits" in d and 2 ** int(d["n_qubits"]) != v1.size:
            raise InvalidArgument("n_qubits does not match codeword length")
        return cls.orthonormalized(v1, v2) if orthonormalize else cls(v1, v2)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def orthonormality_residual(v1, v2) -> float:
    v1 = np.asarray(v1, dtype=complex).ravel()
    v2 = np.asarray(v2, dtype=complex).ravel()
    return float(
        max(
            abs(np.vdot(v1, v1) - 1),
            abs(np.vdot(v2, v2) - 1),
            abs(np.vdot(v1, v2)),
        )
    )


# ---------------------------------------------------------------------------
# Petz recovery


@dataclass(frozen=True)
class PetzRecovery:
    kraus: tuple[np.ndarray, ...]
    support_projector: np.ndarray

    @property
    def stack(self) -> np.ndarray:
        return np.stack(self.kraus)

    def tp_residual(self) -> float:
        """``max |sum R_i^dagger R_i - Pi_supp|``."""
        r = self.stack
        s = np.einsum("kba,kbc->ac", r.conj(), r)
        return float(np.max(np.abs(s - self.support_projector)))

    def range_residual(self, code: Code) -> float:
        """``max_i max |P R_i - R_i|``."""
        p = code.projector
        return float(max(np.max(np.abs(p @ r - r)) for r in self.kraus))


def petz_recovery(c: QuantumChannel, code: Code, rel_tol: float = DEFAULT_REL_TOL) -> PetzRecovery:
    """Kraus operators ``R_i = P E_i^dagger E(P)^(-1/2)``."""
    if c.dim != code.dim:
        raise InvalidArgument(f"channel dimension {c.dim} does not match code dimension {code.dim}")
    p = code.projector
    ep = apply(c, p)
    ep = 0.5 * (ep + dagger(ep))
    if np.max(np.abs(ep)) < 1e-14:
        raise DegenerateChannelError("E(P) vanishes; the recovery is undefined")
    s = pinv_sqrt(ep, rel_tol)
    ops = tuple(p @ dagger(e) @ s for e in c.kraus)
    return PetzRecovery(ops, support_projector(ep, rel_tol))


# ---------------------------------------------------------------------------
# Bloch-sphere description of the recovered channel


@dataclass(frozen=True)
class BlochProcess:
    """Pauli transfer matrix ``M`` of recovery after noise, restricted to the code."""

    M: np.ndarray

    @property
    def T(self) -> np.ndarray:
        return self.M[1:, 1:]

    @property
    def T_sym(self) -> np.ndarray:
        return 0.5 * (self.T + self.T.T)

    @cached_property
    def _eig(self):
        return np.linalg.eigh(self.T_sym)

    @property
    def t_min(self) -> float:
        return float(self._eig[0][0])

    @property
    def worst_bloch(self) -> np.ndarray:
        return self._eig[1][:, 0].copy()

    @property
    def eta(self) -> float:
        return 0.5 * (1.0 - self.t_min)


def bloch_to_state(s) -> np.ndarray:
    """Pure qubit state with Bloch vector ``s`` (normalised internally)."""
    s = np.asarray(s, dtype=float)
    s = s / np.linalg.norm(s)
    theta = np.arccos(np.clip(s[2], -1.0, 1.0))
    phi = np.arctan2(s[1], s[0])
    return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])


def _transfer_matrix(images: list[np.ndarray], paulis: list[np.ndarray]) -> np.ndarray:
    m = np.array([[0.5 * np.trace(sa @ img) for img in images] for sa in paulis])
    imag = np.max(np.abs(m.imag))
    if imag > IMAG_FAIL:
        raise ConsistencyError(f"transfer matrix has imaginary residue {imag:.3e}")
    return m.real


def _check_unital_tp(m: np.ndarray) -> None:
    e0 = np.array([1.0, 0.0, 0.0, 0.0])
    dev = max(np.max(np.abs(m[0] - e0)), np.max(np.abs(m[:, 0] - e0)))
    if dev > UNITAL_FAIL:
        raise ConsistencyError(f"recovered channel is not unital and trace preserving (deviation {dev:.3e})")


def effective_process(
    c: QuantumChannel, code: Code, recovery: PetzRecovery | None = None
) -> BlochProcess:
    """Transfer matrix ``M_ab = Tr(sigma_a (R o E)(sigma_b)) / 2`` with the Petz ``R``.

    Raises:
        ConsistencyError: if ``M`` is not unital and trace preserving to 1e-6.
    """
    rec = recovery if recovery is not None else petz_recovery(c, code)
    paulis = code.logical_paulis()
    r = rec.stack
    images = []
    for sb in paulis:
        out = apply(c, sb)
        images.append(np.einsum("kab,bc,kdc->ad", r, out, r.conj()))
    m = _transfer_matrix(images, paulis)
    _check_unital_tp(m)
    return BlochProcess(m)


def fidelity_loss(c: QuantumChannel, code: Code) -> tuple[float, np.ndarray]:
    """Worst-case fidelity loss under Petz recovery and the worst logical state."""
    bp = effective_process(c, code)
    return bp.eta, bloch_to_state(bp.worst_bloch)


# ---------------------------------------------------------------------------
# Fast evaluation for the search objective


class LossEvaluator:
    """Fidelity loss for many codes under one fixed channel.

    The logical Kraus operators of ``R o E`` are ``A_i^dagger S A_j`` with
    ``A_i = E_i V`` and ``S = E(P)^(-1/2)``; this never forms the d x d Petz
    operators. Agrees with :func:`fidelity_loss` to round-off.
    """

    _PAULI = np.array(
        [[[1, 0], [0, 1]], [[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]],
        dtype=complex,
    )

    def __init__(self, channel: QuantumChannel, rel_tol: float = DEFAULT_REL_TOL):
        self.channel = channel
        self.kraus = channel.stack
        self.rel_tol = rel_tol

    def transfer_matrix(self, basis: np.ndarray) -> np.ndarray:
        k = self.kraus
        n = k.shape[0]
        a = k @ basis  # (N, d, 2)
        b = np.transpose(a, (1, 0, 2)).reshape(basis.shape[0], 2 * n)
        ep = b @ b.conj().T
        w, v = np.linalg.eigh(ep)
        top = w[-1]
        if top <= 1e-14:
            raise DegenerateChannelError("E(P) vanishes; the recovery is undefined")
        keep = w > self.rel_tol * top
        c = v[:, keep].conj().T @ b  # (r, 2N)
        c = c / np.sqrt(np.sqrt(w[keep]))[:, None]
        g = (c.conj().T @ c).reshape(n, 2, n, 2)
        lio = np.einsum("iqjr,ipjs->qrps", g, g.conj())
        s = self._PAULI
        m = 0.5 * np.einsum("apq,qrps,brs->ab", s, lio, s)
        return m.real

    def process(self, basis: np.ndarray) -> BlochProcess:
        return BlochProcess(self.transfer_matrix(basis))

    def __call__(self, basis: np.ndarray) -> float:
        m = self.transfer_matrix(basis)
        t = m[1:, 1:]
        return 0.5 * (1.0 - np.linalg.eigvalsh(0.5 * (t + t.T))[0])


# ---------------------------------------------------------------------------
# Brute-force oracle


def fibonacci_sphere(n: int) -> np.ndarray:
    """``n`` nearly uniform unit vectors, shape ``(n, 3)``."""
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    ang = np.pi * (3.0 - np.sqrt(5.0)) * i
    return np.column_stack([r * np.cos(ang), r * np.sin(ang), z])


def _states(theta, phi) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    return np.stack([np.cos(theta / 2) + 0j, np.exp(1j * phi) * np.sin(theta / 2)], axis=-1)


def grid_oracle(
    c: QuantumChannel,
    code: Code,
    recovery: PetzRecovery | None = None,
    grid_points: int = 10_000,
    refine: bool = True,
) -> float:
    """``1 - min_psi F^2`` by direct evaluation over a Bloch-sphere grid.

    ``F^2(psi) = <psi| (R o E)(|psi><psi|) |psi>`` is evaluated from the
    composed Kraus operators; ``recovery=None`` means no recovery at all.
    The best grid point is polished with a Nelder-Mead run on ``(theta, phi)``.
    """
    if grid_points < 100:
        raise InvalidArgument("grid_points must be >= 100")
    if c.dim != code.dim:
        raise InvalidArgument(f"channel dimension {c.dim} does not match code dimension {code.dim}")
    v = code.basis
    ek = c.stack @ v  # (N, d, 2)
    if recovery is None:
        comp = np.einsum("da,jdb->jab", v.conj(), ek)
    else:
        rv = np.einsum("da,ide->iae", v.conj(), recovery.stack)  # V^dagger R_i, (M, 2, d)
        comp = np.einsum("iae,jeb->ijab", rv, ek).reshape(-1, 2, 2)

    # sum_k |<psi|C_k|psi>|^2 = u^T G u*, u = psi* (x) psi, G = sum_k vec(C_k) vec(C_k)^dagger
    flat = comp.reshape(-1, 4)
    gram = flat.T @ flat.conj()

    def f2(psi: np.ndarray) -> np.ndarray:
        u = (psi.conj()[..., :, None] * psi[..., None, :]).reshape(*psi.shape[:-1], 4)
        return np.real(np.einsum("...i,ij,...j->...", u, gram, u.conj()))

    pts = fibonacci_sphere(grid_points)
    theta = np.arccos(np.clip(pts[:, 2], -1, 1))
    phi = np.arctan2(pts[:, 1], pts[:, 0])
    vals = f2(_states(theta, phi))
    best = int(np.argmin(vals))
    f_min = float(vals[best])
    if refine:
        res = minimize(
            lambda x: float(f2(_states(x[0], x[1]))),
            x0=[theta[best], phi[best]],
            method="Nelder-Mead",
            options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 2000},
        )
        f_min = min(f_min, float(res.fun))
    return 1.0 - f_min


# ---------------------------------------------------------------------------
# Named codes


def _basis_state(bits: str) -> np.ndarray:
    v = np.zeros(2 ** len(bits), dtype=complex)
    v[int(bits, 2)] = 1.0
    return v


def _five_qubit_code() -> tuple[np.ndarray, np.ndarray]:
    from .numerics import PauliString

    gens = [PauliString(s) for s in ("XZZXI", "IXZZX", "XIXZZ", "ZXIXZ")]
    zero = _basis_state("00000")
    proj = np.eye(32, dtype=complex)
    for g in gens:
        proj = proj @ (0.5 * (np.eye(32) + g.matrix))
    v0 = proj @ zero
    v0 /= np.linalg.norm(v0)
    v1 = PauliString("XXXXX").apply(v0)
    return v0, v1


def known_code(name: str) -> Code:
    """One of ``approx3``, ``approx4``, ``five_qubit_513`` or ``trivial1``."""
    r2 = 1 / np.sqrt(2)
    if name == "approx3":
        return Code(
            r2 * (_basis_state("000") + _basis_state("111")),
            r2 * (_basis_state("100") + _basis_state("011")),
        )
    if name == "approx4":
        return Code(
            r2 * (_basis_state("0000") + _basis_state("1111")),
            r2 * (_basis_state("1100") + _basis_state("0011")),
        )
    if name == "five_qubit_513":
        return Code(*_five_qubit_code())
    if name == "trivial1":
        return Code(_basis_state("0"), _basis_state("1"))
    raise InvalidArgument(f"unknown code {name!r}")


# Numerically optimised amplitude-damping codes, rounded to 3 decimals.
_TABLE1 = {
    "u3": (
        "-0.426+0.235j 0.040-0.415j 0.014+0.084j -0.312+0.323j "
        "0.021+0.278j 0.089+0.167j -0.303+0.038j -0.403+0.108j",
        "0.275+0.103j 0.248+0.191j 0.116-0.116j 0.008-0.194j "
        "0.429+0.266j -0.066-0.269j -0.086+0.305j -0.488-0.285j",
    ),
    "s3": (
        "-0.013+0.076j -0.587+0.370j 0 0 0 0 0.026+0.052j 0.385+0.601j",
        "0 0 -0.152+0.056j -0.330-0.177j 0.491+0.763j -0.044-0.095j 0 0",
    ),
    "u4": (
        "0.448+0.236j -0.066+0.134j -0.052+0.003j -0.044-0.027j "
        "-0.037+0.058j 0.313+0.048j -0.338-0.057j 0.001-0.060j "
        "0.006-0.114j -0.310-0.088j -0.356-0.073j 0.020-0.004j "
        "0.059-0.004j 0.041-0.002j -0.038+0.040j 0.412+0.250j",
        "0.379-0.350j -0.012+0.001j -0.040+0.042j 0.027-0.038j "
        "0.038-0.024j -0.170+0.292j 0.191-0.321j 0.027-0.053j "
        "0.031-0.041j 0.200-0.276j 0.210-0.290j 0.027+0.077j "
        "-0.014+0.033j 0.098+0.013j 0.022+0.026j 0.356-0.276j",
    ),
    "s4": (
        "0.580-0.352j 0.026-0.210j 0.027+0.040j -0.001+0.042j "
        "0 0 0 0 0 0 0 0 "
        "-0.014+0.030j -0.056+0.025j 0.134-0.166j 0.048+0.662j",
        "0 0 0 0 "
        "0.186+0.028j -0.353+0.178j -0.434-0.017j -0.099+0.059j "
        "-0.191+0.123j 0.071-0.511j -0.346+0.379j 0.051+0.157j "
        "0 0 0 0",
    ),
}

TABLE1_NAMES = tuple(_TABLE1)


def table1_raw(which: str) -> tuple[np.ndarray, np.ndarray]:
    """Codewords exactly as transcribed (not orthonormal)."""
    try:
        a, b = _TABLE1[which]
    except KeyError:
        raise InvalidArgument(f"unknown table code {which!r}; expected one of {TABLE1_NAMES}") from None
    return (
        np.array([complex(t) for t in a.split()]),
        np.array([complex(t) for t in b.split()]),
    )


def table1_code(which: str) -> Code:
    """Published optimal code, re-orthonormalised by Gram-Schmidt."""
    return Code.orthonormalized(*table1_raw(which))


def named_code(name: str) -> Code:
    if name in _TABLE1:
        return table1_code(name)
    return known_code(name)


CODE_NAMES = ("approx3", "approx4", "five_qubit_513", "trivial1") + TABLE1_NAMES
