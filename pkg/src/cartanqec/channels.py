"""Quantum channels in Kraus form and the single-qubit noise families."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import CapacityError, InvalidArgument
from .numerics import MAX_DIM, as_matrix, dagger, haar_random_unitary, hermitian_eig

CPTP_TOL = 1e-9
ZERO_KRAUS_NORM = 1e-14


@dataclass(frozen=True)
class QuantumChannel:
    """A CPTP map ``rho -> sum_i E_i rho E_i^dagger``."""

    kraus: tuple[np.ndarray, ...]
    dim: int = field(init=False)

    def __post_init__(self):
        ops = tuple(as_matrix(k) for k in self.kraus)
        if not ops:
            raise InvalidArgument("a channel needs at least one Kraus operator")
        d = ops[0].shape[0]
        for k in ops:
            if k.shape != (d, d):
                raise InvalidArgument(f"Kraus operators must all be {d}x{d}, got {k.shape}")
        for k in ops:
            k.setflags(write=False)
        object.__setattr__(self, "kraus", ops)
        object.__setattr__(self, "dim", d)

    def __len__(self) -> int:
        return len(self.kraus)

    @property
    def stack(self) -> np.ndarray:
        """Kraus operators as one ``(N, d, d)`` array."""
        return np.stack(self.kraus)

    def __call__(self, rho) -> np.ndarray:
        return apply(self, rho)


def _pruned(ops: Sequence[np.ndarray]) -> QuantumChannel:
    kept = [k for k in ops if np.linalg.norm(k) >= ZERO_KRAUS_NORM]
    if not kept:
        kept = [np.zeros_like(ops[0])]
    return QuantumChannel(tuple(kept))


def _check_prob(name: str, value: float) -> float:
    if not (0.0 <= value <= 1.0):
        raise InvalidArgument(f"{name} must lie in [0, 1], got {value}")
    return float(value)


def identity_channel(dim: int = 2) -> QuantumChannel:
    return QuantumChannel((np.eye(dim, dtype=complex),))


def amplitude_damping(gamma: float) -> QuantumChannel:
    """Decay towards |0> with probability ``gamma``."""
    g = _check_prob("gamma", gamma)
    e0 = np.array([[1, 0], [0, np.sqrt(1 - g)]], dtype=complex)
    e1 = np.array([[0, np.sqrt(g)], [0, 0]], dtype=complex)
    return _pruned([e0, e1])


def damping_frame(theta: float, phi: float) -> np.ndarray:
    """Unitary ``|v><0| + |v_perp><1|`` for the Bloch direction ``(theta, phi)``."""
    v = np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])
    v_perp = np.array([-np.exp(-1j * phi) * np.sin(theta / 2), np.cos(theta / 2)])
    return np.column_stack([v, v_perp])


def rotated_amplitude_damping(gamma: float, theta: float, phi: float) -> QuantumChannel:
    """Amplitude damping towards the Bloch direction ``(theta, phi)``.

    Kraus operators are ``|v><v| + sqrt(1-gamma)|v_perp><v_perp|`` and
    ``sqrt(gamma)|v><v_perp|``.
    """
    g = _check_prob("gamma", gamma)
    u = damping_frame(theta, phi)
    v, vp = u[:, :1], u[:, 1:]
    e0 = v @ dagger(v) + np.sqrt(1 - g) * (vp @ dagger(vp))
    e1 = np.sqrt(g) * (v @ dagger(vp))
    return _pruned([e0, e1])


def random_qubit_channel(seed) -> QuantumChannel:
    """Qubit channel from a Haar-random unitary on qubit + ancilla in |0>.

    ``E_k = (I x <k|) U (I x |0>)``; the ancilla is the second tensor factor.
    """
    u = haar_random_unitary(4, seed).reshape(2, 2, 2, 2)  # (sys_out, anc_out, sys_in, anc_in)
    ops = [np.ascontiguousarray(u[:, k, :, 0]) for k in range(2)]
    return _pruned(ops)


def admix_identity(phi: QuantumChannel, alpha: float) -> QuantumChannel:
    """``(1 - alpha) rho + alpha phi(rho)``."""
    a = _check_prob("alpha", alpha)
    ops = [np.sqrt(1 - a) * np.eye(phi.dim, dtype=complex)]
    ops += [np.sqrt(a) * k for k in phi.kraus]
    return _pruned(ops)


def tensor(a: QuantumChannel, b: QuantumChannel) -> QuantumChannel:
    """Tensor product ``a (x) b``; Kraus list in lexicographic order."""
    if a.dim * b.dim > MAX_DIM:
        raise CapacityError(f"dimension {a.dim * b.dim} exceeds {MAX_DIM}")
    return _pruned([np.kron(x, y) for x, y in itertools.product(a.kraus, b.kraus)])


def tensor_power(c: QuantumChannel, n: int) -> QuantumChannel:
    """``c`` applied independently to each of ``n`` subsystems."""
    if n < 1:
        raise InvalidArgument(f"n must be >= 1, got {n}")
    if c.dim**n > MAX_DIM:
        raise CapacityError(f"dimension {c.dim}**{n} exceeds {MAX_DIM}")
    ops = []
    for combo in itertools.product(c.kraus, repeat=n):
        k = combo[0]
        for f in combo[1:]:
            k = np.kron(k, f)
        ops.append(k)
    return _pruned(ops)


def check_density_matrix(rho, dim: int, tol: float = 1e-9) -> np.ndarray:
    r = as_matrix(rho)
    if r.shape != (dim, dim):
        raise InvalidArgument(f"state must be {dim}x{dim}, got {r.shape}")
    if abs(np.trace(r) - 1) > tol:
        raise InvalidArgument(f"state trace is {np.trace(r).real:.12g}, expected 1")
    w, _ = hermitian_eig(r)
    if w[0] < -tol:
        raise InvalidArgument(f"state has negative eigenvalue {w[0]:.3e}")
    return r


def apply(c: QuantumChannel, rho, validate: bool = False) -> np.ndarray:
    """``sum_i E_i rho E_i^dagger``.

    With ``validate=True`` ``rho`` must be a density matrix; otherwise any
    ``dim x dim`` operator is accepted (the map is linear).
    """
    if validate:
        r = check_density_matrix(rho, c.dim)
    else:
        r = as_matrix(rho)
        if r.shape != (c.dim, c.dim):
            raise InvalidArgument(f"operator must be {c.dim}x{c.dim}, got {r.shape}")
    k = c.stack
    return np.einsum("kab,bc,kdc->ad", k, r, k.conj())


@dataclass(frozen=True)
class CPTPReport:
    deviation: float
    completely_positive: str = "structural (Kraus form)"
    tol: float = CPTP_TOL

    @property
    def passed(self) -> bool:
        return self.deviation <= self.tol


def validate_cptp(c: QuantumChannel) -> CPTPReport:
    k = c.stack
    s = np.einsum("kba,kbc->ac", k.conj(), k)
    return CPTPReport(float(np.max(np.abs(s - np.eye(c.dim)))))


FAMILIES = ("amplitude_damping", "rotated_ad", "random_admixed", "identity")


@dataclass(frozen=True)
class NoiseSpec:
    """Single-qubit noise family plus its parameters.

    Parameters a family does not use are ignored.
    """

    family: str = "amplitude_damping"
    gamma: float = 0.0
    theta: float = 0.0
    phi: float = 0.0
    alpha: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidArgument(f"unknown noise family {self.family!r}; expected one of {FAMILIES}")
        _check_prob("gamma", self.gamma)
        _check_prob("alpha", self.alpha)
        if not (0.0 <= self.theta <= np.pi):
            raise InvalidArgument(f"theta must lie in [0, pi], got {self.theta}")
        if not (0.0 <= self.phi <= 2 * np.pi):
            raise InvalidArgument(f"phi must lie in [0, 2 pi], got {self.phi}")

    def channel(self) -> QuantumChannel:
        """The single-qubit channel."""
        if self.family == "amplitude_damping":
            return amplitude_damping(self.gamma)
        if self.family == "rotated_ad":
            return rotated_amplitude_damping(self.gamma, self.theta, self.phi)
        if self.family == "random_admixed":
            return admix_identity(random_qubit_channel(self.seed), self.alpha)
        return identity_channel(2)

    def channel_on(self, n: int) -> QuantumChannel:
        return tensor_power(self.channel(), n)

    def local_frame(self) -> np.ndarray:
        """Channel-adapted local unitary (``|v><0| + |v_perp><1|`` for rotated AD)."""
        if self.family == "rotated_ad":
            return damping_frame(self.theta, self.phi)
        return np.eye(2, dtype=complex)

    def strength(self) -> float:
        return self.alpha if self.family == "random_admixed" else self.gamma

    def with_strength(self, value: float) -> "NoiseSpec":
        if self.family == "random_admixed":
            return replace(self, alpha=value)
        return replace(self, gamma=value)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "gamma": self.gamma,
            "theta": self.theta,
            "phi": self.phi,
            "alpha": self.alpha,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseSpec":
        unknown = set(d) - {"family", "gamma", "theta", "phi", "alpha", "seed"}
        if unknown:
            raise InvalidArgument(f"unknown noise keys: {sorted(unknown)}")
        kw = {k: d[k] for k in d}
        for k in ("gamma", "theta", "phi", "alpha"):
            if k in kw:
                kw[k] = float(kw[k])
        if "seed" in kw:
            kw["seed"] = int(kw["seed"])
        return cls(**kw)
