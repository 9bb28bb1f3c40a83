"""Dense complex linear algebra used throughout the package.

Matrices are plain ``numpy`` complex arrays. Qubit 1 is the most significant
bit of a computational-basis index, so the Pauli string ``XXZ`` acts with X on
qubits 1 and 2 and Z on qubit 3.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import InvalidArgument

MAX_DIM = 32
DEFAULT_REL_TOL = 1e-10

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# (bit flip, phase on |0>, phase on |1>) for each single-qubit Pauli
_ACTION = {
    "I": (0, 1.0, 1.0),
    "X": (1, 1.0, 1.0),
    "Y": (1, 1j, -1j),
    "Z": (0, 1.0, -1.0),
}


def as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise InvalidArgument(f"expected a 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidArgument("matrix has non-finite entries")
    return a


def dagger(m: np.ndarray) -> np.ndarray:
    return m.conj().T


def is_unitary(u: np.ndarray, atol: float = 1e-10) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return bool(np.max(np.abs(dagger(u) @ u - np.eye(u.shape[0]))) <= atol)


def hermitian_eig(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decompose a Hermitian matrix.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues ascending and the
    eigenvectors as orthonormal columns.

    Raises:
        InvalidArgument: if ``m`` is not square or not Hermitian to
            ``1e-10`` relative to its largest entry.
    """
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise InvalidArgument(f"matrix must be square, got {a.shape}")
    scale = np.max(np.abs(a)) if a.size else 0.0
    if np.max(np.abs(a - dagger(a)), initial=0.0) > 1e-10 * max(scale, 1e-300):
        raise InvalidArgument("matrix is not Hermitian")
    w, v = np.linalg.eigh(0.5 * (a + dagger(a)))
    return w, v


def _spectral_cut(w: np.ndarray, rel_tol: float) -> np.ndarray:
    top = w[-1] if w.size else 0.0
    if top <= 0.0:
        return np.zeros(w.shape, dtype=bool)
    return w > rel_tol * top


def pinv_sqrt(m, rel_tol: float = DEFAULT_REL_TOL) -> np.ndarray:
    """Inverse square root of a PSD matrix, taken on its support.

    Eigenvalues at or below ``rel_tol`` times the largest one are treated as
    zero. A zero matrix maps to the zero matrix.
    """
    w, v = hermitian_eig(m)
    keep = _spectral_cut(w, rel_tol)
    if w.size and w[0] < -1e-10 * max(abs(w[-1]), 1e-300):
        raise InvalidArgument(f"matrix is not positive semidefinite (min eigenvalue {w[0]:.3e})")
    vk = v[:, keep]
    return (vk / np.sqrt(w[keep])) @ dagger(vk)


def support_projector(m, rel_tol: float = DEFAULT_REL_TOL) -> np.ndarray:
    """Projector onto the eigenvectors of ``m`` kept by :func:`pinv_sqrt`."""
    w, v = hermitian_eig(m)
    vk = v[:, _spectral_cut(w, rel_tol)]
    return vk @ dagger(vk)


def expm_hermitian(h, t: float = 1.0) -> np.ndarray:
    """``exp(-i t h)`` for Hermitian ``h`` via its eigendecomposition."""
    w, v = hermitian_eig(h)
    return (v * np.exp(-1j * t * w)) @ dagger(v)


def kron(a, b) -> np.ndarray:
    return np.kron(as_matrix(a), as_matrix(b))


def kron_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


@dataclass(frozen=True)
class PauliString:
    """A tensor product of single-qubit Paulis, e.g. ``PauliString("XXZ")``."""

    labels: str

    def __post_init__(self):
        if not self.labels or any(c not in PAULI for c in self.labels):
            raise InvalidArgument(f"invalid Pauli labels {self.labels!r}")

    def __str__(self) -> str:
        return self.labels

    @property
    def n(self) -> int:
        return len(self.labels)

    @cached_property
    def matrix(self) -> np.ndarray:
        m = kron_all([PAULI[c] for c in self.labels])
        m.setflags(write=False)
        return m

    @cached_property
    def action(self) -> tuple[np.ndarray, np.ndarray]:
        """``(perm, phase)`` with ``(P @ m)[y] == phase[y] * m[perm[y]]``."""
        dim = 2**self.n
        idx = np.arange(dim)
        mask = 0
        phase_of_source = np.ones(dim, dtype=complex)
        for q, c in enumerate(self.labels):
            flip, p0, p1 = _ACTION[c]
            shift = self.n - 1 - q
            mask |= flip << shift
            bit = (idx >> shift) & 1
            phase_of_source *= np.where(bit == 1, p1, p0)
        perm = idx ^ mask
        return perm, phase_of_source[perm]

    def apply(self, m: np.ndarray) -> np.ndarray:
        """``P @ m`` without forming P."""
        perm, phase = self.action
        m = np.asarray(m)
        if m.ndim == 1:
            return phase * m[perm]
        return phase[:, None] * m[perm]

    def commutes_with(self, other: "PauliString") -> bool:
        anti = sum(a != "I" and b != "I" and a != b for a, b in zip(self.labels, other.labels))
        return anti % 2 == 0


def pauli_string_exp(p: PauliString | str, angle: float) -> np.ndarray:
    """``exp(-i angle P) = cos(angle) I - i sin(angle) P``."""
    if isinstance(p, str):
        p = PauliString(p)
    dim = 2**p.n
    return np.cos(angle) * np.eye(dim, dtype=complex) - 1j * np.sin(angle) * p.matrix


def apply_pauli_exp(p: PauliString, angle: float, m: np.ndarray) -> np.ndarray:
    """``pauli_string_exp(p, angle) @ m`` using the permutation form of P."""
    return np.cos(angle) * m - 1j * np.sin(angle) * p.apply(m)


def haar_random_unitary(d: int, seed=None) -> np.ndarray:
    """Haar-distributed ``d x d`` unitary (Ginibre sample, QR, phase fix).

    ``seed`` may be an int, a ``SeedSequence`` or a ``Generator``.
    """
    if d < 1:
        raise InvalidArgument(f"dimension must be >= 1, got {d}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r)
    return q * (diag / np.abs(diag))
