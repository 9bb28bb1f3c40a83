"""Derivative-free search for channel-adapted codes.

The objective maps a flat Cartan parameter vector to the Petz worst-case
fidelity loss of the code spanned by two columns of the encoding unitary.
It is minimised with a multi-start Nelder-Mead simplex.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .cartan import FIXED_LOCAL, FULL, NONLOCAL, CartanParams, Encoder, param_count
from .channels import NoiseSpec, QuantumChannel
from .errors import ConsistencyError, InvalidArgument
from .numerics import DEFAULT_REL_TOL, as_matrix, is_unitary
from .qec import Code, fidelity_loss, grid_oracle, known_code, named_code

log = logging.getLogger(__name__)

MODES = {
    "unstructured": FULL,
    "structured_trivial": NONLOCAL,
    "structured_fixed_local": FIXED_LOCAL,
}


class NonFiniteObjective(ArithmeticError):
    pass


class SearchFailed(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Nelder-Mead


@dataclass
class SimplexResult:
    x: np.ndarray
    fun: float
    iterations: int
    evaluations: int
    history: list[float]
    reason: str


def nelder_mead(
    f: Callable[[np.ndarray], float],
    x0,
    *,
    step: float | np.ndarray = 1.0,
    max_iters: int | None = None,
    f_tol: float = 1e-10,
    x_tol: float = 1e-8,
    reflect: float = 1.0,
    expand: float = 2.0,
    contract: float = 0.5,
    shrink: float = 0.5,
) -> SimplexResult:
    """Minimise ``f`` with the downhill simplex method.

    The initial simplex is ``x0`` plus ``x0 + step * e_i``. Stops when the
    spread of simplex values drops below ``f_tol``, when every vertex lies
    within ``x_tol`` (max-norm) of the best one, or after ``max_iters``
    iterations. ``history`` holds the best value after each iteration.

    Raises:
        NonFiniteObjective: if ``f`` returns NaN or inf.
    """
    x0 = np.asarray(x0, dtype=float).ravel()
    k = x0.size
    if max_iters is None:
        max_iters = 200 * max(k, 1)
    evals = 0

    def call(x):
        nonlocal evals
        evals += 1
        v = float(f(x))
        if not math.isfinite(v):
            raise NonFiniteObjective(f"objective returned {v} at evaluation {evals}")
        return v

    sim = np.empty((k + 1, k))
    sim[0] = x0
    sim[1:] = x0 + np.diag(np.broadcast_to(np.asarray(step, dtype=float), (k,)))
    fs = np.array([call(v) for v in sim])
    history: list[float] = []
    it = 0
    reason = "max_iters"
    while it < max_iters:
        order = np.argsort(fs, kind="stable")
        sim = sim[order]
        fs = fs[order]
        if fs[-1] - fs[0] < f_tol:
            reason = "f_tol"
            break
        if np.max(np.abs(sim[1:] - sim[0])) < x_tol:
            reason = "x_tol"
            break
        it += 1
        centroid = sim[:-1].mean(axis=0)
        worst = sim[-1]
        xr = centroid + reflect * (centroid - worst)
        fr = call(xr)
        if fr < fs[0]:
            xe = centroid + expand * (xr - centroid)
            fe = call(xe)
            if fe < fr:
                sim[-1], fs[-1] = xe, fe
            else:
                sim[-1], fs[-1] = xr, fr
        elif fr < fs[-2]:
            sim[-1], fs[-1] = xr, fr
        else:
            if fr < fs[-1]:
                xc = centroid + contract * (xr - centroid)
                fc = call(xc)
                accepted = fc <= fr
            else:
                xc = centroid + contract * (worst - centroid)
                fc = call(xc)
                accepted = fc < fs[-1]
            if accepted:
                sim[-1], fs[-1] = xc, fc
            else:
                sim[1:] = sim[0] + shrink * (sim[1:] - sim[0])
                fs[1:] = [call(v) for v in sim[1:]]
        history.append(float(np.min(fs)))
    best = int(np.argmin(fs))
    return SimplexResult(sim[best].copy(), float(fs[best]), it, evals, history, reason)


# ---------------------------------------------------------------------------
# Objective


class Objective:
    """Fidelity loss as a function of the flat Cartan parameters."""

    def __init__(
        self,
        channel: QuantumChannel,
        n: int,
        mode: str = FULL,
        fixed_local=None,
        rel_tol: float = DEFAULT_REL_TOL,
    ):
        if channel.dim != 2**n:
            raise InvalidArgument(f"channel acts on dimension {channel.dim}, expected {2**n}")
        self.channel = channel
        self.encoder = Encoder(n, mode, fixed_local)
        self.program = _kernels.Program(n, mode)
        self.size = self.program.size
        self.n = n
        self._fixed = (
            np.asarray(fixed_local, dtype=complex) if mode == FIXED_LOCAL else np.eye(2, dtype=complex)
        )
        self._kraus = np.ascontiguousarray(channel.stack)
        self._x0 = self.encoder._x0
        self._rel_tol = rel_tol
        p = self.program
        self._args = (p.kinds, p.qubits, p.offsets, p.perms, p.phases, self._fixed, n, self._x0)

    def basis(self, x) -> np.ndarray:
        return _kernels.encode(np.asarray(x, dtype=float), *self._args)

    def __call__(self, x) -> float:
        return _kernels.objective(np.asarray(x, dtype=float), *self._args, self._kraus, self._rel_tol)


# ---------------------------------------------------------------------------
# Search


@dataclass
class SearchConfig:
    n_qubits: int = 3
    mode: str = "structured_trivial"
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    fixed_local: np.ndarray | None = None
    restarts: int = 20
    max_iters: int | None = None
    x_tol: float = 1e-8
    f_tol: float = 1e-10
    init_scale: float = math.pi
    simplex_step: float = 0.5
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidArgument(f"unknown search mode {self.mode!r}; expected one of {tuple(MODES)}")
        if self.n_qubits not in (2, 3, 4):
            raise InvalidArgument(f"n_qubits must be 2, 3 or 4, got {self.n_qubits}")
        if self.restarts < 1:
            raise InvalidArgument("restarts must be >= 1")
        if self.x_tol <= 0 or self.f_tol <= 0:
            raise InvalidArgument("tolerances must be positive")
        if self.init_scale <= 0 or self.simplex_step <= 0:
            raise InvalidArgument("init_scale and simplex_step must be positive")
        if self.fixed_local is not None:
            u = as_matrix(self.fixed_local)
            if u.shape != (2, 2) or not is_unitary(u, 1e-10):
                raise InvalidArgument("fixed_local must be a 2x2 unitary")
            self.fixed_local = u

    @property
    def cartan_mode(self) -> str:
        return MODES[self.mode]

    @property
    def local_unitary(self) -> np.ndarray | None:
        if self.cartan_mode != FIXED_LOCAL:
            return None
        return self.fixed_local if self.fixed_local is not None else self.noise.local_frame()

    @property
    def n_params(self) -> int:
        return param_count(self.n_qubits, self.cartan_mode)

    @property
    def iteration_cap(self) -> int:
        return self.max_iters if self.max_iters is not None else 5000 * self.n_params


@dataclass
class RestartOutcome:
    index: int
    x: np.ndarray | None
    eta: float
    iterations: int
    evaluations: int
    reason: str
    history: list[float] = field(default_factory=list)


@dataclass
class SearchResult:
    eta: float
    x: np.ndarray
    n_qubits: int
    mode: str
    code: Code
    worst_state: np.ndarray
    iterations: int
    evaluations: int
    restarts_used: int
    best_restart: int
    eta_history: list[float]
    failures: list[str]
    wall_time: float

    @property
    def params(self) -> CartanParams:
        return CartanParams.unflatten(self.x, self.n_qubits, MODES[self.mode])

    def to_dict(self) -> dict:
        """JSON-ready summary. Timing is left out so reruns are byte identical."""
        return {
            "eta": self.eta,
            "n_qubits": self.n_qubits,
            "mode": self.mode,
            "params": {"n": self.n_qubits, "mode": MODES[self.mode], "values": [float(t) for t in self.x]},
            "code": self.code.to_dict(),
            "worst_state": [[float(z.real), float(z.imag)] for z in self.worst_state],
            "diagnostics": {
                "iterations": self.iterations,
                "evaluations": self.evaluations,
                "restarts_used": self.restarts_used,
                "best_restart": self.best_restart,
                "eta_history": self.eta_history,
                "failures": self.failures,
            },
        }


def _objective_for(cfg: SearchConfig, channel: QuantumChannel | None = None) -> Objective:
    ch = channel if channel is not None else cfg.noise.channel_on(cfg.n_qubits)
    return Objective(ch, cfg.n_qubits, cfg.cartan_mode, cfg.local_unitary)


def _start_points(cfg: SearchConfig) -> list[np.ndarray]:
    seqs = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    return [
        np.random.default_rng(s).uniform(-cfg.init_scale, cfg.init_scale, cfg.n_params) for s in seqs
    ]


def _run_restart(obj: Objective, cfg: SearchConfig, index: int, x0: np.ndarray) -> RestartOutcome:
    try:
        r = nelder_mead(
            obj,
            x0,
            step=cfg.simplex_step,
            max_iters=cfg.iteration_cap,
            f_tol=cfg.f_tol,
            x_tol=cfg.x_tol,
        )
    except NonFiniteObjective as exc:
        log.warning("restart %d aborted: %s", index, exc)
        return RestartOutcome(index, None, math.inf, 0, 0, f"non-finite objective: {exc}")
    return RestartOutcome(index, r.x, r.fun, r.iterations, r.evaluations, r.reason, r.history)


_WORKER: dict = {}


def _worker_init(cfg: SearchConfig) -> None:
    _WORKER["obj"] = _objective_for(cfg)
    _WORKER["cfg"] = cfg


def _worker_run(args) -> RestartOutcome:
    index, x0 = args
    return _run_restart(_WORKER["obj"], _WORKER["cfg"], index, x0)


def search_code(cfg: SearchConfig, channel: QuantumChannel | None = None) -> SearchResult:
    """Multi-start Nelder-Mead over the Cartan parameters of ``cfg``.

    Restart ``i`` starts from a point drawn uniformly from
    ``[-init_scale, init_scale]^k`` with a generator spawned from ``cfg.seed``.
    The all-zero parameter vector is evaluated as well and competes with the
    restarts. Ties (within 1e-12) go to the lowest restart index.
    """
    t0 = time.perf_counter()
    channel = channel if channel is not None else cfg.noise.channel_on(cfg.n_qubits)
    obj = _objective_for(cfg, channel)
    starts = _start_points(cfg)
    if cfg.jobs > 1 and cfg.restarts > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs, initializer=_worker_init, initargs=(cfg,)) as ex:
            outcomes = list(ex.map(_worker_run, list(enumerate(starts))))
    else:
        outcomes = [_run_restart(obj, cfg, i, x0) for i, x0 in enumerate(starts)]

    failures = [f"restart {o.index}: {o.reason}" for o in outcomes if o.x is None]
    ok = [o for o in outcomes if o.x is not None]
    if not ok:
        raise SearchFailed("every restart failed: " + "; ".join(failures))

    zero = np.zeros(cfg.n_params)
    best_x, best_f, best_idx = zero, float(obj(zero)), -1
    for o in ok:
        if o.eta < best_f - 1e-12:
            best_x, best_f, best_idx = o.x, o.eta, o.index

    code = obj.encoder.code(best_x)
    eta, worst = fidelity_loss(channel, code)
    if abs(eta - best_f) > 1e-9:
        raise ConsistencyError(f"compiled objective {best_f!r} disagrees with reference loss {eta!r}")
    return SearchResult(
        eta=eta,
        x=np.asarray(best_x, dtype=float),
        n_qubits=cfg.n_qubits,
        mode=cfg.mode,
        code=code,
        worst_state=worst,
        iterations=sum(o.iterations for o in ok),
        evaluations=sum(o.evaluations for o in ok),
        restarts_used=len(outcomes),
        best_restart=best_idx,
        eta_history=[o.eta for o in outcomes],
        failures=failures,
        wall_time=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# Sweeps

SWEEP_COLUMNS = {
    "unstructured": "eta_unstructured",
    "structured_trivial": "eta_structured",
    "structured_fixed_local": "eta_fixed_local",
}

BASELINE_QUBITS = {"approx3": 3, "approx4": 4, "five_qubit_513": 5, "u3": 3, "s3": 3, "u4": 4, "s4": 4}


def baseline_eta(noise: NoiseSpec, name: str) -> float:
    code = named_code(name)
    return fidelity_loss(noise.channel_on(code.n_qubits), code)[0]


def unencoded_loss(noise: NoiseSpec, grid_points: int = 10_000) -> float:
    """Worst-case fidelity loss of a bare qubit (no recovery)."""
    return grid_oracle(noise.channel(), known_code("trivial1"), None, grid_points)


def sweep(
    template: SearchConfig,
    grid: Sequence[float],
    modes: Sequence[str] = ("structured_trivial",),
    baselines: Sequence[str] = (),
    unencoded: bool = True,
) -> list[dict]:
    """One row per noise strength: searched, baseline and unencoded losses.

    A failing cell is recorded as NaN with its error in ``row["errors"]``.
    Searched codes are kept in ``row["codes"]`` keyed by mode.
    """
    rows = []
    for value in grid:
        row: dict = {"param": float(value), "errors": [], "codes": {}}
        try:
            noise = template.noise.with_strength(float(value))
            row["noise"] = noise.to_dict()
        except InvalidArgument as exc:
            noise = None
            row["errors"].append(str(exc))
        for mode in modes:
            col = SWEEP_COLUMNS[mode]
            try:
                if noise is None:
                    raise InvalidArgument("invalid noise parameter")
                cfg = replace(template, noise=noise, mode=mode)
                res = search_code(cfg)
                row[col] = res.eta
                row["codes"][mode] = res.code.to_dict()
            except Exception as exc:  # recorded per cell; the sweep continues
                log.warning("sweep %s=%s %s failed: %s", "param", value, mode, exc)
                row[col] = math.nan
                row["errors"].append(f"{mode}: {exc}")
        for name in baselines:
            col = f"eta_baseline_{name}"
            try:
                if noise is None:
                    raise InvalidArgument("invalid noise parameter")
                row[col] = baseline_eta(noise, name)
            except Exception as exc:
                row[col] = math.nan
                row["errors"].append(f"{name}: {exc}")
        if unencoded:
            try:
                if noise is None:
                    raise InvalidArgument("invalid noise parameter")
                row["f2_unencoded"] = 1.0 - unencoded_loss(noise)
            except Exception as exc:
                row["f2_unencoded"] = math.nan
                row["errors"].append(f"unencoded: {exc}")
        rows.append(row)
    return rows
