import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cartanqec import _kernels
from cartanqec.cartan import FIXED_LOCAL, FULL, NONLOCAL, Encoder, param_count
from cartanqec.channels import NoiseSpec, amplitude_damping, tensor_power
from cartanqec.errors import InvalidArgument
from cartanqec.qec import LossEvaluator, fidelity_loss, named_code
from cartanqec.search import (
    NonFiniteObjective,
    Objective,
    SearchConfig,
    baseline_eta,
    nelder_mead,
    search_code,
    sweep,
    unencoded_loss,
)

HAD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def test_nm_quadratic_1d():
    r = nelder_mead(lambda x: (x[0] - 1) ** 2, [5.0], step=1.0, f_tol=1e-16, x_tol=1e-10, max_iters=2000)
    assert abs(r.x[0] - 1) < 1e-6


def test_nm_rosenbrock():
    def rosen(x):
        return 100 * (x[1] - x[0] ** 2) ** 2 + (1 - x[0]) ** 2

    r = nelder_mead(rosen, [-1.2, 1.0], step=0.5, f_tol=1e-20, x_tol=1e-12, max_iters=10_000)
    assert np.allclose(r.x, [1, 1], atol=1e-4)


def test_nm_history_monotone_and_not_worse():
    f = lambda x: float(np.sum(np.sin(x) ** 2 + 0.1 * x**2))  # noqa: E731
    x0 = np.array([2.0, -1.0, 0.5])
    r = nelder_mead(f, x0, step=0.3, max_iters=500)
    assert r.fun <= f(x0)
    assert all(b <= a for a, b in zip(r.history, r.history[1:]))
    assert r.reason in ("f_tol", "x_tol", "max_iters")


def test_nm_stops_at_cap():
    r = nelder_mead(lambda x: float(x @ x), np.ones(4), max_iters=7, f_tol=1e-300, x_tol=1e-300)
    assert r.iterations == 7 and r.reason == "max_iters"


def test_nm_non_finite():
    with pytest.raises(NonFiniteObjective):
        nelder_mead(lambda x: math.nan, [0.0])


@pytest.mark.parametrize(
    "n,mode", [(2, FULL), (3, FULL), (3, NONLOCAL), (3, FIXED_LOCAL), (4, NONLOCAL), (4, FULL), (4, FIXED_LOCAL)]
)
def test_compiled_objective_matches_reference(n, mode, rng):
    ch = NoiseSpec(family="random_admixed", alpha=0.3, seed=5).channel_on(n)
    obj = Objective(ch, n, mode, HAD if mode == FIXED_LOCAL else None)
    enc = Encoder(n, mode, HAD if mode == FIXED_LOCAL else None)
    ev = LossEvaluator(ch)
    for _ in range(3):
        x = rng.uniform(-np.pi, np.pi, param_count(n, mode))
        assert np.max(np.abs(obj.basis(x) - enc.basis(x))) < 1e-12
        ref = fidelity_loss(ch, enc.code(x))[0]
        assert abs(obj(x) - ref) < 1e-11
        assert abs(ev(enc.basis(x)) - ref) < 1e-11


def test_compiled_transfer_matches_reference(rng):
    ch = tensor_power(amplitude_damping(0.2), 3)
    enc = Encoder(3, FULL)
    x = rng.normal(size=enc.size)
    b = enc.basis(x)
    m = _kernels.transfer_matrix(np.ascontiguousarray(b), np.ascontiguousarray(ch.stack), 1e-10)
    assert np.allclose(m, LossEvaluator(ch).transfer_matrix(b), atol=1e-12)


def test_objective_dimension_check():
    with pytest.raises(InvalidArgument):
        Objective(tensor_power(amplitude_damping(0.1), 2), 3)


def test_config_validation():
    with pytest.raises(InvalidArgument):
        SearchConfig(mode="annealing")
    with pytest.raises(InvalidArgument):
        SearchConfig(restarts=0)
    with pytest.raises(InvalidArgument):
        SearchConfig(x_tol=0)
    with pytest.raises(InvalidArgument):
        SearchConfig(n_qubits=5)
    assert SearchConfig(n_qubits=3, mode="unstructured").iteration_cap == 5000 * 82


@pytest.mark.parametrize("mode", ["unstructured", "structured_trivial", "structured_fixed_local"])
def test_zero_noise_search(mode):
    cfg = SearchConfig(n_qubits=3, mode=mode, noise=NoiseSpec(gamma=0.0), restarts=1, max_iters=50)
    assert abs(search_code(cfg).eta) < 1e-10


def test_search_result_contract():
    cfg = SearchConfig(n_qubits=3, noise=NoiseSpec(gamma=0.1), restarts=3, seed=4)
    r = search_code(cfg)
    ch = cfg.noise.channel_on(3)
    # re-derivable from the reported parameters alone
    code = Encoder(3, NONLOCAL).code(r.x)
    assert abs(fidelity_loss(ch, code)[0] - r.eta) < 1e-10
    assert abs(fidelity_loss(ch, r.code)[0] - r.eta) < 1e-10
    assert r.eta <= Objective(ch, 3, NONLOCAL)(np.zeros(22)) + 1e-15
    assert r.eta == pytest.approx(min(r.eta_history), abs=1e-12)
    assert r.restarts_used == 3 and len(r.eta_history) == 3
    d = r.to_dict()
    assert "wall_time" not in d and d["params"]["values"] == list(r.x)


def test_search_is_reproducible():
    cfg = SearchConfig(n_qubits=3, noise=NoiseSpec(gamma=0.1), restarts=2, seed=11, max_iters=400)
    a, b = search_code(cfg), search_code(cfg)
    assert a.to_dict() == b.to_dict()


def test_parallel_matches_serial():
    base = dict(n_qubits=3, noise=NoiseSpec(gamma=0.1), restarts=3, seed=2, max_iters=300)
    a = search_code(SearchConfig(**base))
    b = search_code(SearchConfig(**base, jobs=2))
    assert a.to_dict() == b.to_dict()


def test_search_improves_on_random_start():
    cfg = SearchConfig(n_qubits=3, noise=NoiseSpec(gamma=0.1), restarts=1, seed=3, max_iters=2000)
    obj = Objective(cfg.noise.channel_on(3), 3, NONLOCAL)
    x0 = np.random.default_rng(np.random.SeedSequence(3).spawn(1)[0]).uniform(-np.pi, np.pi, 22)
    r = search_code(cfg)
    assert r.eta < obj(x0)


@given(st.floats(0.01, 0.3))
def test_unencoded_loss_is_gamma(g):
    assert abs(unencoded_loss(NoiseSpec(gamma=g), grid_points=500) - g) < 1e-6


def test_baseline_eta_matches_direct():
    ns = NoiseSpec(gamma=0.1)
    assert baseline_eta(ns, "approx3") == fidelity_loss(ns.channel_on(3), named_code("approx3"))[0]


def test_sweep_rows():
    tpl = SearchConfig(n_qubits=3, noise=NoiseSpec(), restarts=1, max_iters=300)
    rows = sweep(tpl, [0.0, 0.1, 1.5], ["structured_trivial"], ["approx3"])
    assert rows[0]["eta_structured"] < 1e-10 and rows[0]["eta_baseline_approx3"] < 1e-10
    assert rows[0]["f2_unencoded"] == pytest.approx(1.0, abs=1e-10)
    assert rows[1]["eta_structured"] > 0 and "structured_trivial" in rows[1]["codes"]
    bad = rows[2]
    assert math.isnan(bad["eta_structured"]) and bad["errors"]
