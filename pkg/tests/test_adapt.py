import pytest
from hypothesis import given, settings, strategies as st

from acdln.adapt import (ConstantSteps, Controller, ControllerConfig, StepSequence, march, next_step,
                         run_adaptive, run_constant)
from acdln.solver import SolverConfig
from acdln.verify.scenarios import scenario_library


def test_controller_config_validation():
    with pytest.raises(ValueError):
        ControllerConfig(delta=0.0)
    with pytest.raises(ValueError):
        ControllerConfig(k_min=0.1, k_max=0.01)
    with pytest.raises(ValueError):
        ControllerConfig(k_0=1.0)
    assert ControllerConfig().initial_step == 1e-4
    assert ControllerConfig(k_0=1e-3).initial_step == 1e-3


def test_next_step_rules():
    cfg = ControllerConfig(k_min=1e-4, k_max=0.01, delta=0.1)
    assert next_step(0.05, 0.1, 1e-3, cfg) == 2e-3
    assert next_step(0.05, -0.01, 1e-3, cfg) == 2e-3
    assert next_step(0.11, 0.0, 1e-3, cfg) == 5e-4
    assert next_step(0.0, -0.2, 1e-3, cfg) == 5e-4  # absolute values
    assert next_step(0.0, 0.0, 8e-3, cfg) == 0.01
    assert next_step(5.0, 5.0, 1.5e-4, cfg) == 1e-4


@settings(max_examples=200)
@given(chi_u=st.floats(-10, 10), chi_phi=st.floats(-10, 10), e=st.integers(0, 7))
def test_next_step_stays_in_range_and_uses_factor_two(chi_u, chi_phi, e):
    cfg = ControllerConfig()
    k = cfg.k_min * 2 ** e
    k = min(k, cfg.k_max)
    kn = next_step(chi_u, chi_phi, k, cfg)
    assert cfg.k_min <= kn <= cfg.k_max
    assert kn in (2 * k, k / 2, cfg.k_min, cfg.k_max)
    ratio = kn / k
    eps = (kn - k) / (kn + k)
    assert -1 < eps < 1
    if ratio in (2.0, 0.5):
        assert abs(eps) == pytest.approx(1 / 3)


def test_step_sources():
    c = ConstantSteps(0.1)
    assert c.first() == 0.1 and c.next(0.1, {}) == 0.1
    with pytest.raises(ValueError):
        ConstantSteps(0)
    s = StepSequence([1, 2, 3])
    assert [s.first()] + [s.next(0, {}) for _ in range(4)] == [1, 2, 3, 1, 2]
    with pytest.raises(ValueError):
        StepSequence([])
    ctrl = Controller(ControllerConfig(k_0=1e-3))
    assert ctrl.first() == 1e-3
    # the first DLN step reuses the bootstrap step whatever the indicators say
    assert ctrl.next(1e-3, {"chi_u": 100.0, "chi_phi": 0.0}) == 1e-3
    assert ctrl.next(1e-3, {"chi_u": 100.0, "chi_phi": 0.0}) == 5e-4
    assert ctrl.next(5e-4, {"chi_u": 0.0, "chi_phi": 0.0}) == 1e-3


@pytest.fixture(scope="module")
def small_merge():
    return scenario_library("bubble_merge", h=0.25)


def test_march_hits_horizon_exactly(small_merge):
    disc, problem, state = small_merge.setup()
    res = run_constant(problem, state, 0.03, 0.1, 0.3, SolverConfig(reuse_jacobian=True))
    assert res.state.t_curr == 0.1
    assert res.steps == 4 and res.clamped_steps == [4]
    assert res.step_sizes[:3] == [0.03] * 3 and res.step_sizes[3] == pytest.approx(0.01)
    assert [r.step for r in res.records] == list(range(5))
    assert all(d[1] < 1e-9 and d[2] < 1e-9 for d in res.divergence)


def test_march_validates(small_merge):
    disc, problem, state = small_merge.setup()
    with pytest.raises(ValueError):
        run_constant(problem, state, 0.01, 0.1, theta=1.5)
    with pytest.raises(ValueError):
        run_constant(problem, state, 0.01, 0.0)


def test_adaptive_invariants(small_merge):
    disc, problem, state = small_merge.setup()
    ctrl = ControllerConfig(k_min=1e-3, k_max=0.02, delta=0.1)
    seen = []
    res = run_adaptive(problem, state, ctrl, 0.15, 0.3, SolverConfig(reuse_jacobian=True),
                       callback=lambda step, st, rec: seen.append(step))
    ks = res.step_sizes
    assert res.state.t_curr == 0.15
    assert seen == list(range(res.steps + 1))
    assert ks[0] == ks[1] == ctrl.k_min
    clamped = set(res.clamped_steps)
    for i in range(1, len(ks)):
        step = i + 1
        eps = (ks[i] - ks[i - 1]) / (ks[i] + ks[i - 1])
        assert -1 < eps < 1
        if step not in clamped:
            assert ctrl.k_min <= ks[i] <= ctrl.k_max
            assert ks[i] / ks[i - 1] in (0.5, 1.0, 2.0) or ks[i] in (ctrl.k_min, ctrl.k_max)
            assert abs(eps) <= 1 / 3 + 1e-12
            expected = next_step(res.records[i].chi_u, res.records[i].chi_phi, ks[i - 1], ctrl) if i > 1 else ks[0]
            assert ks[i] == pytest.approx(expected)


def test_strict_retry_halves_failed_steps(small_merge, monkeypatch):
    import acdln.adapt as adapt
    from acdln.solver import StepFailure

    disc, problem, state = small_merge.setup()
    real = adapt.dln_step
    calls = []

    def flaky(problem, state, k, theta, cfg, newton=None):
        calls.append(k)
        if len(calls) == 1:
            raise StepFailure("forced", residual=1.0, iterations=3)
        return real(problem, state, k, theta, cfg, newton=newton)

    monkeypatch.setattr(adapt, "dln_step", flaky)
    ctrl = ControllerConfig(k_min=1e-3, k_max=0.01, k_0=4e-3, strict_retry=True)
    res = run_adaptive(problem, state, ctrl, 0.012, 0.3)
    assert calls[:2] == [4e-3, 2e-3]
    assert res.state.t_curr == 0.012
    with pytest.raises(StepFailure):
        calls.clear()
        run_adaptive(problem, small_merge.setup(disc)[2], ControllerConfig(k_min=1e-3, k_0=4e-3), 0.012, 0.3)



def test_step_budget_truncates(small_merge):
    disc, problem, state = small_merge.setup()
    res = run_constant(problem, state, 0.01, 0.1, 0.3, SolverConfig(reuse_jacobian=True), max_steps=3)
    assert res.truncated and res.steps == 3 and res.state.t_curr == pytest.approx(0.03)
    full = run_constant(problem, small_merge.setup(disc)[2], 0.05, 0.1, 0.3, max_steps=2)
    assert not full.truncated and full.state.t_curr == 0.1
