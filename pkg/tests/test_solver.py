import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from oracle import DenseStep, SecantParams

from acdln.dln import compute_coeffs
from acdln.fem.assembly import assemble_convection
from acdln.solver import (FIELD_NAMES, ConfigurationError, FieldState, Fields, LinearSolver, NewtonSolver,
                          PhysParams, Problem, SolverConfig, StepFailure, StepSystem, F_of_phi, cn_bootstrap,
                          df_tilde_da, dln_step, f_of_phi, f_tilde, init_state, solve_nonlinear)
from acdln.verify.convergence import run_mms
from acdln.verify.mms import Manufactured

reals = st.floats(-3, 3)


# -- potential ----------------------------------------------------------------

def test_potential_examples():
    assert F_of_phi(1.0) == 0 and F_of_phi(-1.0) == 0 and f_of_phi(1.0) == 0 and f_of_phi(-1.0) == 0
    assert F_of_phi(0.0) == 0.25 and f_of_phi(0.0) == 0.0
    assert math.isclose(f_tilde(1.0, 0.0), -0.25)
    assert math.isclose(f_tilde(0.5, 0.5), -0.375)


@given(phi=reals, eta=st.floats(0.1, 3))
def test_f_is_derivative_of_F(phi, eta):
    h = 1e-8
    fd = (F_of_phi(phi + h, eta) - F_of_phi(phi - h, eta)) / (2 * h)
    assert abs(fd - f_of_phi(phi, eta)) <= 1e-6 * max(1.0, abs(f_of_phi(phi, eta)))


@given(a=reals, b=reals, eta=st.floats(0.1, 3))
def test_secant_identity(a, b, eta):
    lhs = f_tilde(a, b, eta) * (a - b)
    rhs = F_of_phi(a, eta) - F_of_phi(b, eta)
    assert abs(lhs - rhs) <= 1e-13 * max(1.0, F_of_phi(a, eta) + F_of_phi(b, eta))


@given(a=reals, eta=st.floats(0.1, 3))
def test_secant_continuous_at_coincidence(a, eta):
    b = a + 1e-13
    assert abs(f_tilde(a, b, eta) - f_of_phi(0.5 * (a + b), eta)) <= 1e-6 * max(1.0, abs(f_of_phi(a, eta)))
    assert f_tilde(a, a, eta) == pytest.approx(f_of_phi(a, eta), rel=1e-14, abs=1e-14)


@given(a=reals, b=reals, eta=st.floats(0.2, 3))
def test_secant_derivative(a, b, eta):
    h = 1e-6
    fd = (f_tilde(a + h, b, eta) - f_tilde(a - h, b, eta)) / (2 * h)
    assert abs(fd - df_tilde_da(a, b, eta)) <= 1e-6 * max(1.0, abs(fd))


# -- configuration --------------------------------------------------------------

@pytest.mark.parametrize("kw", [dict(mu=-1), dict(kappa=-0.1), dict(eta=0.0), dict(lam=-2)])
def test_params_validation(kw):
    with pytest.raises(ValueError):
        PhysParams(**kw)


def test_negative_rho_allowed():
    assert PhysParams(rho=-2.0).rho == -2.0


@pytest.mark.parametrize("kw", [dict(newton_tol=0), dict(linear_tol=-1), dict(newton_max_iter=0),
                                dict(linear_solver="cg"), dict(predictor="magic"), dict(lu_cache=0)])
def test_solver_config_validation(kw):
    with pytest.raises(ValueError):
        SolverConfig(**kw)


# -- generic Newton -------------------------------------------------------------

def test_linear_problem_converges_in_one_iteration():
    rng = np.random.default_rng(0)
    A = sp.csc_matrix(rng.standard_normal((8, 8)) + 8 * np.eye(8))
    b = rng.standard_normal(8)
    x, info = solve_nonlinear(lambda x: A @ x - b, lambda x: A, np.zeros(8), SolverConfig())
    assert info.iterations == 1
    assert np.allclose(A @ x, b)


def test_newton_is_quadratic_and_fails_loudly():
    res = lambda x: np.array([x[0] ** 3 - 2.0])
    jac = lambda x: sp.csc_matrix([[3 * x[0] ** 2]])
    x, info = solve_nonlinear(res, jac, np.array([1.0]), SolverConfig(newton_rtol=0))
    assert abs(x[0] - 2 ** (1 / 3)) < 1e-12
    h = info.history
    assert h[-2] < 1e-3 * h[-3]  # fast terminal contraction
    with pytest.raises(StepFailure) as err:
        solve_nonlinear(res, jac, np.array([1.0]), SolverConfig(newton_max_iter=2, newton_rtol=0))
    assert err.value.residual > 0 and err.value.iterations == 2


def test_factorisations_are_cached_per_key():
    rng = np.random.default_rng(1)
    mats = {key: sp.csc_matrix(rng.standard_normal((6, 6)) + 6 * np.eye(6)) for key in "ab"}
    b = rng.standard_normal(6)

    def run(cache):
        newton = NewtonSolver(SolverConfig(reuse_jacobian=True, lu_cache=cache))
        for key in "ababab":
            A = mats[key]
            x, _ = newton.solve(lambda x: A @ x - b, lambda x: A, np.zeros(6), key=key)
            assert np.allclose(A @ x, b)
        return newton.total_factorizations

    assert run(2) == 2
    assert run(1) == 6
    # without reuse every iteration factorises afresh
    newton = NewtonSolver(SolverConfig())
    for _ in range(3):
        newton.solve(lambda x: mats["a"] @ x - b, lambda x: mats["a"], np.zeros(6), key="a")
    assert newton.total_factorizations == 3


def test_singular_jacobian_is_a_configuration_error():
    A = sp.csc_matrix(np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(ConfigurationError):
        LinearSolver(A, SolverConfig())


def test_gmres_path_matches_direct():
    rng = np.random.default_rng(3)
    A = sp.csc_matrix(rng.standard_normal((10, 10)) + 10 * np.eye(10))
    b = rng.standard_normal(10)
    x1 = LinearSolver(A, SolverConfig()).solve(b)
    x2 = LinearSolver(A, SolverConfig(linear_solver="gmres")).solve(b)
    assert np.allclose(x1, x2, atol=1e-12)


# -- the step system ------------------------------------------------------------

def random_fields(disc, rng, scale=1.0):
    def vec():
        v = scale * rng.uniform(-1, 1, 2 * disc.n2)
        v[disc.vel.boundary_dofs] = 0.0
        return v
    return Fields(vec(), vec(), rng.uniform(-1, 1, disc.n1), rng.uniform(-1, 1, disc.n1),
                  rng.uniform(-1, 1, disc.n2), rng.uniform(-1, 1, disc.n2))


@settings(max_examples=15)
@given(seed=st.integers(0, 2 ** 31), theta=st.floats(0, 1), k=st.floats(1e-3, 0.1), kp=st.floats(1e-3, 0.1))
def test_jacobian_matches_finite_differences(disc4, seed, theta, k, kp):
    rng = np.random.default_rng(seed)
    P = PhysParams(mu=0.5, gamma=0.8, nu=1.2, rho=0.3, lam=0.7, sigma=2.0, kappa=0.4, eta=0.8)
    state = FieldState(0.0, kp, random_fields(disc4, rng), random_fields(disc4, rng))
    sysm = StepSystem(Problem(disc4, P), state, compute_coeffs(theta, k, kp), kp + k)
    x = sysm.impose_bc(disc4.pack(random_fields(disc4, rng)))
    d = rng.standard_normal(disc4.size)
    d[disc4.bc_dofs] = 0.0
    eps = 1e-7
    fd = (sysm.residual(x + eps * d) - sysm.residual(x - eps * d)) / (2 * eps)
    jd = sysm.jacobian(x) @ d
    assert np.linalg.norm(fd - jd) <= 1e-5 * np.linalg.norm(jd)


def test_picard_jacobian_equals_exact_without_velocity_nonlinearity(disc4, rng):
    P = PhysParams(nu=0.0, lam=0.0)
    state = FieldState(0.0, 0.1, random_fields(disc4, rng), random_fields(disc4, rng))
    sysm = StepSystem(Problem(disc4, P), state, compute_coeffs(0.3, 0.1, 0.1), 0.2)
    x = disc4.pack(random_fields(disc4, rng))
    assert abs(sysm.jacobian(x) - sysm.picard_jacobian(x)).max() < 1e-13
    P2 = PhysParams(nu=1.0, lam=1.0)
    sysm2 = StepSystem(Problem(disc4, P2), state, compute_coeffs(0.3, 0.1, 0.1), 0.2)
    assert abs(sysm2.jacobian(x) - sysm2.picard_jacobian(x)).max() > 1e-6


def test_picard_warmup_reaches_the_same_solution(disc4, rng):
    P = PhysParams(nu=2.0, lam=1.0)
    state = FieldState(0.0, 0.05, random_fields(disc4, rng), random_fields(disc4, rng))
    a, _, _ = dln_step(Problem(disc4, P), state, 0.05, 0.3, SolverConfig(newton_tol=1e-12))
    b, _, info = dln_step(Problem(disc4, P), state, 0.05, 0.3,
                          SolverConfig(newton_tol=1e-12, picard_warmup_iters=2))
    for name in FIELD_NAMES:
        assert np.allclose(getattr(a.curr, name), getattr(b.curr, name), atol=1e-9)
    assert info.factorizations >= 3


@given(seed=st.integers(0, 2 ** 31))
@settings(max_examples=20)
def test_skew_convection_conserves_energy(disc4, seed):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(2 * disc4.n2)  # boundary values included on purpose
    N = assemble_convection(u, disc4.vel)
    assert abs(u @ (N @ u)) <= 1e-12 * max(1.0, u @ u)


def test_equilibrium_is_a_fixed_point(disc4):
    P = PhysParams(sigma=3.0, kappa=0.5)
    z = disc4.zero_fields()
    f = Fields(z.u, z.w, z.xi, z.p, np.ones(disc4.n2), z.m)
    state = FieldState(0.0, 0.0, f, f)
    s1, _, _ = cn_bootstrap(Problem(disc4, P), state, 0.01, SolverConfig())
    s2, _, _ = dln_step(Problem(disc4, P), s1, 0.02, 0.3, SolverConfig())
    for name in ("u", "w", "xi", "p", "m"):
        assert np.abs(getattr(s2.curr, name)).max() < 1e-12
    assert np.abs(s2.curr.phi - 1.0).max() < 1e-12


def test_step_invariants_after_random_step(disc4, rng):
    P = PhysParams()
    cfg = SolverConfig()
    state = FieldState(0.0, 0.02, random_fields(disc4, rng), random_fields(disc4, rng))
    new, coeffs, info = dln_step(Problem(disc4, P), state, 0.03, 0.3, cfg)
    f = new.curr
    assert np.all(f.u[disc4.vel.boundary_dofs] == 0) and np.all(f.w[disc4.vel.boundary_dofs] == 0)
    assert abs(disc4.c1 @ f.p) < 1e-10 and abs(disc4.c1 @ f.xi) < 1e-10
    bu, bw = disc4.divergence_norms(f)
    assert bu <= 10 * cfg.linear_tol and bw <= 10 * cfg.linear_tol
    assert new.t_curr == pytest.approx(0.05) and new.prev is state.curr
    assert info.residual <= cfg.newton_tol + cfg.newton_rtol * info.residual0


def test_mms_converged_residual(disc4):
    P = PhysParams()
    exact = Manufactured(P)
    problem = Problem(disc4, P, boundary=exact.boundary(disc4.vel), forcing=exact.forcing(disc4.geo.xq))
    s0 = init_state(problem, exact, 0.0)
    cfg = SolverConfig(newton_tol=1e-10)
    s1, _, _ = cn_bootstrap(problem, s0, 1e-3, cfg)
    s2, coeffs, info = dln_step(problem, s1, 1e-3, 0.3, cfg)
    assert info.residual <= cfg.newton_tol + cfg.newton_rtol * info.residual0
    # re-evaluate the discrete equations at the returned fields (mean shift is invisible)
    sysm = StepSystem(problem, s1, coeffs, s2.t_curr)
    assert np.linalg.norm(sysm.residual(disc4.pack(s2.curr))) <= 10 * cfg.newton_tol


def test_temporal_richardson_exponent():
    # same mesh for all runs, so differences isolate the time error
    sols = [run_mms(8, k, T=0.2)[1].curr for k in (0.02, 0.01, 0.005)]
    d1 = np.linalg.norm(sols[0].u - sols[1].u)
    d2 = np.linalg.norm(sols[1].u - sols[2].u)
    e1 = np.linalg.norm(sols[0].phi - sols[1].phi)
    e2 = np.linalg.norm(sols[1].phi - sols[2].phi)
    assert 1.7 <= np.log2(d1 / d2) <= 2.6
    assert 1.7 <= np.log2(e1 / e2) <= 2.6


@pytest.mark.parametrize("theta", [0.0, 0.3, 1.0])
def test_step_matches_dense_oracle(disc2, theta):
    rng = np.random.default_rng(11)
    P = PhysParams(mu=0.7, gamma=0.9, nu=1.1, rho=0.5, lam=0.6, sigma=1.3, kappa=0.8, eta=0.9)
    state = FieldState(0.0, 0.03, random_fields(disc2, rng), random_fields(disc2, rng))
    ref, res = DenseStep(disc2, SecantParams(P), state, 0.05, 0.03, theta).solve()
    assert res < 1e-12
    new, _, _ = dln_step(Problem(disc2, P), state, 0.05, theta, SolverConfig(newton_tol=1e-13))
    for name in FIELD_NAMES:
        got = getattr(new.curr, name)
        assert np.abs(got - ref[name]).max() <= 1e-10 * max(1.0, np.abs(ref[name]).max()), name
