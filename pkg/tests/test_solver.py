import numpy as np
import pytest

from tenrec.degrade import corrupt, parse_scenario
from tenrec.gradient import GradientOperator, build_gradient_operator, gradient, gradient_adjoint
from tenrec.metrics import rmse
from tenrec.regularizers import ModeWeights, prox_nuclear_l1l2, soft_threshold
from tenrec.solver import (
    VARIANTS,
    AdmmState,
    SolverConfig,
    _direct_update_x,
    _direct_update_z,
    auto_lambda,
    solve,
    solve_variant,
    update_E,
    update_G,
    update_K,
    update_multipliers,
    update_X,
    update_Z,
    variant_from_token,
)
from tenrec.synth import make_synthetic
from tenrec.tensor3 import MODES, fold, project, unfold

DIMS = (3, 6, 4)
MU = 0.37


def random_state(rng, dims=DIMS, with_gradient=True):
    g_shape = dims
    state = AdmmState(
        x=rng.standard_normal(dims),
        k=rng.standard_normal(dims),
        e=rng.standard_normal(dims),
        n=rng.standard_normal(dims),
        z=[rng.standard_normal(unfold(np.zeros(g_shape), m).shape) for m in MODES],
        q=[rng.standard_normal(unfold(np.zeros(g_shape), m).shape) for m in MODES],
        mu=MU,
    )
    if with_gradient:
        state.g = rng.standard_normal(dims)
        state.m = rng.standard_normal(dims)
    return state


def test_auto_lambda_values():
    assert auto_lambda((307, 288, 59)) == pytest.approx(1.0 / np.sqrt(307 * 59))
    assert auto_lambda((307, 288, 59)) == pytest.approx(0.0074303, abs=1e-7)
    assert auto_lambda((4, 9, 1)) == pytest.approx(1.0 / 3.0)
    with pytest.raises(ValueError):
        auto_lambda((0, 4, 4))


def test_variant_tokens():
    assert variant_from_token("gtnln") == ("GTNLN", None)
    assert variant_from_token("tnln") == ("TNLN_ON_X", None)
    assert variant_from_token("tnln_on_x") == ("TNLN_ON_X", None)
    assert variant_from_token("convex") == ("CONVEX_TNN", None)
    assert variant_from_token("CONVEX_TNN".lower()) == ("CONVEX_TNN", None)
    assert variant_from_token("tnln_tv:0.01") == ("TNLN_PLUS_TV", 0.01)
    assert variant_from_token("tnln_plus_tv") == ("TNLN_PLUS_TV", None)
    with pytest.raises(ValueError):
        variant_from_token("nuclear")
    with pytest.raises(ValueError):
        variant_from_token("tnln_tv:abc")
    with pytest.raises(ValueError):
        variant_from_token("gtnln:0.5")  # parameter only valid for the TV variant


def test_solver_config_validation():
    cfg = SolverConfig()
    assert cfg.variant == "GTNLN" and cfg.lam == "auto"
    assert cfg.mu0 == 1e-6 and cfg.mu_growth == 1.1 and cfg.mu_cap == 1e10
    assert cfg.max_iters == 300 and cfg.rel_tol == 1e-5
    with pytest.raises(ValueError):
        SolverConfig(variant="OTHER")
    with pytest.raises(ValueError):
        SolverConfig(lam=-1.0)
    with pytest.raises(ValueError):
        SolverConfig(theta=-0.5)
    with pytest.raises(ValueError):
        SolverConfig(mu0=0.0)
    with pytest.raises(ValueError):
        SolverConfig(mu_growth=0.9)
    with pytest.raises(ValueError):
        SolverConfig(mu_cap=1e-9)
    with pytest.raises(ValueError):
        SolverConfig(max_iters=0)
    with pytest.raises(ValueError):
        SolverConfig(rel_tol=-1e-3)
    # weights may be given as a plain tuple
    cfg = SolverConfig(weights=(0.2, 0.3, 0.5))
    assert isinstance(cfg.weights, ModeWeights)


def test_update_X_solves_its_system():
    rng = np.random.default_rng(0)
    op = GradientOperator(DIMS[1])
    state = random_state(rng)
    y_obs = rng.standard_normal(DIMS)
    x = update_X(state, y_obs, op)
    w = gradient_adjoint(op, state.g - state.m / state.mu) + y_obs - state.k - state.e + state.n / state.mu
    lap = op.matrix.T @ op.matrix
    lhs = unfold(x, 2) + lap @ unfold(x, 2)
    np.testing.assert_allclose(lhs, unfold(w, 2), atol=1e-11)


def test_update_G_averages_four_terms():
    rng = np.random.default_rng(1)
    op = GradientOperator(DIMS[1])
    state = random_state(rng)
    g = update_G(state, op)
    acc = gradient(op, state.x) + state.m / state.mu
    for i, mode in enumerate(MODES):
        acc += fold(state.z[i] + state.q[i] / state.mu, mode, DIMS)
    np.testing.assert_allclose(4.0 * g, acc, atol=1e-12)


def test_update_K_vanishes_on_mask():
    rng = np.random.default_rng(2)
    state = random_state(rng)
    y_obs = rng.standard_normal(DIMS)
    mask = rng.random(DIMS) > 0.5
    k = update_K(state, y_obs, mask)
    assert np.all(k[mask] == 0.0)
    expected = (y_obs - state.x - state.e + state.n / state.mu)[~mask]
    np.testing.assert_allclose(k[~mask], expected, atol=1e-12)


def test_update_Z_matches_prox():
    rng = np.random.default_rng(3)
    state = random_state(rng)
    weights = ModeWeights((0.5, 0.25, 0.25))
    against = rng.standard_normal(DIMS)
    z = update_Z(state, weights, against)
    for i, mode in enumerate(MODES):
        expected = prox_nuclear_l1l2(
            unfold(against, mode) - state.q[i] / state.mu, weights.alpha[i] / state.mu
        )
        np.testing.assert_allclose(z[i], expected, atol=1e-12)


def test_update_E_is_soft_threshold():
    rng = np.random.default_rng(4)
    state = random_state(rng)
    y_obs = rng.standard_normal(DIMS)
    lam = 0.8
    e = update_E(state, y_obs, lam)
    expected = soft_threshold(y_obs - state.x - state.k + state.n / state.mu, lam / state.mu)
    np.testing.assert_allclose(e, expected, atol=1e-12)


def test_update_multipliers_gradient_split():
    rng = np.random.default_rng(5)
    op = GradientOperator(DIMS[1])
    state = random_state(rng)
    y_obs = rng.standard_normal(DIMS)
    m, n, q = update_multipliers(state, y_obs, op)
    np.testing.assert_allclose(n, state.n + state.mu * (y_obs - state.x - state.e - state.k), atol=1e-12)
    np.testing.assert_allclose(m, state.m + state.mu * (gradient(op, state.x) - state.g), atol=1e-12)
    for i, mode in enumerate(MODES):
        np.testing.assert_allclose(
            q[i], state.q[i] + state.mu * (state.z[i] - unfold(state.g, mode)), atol=1e-12
        )


def test_update_multipliers_direct():
    rng = np.random.default_rng(6)
    state = random_state(rng, with_gradient=False)
    y_obs = rng.standard_normal(DIMS)
    m, n, q = update_multipliers(state, y_obs, None)
    assert m is None
    for i, mode in enumerate(MODES):
        np.testing.assert_allclose(
            q[i], state.q[i] + state.mu * (state.z[i] - unfold(state.x, mode)), atol=1e-12
        )


# ---------------------------------------------------------------------------
# end-to-end solves
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def small_instance():
    x0 = make_synthetic((12, 16, 5), components=2, seed=0, value_range=(0.0, 50.0))
    y, mask, e0 = corrupt(x0, parse_scenario("rm:0.4+ln1", seed=3))
    return x0, y, mask


def test_solve_zero_observations_converges_immediately():
    y = np.zeros((4, 6, 3))
    mask = np.ones((4, 6, 3), dtype=bool)
    report = solve(y, mask)
    assert report.converged
    assert report.iterations_run <= 2
    assert np.all(report.x_hat == 0.0)
    assert np.all(report.e_hat == 0.0)


def test_solve_requires_observations():
    with pytest.raises(ValueError):
        solve(np.ones((3, 4, 2)), np.zeros((3, 4, 2), dtype=bool))


def test_solve_deterministic(small_instance):
    _, y, mask = small_instance
    cfg = SolverConfig(max_iters=60)
    a = solve(y, mask, cfg)
    b = solve(y, mask, cfg)
    assert np.array_equal(a.x_hat, b.x_hat)
    assert np.array_equal(a.e_hat, b.e_hat)
    assert a.iterations_run == b.iterations_run


def _replay_reference_updates(y, mask, cfg, iters):
    """Drive the exported per-step update functions by hand, mirroring solve()."""
    op = build_gradient_operator(y.shape[1])
    y_obs = project(y, mask)
    lam = cfg.resolve_lambda(y.shape)
    x = y_obs.copy()
    if cfg.variant == "GTNLN":
        g = gradient(op, x)
        z = [np.zeros_like(unfold(g, mode)) for mode in MODES]
        state = AdmmState(
            x=x, g=g, k=np.zeros_like(y), e=np.zeros_like(y), m=np.zeros_like(y),
            n=np.zeros_like(y), z=z, q=[zi.copy() for zi in z], mu=cfg.mu0,
        )
    else:
        z = [np.zeros_like(unfold(x, mode)) for mode in MODES]
        state = AdmmState(
            x=x, k=np.zeros_like(y), e=np.zeros_like(y), n=np.zeros_like(y),
            z=z, q=[zi.copy() for zi in z], mu=cfg.mu0,
        )
    for _ in range(iters):
        if cfg.variant == "GTNLN":
            state.x = update_X(state, y_obs, op)
            state.g = update_G(state, op)
            state.k = update_K(state, y_obs, mask)
            state.z = update_Z(state, cfg.weights, state.g)
            state.e = update_E(state, y_obs, lam)
            state.m, state.n, state.q = update_multipliers(state, y_obs, op)
        else:
            state.x = _direct_update_x(state, y_obs, op, cfg)
            state.k = update_K(state, y_obs, mask)
            state.z = _direct_update_z(state, cfg)
            state.e = update_E(state, y_obs, lam)
            _, state.n, state.q = update_multipliers(state, y_obs, op)
        state.mu = min(state.mu * cfg.mu_growth, cfg.mu_cap)
    return state


@pytest.mark.parametrize("variant", ["GTNLN", "CONVEX_TNN"])
def test_solve_loop_matches_reference_updates(small_instance, variant):
    """The fused solve loop is the update functions applied in order, bit for bit."""
    _, y, mask = small_instance
    cfg = SolverConfig(variant=variant, max_iters=6, rel_tol=0.0)
    report = solve(y, mask, cfg)
    state = _replay_reference_updates(y, mask, cfg, 6)
    assert np.array_equal(report.x_hat, state.x)
    assert np.array_equal(report.e_hat, state.e)
    assert np.array_equal(report.k_hat, state.k)


def test_solve_gtnln_recovers_better_than_zero_fill(small_instance):
    x0, y, mask = small_instance
    report = solve(y, mask)
    assert report.converged
    baseline = rmse(x0, project(y, mask))
    assert rmse(x0, report.x_hat) < 0.5 * baseline
    # converged runs are feasible on the mask
    feas = np.linalg.norm((project(y, mask) - report.x_hat - report.e_hat)[mask])
    feas /= max(1.0, np.linalg.norm(y[mask]))
    assert feas <= 1e-4
    assert np.all(report.k_hat[mask] == 0.0)


@pytest.mark.parametrize("variant", ["TNLN_ON_X", "CONVEX_TNN", "TNLN_PLUS_TV"])
def test_direct_variants_run_and_converge(small_instance, variant):
    _, y, mask = small_instance
    cfg = SolverConfig(variant=variant, theta=1.0 if variant == "TNLN_PLUS_TV" else 0.0)
    report = solve_variant(y, mask, cfg)
    assert report.variant == variant
    assert report.converged
    assert np.isnan(report.trace[0]["r_gradient"])


def test_tv_theta_zero_equals_tnln_on_x(small_instance):
    """theta = 0 removes the TV term, so the trace must match exactly."""
    _, y, mask = small_instance
    a = solve(y, mask, SolverConfig(variant="TNLN_ON_X", max_iters=50, rel_tol=0.0))
    b = solve(y, mask, SolverConfig(variant="TNLN_PLUS_TV", theta=0.0, max_iters=50, rel_tol=0.0))
    assert np.array_equal(a.x_hat, b.x_hat)
    for ra, rb in zip(a.trace, b.trace):
        assert ra["rel_change"] == rb["rel_change"]


def test_solve_variant_rejects_gtnln(small_instance):
    _, y, mask = small_instance
    with pytest.raises(ValueError):
        solve_variant(y, mask, SolverConfig())


def test_rel_tol_zero_runs_max_iters(small_instance):
    _, y, mask = small_instance
    report = solve(y, mask, SolverConfig(max_iters=25, rel_tol=0.0))
    assert report.iterations_run == 25
    assert not report.converged


def test_lambda_resolution(small_instance):
    _, y, mask = small_instance
    auto = solve(y, mask, SolverConfig(max_iters=2, rel_tol=0.0))
    assert auto.lam == pytest.approx(auto_lambda(y.shape))
    fixed = solve(y, mask, SolverConfig(lam=0.25, max_iters=2, rel_tol=0.0))
    assert fixed.lam == 0.25


def test_trace_contents(small_instance):
    _, y, mask = small_instance
    report = solve(y, mask, SolverConfig(max_iters=10, rel_tol=0.0))
    frame = report.trace_frame()
    assert list(frame.columns) == [
        "iteration",
        "rel_change",
        "r_gradient",
        "r_observed",
        "r_split",
        "r_feasibility",
        "mu",
        "e_zero_frac",
    ]
    assert len(frame) == 10
    assert (frame["iteration"] == np.arange(1, 11)).all()
    assert frame["e_zero_frac"].between(0.0, 1.0).all()
    # mu grows geometrically from mu0
    np.testing.assert_allclose(frame["mu"], 1e-6 * 1.1 ** np.arange(10), rtol=1e-12)


def test_all_variants_listed():
    assert VARIANTS == ("GTNLN", "TNLN_ON_X", "CONVEX_TNN", "TNLN_PLUS_TV")


def test_mu_cap_respected(small_instance):
    _, y, mask = small_instance
    report = solve(y, mask, SolverConfig(mu0=1.0, mu_growth=10.0, mu_cap=100.0, max_iters=8, rel_tol=0.0))
    assert report.trace_frame()["mu"].max() <= 100.0
