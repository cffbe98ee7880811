import math

import numpy as np
import pytest
from scipy import stats

from degenbsde import (
    Example1Params,
    PdeGrid,
    builtin_model,
    cfl_check,
    example1_u,
    make_grid,
    solve_fd,
)
from degenbsde.model import CoefficientModel
from degenbsde.pde_fd import MAX_STORED_LEVELS


def _zero2(t, x):
    return np.zeros_like(np.asarray(x, dtype=float))


def _zero3(t, x, y):
    return np.zeros_like(np.asarray(x, dtype=float))


def _transport_model(speed=1.0, T=1.0) -> CoefficientModel:
    def b(t, x):
        return speed * np.ones_like(np.asarray(x, dtype=float))

    def g(x):
        return np.tanh(np.asarray(x, dtype=float))

    return CoefficientModel(
        sigma=_zero2, sigma_x=_zero2, b=b, b_x=_zero2,
        f1=_zero3, f2=_zero2, f2_x=_zero2, g=g,
        lipschitz_K=max(abs(speed), 1.0), holder_alpha=1.0, holder_C=1.0,
        horizon_T=T, f1_is_zero=True,
    )


# ---------------------------------------------------------------------------
# stability accounting
# ---------------------------------------------------------------------------


def test_cfl_limit_closed_form_constant_volatility():
    model = builtin_model("bachelier_digital")
    grid = PdeGrid(-2.0, 2.0, 41, 0.0, 1.0, 500)
    rep = cfl_check(model, grid)
    dx = 4.0 / 40
    assert rep.dx == pytest.approx(dx, rel=1e-15)
    assert rep.max_sigma_sq == pytest.approx(1.0, rel=1e-15)
    assert rep.max_abs_drift == 0.0
    assert rep.dt_limit == pytest.approx(0.9 * dx * dx, rel=1e-12)
    assert rep.satisfied == (grid.dt <= rep.dt_limit)


def test_cfl_limit_includes_drift_term():
    model = _transport_model(speed=2.0)
    base = builtin_model("tanh_smooth")
    combined = CoefficientModel(
        sigma=base.sigma, sigma_x=_zero2, b=model.b, b_x=_zero2,
        f1=_zero3, f2=_zero2, f2_x=_zero2, g=base.g,
        lipschitz_K=2.0, holder_alpha=1.0, holder_C=1.0, horizon_T=1.0,
        f1_is_zero=True,
    )
    grid = PdeGrid(-1.0, 1.0, 21, 0.0, 1.0, 100)
    rep = cfl_check(combined, grid)
    dx = 0.1
    assert rep.max_abs_drift == pytest.approx(2.0, rel=1e-15)
    assert rep.dt_limit == pytest.approx(0.9 * dx * dx / (1.0 + 2.0 * dx),
                                         rel=1e-12)


def test_cfl_absorbs_z_cost_into_drift():
    model = builtin_model("girsanov_const", f2=0.5)
    grid = PdeGrid(-1.0, 1.0, 21, 0.0, 1.0, 100)
    rep = cfl_check(model, grid)
    assert rep.max_abs_drift == pytest.approx(0.5, rel=1e-14)


def test_cfl_degenerate_model_is_unconditionally_stable():
    model = builtin_model("indicator_zero_vol")
    grid = PdeGrid(-1.0, 1.0, 11, 0.0, 1.0, 1)
    rep = cfl_check(model, grid)
    assert math.isinf(rep.dt_limit)
    assert rep.satisfied


def test_cfl_samples_volatility_jump_instants():
    # a coarse time sampling would miss a vol spike confined to one level;
    # the registered jump instants are probed explicitly
    base = builtin_model("step_vol", t_cut=0.3)
    grid = PdeGrid(-1.0, 1.0, 21, 0.0, 1.0, 2)
    rep = cfl_check(base, grid)
    assert rep.max_sigma_sq == pytest.approx(1.0, rel=1e-14)


# ---------------------------------------------------------------------------
# grid construction
# ---------------------------------------------------------------------------


def test_make_grid_offsets_payoff_jump_to_midpoint():
    model = builtin_model("bachelier_digital")
    grid = make_grid(model, -2.0, 2.0, 101)
    xs = grid.xs()
    assert np.min(np.abs(xs)) == pytest.approx(0.5 * grid.dx, rel=1e-9)
    assert cfl_check(model, grid).satisfied


def test_make_grid_keeps_midpoint_lattice_untouched():
    model = builtin_model("bachelier_digital")
    # 100 nodes on [-2, 2]: the jump at 0 is already midway between nodes
    grid = make_grid(model, -2.0, 2.0, 100)
    assert grid.x_min == -2.0 and grid.x_max == 2.0


def test_make_grid_lands_volatility_jump_on_level():
    model = builtin_model("step_vol", t_cut=0.5)
    grid = make_grid(model, -2.0, 2.0, 101)
    assert grid.n_t % 2 == 0
    times = grid.times()
    assert np.min(np.abs(times - 0.5)) < 1e-12


def test_solve_rejects_unstable_grid():
    model = builtin_model("bachelier_digital")
    grid = PdeGrid(-2.0, 2.0, 101, 0.0, 1.0, 10)
    with pytest.raises(ValueError, match="unstable grid"):
        solve_fd(model, grid)


def test_solve_rejects_wrong_terminal_time():
    model = builtin_model("bachelier_digital")
    grid = PdeGrid(-2.0, 2.0, 11, 0.0, 0.9, 5000)
    with pytest.raises(ValueError, match="terminal"):
        solve_fd(model, grid)


# ---------------------------------------------------------------------------
# accuracy against closed forms
# ---------------------------------------------------------------------------


def test_digital_value_and_delta_match_normal_law():
    model = builtin_model("bachelier_digital")
    grid = make_grid(model, -4.0, 4.0, 401)
    sol = solve_fd(model, grid)
    for x in (-0.7, 0.0, 0.4, 1.1):
        assert sol.u(0.0, x) == pytest.approx(float(stats.norm.cdf(x)),
                                              abs=2e-3)
        assert sol.ux(0.0, x) == pytest.approx(float(stats.norm.pdf(x)),
                                               abs=1e-2)


def test_step_vol_value_uses_only_the_alive_window():
    model = builtin_model("step_vol", t_cut=0.5)
    grid = make_grid(model, -4.0, 4.0, 201)
    sol = solve_fd(model, grid)
    s = math.sqrt(0.5)
    for x in (-0.5, 0.2, 1.0):
        assert sol.u(0.0, x) == pytest.approx(float(stats.norm.cdf(x / s)),
                                              abs=3e-3)
    # after the switch-off the value is frozen at the payoff
    assert sol.u(0.75, 0.3) == pytest.approx(1.0, abs=1e-12)
    assert sol.u(0.75, -0.3) == pytest.approx(0.0, abs=1e-12)


def test_dying_volatility_value_matches_closed_form():
    model = builtin_model("example1")
    params = Example1Params(alpha=0.8, beta=0.5)
    grid = make_grid(model, -3.0, 3.0, 201)
    sol = solve_fd(model, grid)
    for t, x in ((0.0, 0.4), (0.5, 0.3), (0.5, 1.0), (1.5, 0.7)):
        assert sol.u(t, x) == pytest.approx(example1_u(t, x, params),
                                            abs=1e-2)


def test_pure_transport_shifts_the_payoff():
    model = _transport_model(speed=1.0)
    grid = make_grid(model, -4.0, 4.0, 201)
    sol = solve_fd(model, grid)
    for x in (-2.0, -1.0, 0.0, 0.5):
        assert sol.u(0.0, x) == pytest.approx(math.tanh(x + 1.0), abs=2e-2)


def test_refinement_improves_digital_error_at_second_order_rate():
    model = builtin_model("bachelier_digital")
    probes = (-0.7, -0.2, 0.4, 1.1)

    def max_err(n_x):
        sol = solve_fd(model, make_grid(model, -4.0, 4.0, n_x))
        return max(abs(sol.u(0.0, x) - float(stats.norm.cdf(x)))
                   for x in probes)

    errs = [max_err(n) for n in (51, 101, 201)]
    assert errs[0] / errs[1] >= 1.5
    assert errs[1] / errs[2] >= 1.5


def test_running_cost_enters_the_sweep():
    # f = 1, g = 0: u(t, x) = T - t exactly (spatially flat at every level)
    model = CoefficientModel(
        sigma=lambda t, x: np.ones_like(np.asarray(x, dtype=float)),
        sigma_x=_zero2, b=_zero2, b_x=_zero2,
        f1=lambda t, x, y: np.ones_like(np.asarray(x, dtype=float)),
        f2=_zero2, f2_x=_zero2,
        g=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        lipschitz_K=1.0, holder_alpha=1.0, holder_C=1.0, horizon_T=1.0,
    )
    sol = solve_fd(model, make_grid(model, -1.0, 1.0, 41))
    assert sol.u(0.0, 0.3) == pytest.approx(1.0, rel=1e-12)
    # lookups snap to the nearest stored level, so compare against it
    t_snap = sol.times[np.argmin(np.abs(sol.times - 0.25))]
    assert sol.u(0.25, -0.4) == pytest.approx(1.0 - t_snap, rel=1e-12)


# ---------------------------------------------------------------------------
# structural guarantees
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("name", [
    "indicator_zero_vol", "example1", "bachelier_digital",
    "tanh_smooth", "step_vol", "girsanov_const",
])
def test_discrete_maximum_principle(name):
    model = builtin_model(name)
    grid = make_grid(model, -3.0, 3.0, 101)
    sol = solve_fd(model, grid)
    payoff = np.asarray(model.g(sol.xs), dtype=float)
    lo, hi = sol.value_range()
    assert lo >= float(np.min(payoff)) - 1e-12
    assert hi <= float(np.max(payoff)) + 1e-12


def test_level_storage_is_thinned_with_ends_pinned():
    model = builtin_model("bachelier_digital")
    grid = make_grid(model, -2.0, 2.0, 101)
    assert grid.n_t > 10
    sol = solve_fd(model, grid, max_stored_levels=5)
    assert sol.times.size <= 6
    assert sol.times[0] == grid.t_min
    assert sol.times[-1] == grid.t_max
    assert sol.U.shape == (sol.times.size, grid.n_x)


def test_default_storage_cap_holds_for_fine_sweeps():
    model = builtin_model("bachelier_digital")
    grid = make_grid(model, -4.0, 4.0, 401)
    assert grid.n_t > MAX_STORED_LEVELS
    sol = solve_fd(model, grid)
    assert sol.times.size <= MAX_STORED_LEVELS + 1


def test_csv_export_round_trips(tmp_path):
    model = builtin_model("bachelier_digital")
    grid = make_grid(model, -1.0, 1.0, 21)
    sol = solve_fd(model, grid, max_stored_levels=4)
    out = tmp_path / "sol.csv"
    sol.to_csv(out)
    text = out.read_text()
    assert text.splitlines()[0] == "t,x,u,ux"
    assert text.endswith("\n") and "\r" not in text
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    assert data.shape == (sol.times.size * sol.xs.size, 4)
    back = data[:, 2].reshape(sol.times.size, sol.xs.size)
    np.testing.assert_array_equal(back, sol.U)
    sol.to_csv(tmp_path / "again.csv")
    assert (tmp_path / "again.csv").read_bytes() == out.read_bytes()


def test_grid_validation():
    with pytest.raises(ValueError):
        PdeGrid(1.0, -1.0, 11, 0.0, 1.0, 10)
    with pytest.raises(ValueError):
        PdeGrid(-1.0, 1.0, 2, 0.0, 1.0, 10)
    with pytest.raises(ValueError):
        PdeGrid(-1.0, 1.0, 11, 1.0, 1.0, 10)
    with pytest.raises(ValueError):
        PdeGrid(-1.0, 1.0, 11, 0.0, 1.0, 0)
    model = builtin_model("bachelier_digital")
    with pytest.raises(ValueError):
        solve_fd(model, make_grid(model, -1.0, 1.0, 11), max_stored_levels=1)
