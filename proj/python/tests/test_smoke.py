import json

import numpy as np
import pytest

import flushlab as fl


@pytest.fixture(scope="module")
def grid():
    return fl.make_grid(80, 32)


def test_grid_and_field_roundtrip(grid, tmp_path):
    assert grid.nx == 80 and grid.ny == 32
    assert len(grid.y) == 33 and grid.y[0] == -1.0
    a = np.random.default_rng(0).normal(size=(2, 33, 80))
    u = fl.Field2D(grid, a)
    assert np.array_equal(u.to_numpy(), a)
    p = tmp_path / "u.bin"
    fl.write_field(str(p), u)
    assert np.array_equal(fl.read_field(str(p)).to_numpy(), a)
    assert np.isclose((2.0 * u).max_abs(), 2 * np.abs(a).max())


def test_bad_shape_raises(grid):
    with pytest.raises(fl.NumericError):
        fl.Field2D(grid, np.zeros((3, 33, 80)))
    with pytest.raises(fl.ConfigError):
        fl.make_grid(81, 32)


def test_perp_grad_is_divergence_free(grid):
    X, Y = np.meshgrid(grid.x, grid.y)
    psi = np.sin(2 * np.pi * X / 10) * (1 - Y**2) ** 2
    u = fl.perp_grad(fl.Field2D(grid, psi))
    assert u.ncomp == 2
    assert fl.divergence_max(u) < 1e-10


def test_base_flow_design():
    h = fl.design_base_flow(3.0, 1.0, 1)
    r = h.residual()
    assert abs(r["left_integral"]) < 1e-10
    assert abs(r["right_integral"]) < 1e-10
    assert abs(h.t_moment(0)) < 1e-10
    assert abs(h.displacement(3.0)) < 1e-10
    assert h(0.0) == 0.0


def test_heat_layer_moment_and_decay():
    h = fl.design_base_flow(3.0, 1.0, 0)
    V = fl.solve_boundary_layer(h)
    assert abs(V.value(1.0, 0.0) - h(1.0)) < 1e-10
    assert abs(fl.z_moment(V, 3.0, 1)) < 1e-8
    p = fl.fit_decay_exponent(fl.decay_series(V, 30.0, 3000.0), (30.0, 3000.0))
    assert abs(p + 1.75) < 0.1


def test_scaling_config_range():
    with pytest.raises(fl.ConfigError, match="range error"):
        fl.ScalingConfig(eps=1.5)
    assert fl.ScalingConfig().eps == 0.1


def test_step_ns_zero_state(grid):
    z = fl.Field2D(grid, np.zeros((2, 33, 80)))
    out = fl.step_ns(z, 0.01, 0.1, fl.Field2D(grid, np.zeros((2, 33, 80))))
    assert out.max_abs() == 0.0


def test_scenario_config():
    cfg = json.loads(fl.scenario_json("scale", "scaling:\n  eps: 0.2\n"))
    assert cfg["scaling"]["eps"] == 0.2
    assert cfg["grid"]["nx"] == 320
    with pytest.raises(fl.ConfigError, match="epsilonn"):
        fl.scenario_json("flush", "scaling:\n  epsilonn: 1\n")


def test_run_scenario_scale(tmp_path):
    res = fl.run_scenario("scale", "scale:\n  trace_eps: [0.01]\n", str(tmp_path))
    assert [c["id"] for c in res] == [2, 5]
    assert all(c["pass"] for c in res)
    assert (tmp_path / "summary.json").exists()


def test_unflushed_zero_run():
    g = fl.make_grid(40, 48)
    c = fl.ScalingConfig(eps=0.2)
    r = fl.run_scaled(c, fl.Field2D(g, np.zeros((2, 49, 40))), nx=40, ny=48, flush=False, output_dt=0.5)
    assert r["final_norm"] == 0.0
    assert r["pass"]
    assert r["diagnostics"]["t"][-1] == pytest.approx(15.0)
