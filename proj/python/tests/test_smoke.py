import json
import math

import numpy as np
import pytest

import sgpplace as sp


@pytest.fixture
def spec():
    return sp.KernelSpec.rbf(1.0, 0.25, 0.02)


def test_kernel_round_trip(spec):
    back = sp.kernel_from_json(sp.kernel_to_json(spec))
    assert back.family == sp.KernelFamily.rbf
    assert back.variance == 1.0
    assert np.allclose(back.lengthscale, [0.25])
    assert json.loads(sp.kernel_to_json(spec))["family"] == "rbf"


def test_kernel_matrix_matches_numpy(spec):
    rng = np.random.default_rng(0)
    a, b = rng.random((5, 2)), rng.random((4, 2))
    d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(-1)
    assert np.allclose(sp.kernel_matrix(spec, a, b), np.exp(-0.5 * d2 / 0.25**2))


def test_gp_posterior_interpolates():
    spec = sp.KernelSpec.rbf(1.0, 0.3, 1e-6)
    x = np.linspace(0, 1, 8).reshape(-1, 1)
    y = np.sin(3 * x[:, 0])
    mean, cov = sp.gp_posterior(spec, x, y, x)
    assert np.allclose(mean, y, atol=1e-3)
    assert cov.shape == (8, 8)


def test_elbo_equals_log_marginal_when_inducing_is_training_set(spec):
    rng = np.random.default_rng(1)
    x = rng.random((12, 2))
    y = rng.standard_normal(12)
    assert sp.svgp_elbo(spec, x, y, x) == pytest.approx(sp.gp_log_marginal(spec, x, y), abs=1e-5)
    assert math.isfinite(sp.svgp_elbo(spec, x, None, x[:3]))
    assert sp.svgp_elbo_grad_inducing(spec, x, x[:3]).shape == (3, 2)


@pytest.mark.parametrize("method", ["continuous-sgp", "greedy-sgp", "discrete-sgp", "greedy-mi", "random"])
def test_place_every_region_method(spec, method):
    env = sp.Environment.unit_square()
    env.candidates = sp.sample_uniform(env, 60, 3)
    r = sp.place(method, 4, env, spec, seed=5, max_iters=200, num_samples=300, grid=sp.stand_in_grid(env, 200, 1))
    assert r.num_sensors == 4
    assert r.method == sp.method_from_string(method)
    sp.validate_placement(r, env)
    assert json.loads(r.to_json())["num_sensors"] == 4


def test_fov_placement(spec):
    fan = sp.FanGeometry()
    fan.rays, fan.points_per_ray = 3, 4
    r = sp.place("fov-sgp", 2, sp.Environment.unit_square(), spec, max_iters=50, fan=fan)
    assert r.angles.shape == (2,)
    assert np.allclose(np.linalg.norm(r.locations, axis=1), 1.0)


def test_metrics(spec):
    env = sp.Environment.unit_square()
    grid = sp.stand_in_grid(env, 300, 2)
    labels = sp.synth_field(env, spec, grid, 4)
    a = grid[:6]
    assert sp.mutual_information(spec, a, grid) > 0
    assert sp.rmse_reconstruction(spec, a, grid, labels) >= 0
    assert sp.exact_kl(spec, grid[:50], labels[:50], grid[:50], grid[50:80]) == pytest.approx(0.0, abs=1e-6)


def test_errors_map_to_python_exceptions(spec):
    with pytest.raises(ValueError):
        sp.method_from_string("frobnicate")
    with pytest.raises(ValueError):
        sp.KernelSpec.rbf(-1.0, 0.2, 0.1).validate()
    with pytest.raises(OSError):
        sp.load_kernel("/nonexistent/kernel.json")
    with pytest.raises(ValueError):
        sp.place("random", 0, sp.Environment.unit_square(), spec)
