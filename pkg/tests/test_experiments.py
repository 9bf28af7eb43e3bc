"""Tests for the example registry, data generation and checking helpers."""

from __future__ import annotations

import numpy as np
import pytest

from robinrecon import experiments, fem
from robinrecon.mesh import SegmentTag

# integral of the example 5.1 coefficient over the segment, by hand:
# int_0^2 (3 - sin(pi y / 2)) dy = 6 - 4 / pi
INTEGRAL_51 = 6.0 - 4.0 / np.pi


# ---------------------------------------------------------------------------
# coefficient registry


def test_exact_coefficients_at_segment_endpoints():
    cases = {
        "5.1": [(0.0, 3.0), (1.0, 2.0), (2.0, 3.0)],
        "5.2": [(0.0, 3.0), (1.0, 2.0), (2.0, 1.0)],
        "5.3": [(0.0, 1.0), (1.0, 2.0), (2.0, 1.0)],
        "5.4": [(0.0, 1.0), (1.0, 2.0)],
    }
    for example_id, points in cases.items():
        example = experiments.make_example(example_id, nx=4, ny=8)
        for y, value in points:
            got = example.gamma_star(np.array([y]))[0]
            assert got == pytest.approx(value, rel=1e-12), (
                f"{example_id} at y={y}: {got}"
            )


def test_example_kinds():
    assert experiments.make_example("5.1", nx=4, ny=8).kind == "elliptic"
    assert experiments.make_example("5.2", nx=4, ny=8).kind == "elliptic"
    assert experiments.make_example("5.3", nx=4, ny=8, nt=4).kind == "parabolic"
    assert experiments.make_example("5.4", nx=4, ny=8, nt=4).kind == "parabolic"


def test_coefficient_51_stays_in_its_analytic_range():
    example = experiments.make_example("5.1")
    gamma = experiments.interpolate_gamma(example.problem.mesh, example.gamma_star)
    assert gamma.min() >= 2.0 - 1e-12 and gamma.max() <= 3.0 + 1e-12


def test_interpolated_coefficient_integral():
    # nodal interpolation on ny=32 leaves a few times 1e-4 of relative gap
    example = experiments.make_example("5.1")
    mesh = example.problem.mesh
    gamma = experiments.interpolate_gamma(mesh, example.gamma_star)
    ones = np.ones_like(gamma)
    integral = fem.boundary_inner(mesh, SegmentTag.INACCESSIBLE, gamma, ones)
    assert integral == pytest.approx(INTEGRAL_51, rel=5e-4)


def test_make_example_rejects_unknown_id():
    with pytest.raises(ValueError, match="unknown example"):
        experiments.make_example("9.9")


def test_example_52_requires_even_cell_count():
    with pytest.raises(ValueError, match="even"):
        experiments.make_example("5.2", nx=4, ny=7)


def test_interpolate_gamma_accepts_matching_array_only():
    example = experiments.make_example("5.1", nx=4, ny=8)
    mesh = example.problem.mesh
    values = np.linspace(1.0, 2.0, 9)
    out = experiments.interpolate_gamma(mesh, values)
    assert np.array_equal(out, values)
    with pytest.raises(ValueError):
        experiments.interpolate_gamma(mesh, values[:-1])


# ---------------------------------------------------------------------------
# observations and noise


def test_observation_shapes():
    elliptic = experiments.make_example("5.1")
    z = experiments.exact_observation(elliptic)
    n_acc = elliptic.problem.mesh.segment_nodes(SegmentTag.ACCESSIBLE).size
    assert z.shape == (n_acc,) == (65,)

    parabolic = experiments.make_example("5.3", nx=4, ny=8, nt=6)
    zt = experiments.exact_observation(parabolic)
    n_acc = parabolic.problem.mesh.segment_nodes(SegmentTag.ACCESSIBLE).size
    assert zt.shape == (7, n_acc)


def test_add_noise_is_multiplicative_and_bounded():
    z = np.linspace(-2.0, 3.0, 40)
    noisy = experiments.add_noise(z, 0.05, seed=3)
    assert np.all(np.abs(noisy - z) <= 0.05 * np.abs(z) + 1e-15)
    assert not np.array_equal(noisy, z)


def test_add_noise_zero_level_is_identity():
    z = np.linspace(-2.0, 3.0, 40)
    assert np.array_equal(experiments.add_noise(z, 0.0, seed=5), z)


def test_add_noise_is_seed_deterministic():
    z = np.linspace(0.5, 1.5, 30)
    a = experiments.add_noise(z, 0.02, seed=11)
    b = experiments.add_noise(z, 0.02, seed=11)
    c = experiments.add_noise(z, 0.02, seed=12)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_relative_error_normalization():
    example = experiments.make_example("5.1", nx=8, ny=16)
    mesh = example.problem.mesh
    gamma = experiments.interpolate_gamma(mesh, example.gamma_star)
    assert experiments.relative_error(mesh, gamma, example.gamma_star) == 0.0
    assert experiments.relative_error(mesh, 2.0 * gamma, example.gamma_star) == 1.0


# ---------------------------------------------------------------------------
# experiment plumbing


def test_spec_validation():
    with pytest.raises(ValueError):
        experiments.ExperimentSpec(example_id="nope")
    with pytest.raises(ValueError):
        experiments.ExperimentSpec(example_id="5.1", delta=-0.1)
    with pytest.raises(ValueError):
        experiments.ExperimentSpec(example_id="5.1", gamma0="best")
    assert experiments.ExperimentSpec(example_id="5.3").kind == "parabolic"


def test_run_experiment_collects_everything():
    spec = experiments.ExperimentSpec(example_id="5.1", nx=8, ny=16)
    result = experiments.run_experiment(spec)
    assert result.kind == "elliptic"
    assert result.stop_reason == "rel_change"
    assert result.iterations == len(result.history) == 12
    assert result.y.shape == result.gamma_exact.shape == (17,)
    assert np.all(np.diff(result.y) > 0)
    assert result.gamma_reconstructed.shape == (17,)
    assert 0.0 < result.final_error < 0.05
    assert result.wall_time > 0.0


def test_run_experiment_exact_start_noise_free():
    spec = experiments.ExperimentSpec(
        example_id="5.1", nx=8, ny=16, delta=0.0, gamma0="exact"
    )
    result = experiments.run_experiment(spec)
    assert result.iterations == 1
    assert result.final_error == 0.0


# ---------------------------------------------------------------------------
# oracle comparison


def test_oracle_orders_the_three_model_values():
    report = experiments.run_oracle_check(seed=0)
    assert report.j_gauss_newton <= report.j_surrogate <= report.j_at_iterate
    assert report.j_gauss_newton < report.j_at_iterate
    assert report.opt_residual_gn < 1e-12
    assert report.gn_step_in_box
    assert report.beta == report.residual_norm * report.residual_norm


def test_oracle_steps_shrink_in_the_strong_regularization_limit():
    example = experiments.make_example("5.1", nx=4, ny=8)
    mesh = example.problem.mesh
    gamma_exact = experiments.interpolate_gamma(mesh, example.gamma_star)
    z = experiments.add_noise(
        experiments.exact_observation(example, solver_tol=1e-12), 0.02, 0
    )
    rng = np.random.default_rng(1)
    gamma_k = gamma_exact + rng.uniform(-0.2, 0.2, gamma_exact.size)

    def norms(beta):
        report = experiments.oracle_optimality_check(
            example.problem, gamma_k, z, beta_override=beta
        )
        return report.surrogate_step_norm, report.gn_step_norm

    mild = norms(1e3)
    strong = norms(1e6)
    frozen = norms(1e9)
    assert strong[0] < mild[0] and strong[1] < mild[1]
    assert frozen[0] < 1e-8 and frozen[1] < 1e-8


# ---------------------------------------------------------------------------
# field error helper and battery


def test_domain_l2_error_reproduces_linear_fields():
    example = experiments.make_example("5.1", nx=4, ny=8)
    mesh = example.problem.mesh
    nodal = mesh.nodes[:, 0] + mesh.nodes[:, 1]
    err = experiments.domain_l2_error(mesh, nodal, lambda x, y: x + y)
    assert err < 1e-13
    shifted = experiments.domain_l2_error(mesh, nodal + 1.0, lambda x, y: x + y)
    assert shifted == pytest.approx(np.sqrt(2.0), rel=1e-12)


def test_battery_filter():
    results = experiments.verification_battery(only="adjoint")
    assert [r.name for r in results] == ["adjoint-elliptic", "adjoint-parabolic"]
    assert all(r.passed for r in results)
    with pytest.raises(ValueError, match="available"):
        experiments.verification_battery(only="nonsense")
