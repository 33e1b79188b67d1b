# -*- coding: utf-8 -*-
from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from core.cmps_coupled import CoupledModelParams, energy_density_coupled, mean_field_energy
from core.cmps_single import CmpsAnsatz, ModelParams, energy_density
from core.exceptions import InfeasiblePoint, LayoutMismatch
from core.param_layout import ParamLayout, pack, unpack
from core.variational import (
    OptimizerConfig, PenaltyState, bfgs, central_gradient, embed_pairs, gradient_fd, minimize, objective,
    refine_pairs, warm_start_coupled,
)
from tests.helpers import converged_coherent, diagonal_ansatz, generic_ansatz


class TestOptimizerConfig:

    def test_defaults_from_config(self):
        cfg = OptimizerConfig()
        assert cfg.grad_step == 1e-5
        assert cfg.penalty_growth > 1

    def test_from_dict_overrides(self):
        cfg = OptimizerConfig.from_dict({'restarts': 3})
        assert cfg.restarts == 3
        assert cfg.max_iters == OptimizerConfig().max_iters

    @pytest.mark.parametrize('kwargs', [dict(grad_step=0.0), dict(restarts=0), dict(penalty_growth=1.0)])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValueError):
            OptimizerConfig(**kwargs)


class TestObjective:

    def test_penalty_term(self):
        params = ModelParams(M=0.5, c=1.0, rho0=1.0)
        v = pack(CmpsAnsatz(K=[[0.0]], R=[[np.sqrt(1.1)]]))
        value = objective(v, params, PenaltyState(mu=(0.0,), sigma=100.0))
        e = energy_density(unpack(v, v.layout), params)
        assert value - e >= 1.0 - 1e-9
        assert_allclose(value - e, 1.0, rtol=1e-9)

    def test_multiplier_term(self):
        params = ModelParams(M=0.5, c=1.0, rho0=1.0)
        v = pack(CmpsAnsatz(K=[[0.0]], R=[[np.sqrt(0.9)]]))
        value = objective(v, params, PenaltyState(mu=(2.0,), sigma=0.0))
        assert_allclose(value, 0.81 + 2.0 * -0.1, rtol=1e-9)

    def test_degenerate_point_is_infeasible(self):
        params = ModelParams(M=0.5, c=1.0, rho0=1.0)
        with pytest.raises(InfeasiblePoint):
            objective(pack(diagonal_ansatz()), params, PenaltyState.initial(1, 10.0))

    def test_central_gradient_of_quadratic(self, rng):
        x = rng.normal(size=6)
        assert_allclose(central_gradient(lambda y: float(y @ y), x, 1e-5), 2 * x, atol=1e-8)

    def test_gradient_vanishes_at_d1_minimum(self):
        c, rho0 = 1.5, 0.8
        params = ModelParams(M=0.5, c=c, rho0=rho0)
        v = pack(CmpsAnsatz(K=[[0.2]], R=[[np.sqrt(rho0)]]))
        # exact multiplier of the D = 1 problem
        grad = gradient_fd(v, params, PenaltyState(mu=(-2 * c * rho0,), sigma=10.0))
        assert np.linalg.norm(grad.values) < 1e-4


class TestMinimize:

    def test_d1_reaches_closed_form(self, fast_optimizer):
        params = ModelParams(M=0.5, c=1.0, rho0=1.0)
        result = minimize(None, params, fast_optimizer, layout=ParamLayout('single', 1))
        assert result.converged
        assert_allclose(result.energy, 1.0, atol=1e-6)
        assert abs(result.densities[0] - 1.0) < 1e-6

    def test_free_gas_d1_has_zero_energy(self, fast_optimizer):
        params = ModelParams(M=0.5, c=0.0, rho0=0.7)
        result = minimize(None, params, fast_optimizer, layout=ParamLayout('single', 1))
        assert result.converged
        assert abs(result.energy) < 1e-6

    def test_deterministic_under_seed(self, fast_optimizer):
        params = ModelParams(M=0.5, c=2.0, rho0=1.0)
        a = minimize(None, params, fast_optimizer, layout=ParamLayout('single', 1))
        b = minimize(None, params, fast_optimizer, layout=ParamLayout('single', 1))
        assert a.energy == b.energy
        assert a.iterations == b.iterations

    def test_accepted_steps_never_increase_objective(self, fast_optimizer):
        params = ModelParams(M=0.5, c=1.0, rho0=1.0)
        result = minimize(None, params, fast_optimizer, layout=ParamLayout('single', 1))
        for trace in result.objective_trace:
            assert np.all(np.diff(trace) <= 0)

    def test_initial_vector_sets_layout(self, fast_optimizer):
        params = ModelParams(M=0.5, c=1.0, rho0=1.0)
        start = pack(CmpsAnsatz(K=[[0.0]], R=[[0.9]]))
        result = minimize(start, params, fast_optimizer)
        assert result.layout == start.layout
        assert result.converged

    def test_needs_layout(self, fast_optimizer):
        with pytest.raises(LayoutMismatch):
            minimize(None, ModelParams(M=0.5, c=1.0, rho0=1.0), fast_optimizer)

    def test_coupled_d1_without_pairs(self, fast_optimizer):
        params = CoupledModelParams(M=0.5, c=1.0, g=0.5, rho01=1.0, rho02=0.8)
        result = minimize(None, params, fast_optimizer, layout=ParamLayout('coupled', 1, 0))
        assert result.converged
        assert_allclose(result.energy, 1.0 + 0.64 + 0.5 * 0.8, atol=1e-5)

    @pytest.mark.slow
    def test_more_bond_dimension_lowers_energy(self, fast_optimizer):
        params = ModelParams.from_gamma(2.0)
        energies = [minimize(None, params, fast_optimizer, layout=ParamLayout('single', D)).energy
                    for D in (1, 2, 3)]
        assert energies[1] <= energies[0] + 1e-8
        assert energies[2] <= energies[1] + 1e-6


class TestWarmStart:

    def test_zero_z_reproduces_mean_field(self):
        s1, s2 = converged_coherent(1.0), converged_coherent(0.6)
        v = warm_start_coupled(s1, s2, P=2, z_scale=0.0)
        assert v.layout == ParamLayout('coupled', 1, 2)
        params = CoupledModelParams(M=0.5, c=1.0, g=0.9, rho01=1.0, rho02=0.6)
        e1, e2 = 1.0, 0.36
        assert_allclose(energy_density_coupled(unpack(v, v.layout), params),
                        mean_field_energy(e1, e2, params), rtol=1e-12)

    def test_small_z(self):
        v = warm_start_coupled(converged_coherent(1.0), converged_coherent(1.0), P=1, seed=3)
        ansatz = unpack(v, v.layout)
        for z1, z2 in ansatz.Z:
            assert np.max(np.abs(z1)) <= 1e-2 and np.max(np.abs(z2)) <= 1e-2

    def test_needs_converged_inputs(self):
        s = converged_coherent(1.0)
        s.converged = False
        with pytest.raises(ValueError):
            warm_start_coupled(s, converged_coherent(1.0), P=1)


class TestBfgs:

    def test_kink_with_large_gradient_is_not_success(self):
        # the central difference straddles the kink: g = -1 but no descent along +x
        x, _, iters, ok = bfgs(lambda y: max(y[0], -3.0 * y[0]), np.zeros(1), OptimizerConfig())
        assert not ok
        assert iters == 0
        assert x[0] == 0.0

    def test_stall_at_noise_floor_is_success(self):
        _, _, _, ok = bfgs(lambda y: max(1e-6 * y[0], -3e-6 * y[0]), np.zeros(1), OptimizerConfig())
        assert ok

    def test_quadratic(self):
        x, fx, _, ok = bfgs(lambda y: float((y - 1.0) @ (y - 1.0)), np.zeros(3), OptimizerConfig())
        assert ok
        assert_allclose(x, 1.0, atol=1e-6)


class TestStarts:

    def test_list_of_starts(self, fast_optimizer):
        params = ModelParams(M=0.5, c=1.0, rho0=1.0)
        starts = [pack(CmpsAnsatz(K=[[0.0]], R=[[r]])) for r in (0.9, 1.1, 1.2)]
        result = minimize(starts, params, fast_optimizer)
        assert result.converged
        assert result.restart_index in (0, 1, 2)
        assert_allclose(result.energy, 1.0, atol=1e-6)

    def test_starts_share_layout(self, fast_optimizer):
        starts = [pack(CmpsAnsatz(K=[[0.0]], R=[[1.0]])), pack(generic_ansatz(2))]
        with pytest.raises(LayoutMismatch):
            minimize(starts, ModelParams(M=0.5, c=1.0, rho0=1.0), fast_optimizer)


class TestPairRefinement:

    @pytest.fixture
    def tight(self):
        return OptimizerConfig(max_iters=1000, restarts=2, constraint_tol=1e-10, max_outer=40, seed=2)

    def test_embedding_keeps_the_state(self, fast_optimizer):
        params = CoupledModelParams(M=0.5, c=1.0, g=0.5, rho01=1.0, rho02=0.8)
        plain = minimize(None, params, fast_optimizer, layout=ParamLayout('coupled', 1, 0))
        v = embed_pairs(plain.params(), 2)
        assert v.layout == ParamLayout('coupled', 1, 2)
        assert_allclose(v.values[:4], plain.params().values)
        assert np.all(v.values[4:] == 0.0)
        assert_allclose(energy_density_coupled(unpack(v, v.layout), params), plain.energy, rtol=1e-12)

    def test_embedding_needs_plain_coupled_vector(self):
        with pytest.raises(LayoutMismatch):
            embed_pairs(pack(CmpsAnsatz(K=[[0.0]], R=[[1.0]])), 1)

    def test_random_pairs_are_small(self, fast_optimizer):
        params = CoupledModelParams(M=0.5, c=1.0, g=0.5, rho01=1.0, rho02=1.0)
        plain = minimize(None, params, fast_optimizer, layout=ParamLayout('coupled', 1, 0))
        v = embed_pairs(plain.params(), 1, z_scale=1e-2, seed=4)
        assert 0 < np.max(np.abs(v.values[4:])) <= 1e-2

    def test_never_above_plain_optimum_d1(self, fast_optimizer):
        params = CoupledModelParams(M=0.5, c=1.0, g=0.5, rho01=1.0, rho02=1.0)
        plain = minimize(None, params, fast_optimizer, layout=ParamLayout('coupled', 1, 0))
        rich = refine_pairs(plain, params, fast_optimizer, P=1)
        assert rich.layout == ParamLayout('coupled', 1, 1)
        assert rich.converged
        assert rich.energy <= plain.energy + 1e-12

    @pytest.mark.parametrize('g', [0.0, 1.0])
    def test_pairs_do_not_raise_energy(self, tight, g):
        params = CoupledModelParams(M=0.5, c=1.5, g=g, rho01=0.63, rho02=0.63)
        plain = minimize(None, params, tight, layout=ParamLayout('coupled', 2, 0))
        assert plain.converged
        rich = refine_pairs(plain, params, tight, P=1, seed=2)
        assert rich.converged
        assert rich.energy <= plain.energy + 1e-8
        assert max(abs(r) for r in rich.constraint_residuals) <= 1e-10

    def test_needs_converged_plain_result(self, fast_optimizer):
        params = CoupledModelParams(M=0.5, c=1.0, g=0.5, rho01=1.0, rho02=1.0)
        plain = minimize(None, params, fast_optimizer, layout=ParamLayout('coupled', 1, 0))
        plain.converged = False
        with pytest.raises(ValueError):
            refine_pairs(plain, params, fast_optimizer, P=1)

    @pytest.mark.slow
    def test_warm_start_needs_fewer_iterations(self):
        config = OptimizerConfig(max_iters=2000, restarts=1)
        s1 = minimize(None, ModelParams(M=0.5, c=1.0, rho0=1.0), OptimizerConfig(restarts=4),
                      layout=ParamLayout('single', 2))
        params = CoupledModelParams(M=0.5, c=1.0, g=0.1, rho01=1.0, rho02=1.0)
        warm, cold = [], []
        for seed in range(5):
            start = warm_start_coupled(s1, s1, P=1, seed=seed)
            warm.append(minimize(start, params, replace(config, seed=seed)).iterations)
            cold.append(minimize(None, params, replace(config, seed=seed), layout=ParamLayout('coupled', 2, 1)).iterations)
        assert np.median(warm) < np.median(cold)
