import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quantgraph.data import (Dataset, McmcState, NeighborhoodPosterior,
                             PriorConfig, QuantileGrid, VariationalState,
                             build_node_problem, init_mcmc_state,
                             init_vb_state, standardize)


def make_dataset(values, names=None):
    values = np.asarray(values, dtype=float)
    if names is None:
        names = [f"X{k}" for k in range(1, values.shape[1] + 1)]
    return Dataset(values=values, column_names=names)


class TestStandardize:
    def test_simple_column(self):
        d = standardize(make_dataset([[1.0], [2.0], [3.0]]))
        assert np.allclose(d.values[:, 0], [-1.0, 0.0, 1.0])
        assert d.standardized

    def test_idempotent(self):
        rng = np.random.default_rng(0)
        d = standardize(make_dataset(rng.standard_normal((40, 3))))
        d2 = standardize(d)
        assert np.max(np.abs(d2.values - d.values)) <= 1e-12

    def test_constant_column_error(self):
        with pytest.raises(ValueError, match="zero variance.*'X2'"):
            standardize(make_dataset([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]))

    def test_moments_after_standardization(self):
        rng = np.random.default_rng(1)
        d = standardize(make_dataset(rng.standard_normal((100, 4)) * 7 + 3))
        assert np.max(np.abs(d.values.mean(axis=0))) <= 1e-10
        assert np.max(np.abs(d.values.std(axis=0, ddof=1) - 1)) <= 1e-10

    @given(seed=st.integers(min_value=0, max_value=10 ** 6))
    @settings(deadline=None, max_examples=25)
    def test_idempotence_property(self, seed):
        rng = np.random.default_rng(seed)
        d = standardize(make_dataset(rng.standard_normal((10, 2)) * 5))
        d2 = standardize(d)
        assert np.max(np.abs(d2.values - d.values)) <= 1e-12

    def test_requires_two_rows(self):
        with pytest.raises(ValueError, match="at least 2 rows"):
            standardize(make_dataset([[1.0, 2.0]]))


class TestDataset:
    def test_rejects_duplicate_names(self):
        with pytest.raises(ValueError, match="duplicate"):
            make_dataset([[1.0, 2.0]], names=["A", "A"])

    def test_rejects_missing_values(self):
        with pytest.raises(ValueError, match="non-finite"):
            make_dataset([[1.0, np.nan]])


class TestQuantileGrid:
    def test_basic(self):
        g = QuantileGrid.from_taus([0.3, 0.5, 0.7])
        assert g.m == 3
        assert g.xi1[1] == pytest.approx(0.0)
        assert g.constants[0].tau == 0.3

    def test_rejects_unsorted_and_out_of_range(self):
        with pytest.raises(ValueError):
            QuantileGrid.from_taus([0.5, 0.3])
        with pytest.raises(ValueError):
            QuantileGrid.from_taus([0.0, 0.5])
        with pytest.raises(ValueError):
            QuantileGrid.from_taus([])


class TestPriorConfig:
    def test_defaults(self):
        p = PriorConfig()
        assert (p.a0, p.b0, p.a1, p.b1) == (1.0, 1.0, 1.0, 1.0)
        assert p.sigma_beta2 == 10.0
        assert p.fix_t is None

    def test_validation(self):
        with pytest.raises(ValueError):
            PriorConfig(a0=0.0)
        with pytest.raises(ValueError):
            PriorConfig(fix_t=-1.0)


class TestBuildNodeProblem:
    def setup_method(self):
        rng = np.random.default_rng(2)
        self.data = standardize(make_dataset(rng.standard_normal((30, 3))))

    def test_middle_node(self):
        prob = build_node_problem(self.data, 2)
        assert prob.predictor_map == (1, 3)
        assert np.all(prob.design[:, 0] == 1.0)
        assert np.allclose(prob.design[:, 1], self.data.values[:, 0])
        assert np.allclose(prob.design[:, 2], self.data.values[:, 2])
        assert np.allclose(prob.response, self.data.values[:, 1])

    def test_two_column_dataset(self):
        rng = np.random.default_rng(3)
        d = standardize(make_dataset(rng.standard_normal((20, 2))))
        prob = build_node_problem(d, 1)
        assert prob.predictor_map == (2,)
        assert prob.design.shape == (20, 2)

    def test_response_mean_zero(self):
        prob = build_node_problem(self.data, 1)
        assert abs(prob.response.mean()) <= 1e-10

    def test_round_trip_covers_all_nodes(self):
        for k in (1, 2, 3):
            prob = build_node_problem(self.data, k)
            assert set(prob.predictor_map) | {k} == {1, 2, 3}

    def test_requires_standardized_and_range(self):
        raw = make_dataset(np.random.default_rng(4).standard_normal((10, 3)))
        with pytest.raises(ValueError, match="standardized"):
            build_node_problem(raw, 1)
        with pytest.raises(ValueError, match="out of range"):
            build_node_problem(self.data, 4)


class TestStateContainers:
    def setup_method(self):
        rng = np.random.default_rng(5)
        self.data = standardize(make_dataset(rng.standard_normal((25, 4))))
        self.problem = build_node_problem(self.data, 1)
        self.grid = QuantileGrid.from_taus([0.3, 0.7])
        self.priors = PriorConfig()

    def test_mcmc_init_and_invariants(self):
        s = init_mcmc_state(self.problem, self.grid, self.priors)
        assert s.beta.shape == (2, 4)
        assert np.all(s.indicators == 1)
        assert s.pi == 0.5 and s.t == 1.0
        s.validate()

    def test_mcmc_state_serialization_roundtrip(self):
        rng = np.random.default_rng(6)
        s = init_mcmc_state(self.problem, self.grid, self.priors)
        s.beta = rng.standard_normal(s.beta.shape)
        s.v = rng.exponential(1.0, s.v.shape)
        s.pi, s.t = 0.325, 2.75
        restored = McmcState.from_dict(s.to_dict())
        assert np.array_equal(restored.beta, s.beta)
        assert np.array_equal(restored.v, s.v)
        assert restored.pi == s.pi and restored.t == s.t

    def test_vb_init_and_serialization_roundtrip(self):
        s = init_vb_state(self.problem, self.grid, self.priors)
        assert np.all(s.incl_prob == 0.5)
        assert np.allclose(np.diagonal(s.beta_cov, axis1=1, axis2=2), 10.0)
        assert s.expected_t(self.priors) == 1.0
        s.validate()
        restored = VariationalState.from_dict(s.to_dict())
        for name in ("beta_mean", "beta_cov", "incl_prob", "v_lam", "v_mu", "v_ev", "v_einv"):
            assert np.array_equal(getattr(restored, name), getattr(s, name))
        assert restored.pi_params == s.pi_params
        assert restored.t_params == s.t_params

    def test_vb_fix_t(self):
        s = init_vb_state(self.problem, self.grid, PriorConfig(fix_t=5.0))
        assert s.expected_t(PriorConfig(fix_t=5.0)) == 5.0

    def test_posterior_serialization_roundtrip(self):
        rng = np.random.default_rng(7)
        post = NeighborhoodPosterior(
            node_index=2, predictor_map=(1, 3, 4),
            incl_prob=rng.random(3), coef_mean=rng.standard_normal((2, 4)),
            coef_sd=rng.random((2, 4)), engine="vb",
            iterations=12, converged=True, final_metric=3.2e-7, wall_time=0.5)
        restored = NeighborhoodPosterior.from_dict(post.to_dict())
        assert restored.node_index == 2
        assert np.array_equal(restored.incl_prob, post.incl_prob)
        assert np.array_equal(restored.coef_mean, post.coef_mean)
        assert np.array_equal(restored.coef_sd, post.coef_sd)
        assert restored.final_metric == post.final_metric

    def test_checkpoint_through_json_is_lossless(self, tmp_path):
        from quantgraph.jsonio import dump_json, load_json
        rng = np.random.default_rng(8)
        s = init_mcmc_state(self.problem, self.grid, self.priors)
        s.beta = rng.standard_normal(s.beta.shape)
        s.v = rng.exponential(1.0, s.v.shape)
        path = tmp_path / "state.json"
        dump_json(s.to_dict(), path)
        restored = McmcState.from_dict(load_json(path))
        assert np.array_equal(restored.beta, s.beta)
        assert np.array_equal(restored.v, s.v)

    def test_posterior_rejects_bad_probabilities(self):
        with pytest.raises(ValueError):
            NeighborhoodPosterior(node_index=1, predictor_map=(2,),
                                  incl_prob=np.array([1.5]),
                                  coef_mean=np.zeros((1, 2)), engine="vb",
                                  iterations=1, converged=True,
                                  final_metric=0.0, wall_time=0.0)
