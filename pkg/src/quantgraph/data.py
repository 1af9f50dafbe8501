"""Datasets, per-node regression views, priors, and latent-state containers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ald import mixture_constants

STANDARDIZE_TOL = 1e-10


@dataclass
class Dataset:
    """An n x P numeric matrix with named columns.

    Immutable by convention once constructed; `standardized` records whether
    columns have been centered and scaled.
    """

    values: np.ndarray
    column_names: list[str]
    standardized: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("values must be a 2-d matrix")
        if len(self.column_names) != self.values.shape[1]:
            raise ValueError("column_names length must match the number of columns")
        if len(set(self.column_names)) != len(self.column_names):
            raise ValueError("duplicate column names")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("dataset contains non-finite values; missing data is not supported")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


def standardize(d: Dataset) -> Dataset:
    """Center each column to mean 0 and scale to sample standard deviation 1.

    Uses the n-1 denominator. Idempotent up to roundoff. Raises on constant
    columns, naming the offender.
    """
    if d.n < 2:
        raise ValueError("standardization requires at least 2 rows")
    sd = d.values.std(axis=0, ddof=1)
    zero = np.nonzero(sd == 0.0)[0]
    if zero.size:
        raise ValueError(f"zero variance in column {d.column_names[zero[0]]!r}; "
                         "constant columns cannot be standardized")
    vals = (d.values - d.values.mean(axis=0)) / sd
    return Dataset(values=vals, column_names=list(d.column_names), standardized=True)


@dataclass(frozen=True)
class QuantileGrid:
    """Strictly increasing quantile levels with their mixture constants."""

    taus: tuple
    constants: tuple

    @classmethod
    def from_taus(cls, taus) -> "QuantileGrid":
        taus = tuple(float(t) for t in taus)
        if len(taus) < 1:
            raise ValueError("at least one quantile level is required")
        if any(not (0.0 < t < 1.0) for t in taus):
            raise ValueError(f"quantile levels must lie in (0, 1), got {taus}")
        if any(b <= a for a, b in zip(taus, taus[1:])):
            raise ValueError(f"quantile levels must be strictly increasing, got {taus}")
        return cls(taus=taus, constants=tuple(mixture_constants(t) for t in taus))

    @property
    def m(self) -> int:
        return len(self.taus)

    @property
    def xi1(self) -> np.ndarray:
        return np.array([c.xi1 for c in self.constants])

    @property
    def xi2(self) -> np.ndarray:
        return np.array([c.xi2 for c in self.constants])


@dataclass(frozen=True)
class PriorConfig:
    """Hyperparameters: Gamma(a0, b0) on t, Beta(a1, b1) on the inclusion
    probability, and the slab variance scale of the coefficients.

    Fits are robust to sigma_beta2 over roughly 10..100 on standardized
    data. fix_t, when set, holds the scale parameter at that value and
    disables its update in both engines.
    """

    a0: float = 1.0
    b0: float = 1.0
    a1: float = 1.0
    b1: float = 1.0
    sigma_beta2: float = 10.0
    fix_t: float | None = None

    def __post_init__(self):
        for name in ("a0", "b0", "a1", "b1", "sigma_beta2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.fix_t is not None and not self.fix_t > 0:
            raise ValueError(f"fix_t must be positive when set, got {self.fix_t}")


@dataclass(frozen=True)
class NodeProblem:
    """One node's regression view: response = column k, design = intercept
    followed by the remaining variables in original index order.

    node_index and predictor_map use 1-based original variable indices.
    """

    node_index: int
    response: np.ndarray
    design: np.ndarray
    predictor_map: tuple

    def __post_init__(self):
        if self.design.ndim != 2 or self.design.shape[0] != self.response.shape[0]:
            raise ValueError("design and response row counts differ")
        if not np.all(self.design[:, 0] == 1.0):
            raise ValueError("design column 1 must be the intercept of ones")
        if len(self.predictor_map) != self.design.shape[1] - 1:
            raise ValueError("predictor_map must cover the non-intercept design columns")
        if self.node_index in self.predictor_map:
            raise ValueError("response column must not appear in the design")

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def n_coef(self) -> int:
        return self.design.shape[1]


def build_node_problem(d: Dataset, k: int) -> NodeProblem:
    """Regression view for node k (1-based) of a standardized dataset."""
    if not d.standardized:
        raise ValueError("dataset must be standardized before building node problems")
    if not 1 <= k <= d.p:
        raise ValueError(f"node index {k} out of range 1..{d.p}")
    others = [j for j in range(d.p) if j != k - 1]
    design = np.column_stack([np.ones(d.n)] + [d.values[:, j] for j in others])
    return NodeProblem(node_index=k,
                       response=d.values[:, k - 1].copy(),
                       design=design,
                       predictor_map=tuple(j + 1 for j in others))


@dataclass
class McmcState:
    """One Gibbs configuration: coefficients (m x P, intercept included),
    inclusion indicators, inclusion probability, scale t, and latents v (m x n)."""

    beta: np.ndarray
    indicators: np.ndarray
    pi: float
    t: float
    v: np.ndarray

    def validate(self):
        if not (0.0 < self.pi < 1.0):
            raise ValueError(f"pi must lie in (0, 1), got {self.pi}")
        if not self.t > 0:
            raise ValueError(f"t must be positive, got {self.t}")
        if not np.all(self.v > 0):
            raise ValueError("all latent v entries must be positive")

    def to_dict(self) -> dict:
        return {
            "beta": self.beta.tolist(),
            "indicators": [int(i) for i in self.indicators],
            "pi": self.pi,
            "t": self.t,
            "v": self.v.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "McmcState":
        return cls(beta=np.array(d["beta"], dtype=float),
                   indicators=np.array(d["indicators"], dtype=np.int64),
                   pi=float(d["pi"]), t=float(d["t"]),
                   v=np.array(d["v"], dtype=float))


def init_mcmc_state(problem: NodeProblem, grid: QuantileGrid, priors: PriorConfig) -> McmcState:
    """Neutral start: beta = 0, all indicators on, pi = 0.5, t at its prior
    mean (or fix_t), v = 1."""
    m, p = grid.m, problem.n_coef
    t0 = priors.fix_t if priors.fix_t is not None else priors.a0 / priors.b0
    return McmcState(beta=np.zeros((m, p)),
                     indicators=np.ones(p - 1, dtype=np.int64),
                     pi=0.5, t=float(t0),
                     v=np.ones((m, problem.n)))


@dataclass
class VariationalState:
    """Factorized posterior parameters: per-quantile Gaussian coefficient
    blocks, Bernoulli inclusion probabilities, Beta and Gamma hyperfactors,
    and the latent-scale factor with cached first and inverse moments."""

    beta_mean: np.ndarray      # (m, P)
    beta_cov: np.ndarray       # (m, P, P)
    incl_prob: np.ndarray      # (P-1,)
    pi_params: tuple           # (a, b) of the Beta factor
    t_params: tuple            # (a2, b2) of the Gamma factor
    v_lam: np.ndarray          # (m, n)
    v_mu: np.ndarray           # (m, n)
    v_ev: np.ndarray           # (m, n) cached E(v)
    v_einv: np.ndarray         # (m, n) cached E(1/v)

    def expected_t(self, priors: PriorConfig) -> float:
        if priors.fix_t is not None:
            return priors.fix_t
        a2, b2 = self.t_params
        return a2 / b2

    def validate(self):
        if np.any(self.incl_prob < 0) or np.any(self.incl_prob > 1):
            raise ValueError("inclusion probabilities must lie in [0, 1]")
        if np.any(self.v_ev * self.v_einv < 1.0 - 1e-12):
            raise ValueError("cached moments violate E(v)*E(1/v) >= 1")

    def to_dict(self) -> dict:
        return {
            "beta_mean": self.beta_mean.tolist(),
            "beta_cov": self.beta_cov.tolist(),
            "incl_prob": self.incl_prob.tolist(),
            "pi_params": list(self.pi_params),
            "t_params": list(self.t_params),
            "v_lam": self.v_lam.tolist(),
            "v_mu": self.v_mu.tolist(),
            "v_ev": self.v_ev.tolist(),
            "v_einv": self.v_einv.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VariationalState":
        return cls(beta_mean=np.array(d["beta_mean"], dtype=float),
                   beta_cov=np.array(d["beta_cov"], dtype=float),
                   incl_prob=np.array(d["incl_prob"], dtype=float),
                   pi_params=tuple(float(x) for x in d["pi_params"]),
                   t_params=tuple(float(x) for x in d["t_params"]),
                   v_lam=np.array(d["v_lam"], dtype=float),
                   v_mu=np.array(d["v_mu"], dtype=float),
                   v_ev=np.array(d["v_ev"], dtype=float),
                   v_einv=np.array(d["v_einv"], dtype=float))


def init_vb_state(problem: NodeProblem, grid: QuantileGrid, priors: PriorConfig) -> VariationalState:
    """Neutral start: p_j = 0.5, zero coefficient means with prior covariance,
    E(t) at its prior mean (or fix_t), E(1/v) = 1.

    The Beta factor is initialized self-consistently with p_j = 0.5 so the
    first indicator sweep sees a defined E(log pi/(1-pi)). The coordinate
    ascent driver warms up the beta/v/t factors before touching the
    indicators; updating p_j straight from this state, with its uncalibrated
    likelihood weights, drops strong predictors into an absorbing null
    optimum (an excluded coefficient reverts to the wide slab prior, whose
    second moment then dominates the inclusion odds forever).
    """
    m, p, n = grid.m, problem.n_coef, problem.n
    t0 = priors.fix_t if priors.fix_t is not None else priors.a0 / priors.b0
    n_pred = p - 1
    incl = np.full(n_pred, 0.5)
    cov = np.broadcast_to(np.eye(p) * (priors.sigma_beta2 / t0), (m, p, p)).copy()
    ones = np.ones((m, n))
    return VariationalState(
        beta_mean=np.zeros((m, p)),
        beta_cov=cov,
        incl_prob=incl,
        pi_params=(priors.a1 + 0.5 * n_pred, priors.b1 + 0.5 * n_pred),
        t_params=(priors.a0, priors.b0),
        v_lam=ones.copy(), v_mu=ones.copy(),
        v_ev=2.0 * ones, v_einv=ones.copy(),
    )


@dataclass
class NeighborhoodPosterior:
    """Summary of one node's fit: inclusion probabilities aligned with
    predictor_map, per-quantile coefficient summaries, and run diagnostics.

    coef_lower/coef_upper hold 2.5/97.5 posterior percentiles for the MCMC
    engine; coef_sd holds marginal standard deviations for the VB engine.
    """

    node_index: int
    predictor_map: tuple
    incl_prob: np.ndarray
    coef_mean: np.ndarray                 # (m, P)
    engine: str
    iterations: int
    converged: bool
    final_metric: float | None
    wall_time: float
    coef_lower: np.ndarray | None = None  # (m, P) mcmc only
    coef_upper: np.ndarray | None = None  # (m, P) mcmc only
    coef_sd: np.ndarray | None = None     # (m, P) vb only

    def __post_init__(self):
        if np.any(self.incl_prob < 0) or np.any(self.incl_prob > 1):
            raise ValueError("inclusion probabilities must lie in [0, 1]")

    def to_dict(self) -> dict:
        d = {
            "node_index": self.node_index,
            "predictor_map": list(self.predictor_map),
            "incl_prob": self.incl_prob.tolist(),
            "coef_mean": self.coef_mean.tolist(),
            "engine": self.engine,
            "iterations": self.iterations,
            "converged": self.converged,
            "final_metric": self.final_metric,
        }
        if self.coef_lower is not None:
            d["coef_lower"] = self.coef_lower.tolist()
            d["coef_upper"] = self.coef_upper.tolist()
        if self.coef_sd is not None:
            d["coef_sd"] = self.coef_sd.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict, wall_time: float = 0.0) -> "NeighborhoodPosterior":
        opt = {}
        if "coef_lower" in d:
            opt["coef_lower"] = np.array(d["coef_lower"], dtype=float)
            opt["coef_upper"] = np.array(d["coef_upper"], dtype=float)
        if "coef_sd" in d:
            opt["coef_sd"] = np.array(d["coef_sd"], dtype=float)
        return cls(node_index=int(d["node_index"]),
                   predictor_map=tuple(int(j) for j in d["predictor_map"]),
                   incl_prob=np.array(d["incl_prob"], dtype=float),
                   coef_mean=np.array(d["coef_mean"], dtype=float),
                   engine=d["engine"], iterations=int(d["iterations"]),
                   converged=bool(d["converged"]),
                   final_metric=d["final_metric"], wall_time=wall_time, **opt)
