"""Gibbs sampler over (beta, indicators, v, pi, t) for one node's fit."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np

from .ald import LOG_ODDS_CLAMP, sample_tilted_ig_arrays
from .data import (McmcState, NeighborhoodPosterior, NodeProblem, PriorConfig,
                   QuantileGrid, init_mcmc_state)


@dataclass(frozen=True)
class McmcConfig:
    n_iterations: int = 10000
    burn_in: int = 4000
    thin: int = 1
    seed: int = 0
    v_method: str = "exact"

    def __post_init__(self):
        if self.n_iterations <= 0:
            raise ValueError("n_iterations must be positive")
        if not 0 <= self.burn_in < self.n_iterations:
            raise ValueError("burn_in must be nonnegative and below n_iterations")
        if self.thin <= 0:
            raise ValueError("thin must be positive")
        if self.v_method not in ("exact", "metropolis"):
            raise ValueError(f"v_method must be 'exact' or 'metropolis', got {self.v_method!r}")


def _masked_beta(state: McmcState) -> np.ndarray:
    mask = np.concatenate(([1.0], state.indicators.astype(float)))
    return state.beta * mask


def _fitted(state: McmcState, problem: NodeProblem) -> np.ndarray:
    # (m, n) fitted values under the current indicator configuration
    return _masked_beta(state) @ problem.design.T


def update_beta(state: McmcState, problem: NodeProblem, grid: QuantileGrid,
                priors: PriorConfig, rng) -> np.ndarray:
    """Draw the coefficient block of every quantile from its normal full
    conditional. Indicator-excluded columns carry no likelihood term, so the
    corresponding coefficients come out as fresh prior draws."""
    x = problem.design
    y = problem.response
    mask = np.concatenate(([1.0], state.indicators.astype(float)))
    xg = x * mask
    xi1 = grid.xi1
    xi2sq = grid.xi2 ** 2
    w = state.t / (state.v * xi2sq[:, None])                 # (m, n)
    ydelta = y[None, :] - xi1[:, None] * state.v             # (m, n)

    prec = np.einsum("ip,li,iq->lpq", xg, w, xg)
    prec += (state.t / priors.sigma_beta2) * np.eye(problem.n_coef)
    b = np.einsum("ip,li->lp", xg, w * ydelta)

    try:
        chol = np.linalg.cholesky(prec)
    except np.linalg.LinAlgError as exc:
        raise FloatingPointError("coefficient conditional is not positive definite; "
                                 "state is numerically corrupted") from exc
    mean = np.linalg.solve(prec, b[..., None])[..., 0]
    z = rng.standard_normal(size=mean.shape)
    # solve L' u = z gives u ~ N(0, prec^{-1})
    u = np.linalg.solve(np.swapaxes(chol, 1, 2), z[..., None])[..., 0]
    state.beta = mean + u
    return state.beta


def update_pi(state: McmcState, priors: PriorConfig, rng) -> float:
    """pi ~ Beta(a1 + sum I, P-1 - sum I + b1)."""
    s = int(state.indicators.sum())
    n_pred = state.indicators.shape[0]
    draw = float(rng.beta(priors.a1 + s, n_pred - s + priors.b1))
    # keep pi strictly inside (0, 1); a boundary draw would degenerate the
    # indicator log-odds
    state.pi = min(max(draw, 1e-300), 1.0 - 1e-16)
    return state.pi


def update_v(state: McmcState, problem: NodeProblem, grid: QuantileGrid, rng,
             method: str = "exact") -> np.ndarray:
    """Refresh every latent scale from its size-biased inverse-Gaussian
    conditional, independently across observations and quantiles."""
    xi1 = grid.xi1
    xi2sq = grid.xi2 ** 2
    r = problem.response[None, :] - _fitted(state, problem)
    lam = state.t * r ** 2 / xi2sq[:, None]
    psi = state.t * (2.0 + xi1 ** 2 / xi2sq)
    lam = np.maximum(lam, 1e-10)
    mu = np.sqrt(lam / psi[:, None])
    current = state.v if method == "metropolis" else None
    state.v = sample_tilted_ig_arrays(lam, mu, rng, current_v=current, method=method)
    return state.v


def update_t(state: McmcState, problem: NodeProblem, grid: QuantileGrid,
             priors: PriorConfig, rng) -> float:
    """t ~ Gamma(a0 + mn/2 + n, b0 + weighted residual sum / 2 + sum v).

    A no-op returning the fixed value when fix_t is set.
    """
    if priors.fix_t is not None:
        state.t = priors.fix_t
        return state.t
    m, n = grid.m, problem.n
    xi1 = grid.xi1
    xi2sq = grid.xi2 ** 2
    e = problem.response[None, :] - _fitted(state, problem) - xi1[:, None] * state.v
    a2 = priors.a0 + 0.5 * m * n + n
    b2 = priors.b0 + 0.5 * np.sum(e ** 2 / (state.v * xi2sq[:, None])) + np.sum(state.v)
    state.t = float(rng.gamma(a2, 1.0 / b2))
    return state.t


def update_indicators(state: McmcState, problem: NodeProblem, grid: QuantileGrid,
                      rng) -> np.ndarray:
    """Sweep the inclusion indicators in design-column order.

    Each toggle compares the weighted residual sums with I_j on and off while
    everything else (including beta_j itself) is held fixed, then draws
    I_j ~ Bernoulli(sigmoid(log pi/(1-pi) - (SSR_on - SSR_off)/2)).
    """
    n_pred = state.indicators.shape[0]
    if n_pred == 0:
        return state.indicators
    x = problem.design
    xi1 = grid.xi1
    xi2sq = grid.xi2 ** 2
    w = state.t / (state.v * xi2sq[:, None])
    e = problem.response[None, :] - _fitted(state, problem) - xi1[:, None] * state.v
    with np.errstate(divide="ignore"):   # boundary pi resolves through the clip
        log_prior_odds = np.log(state.pi) - np.log1p(-state.pi)
    u = rng.random(n_pred)
    for j in range(n_pred):
        col = j + 1
        delta = np.outer(state.beta[:, col], x[:, col])      # fit gain when included
        if state.indicators[j] == 1:
            e_on = e
            e_off = e + delta
        else:
            e_off = e
            e_on = e - delta
        dssr = np.sum(w * (e_on - e_off) * (e_on + e_off))
        log_odds = np.clip(log_prior_odds - 0.5 * dssr, -LOG_ODDS_CLAMP, LOG_ODDS_CLAMP)
        new = int(u[j] < 1.0 / (1.0 + np.exp(-log_odds)))
        if new != state.indicators[j]:
            e = e_on if new == 1 else e_off
            state.indicators[j] = new
    return state.indicators


def gibbs_sweep(state: McmcState, problem: NodeProblem, grid: QuantileGrid,
                priors: PriorConfig, rng, v_method: str = "exact") -> McmcState:
    """One full iteration in the fixed order beta, indicators, v, pi, t."""
    update_beta(state, problem, grid, priors, rng)
    update_indicators(state, problem, grid, rng)
    update_v(state, problem, grid, rng, method=v_method)
    update_pi(state, priors, rng)
    update_t(state, problem, grid, priors, rng)
    return state


def run_chain(problem: NodeProblem, grid: QuantileGrid, priors: PriorConfig,
              cfg: McmcConfig, rng=None, trace_path=None) -> NeighborhoodPosterior:
    """Run the Gibbs sampler and summarize the kept draws.

    Inclusion probabilities are post-burn-in indicator means; coefficient
    summaries are post-burn-in means with 2.5/97.5 percentile intervals.
    trace_path, when given, receives one CSV record per kept iteration.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    state = init_mcmc_state(problem, grid, priors)
    n_pred = problem.n_coef - 1
    kept = range(cfg.burn_in, cfg.n_iterations, cfg.thin)
    n_kept = len(kept)
    beta_draws = np.empty((n_kept, grid.m, problem.n_coef))
    ind_sum = np.zeros(n_pred)

    trace = None
    writer = None
    if trace_path is not None:
        trace = open(trace_path, "w", newline="")
        writer = csv.writer(trace)
        writer.writerow(["iteration"]
                        + [f"beta_{l}_{j}" for l in range(grid.m) for j in range(problem.n_coef)]
                        + [f"I_{j}" for j in range(n_pred)] + ["pi", "t"])

    start = time.perf_counter()
    kept_idx = 0
    try:
        for it in range(cfg.n_iterations):
            try:
                gibbs_sweep(state, problem, grid, priors, rng, v_method=cfg.v_method)
            except FloatingPointError as exc:
                raise FloatingPointError(f"iteration {it}: {exc}") from exc
            if it >= cfg.burn_in and (it - cfg.burn_in) % cfg.thin == 0:
                beta_draws[kept_idx] = state.beta
                ind_sum += state.indicators
                kept_idx += 1
                if writer is not None:
                    writer.writerow([it] + [repr(float(b)) for b in state.beta.ravel()]
                                    + [int(i) for i in state.indicators]
                                    + [repr(state.pi), repr(state.t)])
    finally:
        if trace is not None:
            trace.close()
    elapsed = time.perf_counter() - start

    return NeighborhoodPosterior(
        node_index=problem.node_index,
        predictor_map=problem.predictor_map,
        incl_prob=ind_sum / n_kept,
        coef_mean=beta_draws.mean(axis=0),
        coef_lower=np.percentile(beta_draws, 2.5, axis=0),
        coef_upper=np.percentile(beta_draws, 97.5, axis=0),
        engine="mcmc",
        iterations=cfg.n_iterations,
        converged=True,
        final_metric=None,
        wall_time=elapsed,
    )
