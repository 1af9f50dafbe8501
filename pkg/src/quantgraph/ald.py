"""Asymmetric-Laplace and latent-scale math shared by both inference engines.

Everything here is a pure function of its arguments (plus an explicit rng
where sampling is involved), so concurrent callers are safe as long as each
owns its rng.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Floor applied to the inverse-Gaussian shape parameter. A zero residual
# collapses the latent-scale conditional; the floor keeps its moments finite
# without measurably perturbing inference.
LAMBDA_FLOOR = 1e-10

LOG_ODDS_CLAMP = 700.0


@dataclass(frozen=True)
class MixtureConstants:
    """Constants of the normal scale-mixture representation at one quantile level.

    xi1 is zero exactly at tau = 0.5 and antisymmetric about it; xi2 attains
    its minimum 2*sqrt(2) there.
    """

    tau: float
    xi1: float
    xi2: float


@dataclass(frozen=True)
class TiltedIGParams:
    """Shape/mean pair of the size-biased inverse-Gaussian latent conditional.

    lam is clamped at LAMBDA_FLOOR so degenerate residuals cannot produce an
    improper density.
    """

    lam: float
    mu: float

    def __post_init__(self):
        if not (self.lam > 0 and np.isfinite(self.lam)):
            raise ValueError(f"lam must be a positive finite real, got {self.lam}")
        if not (self.mu > 0 and np.isfinite(self.mu)):
            raise ValueError(f"mu must be a positive finite real, got {self.mu}")
        if self.lam < LAMBDA_FLOOR:
            object.__setattr__(self, "lam", LAMBDA_FLOOR)


def _validate_tau(tau):
    if not (0.0 < tau < 1.0):
        raise ValueError(f"tau must lie in the open interval (0, 1), got {tau}")


def check_loss(z, tau):
    """Piecewise-linear quantile loss: z*tau for z >= 0, -(1-tau)*z otherwise.

    Accepts scalar or array z.
    """
    _validate_tau(tau)
    z = np.asarray(z, dtype=float)
    out = np.where(z >= 0, z * tau, -(1.0 - tau) * z)
    return float(out) if out.ndim == 0 else out


def mixture_constants(tau):
    """Closed-form mixture constants for one quantile level."""
    _validate_tau(tau)
    denom = tau * (1.0 - tau)
    return MixtureConstants(tau=float(tau), xi1=(1.0 - 2.0 * tau) / denom,
                            xi2=float(np.sqrt(2.0 / denom)))


def ald_log_density(u, tau, t):
    """Log density of the asymmetric Laplace law with inverse scale t.

    log f(u) = log t + log tau + log(1-tau) - t * check_loss(u, tau).
    """
    _validate_tau(tau)
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    return np.log(t) + np.log(tau) + np.log1p(-tau) - t * check_loss(u, tau)


def ald_cdf(u, tau, t):
    """Distribution function of the asymmetric Laplace law (closed form)."""
    _validate_tau(tau)
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    u = np.asarray(u, dtype=float)
    lower = tau * np.exp(t * (1.0 - tau) * np.minimum(u, 0.0))
    upper = 1.0 - (1.0 - tau) * np.exp(-t * tau * np.maximum(u, 0.0))
    out = np.where(u <= 0, lower, upper)
    return float(out) if out.ndim == 0 else out


def sample_ald(tau, t, rng, size=None):
    """Draw from the asymmetric Laplace law via its normal scale mixture.

    Draws v ~ Exponential(rate t) and z ~ N(0, 1), then returns
    xi1*v + xi2*sqrt(v/t)*z. With size=None a single float is returned.
    """
    c = mixture_constants(tau)
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    v = rng.exponential(1.0 / t, size=size)
    z = rng.standard_normal(size=size)
    out = c.xi1 * v + c.xi2 * np.sqrt(v / t) * z
    return float(out) if size is None else out


def inverse_gaussian_log_density(v, mu, lam):
    """Normalized log density of the inverse-Gaussian law with mean mu, shape lam."""
    v = np.asarray(v, dtype=float)
    if np.any(v <= 0):
        raise ValueError("v must be positive")
    if not (mu > 0 and lam > 0):
        raise ValueError(f"mu and lam must be positive, got mu={mu}, lam={lam}")
    out = 0.5 * (np.log(lam) - np.log(2.0 * np.pi) - 3.0 * np.log(v)) \
        - lam * (v - mu) ** 2 / (2.0 * mu ** 2 * v)
    return float(out) if out.ndim == 0 else out


def sample_inverse_gaussian(mu, lam, rng, size=None):
    """Inverse-Gaussian draws by the Michael-Schucany-Haas transform.

    mu and lam may be scalars or arrays broadcastable to `size`.
    """
    mu = np.asarray(mu, dtype=float)
    lam = np.asarray(lam, dtype=float)
    y = rng.standard_normal(size=size) ** 2
    x = mu + mu ** 2 * y / (2.0 * lam) \
        - (mu / (2.0 * lam)) * np.sqrt(4.0 * mu * lam * y + (mu * y) ** 2)
    # roundoff can push the small root to <= 0 for extreme parameter ratios
    x = np.maximum(x, np.finfo(float).tiny)
    u = rng.random(size=size)
    out = np.where(u <= mu / (mu + x), x, mu ** 2 / x)
    return float(out) if np.ndim(out) == 0 else out


def tilted_ig_moments(p: TiltedIGParams):
    """E(v) and E(1/v) of the density proportional to v * f_IG(v; mu, lam).

    That density is v^{-1/2} exp(-(chi/v + psi*v)/2) with chi = lam and
    psi = lam/mu^2 (the order-1/2 generalized inverse Gaussian); its moments
    are E(v) = sqrt(chi/psi) * (1 + 1/omega) and E(1/v) = sqrt(psi/chi) with
    omega = sqrt(chi*psi).
    """
    ev, einv = tilted_ig_moment_arrays(p.lam, p.mu)
    return float(ev), float(einv)


def tilted_ig_moment_arrays(lam, mu):
    """Vectorized tilted-IG moments; lam is clamped at LAMBDA_FLOOR."""
    lam = np.maximum(np.asarray(lam, dtype=float), LAMBDA_FLOOR)
    mu = np.asarray(mu, dtype=float)
    # omega = sqrt(chi*psi) = lam/mu, eta = sqrt(chi/psi) = mu
    ev = mu * (1.0 + mu / lam)
    einv = 1.0 / mu
    return ev, einv


def sample_tilted_ig(p: TiltedIGParams, rng, current_v=None, method="exact"):
    """One draw from the size-biased inverse-Gaussian conditional.

    method="exact" inverts an inverse-Gaussian draw (if Y ~ IG(1/mu, lam/mu^2)
    then 1/Y follows the target). method="metropolis" proposes
    v' ~ IG(mu, lam) and accepts with probability min(1, v'/current_v), the
    ratio implied by target = v * proposal density.
    """
    if method == "exact":
        y = sample_inverse_gaussian(1.0 / p.mu, p.lam / p.mu ** 2, rng)
        return 1.0 / y
    if method == "metropolis":
        if current_v is None or not current_v > 0:
            raise ValueError("metropolis sampling requires a positive current_v")
        proposal = sample_inverse_gaussian(p.mu, p.lam, rng)
        if rng.random() < proposal / current_v:
            return float(proposal)
        return float(current_v)
    raise ValueError(f"unknown method {method!r}; expected 'exact' or 'metropolis'")


def sample_tilted_ig_arrays(lam, mu, rng, current_v=None, method="exact"):
    """Vectorized counterpart of sample_tilted_ig for (m, n) parameter grids."""
    lam = np.maximum(np.asarray(lam, dtype=float), LAMBDA_FLOOR)
    mu = np.asarray(mu, dtype=float)
    if method == "exact":
        y = sample_inverse_gaussian(1.0 / mu, lam / mu ** 2, rng, size=lam.shape)
        return 1.0 / y
    if method == "metropolis":
        if current_v is None or np.any(np.asarray(current_v) <= 0):
            raise ValueError("metropolis sampling requires positive current_v")
        proposal = sample_inverse_gaussian(mu, lam, rng, size=lam.shape)
        accept = rng.random(size=lam.shape) < proposal / current_v
        return np.where(accept, proposal, current_v)
    raise ValueError(f"unknown method {method!r}; expected 'exact' or 'metropolis'")
