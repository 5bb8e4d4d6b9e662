"""Theoretical objects computed numerically on known designs.

* effective number of periods: the two-way closed form and the SVD/ridge
  bound for factor models;
* population projections of the log-odds and the conditional mean, the
  product-form bias they imply, and the leading noise terms of the
  asymptotic expansion.

Population expectations are realized on a large simulated population.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .balancer import SolverOptions, fit_tilted
from .dgp import DgpSpec, SimulatedPanel, factor_loadings, simulate
from .features import build_features

METHODS = ("ClosedFormTwoWay", "SvdBound", "MonteCarloProjection")


@dataclass(frozen=True)
class EffectivePeriods:
    t_e: float
    approx_error2: float
    method: str

    @classmethod
    def from_error(cls, err2: float, method: str) -> "EffectivePeriods":
        err2 = float(err2)
        return cls(np.inf if err2 == 0 else 1.0 / err2, err2, method)


def effective_periods_two_way(v_eta: float, sigma2: float, t0: int) -> EffectivePeriods:
    """``1/T_e = sigma^2 V[eta] / (V[eta] t0 + sigma^2)``."""
    if v_eta < 0 or sigma2 < 0 or t0 < 1:
        raise ValueError("variances must be nonnegative and t0 >= 1")
    den = v_eta * t0 + sigma2
    err2 = 0.0 if den == 0 else sigma2 * v_eta / den
    return EffectivePeriods.from_error(err2, "ClosedFormTwoWay")


def _svd_terms(psi, psi_next):
    A = np.atleast_2d(np.asarray(psi, dtype=float))
    b = np.asarray(psi_next, dtype=float).ravel()
    if A.shape[0] != b.size:
        raise ValueError(f"psi has {A.shape[0]} rows but psi_next has {b.size} entries")
    U, d, _ = np.linalg.svd(A, full_matrices=True)
    d2 = np.zeros(A.shape[0])
    d2[: d.size] = d**2
    return d2, U.T @ b


def effective_periods_svd(psi, psi_next, sigma_op: float) -> EffectivePeriods:
    """Bound ``sigma_op * sum_j xi_j^2 / (d_j^2 + sigma_op)`` with ``xi = U' psi_next``.

    ``sigma_op`` is the operator norm of the noise covariance (a variance).
    Directions with ``d_j = 0`` and ``sigma_op = 0`` contribute ``xi_j^2``:
    the pretreatment path carries no information about them.
    """
    if sigma_op < 0:
        raise ValueError("sigma_op must be nonnegative")
    d2, xi = _svd_terms(psi, psi_next)
    den = d2 + sigma_op
    safe = np.where(den > 0, den, 1.0)
    terms = np.where(den > 0, sigma_op * xi**2 / safe, xi**2)
    return EffectivePeriods.from_error(terms.sum(), "SvdBound")


def ridge_oracle(psi, psi_next, sigma_op: float) -> float:
    """``min_x ||psi x - psi_next||^2 + sigma_op ||x||^2`` by dense least squares."""
    A = np.atleast_2d(np.asarray(psi, dtype=float))
    b = np.asarray(psi_next, dtype=float).ravel()
    m = A.shape[1]
    s = np.sqrt(sigma_op)
    stacked = np.vstack([A, s * np.eye(m)])
    rhs = np.r_[b, np.zeros(m)]
    x, *_ = np.linalg.lstsq(stacked, rhs, rcond=None)
    r = A @ x - b
    return float(r @ r + sigma_op * x @ x)


def growing_factor_periods(kappa: float, t0: int, sigma_op: float = 1.0, seed: int = 0) -> EffectivePeriods:
    """SVD bound for a factor path with ``t0`` factors and singular values
    ``sqrt(t0) j^(-kappa/2)``."""
    spec = DgpSpec("InteractiveFE", n=2, t0=t0, k_post=0, kappa=kappa, f_dim=t0)
    psi_pre, psi_next, _, _ = factor_loadings(spec, seed)
    return effective_periods_svd(psi_pre, psi_next, sigma_op)


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


@dataclass
class PopulationFit:
    """Projections fitted on a simulated population.

    Coefficients act on ``[1, phi]`` (``theta_tilde``, ``mu_tilde``) and on
    ``[1, phi, mu]`` (``theta_tilde_mu``; its last entry is ``beta_mu``).
    """

    theta_tilde: np.ndarray
    theta_tilde_mu: np.ndarray
    mu_tilde: np.ndarray
    e_pi: float
    bias: float
    u_mean: float
    u_sd: float
    u_max_abs: float
    foc_residual: float
    sample_size: int
    zeta: float
    experiment_n: int
    recipe: object = None

    @property
    def beta_mu(self) -> float:
        return float(self.theta_tilde_mu[-1])

    def evaluate(self, features: np.ndarray, mu: np.ndarray, theta: np.ndarray):
        """Unit-level ``theta_tilde``, ``theta_tilde_mu``, ``mu_tilde`` and ``u``."""
        Z = np.column_stack([np.ones(len(mu)), features])
        th = Z @ self.theta_tilde
        thm = np.column_stack([Z, mu]) @ self.theta_tilde_mu
        mt = Z @ self.mu_tilde
        u = np.expm1(thm - theta)
        return th, thm, mt, u

    def sample_bias(self, features, mu, theta, pi) -> float:
        th, thm, mt, u = self.evaluate(features, mu, theta)
        return float(np.mean(pi * (u + 1) / self.e_pi * (th - thm) * (mu - mt)))


def _weighted_lstsq(Z, y, w):
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(Z * sw[:, None], y * sw, rcond=None)
    return coef


def fit_population_objects(
    spec: DgpSpec,
    recipe=None,
    zeta: float = 1.0,
    population_n: int = 200_000,
    seed: int = 0,
    experiment_n: int | None = None,
    opts: SolverOptions = SolverOptions(),
) -> PopulationFit:
    """Fit the log-odds projections and the tilted outcome projection.

    The ridge on feature coefficients uses the experiment's ``(zeta, n)``;
    ``experiment_n`` defaults to ``spec.n``. Both log-odds projections reuse
    the balancer's Newton solver with unit masses ``(1 - pi, pi)``.
    """
    n_exp = spec.n if experiment_n is None else int(experiment_n)
    pop = simulate(spec.replace(n=population_n), seed)
    X = build_features(pop.panel, recipe).values
    lat = pop.latent
    pi, theta, mu = lat.pi, lat.theta, lat.mu
    e_pi = float(pi.mean())
    N, p = X.shape
    Z = np.column_stack([np.ones(N), X])
    ridge = np.full(p, e_pi * zeta**2 / n_exp)

    fit_t = fit_tilted(Z, 1 - pi, pi, np.r_[0.0, ridge], opts)
    Zm = np.column_stack([Z, mu])
    fit_m = fit_tilted(Zm, 1 - pi, pi, np.r_[0.0, ridge, 0.0], opts)
    w = pi * np.exp(fit_m.eta - theta)
    mu_coef = _weighted_lstsq(Z, mu, w)

    foc_ls = np.max(np.abs(Z.T @ (w * (mu - Z @ mu_coef)) / N))
    foc = max(np.max(np.abs(fit_t.grad)), np.max(np.abs(fit_m.grad)), foc_ls)
    u = np.expm1(fit_m.eta - theta)
    bias = float(np.mean(w / e_pi * (fit_t.eta - fit_m.eta) * (mu - Z @ mu_coef)))
    return PopulationFit(
        theta_tilde=fit_t.coef,
        theta_tilde_mu=fit_m.coef,
        mu_tilde=mu_coef,
        e_pi=e_pi,
        bias=bias,
        u_mean=float(u.mean()),
        u_sd=float(u.std()),
        u_max_abs=float(np.abs(u).max()),
        foc_residual=float(foc),
        sample_size=N,
        zeta=zeta,
        experiment_n=n_exp,
        recipe=recipe,
    )


def oracle_noise_terms(sim: SimulatedPanel, fit: PopulationFit):
    """The two noise averages of the expansion on the realized sample:

    ``Pn[(D - pi)/(1 - pi) (pi u + 1)/E[pi] eps]`` and ``Pn[pi u / E[pi] eps]``.
    """
    lat = sim.latent
    X = build_features(sim.panel, fit.recipe).values
    _, _, _, u = fit.evaluate(X, lat.mu, lat.theta)
    D = sim.panel.treated.astype(float)
    pi, eps = lat.pi, lat.noise
    first = np.mean((D - pi) / (1 - pi) * (pi * u + 1) / fit.e_pi * eps)
    second = np.mean(pi * u / fit.e_pi * eps)
    return float(first), float(second)


def oracle_bias(sim: SimulatedPanel, fit: PopulationFit) -> float:
    """Product-form bias evaluated on the realized sample."""
    lat = sim.latent
    X = build_features(sim.panel, fit.recipe).values
    return fit.sample_bias(X, lat.mu, lat.theta, lat.pi)
