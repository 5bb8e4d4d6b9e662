"""Entropy-balancing synthetic control weights.

The weights minimize

    (zeta^2/n) Pn[w log w] + 1/2 || Pn[w (1-D) phi] - Pn[(D/pi_bar) phi] ||_2^2

over w >= 0 with Pn[w (1-D)] = 1. They are computed from the convex dual

    G(alpha, beta) = Pn[(1-D) exp(alpha + phi'beta)] - Pn[D (alpha + phi'beta)]
                     + (pi_bar zeta^2 / 2n) ||beta||^2,

whose minimizer gives ``w_i = exp(alpha + phi_i'beta) / pi_bar`` on control
units. :func:`solve_primal_reference` works on the primal directly and exists
to cross-check the dual.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import _kernels
from .errors import ConvergenceError, ExpOverflowError, RangeError, ShapeError
from .features import FeatureMatrix

log = logging.getLogger(__name__)

MAX_EXPONENT = 700.0


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-9
    max_iter: int = 200
    armijo: float = 1e-4
    shrink: float = 0.5
    hessian_ridge: float = 1e-10
    max_exponent: float = MAX_EXPONENT

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown solver options: {sorted(unknown)}")
        return cls(**d)


@dataclass
class TiltedFit:
    """Result of the generic exponential-tilting Newton solve."""

    coef: np.ndarray
    eta: np.ndarray
    grad: np.ndarray
    objective: float
    iterations: int
    converged: bool
    ridge_added: bool = False


def _objective_parts(Z, c, t, coef, penalty):
    eta = Z @ coef
    loss, grad, hess = _kernels.tilted_grad_hess(Z, c, t, eta)
    loss = loss + 0.5 * np.sum(penalty * coef**2)
    grad = grad + penalty * coef
    hess = hess + np.diag(penalty)
    return eta, loss, grad, hess


def _overflowing(eta, c, max_exponent):
    # trial points only; accepted iterates are checked on both sides
    return np.any(eta[c > 0] > max_exponent)


def fit_tilted(Z, c, t, penalty, opts: SolverOptions = SolverOptions(), coef0=None) -> TiltedFit:
    """Minimize ``mean(c*exp(Z b) - t*(Z b)) + 0.5*sum(penalty*b^2)`` by damped Newton.

    ``c`` and ``t`` are nonnegative unit masses: ``(1-D, D)`` for the sample
    weights, ``(1-pi, pi)`` for population log-odds projections.
    """
    Z = np.ascontiguousarray(Z, dtype=float)
    c = np.ascontiguousarray(c, dtype=float)
    t = np.ascontiguousarray(t, dtype=float)
    penalty = np.asarray(penalty, dtype=float)
    q = Z.shape[1]
    if coef0 is None:
        coef = np.zeros(q)
        coef[0] = np.log(t.mean() / c.mean())
    else:
        coef = np.array(coef0, dtype=float)

    eta, loss, grad, hess = _objective_parts(Z, c, t, coef, penalty)
    if _overflowing(eta, c, opts.max_exponent):
        raise ExpOverflowError("initial point overflows")
    ridge_added = False
    for it in range(opts.max_iter + 1):
        gmax = np.max(np.abs(grad))
        if gmax <= opts.tol:
            return TiltedFit(coef, eta, grad, loss, it, True, ridge_added)
        if it == opts.max_iter:
            break
        step = _newton_direction(hess, grad, opts)
        if step is None:
            ridge_added = True
            bump = opts.hessian_ridge * max(np.trace(hess), 1e-300)
            while step is None:
                step = _newton_direction(hess + bump * np.eye(q), grad, opts)
                bump *= 10.0
        found, guarded = _line_search(Z, c, t, penalty, coef, step, loss, grad, opts, 1e-6)
        # a Newton step that only works when shrunk by 1e-6 is stretched
        # along weakly curved directions; damp the Hessian instead
        damp = 1e-6 * max(np.trace(hess) / q, 1e-300)
        while found is None and damp < 1e12 * max(np.trace(hess) / q, 1.0):
            step = -np.linalg.solve(hess + damp * np.eye(q), grad)
            found, g2 = _line_search(Z, c, t, penalty, coef, step, loss, grad, opts, 1e-6)
            guarded |= g2
            damp *= 100.0
        if found is None:
            found, g2 = _line_search(Z, c, t, penalty, coef, -grad, loss, grad, opts, 1e-20)
            guarded |= g2
        if found is None and guarded:
            # the index is pinned against the exponent guard: no overlap
            raise ExpOverflowError(
                f"theta reached {opts.max_exponent:g} at iteration {it}; treated and control features do not overlap"
            )
        if found is None:
            raise ConvergenceError(
                f"line search failed at iteration {it} (|grad|={gmax:.3g})",
                best=TiltedFit(coef, eta, grad, loss, it, False, ridge_added),
            )
        trial, t_eta, t_loss, t_grad, t_hess = found
        if np.max(np.abs(t_eta)) > opts.max_exponent:
            raise ExpOverflowError(
                f"|theta| exceeded {opts.max_exponent:g} at iteration {it + 1}; treated and control features do not overlap"
            )
        coef, eta, loss, grad, hess = trial, t_eta, t_loss, t_grad, t_hess
    raise ConvergenceError(
        f"no convergence in {opts.max_iter} iterations (|grad|={np.max(np.abs(grad)):.3g})",
        best=TiltedFit(coef, eta, grad, loss, opts.max_iter, False, ridge_added),
    )


def _line_search(Z, c, t, penalty, coef, step, loss, grad, opts, min_step):
    """Backtrack from a unit step; returns ``(parts or None, hit_guard)``."""
    slope = grad @ step
    if slope >= 0:  # numerically flat; fall back to steepest descent
        step = -grad
        slope = -(grad @ grad)
    gmax = np.max(np.abs(grad))
    a, guarded = 1.0, False
    while a >= min_step:
        trial = coef + a * step
        if _overflowing(Z @ trial, c, opts.max_exponent):
            guarded = True
        else:
            t_eta, t_loss, t_grad, t_hess = _objective_parts(Z, c, t, trial, penalty)
            if t_loss <= loss + opts.armijo * a * slope:
                return (trial, t_eta, t_loss, t_grad, t_hess), guarded
            # at the noise floor the Armijo test is meaningless; accept
            # the step if it does not increase the gradient
            if abs(t_loss - loss) <= 1e-15 * max(1.0, abs(loss)) and np.max(np.abs(t_grad)) < gmax:
                return (trial, t_eta, t_loss, t_grad, t_hess), guarded
        a *= opts.shrink
    return None, guarded


def _newton_direction(hess, grad, opts):
    try:
        cf = linalg.cho_factor(hess, lower=True, check_finite=False)
    except linalg.LinAlgError:
        return None
    d = np.diag(cf[0])
    if np.min(d) <= 1e-7 * np.max(d):
        # numerically rank deficient: Cholesky "succeeded" on noise
        return None
    return -linalg.cho_solve(cf, grad, check_finite=False)


@dataclass
class BalanceSolution:
    alpha: float
    beta: np.ndarray
    weights: np.ndarray
    imbalance: np.ndarray
    zeta: float
    kkt_residual: float
    iterations: int
    converged: bool
    theta: np.ndarray = field(repr=False, default=None)
    pi_bar: float = None

    @property
    def imbalance_norm(self) -> float:
        return float(np.linalg.norm(self.imbalance))

    def to_dict(self):
        return {
            "alpha": self.alpha,
            "beta": self.beta.tolist(),
            "zeta": self.zeta,
            "kkt_residual": self.kkt_residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "imbalance_l2": self.imbalance_norm,
        }


def _as_matrix(features, n):
    if features is None:
        return np.zeros((n, 0))
    X = features.values if isinstance(features, FeatureMatrix) else np.asarray(features, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X


def _check_inputs(features, treated):
    D = np.asarray(treated).astype(bool)
    X = _as_matrix(features, D.shape[0])
    if X.shape[0] != D.shape[0]:
        raise ShapeError(f"features have {X.shape[0]} rows, treated has {D.shape[0]}")
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")
    if D.all():
        raise ValueError("no control units")
    if not D.any():
        raise ValueError("no treated units")
    return X, D


def imbalance_of(weights, features, treated):
    """``Pn[w(1-D)phi] - Pn[(D/pi_bar) phi]`` for arbitrary weights."""
    X, D = _check_inputs(features, treated)
    n = D.shape[0]
    pi_bar = D.mean()
    return (weights * ~D) @ X / n - (D / pi_bar) @ X / n


def solve_dual(features, treated, zeta: float = 1.0, opts: SolverOptions = SolverOptions()) -> BalanceSolution:
    X, D = _check_inputs(features, treated)
    if zeta < 0:
        raise ValueError("zeta must be nonnegative")
    n, p = X.shape
    pi_bar = D.mean()
    Z = np.hstack([np.ones((n, 1)), X])
    c = (~D).astype(float)
    t = D.astype(float)
    penalty = np.r_[0.0, np.full(p, pi_bar * zeta**2 / n)]
    try:
        fit = fit_tilted(Z, c, t, penalty, opts)
    except ConvergenceError as exc:
        if exc.best is not None:
            exc.best = _to_solution(exc.best, X, D, zeta, pi_bar)
        raise
    if fit.ridge_added:
        msg = "Hessian was singular; a small ridge was added (collinear or zero-variance features)"
        if zeta == 0:
            warnings.warn(msg)
        log.debug(msg)
    return _to_solution(fit, X, D, zeta, pi_bar)


def _to_solution(fit: TiltedFit, X, D, zeta, pi_bar) -> BalanceSolution:
    n = D.shape[0]
    with np.errstate(over="ignore"):
        w = np.where(D, 0.0, np.exp(fit.eta) / pi_bar)
    imb = (w @ X) / n - (D / pi_bar) @ X / n
    return BalanceSolution(
        alpha=float(fit.coef[0]),
        beta=np.asarray(fit.coef[1:], dtype=float),
        weights=w,
        imbalance=imb,
        zeta=float(zeta),
        kkt_residual=float(np.max(np.abs(fit.grad))),
        iterations=fit.iterations,
        converged=fit.converged,
        theta=fit.eta,
        pi_bar=float(pi_bar),
    )


def uniform_weights(treated) -> np.ndarray:
    """Equal weights on controls, normalized so ``Pn[w(1-D)] = 1``."""
    D = np.asarray(treated).astype(bool)
    n0 = int((~D).sum())
    return np.where(D, 0.0, D.shape[0] / n0)


@dataclass
class KktReport:
    feature_residuals: np.ndarray
    intercept_residual: float

    @property
    def max_abs(self) -> float:
        vals = np.r_[self.feature_residuals, self.intercept_residual]
        return float(np.max(np.abs(vals)))


def kkt_report(solution: BalanceSolution, features, treated) -> KktReport:
    """First-order conditions of the dual evaluated at ``solution``.

    Recomputes the linear index from ``(alpha, beta)`` so a perturbed
    solution shows nonzero residuals.
    """
    X, D = _check_inputs(features, treated)
    n = D.shape[0]
    pi_bar = D.mean()
    theta = solution.alpha + X @ solution.beta
    r = np.where(D, 0.0, np.exp(theta)) - D
    feat = r @ X / n + pi_bar * solution.zeta**2 / n * solution.beta
    return KktReport(feat, float(r.mean()))


def dual_objective(alpha, beta, features, treated, zeta):
    X, D = _check_inputs(features, treated)
    n = D.shape[0]
    pi_bar = D.mean()
    theta = alpha + X @ np.asarray(beta, dtype=float)
    return float(
        np.mean(np.where(D, 0.0, np.exp(theta))) - np.mean(D * theta) + pi_bar * zeta**2 / (2 * n) * np.sum(np.square(beta))
    )


def primal_objective(weights, features, treated, zeta, entropy_weight=None):
    """Primal objective; ``entropy_weight`` overrides ``zeta**2``."""
    X, D = _check_inputs(features, treated)
    n = D.shape[0]
    w = np.asarray(weights, dtype=float)
    wc = w[~D]
    ent = np.sum(np.where(wc > 0, wc * np.log(np.where(wc > 0, wc, 1.0)), 0.0)) / n
    k = zeta**2 if entropy_weight is None else entropy_weight
    imb = imbalance_of(w, X, D)
    return float(k / n * ent + 0.5 * imb @ imb)


def solve_primal_reference(
    features,
    treated,
    zeta: float = 1.0,
    opts: SolverOptions = SolverOptions(),
    entropy_weight: float = None,
    max_iter: int = 200_000,
) -> BalanceSolution:
    """Direct minimization of the primal weight problem (test oracle).

    Entropic mirror descent started from uniform weights; it never touches
    the dual variables. ``entropy_weight`` replaces
    ``zeta**2`` as the entropy coefficient, which lets callers approximate
    ``zeta = 0`` with a tiny positive value. Limited to ``n <= 200``.
    """
    X, D = _check_inputs(features, treated)
    n = D.shape[0]
    if n > 200:
        raise RangeError(f"primal reference solver is limited to n <= 200 (got {n})")
    k = zeta**2 if entropy_weight is None else float(entropy_weight)
    pi_bar = D.mean()
    Xc = X[~D]
    target = (D / pi_bar) @ X / n
    best_x, _, it = _kernels.entropy_mirror(Xc, target, k, n, max_iter=max_iter)
    w = np.zeros(n)
    w[~D] = best_x
    imb = w @ X / n - target
    return BalanceSolution(
        alpha=float("nan"),
        beta=np.full(X.shape[1], np.nan),
        weights=w,
        imbalance=imb,
        zeta=float(zeta),
        kkt_residual=float("nan"),
        iterations=it,
        converged=it < max_iter,
        pi_bar=float(pi_bar),
    )

