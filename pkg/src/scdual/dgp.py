"""Simulation designs: two-way models with AR(1) or random-walk shocks, their
50/50 mixture, and an interactive fixed effects model with a decaying factor
spectrum.

Every design returns the observed panel together with the latent objects
(heterogeneity, shocks, propensities, conditional means) needed by the
oracle computations in :mod:`scdual.theory`.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np
from scipy.special import expit

from . import _kernels
from .data import PanelDataset
from .errors import RangeError

KINDS = ("TwoWayAR", "TwoWayRW", "Mixture", "InteractiveFE")
_ALIASES = {"ar": "TwoWayAR", "rw": "TwoWayRW", "mixture": "Mixture", "mix": "Mixture", "ife": "InteractiveFE"}

# independent random streams; ids are part of the reproducibility contract
_STREAMS = {"eta": 1, "innov": 2, "nu": 3, "assign": 4, "factor": 5, "init": 6}


@dataclass(frozen=True)
class DgpSpec:
    kind: str = "TwoWayAR"
    n: int = 400
    t0: int = 8
    k_post: int = 5
    tau: float = 1.0
    sigma_eta2: float = 1.0
    rho: float = 0.5
    sigma_ar2: float = 1.0
    sigma_rw2: float = 0.125
    beta_ar_t0: float = 0.5
    beta_ar_t0m1: float = 0.25
    beta_rw_t0: float = 0.1
    sigma_nu2: float = 0.25
    beta_eta_ar: float = 1.0
    beta_eta_rw: float = 0.0
    alpha_c: float = 0.0
    lambda_t: Optional[tuple] = None
    kappa: float = 4.0
    f_dim: int = 4
    sigma_ife2: float = 1.0

    def __post_init__(self):
        kind = _ALIASES.get(str(self.kind).lower(), self.kind)
        if kind not in KINDS:
            raise ValueError(f"unknown design {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "kind", kind)
        if self.n < 2 or self.t0 < 2 or self.k_post < 0:
            raise RangeError("need n >= 2, t0 >= 2, k_post >= 0")
        if kind in ("TwoWayAR", "Mixture") and not abs(self.rho) < 1:
            raise ValueError("|rho| must be < 1 for AR shocks")
        for name in ("sigma_eta2", "sigma_ar2", "sigma_rw2", "sigma_ife2"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.sigma_nu2 < 0:
            raise ValueError("sigma_nu2 must be nonnegative")
        if kind == "InteractiveFE" and not self.kappa > 1:
            raise ValueError("kappa must exceed 1")
        if self.lambda_t is not None:
            lam = tuple(float(v) for v in self.lambda_t)
            if len(lam) != self.n_periods:
                raise ValueError(f"lambda_t has {len(lam)} entries, expected {self.n_periods}")
            object.__setattr__(self, "lambda_t", lam)

    @property
    def n_periods(self) -> int:
        return self.t0 + self.k_post + 1

    def lambdas(self) -> np.ndarray:
        return np.zeros(self.n_periods) if self.lambda_t is None else np.asarray(self.lambda_t)

    def replace(self, **kw) -> "DgpSpec":
        d = self.to_dict()
        if ("t0" in kw or "k_post" in kw) and "lambda_t" not in kw:
            d["lambda_t"] = None
        d.update(kw)
        return DgpSpec(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["lambda_t"] is not None:
            d["lambda_t"] = list(d["lambda_t"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DgpSpec":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown DgpSpec fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "DgpSpec":
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        return cls.from_dict(d.get("dgp", d))


@dataclass
class Latent:
    eta: np.ndarray
    eps: np.ndarray  # time-varying shock process, n x T
    nu: np.ndarray
    theta: np.ndarray
    pi: np.ndarray
    mu: np.ndarray  # E[Y_{t0+1}(0) | eta, pretreatment data]
    mu_post: np.ndarray  # same for every post horizon, n x (k_post+1)
    y0: np.ndarray  # untreated potential outcomes, n x T
    component: Optional[np.ndarray] = None  # mixture: 0 = AR unit, 1 = RW unit
    psi: Optional[np.ndarray] = field(default=None, repr=False)  # IFE loadings d x T

    @property
    def y0_post(self) -> np.ndarray:
        return self.y0[:, -self.mu_post.shape[1] :]

    @property
    def noise(self) -> np.ndarray:
        """Outcome noise at horizon 0: ``Y_{t0+1}(0) - mu``."""
        return self.y0_post[:, 0] - self.mu

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = None if v is None else np.asarray(v).tolist()
        return out


@dataclass
class SimulatedPanel:
    panel: PanelDataset
    latent: Latent
    spec: DgpSpec

    def effect_path(self) -> np.ndarray:
        """Unit-level treatment effect by horizon (identical across units)."""
        return self.spec.tau * np.arange(self.spec.k_post + 1, dtype=float)

    def att(self) -> np.ndarray:
        """In-sample average effect on the treated at each post horizon."""
        D = self.panel.treated
        y1 = self.panel.post
        return (D / D.mean()) @ (y1 - self.latent.y0_post) / D.shape[0]


def _stream(seed, name: str) -> np.random.Generator:
    """Generator for one named stream. ``seed`` is an int or a tuple of ints
    such as ``(study_seed, replication)``."""
    key = [int(s) & 0xFFFFFFFFFFFFFFFF for s in np.atleast_1d(seed)]
    ss = np.random.SeedSequence(key + [_STREAMS[name]])
    return np.random.Generator(np.random.Philox(ss))


def _ar_shocks(innov_std, init_std, rho, sigma2, sigma2_init):
    first = np.sqrt(sigma2_init) * init_std
    innov = np.sqrt(sigma2) * innov_std
    return _kernels.ar1_recursion(first, innov, rho)


def _rw_shocks(innov_std, sigma2):
    # eps_0 = 0, so eps_1 is the first innovation
    innov = np.sqrt(sigma2) * innov_std
    return _kernels.ar1_recursion(innov[:, 0], innov, 1.0)


def simulate(spec: DgpSpec, seed: int) -> SimulatedPanel:
    """Draw one panel from ``spec``.

    Draws are generated per random stream in unit-major order, so increasing
    ``n`` (with everything else fixed) extends the sample without changing
    the first units.
    """
    if spec.kind == "InteractiveFE":
        return simulate_interactive(spec, seed)
    n, T, t0 = spec.n, spec.n_periods, spec.t0
    eta = np.sqrt(spec.sigma_eta2) * _stream(seed, "eta").standard_normal(n)
    innov_std = _stream(seed, "innov").standard_normal((n, T))
    init_std = _stream(seed, "init").standard_normal(n)
    nu = np.sqrt(spec.sigma_nu2) * _stream(seed, "nu").standard_normal(n)
    u_assign = _stream(seed, "assign").random(n)

    if spec.kind == "TwoWayAR":
        component = np.zeros(n, dtype=int)
    elif spec.kind == "TwoWayRW":
        component = np.ones(n, dtype=int)
    else:
        component = np.arange(n) % 2

    is_ar = component == 0
    eps = np.empty((n, T))
    if is_ar.any():
        eps[is_ar] = _ar_shocks(
            innov_std[is_ar], init_std[is_ar], spec.rho, spec.sigma_ar2, spec.sigma_ar2 / (1 - spec.rho**2)
        )
    if (~is_ar).any():
        eps[~is_ar] = _rw_shocks(innov_std[~is_ar], spec.sigma_rw2)

    e_t0 = eps[:, t0 - 1]
    e_t0m1 = eps[:, t0 - 2]
    theta_ar = spec.alpha_c + spec.beta_eta_ar * eta + spec.beta_ar_t0 * e_t0 + spec.beta_ar_t0m1 * e_t0m1 + nu
    theta_rw = spec.alpha_c + spec.beta_eta_rw * eta + spec.beta_rw_t0 * e_t0 + nu
    theta = np.where(is_ar, theta_ar, theta_rw)
    pi = expit(theta)
    D = u_assign < pi

    lam = spec.lambdas()
    y0 = eta[:, None] + lam[None, :] + eps
    horizons = np.arange(spec.k_post + 1)
    persistence = np.where(is_ar[:, None], spec.rho ** (horizons[None, :] + 1), 1.0)
    mu_post = eta[:, None] + lam[None, t0:] + persistence * e_t0[:, None]

    latent = Latent(eta, eps, nu, theta, pi, mu_post[:, 0].copy(), mu_post, y0, component)
    return SimulatedPanel(_observe(y0, D, spec), latent, spec)


def _observe(y0, D, spec):
    y = y0.copy()
    y[:, spec.t0 :] += np.outer(D, spec.tau * np.arange(spec.k_post + 1))
    return PanelDataset(y, D, spec.t0)


def factor_loadings(spec: DgpSpec, seed: int):
    """Factor path with singular values ``sqrt(t0) * j^(-kappa/2)``.

    Returns ``(psi_pre, psi_next, U, sv)``: ``psi_pre`` is ``f_dim x t0`` with
    random orthonormal singular vectors ``U`` (left) and the loading for
    every post period is ``psi_next = U @ xi`` with ``xi_j = sv_j / sqrt(t0)``.
    """
    d, t0 = spec.f_dim, spec.t0
    if d > t0:
        raise RangeError(f"f_dim={d} exceeds t0={t0}")
    rng = _stream(seed, "factor")
    U, _ = np.linalg.qr(rng.standard_normal((d, d)))
    V, _ = np.linalg.qr(rng.standard_normal((t0, d)))
    j = np.arange(1, d + 1, dtype=float)
    sv = np.sqrt(t0) * j ** (-spec.kappa / 2)
    psi_pre = (U * sv) @ V.T
    psi_next = U @ (sv / np.sqrt(t0))
    return psi_pre, psi_next, U, sv


def simulate_interactive(spec: DgpSpec, seed: int, psi: Optional[np.ndarray] = None) -> SimulatedPanel:
    """Interactive fixed effects panel ``Y = lambda_t + eta' psi_t + eps``.

    Selection loads on ``eta`` through ``U @ xi_sel`` with the same decay as
    the factor spectrum, plus the last two pretreatment shocks and ``nu``.
    ``psi`` (``d x T``) overrides the generated loadings.
    """
    n, T, t0 = spec.n, spec.n_periods, spec.t0
    if psi is None:
        psi_pre, psi_next, U, sv = factor_loadings(spec, seed)
        psi = np.hstack([psi_pre, np.repeat(psi_next[:, None], T - t0, axis=1)])
        alpha_eta = U @ (sv / np.sqrt(t0))
    else:
        psi = np.asarray(psi, dtype=float)
        if psi.ndim == 1:
            psi = psi[None, :]
        if psi.shape[1] != T:
            raise ValueError(f"psi must have {T} columns")
        alpha_eta = np.full(psi.shape[0], spec.beta_eta_ar)
    d = psi.shape[0]
    eta = _stream(seed, "eta").standard_normal((n, d))
    eps = np.sqrt(spec.sigma_ife2) * _stream(seed, "innov").standard_normal((n, T))
    nu = np.sqrt(spec.sigma_nu2) * _stream(seed, "nu").standard_normal(n)
    u_assign = _stream(seed, "assign").random(n)

    theta = spec.alpha_c + eta @ alpha_eta + spec.beta_ar_t0 * eps[:, t0 - 1] + spec.beta_ar_t0m1 * eps[:, t0 - 2] + nu
    pi = expit(theta)
    D = u_assign < pi
    lam = spec.lambdas()
    signal = eta @ psi + lam[None, :]
    y0 = signal + eps
    mu_post = signal[:, t0:]
    latent = Latent(eta, eps, nu, theta, pi, mu_post[:, 0].copy(), mu_post, y0, None, psi)
    return SimulatedPanel(_observe(y0, D, spec), latent, spec)
