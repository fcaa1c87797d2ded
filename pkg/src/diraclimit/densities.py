"""Initial phase-space densities f_in(x, v) on the active dimensions.

A density is a function of position ``x`` and kinetic momentum ``v``, both of
shape ``(..., d)``, normalised to unit mass over R^d x R^d.  It also reports a
bounding box (used as the quadrature domain for coherent-state nodes) and can
draw quasi-random samples (used for particle ensembles).
"""
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm, qmc

from .errors import ConfigurationError

__all__ = ["GaussianDensity", "UniformBoxDensity", "make_density", "sobol_points"]


def sobol_points(n, dim, seed):
    """``n`` scrambled Sobol points in [0, 1)^dim (deterministic for a seed)."""
    sampler = qmc.Sobol(d=dim, scramble=True, seed=np.random.default_rng(seed))
    m = int(np.ceil(np.log2(max(n, 1))))
    return sampler.random_base2(m)[:n]


def _as_vec(value, d, name):
    a = np.asarray(value, dtype=float).reshape(-1)
    if a.size == 1:
        a = np.full(d, a[0])
    if a.size != d or not np.all(np.isfinite(a)):
        raise ConfigurationError(f"{name} must have {d} finite components, got {value!r}")
    return a


@dataclass(frozen=True)
class GaussianDensity:
    """Product Gaussian with means (x0, v0) and standard deviations (sigma_x, sigma_v)."""
    x0: np.ndarray
    v0: np.ndarray
    sigma_x: np.ndarray
    sigma_v: np.ndarray

    @classmethod
    def create(cls, d, x0=0.0, v0=0.0, sigma_x=0.3, sigma_v=0.3):
        sx, sv = _as_vec(sigma_x, d, "sigma_x"), _as_vec(sigma_v, d, "sigma_v")
        if np.any(sx <= 0) or np.any(sv <= 0):
            raise ConfigurationError("Gaussian widths must be positive")
        return cls(_as_vec(x0, d, "x0"), _as_vec(v0, d, "v0"), sx, sv)

    @property
    def d(self):
        return self.x0.size

    def pdf(self, x, v):
        zx = (np.asarray(x) - self.x0) / self.sigma_x
        zv = (np.asarray(v) - self.v0) / self.sigma_v
        q = np.sum(zx * zx, axis=-1) + np.sum(zv * zv, axis=-1)
        c = (2 * np.pi) ** self.d * np.prod(self.sigma_x) * np.prod(self.sigma_v)
        return np.exp(-0.5 * q) / c

    def bounds(self, nsig=4.0):
        lo = np.concatenate([self.x0 - nsig * self.sigma_x, self.v0 - nsig * self.sigma_v])
        hi = np.concatenate([self.x0 + nsig * self.sigma_x, self.v0 + nsig * self.sigma_v])
        return lo, hi

    def sample(self, n, seed):
        """Quasi-random samples via inverse normal CDF of Sobol points."""
        u = sobol_points(n, 2 * self.d, seed)
        z = norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
        d = self.d
        return self.x0 + self.sigma_x * z[:, :d], self.v0 + self.sigma_v * z[:, d:]


@dataclass(frozen=True)
class UniformBoxDensity:
    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def create(cls, d, lo, hi):
        lo, hi = _as_vec(lo, 2 * d, "lo"), _as_vec(hi, 2 * d, "hi")
        if np.any(hi <= lo):
            raise ConfigurationError("box must have hi > lo")
        return cls(lo, hi)

    @property
    def d(self):
        return self.lo.size // 2

    def pdf(self, x, v):
        z = np.concatenate([np.asarray(x, dtype=float), np.asarray(v, dtype=float)], axis=-1)
        inside = np.all((z >= self.lo) & (z <= self.hi), axis=-1)
        return inside / np.prod(self.hi - self.lo)

    def bounds(self, nsig=None):
        return self.lo.copy(), self.hi.copy()

    def sample(self, n, seed):
        z = self.lo + (self.hi - self.lo) * sobol_points(n, 2 * self.d, seed)
        return z[:, :self.d], z[:, self.d:]


def make_density(d, spec):
    """Build a density from a config mapping ``{"kind": "gaussian", ...}``."""
    params = dict(spec)
    kind = params.pop("kind", "gaussian")
    try:
        if kind == "gaussian":
            return GaussianDensity.create(d, **params)
        if kind == "uniform_box":
            return UniformBoxDensity.create(d, **params)
    except TypeError as exc:
        raise ConfigurationError(f"bad f_in parameters: {exc}") from None
    raise ConfigurationError(f"unknown f_in kind {kind!r}; expected 'gaussian' or 'uniform_box'")
