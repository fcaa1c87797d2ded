"""Relativistic Vlasov characteristics for electrons (+1) and positrons (-1).

In kinetic momentum v = xi - A(t, x) the characteristics of
h = s <v> - A0 are

    dx/dt = s v/<v>,        dv/dt = E + s (v/<v>) x B,

with E = grad A0 - dA/dt and B = curl A.  Ensembles are stored as arrays and
pushed with classical RK4, all particles at once.
"""
from dataclasses import dataclass, field
import logging

import numpy as np

from .emfield import fields_from_record, japanese_bracket

log = logging.getLogger(__name__)

__all__ = [
    "Particle", "ParticleEnsemble", "Trajectory", "characteristics_rhs", "rk4_push",
    "evolve_ensemble", "deposit_moments", "observable", "sample_ensemble",
    "hamiltonian", "trajectory_columns", "PhaseHistogramGrid",
]


@dataclass(frozen=True)
class Particle:
    x: np.ndarray
    v: np.ndarray
    weight: float = 1.0
    species: int = 1

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float).reshape(3))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float).reshape(3))
        if self.weight < 0:
            raise ValueError("weight must be nonnegative")
        if self.species not in (1, -1):
            raise ValueError("species must be +1 or -1")


@dataclass
class ParticleEnsemble:
    x: np.ndarray
    v: np.ndarray
    weight: np.ndarray
    species: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).reshape(-1, 3)
        self.v = np.asarray(self.v, dtype=float).reshape(-1, 3)
        self.weight = np.asarray(self.weight, dtype=float).reshape(-1)
        self.species = np.asarray(self.species, dtype=int).reshape(-1)
        n = self.x.shape[0]
        if not (self.v.shape[0] == self.weight.size == self.species.size == n):
            raise ValueError("particle arrays differ in length")
        if np.any(self.weight < 0):
            raise ValueError("weights must be nonnegative")
        if not np.all(np.isin(self.species, (1, -1))):
            raise ValueError("species must be +1 or -1")

    @classmethod
    def from_particles(cls, particles):
        particles = list(particles)
        if not particles:
            return cls(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0), np.zeros(0, dtype=int))
        return cls(np.array([p.x for p in particles]), np.array([p.v for p in particles]),
                   np.array([p.weight for p in particles]), np.array([p.species for p in particles]))

    def __len__(self):
        return self.weight.size

    @property
    def particles(self):
        return [Particle(self.x[i], self.v[i], float(self.weight[i]), int(self.species[i]))
                for i in range(len(self))]

    def total_weight(self, species=None):
        if species is None:
            return float(self.weight.sum())
        return float(self.weight[self.species == species].sum())

    def with_state(self, x, v):
        return ParticleEnsemble(x, v, self.weight, self.species)

    def copy(self):
        return ParticleEnsemble(self.x.copy(), self.v.copy(), self.weight.copy(), self.species.copy())


def hamiltonian(model, t, x, v, species):
    """h = s <v> - A0(t, x)."""
    return species * japanese_bracket(v) - model.evaluate(t, x).A0


def characteristics_rhs(model, t, x, v, species):
    """(dx/dt, dv/dt) for arrays x, v of shape (..., 3) and species (...)."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    s = np.asarray(species, dtype=float)[..., None]
    u = v / japanese_bracket(v)[..., None]
    fs = fields_from_record(model.evaluate(t, x))
    return s * u, fs.E + s * np.cross(u, fs.B)


def _rk4(model, t, x, v, s, dt, monitor=None):
    def rhs(tt, xx, vv):
        dx, dv = characteristics_rhs(model, tt, xx, vv, s)
        if monitor is not None:
            monitor.append(float(np.max(np.linalg.norm(dx, axis=-1), initial=0.0)))
        return dx, dv
    k1x, k1v = rhs(t, x, v)
    k2x, k2v = rhs(t + dt / 2, x + dt / 2 * k1x, v + dt / 2 * k1v)
    k3x, k3v = rhs(t + dt / 2, x + dt / 2 * k2x, v + dt / 2 * k2v)
    k4x, k4v = rhs(t + dt, x + dt * k3x, v + dt * k3v)
    return (x + dt / 6 * (k1x + 2 * k2x + 2 * k3x + k4x),
            v + dt / 6 * (k1v + 2 * k2v + 2 * k3v + k4v))


def rk4_push(model, particle, t, dt):
    """One RK4 step for a Particle or a ParticleEnsemble (dt may be negative)."""
    if isinstance(particle, Particle):
        x, v = _rk4(model, t, particle.x, particle.v, particle.species, dt)
        return Particle(x, v, particle.weight, particle.species)
    x, v = _rk4(model, t, particle.x, particle.v, particle.species, dt)
    return particle.with_state(x, v)


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    max_speed: float = 0.0

    @property
    def final(self):
        return self.states[-1]


def evolve_ensemble(model, ensemble, t0, t1, dt, record_every=None):
    """Push every particle from t0 to t1 (step shrunk to divide the interval).

    Records the start, every ``record_every`` steps, and the end.  The largest
    |dx/dt| seen at any RK4 stage is kept in ``Trajectory.max_speed``.
    """
    traj = Trajectory([t0], [ensemble])
    if t1 == t0 or len(ensemble) == 0:
        if t1 != t0:
            traj.times.append(t1)
            traj.states.append(ensemble)
        return traj
    if dt <= 0:
        raise ValueError("dt must be positive")
    nsteps = max(1, int(round(abs(t1 - t0) / dt)))
    h = (t1 - t0) / nsteps
    x, v, s = ensemble.x, ensemble.v, ensemble.species
    speeds = []
    for i in range(nsteps):
        x, v = _rk4(model, t0 + i * h, x, v, s, h, speeds)
        if record_every and (i + 1) % record_every == 0 and i + 1 != nsteps:
            traj.times.append(t0 + (i + 1) * h)
            traj.states.append(ensemble.with_state(x, v))
    traj.times.append(t1)
    traj.states.append(ensemble.with_state(x, v))
    traj.max_speed = max(speeds) if speeds else 0.0
    return traj


def sample_ensemble(f_in, n, species, seed, model=None, t=0.0, transverse_xi=(0.0, 0.0, 0.0)):
    """Equal-weight quasi-random particles drawn from f_in(x, v) on the active axes.

    Inactive positions are 0; inactive kinetic momenta are
    transverse_xi - A(t, x) so that the canonical transverse momentum matches
    the Dirac grid.
    """
    xs, vs = f_in.sample(n, seed)
    d = xs.shape[1]
    x = np.zeros((n, 3))
    x[:, :d] = xs
    v = np.tile(np.asarray(transverse_xi, dtype=float), (n, 1))
    if model is not None and d < 3:
        v[:, d:] -= model.evaluate(t, x).A[:, d:]
    v[:, :d] = vs
    return ParticleEnsemble(x, v, np.full(n, 1.0 / n), np.full(n, species, dtype=int))


def observable(ensemble, a, species):
    """sum over particles of the species of weight * a(x, v)."""
    sel = ensemble.species == species
    if not np.any(sel):
        return 0.0
    return float(np.sum(ensemble.weight[sel] * a(ensemble.x[sel], ensemble.v[sel])))


# ---------------------------------------------------------------------------
# deposition


@dataclass(frozen=True)
class PhaseHistogramGrid:
    """Uniform (x_1, v_1) node grid for cloud-in-cell phase-space histograms."""
    x_min: float
    x_max: float
    nx: int
    v_min: float
    v_max: float
    nv: int

    @property
    def x_nodes(self):
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def v_nodes(self):
        return np.linspace(self.v_min, self.v_max, self.nv)

    @property
    def dx(self):
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def dv(self):
        return (self.v_max - self.v_min) / (self.nv - 1)


def _cic_weights(coord, lo, h, n):
    """Left node index, right-node fraction and an inside mask."""
    s = (np.asarray(coord, dtype=float) - lo) / h
    inside = (s >= 0) & (s <= n - 1)
    i = np.clip(np.floor(s), 0, n - 2).astype(int)
    return i, np.where(inside, s - i, 0.0), inside


def deposit_moments(ensemble, grid, hist=None):
    """Cloud-in-cell deposition of rho and J on the spatial grid's active axes
    (non-periodic, nodes at ``grid.axis``), and optionally of f_pm on a
    PhaseHistogramGrid over (x_1, v_1).

    rho = sum w delta(x - x_i),  J = sum s w (v/<v>) delta(x - x_i).  Particles
    outside the grid go to an overflow total (with a warning).
    """
    d = grid.d
    h = grid.spacing
    lo = grid.axis[0]
    n = grid.n
    rho = np.zeros(grid.shape)
    J = np.zeros((3,) + grid.shape)
    idx, fr, inside = [], [], np.ones(len(ensemble), dtype=bool)
    for k in range(d):
        i, f, ok = _cic_weights(ensemble.x[:, k], lo, h, n)
        idx.append(i)
        fr.append(f)
        inside &= ok
    w = ensemble.weight
    u = ensemble.v / japanese_bracket(ensemble.v)[:, None]
    cur = w[:, None] * u
    overflow = float(w[~inside].sum())
    if overflow > 0:
        log.warning("%.3g of the particle weight lies outside the deposition grid", overflow)
    # each species' current is accumulated on its own so that mirrored
    # electron/positron ensembles cancel exactly
    Jpm = {1: np.zeros_like(J), -1: np.zeros_like(J)}
    for corner in np.ndindex(*([2] * d)):
        node = tuple(idx[k][inside] + corner[k] for k in range(d))
        share = np.ones(int(inside.sum()))
        for k in range(d):
            share = share * (fr[k][inside] if corner[k] else 1.0 - fr[k][inside])
        np.add.at(rho, node, share * w[inside])
        for s in (1, -1):
            sel = ensemble.species[inside] == s
            sub = tuple(a[sel] for a in node)
            for c in range(3):
                np.add.at(Jpm[s][c], sub, share[sel] * cur[inside, c][sel])
    J = Jpm[1] - Jpm[-1]
    cell = grid.cell_volume
    out = {"rho": rho / cell, "J": J / cell, "overflow": overflow}
    if hist is not None:
        for s, key in ((1, "f_plus"), (-1, "f_minus")):
            f = np.zeros((hist.nx, hist.nv))
            sel = ensemble.species == s
            ix, fx, okx = _cic_weights(ensemble.x[sel, 0], hist.x_min, hist.dx, hist.nx)
            iv, fv, okv = _cic_weights(ensemble.v[sel, 0], hist.v_min, hist.dv, hist.nv)
            ok = okx & okv
            ws = ensemble.weight[sel][ok]
            for cx in (0, 1):
                for cv in (0, 1):
                    share = (fx[ok] if cx else 1 - fx[ok]) * (fv[ok] if cv else 1 - fv[ok])
                    np.add.at(f, (ix[ok] + cx, iv[ok] + cv), share * ws)
            out[key] = f / (hist.dx * hist.dv)
    return out


def trajectory_columns(traj):
    """Long-format columns t, particle, x1..x3, v1..v3, weight, species."""
    cols = {k: [] for k in ("t", "particle", "x1", "x2", "x3", "v1", "v2", "v3", "weight", "species")}
    for t, ens in zip(traj.times, traj.states):
        n = len(ens)
        cols["t"].append(np.full(n, float(t)))
        cols["particle"].append(np.arange(n))
        for k in range(3):
            cols[f"x{k + 1}"].append(ens.x[:, k])
            cols[f"v{k + 1}"].append(ens.v[:, k])
        cols["weight"].append(ens.weight)
        cols["species"].append(ens.species)
    return {k: np.concatenate(v) if v else np.zeros(0) for k, v in cols.items()}
