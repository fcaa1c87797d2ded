"""Strang-split spectral solver for the epsilon-scaled Dirac equation

    i eps d/dt psi = [alpha.(-i eps grad - A) + beta - A0] psi

on a periodic box, for single spinors and for mixed states (weighted ensembles
of spinors).

Array layout: a spinor field is ``(4,) + (n,)*d``; a mixed state stores its
members as one array ``(M, 4) + (n,)*d`` so that all members are advanced by
the same vectorised FFTs.  Inactive directions (d < 3) carry the fixed
transverse momentum ``grid.transverse_xi``.
"""
from dataclasses import dataclass, field
import functools
import logging
import struct

import numpy as np
import scipy.fft as sfft

from .clifford import ALPHA, BETA, I4, alpha_dot, exp_i_alpha_dot
from .emfield import PotentialModel, japanese_bracket
from .errors import (ConfigurationError, DegenerateSpinorError, DimensionError,
                     MissingInputError, MixednessError)
from .symbol import PhasePoint, eval_symbol

log = logging.getLogger(__name__)

__all__ = [
    "SpatialGrid", "SpinorField", "MixedState", "DiagnosticsRecord",
    "make_coherent_state", "make_plane_wave", "sample_mixed_state", "coherent_nodes",
    "strang_step", "evolve", "diagnostics", "apply_hamiltonian",
    "write_dspn", "read_dspn", "REFERENCE_SPINOR",
]

REFERENCE_SPINOR = np.array([1.0, 0.0, 1.0, 0.0], dtype=complex) / np.sqrt(2.0)


def _is_power_of_two(n):
    return isinstance(n, (int, np.integer)) and n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class SpatialGrid:
    """Periodic grid on [-L/2, L/2)^d (cell-centred at the origin)."""
    d: int
    n: int
    box_length: float
    transverse_xi: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ConfigurationError(f"d must be 1, 2 or 3, got {self.d}")
        if not _is_power_of_two(self.n):
            raise ConfigurationError(f"n must be a power of two, got {self.n}")
        if not (np.isfinite(self.box_length) and self.box_length > 0):
            raise ConfigurationError(f"box_length must be positive, got {self.box_length}")
        txi = tuple(float(c) for c in self.transverse_xi)
        if len(txi) != 3:
            raise ConfigurationError("transverse_xi must have 3 components")
        object.__setattr__(self, "transverse_xi", txi)
        object.__setattr__(self, "box_length", float(self.box_length))

    @property
    def spacing(self):
        return self.box_length / self.n

    @property
    def shape(self):
        return (self.n,) * self.d

    @property
    def cell_volume(self):
        return self.spacing ** self.d

    @property
    def axis(self):
        return -0.5 * self.box_length + self.spacing * np.arange(self.n)

    def positions(self):
        """Node positions as 3-vectors, shape ``grid.shape + (3,)``."""
        mesh = np.meshgrid(*([self.axis] * self.d), indexing="ij")
        x = np.zeros(self.shape + (3,))
        for k in range(self.d):
            x[..., k] = mesh[k]
        return x

    def wavenumbers(self):
        """Angular wavenumbers per active axis, FFT order, shape ``(d,) + shape``."""
        k1 = 2 * np.pi * sfft.fftfreq(self.n, d=self.spacing)
        return np.array(np.meshgrid(*([k1] * self.d), indexing="ij"))

    def momenta(self, epsilon):
        """Canonical momenta xi = eps k (active) / transverse_xi (inactive), FFT order."""
        p = np.empty(self.shape + (3,))
        k = self.wavenumbers()
        for j in range(3):
            p[..., j] = epsilon * k[j] if j < self.d else self.transverse_xi[j]
        return p

    def max_momentum(self, epsilon):
        """Resolvable momentum bound pi eps / (2 dx)."""
        return np.pi * epsilon / (2.0 * self.spacing)

    @property
    def fft_axes(self):
        return tuple(range(-self.d, 0))


@dataclass
class SpinorField:
    grid: SpatialGrid
    values: np.ndarray
    epsilon: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (4,) + self.grid.shape:
            raise DimensionError(f"spinor values must have shape {(4,) + self.grid.shape}, "
                                 f"got {self.values.shape}")

    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.cell_volume))

    def copy(self):
        return SpinorField(self.grid, self.values.copy(), self.epsilon)

    def as_mixed(self):
        return MixedState(self.grid, np.array([1.0]), self.values[None].copy(), self.epsilon)


@dataclass
class MixedState:
    """R = sum_j lambda_j |psi_j><psi_j| with ``members[j]`` = psi_j."""
    grid: SpatialGrid
    weights: np.ndarray
    members: np.ndarray
    epsilon: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.members = np.asarray(self.members, dtype=complex)
        M = self.weights.shape[0]
        if self.members.shape != (M, 4) + self.grid.shape:
            raise DimensionError(f"members must have shape {(M, 4) + self.grid.shape}, "
                                 f"got {self.members.shape}")
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")

    @property
    def size(self):
        return self.weights.size

    def member(self, j):
        return SpinorField(self.grid, self.members[j], self.epsilon)

    def member_list(self):
        """The (weight, SpinorField) pairs."""
        return [(float(w), self.member(j)) for j, w in enumerate(self.weights)]

    def purity(self):
        """sum_j lambda_j^2 (Schatten-2 norm squared for orthonormal members)."""
        return float(np.sum(self.weights ** 2))

    def mixedness_bound(self, constant=1.0):
        return constant * (2 * np.pi * self.epsilon) ** self.grid.d

    def copy(self):
        return MixedState(self.grid, self.weights.copy(), self.members.copy(),
                          self.epsilon, dict(self.meta))


def _stack(state):
    """Return (members array, weights, rebuild)."""
    if isinstance(state, SpinorField):
        return state.values[None], np.array([1.0]), \
            lambda v: SpinorField(state.grid, v[0], state.epsilon)
    if isinstance(state, MixedState):
        return state.members, state.weights, \
            lambda v: MixedState(state.grid, state.weights.copy(), v, state.epsilon, dict(state.meta))
    raise TypeError(f"expected SpinorField or MixedState, got {type(state).__name__}")


# ---------------------------------------------------------------------------
# initial data


def _resolve_center(grid, epsilon, x0, xi0):
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    xi0 = np.asarray(xi0, dtype=float).reshape(-1)
    d = grid.d
    x = np.zeros(3)
    xi = np.array(grid.transverse_xi)
    if x0.size not in (d, 3) or xi0.size not in (d, 3):
        raise ConfigurationError(f"center components must have length {d} or 3")
    x[:d] = x0[:d]
    xi[:d] = xi0[:d]
    if xi0.size == 3 and not np.allclose(xi0[d:], xi[d:]):
        raise ConfigurationError("inactive momentum components must equal grid.transverse_xi")
    if np.any(np.abs(x[:d]) >= grid.box_length / 2):
        raise ConfigurationError(f"x0={x[:d]} lies outside the box")
    bound = grid.max_momentum(epsilon)
    if np.any(np.abs(xi[:d]) >= bound):
        raise ConfigurationError(f"|xi0| must stay below the resolvable bound pi*eps/(2dx)={bound:.4g}")
    return x, xi


def _polarization(model, x, xi, species, u):
    ev = eval_symbol(model, PhasePoint(0.0, x, xi))
    w = ev.Pi(species) @ u
    nw = np.linalg.norm(w)
    if nw < 1e-8:
        raise DegenerateSpinorError("reference spinor has no component in the requested band; "
                                    "choose a different reference spinor")
    return w / nw


def _band_project(members, grid, epsilon, A_nodes, species):
    """Apply Pi_species(eps k - A_j) in Fourier space to member j (A frozen at its node)."""
    axes = grid.fft_axes
    p = grid.momenta(epsilon)
    out = sfft.fftn(members, axes=axes)
    for j in range(members.shape[0]):
        v = p - A_nodes[j]
        Pi = 0.5 * (I4 + species * (alpha_dot(v) + BETA) / japanese_bracket(v)[..., None, None])
        out[j] = _apply_local(np.moveaxis(Pi, (-2, -1), (0, 1)), out[j][None])[0]
    return sfft.ifftn(out, axes=axes)


def _wrapped(grid, x0):
    """Minimum-image displacements x - x0 on the active axes, shape (d,)+grid.shape."""
    L = grid.box_length
    ax = grid.axis
    parts = []
    for k in range(grid.d):
        r = ax - x0[k]
        parts.append(r - L * np.round(r / L))
    return np.array(np.meshgrid(*parts, indexing="ij"))


def _gaussian_envelopes(grid, epsilon, x0s, xi0s):
    """Coherent-state scalar envelopes for many centres, shape (M,)+grid.shape."""
    d = grid.d
    out = np.empty((len(x0s),) + grid.shape, dtype=complex)
    for j, (x0, xi0) in enumerate(zip(x0s, xi0s)):
        r = _wrapped(grid, x0)
        q = np.sum(r * r, axis=0)
        phase = np.tensordot(xi0[:d], r, axes=1) + xi0[:d] @ x0[:d]
        out[j] = (np.pi * epsilon) ** (-d / 4) * np.exp(-q / (2 * epsilon) + 1j * phase / epsilon)
    return out


def make_coherent_state(grid, epsilon, center, species, model=None, reference_spinor=None,
                        polarization="pointwise"):
    """Gaussian wavepacket at (x0, xi0) polarised in the band ``species``.

    ``center`` is ``(x0, xi0)``.  With ``polarization="pointwise"`` the spinor
    part is Pi_species(0, x0, xi0) u normalised, with Pi evaluated for
    ``model`` (zero fields by default).  ``"spectral"`` instead applies
    Pi_species(0, x0, eps k) as a Fourier multiplier, which removes the
    O(sqrt eps) band mixing of a constant spinor over the packet.
    """
    model = model or PotentialModel.from_preset("zero").restricted(grid.d)
    u = REFERENCE_SPINOR if reference_spinor is None else np.asarray(reference_spinor, dtype=complex)
    x, xi = _resolve_center(grid, epsilon, *center)
    w = _polarization(model, x, xi, species, u)
    env = _gaussian_envelopes(grid, epsilon, [x], [xi])[0]
    psi = w[:, None] * env.reshape(1, -1)
    psi = psi.reshape((4,) + grid.shape)
    if polarization == "spectral":
        A = model.evaluate(0.0, x[None]).A
        psi = _band_project(psi[None], grid, epsilon, A, species)[0]
    elif polarization != "pointwise":
        raise ConfigurationError(f"unknown polarization {polarization!r}")
    field_ = SpinorField(grid, psi, epsilon)
    field_.values /= field_.norm()
    return field_


def make_plane_wave(grid, epsilon, mode, species, reference_spinor=None):
    """Free-field eigenstate exp(i k.x) w / sqrt(|box|) with k = 2 pi mode / L.

    w spans the ``species`` band of alpha.p + beta at p = eps k (plus the
    transverse momentum), so that psi(t) = exp(-i species <p> t / eps) psi(0)
    when the fields vanish.
    """
    mode = np.asarray(mode, dtype=int).reshape(-1)
    if mode.size != grid.d:
        raise ConfigurationError(f"mode must have {grid.d} integer components")
    if np.any(np.abs(mode) >= grid.n // 2):
        raise ConfigurationError("mode exceeds the Nyquist index")
    u = REFERENCE_SPINOR if reference_spinor is None else np.asarray(reference_spinor, dtype=complex)
    k = 2 * np.pi * mode / grid.box_length
    p = np.array(grid.transverse_xi, dtype=float)
    p[:grid.d] = epsilon * k
    Pi = 0.5 * (I4 + species * (alpha_dot(p) + BETA) / japanese_bracket(p))
    w = Pi @ u
    if np.linalg.norm(w) < 1e-8:
        raise DegenerateSpinorError("reference spinor has no component in the requested band")
    w /= np.linalg.norm(w)
    x = grid.positions()[..., :grid.d]
    phase = np.exp(1j * (x @ k))
    psi = w.reshape((4,) + (1,) * grid.d) * phase[None] / np.sqrt(grid.box_length ** grid.d)
    return SpinorField(grid, psi, epsilon)


def coherent_nodes(f_in, n_members, seed, nsig=4.0):
    """Quasi-random nodes over the bounding box of ``f_in`` and weights prop. to f_in."""
    lo, hi = f_in.bounds(nsig)
    from .densities import sobol_points
    z = lo + (hi - lo) * sobol_points(n_members, lo.size, seed)
    d = lo.size // 2
    x, v = z[:, :d], z[:, d:]
    w = f_in.pdf(x, v)
    total = w.sum()
    if not total > 0:
        raise ConfigurationError("f_in vanishes at every node")
    return x, v, w / total


def sample_mixed_state(grid, epsilon, f_in, n_members, species, rng_seed, model=None,
                       bound_constant=1.0, reference_spinor=None, polarization="pointwise"):
    """Coherent-state ensemble approximating the phase-space density ``f_in``.

    ``f_in`` is a density in (x, v) on the active dimensions; node momenta are
    converted to canonical ones with xi = v + A(0, x).  Raises MixednessError
    if sum(lambda^2) exceeds ``bound_constant * (2 pi eps)^d``.
    ``polarization`` is as for make_coherent_state.
    """
    if polarization not in ("pointwise", "spectral"):
        raise ConfigurationError(f"unknown polarization {polarization!r}")
    if n_members < 1:
        raise ConfigurationError("n_members must be positive")
    model = model or PotentialModel.from_preset("zero").restricted(grid.d)
    u = REFERENCE_SPINOR if reference_spinor is None else np.asarray(reference_spinor, dtype=complex)
    xs, vs, weights = coherent_nodes(f_in, n_members, rng_seed)
    purity = float(np.sum(weights ** 2))
    bound = bound_constant * (2 * np.pi * epsilon) ** grid.d
    if purity > bound:
        raise MixednessError(f"sum(lambda^2)={purity:.3g} exceeds {bound_constant}*(2*pi*eps)^d="
                             f"{bound:.3g}; raise n_members")
    d = grid.d
    x3 = np.zeros((n_members, 3))
    x3[:, :d] = xs
    A = model.evaluate(0.0, x3).A
    xi3 = np.tile(np.array(grid.transverse_xi), (n_members, 1))
    xi3[:, :d] = vs + A[:, :d]
    bound_p = grid.max_momentum(epsilon)
    if np.any(np.abs(xi3[:, :d]) >= bound_p):
        raise ConfigurationError(f"f_in support exceeds the resolvable momentum band "
                                 f"|xi| < {bound_p:.4g}; refine the grid")
    ev = eval_symbol(model, PhasePoint(0.0, x3, xi3))
    w = ev.Pi(species) @ u
    nw = np.linalg.norm(w, axis=-1)
    if np.any(nw < 1e-8):
        raise DegenerateSpinorError("reference spinor degenerate at some node")
    w /= nw[:, None]
    env = _gaussian_envelopes(grid, epsilon, x3, xi3)
    members = w[:, :, None] * env.reshape(n_members, 1, -1)
    members = members.reshape((n_members, 4) + grid.shape)
    if polarization == "spectral":
        members = _band_project(members, grid, epsilon, A, species)
    norms = np.sqrt(np.sum(np.abs(members) ** 2, axis=tuple(range(1, members.ndim))) * grid.cell_volume)
    members /= norms.reshape((-1,) + (1,) * (members.ndim - 1))
    meta = {"species": int(species), "seed": int(rng_seed), "nodes_x": xs, "nodes_v": vs}
    return MixedState(grid, weights, members, epsilon, meta)


# ---------------------------------------------------------------------------
# time stepping


def _apply_local(Vt, psi):
    """out[m, a] = sum_b Vt[a, b] psi[m, b] with Vt of shape (4, 4) + grid."""
    out = np.empty_like(psi)
    for a in range(4):
        acc = Vt[a, 0] * psi[:, 0]
        for b in range(1, 4):
            acc += Vt[a, b] * psi[:, b]
        out[:, a] = acc
    return out


@functools.lru_cache(maxsize=16)
def _free_propagator(grid, epsilon, dt):
    p = grid.momenta(epsilon)
    g = japanese_bracket(p)
    ph = dt * g / epsilon
    H = (alpha_dot(p) + BETA) / g[..., None, None]
    U = np.cos(ph)[..., None, None] * I4 - 1j * np.sin(ph)[..., None, None] * H
    Ut = np.moveaxis(U, (-2, -1), (0, 1)).copy()
    Ut.setflags(write=False)
    return Ut


def _potential_factor(grid, epsilon, model, t, tau):
    """exp(+i tau (alpha.A + A0)/eps) on the grid, shape (4, 4) + grid.shape."""
    rec = model.evaluate(t, grid.positions())
    theta = tau / epsilon
    V = exp_i_alpha_dot(theta, rec.A) * np.exp(1j * theta * rec.A0)[..., None, None]
    return np.moveaxis(V, (-2, -1), (0, 1))


def _step_array(psi, grid, epsilon, model, t, dt):
    V = _potential_factor(grid, epsilon, model, t + 0.5 * dt, 0.5 * dt)
    psi = _apply_local(V, psi)
    axes = grid.fft_axes
    phat = sfft.fftn(psi, axes=axes)
    phat = _apply_local(_free_propagator(grid, epsilon, dt), phat)
    psi = sfft.ifftn(phat, axes=axes)
    return _apply_local(V, psi)


def strang_step(state, model, t, dt):
    """One symmetric split step from t to t + dt (dt may be negative)."""
    psi, _, rebuild = _stack(state)
    return rebuild(_step_array(psi, state.grid, state.epsilon, model, t, dt))


def evolve(state, model, t0, t1, dt, snapshot_times=()):
    """Advance from t0 to t1 with steps of (about) ``dt``.

    The step is shrunk so that t1 - t0 is an integer number of steps.  Returns
    ``[(t, state), ...]`` at the requested snapshot times (rounded to the
    nearest step) followed by the final state.  Weights never change.
    """
    if t1 == t0:
        return [(t0, state)]
    if dt <= 0:
        raise ValueError("dt must be positive")
    span = t1 - t0
    nsteps = max(1, int(round(abs(span) / dt)))
    h = span / nsteps
    snap_steps = sorted({int(round((s - t0) / h)) for s in snapshot_times
                         if min(t0, t1) <= s <= max(t0, t1)})
    _warn_time_resolution(state, model, t0, t1, h)
    psi, _, rebuild = _stack(state)
    out = []
    if snap_steps and snap_steps[0] == 0:
        out.append((t0, rebuild(psi.copy())))
    for i in range(nsteps):
        psi = _step_array(psi, state.grid, state.epsilon, model, t0 + i * h, h)
        if (i + 1) in snap_steps and i + 1 != nsteps:
            out.append((t0 + (i + 1) * h, rebuild(psi.copy())))
    final = rebuild(psi)
    _warn_boundary(final)
    out.append((t1, final))
    return out


def _warn_time_resolution(state, model, t0, t1, h):
    if model.is_static:
        return
    x = state.grid.positions()
    worst = 0.0
    for t in np.linspace(t0, t1, 5):
        worst = max(worst, float(np.abs(model.evaluate(t, x).dA_dt).max()))
    if abs(h) * worst / state.epsilon > 0.5:
        log.warning("dt*max|dA/dt|/eps = %.3g; time step may be too coarse", abs(h) * worst / state.epsilon)


def _warn_boundary(state):
    psi, w, _ = _stack(state)
    dens = np.einsum("m,m...->...", w, np.sum(np.abs(psi) ** 2, axis=1))
    edge = 0.0
    for k in range(state.grid.d):
        edge = max(edge, float(np.take(dens, [0], axis=k).max()))
    if edge > 1e-8 * max(float(dens.max()), 1e-300):
        log.warning("density at the box boundary is %.2e of the peak; enlarge the box", edge / dens.max())


# ---------------------------------------------------------------------------
# observables


def apply_hamiltonian(psi, grid, epsilon, model, t):
    """H psi for a stack of spinors (M, 4, ...), using the stepper's spectral/pointwise parts."""
    axes = grid.fft_axes
    p = grid.momenta(epsilon)
    Hf = np.moveaxis(alpha_dot(p) + BETA, (-2, -1), (0, 1))
    out = sfft.ifftn(_apply_local(Hf, sfft.fftn(psi, axes=axes)), axes=axes)
    rec = model.evaluate(t, grid.positions())
    Vp = alpha_dot(rec.A) + rec.A0[..., None, None] * I4
    return out - _apply_local(np.moveaxis(Vp, (-2, -1), (0, 1)), psi)


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    norm: float
    rho: np.ndarray
    J: np.ndarray
    energy_density: np.ndarray
    total_energy: float
    mass: float


def diagnostics(state, model, t):
    """Weighted density, current and energy density of a spinor or mixed state."""
    psi, w, _ = _stack(state)
    grid = state.grid
    rho = np.einsum("m,mc...->...", w, np.abs(psi) ** 2)
    J = np.empty((3,) + grid.shape)
    for k in range(3):
        a_psi = np.einsum("ab,mb...->ma...", ALPHA[k], psi)
        J[k] = np.einsum("m,ma...->...", w, (psi.conj() * a_psi).real)
    Hpsi = apply_hamiltonian(psi, grid, state.epsilon, model, t)
    e = np.einsum("m,ma...->...", w, (psi.conj() * Hpsi).real)
    dv = grid.cell_volume
    norms = np.sqrt(np.sum(np.abs(psi) ** 2, axis=tuple(range(1, psi.ndim))) * dv)
    return DiagnosticsRecord(
        t=float(t),
        norm=float(norms[0]) if isinstance(state, SpinorField) else float(np.sum(w * norms ** 2)),
        rho=rho, J=J, energy_density=e,
        total_energy=float(e.sum() * dv), mass=float(rho.sum() * dv),
    )


# ---------------------------------------------------------------------------
# DSPN binary snapshots
#
# magic b"DSPN", then <q d, q n, d L, d eps, d t, q M, then per member
# <d weight followed by 4 * n^d complex values (component-major, C order) as
# interleaved little-endian float64 pairs.  A trailer b"TXI\0" + 3 float64
# records the transverse momentum; readers may ignore it.

_MAGIC = b"DSPN"
_HEADER = struct.Struct("<qqdddq")


def write_dspn(path, state, t):
    import os
    psi, w, _ = _stack(state)
    grid = state.grid
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(_HEADER.pack(grid.d, grid.n, grid.box_length, state.epsilon, float(t), w.size))
        for j in range(w.size):
            fh.write(struct.pack("<d", w[j]))
            fh.write(np.ascontiguousarray(psi[j], dtype="<c16").tobytes())
        fh.write(b"TXI\0")
        fh.write(np.asarray(grid.transverse_xi, dtype="<f8").tobytes())
    os.replace(tmp, path)


def read_dspn(path):
    """Return (MixedState, t).  A single-member file is still a MixedState."""
    try:
        fh = open(path, "rb")
    except FileNotFoundError:
        raise MissingInputError(f"DSPN snapshot not found: {path}") from None
    with fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path} is not a DSPN file")
        d, n, L, eps, t, M = _HEADER.unpack(fh.read(_HEADER.size))
        size = 4 * n ** d
        weights = np.empty(M)
        members = np.empty((M, size), dtype=complex)
        for j in range(M):
            weights[j] = struct.unpack("<d", fh.read(8))[0]
            members[j] = np.frombuffer(fh.read(16 * size), dtype="<c16")
        txi = (0.0, 0.0, 0.0)
        if fh.read(4) == b"TXI\0":
            txi = tuple(np.frombuffer(fh.read(24), dtype="<f8"))
    grid = SpatialGrid(int(d), int(n), L, txi)
    return MixedState(grid, weights, members.reshape((M, 4) + grid.shape), eps), t
