"""Discrete matrix-valued Wigner transform and the phase-space operators of the
Dirac-Wigner equation.

Discretisation (per active axis, n points, spacing dx, box L):

* relative coordinate  y_j = 2 dx j / eps,  j in [-n/2, n/2), so that
  x +- eps y_j / 2 = x +- j dx are grid nodes;
* momentum             xi_m = m pi eps / L,  m in [-n/2, n/2);
* xi_m y_j = 2 pi m j / n, so
  W(x, xi_m) = (2 pi)^-d dy^d sum_j K(x, j) exp(-i xi_m y_j)
  with K(x, j) = sum_l lambda_l psi_l(x + j dx) psi_l(x - j dx)^* is an FFT.

The periodic box pairs nodes whose separation wraps around; those pairs would
produce a checkerboard copy of W shifted by L/2 in x.  The relative
coordinate is therefore restricted to |j| < n/4 (separations below L/2).  The
j = 0 term is kept, so the mass identity is exact.

Operators acting in xi (d/dxi and the pseudo-differential operators theta,
tau, Delta) are applied in the y-representation, where they are
multiplications.  A WignerField may keep only a window of momentum rows; the
omitted rows are treated as zero when returning to the y-representation.

Array layout: ``values`` has shape ``(n,)*d + (n_xi_1, ..., n_xi_d) + (4, 4)``.
"""
from dataclasses import dataclass, field, replace
import csv
import io
import os
import struct

import numpy as np
import scipy.fft as sfft

from .clifford import ALPHA, I4
from .dirac_solver import MixedState, SpatialGrid, SpinorField
from .emfield import fields_from_record
from .errors import DimensionError, MissingInputError
from .symbol import PhasePoint, _derivatives_from, _symbol_from_record

__all__ = [
    "PhaseSpaceGrid", "WignerField", "wigner_transform", "wigner_slice", "moments",
    "project_species", "constraint_norm", "apply_pdo", "xi_derivative", "x_derivative",
    "remainder", "poisson_brackets_PW", "dirac_wigner_residual", "lagrange_multiplier_Y",
    "l2_norm", "write_dwig", "read_dwig", "write_csv", "pair",
]

_BLOCK = 128    # x rows per block in the y-representation passes


@dataclass(frozen=True)
class PhaseSpaceGrid:
    """Spatial grid plus the dual momentum grid, optionally windowed.

    ``m_lo``/``m_hi`` select the momentum rows kept (centred numbering,
    half-open), one pair per active axis.
    """
    spatial: SpatialGrid
    epsilon: float
    m_lo: tuple = None
    m_hi: tuple = None

    def __post_init__(self):
        n, d = self.spatial.n, self.spatial.d
        lo = self.m_lo if self.m_lo is not None else (-n // 2,) * d
        hi = self.m_hi if self.m_hi is not None else (n // 2,) * d
        lo = tuple(int(max(v, -n // 2)) for v in lo)
        hi = tuple(int(min(v, n // 2)) for v in hi)
        if len(lo) != d or len(hi) != d or any(b <= a for a, b in zip(lo, hi)):
            raise DimensionError("bad momentum window")
        object.__setattr__(self, "m_lo", lo)
        object.__setattr__(self, "m_hi", hi)

    @classmethod
    def windowed(cls, spatial, epsilon, xi_lo, xi_hi):
        """Keep momentum rows covering [xi_lo, xi_hi] (scalars or per-axis)."""
        d = spatial.d
        dxi = np.pi * epsilon / spatial.box_length
        lo = np.broadcast_to(np.asarray(xi_lo, dtype=float), (d,))
        hi = np.broadcast_to(np.asarray(xi_hi, dtype=float), (d,))
        return cls(spatial, epsilon, tuple(int(np.floor(v / dxi)) for v in lo),
                   tuple(int(np.ceil(v / dxi)) + 1 for v in hi))

    @property
    def d(self):
        return self.spatial.d

    @property
    def n(self):
        return self.spatial.n

    @property
    def dx(self):
        return self.spatial.spacing

    @property
    def dxi(self):
        return np.pi * self.epsilon / self.spatial.box_length

    @property
    def dy(self):
        return 2.0 * self.dx / self.epsilon

    @property
    def is_full(self):
        return all(a == -self.n // 2 and b == self.n // 2 for a, b in zip(self.m_lo, self.m_hi))

    @property
    def xi_shape(self):
        return tuple(b - a for a, b in zip(self.m_lo, self.m_hi))

    @property
    def shape(self):
        return self.spatial.shape + self.xi_shape

    @property
    def cell_volume(self):
        return (self.dx * self.dxi) ** self.d

    def xi_axis(self, k=0):
        return self.dxi * np.arange(self.m_lo[k], self.m_hi[k])

    def resolvable_bound(self):
        return np.pi * self.epsilon / (2.0 * self.dx)

    def y_fft(self):
        """y_j in FFT order."""
        return self.dy * np.fft.fftfreq(self.n, 1.0 / self.n)

    def j_fft(self):
        return np.rint(np.fft.fftfreq(self.n, 1.0 / self.n)).astype(int)

    def window_rows(self, k=0):
        """Indices of the kept rows in the centred full ordering."""
        return np.arange(self.m_lo[k], self.m_hi[k]) + self.n // 2

    def coords(self):
        """Positions and momenta as 3-vectors on the phase-space grid."""
        d = self.d
        xs = [self.spatial.axis] * d
        ks = [self.xi_axis(k) for k in range(d)]
        mesh = np.meshgrid(*(xs + ks), indexing="ij")
        X = np.zeros(self.shape + (3,))
        Xi = np.zeros(self.shape + (3,))
        Xi[...] = np.array(self.spatial.transverse_xi)
        for k in range(d):
            X[..., k] = mesh[k]
            Xi[..., k] = mesh[d + k]
        return X, Xi


@dataclass
class WignerField:
    grid: PhaseSpaceGrid
    t: float
    values: np.ndarray
    kind: str = "full"
    meta: dict = field(default_factory=dict)
    _coords: tuple = field(default=None, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.kind == "full" and self.values.shape != self.grid.shape + (4, 4):
            raise DimensionError(f"values must have shape {self.grid.shape + (4, 4)}, got {self.values.shape}")

    @property
    def epsilon(self):
        return self.grid.epsilon

    def coords(self):
        if self._coords is None:
            self._coords = self.grid.coords()
        return self._coords

    def with_values(self, values):
        return WignerField(self.grid, self.t, values, self.kind, dict(self.meta), self._coords)

    def require_full(self, what):
        if self.kind != "full":
            raise DimensionError(f"{what} needs the full phase space; got a {self.kind}")

    def trace(self):
        return np.trace(self.values, axis1=-2, axis2=-1)

    def hermiticity_error(self):
        return float(np.abs(self.values - np.conj(np.swapaxes(self.values, -1, -2))).max())

    def mass(self):
        """Phase-space sum of tr W over the stored rows."""
        return float(np.real(self.trace().sum()) * self.grid.cell_volume)


def l2_norm(values, grid):
    """Discrete L2 norm over phase space (Frobenius norm per node)."""
    return float(np.sqrt(np.sum(np.abs(values) ** 2) * grid.cell_volume))


# ---------------------------------------------------------------------------
# transform


def _members(state):
    if isinstance(state, SpinorField):
        return state.values[None], np.array([1.0]), state.grid, state.epsilon
    if isinstance(state, MixedState):
        return state.members, state.weights, state.grid, state.epsilon
    raise TypeError(f"expected SpinorField or MixedState, got {type(state).__name__}")


def _density_matrix(members, weights):
    """R[(a, X), (b, Y)] = sum_l w_l psi_l[a, X] conj(psi_l[b, Y])."""
    M = members.shape[0]
    Psi = members.reshape(M, -1).T
    return (Psi * weights) @ Psi.conj().T


def _ortho_norm(grid):
    return ((2 * np.pi) ** -1 * grid.dy) ** grid.d


def _xi_axes(grid, nlead):
    d = grid.d
    return tuple(range(nlead, nlead + d))


def _from_y(K, grid, nlead):
    """y-representation (FFT order in y) -> windowed momentum rows."""
    axes = _xi_axes(grid, nlead)
    W = sfft.fftshift(sfft.fftn(K, axes=axes), axes=axes) * _ortho_norm(grid)
    for k, ax in enumerate(axes):
        W = np.take(W, grid.window_rows(k), axis=ax)
    return W


def _to_y(W, grid, nlead):
    """Windowed momentum rows -> y-representation (FFT order), zero padding."""
    axes = _xi_axes(grid, nlead)
    n = grid.n
    if grid.is_full:
        full = W
    else:
        full = np.zeros(W.shape[:nlead] + (n,) * grid.d + W.shape[nlead + grid.d:], dtype=complex)
        idx = [slice(None)] * full.ndim
        for k, ax in enumerate(axes):
            idx[ax] = slice(grid.window_rows(k)[0], grid.window_rows(k)[-1] + 1)
        full[tuple(idx)] = W
    K = sfft.ifftn(sfft.ifftshift(full, axes=axes), axes=axes)
    return K / _ortho_norm(grid)


def _relative_window(grid):
    """Mask over j (FFT order, all active axes) selecting |j_k| < n/4."""
    j = grid.j_fft()
    ok = np.abs(j) < grid.n // 4
    mask = ok
    for _ in range(grid.d - 1):
        mask = mask[..., None] & ok
    return mask


def wigner_transform(state, t=0.0, psgrid=None, max_nodes=1 << 23):
    """Matrix-valued Wigner transform of a spinor or mixed state.

    ``psgrid`` may select a momentum window (see PhaseSpaceGrid.windowed);
    by default the full dual grid is used.  The complete-grid mass (before
    windowing) is recorded in ``meta['full_mass']``.
    """
    members, weights, grid, eps = _members(state)
    psgrid = psgrid or PhaseSpaceGrid(grid, eps)
    if psgrid.spatial != grid or psgrid.epsilon != eps:
        raise DimensionError("phase-space grid does not match the state grid/epsilon")
    d, n = grid.d, grid.n
    if n ** (2 * d) > max_nodes:
        raise DimensionError(f"full phase space has {n ** (2 * d)} nodes; use wigner_slice")
    R = _density_matrix(members, weights).reshape((4,) + grid.shape + (4,) + grid.shape)
    j = psgrid.j_fft()
    mask = _relative_window(psgrid)
    full_mass = 0.0
    xs = np.arange(n)
    out = np.empty(psgrid.shape + (4, 4), dtype=complex)
    if d == 1:
        for start in range(0, n, _BLOCK):
            xb = xs[start:start + _BLOCK]
            X = (xb[:, None] + j[None, :]) % n
            Y = (xb[:, None] - j[None, :]) % n
            K = R[:, X, :, Y]                       # (bx, n_j, 4, 4)
            K = np.where(mask[None, :, None, None], K, 0)
            full_mass += float(np.real(np.trace(K[:, 0], axis1=-2, axis2=-1).sum()))
            out[start:start + _BLOCK] = _from_y(K, psgrid, 1)
    else:
        grids = np.meshgrid(*([xs] * d + [j] * d), indexing="ij")
        Xi = [(grids[k] + grids[d + k]) % n for k in range(d)]
        Yi = [(grids[k] - grids[d + k]) % n for k in range(d)]
        Rm = np.moveaxis(R, d + 1, 1)               # (4, 4, X..., Y...)
        K = Rm[(slice(None), slice(None)) + tuple(Xi) + tuple(Yi)]
        K = np.moveaxis(K, (0, 1), (-2, -1))
        K = np.where(mask[(None,) * d + (Ellipsis, None, None)], K, 0)
        full_mass = float(np.real(np.trace(K[(Ellipsis,) + (0,) * d + (slice(None), slice(None))],
                                           axis1=-2, axis2=-1).sum()))
        out[...] = _from_y(K, psgrid, d)
    full_mass *= grid.cell_volume
    return WignerField(psgrid, float(t), out, meta={"full_mass": full_mass})


def wigner_slice(state, x_fixed, xi_fixed, t=0.0):
    """Wigner transform on the (x_1, xi_1) plane with x_k, xi_k (k >= 2) fixed.

    ``x_fixed`` are node indices of x_2..x_d, ``xi_fixed`` the momenta
    xi_2..xi_d.  Returns a WignerField of kind ``slice``; pointwise operations
    (projection, constraint) accept it, bracket-based operations do not.
    """
    members, weights, grid, eps = _members(state)
    d, n = grid.d, grid.n
    if d < 2:
        raise DimensionError("slices are only meaningful for d >= 2")
    psg = PhaseSpaceGrid(grid, eps)
    x_fixed = [int(v) for v in np.atleast_1d(x_fixed)]
    xi_fixed = np.atleast_1d(np.asarray(xi_fixed, dtype=float))
    if len(x_fixed) != d - 1 or xi_fixed.size != d - 1:
        raise DimensionError(f"need {d - 1} fixed coordinates")
    j = psg.j_fft()
    ok = np.abs(j) < n // 4
    jj = j[ok]
    y = psg.y_fft()[ok]
    c = _ortho_norm(psg)
    out = np.zeros((n, n, 4, 4), dtype=complex)
    Psi = members * np.sqrt(weights).reshape((-1,) + (1,) * (members.ndim - 1))
    ids = np.meshgrid(*([np.arange(jj.size)] * (d - 1)), indexing="ij")
    idx_other = [jj[i] for i in ids]
    phase = np.exp(-1j * sum(xi_fixed[k] * y[ids[k]] for k in range(d - 1)))
    for i1 in range(n):
        for a1, j1 in enumerate(j):
            if abs(j1) >= n // 4:
                continue
            Xp = [(i1 + j1) % n] + [(x_fixed[k] + idx_other[k]) % n for k in range(d - 1)]
            Xm = [(i1 - j1) % n] + [(x_fixed[k] - idx_other[k]) % n for k in range(d - 1)]
            A = Psi[(slice(None), slice(None)) + tuple(np.broadcast_arrays(*Xp))]
            B = Psi[(slice(None), slice(None)) + tuple(np.broadcast_arrays(*Xm))]
            K = phase.size
            out[i1, a1] = np.einsum("mak,mbk,k->ab", A.reshape(A.shape[:2] + (K,)),
                                    B.conj().reshape(B.shape[:2] + (K,)), phase.ravel())
    W = sfft.fftshift(sfft.fft(out, axis=1), axes=1) * c
    x_other = grid.axis[x_fixed]
    X = np.zeros((n, n, 3))
    Xi = np.zeros((n, n, 3))
    Xi[...] = np.array(grid.transverse_xi)
    X[..., 0] = grid.axis[:, None]
    Xi[..., 0] = psg.xi_axis(0)[None, :]
    for k in range(d - 1):
        X[..., k + 1] = x_other[k]
        Xi[..., k + 1] = xi_fixed[k]
    sl = WignerField(psg, float(t), W, kind="slice",
                     meta={"x_fixed": x_fixed, "xi_fixed": xi_fixed.tolist()})
    sl._coords = (X, Xi)
    return sl


# ---------------------------------------------------------------------------
# pointwise quantities


def moments(W, allow_window=False):
    """rho = dxi^d sum_xi tr W,  J_k = dxi^d sum_xi tr(alpha_k W),  w = tr W.

    On a momentum window the sums miss the omitted rows, so this is refused
    unless ``allow_window`` is set.
    """
    W.require_full("moments")
    if not (allow_window or W.grid.is_full):
        raise DimensionError("moments need every momentum row; this field is windowed")
    d = W.grid.d
    axes = tuple(range(d, 2 * d))
    dxi = W.grid.dxi ** d
    w = W.trace()
    rho = np.real(w.sum(axis=axes)) * dxi
    J = np.array([np.real(np.einsum("ab,...ba->...", ALPHA[k], W.values).sum(axis=axes)) * dxi
                  for k in range(3)])
    return {"rho": rho, "J": J, "w": w}


def _symbol_on(W, model):
    X, Xi = W.coords()
    rec = model.evaluate(W.t, X)
    return _symbol_from_record(rec, Xi)


def project_species(W, model):
    """W_pm = Pi_pm W Pi_pm and f_pm = tr W_pm, with Pi at (t, x, xi)."""
    ev = _symbol_on(W, model)
    Pp, Pm = ev.Pi_plus, ev.Pi_minus
    Wp = Pp @ W.values @ Pp
    Wm = Pm @ W.values @ Pm
    off_pm = Pp @ W.values @ Pm
    off_mp = Pm @ W.values @ Pp
    resid = float(np.abs(W.values - Wp - Wm - off_pm - off_mp).max())
    return {"W_plus": Wp, "W_minus": Wm,
            "f_plus": np.real(np.trace(Wp, axis1=-2, axis2=-1)),
            "f_minus": np.real(np.trace(Wm, axis1=-2, axis2=-1)),
            "offdiag_norm": l2_norm(off_pm, W.grid) + l2_norm(off_mp, W.grid),
            "decomposition_residual": resid}


def constraint_norm(W, model):
    """||[P, W]|| / ||W|| in the discrete L2 norm."""
    ev = _symbol_on(W, model)
    C = ev.P @ W.values - W.values @ ev.P
    nw = l2_norm(W.values, W.grid)
    return l2_norm(C, W.grid) / nw if nw > 0 else 0.0


def pair(W_scalar, W, a):
    """<a, f> = sum a(x, xi) f(x, xi) dx^d dxi^d for a scalar phase-space field."""
    X, Xi = W.coords()
    return float(np.sum(a(X, Xi) * W_scalar) * W.grid.cell_volume)


# ---------------------------------------------------------------------------
# derivatives and pseudo-differential operators


def x_derivative(W, k, values=None):
    """Spectral d/dx_k of the field (periodic)."""
    W.require_full("x_derivative")
    vals = W.values if values is None else values
    g = W.grid
    if k >= g.d:
        return np.zeros_like(vals)
    kk = 2 * np.pi * sfft.fftfreq(g.n, d=g.dx)
    kk[g.n // 2] = 0.0      # drop the Nyquist mode so real (Hermitian) fields stay real
    shape = [1] * vals.ndim
    shape[k] = g.n
    return sfft.ifft(sfft.fft(vals, axis=k) * (1j * kk).reshape(shape), axis=k)


def _y_pass(W, multiplier, values=None):
    """Apply a y-space multiplier blockwise over the first x axis.

    ``multiplier(x_slice, yvec)`` returns an array broadcastable against the
    y-representation block ``(bx, x_2.., y_1.., y_d, 4, 4)``.
    """
    W.require_full("y-representation operators")
    g = W.grid
    vals = W.values if values is None else values
    out = np.empty_like(vals)
    for start in range(0, g.n, _BLOCK):
        sl = slice(start, start + _BLOCK)
        K = _to_y(vals[sl], g, g.d)
        out[sl] = _from_y(multiplier(sl, K), g, g.d)
    return out


def _y_grid(g):
    """y vectors (3 components, inactive zero) on the y lattice, FFT order."""
    y1 = g.y_fft()
    mesh = np.meshgrid(*([y1] * g.d), indexing="ij")
    Y = np.zeros((g.n,) * g.d + (3,))
    for k in range(g.d):
        Y[..., k] = mesh[k]
    return Y


def _shifted_positions(g, sl):
    """x +- eps y / 2 (unwrapped) for the x rows ``sl``: shape (bx, x.., y.., 3)."""
    d = g.d
    xa = g.spatial.axis
    X = np.zeros((len(xa[sl]),) + (g.n,) * (d - 1) + (1,) * d + (3,))
    mesh = np.meshgrid(*([xa[sl]] + [xa] * (d - 1)), indexing="ij")
    for k in range(d):
        X[..., k] = mesh[k].reshape(mesh[k].shape + (1,) * d)
    half = 0.5 * g.epsilon * _y_grid(g)
    half = half.reshape((1,) * d + half.shape)
    return X, X + half, X - half


def xi_derivative(W, k, values=None):
    """Spectral d/dxi_k: multiplication by -i y_k in the y-representation."""
    g = W.grid
    if k >= g.d:
        return np.zeros_like(W.values if values is None else values)
    yk = _y_grid(g)[..., k]
    shape = (1,) * g.d + yk.shape + (1, 1)

    def mult(sl, K):
        return K * (-1j * yk).reshape(shape)
    return _y_pass(W, mult, values)


def _pdo_symbol(kind, g_plus, g_0, g_minus, eps):
    if kind == "theta":
        return (g_plus - g_minus) / (1j * eps)
    if kind == "tau":
        return 0.5 * (g_plus + g_minus)
    if kind == "delta":
        return (g_plus - 2 * g_0 + g_minus) / (2j * eps ** 2)
    raise ValueError(f"kind must be 'theta', 'tau' or 'delta', got {kind!r}")


def apply_pdo(kind, g, W, values=None):
    """theta[g], tau[g] or Delta[g] applied to a Wigner-like array.

    ``g(positions)`` is a scalar function of 3-vector positions, evaluated at
    the unwrapped points x +- eps y / 2.
    """
    d = W.grid.d

    def mult(sl, K):
        X0, Xp, Xm = _shifted_positions(W.grid, sl)
        s = _pdo_symbol(kind, g(Xp), g(X0), g(Xm), W.grid.epsilon)
        return K * s[..., None, None]
    return _y_pass(W, mult, values)


def _comm(a, b):
    return a @ b - b @ a


def _acomm(a, b):
    return a @ b + b @ a


def remainder(W, model):
    """r = -eps Delta[A_k][alpha_k, W] + 1/2 (grad A_k . grad_xi - theta[A_k]) [alpha_k, W]_+
           + (grad A0 . grad_xi - theta[A0]) W,

    assembled in the y-representation so that the cancellations for constant
    and linear potentials are exact.
    """
    g = W.grid
    eps = g.epsilon
    d = g.d
    Y = _y_grid(g)
    Yb = Y.reshape((1,) * d + Y.shape)
    comms = [_comm(ALPHA[m], W.values) for m in range(3)]
    acomms = [_acomm(ALPHA[m], W.values) for m in range(3)]
    out = np.zeros_like(W.values)
    for start in range(0, g.n, _BLOCK):
        sl = slice(start, start + _BLOCK)
        X0, Xp, Xm = _shifted_positions(g, sl)
        r0 = model.evaluate(W.t, X0)
        rp = model.evaluate(W.t, Xp)
        rm = model.evaluate(W.t, Xm)
        # -i y . grad g(x): grad_xi in the y-representation
        s0 = (-1j * np.sum(r0.grad_A0 * Yb, axis=-1)
              - _pdo_symbol("theta", rp.A0, r0.A0, rm.A0, eps))
        acc = _to_y(W.values[sl], g, d) * s0[..., None, None]
        for m in range(3):
            dA = np.sum(r0.jac_A[..., :, m] * Yb, axis=-1)
            sa = 0.5 * (-1j * dA - _pdo_symbol("theta", rp.A[..., m], r0.A[..., m], rm.A[..., m], eps))
            sd = -eps * _pdo_symbol("delta", rp.A[..., m], r0.A[..., m], rm.A[..., m], eps)
            if np.any(sa != 0):
                acc += _to_y(acomms[m][sl], g, d) * sa[..., None, None]
            if np.any(sd != 0):
                acc += _to_y(comms[m][sl], g, d) * sd[..., None, None]
        out[sl] = _from_y(acc, g, d)
    return out


def poisson_brackets_PW(W, model, ev=None):
    """({P, W}, {W, P}) with analytic derivatives of P and spectral ones of W."""
    g = W.grid
    X, Xi = W.coords()
    rec = model.evaluate(W.t, X)
    PWb = np.zeros_like(W.values)
    WPb = np.zeros_like(W.values)
    for k in range(g.d):
        dxP = -np.einsum("...m,mab->...ab", rec.jac_A[..., k, :], ALPHA) \
            - rec.grad_A0[..., k, None, None] * I4
        dxW = x_derivative(W, k)
        dxiW = xi_derivative(W, k)
        PWb += dxP @ dxiW - ALPHA[k] @ dxW
        WPb += dxW @ ALPHA[k] - dxiW @ dxP
    return PWb, WPb


def _matrix_stencil(snapshots):
    if len(snapshots) != 3:
        raise ValueError("need exactly three snapshots")
    a, b, c = snapshots
    h1, h2 = b.t - a.t, c.t - b.t
    if h1 <= 0 or abs(h1 - h2) > 1e-9 * abs(h1):
        raise ValueError("snapshots must be equally spaced and increasing in time")
    if not (a.grid == b.grid == c.grid):
        raise DimensionError("snapshots live on different grids")
    return (c.values - a.values) / (2 * h1)


def dirac_wigner_residual(snapshots, model, include_remainder=True, return_field=False):
    """L2 norm of dW/dt - (1/(i eps))[P, W] - 1/2({P,W} - {W,P}) - r at the middle snapshot."""
    dW = _matrix_stencil(snapshots)
    W = snapshots[1]
    ev = _symbol_on(W, model)
    PWb, WPb = poisson_brackets_PW(W, model)
    res = dW - _comm(ev.P, W.values) / (1j * W.epsilon) - 0.5 * (PWb - WPb)
    if include_remainder:
        res -= remainder(W, model)
    nrm = l2_norm(res, W.grid)
    return (nrm, res) if return_field else nrm


def lagrange_multiplier_Y(W, model):
    """Y = i([dt P, W] - 1/2 [P, {P,W} - {W,P}]) / (4 <xi - A>^2) and diagnostics."""
    ev = _symbol_on(W, model)
    dtP = _derivatives_from(ev).dt_P
    PWb, WPb = poisson_brackets_PW(W, model)
    Y = 1j * (_comm(dtP, W.values) - 0.5 * _comm(ev.P, PWb - WPb))
    Y /= (4.0 * ev.gamma ** 2)[..., None, None]
    nY = l2_norm(Y, W.grid)
    diag = {
        "norm": nY,
        "norm_PpYPp": l2_norm(ev.Pi_plus @ Y @ ev.Pi_plus, W.grid),
        "norm_PmYPm": l2_norm(ev.Pi_minus @ Y @ ev.Pi_minus, W.grid),
        "antihermitian_norm": l2_norm(Y - np.conj(np.swapaxes(Y, -1, -2)), W.grid),
    }
    diag["diagonal_ratio"] = (diag["norm_PpYPp"] + diag["norm_PmYPm"]) / nY if nY > 0 else 0.0
    return Y, diag


# ---------------------------------------------------------------------------
# files
#
# DWIG: magic b"DWIG", then <q d, q n, d L, d eps, d t, then for every node
# 16 complex numbers (row-major 4x4) as interleaved little-endian float64
# pairs.  Node order: xi-major (outer loop over the full momentum grid), then
# x.  Rows outside a stored window are written as zeros.

_DWIG = b"DWIG"
_DWIG_HEADER = struct.Struct("<qqddd")


def write_dwig(path, W):
    W.require_full("DWIG export")
    g = W.grid
    d, n = g.d, g.n
    tmp = f"{path}.tmp"
    vals = np.moveaxis(W.values, tuple(range(d, 2 * d)), tuple(range(d)))   # (xi.., x.., 4, 4)
    zero_row = np.zeros((n,) * d + (4, 4), dtype="<c16").tobytes()
    rows = [g.window_rows(k) for k in range(d)]
    with open(tmp, "wb") as fh:
        fh.write(_DWIG)
        fh.write(_DWIG_HEADER.pack(d, n, g.spatial.box_length, g.epsilon, W.t))
        for m in np.ndindex(*((n,) * d)):
            inside = all(rows[k][0] <= m[k] <= rows[k][-1] for k in range(d))
            if inside:
                loc = tuple(m[k] - rows[k][0] for k in range(d))
                fh.write(np.ascontiguousarray(vals[loc], dtype="<c16").tobytes())
            else:
                fh.write(zero_row)
    os.replace(tmp, path)


def read_dwig(path, transverse_xi=(0.0, 0.0, 0.0)):
    try:
        fh = open(path, "rb")
    except FileNotFoundError:
        raise MissingInputError(f"DWIG file not found: {path}") from None
    with fh:
        if fh.read(4) != _DWIG:
            raise ValueError(f"{path} is not a DWIG file")
        d, n, L, eps, t = _DWIG_HEADER.unpack(fh.read(_DWIG_HEADER.size))
        raw = np.frombuffer(fh.read(), dtype="<c16")
    grid = PhaseSpaceGrid(SpatialGrid(int(d), int(n), L, transverse_xi), eps)
    vals = raw.reshape((n,) * d + (n,) * d + (4, 4))
    vals = np.moveaxis(vals, tuple(range(d)), tuple(range(d, 2 * d)))
    return WignerField(grid, t, np.array(vals))


def write_csv(path, columns, comments=()):
    """Write equally long 1-D columns (dict name -> array) atomically.

    Comment lines are written first, each prefixed with ``#``.  Floats are
    formatted with ``repr`` so that files are byte-stable across runs.
    """
    names = list(columns)
    cols = [np.asarray(columns[k]).reshape(-1) for k in names]
    length = {c.size for c in cols}
    if len(length) > 1:
        raise ValueError("CSV columns differ in length")
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for row in zip(*cols):
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else
                    (int(v) if isinstance(v, (int, np.integer)) else v) for v in row])
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(buf.getvalue())
    os.replace(tmp, path)
