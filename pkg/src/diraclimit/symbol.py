"""Pointwise calculus of the Dirac symbol

    P(t, x, xi) = alpha.(xi - A) + beta - A0 = P0 - A0,    P0 = alpha.v + beta,

with kinetic momentum v = xi - A and <v> = sqrt(1 + |v|^2).  P has the two
doubly degenerate eigenvalues lambda_pm = +-<v> - A0 with spectral projections
Pi_pm = (I +- S)/2, S = P0/<v>.

Everything here broadcasts: a ``PhasePoint`` whose ``x`` and ``xi`` have shape
``(..., 3)`` yields matrices of shape ``(..., 4, 4)``.  Derivatives are the
closed forms, not numerical differentiation.
"""
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .clifford import ALPHA, BETA, GAMMA5, I4, alpha_dot
from .emfield import fields_from_record, japanese_bracket, lorentz_force

__all__ = [
    "PhasePoint", "SymbolEval", "SymbolDerivatives", "PhaseFunction",
    "eval_symbol", "symbol_derivatives", "matrix_poisson_bracket",
    "poisson_bracket_arrays", "symbol_function", "berry_term",
    "poissonian_curvature", "berry_term_from", "poissonian_curvature_from",
]


@dataclass(frozen=True)
class PhasePoint:
    t: float
    x: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "xi", np.asarray(self.xi, dtype=float))
        if self.x.shape[-1:] != (3,) or self.xi.shape[-1:] != (3,):
            raise ValueError("x and xi must have a trailing axis of length 3")
        if not (np.isfinite(self.t) and np.all(np.isfinite(self.x))
                and np.all(np.isfinite(self.xi))):
            raise ValueError("phase point has non-finite components")


def _sc(a):
    """Scalar field -> broadcastable against (..., 4, 4)."""
    return np.asarray(a)[..., None, None]


@dataclass(frozen=True)
class SymbolEval:
    v: np.ndarray
    gamma: np.ndarray
    P: np.ndarray
    P0: np.ndarray
    lambda_plus: np.ndarray
    lambda_minus: np.ndarray
    S: np.ndarray
    Pi_plus: np.ndarray
    Pi_minus: np.ndarray
    potentials: object = None

    def Pi(self, species):
        return self.Pi_plus if species > 0 else self.Pi_minus

    def lam(self, species):
        return self.lambda_plus if species > 0 else self.lambda_minus


def _symbol_from_record(rec, xi):
    v = xi - rec.A
    gamma = japanese_bracket(v)
    P0 = alpha_dot(v) + BETA
    P = P0 - _sc(rec.A0) * I4
    S = P0 / _sc(gamma)
    return SymbolEval(
        v=v, gamma=gamma, P=P, P0=P0,
        lambda_plus=gamma - rec.A0, lambda_minus=-gamma - rec.A0,
        S=S, Pi_plus=0.5 * (I4 + S), Pi_minus=0.5 * (I4 - S),
        potentials=rec,
    )


def eval_symbol(model, p):
    """Evaluate P, P0, lambda_pm, S and Pi_pm at the phase point ``p``."""
    rec = model.evaluate(p.t, p.x)
    return _symbol_from_record(rec, np.broadcast_to(p.xi, rec.A.shape))


@dataclass(frozen=True)
class SymbolDerivatives:
    """Closed-form first derivatives.

    Spatial/momentum derivatives carry the direction index k on the axis just
    before the matrix axes: ``dx_Pi_plus[..., k, :, :]`` is d Pi_+/dx_k.
    """
    dx_lambda_plus: np.ndarray
    dx_lambda_minus: np.ndarray
    dxi_lambda_plus: np.ndarray
    dxi_lambda_minus: np.ndarray
    dx_Pi_plus: np.ndarray
    dx_Pi_minus: np.ndarray
    dxi_Pi_plus: np.ndarray
    dxi_Pi_minus: np.ndarray
    dt_Pi_plus: np.ndarray
    dt_Pi_minus: np.ndarray
    dt_P: np.ndarray
    dx_P0: np.ndarray
    dxi_P0: np.ndarray
    dx_P: np.ndarray
    dxi_P: np.ndarray

    def get(self, name, species):
        suffix = "plus" if species > 0 else "minus"
        return getattr(self, f"{name}_{suffix}")


def _derivatives_from(ev):
    rec = ev.potentials
    v, g = ev.v, ev.gamma
    jac = rec.jac_A                          # [..., k, m] = d_k A_m
    # d_xk <v> = -(v . d_k A)/<v>,   d_xik <v> = v_k/<v>
    v_dA = np.einsum("...km,...m->...k", jac, v)
    dx_P0 = -alpha_dot(jac)                  # (..., 3, 4, 4)
    dxi_P0 = np.broadcast_to(ALPHA, v.shape[:-1] + (3, 4, 4))

    g_k = g[..., None]
    dx_lam_p = -v_dA / g_k - rec.grad_A0
    dx_lam_m = v_dA / g_k - rec.grad_A0
    dxi_lam_p = v / g_k
    P0k = ev.P0[..., None, :, :]
    gk = g[..., None, None, None]
    dx_S = dx_P0 / gk + P0k * (v_dA[..., None, None] / gk ** 3)
    dxi_S = ALPHA / gk - P0k * (v[..., None, None] / gk ** 3)

    v_dtA = np.sum(v * rec.dA_dt, axis=-1)
    dt_S = (-alpha_dot(rec.dA_dt) + ev.P0 * _sc(v_dtA / g ** 2)) / _sc(g)
    dt_P = -alpha_dot(rec.dA_dt) - _sc(rec.dA0_dt) * I4

    dx_P = dx_P0 - rec.grad_A0[..., None, None] * I4
    return SymbolDerivatives(
        dx_lambda_plus=dx_lam_p, dx_lambda_minus=dx_lam_m,
        dxi_lambda_plus=dxi_lam_p, dxi_lambda_minus=-dxi_lam_p,
        dx_Pi_plus=0.5 * dx_S, dx_Pi_minus=-0.5 * dx_S,
        dxi_Pi_plus=0.5 * dxi_S, dxi_Pi_minus=-0.5 * dxi_S,
        dt_Pi_plus=0.5 * dt_S, dt_Pi_minus=-0.5 * dt_S,
        dt_P=dt_P, dx_P0=dx_P0, dxi_P0=dxi_P0, dx_P=dx_P, dxi_P=dxi_P0,
    )


def symbol_derivatives(model, p):
    return _derivatives_from(eval_symbol(model, p))


# ---------------------------------------------------------------------------
# matrix Poisson bracket


def _as_matrix_deriv(d):
    """(..., 3) scalar derivatives -> (..., 3, 1, 1) so they multiply matrices."""
    d = np.asarray(d)
    return d if d.ndim >= 3 and d.shape[-2:] == (4, 4) else d[..., None, None]


def _mul(a, b):
    if a.shape[-2:] == (1, 1) or b.shape[-2:] == (1, 1):
        return a * b
    return a @ b


def poisson_bracket_arrays(dxF, dxiF, dxG, dxiG):
    """{F, G} = sum_k dx_k F dxi_k G - dxi_k F dx_k G from derivative arrays.

    Derivatives have shape ``(..., 3, 4, 4)`` (matrix) or ``(..., 3)``
    (scalar).  Products are matrix products, so the result is order
    sensitive.
    """
    dxF, dxiF, dxG, dxiG = map(_as_matrix_deriv, (dxF, dxiF, dxG, dxiG))
    out = np.sum(_mul(dxF, dxiG) - _mul(dxiF, dxG), axis=-3)
    return out[..., 0, 0] if out.shape[-2:] == (1, 1) else out


@dataclass(frozen=True)
class PhaseFunction:
    """A (matrix- or scalar-valued) function on phase space with derivatives.

    ``dx(p)`` and ``dxi(p)`` return arrays with the direction index k on the
    axis preceding the matrix axes (or on the last axis for scalars).
    """
    value: Callable
    dx: Callable
    dxi: Callable


def matrix_poisson_bracket(F, G):
    """Return the evaluator p -> {F, G}(p)."""
    def evaluator(p):
        return poisson_bracket_arrays(F.dx(p), F.dxi(p), G.dx(p), G.dxi(p))
    return evaluator


def symbol_function(model, name, species=+1):
    """Wrap one of ``lambda``, ``Pi``, ``P0`` or ``P`` as a PhaseFunction."""
    def cached(attr):
        def f(p):
            return getattr(_derivatives_from(eval_symbol(model, p)), attr)
        return f

    if name == "lambda":
        return PhaseFunction(lambda p: eval_symbol(model, p).lam(species),
                             lambda p: symbol_derivatives(model, p).get("dx_lambda", species),
                             lambda p: symbol_derivatives(model, p).get("dxi_lambda", species))
    if name == "Pi":
        return PhaseFunction(lambda p: eval_symbol(model, p).Pi(species),
                             lambda p: symbol_derivatives(model, p).get("dx_Pi", species),
                             lambda p: symbol_derivatives(model, p).get("dxi_Pi", species))
    if name in ("P0", "P"):
        return PhaseFunction(lambda p: getattr(eval_symbol(model, p), name),
                             cached(f"dx_{name}"), cached(f"dxi_{name}"))
    raise ValueError(f"unknown symbol function {name!r}")


# ---------------------------------------------------------------------------
# Berry term and Poissonian curvature


def berry_term_from(ev, species):
    """-1/(2<v>^2) (beta alpha.F + i gamma5 alpha.(v x F)), F the Lorentz force.

    The sign of the gamma5 term is the one that reproduces the definition
    [Pi, {lambda, Pi} - dt Pi]; see ``berry_term``.
    """
    fs = fields_from_record(ev.potentials)
    F = lorentz_force(fs, ev.v, species)
    term = BETA @ alpha_dot(F) + 1j * GAMMA5 @ alpha_dot(np.cross(ev.v, F))
    return -term / _sc(2.0 * ev.gamma ** 2)


def berry_term(model, p, species):
    """Berry term for electrons (species=+1) or positrons (species=-1).

    Equals [Pi, {lambda, Pi} - dt Pi] with Pi, lambda of the given species.
    The Lorentz force includes the induced electric field -dA/dt.
    """
    return berry_term_from(eval_symbol(model, p), species)


def poissonian_curvature_from(ev, species):
    B = fields_from_record(ev.potentials).B
    Pi = ev.Pi(species)
    inner = 1j * GAMMA5 @ alpha_dot(B)
    return species * (Pi @ inner @ Pi) / _sc(2.0 * ev.gamma)


def poissonian_curvature(model, p, species):
    """+-(1/(2<v>)) Pi (i gamma5 alpha.B) Pi."""
    return poissonian_curvature_from(eval_symbol(model, p), species)
