"""Registry of algebraic and differential identities checked at random points.

Each identity is a function ``check(rng, algebra, n)`` returning the largest
error observed over ``n`` random samples.  ``algebra`` carries the Dirac
matrices used by the pure Clifford checks so that a corrupted matrix set can be
injected (the suite must then flag it).  Checks built on the symbol module
always use the library matrices.
"""
from dataclasses import dataclass
import time

import numpy as np

from . import clifford
from .emfield import fields_from_record, make_potential
from .symbol import (PhasePoint, _derivatives_from, berry_term_from, eval_symbol,
                     poisson_bracket_arrays, poissonian_curvature_from)

__all__ = ["Algebra", "IdentityResult", "IDENTITIES", "run_identities", "reference_model"]


@dataclass(frozen=True)
class Algebra:
    alpha: np.ndarray = clifford.ALPHA
    beta: np.ndarray = clifford.BETA
    gamma5: np.ndarray = clifford.GAMMA5

    def dot(self, a):
        return np.einsum("...k,kij->...ij", a, self.alpha)


@dataclass(frozen=True)
class IdentityResult:
    name: str
    max_error: float
    tolerance: float
    samples: int
    seconds: float

    @property
    def passed(self):
        return bool(np.isfinite(self.max_error) and self.max_error <= self.tolerance)


def reference_model():
    """Time-dependent composite preset: grad A0, dA/dt and curl A all nonzero."""
    return make_potential([
        {"preset": "gaussian_bump_A0", "amplitude": 0.7, "width": 1.3, "center": [0.1, 0.2, -0.3]},
        {"preset": "time_pulse", "amplitude": [0.2, 0.5, -0.3], "direction": [1, 2, 0.5],
         "omega": 2.0, "t0": 0.5, "duration": 0.6},
        {"preset": "uniform_B", "B0": [0.3, -0.4, 0.8]},
    ])


def _random_point(rng):
    return PhasePoint(rng.uniform(0.0, 1.0), rng.normal(size=3), 2.0 * rng.normal(size=3))


def _random_matrix(rng, shape=()):
    return rng.normal(size=shape + (4, 4)) + 1j * rng.normal(size=shape + (4, 4))


def _err(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


# ---------------------------------------------------------------------------
# Clifford level (use the injected algebra)


def check_anticommutation(rng, alg, n):
    gens = list(alg.alpha) + [alg.beta]
    err = 0.0
    for a in range(4):
        for b in range(4):
            err = max(err, _err(gens[a] @ gens[b] + gens[b] @ gens[a], 2.0 * (a == b) * np.eye(4)))
    # same statement for random linear combinations
    c = rng.normal(size=(n, 4))
    M = np.einsum("nk,kij->nij", c, np.array(gens))
    err = max(err, _err(M @ M, np.sum(c * c, axis=1)[:, None, None] * np.eye(4)))
    return err


def check_product_rule(rng, alg, n):
    a, b = rng.normal(size=(2, n, 3))
    lhs = alg.dot(a) @ alg.dot(b)
    rhs = (np.sum(a * b, axis=1)[:, None, None] * np.eye(4)
           + 1j * alg.gamma5 @ alg.dot(np.cross(a, b)))
    return _err(lhs, rhs)


def check_gamma5_cross(rng, alg, n):
    a, b = rng.normal(size=(2, n, 3))
    A, B = alg.dot(a), alg.dot(b)
    return _err(A @ B - B @ A, 2j * alg.gamma5 @ alg.dot(np.cross(a, b)))


def check_commutator_P0_alpha(rng, alg, n):
    v, a = rng.normal(size=(2, n, 3))
    P0 = alg.dot(v) + alg.beta
    A = alg.dot(a)
    rhs = 2j * alg.gamma5 @ alg.dot(np.cross(v, a)) + 2 * alg.beta @ A
    return _err(P0 @ A - A @ P0, rhs)


def check_double_commutator(rng, alg, n):
    # [S,[S,A]] = 4A whenever Pi_pm A Pi_pm = 0
    v = 2 * rng.normal(size=(n, 3))
    g = np.sqrt(1 + np.sum(v * v, axis=1))[:, None, None]
    S = (alg.dot(v) + alg.beta) / g
    Pp, Pm = 0.5 * (np.eye(4) + S), 0.5 * (np.eye(4) - S)
    A = Pp @ _random_matrix(rng, (n,)) @ Pm + Pm @ _random_matrix(rng, (n,)) @ Pp
    SA = S @ A - A @ S
    return _err(S @ SA - SA @ S, 4 * A)


# ---------------------------------------------------------------------------
# symbol level


def _points(rng, n):
    model = reference_model()
    for _ in range(n):
        p = _random_point(rng)
        ev = eval_symbol(model, p)
        yield model, p, ev, _derivatives_from(ev)


def check_projector_laws(rng, alg, n):
    err = 0.0
    I4 = np.eye(4)
    for _, _, ev, _ in _points(rng, n):
        Pp, Pm = ev.Pi_plus, ev.Pi_minus
        err = max(err, _err(Pp @ Pp, Pp), _err(Pm @ Pm, Pm), _err(Pp @ Pm, 0),
                  _err(Pp + Pm, I4), _err(Pp, Pp.conj().T), _err(Pm, Pm.conj().T),
                  _err(ev.S @ ev.S, I4), _err(ev.P0 @ ev.P0, ev.gamma ** 2 * I4) / ev.gamma ** 2)
    return err


def check_spectral_recomposition(rng, alg, n):
    err = 0.0
    for _, _, ev, _ in _points(rng, n):
        err = max(err, _err(ev.P, ev.lambda_plus * ev.Pi_plus + ev.lambda_minus * ev.Pi_minus))
    return err


def check_intertwining(rng, alg, n):
    err = 0.0
    for _, _, ev, _ in _points(rng, n):
        for s in (1, -1):
            for k in range(3):
                a = clifford.ALPHA[k]
                lhs = ev.Pi(s) @ a - a @ ev.Pi(-s)
                err = max(err, _err(lhs, s * ev.v[k] / ev.gamma * np.eye(4)))
    return err


def _derivations(d, s):
    """All first derivatives of Pi_s as a list of 4x4 matrices."""
    dP = d.get("dx_Pi", s)
    dQ = d.get("dxi_Pi", s)
    return [dP[k] for k in range(3)] + [dQ[k] for k in range(3)] + [d.get("dt_Pi", s)]


def check_projection_derivation(rng, alg, n):
    # Pi (D Pi) Pi = 0 and Pi_1 (D Pi_2) Pi_1 = 0
    err = 0.0
    for _, _, ev, d in _points(rng, n):
        for s in (1, -1):
            Pi = ev.Pi(s)
            for D in _derivations(d, s) + _derivations(d, -s):
                err = max(err, _err(Pi @ D @ Pi, 0))
    return err


def check_compression_lemma(rng, alg, n):
    # W = Pi M Pi + Q N Q (commutes with Pi), derivation along a direction with
    # D M = M1, D N = N1.  Check Pi (DW) Pi = D(Pi W Pi) - [Pi W, [Pi, D Pi]].
    err = 0.0
    for _, _, ev, d in _points(rng, n):
        for s in (1, -1):
            Pi = ev.Pi(s)
            Q = np.eye(4) - Pi
            M, M1, N, N1 = (_random_matrix(rng) for _ in range(4))
            for D in _derivations(d, s):
                W = Pi @ M @ Pi + Q @ N @ Q
                DW = (D @ M @ Pi + Pi @ M1 @ Pi + Pi @ M @ D
                      - D @ N @ Q + Q @ N1 @ Q - Q @ N @ D)
                D_PWP = D @ M @ Pi + Pi @ M1 @ Pi + Pi @ M @ D
                PW = Pi @ W
                inner = Pi @ D - D @ Pi
                rhs = D_PWP - (PW @ inner - inner @ PW)
                scale = 1 + np.abs(M).max() + np.abs(N).max()
                err = max(err, _err(Pi @ DW @ Pi, rhs) / scale)
    return err


def _fd_symbol_derivatives(model, p, h):
    """Central differences of lambda_pm, Pi_pm (x, xi, t) and P (t)."""
    out = {k: [] for k in ("dx_lambda_plus", "dxi_lambda_plus", "dx_lambda_minus",
                           "dxi_lambda_minus", "dx_Pi_plus", "dxi_Pi_plus",
                           "dx_Pi_minus", "dxi_Pi_minus")}
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        for var in ("x", "xi"):
            pp = PhasePoint(p.t, p.x + e, p.xi) if var == "x" else PhasePoint(p.t, p.x, p.xi + e)
            pm = PhasePoint(p.t, p.x - e, p.xi) if var == "x" else PhasePoint(p.t, p.x, p.xi - e)
            a, b = eval_symbol(model, pp), eval_symbol(model, pm)
            for s, tag in ((1, "plus"), (-1, "minus")):
                out[f"d{var}_lambda_{tag}"].append((a.lam(s) - b.lam(s)) / (2 * h))
                out[f"d{var}_Pi_{tag}"].append((a.Pi(s) - b.Pi(s)) / (2 * h))
    res = {k: np.array(v) for k, v in out.items()}
    a = eval_symbol(model, PhasePoint(p.t + h, p.x, p.xi))
    b = eval_symbol(model, PhasePoint(p.t - h, p.x, p.xi))
    res["dt_Pi_plus"] = (a.Pi_plus - b.Pi_plus) / (2 * h)
    res["dt_Pi_minus"] = (a.Pi_minus - b.Pi_minus) / (2 * h)
    res["dt_P"] = (a.P - b.P) / (2 * h)
    return res


def fd_relative_errors(rng, n, steps):
    """Largest relative error of the closed forms vs central differences,
    one value per step size.  Relative to max(1, |closed form|)."""
    errs = np.zeros(len(steps))
    for model, p, _, d in _points(rng, n):
        for i, h in enumerate(steps):
            fd = _fd_symbol_derivatives(model, p, h)
            for key, val in fd.items():
                exact = getattr(d, key)
                errs[i] = max(errs[i], _err(val, exact) / max(1.0, float(np.abs(exact).max())))
    return errs


def check_derivatives_fd(rng, alg, n):
    return float(fd_relative_errors(rng, n, [1e-4])[0])


def check_derivatives_fd_order(rng, alg, n):
    """|observed order - 2| under step halving (h = 2e-2 -> 1e-2 -> 5e-3)."""
    e = fd_relative_errors(rng, min(n, 20), [2e-2, 1e-2, 5e-3])
    orders = np.log2(e[:-1] / e[1:])
    return float(np.max(np.abs(orders - 2.0)))


def check_bracket_lambda_Pi(rng, alg, n):
    err = 0.0
    I4 = np.eye(4)
    for _, _, ev, d in _points(rng, n):
        fs = fields_from_record(ev.potentials)
        g, v, P0 = ev.gamma, ev.v, ev.P0
        gradA0 = ev.potentials.grad_A0
        for s in (1, -1):
            generic = poisson_bracket_arrays(d.get("dx_lambda", s), d.get("dxi_lambda", s),
                                             d.get("dx_Pi", s), d.get("dxi_Pi", s))
            closed = (-clifford.alpha_dot(np.cross(v / g, fs.B)) / (2 * g)
                      - s / (2 * g) * (clifford.alpha_dot(gradA0) - P0 * (v @ gradA0) / g ** 2))
            err = max(err, _err(generic, closed))
    return err


def check_bracket_alpha_v(rng, alg, n):
    # {alpha.v, alpha.v} = 2 i gamma5 alpha.B, using d(alpha.v) = dP0
    err = 0.0
    for _, _, ev, d in _points(rng, n):
        B = fields_from_record(ev.potentials).B
        br = poisson_bracket_arrays(d.dx_P0, d.dxi_P0, d.dx_P0, d.dxi_P0)
        err = max(err, _err(br, 2j * clifford.GAMMA5 @ clifford.alpha_dot(B)))
    return err


def check_bracket_product_identity(rng, alg, n):
    # A{B,C} - {A,B}C = {AB,C} - {A,BC} for quadratic matrix polynomials
    def poly():
        c = _random_matrix(rng, (7,))
        # F = c0 + x.c[1:4] + xi.c[4:7] + (x.xi) c0'; derivatives in closed form
        c2 = _random_matrix(rng)

        def value(x, xi):
            return c[0] + np.einsum("k,kij->ij", x, c[1:4]) + np.einsum("k,kij->ij", xi, c[4:7]) + (x @ xi) * c2

        def dx(x, xi):
            return c[1:4] + xi[:, None, None] * c2

        def dxi(x, xi):
            return c[4:7] + x[:, None, None] * c2
        return value, dx, dxi

    def prod(F, G):
        return (lambda x, xi: F[0](x, xi) @ G[0](x, xi),
                lambda x, xi: F[1](x, xi) @ G[0](x, xi) + F[0](x, xi) @ G[1](x, xi),
                lambda x, xi: F[2](x, xi) @ G[0](x, xi) + F[0](x, xi) @ G[2](x, xi))

    def br(F, G, x, xi):
        return poisson_bracket_arrays(F[1](x, xi), F[2](x, xi), G[1](x, xi), G[2](x, xi))

    err = 0.0
    for _ in range(n):
        A, B, C = poly(), poly(), poly()
        x, xi = rng.normal(size=(2, 3))
        lhs = A[0](x, xi) @ br(B, C, x, xi) - br(A, B, x, xi) @ C[0](x, xi)
        rhs = br(prod(A, B), C, x, xi) - br(A, prod(B, C), x, xi)
        err = max(err, _err(lhs, rhs) / (1 + np.abs(lhs).max()))
    return err


def check_berry_term(rng, alg, n):
    err = 0.0
    for _, _, ev, d in _points(rng, n):
        for s in (1, -1):
            Pi = ev.Pi(s)
            X = poisson_bracket_arrays(d.get("dx_lambda", s), d.get("dxi_lambda", s),
                                       d.get("dx_Pi", s), d.get("dxi_Pi", s)) - d.get("dt_Pi", s)
            err = max(err, _err(Pi @ X - X @ Pi, berry_term_from(ev, s)))
    return err


def check_poissonian_curvature(rng, alg, n):
    err = 0.0
    for _, _, ev, d in _points(rng, n):
        for s in (1, -1):
            Pi = ev.Pi(s)
            br = poisson_bracket_arrays(d.get("dx_Pi", -s), d.get("dxi_Pi", -s),
                                        d.get("dx_Pi", -s), d.get("dxi_Pi", -s))
            err = max(err, _err(s * ev.gamma * Pi @ br @ Pi, poissonian_curvature_from(ev, s)))
    return err


# name -> (check, tolerance)
IDENTITIES = {
    "clifford_anticommutation": (check_anticommutation, 1e-10),
    "alpha_product_rule": (check_product_rule, 1e-10),
    "gamma5_cross_identity": (check_gamma5_cross, 1e-10),
    "commutator_P0_alpha": (check_commutator_P0_alpha, 1e-10),
    "double_commutator_S": (check_double_commutator, 1e-10),
    "projector_laws": (check_projector_laws, 1e-10),
    "spectral_recomposition": (check_spectral_recomposition, 1e-12),
    "intertwining_Pi_alpha": (check_intertwining, 1e-10),
    "projection_derivation_lemma": (check_projection_derivation, 1e-10),
    "compression_lemma": (check_compression_lemma, 1e-10),
    "derivatives_vs_finite_differences": (check_derivatives_fd, 1e-6),
    "derivatives_fd_order": (check_derivatives_fd_order, 0.2),
    "bracket_lambda_Pi": (check_bracket_lambda_Pi, 1e-10),
    "bracket_alpha_v": (check_bracket_alpha_v, 1e-10),
    "bracket_product_identity": (check_bracket_product_identity, 1e-10),
    "berry_term_definition": (check_berry_term, 1e-10),
    "poissonian_curvature_definition": (check_poissonian_curvature, 1e-10),
}


def run_identities(algebra=None, n=100, seed=0, names=None):
    """Run the registered identities and return one IdentityResult each."""
    algebra = algebra or Algebra()
    results = []
    for name, (check, tol) in IDENTITIES.items():
        if names is not None and name not in names:
            continue
        rng = np.random.default_rng([seed, len(results)])
        t0 = time.perf_counter()
        try:
            err = float(check(rng, algebra, n))
        except Exception:   # a crashing check is a failed check
            err = float("inf")
        results.append(IdentityResult(name, err, tol, n, time.perf_counter() - t0))
    return results
