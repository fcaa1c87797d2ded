"""External potentials (A0, A), their first derivatives, and the fields E, B.

Units: c = q = 1, hbar = epsilon.  Sign convention for the electric field is

    E = grad A0 - dA/dt,      B = curl A,

i.e. the scalar potential enters the Hamiltonian as ``-A0`` and the force is
``+grad A0``.  This is *not* the usual textbook sign for E; it is the one
consistent with the symbol ``alpha.(xi - A) + beta - A0``.

Every evaluator is vectorised: ``x`` may have any shape ``(..., 3)``.
Reduced-dimension runs use ``model.restricted(d)``, which makes the potentials
depend on the first ``d`` coordinates only (all three components of A are kept,
so d=1 can still carry a magnetic field).
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "PotentialRecord", "FieldSample", "PotentialModel", "PRESETS",
    "make_potential", "eval_potentials", "eval_fields", "lorentz_force",
    "relativistic_velocity", "japanese_bracket",
]


def japanese_bracket(v):
    """<v> = sqrt(1 + |v|^2) over the last axis."""
    v = np.asarray(v, dtype=float)
    return np.sqrt(1.0 + np.sum(v * v, axis=-1))


def relativistic_velocity(v):
    """v/<v>; strictly shorter than 1 for every finite v."""
    v = np.asarray(v, dtype=float)
    return v / japanese_bracket(v)[..., None]


@dataclass(frozen=True)
class PotentialRecord:
    """Potentials and all analytic first derivatives at one or many points.

    ``jac_A[..., k, m]`` is dA_m/dx_k.
    """
    A0: np.ndarray
    A: np.ndarray
    dA0_dt: np.ndarray
    dA_dt: np.ndarray
    grad_A0: np.ndarray
    jac_A: np.ndarray

    def __add__(self, other):
        return PotentialRecord(*(getattr(self, f) + getattr(other, f)
                                 for f in _RECORD_FIELDS))


_RECORD_FIELDS = ("A0", "A", "dA0_dt", "dA_dt", "grad_A0", "jac_A")


def _zero_record(shape):
    return PotentialRecord(
        A0=np.zeros(shape), A=np.zeros(shape + (3,)),
        dA0_dt=np.zeros(shape), dA_dt=np.zeros(shape + (3,)),
        grad_A0=np.zeros(shape + (3,)), jac_A=np.zeros(shape + (3, 3)),
    )


@dataclass(frozen=True)
class FieldSample:
    E: np.ndarray
    B: np.ndarray


# ---------------------------------------------------------------------------
# preset terms


def _vec(value, name):
    v = np.asarray(value, dtype=float).reshape(-1)
    if v.size != 3 or not np.all(np.isfinite(v)):
        raise ConfigurationError(f"{name} must be a finite 3-vector, got {value!r}")
    return v


def _scalar(value, name, positive=False):
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{name} must be a number, got {value!r}") from None
    if not np.isfinite(v) or (positive and v <= 0):
        raise ConfigurationError(f"{name} must be {'positive and ' if positive else ''}finite, got {value!r}")
    return v


class _Term:
    name = ""

    def evaluate(self, t, x):
        raise NotImplementedError

    def params(self):
        return {}


class _Zero(_Term):
    name = "zero"

    def evaluate(self, t, x):
        return _zero_record(x.shape[:-1])


class _Constant(_Term):
    """Constant A0 and A (pure gauge; no fields)."""
    name = "constant"

    def __init__(self, A0=0.0, A=(0.0, 0.0, 0.0)):
        self.a0 = _scalar(A0, "A0")
        self.a = _vec(A, "A")

    def evaluate(self, t, x):
        rec = _zero_record(x.shape[:-1])
        rec.A0[...] = self.a0
        rec.A[...] = self.a
        return rec

    def params(self):
        return {"A0": self.a0, "A": self.a.tolist()}


class _UniformE(_Term):
    """A0 = E0.x, A = 0, so that E = E0."""
    name = "uniform_E"

    def __init__(self, E0=(1.0, 0.0, 0.0)):
        self.e0 = _vec(E0, "E0")

    def evaluate(self, t, x):
        rec = _zero_record(x.shape[:-1])
        rec.A0[...] = x @ self.e0
        rec.grad_A0[...] = self.e0
        return rec

    def params(self):
        return {"E0": self.e0.tolist()}


class _UniformB(_Term):
    """A = (0, B3 x1, B1 x2 - B2 x1); curl A = (B1, B2, B3).

    The gauge is chosen so that x1-only runs still see B2 and B3.
    """
    name = "uniform_B"

    def __init__(self, B0=(0.0, 0.0, 1.0)):
        self.b0 = _vec(B0, "B0")

    def evaluate(self, t, x):
        b1, b2, b3 = self.b0
        rec = _zero_record(x.shape[:-1])
        rec.A[..., 1] = b3 * x[..., 0]
        rec.A[..., 2] = b1 * x[..., 1] - b2 * x[..., 0]
        rec.jac_A[..., 0, 1] = b3
        rec.jac_A[..., 1, 2] = b1
        rec.jac_A[..., 0, 2] = -b2
        return rec

    def params(self):
        return {"B0": self.b0.tolist()}


class _GaussianBumpA0(_Term):
    """A0 = amplitude * exp(-|x - center|^2 / width^2), static."""
    name = "gaussian_bump_A0"

    def __init__(self, amplitude=1.0, width=1.0, center=(0.0, 0.0, 0.0)):
        self.amplitude = _scalar(amplitude, "amplitude")
        self.width = _scalar(width, "width", positive=True)
        self.center = _vec(center, "center")

    def evaluate(self, t, x):
        r = x - self.center
        a0 = self.amplitude * np.exp(-np.sum(r * r, axis=-1) / self.width ** 2)
        rec = _zero_record(x.shape[:-1])
        rec.A0[...] = a0
        rec.grad_A0[...] = (-2.0 / self.width ** 2) * r * a0[..., None]
        return rec

    def params(self):
        return {"amplitude": self.amplitude, "width": self.width,
                "center": self.center.tolist()}


class _TimePulse(_Term):
    """A(t, x) = a g(t) h(x.k - s0), A0 = 0.

    g(t) = exp(-((t - t0)/duration)^2) cos(omega (t - t0)),
    h(s) = exp(-(s/length)^2).

    With ``a`` orthogonal to ``k`` the pulse carries both an electric field
    (-dA/dt) and a magnetic field (curl A).
    """
    name = "time_pulse"

    def __init__(self, amplitude=(0.0, 0.1, 0.0), direction=(1.0, 0.0, 0.0),
                 t0=0.5, duration=0.5, omega=0.0, length=1.0, offset=0.0):
        self.a = _vec(amplitude, "amplitude")
        k = _vec(direction, "direction")
        nk = np.linalg.norm(k)
        if nk == 0:
            raise ConfigurationError("direction must be nonzero")
        self.k = k / nk
        self.t0 = _scalar(t0, "t0")
        self.duration = _scalar(duration, "duration", positive=True)
        self.omega = _scalar(omega, "omega")
        self.length = _scalar(length, "length", positive=True)
        self.offset = _scalar(offset, "offset")

    def envelope(self, t):
        s = (t - self.t0) / self.duration
        gauss = np.exp(-s * s)
        phase = self.omega * (t - self.t0)
        g = gauss * np.cos(phase)
        dg = gauss * (-2.0 * s / self.duration * np.cos(phase) - self.omega * np.sin(phase))
        return g, dg

    def evaluate(self, t, x):
        g, dg = self.envelope(float(t))
        s = x @ self.k - self.offset
        h = np.exp(-(s / self.length) ** 2)
        dh = (-2.0 * s / self.length ** 2) * h
        rec = _zero_record(x.shape[:-1])
        rec.A[...] = (g * h)[..., None] * self.a
        rec.dA_dt[...] = (dg * h)[..., None] * self.a
        rec.jac_A[...] = g * dh[..., None, None] * np.outer(self.k, self.a)
        return rec

    def params(self):
        return {"amplitude": self.a.tolist(), "direction": self.k.tolist(),
                "t0": self.t0, "duration": self.duration, "omega": self.omega,
                "length": self.length, "offset": self.offset}


PRESETS = {cls.name: cls for cls in
           (_Zero, _Constant, _UniformE, _UniformB, _GaussianBumpA0, _TimePulse)}


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PotentialModel:
    """Sum of preset terms, optionally restricted to the first ``active_dims``
    spatial coordinates.  Immutable; evaluation is pure."""
    terms: tuple = field(default_factory=tuple)
    active_dims: int = 3

    @classmethod
    def from_preset(cls, name, **params):
        try:
            term_cls = PRESETS[name]
        except KeyError:
            raise ConfigurationError(f"unknown potential preset {name!r}; "
                                     f"known presets: {sorted(PRESETS)}") from None
        try:
            term = term_cls(**params)
        except TypeError as exc:
            raise ConfigurationError(f"bad parameters for preset {name!r}: {exc}") from None
        return cls(terms=(term,))

    def __add__(self, other):
        if self.active_dims != other.active_dims:
            raise ConfigurationError("cannot add models with different active dimensions")
        return PotentialModel(self.terms + other.terms, self.active_dims)

    def restricted(self, d):
        if d not in (1, 2, 3):
            raise ConfigurationError(f"active dimension must be 1, 2 or 3, got {d}")
        return PotentialModel(self.terms, d)

    @property
    def is_static(self):
        return all(not isinstance(t, _TimePulse) for t in self.terms)

    def describe(self):
        return [{"preset": t.name, **t.params()} for t in self.terms]

    def evaluate(self, t, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != 3:
            raise ValueError(f"positions must have a trailing axis of length 3, got {x.shape}")
        d = self.active_dims
        if d < 3:
            x = x.copy()
            x[..., d:] = 0.0
        rec = _zero_record(x.shape[:-1])
        for term in self.terms:
            rec = rec + term.evaluate(t, x)
        if d < 3:
            rec.grad_A0[..., d:] = 0.0
            rec.jac_A[..., d:, :] = 0.0
        return rec


def make_potential(spec, active_dims=3):
    """Build a model from a preset name, a ``{"preset": name, ...}`` mapping,
    or a list of such mappings (summed)."""
    if isinstance(spec, str):
        model = PotentialModel.from_preset(spec)
    elif isinstance(spec, dict):
        params = dict(spec)
        try:
            name = params.pop("preset")
        except KeyError:
            raise ConfigurationError("potential specification needs a 'preset' key") from None
        model = PotentialModel.from_preset(name, **params)
    else:
        terms = [make_potential(s) for s in spec]
        if not terms:
            raise ConfigurationError("empty potential list")
        model = terms[0]
        for m in terms[1:]:
            model = model + m
    return model.restricted(active_dims)


def eval_potentials(model, t, x):
    return model.evaluate(t, x)


def curl_from_jacobian(jac):
    return np.stack([
        jac[..., 1, 2] - jac[..., 2, 1],
        jac[..., 2, 0] - jac[..., 0, 2],
        jac[..., 0, 1] - jac[..., 1, 0],
    ], axis=-1)


def fields_from_record(rec):
    return FieldSample(E=rec.grad_A0 - rec.dA_dt, B=curl_from_jacobian(rec.jac_A))


def eval_fields(model, t, x):
    return fields_from_record(model.evaluate(t, x))


def lorentz_force(sample, v, species):
    """F = E + species * (v/<v>) x B; species is +1 (electron) or -1 (positron)."""
    u = relativistic_velocity(v)
    return sample.E + species * np.cross(u, sample.B)
