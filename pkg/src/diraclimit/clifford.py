"""Dirac and Pauli matrices in the standard (Dirac) representation.

All constants are read-only ``complex128`` arrays of shape ``(4, 4)`` (Pauli
matrices ``(2, 2)``).  Functions accept stacked inputs where it is cheap to do
so, i.e. vectors of shape ``(..., 3)`` give matrices of shape ``(..., 4, 4)``.
"""
import numpy as np

__all__ = [
    "SIGMA", "ALPHA", "BETA", "GAMMA5", "I4",
    "dirac_matrix", "alpha_dot", "bracket", "commutator", "anticommutator",
    "exp_i_alpha_dot",
]


def _frozen(a):
    a = np.asarray(a, dtype=complex)
    a.setflags(write=False)
    return a


I2 = _frozen(np.eye(2))
SIGMA = _frozen([
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
])

_Z2 = np.zeros((2, 2))
BETA = _frozen(np.block([[I2, _Z2], [_Z2, -I2]]))
ALPHA = _frozen([np.block([[_Z2, s], [s, _Z2]]) for s in SIGMA])
GAMMA5 = _frozen(-1j * ALPHA[0] @ ALPHA[1] @ ALPHA[2])
I4 = _frozen(np.eye(4))

_BY_NAME = {
    "alpha1": ALPHA[0],
    "alpha2": ALPHA[1],
    "alpha3": ALPHA[2],
    "beta": BETA,
    "gamma5": GAMMA5,
    "identity": I4,
}


def dirac_matrix(kind):
    """Return one of the distinguished 4x4 matrices by name.

    ``kind`` is one of ``alpha1, alpha2, alpha3, beta, gamma5, identity``.
    """
    try:
        return _BY_NAME[kind]
    except KeyError:
        raise ValueError(f"unknown Dirac matrix {kind!r}; "
                         f"expected one of {sorted(_BY_NAME)}") from None


def alpha_dot(a, alpha=ALPHA):
    """Sum_k alpha_k a_k for a real 3-vector (or a stack of them)."""
    a = np.asarray(a)
    return np.einsum("...k,kij->...ij", a, alpha)


def commutator(a, b):
    return a @ b - b @ a


def anticommutator(a, b):
    return a @ b + b @ a


def bracket(a, b, sign="commutator"):
    """AB - BA (``sign='commutator'``) or AB + BA (``sign='anticommutator'``)."""
    if sign == "commutator":
        return commutator(a, b)
    if sign == "anticommutator":
        return anticommutator(a, b)
    raise ValueError(f"sign must be 'commutator' or 'anticommutator', got {sign!r}")


def exp_i_alpha_dot(theta, a):
    """exp(i theta alpha.a) = cos(theta|a|) I + i sin(theta|a|) alpha.a/|a|.

    ``theta`` broadcasts against the leading shape of ``a``.
    """
    a = np.asarray(a, dtype=float)
    norm = np.linalg.norm(a, axis=-1)
    phase = np.asarray(theta) * norm
    # sin(theta |a|)/|a| -> theta as |a| -> 0
    safe = np.where(norm > 0, norm, 1.0)
    sinc = np.where(norm > 0, np.sin(phase) / safe, theta)
    return (np.cos(phase)[..., None, None] * I4
            + 1j * sinc[..., None, None] * alpha_dot(a))
