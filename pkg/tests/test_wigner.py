import numpy as np
import pytest

from diraclimit import wigner as wg
from diraclimit.densities import GaussianDensity
from diraclimit.dirac_solver import (SpatialGrid, diagnostics, evolve, make_coherent_state,
                                     sample_mixed_state)
from diraclimit.emfield import make_potential
from diraclimit.errors import DimensionError, MissingInputError

ZERO1 = make_potential("zero", active_dims=1)


def td_model_1d():
    return make_potential([
        {"preset": "gaussian_bump_A0", "amplitude": 0.5, "width": 0.6, "center": [0.3, 0, 0]},
        {"preset": "time_pulse", "amplitude": [0, 0.3, 0], "t0": 0.3, "duration": 0.3},
    ], active_dims=1)


@pytest.fixture(scope="module")
def coherent():
    g = SpatialGrid(1, 256, 6.4)
    return make_coherent_state(g, 0.2, ([-0.3], [0.5]), 1)


def test_gaussian_oracle(coherent):
    W = wg.wigner_transform(coherent)
    X, Xi = W.coords()
    eps = 0.2
    profile = np.exp(-((X[..., 0] + 0.3) ** 2 + (Xi[..., 0] - 0.5) ** 2) / eps) / (np.pi * eps)
    w = coherent.values[:, 128] / np.linalg.norm(coherent.values[:, 128])
    exact = profile[..., None, None] * np.outer(w, w.conj())
    err = np.abs(W.values - exact).max() / np.abs(exact).max()
    assert err <= 0.01
    assert err < 1e-5       # only the |j| < n/4 cut of the Gaussian tail remains


def test_mass_and_hermiticity(coherent):
    W = wg.wigner_transform(coherent)
    assert abs(W.meta["full_mass"] - 1) <= 1e-10
    assert abs(W.mass() - 1) <= 1e-10
    assert W.hermiticity_error() < 1e-13


def test_mixed_state_mass():
    g = SpatialGrid(1, 128, 6.4)
    f = GaussianDensity.create(1, x0=-0.4, v0=0.5, sigma_x=0.3, sigma_v=0.3)
    st = sample_mixed_state(g, 0.4, f, 64, 1, 0)
    W = wg.wigner_transform(st)
    assert abs(W.mass() - 1) <= 1e-10
    assert W.hermiticity_error() < 1e-13
    assert wg.pair(np.real(W.trace()), W, lambda X, Xi: np.ones(X.shape[:-1])) == pytest.approx(1.0)


def test_moments_match_diagnostics(td_model):
    g = SpatialGrid(1, 128, 6.4)
    m = td_model_1d()
    f = GaussianDensity.create(1, x0=0.0, v0=0.3, sigma_x=0.3, sigma_v=0.3)
    st = sample_mixed_state(g, 0.4, f, 32, 1, 0, model=m)
    W = wg.wigner_transform(st, 0.1)
    mom = wg.moments(W)
    dg = diagnostics(st, m, 0.1)
    assert np.abs(mom["rho"] - dg.rho).max() < 1e-12
    assert np.abs(mom["J"] - dg.J).max() < 1e-12


def test_window_rows_match_full(coherent):
    full = wg.wigner_transform(coherent)
    ps = wg.PhaseSpaceGrid.windowed(coherent.grid, 0.2, -1.0, 2.0)
    win = wg.wigner_transform(coherent, psgrid=ps)
    rows = ps.window_rows()
    assert np.allclose(win.values, full.values[:, rows], atol=1e-15)
    assert win.meta["full_mass"] == pytest.approx(full.meta["full_mass"], abs=1e-15)
    with pytest.raises(DimensionError):
        wg.moments(win)
    assert ps.xi_axis()[0] <= -1.0 and ps.xi_axis()[-1] >= 2.0


def test_theta_linear_equals_xi_derivative(coherent):
    W = wg.wigner_transform(coherent)
    c = 0.7

    def g(X):
        return c * X[..., 0] + 0.3
    th = wg.apply_pdo("theta", g, W)
    dxi = wg.xi_derivative(W, 0)
    assert np.abs(th - c * dxi).max() <= 1e-10
    # tau of a constant is the identity
    tau = wg.apply_pdo("tau", lambda X: np.full(X.shape[:-1], 2.0), W)
    assert np.abs(tau - 2 * W.values).max() < 1e-12
    # Delta of a linear function vanishes
    dl = wg.apply_pdo("delta", g, W)
    assert np.abs(dl).max() < 1e-10


def test_xi_derivative_gaussian(coherent):
    W = wg.wigner_transform(coherent)
    X, Xi = W.coords()
    d = wg.xi_derivative(W, 0)
    exact = (-2 * (Xi[..., 0] - 0.5) / 0.2)[..., None, None] * W.values
    assert np.abs(d - exact).max() < 1e-4 * np.abs(exact).max()
    dx = wg.x_derivative(W, 0)
    exact = (-2 * (X[..., 0] + 0.3) / 0.2)[..., None, None] * W.values
    # the Nyquist wavenumber is dropped so the derivative of a Hermitian field stays Hermitian
    assert np.abs(dx - exact).max() < 1e-4 * np.abs(exact).max()


@pytest.mark.parametrize("spec", [
    "zero",
    {"preset": "constant", "A0": 0.4, "A": [0.1, -0.2, 0.3]},
    {"preset": "uniform_E", "E0": [0.5, -0.3, 0.2]},
    {"preset": "uniform_B", "B0": [0.3, -0.4, 0.8]},
    [{"preset": "uniform_E", "E0": [0.5, 0, 0]}, {"preset": "uniform_B", "B0": [0, 0.2, 0.6]}],
])
def test_remainder_vanishes_for_linear_potentials(coherent, spec):
    m = make_potential(spec, active_dims=1)
    W = wg.wigner_transform(coherent)
    r = wg.remainder(W, m)
    assert np.abs(r).max() <= 1e-13


def test_remainder_nonzero_for_bump(coherent):
    W = wg.wigner_transform(coherent)
    assert np.abs(wg.remainder(W, td_model_1d())).max() > 1e-4


def _residuals(model, eps, levels, include_remainder=True):
    out = []
    for n, dt in levels:
        g = SpatialGrid(1, n, 6.4)
        c = make_coherent_state(g, eps, ([-0.5], [0.4]), 1, model=model, polarization="spectral")
        T = 0.4
        snaps = evolve(c, model, 0.0, T + dt, dt, snapshot_times=[T - dt, T])
        # the outermost xi rows carry ringing from the |j| < n/4 cut, so use a momentum window
        ps = wg.PhaseSpaceGrid.windowed(g, eps, -1.5, 2.5)
        Ws = [wg.wigner_transform(s, t, ps) for t, s in snaps]
        out.append(wg.dirac_wigner_residual(Ws, model, include_remainder=include_remainder))
    return out


def test_dirac_wigner_residual_second_order():
    m = td_model_1d()
    levels = [(256, 0.02), (512, 0.01), (1024, 0.005)]
    r = _residuals(m, 0.2, levels)
    assert r[0] > r[1] > r[2]
    assert r[0] / r[1] > 3 and r[1] / r[2] > 3
    # without the remainder the residual does not go away
    bare = _residuals(m, 0.2, levels[1:], include_remainder=False)
    assert bare[1] > 10 * r[2]


def test_residual_snapshot_validation(coherent):
    W = wg.wigner_transform(coherent)
    with pytest.raises(ValueError):
        wg.dirac_wigner_residual([W, W], ZERO1)
    W1 = wg.wigner_transform(coherent, 0.1)
    W2 = wg.wigner_transform(coherent, 0.3)
    with pytest.raises(ValueError):
        wg.dirac_wigner_residual([W, W1, W2], ZERO1)


def test_projection_and_constraint():
    g = SpatialGrid(1, 256, 6.4)
    m = td_model_1d()
    spec = make_coherent_state(g, 0.2, ([-0.3], [0.5]), 1, model=m, polarization="spectral")
    W = wg.wigner_transform(spec)
    pr = wg.project_species(W, m)
    assert pr["decomposition_residual"] < 1e-13
    total = np.sum(pr["f_plus"] + pr["f_minus"]) * W.grid.cell_volume
    assert total == pytest.approx(np.real(W.trace()).sum() * W.grid.cell_volume, abs=1e-12)
    assert np.sum(np.abs(pr["f_minus"])) * W.grid.cell_volume < 0.05
    c1 = wg.constraint_norm(W, m)
    g2 = SpatialGrid(1, 512, 6.4)
    spec2 = make_coherent_state(g2, 0.05, ([-0.3], [0.5]), 1, model=m, polarization="spectral")
    ps = wg.PhaseSpaceGrid.windowed(g2, 0.05, -1.5, 2.5)
    c2 = wg.constraint_norm(wg.wigner_transform(spec2, psgrid=ps), m)
    assert c2 < c1


def test_lagrange_multiplier_structure():
    g = SpatialGrid(1, 128, 6.4)
    m = td_model_1d()
    c = make_coherent_state(g, 0.4, ([-0.3], [0.5]), 1, model=m, polarization="spectral")
    W = wg.wigner_transform(c, 0.4)
    Y, diag = wg.lagrange_multiplier_Y(W, m)
    assert diag["norm"] > 0
    assert diag["antihermitian_norm"] < 1e-12 * diag["norm"]
    # static fields: the diagonal blocks vanish identically
    static = make_potential({"preset": "gaussian_bump_A0", "amplitude": 0.5}, active_dims=1)
    _, d2 = wg.lagrange_multiplier_Y(W, static)
    assert d2["diagonal_ratio"] < 1e-13


def test_dwig_roundtrip(tmp_path, coherent):
    ps = wg.PhaseSpaceGrid.windowed(coherent.grid, 0.2, -1.0, 2.0)
    W = wg.wigner_transform(coherent, 0.5, ps)
    path = tmp_path / "w.dwig"
    wg.write_dwig(path, W)
    back = wg.read_dwig(path)
    assert back.t == 0.5 and back.epsilon == 0.2
    assert back.grid.is_full
    rows = ps.window_rows()
    assert np.array_equal(back.values[:, rows], W.values)
    outside = np.ones(coherent.grid.n, dtype=bool)
    outside[rows] = False
    assert np.all(back.values[:, outside] == 0)
    size = 4 + 40 + 256 * 256 * 16 * 16
    assert path.stat().st_size == size
    with pytest.raises(MissingInputError):
        wg.read_dwig(tmp_path / "nope.dwig")


def test_write_csv(tmp_path):
    p = tmp_path / "a.csv"
    wg.write_csv(p, {"x": np.array([0.1, 0.2]), "n": np.array([1, 2])}, comments=["hello"])
    text = p.read_text()
    assert text == "# hello\nx,n\n0.1,1\n0.2,2\n"
    with pytest.raises(ValueError):
        wg.write_csv(p, {"x": [1.0], "y": [1.0, 2.0]})


def test_slice_matches_full_transform_2d():
    g = SpatialGrid(2, 16, 6.4)
    c = make_coherent_state(g, 0.8, ([0.2, -0.4], [0.5, 0.3]), 1)
    W = wg.wigner_transform(c)
    ps = W.grid
    i2, m2 = 9, 10
    xi2 = ps.xi_axis(1)[m2]
    sl = wg.wigner_slice(c, [i2], [xi2])
    assert sl.kind == "slice"
    assert np.allclose(sl.values, W.values[:, i2, :, m2], atol=1e-13)
    with pytest.raises(DimensionError):
        wg.moments(sl)
