import numpy as np
import pytest

from diraclimit.densities import GaussianDensity
from diraclimit.dirac_solver import (MixedState, SpatialGrid, SpinorField, diagnostics, evolve,
                                     make_coherent_state, make_plane_wave, read_dspn,
                                     sample_mixed_state, strang_step, write_dspn)
from diraclimit.emfield import japanese_bracket, make_potential
from diraclimit.errors import (ConfigurationError, DegenerateSpinorError, MissingInputError,
                               MixednessError)
from diraclimit.symbol import PhasePoint, eval_symbol

ZERO1 = make_potential("zero", active_dims=1)


def td_model_1d():
    return make_potential([
        {"preset": "gaussian_bump_A0", "amplitude": 0.5},
        {"preset": "time_pulse", "amplitude": [0, 0.3, 0.2], "t0": 0.3, "duration": 0.3},
    ], active_dims=1)


def test_grid_basics():
    g = SpatialGrid(1, 64, 6.4)
    assert g.spacing == pytest.approx(0.1)
    assert g.axis[0] == pytest.approx(-3.2)
    assert g.shape == (64,)
    with pytest.raises(ConfigurationError):
        SpatialGrid(1, 100, 6.4)
    assert g.max_momentum(0.2) == pytest.approx(np.pi * 0.2 / 0.2)


def test_plane_wave_exact_phase():
    g = SpatialGrid(1, 128, 2 * np.pi)
    eps = 0.5
    psi = make_plane_wave(g, eps, [3], 1)
    assert psi.norm() == pytest.approx(1.0)
    p = eps * 3.0
    out = evolve(psi, ZERO1, 0.0, 1.0, 1e-3)[-1][1]
    exact = np.exp(-1j * np.sqrt(1 + p * p) / eps) * psi.values
    assert np.abs(out.values - exact).max() <= 1e-8


def test_plane_wave_negative_band():
    g = SpatialGrid(1, 64, 2 * np.pi)
    psi = make_plane_wave(g, 0.5, [-2], -1)
    p = -1.0
    out = evolve(psi, ZERO1, 0.0, 0.5, 1e-2)[-1][1]
    assert np.allclose(out.values, np.exp(1j * np.sqrt(1 + p * p) * 0.5 / 0.5) * psi.values, atol=1e-10)


def test_norm_conserved_time_dependent():
    g = SpatialGrid(1, 128, 8.0)
    c = make_coherent_state(g, 0.1, ([-1.0], [0.5]), 1, model=td_model_1d())
    out = evolve(c, td_model_1d(), 0.0, 1.0, 1e-3)[-1][1]
    assert abs(out.norm() - 1) <= 1e-11


def test_second_order_in_dt():
    m = td_model_1d()
    g = SpatialGrid(1, 256, 8.0)
    c = make_coherent_state(g, 0.1, ([-1.0], [0.5]), 1, model=m)

    def run(dt):
        return evolve(c, m, 0.0, 0.6, dt)[-1][1].values
    a, b, d = run(0.02), run(0.01), run(0.005)
    ratio = np.linalg.norm(a - b) / np.linalg.norm(b - d)
    assert 3.5 <= ratio <= 4.5


def test_time_reversal():
    m = td_model_1d()
    g = SpatialGrid(1, 128, 8.0)
    c = make_coherent_state(g, 0.1, ([-1.0], [0.5]), 1, model=m)
    f = evolve(c, m, 0.0, 0.3, 0.01)[-1][1]
    back = evolve(f, m, 0.3, 0.0, 0.01)[-1][1]
    assert np.abs(back.values - c.values).max() < 1e-12


def test_strang_step_matches_evolve():
    m = td_model_1d()
    g = SpatialGrid(1, 64, 8.0)
    c = make_coherent_state(g, 0.2, ([0.0], [0.3]), 1, model=m)
    one = strang_step(c, m, 0.1, 0.01)
    two = evolve(c, m, 0.1, 0.11, 0.01)[-1][1]
    assert np.allclose(one.values, two.values, atol=1e-14)


def test_snapshots():
    g = SpatialGrid(1, 64, 8.0)
    c = make_coherent_state(g, 0.2, ([0.0], [0.3]), 1)
    out = evolve(c, ZERO1, 0.0, 0.1, 0.01, snapshot_times=[0.0, 0.05])
    assert [round(t, 10) for t, _ in out] == [0.0, 0.05, 0.1]


def test_coherent_state_in_band():
    g = SpatialGrid(1, 256, 8.0)
    c = make_coherent_state(g, 0.1, ([0.0], [0.7]), 1)
    assert c.norm() == pytest.approx(1.0)
    ev = eval_symbol(ZERO1, PhasePoint(0.0, np.zeros(3), np.array([0.7, 0, 0])))
    w = c.values[:, 128] / np.linalg.norm(c.values[:, 128])
    assert np.allclose(ev.Pi_minus @ w, 0, atol=1e-12)
    with pytest.raises(ConfigurationError):
        make_coherent_state(g, 0.1, ([5.0], [0.0]), 1)
    with pytest.raises(ConfigurationError):
        make_coherent_state(g, 0.1, ([0.0], [20.0]), 1)


def test_degenerate_reference_spinor():
    g = SpatialGrid(1, 64, 8.0)
    # at rest the electron band is the upper two components
    with pytest.raises(DegenerateSpinorError):
        make_coherent_state(g, 0.2, ([0.0], [0.0]), 1, reference_spinor=[0, 0, 1, 0])


def _band_leak(state, species):
    """Weight of the wrong band measured with the exact free Fourier projector."""
    g = state.grid
    p = g.momenta(state.epsilon)
    H = np.zeros(p.shape[:-1] + (4, 4), dtype=complex)
    from diraclimit.clifford import BETA, alpha_dot
    H[...] = (alpha_dot(p) + BETA) / japanese_bracket(p)[..., None, None]
    Pw = 0.5 * (np.eye(4) - species * H)
    phat = np.fft.fft(state.values, axis=-1)
    wrong = np.einsum("kab,bk->ak", Pw, phat)
    return np.sum(np.abs(wrong) ** 2) / np.sum(np.abs(phat) ** 2)


def test_spectral_polarization_removes_band_mixing():
    g = SpatialGrid(1, 512, 8.0)
    point = make_coherent_state(g, 0.2, ([0.0], [0.8]), 1)
    spec = make_coherent_state(g, 0.2, ([0.0], [0.8]), 1, polarization="spectral")
    assert _band_leak(point, 1) > 1e-4
    assert _band_leak(spec, 1) < 1e-20


def test_sample_mixed_state():
    g = SpatialGrid(1, 256, 6.4)
    f = GaussianDensity.create(1, x0=-0.4, v0=0.5, sigma_x=0.3, sigma_v=0.3)
    st = sample_mixed_state(g, 0.2, f, 64, 1, 3)
    assert isinstance(st, MixedState)
    assert st.weights.sum() == pytest.approx(1.0)
    assert np.all(st.weights >= 0)
    norms = np.sum(np.abs(st.members) ** 2, axis=(1, 2)) * g.cell_volume
    assert np.allclose(norms, 1.0)
    assert diagnostics(st, ZERO1, 0.0).mass == pytest.approx(1.0)
    again = sample_mixed_state(g, 0.2, f, 64, 1, 3)
    assert np.array_equal(st.members, again.members)
    with pytest.raises(MixednessError):
        sample_mixed_state(g, 0.05, f, 2, 1, 3)


def test_sample_mixed_state_out_of_band():
    g = SpatialGrid(1, 64, 6.4)
    f = GaussianDensity.create(1, x0=0.0, v0=3.0, sigma_x=0.3, sigma_v=0.3)
    with pytest.raises(ConfigurationError):
        sample_mixed_state(g, 0.1, f, 64, 1, 0)


def test_diagnostics_plane_wave_current():
    g = SpatialGrid(1, 64, 2 * np.pi)
    psi = make_plane_wave(g, 0.5, [2], 1)
    dg = diagnostics(psi, ZERO1, 0.0)
    p = 1.0
    assert np.allclose(dg.rho, 1 / (2 * np.pi))
    # group velocity p/<p> times density
    assert np.allclose(dg.J[0], p / np.sqrt(2) / (2 * np.pi))
    assert dg.total_energy == pytest.approx(np.sqrt(2))


def test_dspn_roundtrip(tmp_path):
    g = SpatialGrid(1, 64, 6.4, transverse_xi=(0.0, 0.2, 0.0))
    f = GaussianDensity.create(1, sigma_x=0.3, sigma_v=0.3)
    st = sample_mixed_state(g, 0.4, f, 8, -1, 1)
    path = tmp_path / "s.dspn"
    write_dspn(path, st, 0.25)
    back, t = read_dspn(path)
    assert t == 0.25
    assert back.grid == g
    assert back.epsilon == 0.4
    assert np.array_equal(back.members, st.members)
    assert np.array_equal(back.weights, st.weights)
    single = SpinorField(g, st.members[0], 0.4)
    write_dspn(path, single, 0.0)
    back, _ = read_dspn(path)
    assert back.members.shape[0] == 1
    with pytest.raises(MissingInputError):
        read_dspn(tmp_path / "missing.dspn")


def test_two_dimensional_free_packet_moves():
    g = SpatialGrid(2, 32, 6.4)
    m = make_potential("zero", active_dims=2)
    c = make_coherent_state(g, 0.4, ([0.0, 0.0], [0.8, 0.0]), 1, polarization="spectral")
    out = evolve(c, m, 0.0, 0.5, 0.01)[-1][1]
    rho = diagnostics(out, m, 0.5).rho
    x = g.positions()
    xbar = np.sum(rho * x[..., 0]) * g.cell_volume
    # mean group velocity over the packet's momentum spread (variance eps/2 per axis)
    q = np.linspace(-4, 4, 201) * np.sqrt(0.2)
    Q1, Q2 = np.meshgrid(0.8 + q, q, indexing="ij")
    wq = np.exp(-(Q1 - 0.8) ** 2 / 0.4 - Q2 ** 2 / 0.4)
    vbar = np.sum(wq * Q1 / np.sqrt(1 + Q1 ** 2 + Q2 ** 2)) / wq.sum()
    assert xbar == pytest.approx(0.5 * vbar, abs=5e-3)
