import csv
import logging

import numpy as np
import pytest

from diraclimit import harness, wigner as wg
from diraclimit.clifford import ALPHA
from diraclimit.dirac_solver import read_dspn
from diraclimit.errors import ConfigurationError, MissingInputError
from diraclimit.identities import IDENTITIES, Algebra

SMALL = {
    "grid": {"n": 128},
    "run": {"epsilons": [0.8, 0.4], "T": 0.1, "dt_per_eps": 0.05},
    "initial": {"members": 32},
    "vlasov": {"particles": 1024, "dt": 0.01},
    "residual": {"epsilon": 0.8, "levels": 2, "members": 16, "dt": 0.01},
}


def small(**changes):
    cfg = harness.config_from_dict(SMALL, echo=False)
    return cfg.replace(**changes) if changes else cfg


def _read(path):
    with open(path) as fh:
        rows = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(rows))


def test_defaults_and_echo(caplog):
    with caplog.at_level(logging.INFO, logger="diraclimit"):
        cfg = harness.config_from_dict({})
    assert cfg.n == 1024 and cfg.epsilons == (0.4, 0.2, 0.1, 0.05)
    assert [tf.name for tf in cfg.test_functions] == harness.DEFAULTS["observables"]["names"]
    assert "config [grid]" in caplog.text
    assert cfg.epsilon == 0.4


def test_rejects_non_power_of_two():
    with pytest.raises(ConfigurationError, match="grid.n"):
        harness.config_from_dict({"grid": {"n": 100}}, echo=False)


def test_resolution_rule():
    with pytest.raises(ConfigurationError, match="dx <= eps/8"):
        harness.config_from_dict({"grid": {"n": 64}}, echo=False)
    # dx = 0.05 exactly at eps/8 for eps = 0.4 is allowed
    harness.config_from_dict({"grid": {"n": 128}, "run": {"epsilons": [0.4]}}, echo=False)


def test_unknown_keys():
    with pytest.raises(ConfigurationError, match="run.epsilonz"):
        harness.config_from_dict({"run": {"epsilonz": [0.1]}}, echo=False)
    with pytest.raises(ConfigurationError, match="unknown configuration section"):
        harness.config_from_dict({"gird": {}}, echo=False)
    with pytest.raises(ConfigurationError, match="unknown test function"):
        harness.config_from_dict({"observables": {"names": ["nope"]}}, echo=False)


def test_parse_config_errors(tmp_path):
    with pytest.raises(MissingInputError):
        harness.parse_config(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("[grid\n")
    with pytest.raises(ConfigurationError):
        harness.parse_config(bad)
    good = tmp_path / "good.toml"
    good.write_text("[grid]\nn = 128\n[run]\nepsilons = [0.4]\n")
    assert harness.parse_config(good).epsilons == (0.4,)


def test_custom_test_function():
    cfg = harness.config_from_dict(
        {"observables": {"names": ["g0", "mine"],
                         "custom": [{"name": "mine", "xc": 0.1, "vc": 0.2, "sx": 0.5, "sv": 0.5, "px": 1}]}},
        echo=False)
    assert [tf.name for tf in cfg.test_functions] == ["g0", "mine"]
    a = cfg.test_functions[1].bind(1)
    X = np.array([[0.6, 0, 0]])
    V = np.array([[0.2, 0, 0]])
    assert a(X, V)[0] == pytest.approx(np.exp(-0.5))


def test_identity_suite_passes():
    res = harness.run_identity_suite()
    assert len(res) == len(IDENTITIES)
    assert all(r.passed for r in res), [r.name for r in res if not r.passed]
    assert all(r.samples >= 100 for r in res)


def test_identity_suite_detects_fault():
    bad = ALPHA.copy()
    bad[0] = bad[0] * (1 + 1e-6)
    res = harness.run_identity_suite(Algebra(alpha=bad))
    failed = {r.name for r in res if not r.passed}
    assert "anticommutation" in " ".join(failed)


def test_vlasov_zero_field_streams(tmp_path):
    cfg = small(**{"potential": [{"preset": "zero"}], "run.T": 0.5})
    paths = harness.run_single(cfg, "vlasov", output_dir=str(tmp_path))
    rows = _read(paths[0])
    t0 = [r for r in rows if float(r["t"]) == 0.0]
    t1 = [r for r in rows if float(r["t"]) == 0.5]
    for a, b in zip(t0, t1):
        v = float(a["v1"])
        assert float(b["x1"]) == pytest.approx(float(a["x1"]) + 0.5 * v / np.sqrt(1 + v * v), abs=1e-12)


def test_dirac_plane_wave_norm(tmp_path):
    cfg = small(**{"initial.kind": "plane_wave", "initial.mode": 3, "potential": [{"preset": "zero"}],
                   "run.epsilon": 0.8, "run.snapshot_times": [0.05]})
    paths = harness.run_single(cfg, "dirac", output_dir=str(tmp_path))
    diag = _read([p for p in paths if p.endswith("dirac_diagnostics.csv")][0])
    assert len(diag) == 3
    for row in diag:
        assert float(row["norm"]) == pytest.approx(1.0, abs=1e-12)


def test_wigner_snapshot_moments_match_dirac(tmp_path):
    cfg = small(**{"run.epsilon": 0.4})
    paths = harness.run_single(cfg, "dirac", output_dir=str(tmp_path))
    dspn = [p for p in paths if p.endswith(".dspn")][-1]
    mom_dirac = _read([p for p in paths if "dirac_moments_t0.100000" in p][0])
    out = harness.run_single(cfg, "wigner-snapshot", dspn_path=dspn, output_dir=str(tmp_path))
    assert out[0].endswith(".dwig")
    W = wg.read_dwig(out[0])
    st, t = read_dspn(dspn)
    assert W.t == t and W.epsilon == st.epsilon
    mom_w = _read(out[1])
    for key in ("rho", "J1", "J2"):
        a = np.array([float(r[key]) for r in mom_dirac])
        b = np.array([float(r[key]) for r in mom_w])
        assert np.abs(a - b).max() <= 1e-8
    with pytest.raises(MissingInputError):
        harness.run_single(cfg, "wigner-snapshot", dspn_path=str(tmp_path / "none.dspn"),
                           output_dir=str(tmp_path))
    with pytest.raises(ConfigurationError):
        harness.run_single(cfg, "bogus", output_dir=str(tmp_path))


def test_small_limit_study(tmp_path):
    cfg = small()
    res = harness.run_limit_study(cfg, output_dir=str(tmp_path))
    assert [r.epsilon for r in res.rows] == [0.8, 0.4]
    assert all(r.check() for r in res.rows)
    assert all(r.mass_defect <= 1e-8 for r in res.rows)
    rows = _read(res.paths["convergence"])
    assert [float(r["epsilon"]) for r in rows] == [0.8, 0.4]
    assert {"err_g0", "constraint_norm", "Y_diag_ratio", "mass_defect"} <= set(rows[0])
    text = open(res.paths["convergence"]).read()
    assert text.startswith("# " + harness.CSV_SCHEMA)
    assert "output_dir" not in text
    assert [r["n"] for r in res.residual] == [64, 128]
    assert "seconds" in open(res.paths["timings"]).read()


def test_zero_time_study(tmp_path):
    # at T = 0 the errors come only from the O(eps) smoothing of the initial Wigner function
    cfg = small(**{"run.T": 0.0, "residual.enabled": False})
    res = harness.run_limit_study(cfg, output_dir=str(tmp_path))
    assert "residual" not in res.paths
    big, fine = res.rows
    assert sum(fine.errors.values()) < sum(big.errors.values())


def test_residual_resolution_checked_lazily():
    cfg = small(**{"residual.epsilon": 0.4})
    with pytest.raises(ConfigurationError, match="coarsest residual level"):
        harness.run_residual_study(cfg)
