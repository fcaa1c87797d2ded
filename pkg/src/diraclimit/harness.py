"""Experiment configuration, orchestration and file outputs.

A configuration is a TOML file with the sections listed in ``DEFAULTS``;
every key is optional and unknown keys are rejected.  The defaults describe
the standard d = 1 benchmark (a Gaussian A0 bump plus a weak transverse
vector-potential pulse, electrons, eps in {0.4, 0.2, 0.1, 0.05}).
"""
from concurrent.futures import ProcessPoolExecutor, as_completed
import copy
from dataclasses import dataclass, field
import json
import logging
import os
import time

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:     # Python < 3.11
    import tomli as tomllib

from . import wigner as wg
from .densities import make_density
from .dirac_solver import (SpatialGrid, diagnostics, evolve, make_coherent_state,
                           make_plane_wave, read_dspn, sample_mixed_state, write_dspn)
from .emfield import make_potential
from .errors import ConfigurationError, MissingInputError
from .identities import run_identities
from .vlasov import (ParticleEnsemble, PhaseHistogramGrid, deposit_moments, evolve_ensemble,
                     observable, sample_ensemble, trajectory_columns)

log = logging.getLogger(__name__)

__all__ = [
    "DEFAULTS", "DEFAULT_TEST_FUNCTIONS", "ExperimentConfig", "ConvergenceRow", "LimitStudyResult",
    "PhaseTestFunction", "parse_config", "config_from_dict", "run_identity_suite",
    "run_limit_study", "run_residual_study", "run_single", "CSV_SCHEMA",
]

CSV_SCHEMA = "diraclimit-csv v1"

DEFAULTS = {
    "grid": {"d": 1, "n": 1024, "box_length": 6.4, "transverse_xi": [0.0, 0.0, 0.0]},
    "potential": [
        {"preset": "gaussian_bump_A0", "amplitude": 0.5, "width": 0.6, "center": [0.3, 0.0, 0.0]},
        {"preset": "time_pulse", "amplitude": [0.0, 0.15, 0.0], "direction": [1.0, 0.0, 0.0],
         "t0": 0.25, "duration": 0.4, "length": 1.5},
    ],
    "f_in": {"kind": "gaussian", "x0": -0.4, "v0": 0.5, "sigma_x": 0.3, "sigma_v": 0.3},
    "initial": {"kind": "mixed", "members": 512, "species": 1, "polarization": "spectral",
                "bound_constant": 1.0, "x0": 0.0, "xi0": 0.5, "mode": 0},
    "run": {"epsilons": [0.4, 0.2, 0.1, 0.05], "epsilon": None, "T": 0.5, "dt_per_eps": 0.05,
            "dt": None, "snapshot_times": [], "seed": 7, "output_dir": "output", "workers": 1},
    "vlasov": {"particles": 131072, "dt": 0.01, "record_every": 10, "trajectory_particles": 64,
               "hist_nx": 128, "hist_nv": 128},
    "wigner": {"window_nsig": 6.0, "momentum_margin": 1.0, "full_max_nodes": 1 << 20},
    "observables": {"names": ["g0", "gx", "gv", "gxv", "gvv", "gn", "gw"], "custom": []},
    "residual": {"enabled": True, "epsilon": 0.2, "dt": 0.005, "levels": 3, "members": 128},
}


# ---------------------------------------------------------------------------
# test functions


@dataclass(frozen=True)
class PhaseTestFunction:
    """a(x, v) = ((x1 - xc)/sx)^px ((v1 - vc)/sv)^pv exp(-|x - xc|^2/2sx^2 - |v - vc|^2/2sv^2)

    on the active axes (centres and widths are shared by all axes, the
    polynomial factor uses the first axis).
    """
    name: str
    xc: float
    vc: float
    sx: float
    sv: float
    px: int = 0
    pv: int = 0

    def __post_init__(self):
        if self.sx <= 0 or self.sv <= 0:
            raise ConfigurationError(f"test function {self.name!r} needs positive widths")
        if self.px < 0 or self.pv < 0:
            raise ConfigurationError(f"test function {self.name!r} needs nonnegative powers")

    def bind(self, d):
        def a(X, V):
            zx = (X[..., :d] - self.xc) / self.sx
            zv = (V[..., :d] - self.vc) / self.sv
            g = np.exp(-0.5 * np.sum(zx * zx, axis=-1) - 0.5 * np.sum(zv * zv, axis=-1))
            return zx[..., 0] ** self.px * zv[..., 0] ** self.pv * g
        return a

    def describe(self):
        return (f"{self.name}: xc={self.xc} vc={self.vc} sx={self.sx} sv={self.sv} "
                f"px={self.px} pv={self.pv}")


def _tf(name, xc, vc, sx, sv, px=0, pv=0):
    return PhaseTestFunction(name, xc, vc, sx, sv, px, pv)


DEFAULT_TEST_FUNCTIONS = {t.name: t for t in [
    _tf("g0", -0.2, 0.5, 0.5, 0.5),
    _tf("gx", -0.2, 0.5, 0.5, 0.5, 1, 0),
    _tf("gv", -0.2, 0.5, 0.5, 0.5, 0, 1),
    _tf("gxx", -0.2, 0.5, 0.5, 0.5, 2, 0),
    _tf("gxv", -0.2, 0.5, 0.5, 0.5, 1, 1),
    _tf("gvv", -0.2, 0.5, 0.5, 0.5, 0, 2),
    _tf("gn", 0.0, 0.7, 0.3, 0.3),
    _tf("gw", -0.2, 0.4, 1.0, 1.0),
    _tf("rho", -0.2, 0.0, 0.4, 3.0),
]}


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ExperimentConfig:
    d: int
    n: int
    box_length: float
    transverse_xi: tuple
    potential: tuple          # JSON string per term, kept hashable
    f_in: str                 # JSON
    initial_kind: str
    members: int
    species: int
    polarization: str
    bound_constant: float
    coherent_x0: tuple
    coherent_xi0: tuple
    plane_wave_mode: tuple
    epsilons: tuple
    epsilon: float            # single-run epsilon
    T: float
    dt_per_eps: float
    dt: float                 # absolute step for single runs (None: dt_per_eps * eps)
    snapshot_times: tuple
    seed: int
    output_dir: str
    workers: int
    vlasov: str               # JSON
    wigner: str               # JSON
    test_functions: tuple
    residual: str             # JSON
    source: dict = field(default=None, compare=False, hash=False)

    # convenience accessors
    def grid(self, n=None):
        return SpatialGrid(self.d, self.n if n is None else n, self.box_length, self.transverse_xi)

    def model(self):
        return make_potential([json.loads(t) for t in self.potential], active_dims=self.d)

    def density(self):
        return make_density(self.d, json.loads(self.f_in))

    def dt_for(self, eps):
        return self.dt if self.dt is not None else self.dt_per_eps * eps

    def section(self, name):
        return json.loads(getattr(self, name))

    def replace(self, **changes):
        raw = copy.deepcopy(self.source)
        for key, value in changes.items():
            sec, dot, k = key.partition(".")
            if dot:
                raw.setdefault(sec, {})[k] = value
            else:
                raw[sec] = value
        return config_from_dict(raw, echo=False)


def _is_power_of_two(n):
    return isinstance(n, int) and n > 0 and (n & (n - 1)) == 0


def _merge(raw):
    """Defaults overlaid with the user's values; unknown keys are errors."""
    out = copy.deepcopy(DEFAULTS)
    for sec, value in raw.items():
        if sec not in DEFAULTS:
            raise ConfigurationError(f"unknown configuration section {sec!r}; "
                                     f"known: {', '.join(DEFAULTS)}")
        if sec == "potential":
            if isinstance(value, dict):
                value = [value]
            if not isinstance(value, list) or not all(isinstance(t, dict) for t in value):
                raise ConfigurationError("potential must be a table or an array of tables")
            out[sec] = value
            continue
        if not isinstance(value, dict):
            raise ConfigurationError(f"section {sec!r} must be a table")
        for key, v in value.items():
            if key not in DEFAULTS[sec] and sec != "f_in":     # f_in keys depend on its kind
                raise ConfigurationError(f"unknown key {sec}.{key}; known keys in [{sec}]: "
                                         f"{', '.join(DEFAULTS[sec])}")
        if sec == "f_in" and "kind" in value and value["kind"] != DEFAULTS["f_in"]["kind"]:
            out[sec] = dict(value)
        else:
            out[sec].update(value)
    return out


def _num(v, key, kind=float, positive=False, allow_none=False):
    if v is None and allow_none:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigurationError(f"{key} must be a number, got {v!r}")
    if kind is int and int(v) != v:
        raise ConfigurationError(f"{key} must be an integer, got {v!r}")
    v = kind(v)
    if not np.isfinite(v) or (positive and v <= 0):
        raise ConfigurationError(f"{key} must be {'positive and ' if positive else ''}finite, got {v!r}")
    return v


def _check_resolution(n, L, eps, key):
    dx = L / n
    if dx > eps / 8 * (1 + 1e-12):
        raise ConfigurationError(
            f"{key}={eps} violates the resolution rule dx <= eps/8 (dx = L/n = {dx:.4g}, "
            f"eps/8 = {eps / 8:.4g}); use n >= {int(2 ** np.ceil(np.log2(8 * L / eps)))} "
            f"or a smaller box")


def config_from_dict(raw, echo=True):
    """Validate a configuration mapping (as loaded from TOML)."""
    m = _merge(raw)
    g, r, ini = m["grid"], m["run"], m["initial"]
    d = _num(g["d"], "grid.d", int)
    if d not in (1, 2, 3):
        raise ConfigurationError(f"grid.d must be 1, 2 or 3, got {d}")
    n = g["n"]
    if not _is_power_of_two(n):
        raise ConfigurationError(f"grid.n must be a power of two, got {n!r}")
    L = _num(g["box_length"], "grid.box_length", positive=True)
    txi = tuple(float(v) for v in g["transverse_xi"])
    if len(txi) != 3:
        raise ConfigurationError("grid.transverse_xi must have 3 components")
    eps_list = tuple(_num(e, "run.epsilons", positive=True) for e in r["epsilons"])
    if not eps_list:
        raise ConfigurationError("run.epsilons must not be empty")
    eps_single = _num(r["epsilon"], "run.epsilon", positive=True, allow_none=True)
    for e in eps_list:
        _check_resolution(n, L, e, "run.epsilons entry")
    if eps_single is not None:
        _check_resolution(n, L, eps_single, "run.epsilon")
    species = ini["species"]
    if species not in (1, -1):
        raise ConfigurationError(f"initial.species must be +1 or -1, got {species!r}")
    if ini["kind"] not in ("mixed", "coherent", "plane_wave"):
        raise ConfigurationError(f"initial.kind must be mixed, coherent or plane_wave, got {ini['kind']!r}")
    if ini["polarization"] not in ("pointwise", "spectral"):
        raise ConfigurationError("initial.polarization must be 'pointwise' or 'spectral'")
    T = _num(r["T"], "run.T")
    if T < 0:
        raise ConfigurationError("run.T must be nonnegative")
    snaps = tuple(sorted(float(t) for t in r["snapshot_times"]))
    if any(t < 0 or t > T for t in snaps):
        raise ConfigurationError("run.snapshot_times must lie in [0, T]")

    names = list(m["observables"]["names"])
    funcs = []
    custom = {}
    for c in m["observables"]["custom"]:
        c = dict(c)
        try:
            tf = PhaseTestFunction(str(c.pop("name")), **{k: float(v) if k in ("xc", "vc", "sx", "sv")
                                                           else int(v) for k, v in c.items()})
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"bad observables.custom entry: {exc}") from None
        custom[tf.name] = tf
    for name in names:
        if name in custom:
            funcs.append(custom[name])
        elif name in DEFAULT_TEST_FUNCTIONS:
            funcs.append(DEFAULT_TEST_FUNCTIONS[name])
        else:
            raise ConfigurationError(f"unknown test function {name!r} in observables.names; "
                                     f"known: {', '.join(list(DEFAULT_TEST_FUNCTIONS) + list(custom))}")
    funcs += [tf for name, tf in custom.items() if name not in names]

    res = m["residual"]
    if res["enabled"]:
        levels = _num(res["levels"], "residual.levels", int)
        if levels < 2:
            raise ConfigurationError("residual.levels must be at least 2")
        _num(res["epsilon"], "residual.epsilon", positive=True)
        _num(res["dt"], "residual.dt", positive=True)
    vl = m["vlasov"]
    for key in ("particles", "record_every", "trajectory_particles", "hist_nx", "hist_nv"):
        _num(vl[key], f"vlasov.{key}", int, positive=True)
    _num(vl["dt"], "vlasov.dt", positive=True)

    def vec(v, key):
        a = np.atleast_1d(np.asarray(v, dtype=float))
        if a.size == 1:
            a = np.full(d, a[0])
        if a.size != d:
            raise ConfigurationError(f"{key} must have {d} components")
        return tuple(float(x) for x in a)

    cfg = ExperimentConfig(
        d=d, n=n, box_length=L, transverse_xi=txi,
        potential=tuple(json.dumps(t, sort_keys=True) for t in m["potential"]),
        f_in=json.dumps(m["f_in"], sort_keys=True),
        initial_kind=ini["kind"], members=_num(ini["members"], "initial.members", int, positive=True),
        species=int(species), polarization=ini["polarization"],
        bound_constant=_num(ini["bound_constant"], "initial.bound_constant", positive=True),
        coherent_x0=vec(ini["x0"], "initial.x0"), coherent_xi0=vec(ini["xi0"], "initial.xi0"),
        plane_wave_mode=tuple(int(v) for v in vec(ini["mode"], "initial.mode")),
        epsilons=eps_list, epsilon=eps_single if eps_single is not None else eps_list[0],
        T=T, dt_per_eps=_num(r["dt_per_eps"], "run.dt_per_eps", positive=True),
        dt=_num(r["dt"], "run.dt", positive=True, allow_none=True),
        snapshot_times=snaps, seed=_num(r["seed"], "run.seed", int),
        output_dir=str(r["output_dir"]), workers=_num(r["workers"], "run.workers", int, positive=True),
        vlasov=json.dumps(vl, sort_keys=True), wigner=json.dumps(m["wigner"], sort_keys=True),
        test_functions=tuple(funcs), residual=json.dumps(res, sort_keys=True), source=m,
    )
    # catch bad potential / density parameters now rather than mid-run
    cfg.model()
    cfg.density()
    if echo:
        for sec, value in m.items():
            log.info("config [%s] %s", sec, json.dumps(value, sort_keys=True))
    return cfg


def parse_config(path):
    """Load and validate a TOML configuration file."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise MissingInputError(f"configuration file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from None
    return config_from_dict(raw)


# ---------------------------------------------------------------------------
# identities


def run_identity_suite(algebra=None, n=100, seed=0):
    """Every registered algebra/symbol identity; see identities.IDENTITIES."""
    return run_identities(algebra=algebra, n=n, seed=seed)


# ---------------------------------------------------------------------------
# limit study


@dataclass
class ConvergenceRow:
    epsilon: float
    errors: dict
    constraint_norm: float
    remainder_norm: float
    Y_diag_norm: float
    Y_norm: float
    Y_diag_ratio: float
    mass_defect: float
    f_minus_mass: float
    seconds: float = 0.0

    def check(self):
        vals = [self.constraint_norm, self.remainder_norm, self.Y_diag_norm, self.Y_norm,
                self.mass_defect, self.seconds, *self.errors.values()]
        return all(np.isfinite(v) and v >= 0 for v in vals)


@dataclass
class LimitStudyResult:
    rows: list
    reference: dict
    vlasov_floor: dict
    residual: list
    paths: dict


def _momentum_window(cfg, eps, grid):
    w = cfg.section("wigner")
    f = json.loads(cfg.f_in)
    nsig = w["window_nsig"]
    spread = nsig * np.sqrt(eps / 2)
    if f.get("kind", "gaussian") == "gaussian":
        v0 = np.atleast_1d(f.get("v0", 0.0)).astype(float)
        sv = np.atleast_1d(f.get("sigma_v", 0.3)).astype(float)
        lo, hi = float(np.min(v0 - nsig * sv)), float(np.max(v0 + nsig * sv))
    else:
        dens = cfg.density()
        blo, bhi = dens.bounds()
        lo, hi = float(np.min(blo[cfg.d:])), float(np.max(bhi[cfg.d:]))
    margin = w["momentum_margin"]
    return wg.PhaseSpaceGrid.windowed(grid, eps, lo - spread - margin, hi + spread + margin)


def _initial_state(cfg, eps, grid, model, members=None, seed=None):
    if cfg.initial_kind == "coherent":
        return make_coherent_state(grid, eps, (cfg.coherent_x0, cfg.coherent_xi0), cfg.species,
                                   model=model, polarization=cfg.polarization)
    if cfg.initial_kind == "plane_wave":
        return make_plane_wave(grid, eps, cfg.plane_wave_mode, cfg.species)
    return sample_mixed_state(grid, eps, cfg.density(), members or cfg.members, cfg.species,
                              cfg.seed if seed is None else seed, model=model,
                              bound_constant=cfg.bound_constant, polarization=cfg.polarization)


def _pairings(W, f, model, funcs, d):
    """<a, f> with a evaluated at kinetic momentum v = xi - A(t, x)."""
    X, Xi = W.coords()
    V = Xi - model.evaluate(W.t, X).A
    return {tf.name: float(np.sum(tf.bind(d)(X, V) * f) * W.grid.cell_volume) for tf in funcs}


def _epsilon_job(cfg, eps, reference):
    t0 = time.perf_counter()
    model = cfg.model()
    grid = cfg.grid()
    state = _initial_state(cfg, eps, grid, model)
    final = evolve(state, model, 0.0, cfg.T, cfg.dt_per_eps * eps)[-1][1]
    W = wg.wigner_transform(final, cfg.T, _momentum_window(cfg, eps, grid))
    proj = wg.project_species(W, model)
    f = proj["f_plus"] if cfg.species == 1 else proj["f_minus"]
    obs = _pairings(W, f, model, cfg.test_functions, cfg.d)
    cn = wg.constraint_norm(W, model)
    rn = wg.l2_norm(wg.remainder(W, model), W.grid)
    _, yd = wg.lagrange_multiplier_Y(W, model)
    other = proj["f_minus"] if cfg.species == 1 else proj["f_plus"]
    return ConvergenceRow(
        epsilon=eps,
        errors={k: abs(obs[k] - reference[k]) for k in obs},
        constraint_norm=cn, remainder_norm=rn,
        Y_diag_norm=yd["norm_PpYPp"] + yd["norm_PmYPm"], Y_norm=yd["norm"],
        Y_diag_ratio=yd["diagonal_ratio"],
        mass_defect=abs(W.meta["full_mass"] - 1.0),
        f_minus_mass=float(np.sum(np.abs(other)) * W.grid.cell_volume),
        seconds=time.perf_counter() - t0,
    )


def vlasov_reference(cfg, T=None):
    """Observables of the particle ensemble at T plus a Monte-Carlo floor.

    The floor is half the spread between the two halves of the (scrambled
    Sobol, power-of-two) ensemble.
    """
    vl = cfg.section("vlasov")
    T = cfg.T if T is None else T
    model = cfg.model()
    n = 1 << int(np.ceil(np.log2(max(vl["particles"], 2))))
    ens = sample_ensemble(cfg.density(), n, cfg.species, cfg.seed, model=model,
                          transverse_xi=cfg.transverse_xi)
    fin = evolve_ensemble(model, ens, 0.0, T, vl["dt"]).final if T > 0 else ens
    h = n // 2
    halves = [ParticleEnsemble(fin.x[s], fin.v[s], 2 * fin.weight[s], fin.species[s])
              for s in (slice(0, h), slice(h, n))]
    ref, floor = {}, {}
    for tf in cfg.test_functions:
        a = tf.bind(cfg.d)
        ref[tf.name] = observable(fin, a, cfg.species)
        floor[tf.name] = 0.5 * abs(observable(halves[0], a, cfg.species) - observable(halves[1], a, cfg.species))
    return ref, floor, n


def run_residual_study(cfg):
    """Dirac-Wigner residual at t = T under simultaneous dt and grid refinement.

    Level k uses n / 2^(levels-1-k) points and dt * 2^(levels-1-k).
    """
    res = cfg.section("residual")
    eps, levels = res["epsilon"], res["levels"]
    coarse = cfg.n >> (levels - 1)
    if coarse < 8:
        raise ConfigurationError("residual.levels too large for grid.n")
    try:
        _check_resolution(coarse, cfg.box_length, eps, "residual.epsilon")
    except ConfigurationError as exc:
        raise ConfigurationError(f"{exc} (the coarsest residual level uses n={coarse}; "
                                 f"lower residual.levels or raise residual.epsilon)") from None
    model = cfg.model()
    T = cfg.T
    out = []
    for k in range(levels):
        scale = 2 ** (levels - 1 - k)
        grid = cfg.grid(cfg.n // scale)
        dt = res["dt"] * scale
        if T < dt:
            raise ConfigurationError(f"run.T={T} is shorter than the residual step {dt}")
        state = _initial_state(cfg, eps, grid, model, members=res["members"])
        snaps = evolve(state, model, 0.0, T + dt, dt, snapshot_times=[T - dt, T])
        if len(snaps) != 3:
            raise ConfigurationError("residual snapshots did not land on T - dt, T, T + dt")
        ps = _momentum_window(cfg, eps, grid)
        Ws = [wg.wigner_transform(s, t, ps) for t, s in snaps]
        r = wg.dirac_wigner_residual(Ws, model)
        out.append({"level": k, "n": grid.n, "dt": dt, "residual": r,
                    "relative": r / wg.l2_norm(Ws[1].values, ps)})
        log.info("residual level %d: n=%d dt=%g residual=%.4e", k, grid.n, dt, r)
    return out


def _row_columns(rows, funcs):
    cols = {"epsilon": [r.epsilon for r in rows]}
    for tf in funcs:
        cols[f"err_{tf.name}"] = [r.errors[tf.name] for r in rows]
    for key in ("constraint_norm", "remainder_norm", "Y_diag_norm", "Y_norm", "Y_diag_ratio",
                "mass_defect", "f_minus_mass"):
        cols[key] = [getattr(r, key) for r in rows]
    return cols


def _comments(cfg, extra=()):
    # output location and worker count do not change results, so they stay out
    src = copy.deepcopy(cfg.source)
    src["run"].pop("output_dir", None)
    src["run"].pop("workers", None)
    lines = [CSV_SCHEMA, f"seed={cfg.seed}", f"config={json.dumps(src, sort_keys=True)}"]
    return lines + list(extra)


def run_limit_study(cfg, workers=None, output_dir=None):
    """Convergence of the Dirac observables towards the Vlasov reference.

    Writes ``convergence.csv`` (deterministic for a given config and seed),
    ``residual.csv`` and ``timings.csv`` (wall-clock only) into the output
    directory.  Rows are sorted by decreasing epsilon; the CSV is rewritten
    after every finished epsilon so partial results survive an abort.
    """
    out = output_dir or cfg.output_dir
    os.makedirs(out, exist_ok=True)
    workers = workers or cfg.workers
    paths = {"convergence": os.path.join(out, "convergence.csv"),
             "residual": os.path.join(out, "residual.csv"),
             "timings": os.path.join(out, "timings.csv")}
    t0 = time.perf_counter()
    reference, floor, n_particles = vlasov_reference(cfg)
    t_vlasov = time.perf_counter() - t0
    log.info("vlasov reference: %d particles in %.1f s", n_particles, t_vlasov)
    extra = [f"vlasov_particles={n_particles}"]
    extra += [f"test_function {tf.describe()}" for tf in cfg.test_functions]
    extra += [f"vlasov_reference {k}={v!r} mc_floor={floor[k]!r}" for k, v in reference.items()]

    rows = []

    def flush():
        rows.sort(key=lambda r: -r.epsilon)
        wg.write_csv(paths["convergence"], _row_columns(rows, cfg.test_functions), _comments(cfg, extra))

    eps_sorted = sorted(cfg.epsilons, reverse=True)
    if workers > 1 and len(eps_sorted) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = {pool.submit(_epsilon_job, cfg, e, reference): e for e in eps_sorted}
            for fut in as_completed(futs):
                rows.append(fut.result())
                log.info("eps=%g done", futs[fut])
                flush()
    else:
        for e in eps_sorted:
            rows.append(_epsilon_job(cfg, e, reference))
            log.info("eps=%g done in %.1f s", e, rows[-1].seconds)
            flush()
    flush()

    residual = []
    t_res = 0.0
    if cfg.section("residual")["enabled"]:
        t1 = time.perf_counter()
        residual = run_residual_study(cfg)
        t_res = time.perf_counter() - t1
        wg.write_csv(paths["residual"], {k: [r[k] for r in residual] for k in residual[0]},
                     _comments(cfg, [f"residual_epsilon={cfg.section('residual')['epsilon']}"]))
    else:
        paths.pop("residual")
    wg.write_csv(paths["timings"],
                 {"stage": [f"eps={r.epsilon}" for r in rows] + ["vlasov", "residual", "total"],
                  "seconds": [r.seconds for r in rows] + [t_vlasov, t_res, time.perf_counter() - t0]},
                 [CSV_SCHEMA, "wall-clock seconds; not part of the deterministic outputs"])
    for r in rows:
        if not r.check():
            log.warning("row eps=%g has non-finite or negative entries", r.epsilon)
    return LimitStudyResult(rows, reference, floor, residual, paths)


# ---------------------------------------------------------------------------
# single runs


def _space_columns(grid, rho, J):
    x = grid.positions()
    cols = {f"x{k + 1}": x[..., k] for k in range(grid.d)}
    cols["rho"] = rho
    for k in range(3):
        cols[f"J{k + 1}"] = J[k]
    return cols


def _tag(t):
    return f"{t:.6f}"


def _dirac_mode(cfg, out):
    eps = cfg.epsilon
    model = cfg.model()
    grid = cfg.grid()
    state = _initial_state(cfg, eps, grid, model)
    snaps = evolve(state, model, 0.0, cfg.T, cfg.dt_for(eps),
                   snapshot_times=(0.0,) + cfg.snapshot_times)
    paths = []
    diag_cols = {"t": [], "norm": [], "mass": [], "total_energy": []}
    for t, s in snaps:
        p = os.path.join(out, f"dirac_t{_tag(t)}.dspn")
        write_dspn(p, s, t)
        paths.append(p)
        dg = diagnostics(s, model, t)
        for k in diag_cols:
            diag_cols[k].append(float(t) if k == "t" else getattr(dg, k))
        p = os.path.join(out, f"dirac_moments_t{_tag(t)}.csv")
        wg.write_csv(p, _space_columns(grid, dg.rho, dg.J), _comments(cfg, [f"t={t!r}", f"epsilon={eps!r}"]))
        paths.append(p)
    p = os.path.join(out, "dirac_diagnostics.csv")
    wg.write_csv(p, diag_cols, _comments(cfg, [f"epsilon={eps!r}"]))
    return paths + [p]


def _vlasov_mode(cfg, out):
    vl = cfg.section("vlasov")
    model = cfg.model()
    ens = sample_ensemble(cfg.density(), vl["particles"], cfg.species, cfg.seed, model=model,
                          transverse_xi=cfg.transverse_xi)
    traj = evolve_ensemble(model, ens, 0.0, cfg.T, vl["dt"], record_every=vl["record_every"])
    log.info("vlasov max |dx/dt| over all substeps: %.6f", traj.max_speed)
    k = min(vl["trajectory_particles"], len(ens))
    sub = type(traj)(traj.times, [ParticleEnsemble(e.x[:k], e.v[:k], e.weight[:k], e.species[:k])
                                  for e in traj.states], traj.max_speed)
    paths = [os.path.join(out, "vlasov_trajectories.csv")]
    wg.write_csv(paths[0], trajectory_columns(sub), _comments(cfg, [f"max_speed={traj.max_speed!r}"]))
    grid = cfg.grid()
    lo, hi = cfg.density().bounds(6.0)
    fin = traj.final
    vlo = min(float(lo[cfg.d]), float(fin.v[:, 0].min())) - 0.1
    vhi = max(float(hi[cfg.d]), float(fin.v[:, 0].max())) + 0.1
    hist = PhaseHistogramGrid(float(grid.axis[0]), float(grid.axis[-1]), vl["hist_nx"], vlo, vhi, vl["hist_nv"])
    dep = deposit_moments(fin, grid, hist)
    X, V = np.meshgrid(hist.x_nodes, hist.v_nodes, indexing="ij")
    paths.append(os.path.join(out, "vlasov_fpm.csv"))
    wg.write_csv(paths[-1], {"x1": X, "v1": V, "f_plus": dep["f_plus"], "f_minus": dep["f_minus"]},
                 _comments(cfg, [f"t={cfg.T!r}", f"overflow={dep['overflow']!r}"]))
    paths.append(os.path.join(out, "vlasov_moments.csv"))
    wg.write_csv(paths[-1], _space_columns(grid, dep["rho"], dep["J"]), _comments(cfg, [f"t={cfg.T!r}"]))
    return paths


def _wigner_mode(cfg, out, dspn_path):
    if dspn_path is None:
        raise MissingInputError("wigner-snapshot mode needs a DSPN snapshot file")
    state, t = read_dspn(dspn_path)
    grid = state.grid
    model = make_potential([json.loads(p) for p in cfg.potential], active_dims=grid.d)
    limit = cfg.section("wigner")["full_max_nodes"]
    full = grid.n ** (2 * grid.d) <= limit
    ps = None if full else _momentum_window(cfg, state.epsilon, grid)
    if not full:
        log.warning("phase space too large for a full transform; using a momentum window")
    W = wg.wigner_transform(state, t, ps)
    base = os.path.splitext(os.path.basename(dspn_path))[0]
    paths = [os.path.join(out, f"{base}.dwig")]
    wg.write_dwig(paths[0], W)
    meta = [f"t={t!r}", f"epsilon={state.epsilon!r}", f"source={os.path.basename(dspn_path)}"]
    mom = wg.moments(W, allow_window=not full)
    paths.append(os.path.join(out, f"{base}_wigner_moments.csv"))
    wg.write_csv(paths[-1], _space_columns(grid, mom["rho"], mom["J"]), _comments(cfg, meta))
    if grid.d == 1:
        proj = wg.project_species(W, model)
        X, Xi = W.coords()
        V = Xi - model.evaluate(t, X).A
        paths.append(os.path.join(out, f"{base}_wigner_fpm.csv"))
        wg.write_csv(paths[-1], {"x1": X[..., 0], "v1": V[..., 0], "f_plus": proj["f_plus"],
                                 "f_minus": proj["f_minus"]}, _comments(cfg, meta))
    return paths


def run_single(cfg, mode, dspn_path=None, output_dir=None):
    """One dirac, vlasov or wigner-snapshot run; returns the written paths."""
    out = output_dir or cfg.output_dir
    os.makedirs(out, exist_ok=True)
    if mode == "dirac":
        return _dirac_mode(cfg, out)
    if mode == "vlasov":
        return _vlasov_mode(cfg, out)
    if mode == "wigner-snapshot":
        return _wigner_mode(cfg, out, dspn_path)
    raise ConfigurationError(f"unknown mode {mode!r}; expected dirac, vlasov or wigner-snapshot")
