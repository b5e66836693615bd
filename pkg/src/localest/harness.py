"""Declarative experiment runner behind the command line.

A text config (INI sections [study], [grid], [coefficients], [kernels])
describes one study; ``run`` executes it and writes CSV artifacts plus a
manifest into the output directory.  Studies:

fig-heatmap       one simulation dumping field snapshots for rendering
fig-center        pointwise estimates with confidence bands on an x0 grid
fig-rmse          Monte Carlo error table over resolution levels
coverage          confidence-interval coverage on the exact oracle
validate-oracle   deterministic closed-form identity checks
asymptotics-table estimator constants per kernel

Replications run in parallel across worker processes, each replication
under a seed derived statelessly from (master seed, replication id), and
results are aggregated in replication order, so output bytes do not
depend on worker count.  Re-running a config reproduces identical files.
"""

import hashlib
import json
import os
import re
import warnings
from concurrent.futures import ProcessPoolExecutor, as_completed
from configparser import ConfigParser
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__
from .asymptotics import (
    confidence_interval,
    fisher_limit,
    mu_augmented,
    psi_laplacian,
    psi_laplacian_identity,
    sigma_augmented,
    sigma_proxy,
    variance_ordering,
)
from .errors import AnalyticUnavailable, ConfigError, LocalestError, UnknownPreset
from .estimators import augmented_mle, proxy_constant, proxy_mle
from .fd_solver import (
    HAVE_NUMBA,
    CoefficientField,
    Grid,
    SimConfig,
    TwoPeaks,
    constant_coefficients,
    simulate,
    two_level_theta,
)
from .kernels import get_kernel, rescale
from .measurements import MeasurementPath
from .spectral_oracle import OracleModel

STUDIES = ("fig-heatmap", "fig-center", "fig-rmse", "coverage",
           "validate-oracle", "asymptotics-table")
ESTIMATORS = ("augmented", "proxy")

RMSE_HEADER = ("delta", "estimator", "kernel", "x0", "rmse", "bias", "sd", "n_ok")
CURVE_HEADER = ("x0", "estimator", "kernel", "theta_hat", "ci_lo", "ci_hi",
                "theta_true")
COVERAGE_HEADER = ("delta", "estimator", "level", "covered_fraction", "n")
ORACLE_HEADER = ("check_name", "value", "reference", "rel_err", "pass")
CONSTANTS_HEADER = ("kernel", "quantity", "value")


def preset_theta(name, sigma=1.0):
    """Coefficient field for a named diffusivity profile.

    Accepted names: "constant" or "constant(c)", "two-level", "linear" or
    "linear(slope)" with theta(x) = 1 + slope (x - 1/2).
    """
    text = name.strip()
    match = re.fullmatch(r"([a-z-]+)(?:\(([^)]*)\))?", text)
    if not match:
        raise UnknownPreset(f"cannot parse diffusivity preset {name!r}")
    head, arg = match.group(1), match.group(2)
    if head == "constant":
        return constant_coefficients(float(arg) if arg else 1.0, sigma)
    if head == "two-level":
        if arg is not None:
            raise UnknownPreset("two-level takes no argument")
        return two_level_theta(sigma=sigma)
    if head == "linear":
        slope = float(arg) if arg else 1.0
        if abs(slope) >= 2.0:
            raise ConfigError(
                f"linear slope {slope} makes theta non-positive on [0, 1]"
            )
        sg = float(sigma)
        return CoefficientField(
            theta=lambda x: 1.0 + slope * (np.asarray(x, dtype=float) - 0.5),
            theta_grad=lambda x: np.full(np.shape(x), slope, dtype=float),
            sigma=lambda x: np.full(np.shape(x), sg, dtype=float),
            sigma_sq_grad=lambda x: np.zeros(np.shape(x)),
        )
    raise UnknownPreset(f"unknown diffusivity preset {name!r}")


def constant_theta_value(name):
    """The constant c for a "constant(c)" preset, None for varying profiles."""
    match = re.fullmatch(r"constant(?:\(([^)]*)\))?", name.strip())
    if not match:
        return None
    return float(match.group(1)) if match.group(1) else 1.0


_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_STREAM = 0xD1B54A32D192ED03


def _mix64(z):
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def seed_derivation(master_seed, replicate_id, stream_tag=0):
    """Stateless 64-bit seed for one (replication, stream) pair.

    Affine combination of the inputs with odd constants followed by two
    avalanche rounds; distinct pairs give distinct seeds.
    """
    z = (int(master_seed) + (int(replicate_id) + 1) * _GOLDEN
         + (int(stream_tag) + 1) * _STREAM) & _MASK64
    return _mix64(_mix64(z))


@dataclass(frozen=True)
class ExperimentConfig:
    """Primitive, picklable description of one study run."""

    study: str = "fig-rmse"
    m: int = 500
    n: int = 250000
    horizon: float = 1.0
    theta: str = "two-level"
    sigma: float = 1.0
    x0_initial: str = "default"
    peak_height: float = 5.0
    peak_width: float = 0.05
    kernels: tuple = ("k1",)
    delta_list: tuple = (0.05, 0.08, 0.12, 0.2, 0.3)
    x0_list: tuple = (0.6,)
    x0_grid: int = 0
    replications: int = 200
    seed: int = 1
    qv_mode: str = "realized"
    refine: int = 0
    level: float = 0.95
    solver: str = "fd"
    output_dir: str = "out"
    thread_cap: int = 0
    snapshot_every: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kernels", tuple(self.kernels))
        object.__setattr__(self, "delta_list",
                           tuple(float(d) for d in self.delta_list))
        object.__setattr__(self, "x0_list",
                           tuple(float(x) for x in self.x0_list))


def validate(config):
    """Field-level validation; raises ConfigError with the offending key."""
    if config.study not in STUDIES:
        raise ConfigError(f"[study] name must be one of {STUDIES}, "
                          f"got {config.study!r}")
    if config.solver not in ("fd", "oracle"):
        raise ConfigError(f"[study] solver must be fd or oracle, "
                          f"got {config.solver!r}")
    if config.qv_mode not in ("realized", "analytic"):
        raise ConfigError(f"[study] qv_mode must be realized or analytic, "
                          f"got {config.qv_mode!r}")
    if config.refine not in (0, 1, 2):
        raise ConfigError(f"[study] refine must be 0, 1 or 2, got {config.refine}")
    if not 0.0 < config.level < 1.0:
        raise ConfigError(f"[study] level must be in (0, 1), got {config.level}")
    if config.replications < 0:
        raise ConfigError("[study] replications must be non-negative")
    if config.m < 4 or config.n < 1 or config.horizon <= 0.0:
        raise ConfigError("[grid] needs m >= 4, n >= 1, horizon > 0")
    if config.sigma < 0.0:
        raise ConfigError("[coefficients] sigma must be non-negative")
    if config.x0_initial not in ("default", "zero", "two-peaks", "stationary"):
        raise ConfigError(f"[coefficients] unknown x0_initial "
                          f"{config.x0_initial!r}")
    if config.solver == "fd" and config.x0_initial == "stationary":
        raise ConfigError("[coefficients] stationary start needs solver=oracle")
    if config.solver == "oracle":
        if constant_theta_value(config.theta) is None:
            raise ConfigError("[coefficients] solver=oracle needs a "
                              "constant(theta) profile")
        if config.x0_initial == "two-peaks":
            raise ConfigError("[coefficients] oracle runs start from zero "
                              "or stationary, not two-peaks")
    preset_theta(config.theta, config.sigma)
    if config.x0_grid < 0:
        raise ConfigError("[kernels] x0_grid must be non-negative")
    if not config.delta_list:
        raise ConfigError("[kernels] delta_list must not be empty")
    for name in config.kernels:
        kern = get_kernel(name)
        for d in config.delta_list:
            if d <= 0.0 or d * kern.support_radius >= 0.5:
                raise ConfigError(f"[kernels] delta {d} inadmissible for "
                                  f"kernel {name}")
    for x0 in config.x0_list:
        if not 0.0 <= x0 <= 1.0:
            raise ConfigError(f"[kernels] x0 {x0} outside [0, 1]")
    if config.study == "coverage":
        if config.solver != "oracle":
            raise ConfigError("[study] coverage runs on the exact oracle; "
                              "set solver = oracle")
        if len(config.kernels) != 1:
            raise ConfigError("[kernels] coverage uses exactly one kernel")
    if config.study == "fig-center" and len(config.delta_list) != 1:
        raise ConfigError("[kernels] fig-center uses exactly one delta")
    if config.study == "fig-heatmap" and config.solver != "fd":
        raise ConfigError("[study] fig-heatmap snapshots the full field; "
                          "set solver = fd")
    if config.solver == "fd" and config.n < config.m ** 2 / 8:
        warnings.warn(
            f"n = {config.n} is below m^2/8 = {config.m ** 2 / 8:.0f}; "
            "time discretisation error may dominate", stacklevel=2)
    return config


_SCHEMA = {
    "study": {"name": "study", "replications": "replications", "seed": "seed",
              "qv_mode": "qv_mode", "refine": "refine", "level": "level",
              "solver": "solver", "output_dir": "output_dir",
              "thread_cap": "thread_cap", "snapshot_every": "snapshot_every"},
    "grid": {"m": "m", "n": "n", "horizon": "horizon"},
    "coefficients": {"theta": "theta", "sigma": "sigma",
                     "x0_initial": "x0_initial",
                     "peak_height": "peak_height", "peak_width": "peak_width"},
    "kernels": {"names": "kernels", "delta_list": "delta_list",
                "x0_list": "x0_list", "x0_grid": "x0_grid"},
}
_INT_FIELDS = {"m", "n", "replications", "seed", "refine", "thread_cap",
               "x0_grid", "snapshot_every"}
_FLOAT_FIELDS = {"horizon", "sigma", "peak_height", "peak_width", "level"}
_LIST_FIELDS = {"kernels", "delta_list", "x0_list"}


def load_config(path):
    """Parse and validate an experiment config file."""
    parser = ConfigParser(inline_comment_prefixes=("#",))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")
    fields = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            field = _SCHEMA[section][key]
            try:
                if field in _LIST_FIELDS:
                    items = [s.strip() for s in raw.split(",") if s.strip()]
                    value = tuple(items) if field == "kernels" \
                        else tuple(float(s) for s in items)
                elif field in _INT_FIELDS:
                    value = int(raw)
                elif field in _FLOAT_FIELDS:
                    value = float(raw)
                else:
                    value = raw.strip()
            except ValueError as err:
                raise ConfigError(
                    f"bad value for {key!r} in [{section}]: {err}") from err
            fields[field] = value
    return validate(ExperimentConfig(**fields))


def config_to_text(config):
    """Canonical INI serialisation; the manifest hashes and embeds this.

    Holds exactly the fields that determine the output bytes, so runs that
    differ only in worker count or output directory hash identically.
    """
    return "\n".join([
        "[study]",
        f"name = {config.study}",
        f"replications = {config.replications}",
        f"seed = {config.seed}",
        f"qv_mode = {config.qv_mode}",
        f"refine = {config.refine}",
        f"level = {config.level!r}",
        f"solver = {config.solver}",
        f"snapshot_every = {config.snapshot_every}",
        "",
        "[grid]",
        f"m = {config.m}",
        f"n = {config.n}",
        f"horizon = {config.horizon!r}",
        "",
        "[coefficients]",
        f"theta = {config.theta}",
        f"sigma = {config.sigma!r}",
        f"x0_initial = {config.x0_initial}",
        f"peak_height = {config.peak_height!r}",
        f"peak_width = {config.peak_width!r}",
        "",
        "[kernels]",
        f"names = {', '.join(config.kernels)}",
        f"delta_list = {', '.join(repr(d) for d in config.delta_list)}",
        f"x0_list = {', '.join(repr(x) for x in config.x0_list)}",
        f"x0_grid = {config.x0_grid}",
        "",
    ])


def _field_text(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path, header, rows):
    tmp = path + ".tmp"
    with open(tmp, "w") as handle:
        handle.write(",".join(header) + "\n")
        for row in rows:
            handle.write(",".join(_field_text(v) for v in row) + "\n")
    os.replace(tmp, path)


def _write_manifest(config, outputs, extra=None):
    text = config_to_text(config)
    doc = {
        "study": config.study,
        "version": __version__,
        "seed": config.seed,
        "backend": "numba" if HAVE_NUMBA else "numpy",
        "config_sha256": hashlib.sha256(text.encode()).hexdigest(),
        "config": text,
        "outputs": sorted(outputs),
    }
    if extra:
        doc.update(extra)
    path = os.path.join(config.output_dir, "manifest.json")
    tmp = path + ".tmp"
    with open(tmp, "w") as handle:
        json.dump(doc, handle, indent=2, sort_keys=True)
        handle.write("\n")
    os.replace(tmp, path)


def _x0_values(config):
    if config.x0_grid > 0:
        return tuple(np.linspace(0.0, 1.0, config.x0_grid + 2)[1:-1])
    return config.x0_list


def _probe_set(config, x0s=None):
    """Ordered (kernel_name, kernel, delta, probe) for every combination."""
    out = []
    for name in config.kernels:
        kern = get_kernel(name)
        for delta in config.delta_list:
            for x0 in (x0s if x0s is not None else _x0_values(config)):
                out.append((name, kern, delta, rescale(kern, delta, x0)))
    return out


def _init_spec(config):
    if config.x0_initial in ("default", "two-peaks"):
        return TwoPeaks(height=config.peak_height, width=config.peak_width)
    return "zero"


def _oracle_model(config):
    return OracleModel(theta=constant_theta_value(config.theta),
                       sigma=config.sigma)


def _oracle_paths(config, probes, seed, init):
    """Joint exact sample of all probes on one underlying field."""
    model = _oracle_model(config)
    kinds = []
    for _, _, _, probe in probes:
        kinds.append((probe, "value"))
        kinds.append((probe, "laplacian"))
    channels = model.build_channels(kinds)
    out = model.simulate(channels, config.horizon, config.n, seed, init=init)
    paths = []
    for i, (name, _, delta, probe) in enumerate(probes):
        paths.append(MeasurementPath(
            dt=config.horizon / config.n,
            x=out[2 * i].copy(),
            x_lap=out[2 * i + 1].copy(),
            meta={"delta": probe.delta, "x0": probe.x0, "kernel": name,
                  "theta": model.theta, "sigma": model.sigma,
                  "seed": int(seed) & 0xFFFFFFFF, "init": init,
                  "solver": "oracle"},
        ))
    return paths


def _simulate_paths(config, rep, snapshot_path=None):
    """One replication's measurement paths under the derived seed."""
    seed = seed_derivation(config.seed, rep, 0)
    probes = _probe_set(config)
    if config.solver == "oracle":
        init = "zero" if config.x0_initial == "zero" else "stationary"
        return _oracle_paths(config, probes, seed, init)
    grid = Grid(m=config.m, n=config.n, horizon=config.horizon)
    coeffs = preset_theta(config.theta, config.sigma)
    sim = SimConfig(grid=grid, coeffs=coeffs, x0_initial=_init_spec(config),
                    seed=seed)
    every = config.snapshot_every if config.snapshot_every else None
    return simulate(sim, [p for _, _, _, p in probes],
                    snapshot_path=snapshot_path, snapshot_every=every)


def _estimate_one(path, kind, kern, config):
    if kind == "augmented":
        return augmented_mle(path, refine=config.refine).theta_hat
    sigma = config.sigma if config.qv_mode == "analytic" else None
    return proxy_mle(path, kern, qv_mode=config.qv_mode, sigma=sigma).theta_hat


def _replication_estimates(args, rep):
    """Worker: list of (kernel, delta, x0, estimator, theta_hat, status)."""
    config = ExperimentConfig(**args)
    rows = []
    try:
        paths = _simulate_paths(config, rep)
    except LocalestError as err:
        status = type(err).__name__
        for name, _, delta, probe in _probe_set(config):
            for kind in ESTIMATORS:
                rows.append((name, delta, probe.x0, kind, float("nan"), status))
        return rows
    for (name, kern, delta, probe), path in zip(_probe_set(config), paths):
        for kind in ESTIMATORS:
            try:
                theta_hat = _estimate_one(path, kind, kern, config)
                rows.append((name, delta, probe.x0, kind, theta_hat, "ok"))
            except LocalestError as err:
                rows.append((name, delta, probe.x0, kind, float("nan"),
                             type(err).__name__))
    return rows


def _worker_count(config):
    if config.thread_cap > 0:
        cap = config.thread_cap
    else:
        env = os.environ.get("LOCALEST_THREADS", "").strip()
        cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, max(1, config.replications)))


def _map_replications(config, worker):
    """Worker results for every replication, aggregated in id order."""
    reps = config.replications
    workers = _worker_count(config)
    args = asdict(config)
    if reps == 0:
        return []
    if workers == 1:
        return [worker(args, rep) for rep in range(reps)]
    results = [None] * reps
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(worker, args, rep): rep for rep in range(reps)}
        for fut in as_completed(futures):
            results[futures[fut]] = fut.result()
    return results


_CONST_CACHE = {}


def _sigma_constants(config):
    """CI variance constant per (kernel name, estimator), cached per process."""
    key = (config.kernels, config.horizon)
    if key not in _CONST_CACHE:
        consts = {}
        for name in config.kernels:
            kern = get_kernel(name)
            consts[(name, "augmented")] = sigma_augmented(kern, config.horizon)
            try:
                consts[(name, "proxy")] = sigma_proxy(kern, config.horizon)
            except AnalyticUnavailable:
                # no finite proxy variance constant, so no proxy interval
                consts[(name, "proxy")] = float("nan")
        _CONST_CACHE[key] = consts
    return _CONST_CACHE[key]


def _study_fig_rmse(config):
    per_rep = _map_replications(config, _replication_estimates)
    estimates = {}
    for rows in per_rep:
        for name, delta, x0, kind, theta_hat, status in rows:
            estimates.setdefault((name, delta, x0, kind), []).append(
                (theta_hat, status))
    coeffs = preset_theta(config.theta, config.sigma)
    out_rows = []
    deltas = config.delta_list if config.replications else ()
    for delta in deltas:
        for kind in ESTIMATORS:
            for name in config.kernels:
                for x0 in _x0_values(config):
                    probe = rescale(get_kernel(name), delta, x0)
                    truth = float(coeffs.theta(np.array([probe.x0]))[0])
                    cell = estimates.get((name, delta, probe.x0, kind), [])
                    vals = np.array([t for t, s in cell if s == "ok"
                                     and np.isfinite(t)])
                    n_ok = len(vals)
                    if n_ok:
                        err = vals - truth
                        rmse = float(np.sqrt(np.mean(err ** 2)))
                        bias = float(np.mean(err))
                        sd = float(np.std(vals, ddof=1)) if n_ok > 1 else 0.0
                    else:
                        rmse = bias = sd = float("nan")
                    out_rows.append((delta, kind, name, probe.x0,
                                     rmse, bias, sd, n_ok))
    path = os.path.join(config.output_dir, "rmse.csv")
    _write_csv(path, RMSE_HEADER, out_rows)
    _write_manifest(config, ["rmse.csv"])
    return 0


def _study_fig_center(config):
    if config.x0_grid == 0 and len(config.x0_list) <= 1:
        config = ExperimentConfig(**{**asdict(config), "x0_grid": 33})
    consts = _sigma_constants(config)
    coeffs = preset_theta(config.theta, config.sigma)
    delta = config.delta_list[0]
    rows = []
    if config.replications > 0:
        estimates = {}
        for name, delta_, x0, kind, theta_hat, status in \
                _replication_estimates(asdict(config), 0):
            estimates[(name, x0, kind)] = (theta_hat, status)
        for x0 in _x0_values(config):
            for kind in ESTIMATORS:
                for name in config.kernels:
                    probe = rescale(get_kernel(name), delta, x0)
                    truth = float(coeffs.theta(np.array([probe.x0]))[0])
                    theta_hat, status = estimates[(name, probe.x0, kind)]
                    if status == "ok" and np.isfinite(theta_hat):
                        lo, hi, _ = confidence_interval(
                            theta_hat, delta, consts[(name, kind)],
                            level=config.level)
                    else:
                        lo = hi = float("nan")
                    rows.append((probe.x0, kind, name, theta_hat, lo, hi,
                                 truth))
    path = os.path.join(config.output_dir, "curve.csv")
    _write_csv(path, CURVE_HEADER, rows)
    _write_manifest(config, ["curve.csv"])
    return 0


def _coverage_worker(args, rep):
    """Worker: (kernel, delta, estimator, covered, status) per combination."""
    config = ExperimentConfig(**args)
    truth = constant_theta_value(config.theta)
    consts = _sigma_constants(config)
    rows = []
    try:
        paths = _simulate_paths(config, rep)
    except LocalestError as err:
        status = type(err).__name__
        for name, _, delta, _ in _probe_set(config):
            for kind in ESTIMATORS:
                rows.append((name, delta, kind, 0, status))
        return rows
    for (name, kern, delta, _), path in zip(_probe_set(config), paths):
        for kind in ESTIMATORS:
            try:
                const = consts[(name, kind)]
                if not np.isfinite(const):
                    raise AnalyticUnavailable(
                        f"no variance constant for {kind} with {name}")
                theta_hat = _estimate_one(path, kind, kern, config)
                lo, hi, _ = confidence_interval(theta_hat, delta, const,
                                                level=config.level)
                covered = int(lo <= truth <= hi)
                rows.append((name, delta, kind, covered, "ok"))
            except LocalestError as err:
                rows.append((name, delta, kind, 0, type(err).__name__))
    return rows


def _study_coverage(config):
    per_rep = _map_replications(config, _coverage_worker)
    cells = {}
    for rows in per_rep:
        for _, delta, kind, covered, status in rows:
            cells.setdefault((delta, kind), []).append((covered, status))
    out_rows = []
    deltas = config.delta_list if config.replications else ()
    for delta in deltas:
        for kind in ESTIMATORS:
            cell = cells.get((delta, kind), [])
            ok = [c for c, s in cell if s == "ok"]
            frac = float(np.mean(ok)) if ok else float("nan")
            out_rows.append((delta, kind, config.level, frac, len(ok)))
    path = os.path.join(config.output_dir, "coverage.csv")
    _write_csv(path, COVERAGE_HEADER, out_rows)
    _write_manifest(config, ["coverage.csv"])
    return 0


def _study_fig_heatmap(config):
    snap_path = os.path.join(config.output_dir, "field.bin")
    paths = _simulate_paths(config, 0, snapshot_path=snap_path)
    outputs = ["field.bin"]
    for path in paths:
        name = (f"measurement-{path.meta['kernel']}"
                f"-d{path.meta['delta']:g}-x{path.meta['x0']:g}.csv")
        path.to_csv(os.path.join(config.output_dir, name))
        outputs.append(name)
    every = config.snapshot_every if config.snapshot_every \
        else max(1, config.n // 100)
    rows = 1 + (config.n + every - 1) // every
    _write_manifest(config, outputs, extra={
        "snapshot_rows": rows,
        "snapshot_cols": config.m + 1,
        "snapshot_every": every,
    })
    return 0


_ID_TOL = 1e-5
_PSI_TOL = 1e-6


def _study_validate_oracle(config):
    model = _oracle_model(config)
    theta, sigma = model.theta, model.sigma
    k1 = get_kernel("k1")
    horizon = config.horizon
    rows = []

    def add(name, value, reference, tol):
        rel = abs(value - reference) / max(abs(reference), 1e-300)
        rows.append((name, value, reference, rel, rel <= tol))

    for delta in config.delta_list:
        probe = rescale(k1, delta, 0.5)
        chans = model.build_channels([(probe, "value"), (probe, "laplacian")])
        cov = model.covariance(chans, 1.0, 1.0, init="stationary")
        anorm = k1.antiderivative_norm(1)
        add(f"stationary-variance-d{delta:g}", cov[0, 0],
            delta ** 2 * sigma ** 2 * anorm ** 2 / (2.0 * theta), _ID_TOL)
        add(f"laplacian-covariance-d{delta:g}", cov[0, 1],
            -sigma ** 2 * k1.norm() ** 2 / (2.0 * theta), _ID_TOL)
        add(f"probe-energy-d{delta:g}",
            float(np.sum(chans[0].coeffs ** 2)), k1.norm() ** 2, _ID_TOL)
        add(f"expected-energy-d{delta:g}",
            model.expected_energy(chans[1], horizon) / horizon,
            sigma ** 2 * k1.norm(1) ** 2 / (2.0 * theta * delta ** 2), _ID_TOL)
    for name in ("k1", "k2"):
        kern = get_kernel(name)
        add(f"psi-identity-{name}", psi_laplacian(kern, sigma0=sigma),
            psi_laplacian_identity(kern, sigma0=sigma), _PSI_TOL)
    s_a, mid, s_p = variance_ordering(k1, horizon)
    rows.append(("variance-ordering-upper", s_p, mid,
                 (s_p - mid) / mid, s_p >= mid))
    rows.append(("variance-ordering-lower", mid, s_a,
                 (mid - s_a) / s_a, mid >= s_a))
    path = os.path.join(config.output_dir, "oracle.csv")
    _write_csv(path, ORACLE_HEADER, rows)
    _write_manifest(config, ["oracle.csv"])
    failed = [r for r in rows if not r[4]]
    return 1 if failed else 0


def _study_asymptotics_table(config):
    rows = []
    for name in config.kernels:
        kern = get_kernel(name)
        horizon = config.horizon

        def add(quantity, value):
            rows.append((name, quantity, value))

        add("norm_sq", kern.norm() ** 2)
        add("grad_norm_sq", kern.norm(1) ** 2)
        try:
            add("antiderivative_grad_norm_sq", kern.antiderivative_norm(1) ** 2)
        except AnalyticUnavailable:
            add("antiderivative_grad_norm_sq", float("nan"))
        const, violated = proxy_constant(kern)
        add("proxy_constant", const)
        add("proxy_assumption_ok", 0.0 if violated else 1.0)
        add("sigma_augmented", sigma_augmented(kern, horizon))
        add("mu_factor_augmented", mu_augmented(kern, 1.0, 0.0))
        add("fisher_limit_unit", fisher_limit(kern, 1.0, 1.0, horizon))
        try:
            s_a, mid, s_p = variance_ordering(kern, horizon)
            add("sigma_proxy", s_p)
            add("variance_mid", mid)
        except AnalyticUnavailable:
            # moment assumption violated: the proxy CLT constants diverge
            add("sigma_proxy", float("nan"))
            add("variance_mid", float("nan"))
    path = os.path.join(config.output_dir, "constants.csv")
    _write_csv(path, CONSTANTS_HEADER, rows)
    _write_manifest(config, ["constants.csv"])
    return 0


ESTIMATES_HEADER = ("source", "estimator", "kernel", "delta", "x0",
                    "theta_hat", "ci_lo", "ci_hi", "status")


@dataclass(frozen=True)
class EstimateJob:
    """Estimation pass over previously written measurement CSV files."""

    inputs: tuple
    estimator: str = "both"
    refine: int = 0
    qv_mode: str = "realized"
    sigma: float = float("nan")
    level: float = 0.95
    output_dir: str = "out"


_ESTIMATE_KEYS = {"inputs", "estimator", "refine", "qv_mode", "sigma",
                  "level", "output_dir"}


def load_estimate_job(path):
    parser = ConfigParser(inline_comment_prefixes=("#",))
    if not parser.read(path):
        raise ConfigError(f"cannot read config file {path!r}")
    if parser.sections() != ["estimate"]:
        raise ConfigError("estimate config needs exactly one section "
                          "[estimate]")
    fields = {}
    for key, raw in parser.items("estimate"):
        if key not in _ESTIMATE_KEYS:
            raise ConfigError(f"unknown key {key!r} in section [estimate]")
        if key == "inputs":
            fields[key] = tuple(s.strip() for s in raw.split(",") if s.strip())
        elif key in ("refine",):
            fields[key] = int(raw)
        elif key in ("sigma", "level"):
            fields[key] = float(raw)
        else:
            fields[key] = raw.strip()
    if not fields.get("inputs"):
        raise ConfigError("[estimate] inputs must list at least one file")
    job = EstimateJob(**fields)
    if job.estimator not in ("augmented", "proxy", "both"):
        raise ConfigError(f"[estimate] unknown estimator {job.estimator!r}")
    if job.qv_mode not in ("realized", "analytic"):
        raise ConfigError(f"[estimate] unknown qv_mode {job.qv_mode!r}")
    return job


def run_estimate(job):
    """CLI verb: estimates with confidence intervals for stored paths."""
    import glob as globmod

    files = []
    for pattern in job.inputs:
        hits = sorted(globmod.glob(pattern))
        if not hits:
            raise ConfigError(f"[estimate] no file matches {pattern!r}")
        files.extend(hits)
    kinds = ESTIMATORS if job.estimator == "both" else (job.estimator,)
    rows = []
    for filename in files:
        path = MeasurementPath.from_csv(filename)
        kname = str(path.meta.get("kernel", ""))
        delta = float(path.meta.get("delta", float("nan")))
        x0 = float(path.meta.get("x0", float("nan")))
        for kind in kinds:
            try:
                kern = get_kernel(kname)
                if kind == "augmented":
                    theta_hat = augmented_mle(path, refine=job.refine).theta_hat
                else:
                    sigma = None if np.isnan(job.sigma) else job.sigma
                    theta_hat = proxy_mle(path, kern, qv_mode=job.qv_mode,
                                          sigma=sigma).theta_hat
            except LocalestError as err:
                rows.append((os.path.basename(filename), kind, kname, delta,
                             x0, float("nan"), float("nan"), float("nan"),
                             type(err).__name__))
                continue
            try:
                if kind == "augmented":
                    const = sigma_augmented(kern, path.horizon)
                else:
                    const = sigma_proxy(kern, path.horizon)
                lo, hi, _ = confidence_interval(theta_hat, delta, const,
                                                level=job.level)
            except AnalyticUnavailable:
                # point estimate stands even when no CLT interval exists
                lo = hi = float("nan")
            rows.append((os.path.basename(filename), kind, kname, delta,
                         x0, theta_hat, lo, hi, "ok"))
    os.makedirs(job.output_dir, exist_ok=True)
    _write_csv(os.path.join(job.output_dir, "estimates.csv"),
               ESTIMATES_HEADER, rows)
    for row in rows:
        print(f"{row[0]}  {row[1]:>9}  kernel={row[2]}  delta={row[3]:g}  "
              f"x0={row[4]:g}  theta_hat={row[5]:.6g}  "
              f"ci=[{row[6]:.6g}, {row[7]:.6g}]  {row[8]}")
    return 0


def run_simulate(config):
    """CLI verb: one replication's paths written as measurement CSVs."""
    validate(config)
    os.makedirs(config.output_dir, exist_ok=True)
    paths = _simulate_paths(config, 0)
    outputs = []
    for path in paths:
        name = (f"measurement-{path.meta['kernel']}"
                f"-d{path.meta['delta']:g}-x{path.meta['x0']:g}.csv")
        path.to_csv(os.path.join(config.output_dir, name))
        outputs.append(name)
    _write_manifest(config, outputs)
    return 0


def run(config):
    """Execute the configured study; returns a process exit status."""
    validate(config)
    os.makedirs(config.output_dir, exist_ok=True)
    dispatch = {
        "fig-rmse": _study_fig_rmse,
        "fig-center": _study_fig_center,
        "fig-heatmap": _study_fig_heatmap,
        "coverage": _study_coverage,
        "validate-oracle": _study_validate_oracle,
        "asymptotics-table": _study_asymptotics_table,
    }
    return dispatch[config.study](config)
