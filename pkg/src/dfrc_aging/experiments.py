"""Monte Carlo sweeps: estimation RMSE, rate versus power, allocation schemes.

Every trial draws its scenario and noise from streams keyed by
``(seed, trial, ...)``, so results do not depend on the order or the number of
worker processes (``DFRC_WORKERS``).  Rows are aggregated in trial order and
floats are written with ``repr``; the same spec and seed give the same CSV
bytes.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import allocation, comm
from .bounds import aged_covariance_exact, aged_crlb_approx, crlb_block1, predict_trajectory
from .config import (ScenarioParams, SystemConfig, apply_overrides, dbm_to_watt, paper_scale,
                     tomllib)
from .errors import ConfigError, GeometryError, InvalidRegimeError
from .model import evolve_state_linearized, linearized_step, sample_scenario, stream
from .radar import estimate_mobility, synthesize_measurement

CSV_HEADER = ("experiment", "sweep_var", "sweep_value", "scheme", "metric", "mean", "stderr",
              "theory", "trials", "seed")
FIGURES = ("fig4", "fig5", "fig6", "fig7", "fig8", "fig9")
PARAMS3 = ("angle", "distance", "velocity")
RESUME_MARKER = "# resume-next-point="


@dataclass(frozen=True)
class ExperimentSpec:
    figure: str
    sweep_var: str
    grid: tuple
    trials: int = 200
    seed: int = 0
    comm_schemes: tuple = ("mrt", "zf")
    kinds: tuple = allocation.SCHEMES_ALL
    blocks: tuple = ()
    draws: int = 10000
    overrides: dict = field(default_factory=dict)
    paper_scale: bool = False

    def __post_init__(self):
        if self.figure not in FIGURES:
            raise ConfigError(f"unknown figure {self.figure!r}; expected one of {FIGURES}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.grid:
            raise ConfigError("sweep grid must not be empty")
        for s in self.comm_schemes:
            comm._check_scheme(s)
        for k in self.kinds:
            if k not in allocation.SCHEMES_ALL:
                raise ConfigError(f"unknown scheme {k!r}")


def default_spec(figure: str, **changes) -> ExperimentSpec:
    base = {
        "fig4": dict(sweep_var="total_power_dbm", grid=(-10.0, 0.0, 10.0, 20.0, 30.0),
                     blocks=(1, 10), overrides={"training_symbols": 60}, comm_schemes=("mrt",)),
        "fig5": dict(sweep_var="total_power_dbm",
                     grid=(-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0),
                     blocks=(1, 2, 5, 10)),
        "fig6": dict(sweep_var="num_blocks", grid=tuple(range(1, 16))),
        "fig7": dict(sweep_var="total_power_dbm", grid=(-5.0, 0.0, 5.0, 10.0, 15.0)),
        "fig8": dict(sweep_var="training_symbols", grid=(100, 200, 300, 400, 500)),
        "fig9": dict(sweep_var="num_users", grid=(2, 4, 6, 8)),
    }
    if figure not in base:
        raise ConfigError(f"unknown figure {figure!r}; expected one of {FIGURES}")
    opts = dict(base[figure])
    opts.update(changes)
    return ExperimentSpec(figure=figure, **opts)


def load_spec(path: str | Path, **changes) -> ExperimentSpec:
    """Experiment spec from a flat TOML file (``figure`` is required)."""
    try:
        data = tomllib.loads(Path(path).read_text())
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if "figure" not in data:
        raise ConfigError(f"{path}: missing 'figure'")
    figure = data.pop("figure")
    overrides = data.pop("overrides", {})
    if not isinstance(overrides, dict):
        raise ConfigError(f"{path}: 'overrides' must be a table")
    known = {f.name for f in dataclasses.fields(ExperimentSpec)} - {"figure", "overrides"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}; valid keys: {sorted(known)}")
    for key in ("grid", "comm_schemes", "kinds", "blocks"):
        if key in data:
            data[key] = tuple(data[key])
    data.update(changes)
    spec = default_spec(figure, **data)
    if overrides:
        spec = dataclasses.replace(spec, overrides={**spec.overrides, **overrides})
    return spec


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    sweep_var: str
    sweep_value: float
    scheme: str
    metric: str
    mean: float
    stderr: float
    theory: float
    trials: int
    seed: int

    def as_tuple(self):
        return tuple(getattr(self, name) for name in CSV_HEADER)


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)

    def extend(self, rows):
        self.rows.extend(rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in self.rows:
            writer.writerow([_fmt(v) for v in row.as_tuple()])
        return buf.getvalue()

    def to_json_lines(self) -> str:
        import json
        return "".join(json.dumps(dict(zip(CSV_HEADER, (float(v) if isinstance(v, np.floating) else v
                                                         for v in r.as_tuple())))) + "\n"
                       for r in self.rows)

    @classmethod
    def from_csv(cls, text: str) -> "ResultTable":
        lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        reader = csv.reader(lines)
        header = next(reader)
        if tuple(header) != CSV_HEADER:
            raise ConfigError("unexpected results header")
        rows = []
        for rec in reader:
            e, sv, val, scheme, metric, mean, se, th, trials, seed = rec
            rows.append(ResultRow(e, sv, float(val), scheme, metric, float(mean), float(se),
                                  float(th), int(trials), int(seed)))
        return cls(rows)

    def select(self, **match) -> list[ResultRow]:
        return [r for r in self.rows if all(getattr(r, k) == v for k, v in match.items())]

    def value(self, field_name="mean", **match) -> float:
        rows = self.select(**match)
        if len(rows) != 1:
            raise KeyError(f"{len(rows)} rows match {match}")
        return getattr(rows[0], field_name)


def mean_stderr(samples) -> tuple[float, float, int]:
    x = np.asarray([s for s in samples if s is not None and np.isfinite(s)], dtype=float)
    if x.size == 0:
        return math.nan, math.nan, 0
    se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    return float(x.mean()), se, int(x.size)


# ---------------------------------------------------------------- configuration per point


def base_config(spec: ExperimentSpec, cfg: SystemConfig | None = None,
                params: ScenarioParams | None = None) -> tuple[SystemConfig, ScenarioParams]:
    cfg = cfg or SystemConfig()
    params = params or ScenarioParams()
    if spec.paper_scale:
        cfg = paper_scale(cfg)
    return apply_overrides(cfg, params, spec.overrides)


def point_config(spec: ExperimentSpec, cfg: SystemConfig, params: ScenarioParams, value):
    """Configuration at one sweep value; ``num_blocks`` is not a config key."""
    if spec.sweep_var == "num_blocks":
        return cfg, params
    if spec.sweep_var == "total_power_dbm":
        return dataclasses.replace(cfg, total_power=dbm_to_watt(float(value))), params
    return apply_overrides(cfg, params, {spec.sweep_var: value})


def uniform_band(cfg: SystemConfig) -> tuple[float, int, int]:
    """Equal power and bandwidth split: (power per band, target band, training band)."""
    k = cfg.num_targets
    share = cfg.total_subcarriers // (k + 1)
    return cfg.total_power / (k + 1), share, cfg.total_subcarriers - k * share


# ---------------------------------------------------------------- per-trial work


def _rmse_trial(spec, cfg, params, value, trial):
    scen = sample_scenario(cfg, spec.seed, trial, params)
    power, band, _ = uniform_band(cfg)
    aged = max(spec.blocks) if spec.blocks else 10
    t_blk = cfg.block_duration
    out = {"sq1": [], "crlb": [], "sqN": [], "exactN": [], "approxN": []}
    for k, target in enumerate(scen.targets, start=1):
        meas = synthesize_measurement(target, power, band, cfg, stream(spec.seed, trial, 2, k))
        est = estimate_mobility(meas, target.heading, cfg)
        out["sq1"].append((est.mobility - target.mobility) ** 2)
        c1 = crlb_block1(target, power, band, cfg)
        out["crlb"].append(c1.diag)
        # truth evolves with noise, the prediction propagates the estimate without it
        rng = stream(spec.seed, trial, 3, k)
        truth, pred = target, est.mobility
        for _ in range(aged - 1):
            truth = evolve_state_linearized(truth, t_blk, rng)
            # an estimate at the origin (low-SNR outlier) is held instead of propagated
            if pred[1] > 0:
                pred = linearized_step(pred, target.heading, t_blk)
        out["sqN"].append((pred - truth.mobility) ** 2)
        traj = predict_trajectory(target, t_blk, aged)
        out["exactN"].append(aged_covariance_exact(c1, traj, target.evolution_cov, aged, t_blk).diag)
        out["approxN"].append(aged_crlb_approx(c1, traj, target.evolution_cov, aged, t_blk).diag)
    return {key: np.mean(val, axis=0) for key, val in out.items()}


def _rate_trial(spec, cfg, params, value, trial):
    scen = sample_scenario(cfg, spec.seed, trial, params)
    _, _, b0 = uniform_band(cfg)
    p0 = cfg.total_power / (cfg.num_targets + 1)
    beta = np.array([u.beta for u in scen.users])
    rho = np.array([u.rho for u in scen.users])
    lam = np.atleast_1d(comm.mmse_quality(beta, p0, b0, cfg))
    q = cfg.num_users
    powers = np.full(q, cfg.total_power / q)
    res = {}
    for idx, cs in enumerate(spec.comm_schemes):
        moments = comm.SinrMoments(cfg.num_tx_antennas, q, cs, spec.draws,
                                   stream(spec.seed, trial, 4, idx))
        for n in spec.blocks:
            g_mc = moments.gamma(beta, rho, lam, n, cfg.user_noise_power, powers)
            g_cf = comm.gamma_closed_form(beta, rho, p0, b0, n, cs, cfg)
            try:
                limit = comm.asymptotic_rate(rho, np.full(q, 1.0 / q), n, cs, cfg)
            except InvalidRegimeError:
                limit = math.nan
            res[(cs, n)] = (comm.total_rate(g_mc, powers, n, cfg),
                            comm.total_rate(g_cf, powers, n, cfg), limit)
    return res


def _allocation_trial(spec, cfg, params, value, trial):
    scen = sample_scenario(cfg, spec.seed, trial, params)
    problem = allocation.AllocationProblem(scen, cfg, params=params)
    res = {}
    for cs in spec.comm_schemes:
        for kind in spec.kinds:
            if spec.sweep_var == "num_blocks":
                intervals = [1] if kind == "no_aging" else [int(value)]
            else:
                intervals = None
            try:
                sol = allocation.solve(problem, cs, kind, intervals=intervals)
            except GeometryError:
                sol = None
            if sol is None or not sol.feasible:
                res[(cs, kind)] = (math.nan, math.nan)
            else:
                res[(cs, kind)] = (sol.objective, float(sol.num_blocks))
    return res


TRIAL_RUNNERS: dict[str, Callable] = {"fig4": _rmse_trial, "fig5": _rate_trial}
for _fig in ("fig6", "fig7", "fig8", "fig9"):
    TRIAL_RUNNERS[_fig] = _allocation_trial


def _run_trial(args):
    spec, cfg, params, value, trial = args
    return TRIAL_RUNNERS[spec.figure](spec, cfg, params, value, trial)


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("DFRC_WORKERS", "1")))
    except ValueError:
        return 1


def _map_trials(spec, cfg, params, value, workers):
    jobs = [(spec, cfg, params, value, t) for t in range(spec.trials)]
    if workers <= 1:
        return [_run_trial(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_trial, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


# ---------------------------------------------------------------- aggregation


def _rows_rmse(spec, value, results):
    rows = []

    def add(scheme, metric, mse_samples, theory_samples):
        mse = np.asarray(mse_samples)
        m = float(mse.mean())
        se_mse = float(mse.std(ddof=1) / math.sqrt(mse.size)) if mse.size > 1 else 0.0
        rmse = math.sqrt(m)
        se = se_mse / (2 * rmse) if rmse > 0 else 0.0
        theory = math.sqrt(float(np.mean(theory_samples)))
        rows.append(ResultRow(spec.figure, spec.sweep_var, float(value), scheme, metric, rmse, se,
                              theory, len(mse), spec.seed))

    aged = max(spec.blocks) if spec.blocks else 10
    for i, name in enumerate(PARAMS3):
        add("N=1", f"rmse_{name}", [r["sq1"][i] for r in results], [r["crlb"][i] for r in results])
        add(f"N={aged}", f"rmse_{name}", [r["sqN"][i] for r in results],
            [r["exactN"][i] for r in results])
        approx = math.sqrt(float(np.mean([r["approxN"][i] for r in results])))
        exact = math.sqrt(float(np.mean([r["exactN"][i] for r in results])))
        rows.append(ResultRow(spec.figure, spec.sweep_var, float(value), f"N={aged}",
                              f"bound_approx_{name}", approx, 0.0, exact, len(results), spec.seed))
    return rows


def _rows_rate(spec, value, results):
    rows = []
    for cs in spec.comm_schemes:
        for n in spec.blocks:
            sim = [r[(cs, n)][0] for r in results]
            theory = float(np.mean([r[(cs, n)][1] for r in results]))
            m, se, cnt = mean_stderr(sim)
            rows.append(ResultRow(spec.figure, spec.sweep_var, float(value), f"{cs}_n{n}", "rate",
                                  m, se, theory, cnt, spec.seed))
            limit = [r[(cs, n)][2] for r in results]
            lm, lse, lcnt = mean_stderr(limit)
            rows.append(ResultRow(spec.figure, spec.sweep_var, float(value), f"{cs}_n{n}",
                                  "asymptote", lm, lse if lcnt else math.nan, lm, lcnt, spec.seed))
    return rows


def _rows_allocation(spec, value, results):
    rows = []
    for cs in spec.comm_schemes:
        for kind in spec.kinds:
            vals = [r[(cs, kind)][0] for r in results]
            ns = [r[(cs, kind)][1] for r in results]
            m, se, cnt = mean_stderr(vals)
            scheme = f"{kind}_{cs}"
            rows.append(ResultRow(spec.figure, spec.sweep_var, float(value), scheme, "rate",
                                  m, se, math.nan, cnt, spec.seed))
            frac = np.isfinite(np.asarray(vals, dtype=float)).astype(float)
            fm, fse, _ = mean_stderr(frac)
            rows.append(ResultRow(spec.figure, spec.sweep_var, float(value), scheme, "feasible",
                                  fm, fse, math.nan, len(vals), spec.seed))
            nm, nse, ncnt = mean_stderr(ns)
            rows.append(ResultRow(spec.figure, spec.sweep_var, float(value), scheme, "interval",
                                  nm, nse, math.nan, ncnt, spec.seed))
            if kind != "proposed" and "proposed" in spec.kinds:
                # paired over trials where both schemes are feasible (nan drops the rest)
                diff = [r[(cs, "proposed")][0] - r[(cs, kind)][0] for r in results]
                dm, dse, dcnt = mean_stderr(diff)
                rows.append(ResultRow(spec.figure, spec.sweep_var, float(value), scheme,
                                      "proposed_minus", dm, dse, math.nan, dcnt, spec.seed))
    return rows


ROW_BUILDERS = {"fig4": _rows_rmse, "fig5": _rows_rate}
for _fig in ("fig6", "fig7", "fig8", "fig9"):
    ROW_BUILDERS[_fig] = _rows_allocation


def run_point(spec: ExperimentSpec, cfg: SystemConfig, params: ScenarioParams, value,
              workers: int | None = None) -> tuple[list, list]:
    """Per-trial results and aggregated rows for one sweep value."""
    pcfg, pparams = point_config(spec, cfg, params, value)
    results = _map_trials(spec, pcfg, pparams, value, workers or worker_count())
    return results, ROW_BUILDERS[spec.figure](spec, value, results)


def run_experiment(spec: ExperimentSpec, cfg: SystemConfig | None = None,
                   params: ScenarioParams | None = None,
                   done_rows: Sequence[ResultRow] = (), on_point: Callable | None = None,
                   workers: int | None = None) -> ResultTable:
    """Run every sweep point, skipping values that already appear in ``done_rows``."""
    cfg, params = base_config(spec, cfg, params)
    table = ResultTable(list(done_rows))
    finished = {r.sweep_value for r in done_rows}
    for value in spec.grid:
        if float(value) in finished:
            continue
        _, rows = run_point(spec, cfg, params, value, workers)
        table.extend(rows)
        if on_point is not None:
            on_point(table)
    return table


def run_rmse_experiment(spec: ExperimentSpec, cfg=None, params=None) -> ResultTable:
    return run_experiment(spec, cfg, params)


def run_rate_experiment(spec: ExperimentSpec, cfg=None, params=None) -> ResultTable:
    return run_experiment(spec, cfg, params)


def run_allocation_experiment(spec: ExperimentSpec, cfg=None, params=None) -> ResultTable:
    return run_experiment(spec, cfg, params)


# ---------------------------------------------------------------- files


def atomic_write(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def partial_path(path: str | Path) -> Path:
    return Path(str(path) + ".partial")


def read_partial(path: str | Path) -> list[ResultRow]:
    p = partial_path(path)
    if not p.exists():
        return []
    return ResultTable.from_csv(p.read_text()).rows


def run_to_file(spec: ExperimentSpec, out: str | Path, cfg=None, params=None,
                resume: bool = False, fmt: str = "csv", workers: int | None = None) -> ResultTable:
    """Run an experiment and write it atomically.

    On interruption the finished sweep points are saved next to ``out`` with
    a ``.partial`` suffix and a resume marker; ``resume=True`` picks them up.
    """
    done = read_partial(out) if resume else []
    state = {"table": ResultTable(list(done))}

    def keep(table):
        state["table"] = table

    try:
        table = run_experiment(spec, cfg, params, done_rows=done, on_point=keep, workers=workers)
    except KeyboardInterrupt:
        table = state["table"]
        finished = {r.sweep_value for r in table.rows}
        remaining = [v for v in spec.grid if float(v) not in finished]
        marker = f"{RESUME_MARKER}{remaining[0] if remaining else ''}\n"
        atomic_write(partial_path(out), table.to_csv() + marker)
        raise
    text = table.to_csv() if fmt == "csv" else table.to_json_lines()
    atomic_write(out, text)
    if partial_path(out).exists():
        partial_path(out).unlink()
    return table
