"""Experiment configuration, orchestration and result files.

Every experiment expands its parameter grid into independent tasks. Task
seeds are ``SeedSequence([master_seed, crc32(name), grid_index, trial])``, so
adding grid points never changes existing trials and results do not depend
on the worker count. Rows are appended to the raw CSV in task order as they
finish; a final ``#complete`` line marks a finished run. Wall-clock times go
to a ``.timing.csv`` sidecar so the raw file is reproducible byte for byte.
"""

from __future__ import annotations

import csv
import enum
import io
import itertools
import json
import math
import os
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import boundary, contraction, peps, sign_mc, statmech
from .ensembles import EnsembleSpec, Kind, PepsSpec, Target
from .errors import ConfigError, FormatError

__all__ = [
    "Experiment",
    "ExperimentConfig",
    "COMPLETE_MARKER",
    "task_seed",
    "load_config",
    "run_experiment",
    "read_rows",
    "aggregate",
    "emit_plot_data",
]

COMPLETE_MARKER = "#complete"


class Experiment(str, enum.Enum):
    DELTA_F = "deltaf"
    ENTROPY_SCAN = "entropy"
    INTERPOLATION = "interp"
    STATMECH = "statmech"
    PHASE_SCAN = "phase"
    PEPS_ENTROPY = "peps"
    POSITIVE_SUM = "possum"
    GAUGE_OPT = "gauge"
    ORACLE_SUITE = "oracle"


# defaults are small enough to finish in seconds
DEFAULTS = {
    Experiment.DELTA_F: dict(kind=["orthogonal"], D=[2], **{"lambda": [0.0, 0.3, 1.0]}, W=[3], L=200, burn_in=20, trials=4),
    Experiment.ENTROPY_SCAN: dict(kind="orthogonal", target="ones", D=[3], lambdaD=[0.25, 1.0, 2.0], W=[2, 3], trials=10, chi=None, method="auto"),
    Experiment.INTERPOLATION: dict(kind="orthogonal", target=["rank1_signed", "positive_random"], D=[3], **{"lambda": [0.25, 0.5, 1.0, 2.0]}, W=[3], trials=10, chi=None, method="auto"),
    Experiment.STATMECH: dict(model=["orthogonal"], D=[4], **{"lambda": [0.125, 0.25, 0.5]}, W=[2, 3], H=None, bc_top="A", bc_bottom="B", edges="trimmed"),
    Experiment.PHASE_SCAN: dict(model="orthogonal", D=[2, 3, 4], mu=[0.5, 1.0, 2.0], W=[2, 3, 4], edges="trimmed"),
    Experiment.PEPS_ENTROPY: dict(D=[2], d=[2, 4], W=[2, 3], trials=4, chi=None),
    Experiment.POSITIVE_SUM: dict(D=2, d=64, samples=10, H=4, W=4, K=10000),
    Experiment.GAUGE_OPT: dict(mode=["positivity"], D=2, d=2, shift=0.0, scramble=0.5, iters=60, trials=5, W=3),
    Experiment.ORACLE_SUITE: dict(kind=["orthogonal", "unitary", "gaussian_real", "gaussian_complex"], D=[2, 3], **{"lambda": [0.0, 0.5, 2.0]}, H=3, W=3, trials=1),
}

LIST_FIELDS = {"kind", "target", "D", "lambda", "lambdaD", "mu", "W", "d", "model", "mode"}


@dataclass
class ExperimentConfig:
    experiment: Experiment
    params: dict = field(default_factory=dict)
    master_seed: int = 0
    output_path: str = "results.csv"
    workers: int = 1

    def __post_init__(self):
        try:
            self.experiment = Experiment(self.experiment)
        except ValueError:
            raise ConfigError("experiment", f"unknown experiment {self.experiment!r}") from None
        merged = dict(DEFAULTS[self.experiment])
        unknown = set(self.params) - set(merged)
        if unknown:
            raise ConfigError(sorted(unknown)[0], f"not a parameter of {self.experiment.value}")
        merged.update({k: v for k, v in self.params.items() if v is not None})
        self.params = merged
        if self.workers < 1:
            raise ConfigError("workers", "must be >= 1")
        self.validate()

    def grid(self, name: str) -> list:
        v = self.params[name]
        return list(v) if isinstance(v, (list, tuple)) else [v]

    def validate(self) -> None:
        p = self.params
        for name in p:
            if name in LIST_FIELDS and not self.grid(name):
                raise ConfigError(name, "grid must be nonempty")
        for name in ("trials", "K", "L", "samples", "iters"):
            if name in p and (not isinstance(p[name], int) or p[name] < 1):
                raise ConfigError(name, "must be a positive integer")
        e = self.experiment
        if "kind" in p:
            for k in self.grid("kind"):
                _enum(Kind, k, "kind")
        if "target" in p:
            for t in self.grid("target"):
                _enum(Target, t, "target")
        if "D" in p and any(int(D) < 1 for D in self.grid("D")):
            raise ConfigError("D", "bond dimension must be >= 1")
        if e is Experiment.DELTA_F:
            if p["L"] - p["burn_in"] < 50:
                raise ConfigError("L", "need L - burn_in >= 50")
            worst = max(D**W for D in self.grid("D") for W in self.grid("W"))
            if worst > sign_mc.DELTA_F_LIMIT:
                raise ConfigError("W", f"D**W = {worst} exceeds the transfer limit {sign_mc.DELTA_F_LIMIT}")
        if e in (Experiment.ENTROPY_SCAN, Experiment.INTERPOLATION):
            if p["chi"] is not None and p["chi"] < max(self.grid("D")):
                raise ConfigError("chi", "must be >= D")
            if p["method"] not in ("auto", "gram", "mps"):
                raise ConfigError("method", "must be auto, gram or mps")
            if p["method"] == "gram":
                worst = max(D**W for D in self.grid("D") for W in self.grid("W"))
                if worst > boundary.GRAM_LIMIT:
                    raise ConfigError("W", f"D**W = {worst} exceeds the exact-entropy limit {boundary.GRAM_LIMIT}")
        if e in (Experiment.STATMECH, Experiment.PHASE_SCAN):
            for m in self.grid("model"):
                if m not in statmech.MODEL_BUILDERS:
                    raise ConfigError("model", f"unknown model {m!r}")
            q = max(statmech.MODEL_BUILDERS[m](2, 0.1).q for m in self.grid("model"))
            if q ** max(self.grid("W")) > statmech.TRANSFER_GUARD:
                raise ConfigError("W", f"q**W exceeds the transfer guard {statmech.TRANSFER_GUARD}")
            if any(D < 2 for D in self.grid("D")):
                raise ConfigError("D", "statmech models need D >= 2")
        if e is Experiment.POSITIVE_SUM and (p["H"] % 2 or p["W"] % 2):
            raise ConfigError("W" if p["W"] % 2 else "H", "positive-sum rewriting needs even lattice sides")
        if e is Experiment.ORACLE_SUITE:
            worst = max(D ** (2 * p["H"] * p["W"] - p["H"] - p["W"]) for D in self.grid("D"))
            if worst > contraction.BRUTE_FORCE_LIMIT:
                raise ConfigError("D", "brute-force enumeration exceeds its size guard")
        if e is Experiment.GAUGE_OPT:
            for m in self.grid("mode"):
                _enum(peps.GaugeMode, m, "mode")


def _enum(cls, value, name):
    try:
        return cls(value)
    except ValueError:
        raise ConfigError(name, f"invalid value {value!r}") from None


def load_config(path: str | os.PathLike | None, experiment: str, overrides: dict | None = None) -> ExperimentConfig:
    """Read a JSON config (optional) and apply non-``None`` overrides.

    The file may hold the experiment's parameters at top level or under a
    ``params`` key, plus ``seed``, ``out`` and ``workers``.
    """
    raw: dict = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("config", str(exc)) from None
        if not isinstance(raw, dict):
            raise ConfigError("config", "top level must be an object")
    raw = dict(raw)
    if raw.get("experiment", experiment) != experiment:
        raise ConfigError("experiment", f"config is for {raw['experiment']!r}, not {experiment!r}")
    raw.pop("experiment", None)
    meta = {k: raw.pop(k) for k in ("seed", "out", "workers") if k in raw}
    params = dict(raw.pop("params", {}))
    params.update(raw)
    overrides = dict(overrides or {})
    for k in ("seed", "out", "workers"):
        v = overrides.pop(k, None)
        if v is not None:
            meta[k] = v
    params.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(
        experiment,
        params,
        master_seed=int(meta.get("seed", 0)),
        output_path=str(meta.get("out", f"{experiment}.csv")),
        workers=int(meta.get("workers", 1)),
    )


def task_seed(master_seed: int, experiment: str, grid_index: int, trial: int) -> int:
    key = zlib.crc32(str(Experiment(experiment).value).encode())
    ss = np.random.SeedSequence([int(master_seed), key, int(grid_index), int(trial)])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


# task expansion and execution

COLUMNS = {
    Experiment.DELTA_F: ["kind", "D", "lambda", "W", "L", "burn_in", "delta_f", "delta_f_stderr", "seed"],
    Experiment.ENTROPY_SCAN: ["kind", "target", "D", "lambda", "lambdaD", "W", "H", "chi", "trial", "s2", "trunc_weight", "seed", "s2_chi2", "method"],
    Experiment.INTERPOLATION: ["kind", "target", "D", "lambda", "lambdaD", "W", "H", "chi", "trial", "s2", "trunc_weight", "seed", "s2_chi2", "method"],
    Experiment.STATMECH: ["model", "D", "lambda", "mu", "W", "H", "bc", "log_Z_twisted", "log_Z_uniform", "predicted_s2", "seed"],
    Experiment.PHASE_SCAN: ["model", "D", "mu", "W_list", "s2_list", "line_tension", "seed"],
    Experiment.PEPS_ENTROPY: ["D", "d", "W", "trial", "s2", "seed", "chi", "method"],
    Experiment.POSITIVE_SUM: ["D", "d", "sample", "success", "method", "recon_error", "min_eigenvalue", "padding_cost", "seed"],
    Experiment.GAUGE_OPT: ["mode", "trial", "iter", "objective", "cond_X", "cond_Y", "s2_before", "s2_after", "seed"],
    Experiment.ORACLE_SUITE: ["kind", "D", "lambda", "trial", "brute_force", "transfer", "rel_dev", "seed"],
}

GROUP_KEYS = {
    Experiment.DELTA_F: (["kind", "D", "lambda", "W"], "delta_f"),
    Experiment.ENTROPY_SCAN: (["kind", "target", "D", "lambdaD", "W"], "s2"),
    Experiment.INTERPOLATION: (["kind", "target", "D", "lambda", "W"], "s2"),
    Experiment.STATMECH: (["model", "D", "mu", "W"], "predicted_s2"),
    Experiment.PHASE_SCAN: (["model", "D", "mu"], "line_tension"),
    Experiment.PEPS_ENTROPY: (["D", "d", "W"], "s2"),
    Experiment.POSITIVE_SUM: (["D", "d"], "success"),
    Experiment.GAUGE_OPT: (["mode", "iter"], "objective"),
    Experiment.ORACLE_SUITE: (["kind", "D"], "rel_dev"),
}


def _tasks(cfg: ExperimentConfig) -> list[tuple]:
    """``(grid_index, trial, point)`` triples in canonical order."""
    p = cfg.params
    e = cfg.experiment
    g = cfg.grid
    if e is Experiment.DELTA_F:
        points = [dict(kind=k, D=D, lam=lam, W=W) for k in g("kind") for D in g("D") for lam in g("lambda") for W in g("W")]
        trials = p["trials"]
    elif e is Experiment.ENTROPY_SCAN:
        points = [dict(target=t, D=D, lamD=x, W=W) for t in g("target") for D in g("D") for x in g("lambdaD") for W in g("W")]
        trials = p["trials"]
    elif e is Experiment.INTERPOLATION:
        points = [dict(target=t, D=D, lamD=lam * D, W=W) for t in g("target") for D in g("D") for lam in g("lambda") for W in g("W")]
        trials = p["trials"]
    elif e is Experiment.STATMECH:
        points = [dict(model=m, D=D, lam=lam, W=W) for m in g("model") for D in g("D") for lam in g("lambda") for W in g("W")]
        trials = 1
    elif e is Experiment.PHASE_SCAN:
        points = [dict(model=m, D=D, mu=mu) for m in g("model") for D in g("D") for mu in g("mu")]
        trials = 1
    elif e is Experiment.PEPS_ENTROPY:
        points = [dict(D=D, d=d, W=W) for D in g("D") for d in g("d") for W in g("W")]
        trials = p["trials"]
    elif e is Experiment.POSITIVE_SUM:
        points = [dict()]
        trials = p["samples"]
    elif e is Experiment.GAUGE_OPT:
        points = [dict(mode=m) for m in g("mode")]
        trials = p["trials"]
    else:
        points = [dict(kind=k, D=D, lam=lam) for k in g("kind") for D in g("D") for lam in g("lambda")]
        trials = p["trials"]
    return [(i, t, pt) for i, pt in enumerate(points) for t in range(trials)]


def _run_task(args) -> tuple[list[dict], float]:
    e, params, master_seed, (gi, trial, pt) = args
    e = Experiment(e)
    seed = task_seed(master_seed, e.value, gi, trial)
    t0 = time.perf_counter()
    rows = _TASK_RUNNERS[e](params, pt, trial, seed)
    return rows, (time.perf_counter() - t0) * 1e3


def _deltaf_task(p, pt, trial, seed):
    spec = EnsembleSpec(pt["kind"], pt["D"], pt["lam"], seed=seed)
    rec = sign_mc.cylinder_delta_f(spec, pt["W"], p["L"], p["burn_in"], np.random.default_rng(seed))
    return [dict(kind=spec.kind.value, D=pt["D"], **{"lambda": pt["lam"]}, W=pt["W"], L=p["L"], burn_in=p["burn_in"],
                 delta_f=rec.delta_f, delta_f_stderr=rec.delta_f_stderr, seed=seed)]


def _entropy_task(p, pt, trial, seed):
    D = pt["D"]
    row = boundary.entropy_trial(p["kind"], D, pt["lamD"] / D, pt["W"], seed, chi=p["chi"], target=pt["target"], method=p["method"])
    row.update({"lambda": pt["lamD"] / D, "lambdaD": pt["lamD"], "trial": trial})
    return [row]


def _statmech_task(p, pt, trial, seed):
    model = statmech.MODEL_BUILDERS[pt["model"]](pt["D"], pt["lam"])
    W = pt["W"]
    H = 4 * W if p["H"] is None else p["H"]
    r = statmech.predicted_entropy(model, W, H, p["bc_top"], p["bc_bottom"], edges=p["edges"])
    return [dict(model=pt["model"], D=pt["D"], **{"lambda": pt["lam"]}, mu=pt["lam"] * pt["D"], W=W, H=H,
                 bc=f"{p['bc_top']}/{p['bc_bottom']}", log_Z_twisted=r.log_Z_twisted, log_Z_uniform=r.log_Z_uniform,
                 predicted_s2=r.predicted_s2, seed=seed)]


def _phase_task(p, pt, trial, seed):
    res = statmech.phase_scan(pt["model"], [pt["D"]], [pt["mu"]], p["W"] if isinstance(p["W"], list) else [p["W"]], edges=p["edges"])[0]
    return [dict(model=pt["model"], D=pt["D"], mu=pt["mu"], W_list=" ".join(map(str, res["Ws"])),
                 s2_list=" ".join(repr(float(x)) for x in res["s2"]), line_tension=res["line_tension"], seed=seed)]


def _peps_task(p, pt, trial, seed):
    row = peps.peps_entropy_trial(pt["D"], pt["d"], pt["W"], seed, chi=p["chi"], check=trial == 0)
    return [dict(D=pt["D"], d=pt["d"], W=pt["W"], trial=trial, s2=row["s2"], seed=seed, chi=row["chi"], method=row["method"])]


def _possum_task(p, pt, trial, seed):
    from .ensembles import make_peps_tensor

    rng = np.random.default_rng(seed)
    a = peps.double_layer(make_peps_tensor(PepsSpec(p["D"], p["d"]), rng))
    rho = peps.rho_from_grouping(a, peps.Grouping.LD_UR)
    dec = peps.separable_decompose(rho, rng=rng)
    ok = bool(dec.success)
    return [dict(D=p["D"], d=p["d"], sample=trial, success=int(ok), method=dec.method if ok else "failed",
                 recon_error=dec.recon_error if ok else math.nan,
                 min_eigenvalue=dec.min_factor_eigenvalue() if ok else math.nan,
                 padding_cost=dec.padding_cost, seed=seed)]


def gauge_test_tensor(D: int, d: int, shift: float, scramble: float, rng) -> peps.DoubleLayerTensor:
    """Double layer of a shifted random PEPS tensor hidden behind a random bond gauge."""
    from .ensembles import make_peps_tensor

    c = make_peps_tensor(PepsSpec(D, d), rng) + shift / D**2
    a = peps.double_layer(c)
    x = np.eye(D) + scramble * (rng.standard_normal((D, D)) + 1j * rng.standard_normal((D, D))) / math.sqrt(2 * D)
    y = np.eye(D) + scramble * (rng.standard_normal((D, D)) + 1j * rng.standard_normal((D, D))) / math.sqrt(2 * D)
    A = peps.apply_gauge(a.A, np.kron(x, x.conj()), np.kron(y, y.conj()))
    return peps.DoubleLayerTensor(A, a.ket_dims)


def uniform_block_s2(A: np.ndarray, W: int, boundary_vectors: dict | None = None) -> float:
    """Central-cut ``s2`` of the ``4W x W`` open-right block of a uniform tensor."""
    H = 4 * W
    net = contraction.uniform_network(A, H, W, boundary_vectors, open_right=True)
    return boundary.block_entropy(net, H // 2)["s2"]


def _gauge_task(p, pt, trial, seed):
    rng = np.random.default_rng(seed)
    a = gauge_test_tensor(p["D"], p["d"], p["shift"], p["scramble"], rng)
    pair, out = peps.gauge_optimize(a, pt["mode"], p["iters"], rng)
    before = uniform_block_s2(a.A, p["W"])
    after = uniform_block_s2(out.A, p["W"], peps.gauge_boundary(pair.X, pair.Y))
    rows = []
    for it, (obj, (cx, cy)) in enumerate(zip(pair.objective_trace, pair.cond_trace)):
        rows.append(dict(mode=pt["mode"], trial=trial, iter=it, objective=obj, cond_X=cx, cond_Y=cy,
                         s2_before=before, s2_after=after, seed=seed))
    return rows


def _oracle_task(p, pt, trial, seed):
    spec = EnsembleSpec(pt["kind"], pt["D"], pt["lam"], seed=seed)
    net = contraction.random_network(spec, p["H"], p["W"], seed=seed)
    bf = contraction.brute_force_value(net)
    tr = contraction.transfer_value(net)
    return [dict(kind=spec.kind.value, D=pt["D"], **{"lambda": pt["lam"]}, trial=trial, brute_force=complex(bf.value),
                 transfer=complex(tr.value), rel_dev=tr.relative_deviation(bf), seed=seed)]


_TASK_RUNNERS = {
    Experiment.DELTA_F: _deltaf_task,
    Experiment.ENTROPY_SCAN: _entropy_task,
    Experiment.INTERPOLATION: _entropy_task,
    Experiment.STATMECH: _statmech_task,
    Experiment.PHASE_SCAN: _phase_task,
    Experiment.PEPS_ENTROPY: _peps_task,
    Experiment.POSITIVE_SUM: _possum_task,
    Experiment.GAUGE_OPT: _gauge_task,
    Experiment.ORACLE_SUITE: _oracle_task,
}


# csv i/o

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (complex, np.complexfloating)):
        v = complex(v)
        return repr(v.real) if v.imag == 0 else repr(v)
    if v is None:
        return ""
    return str(v)


def _write_row(fh, columns, row) -> None:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerow([_fmt(row.get(c)) for c in columns])
    fh.write(buf.getvalue())


def read_rows(path) -> tuple[list[dict], bool]:
    """Parse a raw CSV; returns the rows and whether the completion marker is present."""
    text = Path(path).read_text()
    lines = text.splitlines()
    complete = bool(lines) and lines[-1] == COMPLETE_MARKER
    body = [ln for ln in lines if not ln.startswith("#")]
    return list(csv.DictReader(body)), complete


def _num(x):
    try:
        return float(x)
    except (TypeError, ValueError):
        return x


def aggregate(rows: list[dict], keys: list[str], value: str) -> list[dict]:
    """Mean, std, stderr and count of ``value`` per combination of ``keys``."""
    groups: dict = {}
    for r in rows:
        missing = [k for k in keys + [value] if k not in r]
        if missing:
            raise FormatError(f"missing columns: {missing}")
        groups.setdefault(tuple(r[k] for k in keys), []).append(float(r[value]))
    out = []
    for key, vals in groups.items():
        v = np.array(vals)
        std = float(v.std(ddof=1)) if len(v) > 1 else 0.0
        out.append(dict(zip(keys, key), n=len(v), mean=float(v.mean()), std=std, stderr=std / math.sqrt(len(v))))
    return out


def _extra_aggregates(cfg: ExperimentConfig, rows: list[dict]) -> list[dict]:
    """Per-experiment summary rows that need more than grouped statistics."""
    p = cfg.params
    if cfg.experiment is Experiment.POSITIVE_SUM:
        spec = PepsSpec(p["D"], p["d"], cfg.master_seed)
        seed = task_seed(cfg.master_seed, cfg.experiment.value, 1, 0)
        net, layers = peps.peps_network(spec, p["H"], p["W"], seed)
        rng = np.random.default_rng(seed)
        decs = peps.decompose_network(layers, rng)
        exact = float(np.real(contraction.transfer_value(net).value))
        if not all(d.success for row in decs for d in row):
            return [dict(key="network", n=0, mean=math.nan, std=math.nan, stderr=math.nan, exact=exact, min_face=math.nan)]
        est, faces = peps.positive_sum_estimate(layers, decs, p["K"], rng, return_samples=True)
        return [dict(key="network", n=p["K"], mean=est.mean, std=est.stderr * math.sqrt(p["K"]), stderr=est.stderr,
                     exact=exact, min_face=float(faces.min()))]
    return []


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run every task, writing ``out``, ``out.agg.csv`` and ``out.timing.csv``.

    Returns the paths written and the number of raw rows.
    """
    out = Path(cfg.output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    agg_path = out.with_suffix(".agg.csv")
    timing_path = out.with_suffix(".timing.csv")
    columns = ["experiment"] + COLUMNS[cfg.experiment]
    tag = cfg.experiment.value
    tasks = _tasks(cfg)
    args = [(cfg.experiment.value, cfg.params, cfg.master_seed, t) for t in tasks]
    rows: list[dict] = []
    with open(out, "w", encoding="utf-8", newline="") as fh, open(timing_path, "w", encoding="utf-8") as th:
        fh.write(",".join(columns) + "\n")
        th.write("task,wall_time_ms\n")
        fh.flush()
        if cfg.workers > 1 and len(args) > 1:
            pool = ProcessPoolExecutor(max_workers=cfg.workers)
            results = pool.map(_run_task, args)
        else:
            pool = None
            results = map(_run_task, args)
        try:
            for i, (task_rows, ms) in enumerate(results):
                for r in task_rows:
                    r = dict(r, experiment=tag)
                    _write_row(fh, columns, r)
                    rows.append({c: _fmt(r.get(c)) for c in columns})
                fh.flush()
                th.write(f"{i},{ms:.3f}\n")
        finally:
            if pool is not None:
                pool.shutdown()
        fh.write(COMPLETE_MARKER + "\n")
    keys, value = GROUP_KEYS[cfg.experiment]
    agg = aggregate(rows, keys, value) + _extra_aggregates(cfg, rows)
    agg_cols = list(dict.fromkeys(itertools.chain.from_iterable(a.keys() for a in agg))) if agg else keys
    with open(agg_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(agg_cols) + "\n")
        for a in agg:
            _write_row(fh, agg_cols, a)
    return dict(raw=str(out), agg=str(agg_path), timing=str(timing_path), rows=len(rows))


# plot data

PLOT_STYLES = {
    # style: (required columns, x column, value column, series columns, divide by W)
    "deltaf": (["D", "lambda", "delta_f"], "lambda", "delta_f", ["D"], False),
    "entropy": (["D", "lambdaD", "W", "s2"], "lambdaD", "s2", ["D", "W"], True),
    "interp": (["target", "D", "lambda", "W", "s2"], "lambda", "s2", ["target", "D", "W"], True),
    "peps": (["D", "d", "W", "s2"], "W", "s2", ["D", "d"], False),
    "statmech": (["model", "D", "mu", "W", "predicted_s2"], "mu", "predicted_s2", ["model", "D", "W"], True),
}


def emit_plot_data(raw_csv, style: str, out=None) -> list[dict]:
    """Reduce a raw CSV to ``(x, y, yerr, series)`` rows and write them to ``out``.

    Series keys name the grouping columns that actually vary, e.g. ``W=4``.
    """
    if style not in PLOT_STYLES:
        raise FormatError(f"unknown plot style {style!r}; choose from {sorted(PLOT_STYLES)}")
    need, xcol, ycol, series_cols, per_w = PLOT_STYLES[style]
    rows, _ = read_rows(raw_csv)
    if not rows:
        raise FormatError(f"{raw_csv} has no data rows")
    missing = [c for c in need if c not in rows[0]]
    if missing:
        raise FormatError(f"{raw_csv} lacks columns {missing}")
    varying = [c for c in series_cols if len({r[c] for r in rows}) > 1] or series_cols[-1:]
    keys = varying + (["W"] if per_w and "W" not in varying else []) + [xcol]
    stats = aggregate(rows, keys, ycol)
    out_rows = []
    for s in stats:
        scale = float(s["W"]) if per_w else 1.0
        label = ",".join(f"{c}={_short(s[c])}" for c in varying)
        out_rows.append(dict(x=float(s[xcol]), y=s["mean"] / scale, yerr=s["stderr"] / scale, series=label))
    out_rows.sort(key=lambda r: (r["series"], r["x"]))
    if out is None:
        out = Path(raw_csv).with_suffix(f".{style}.plot.csv")
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write("x,y,yerr,series\n")
        for r in out_rows:
            _write_row(fh, ["x", "y", "yerr", "series"], r)
    return out_rows


def _short(v: str) -> str:
    f = _num(v)
    if isinstance(f, float) and f.is_integer():
        return str(int(f))
    return str(v)
