"""Config-driven runs: single discoveries, the benchmark table and noise studies.

Reports are written with sorted keys and fixed float formatting so that two
runs of the same configuration produce identical files.  Wall-clock numbers
go to a separate ``timing.json``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .grid import (
    DensityField,
    add_white_noise,
    differentiate,
    load_density,
    smooth_savgol,
    subsample_rows,
)
from .library import DEFAULT_RANK_TOL, BasisCatalog, TermKey
from .model import (
    PBEModel,
    coefficient_error,
    formulate_pbe,
    resolve_dependent_terms,
)
from .selector import (
    CombinationPlan,
    SelectWeights,
    all_combinations,
    combination_tag,
    select_optimal,
    sweep_solutions,
)
from .solver import CASES, REPORTED_CLEAN_ERROR, generate_case, get_case
from .validation import (
    ConfigError,
    check_case_ids,
    check_derivative,
    check_fraction,
    check_noise_level,
    check_residual_mode,
    check_savgol,
    check_seed,
    check_weights,
)

log = logging.getLogger(__name__)

EXIT_MODEL = 0
EXIT_NULL = 2
EXIT_UNREALIZABLE = 3
EXIT_INPUT = 4

NOISE_LEVELS = (0.0, 0.0025, 0.005, 0.0075, 0.01)
DATA_FRACTIONS = (0.2, 0.4, 0.6, 0.8, 1.0)
LARGE_ERROR_LIMIT = 30.0


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _num(v):
    """Float rounded to 12 significant digits for stable text output."""
    if v is None:
        return None
    return float(f"{float(v):.12g}")


# -- configuration -----------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one discovery run.

    Exactly one of ``case`` and ``input_path`` must be set.  ``smooth`` and
    ``derivative`` default to ``"auto"``: clean data are differentiated with
    second-order differences, noisy data are Savitzky-Golay smoothed along
    the size axis and differentiated with local polynomial fits.  ``weights``
    of ``None`` take the case's tabulated weights (or ``(1, 1, 1)``).
    """

    case: str | None = None
    input_path: str | None = None
    initial: str | None = None
    noise_level: float = 0.0
    noise_seed: int = 0
    noise_mode: str = "global"
    smooth: str | bool = "auto"
    window: int = 11
    polyorder: int = 3
    derivative: str = "auto"
    poly_degree: int = 3
    poly_halfwidth: int = 5
    fraction: float = 1.0
    subsample_seed: int = 0
    catalog_path: str | None = None
    combinations: tuple | None = None
    threshold_low: float = 1e-3
    threshold_high: float = 10.0
    threshold_count: int = 60
    weights: tuple | None = None
    residual_mode: str = "raw"
    rank_tol: float = DEFAULT_RANK_TOL
    max_iter: int = 20
    output_dir: str | None = None

    def __post_init__(self):
        if (self.case is None) == (self.input_path is None):
            raise ConfigError("set exactly one of case and input_path")
        if self.case is not None and self.case not in CASES:
            raise ConfigError(f"unknown case {self.case!r}; expected one of {sorted(CASES)}")
        check_noise_level(self.noise_level)
        check_seed(self.noise_seed, "noise_seed")
        check_seed(self.subsample_seed, "subsample_seed")
        if self.noise_mode not in ("global", "multiplicative"):
            raise ConfigError(f"noise_mode must be 'global' or 'multiplicative', got {self.noise_mode!r}")
        if self.smooth not in ("auto", True, False):
            raise ConfigError(f"smooth must be 'auto', true or false, got {self.smooth!r}")
        check_savgol(self.window, self.polyorder)
        if self.derivative != "auto":
            check_derivative(self.derivative)
        if 2 * self.poly_halfwidth + 1 <= self.poly_degree:
            raise ConfigError("polynomial derivative window must exceed its degree")
        check_fraction(self.fraction)
        if self.weights is not None:
            object.__setattr__(self, "weights", check_weights(self.weights))
        check_residual_mode(self.residual_mode)
        if not (0 < self.threshold_low <= self.threshold_high) or self.threshold_count < 1:
            raise ConfigError("threshold grid needs 0 < low <= high and count >= 1")
        if self.combinations is not None:
            object.__setattr__(self, "combinations", tuple(tuple(c) for c in self.combinations))
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1")

    @property
    def noisy(self) -> bool:
        return self.noise_level > 0

    @property
    def use_smoothing(self) -> bool:
        return self.noisy if self.smooth == "auto" else bool(self.smooth)

    @property
    def derivative_scheme(self) -> str:
        if self.derivative != "auto":
            return self.derivative
        return "polyfit" if self.noisy else "fd2"

    def resolved_weights(self) -> tuple:
        if self.weights is not None:
            return self.weights
        if self.case is not None:
            return tuple(float(w) for w in get_case(self.case).weights)
        return (1.0, 1.0, 1.0)

    def select_weights(self) -> SelectWeights:
        return SelectWeights.from_sequence(self.resolved_weights(), residual_mode=self.residual_mode)

    def plan(self) -> CombinationPlan:
        combos = self.combinations or all_combinations()
        return CombinationPlan.logspace(self.threshold_low, self.threshold_high, self.threshold_count, combos)

    def catalog(self) -> BasisCatalog | None:
        if self.catalog_path is None:
            return None
        return BasisCatalog.from_dict(json.loads(Path(self.catalog_path).read_text()))

    def to_dict(self) -> dict:
        out = asdict(self)
        if out["combinations"] is not None:
            out["combinations"] = [list(c) for c in out["combinations"]]
        if out["weights"] is not None:
            out["weights"] = list(out["weights"])
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        data = dict(data)
        for key in ("weights", "combinations"):
            if data.get(key) is not None:
                data[key] = tuple(tuple(v) if isinstance(v, list) else v for v in data[key])
        return cls(**data)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(data)

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(_dumps(self.to_dict()))
        return path

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


# -- stages ------------------------------------------------------------------


class StageError(RuntimeError):
    """Failure inside one pipeline stage; ``stage`` names it."""

    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage
        self.cause = exc


def load_input(config: RunConfig) -> tuple[DensityField, PBEModel | None]:
    """Clean field and, for catalog cases, the reference model."""
    if config.case is not None:
        fld, spec = generate_case(config.case, initial=config.initial)
        return fld, PBEModel.from_terms(spec.reference)
    return load_density(config.input_path), None


def preprocess(fld: DensityField, config: RunConfig):
    """Noise, smoothing, differentiation and row selection; returns ``(field, ndot, mask)``."""
    if config.noisy:
        fld = add_white_noise(fld, config.noise_level, config.noise_seed, config.noise_mode)
    if config.use_smoothing:
        fld = smooth_savgol(fld, config.window, config.polyorder)
    ndot = differentiate(fld, config.derivative_scheme, config.poly_degree, config.poly_halfwidth)
    mask = subsample_rows(fld.n_rows, config.fraction, config.subsample_seed) if config.fraction < 1 else None
    return fld, ndot, mask


@dataclass
class Discovery:
    """In-memory result of one run (see :class:`DiscoveryReport` for the file form)."""

    field: DensityField
    ndot: np.ndarray
    pool: object
    solution: object
    raw_model: PBEModel
    model: PBEModel
    comparison: object | None


def discover(fld, ndot, weights: SelectWeights, plan=None, catalog=None, mask=None, reference=None,
             rank_tol=DEFAULT_RANK_TOL, max_iter=20) -> Discovery:
    """Sweep, select, formulate and resolve on prepared data."""
    pool = sweep_solutions(fld, ndot, plan, catalog, mask, rank_tol=rank_tol, max_iter=max_iter)
    best = select_optimal(pool, None, weights)
    raw = formulate_pbe(best, pool.symbols[best.combination])
    model = resolve_dependent_terms(raw)
    comp = coefficient_error(model, reference) if reference is not None else None
    return Discovery(fld, ndot, pool, best, raw, model, comp)


def _realizable_in_pool(pool) -> bool:
    return any(s.penalty == 0 and s.n_terms > 0 for s in pool)


@dataclass
class DiscoveryReport:
    """Serializable outcome of :func:`run_discovery`."""

    config: RunConfig
    model: PBEModel
    raw_model: PBEModel
    cost: dict
    pool: dict
    groups: dict
    comparison: dict | None
    reference: str | None
    status: str
    exit_code: int
    runtime: dict = field(default_factory=dict)
    discovery: Discovery | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "kind": "discovery",
            "version": __version__,
            # the output location does not affect the result
            "config": {k: v for k, v in self.config.to_dict().items() if k != "output_dir"},
            "status": self.status,
            "exit_code": self.exit_code,
            "model": self.model.to_dict(),
            "unresolved_model": self.raw_model.text(),
            "cost": self.cost,
            "comparison": self.comparison,
            "reference": self.reference,
            "dependency_groups": self.groups,
            "pool": self.pool,
        }

    def to_json(self) -> str:
        return _dumps(self.to_dict())

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.to_json())
        (out / "model.txt").write_text(self.model.text() + "\n")
        (out / "timing.json").write_text(_dumps(self.runtime))
        return out / "report.json"


def _round_floats(obj):
    if isinstance(obj, float):
        return _num(obj)
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def run_discovery(config: RunConfig) -> DiscoveryReport:
    """End-to-end run; stage failures are raised as :class:`StageError`."""
    clock = {}
    start = time.perf_counter()

    def stage(name, fn, *args):
        t0 = time.perf_counter()
        try:
            return fn(*args)
        except (ConfigError, StageError):
            raise
        except Exception as exc:  # noqa: BLE001 - re-raised with the stage name
            raise StageError(name, exc) from exc
        finally:
            clock[name] = time.perf_counter() - t0

    fld, reference = stage("load", load_input, config)
    fld, ndot, mask = stage("preprocess", preprocess, fld, config)
    disc = stage(
        "identify",
        lambda: discover(fld, ndot, config.select_weights(), config.plan(), config.catalog(), mask, reference,
                         config.rank_tol, config.max_iter),
    )
    model, sol = disc.model, disc.solution
    if model.is_null:
        status, code = "null_model", EXIT_NULL
    elif not model.realizable and not _realizable_in_pool(disc.pool):
        status, code = "no_realizable_model", EXIT_UNREALIZABLE
    else:
        status, code = "model_found", EXIT_MODEL
    cost = {
        "combination": combination_tag(sol.combination),
        "threshold": sol.threshold,
        "residual": sol.residual,
        "relative_residual": sol.relative_residual if sol.target_norm2 > 0 else None,
        "n_terms": sol.n_terms,
        "penalty": sol.penalty,
        "total": sol.cost,
        "weights": list(config.resolved_weights()),
        "residual_mode": config.residual_mode,
    }
    groups = {
        combination_tag(c): [g.to_dict() for g in gs] for c, gs in disc.pool.groups.items()
    }
    clock["total"] = time.perf_counter() - start
    report = DiscoveryReport(
        config=config,
        model=model,
        raw_model=disc.raw_model,
        cost=_round_floats(cost),
        pool=_round_floats(disc.pool.to_dict()),
        groups=_round_floats(groups),
        comparison=_round_floats(disc.comparison.to_dict()) if disc.comparison is not None else None,
        reference=reference.text() if reference is not None else None,
        status=status,
        exit_code=code,
        runtime={k: round(v, 6) for k, v in clock.items()},
        discovery=disc,
    )
    return report


# -- benchmark -----------------------------------------------------------------


def _expected_ok(expected: str, comp, reported) -> bool:
    if expected == "match":
        limit = 2 * reported if reported is not None else None
        return comp.matched and (limit is None or comp.error <= limit)
    if expected == "match_large_error":
        return comp.matched and comp.error <= LARGE_ERROR_LIMIT
    if expected == "miss_agg_death_y":
        return (not comp.matched) and comp.missing == (("agg_death", 0, 1),) and not comp.extra
    raise ValueError(f"unknown expected outcome {expected!r}")


@dataclass
class BenchmarkRow:
    case: str
    name: str
    identified: str
    reference: str
    matched: bool
    error: float | None
    reported_error: float | None
    expected: str
    as_expected: bool
    weights: tuple
    missing: tuple = ()
    extra: tuple = ()
    ablation: dict | None = None
    seconds: float = 0.0

    def to_dict(self, timing=False) -> dict:
        out = {
            "case": self.case,
            "name": self.name,
            "identified": self.identified,
            "reference": self.reference,
            "matched": self.matched,
            "error_percent": _num(self.error),
            "reported_error_percent": self.reported_error,
            "expected": self.expected,
            "as_expected": self.as_expected,
            "weights": list(self.weights),
            "missing": [TermKey(*k).name for k in self.missing],
            "extra": [TermKey(*k).name for k in self.extra],
            "ablation": self.ablation,
        }
        if timing:
            out["seconds"] = round(self.seconds, 3)
        return out


WEIGHT_SWEEP = (0.5, 1.0, 1.5)


def regularizer_ablation(pool, ndot, weights: tuple, reference: PBEModel, sweep=WEIGHT_SWEEP) -> dict:
    """Selection with and without the realizability penalty.

    The residual and term weights are each scaled by the factors in ``sweep``;
    the same pool is rescored for every pair.
    """
    w1, w2, w3 = weights

    def outcome(l1, l2, l3):
        sol = select_optimal(pool, ndot, SelectWeights(l1, l2, l3))
        model = resolve_dependent_terms(formulate_pbe(sol, pool.symbols[sol.combination]))
        return coefficient_error(model, reference).matched, model.text()

    grid = [(w1 * a, w2 * b) for a in sweep for b in sweep]
    without = [outcome(l1, l2, 0.0) for l1, l2 in grid]
    with_ = [outcome(l1, l2, w3 if w3 > 0 else 1.0) for l1, l2 in grid]
    at_table = outcome(w1, w2, 0.0)
    return {
        "without_at_table_weights": {"matched": at_table[0], "model": at_table[1]},
        "with_at_table_weights": {"matched": outcome(w1, w2, w3 if w3 > 0 else 1.0)[0]},
        "sweep_factors": list(sweep),
        "matched_without": sum(m for m, _ in without),
        "matched_with": sum(m for m, _ in with_),
        "grid_points": len(grid),
    }


def benchmark_case(case_id: str, repetitions: int = 1, ablation: bool = False) -> BenchmarkRow:
    spec = get_case(case_id)
    reference = PBEModel.from_terms(spec.reference)
    fld, _ = generate_case(case_id)
    weights = tuple(float(w) for w in spec.weights)
    sw = SelectWeights.from_sequence(weights)
    results = []
    t0 = time.perf_counter()
    for _ in range(max(1, repetitions)):
        ndot = differentiate(fld, "fd2")
        results.append(discover(fld, ndot, sw, reference=reference))
    seconds = (time.perf_counter() - t0) / max(1, repetitions)
    texts = {r.model.text(digits=6) for r in results}
    if len(texts) != 1:
        raise RuntimeError(f"case {case_id}: repeated clean runs disagree: {sorted(texts)}")
    disc = results[0]
    comp = disc.comparison
    log.info("case %s: %s (%.1f s)", case_id, disc.model.text(), seconds)
    abl = regularizer_ablation(disc.pool, disc.ndot, weights, reference) if ablation else None
    reported = REPORTED_CLEAN_ERROR.get(case_id)
    return BenchmarkRow(
        case=case_id,
        name=spec.name,
        identified=disc.model.text(),
        reference=reference.text(),
        matched=comp.matched,
        error=comp.error,
        reported_error=reported,
        expected=spec.expected,
        as_expected=_expected_ok(spec.expected, comp, reported),
        weights=weights,
        missing=comp.missing,
        extra=comp.extra,
        ablation=abl,
        seconds=seconds,
    )


@dataclass
class BenchmarkTable:
    rows: list

    def to_dict(self, timing=False) -> dict:
        return {"kind": "benchmark", "version": __version__, "rows": [r.to_dict(timing) for r in self.rows]}

    def csv_text(self) -> str:
        buf = io.StringIO()
        cols = ["case", "name", "identified", "reference", "matched", "error_percent",
                "reported_error_percent", "expected", "as_expected"]
        writer = csv.DictWriter(buf, cols, lineterminator="\n", extrasaction="ignore")
        writer.writeheader()
        for r in self.rows:
            writer.writerow(r.to_dict())
        return buf.getvalue()

    def markdown(self) -> str:
        lines = [
            "| case | system | identified | matched | error % | reported % | as expected |",
            "|---|---|---|---|---|---|---|",
        ]
        for r in self.rows:
            err = "-" if r.error is None else f"{r.error:.2f}"
            rep = "-" if r.reported_error is None else f"{r.reported_error:.2f}"
            lines.append(
                f"| {r.case} | {r.name} | {r.identified} | {'yes' if r.matched else 'no'} | {err} | {rep} | "
                f"{'yes' if r.as_expected else 'NO'} |"
            )
        deviations = [r for r in self.rows if not r.as_expected]
        if deviations:
            lines.append("")
            lines.append("Deviations from the expected outcome ledger:")
            for r in deviations:
                lines.append(f"- ({r.case}) expected `{r.expected}`, identified {r.identified}")
        return "\n".join(lines) + "\n"

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "benchmark.json").write_text(_dumps(self.to_dict()))
        (out / "benchmark.csv").write_text(self.csv_text())
        (out / "benchmark.md").write_text(self.markdown())
        (out / "timing.json").write_text(_dumps({r.case: round(r.seconds, 3) for r in self.rows}))
        return out / "benchmark.json"


def _bench_task(args):
    case_id, repetitions, ablation = args
    return benchmark_case(case_id, repetitions, ablation)


def run_benchmark(cases=None, repetitions: int = 1, ablation: bool = False, workers: int = 1) -> BenchmarkTable:
    """Clean-data benchmark over ``cases`` (default: all sixteen)."""
    cases = check_case_ids(cases if cases is not None else sorted(CASES), CASES)
    tasks = [(c, repetitions, ablation) for c in cases]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_bench_task, tasks))
    else:
        rows = [_bench_task(t) for t in tasks]
    rows.sort(key=lambda r: r.case)
    return BenchmarkTable(rows)


# -- noise study -----------------------------------------------------------------


def derive_seeds(master: int, cell: int, sample: int) -> tuple[int, int]:
    """Noise and subsampling seeds for one study sample."""
    state = np.random.SeedSequence([master, cell, sample]).generate_state(2, dtype=np.uint32)
    return int(state[0]), int(state[1])


_STUDY_STATE: dict = {}


def _study_init(case_id, fld, reference, weights, plan):
    _STUDY_STATE.update(case=case_id, field=fld, reference=reference, weights=weights, plan=plan)


def _study_sample(task):
    cell, sample, level, fraction, noise_seed, mask_seed = task
    st = _STUDY_STATE
    cfg = RunConfig(case=st["case"], noise_level=level, noise_seed=noise_seed, fraction=fraction, subsample_seed=mask_seed)
    fld, ndot, mask = preprocess(st["field"], cfg)
    disc = discover(fld, ndot, st["weights"], st["plan"], None, mask, st["reference"])
    comp = disc.comparison
    return cell, sample, comp.matched, comp.error, disc.model.text()


@dataclass
class StudyResult:
    """Success rates over a noise-level by data-fraction grid."""

    case: str
    levels: tuple
    fractions: tuple
    samples: int
    master_seed: int
    success: np.ndarray
    error_mean: np.ndarray
    error_std: np.ndarray
    seeds: list
    models: list = field(default_factory=list, repr=False)

    def rate(self, level, fraction) -> float:
        i = self.levels.index(level)
        j = self.fractions.index(fraction)
        return self.success[i, j] / self.samples

    @property
    def rates(self) -> np.ndarray:
        return self.success / self.samples

    def cell_rows(self) -> list:
        rows = []
        for i, lv in enumerate(self.levels):
            for j, fr in enumerate(self.fractions):
                mean, std = self.error_mean[i, j], self.error_std[i, j]
                rows.append({
                    "case": self.case,
                    "noise_level": lv,
                    "fraction": fr,
                    "samples": self.samples,
                    "successes": int(self.success[i, j]),
                    "success_rate": _num(self.success[i, j] / self.samples),
                    "error_mean_percent": None if np.isnan(mean) else _num(mean),
                    "error_std_percent": None if np.isnan(std) else _num(std),
                })
        return rows

    def to_dict(self) -> dict:
        return {
            "kind": "study",
            "version": __version__,
            "case": self.case,
            "levels": list(self.levels),
            "fractions": list(self.fractions),
            "samples": self.samples,
            "master_seed": self.master_seed,
            "cells": self.cell_rows(),
            "seeds": self.seeds,
        }

    def csv_text(self) -> str:
        rows = self.cell_rows()
        buf = io.StringIO()
        writer = csv.DictWriter(buf, list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: "" if v is None else v for k, v in r.items()})
        return buf.getvalue()

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "study.json").write_text(_dumps(self.to_dict()))
        (out / "study.csv").write_text(self.csv_text())
        return out / "study.json"


def run_noise_study(case_id: str, levels=NOISE_LEVELS, fractions=DATA_FRACTIONS, samples: int = 100,
                    master_seed: int = 0, workers: int = 1, weights=None) -> StudyResult:
    """Seeded success-rate study; each cell runs ``samples`` noisy subsampled fits."""
    check_case_ids([case_id], CASES)
    levels = tuple(check_noise_level(v) for v in levels)
    fractions = tuple(check_fraction(v) for v in fractions)
    if samples < 1:
        raise ConfigError("samples must be >= 1")
    check_seed(master_seed, "master_seed")
    spec = get_case(case_id)
    fld, _ = generate_case(case_id)
    reference = PBEModel.from_terms(spec.reference)
    sw = SelectWeights.from_sequence(check_weights(weights or spec.weights))
    plan = CombinationPlan()

    tasks, seeds = [], []
    for i, lv in enumerate(levels):
        for j, fr in enumerate(fractions):
            cell = i * len(fractions) + j
            cell_seeds = [derive_seeds(master_seed, cell, s) for s in range(samples)]
            seeds.append({"noise_level": lv, "fraction": fr, "seeds": [list(p) for p in cell_seeds]})
            tasks += [(cell, s, lv, fr, ns, ms) for s, (ns, ms) in enumerate(cell_seeds)]

    if workers > 1:
        with ProcessPoolExecutor(workers, initializer=_study_init, initargs=(case_id, fld, reference, sw, plan)) as ex:
            results = list(ex.map(_study_sample, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        _study_init(case_id, fld, reference, sw, plan)
        results = [_study_sample(t) for t in tasks]
    results.sort(key=lambda r: (r[0], r[1]))

    shape = (len(levels), len(fractions))
    success = np.zeros(shape, dtype=int)
    errs: dict = {}
    models = []
    for cell, sample, matched, error, text in results:
        i, j = divmod(cell, len(fractions))
        models.append((cell, sample, text))
        if matched:
            success[i, j] += 1
            errs.setdefault((i, j), []).append(error)
    mean = np.full(shape, np.nan)
    std = np.full(shape, np.nan)
    for (i, j), vals in errs.items():
        mean[i, j] = np.mean(vals)
        std[i, j] = np.std(vals)
    return StudyResult(case_id, levels, fractions, samples, master_seed, success, mean, std, seeds, models)


# -- plot data -------------------------------------------------------------------


def emit_plot_data(obj, out_dir, times=None) -> list[Path]:
    """Long-format CSV for a study, a benchmark table or a discovery report.

    ``obj`` may be one of the result objects or a path to a JSON file they
    wrote.  For discovery reports the density field is rebuilt from the
    embedded config and written at ``times`` (default: first, middle, last).
    """
    if isinstance(obj, (str, Path)):
        data = json.loads(Path(obj).read_text())
        kind = data.get("kind")
    else:
        data = obj.to_dict()
        kind = data["kind"]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if kind == "study":
        cols = ["case", "noise_level", "fraction", "samples", "successes", "success_rate",
                "error_mean_percent", "error_std_percent"]
        rows = [{c: r[c] for c in cols} for r in data["cells"]]
        return [_write_rows(out / "study_cells.csv", rows)]
    if kind == "benchmark":
        cols = ["case", "name", "identified", "reference", "matched", "error_percent",
                "reported_error_percent", "expected", "as_expected"]
        rows = [{c: r[c] for c in cols} for r in data["rows"]]
        return [_write_rows(out / "benchmark_table.csv", rows)]
    if kind == "discovery":
        config = RunConfig.from_dict(data["config"])
        fld, _ = load_input(config)
        fld, _, _ = preprocess(fld, config)
        tp = fld.t.points
        idx = sorted({0, len(tp) // 2, len(tp) - 1}) if times is None else [int(np.argmin(abs(tp - t))) for t in times]
        rows = [
            {"t": float(tp[m]), "x": float(x), "n": float(fld.values[i, m])}
            for m in idx for i, x in enumerate(fld.x.points)
        ]
        return [_write_rows(out / "density_snapshots.csv", rows)]
    raise ConfigError(f"cannot emit plot data for kind {kind!r}")


def _write_rows(path: Path, rows: list) -> Path:
    with path.open("w", newline="") as fh:
        if rows:
            writer = csv.DictWriter(fh, list(rows[0]), lineterminator="\n")
            writer.writeheader()
            for r in rows:
                writer.writerow({k: "" if v is None else (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return path


__all__ = [
    "BenchmarkRow",
    "BenchmarkTable",
    "Discovery",
    "DiscoveryReport",
    "EXIT_INPUT",
    "EXIT_MODEL",
    "EXIT_NULL",
    "EXIT_UNREALIZABLE",
    "RunConfig",
    "StageError",
    "StudyResult",
    "benchmark_case",
    "derive_seeds",
    "discover",
    "emit_plot_data",
    "load_input",
    "preprocess",
    "regularizer_ablation",
    "run_benchmark",
    "run_discovery",
    "run_noise_study",
]
