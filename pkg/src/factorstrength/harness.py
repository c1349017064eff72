"""Monte Carlo replication of the simulation tables.

Replication ``i`` of every cell is simulated with seed ``base_seed ^ i``,
so results do not depend on how replications are scheduled across workers.
Standard deviations use the unbiased ``n - 1`` denominator (0 when fewer
than two replications succeed).
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import numpy as np
from threadpoolctl import threadpool_limits

from .dgp import SETTINGS, NoiseSpec, matrix_setting, simulate_matrix, simulate_vector, vector_setting
from .errors import FactorStrengthError, ShapeMismatchError
from .estimators import ProjectionConfig
from .strength import estimate_matrix, estimate_vector

log = logging.getLogger(__name__)

DEFAULT_REPS = {"vector": 500, "matrix": 100}
DEFAULT_ESTIMATOR = {"vector": "pca", "matrix": "iterative_projection"}
FAILURE_BUDGET = 0.01
CSV_COLUMNS = ("model", "setting", "d1", "d2", "T", "factor", "mode", "mean", "sd", "fails")


@dataclass(frozen=True)
class Cell:
    d1: int
    T: int
    d2: Optional[int] = None

    @property
    def is_matrix(self) -> bool:
        return self.d2 is not None

    def label(self) -> str:
        dims = f"({self.d1},{self.d2})" if self.is_matrix else f"d={self.d1}"
        return f"{dims},T={self.T}"


def parse_cell(item) -> Cell:
    """Accept ``[d, T]``, ``[[d1, d2], T]`` or a mapping with ``d``/``d1``/``d2``/``T``."""
    if isinstance(item, Cell):
        return item
    if isinstance(item, dict):
        if "d" in item:
            return Cell(int(item["d"]), int(item["T"]))
        return Cell(int(item["d1"]), int(item["T"]), int(item["d2"]))
    dims, T = item
    if isinstance(dims, (list, tuple)):
        return Cell(int(dims[0]), int(T), int(dims[1]))
    return Cell(int(dims), int(T))


@dataclass(frozen=True)
class MCConfig:
    model: str
    setting: str
    grid: tuple
    reps: Optional[int] = None
    base_seed: int = 0
    estimator: Optional[str] = None
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    ar_coef: float = 0.8
    projection: ProjectionConfig = field(default_factory=ProjectionConfig)

    def __post_init__(self):
        if self.model not in DEFAULT_REPS:
            raise FactorStrengthError(f"model must be 'vector' or 'matrix', got {self.model!r}")
        if self.setting not in SETTINGS:
            raise FactorStrengthError(f"setting must be one of {sorted(SETTINGS)}, got {self.setting!r}")
        grid = tuple(parse_cell(c) for c in self.grid)
        if not grid:
            raise FactorStrengthError("grid must not be empty")
        if any(c.is_matrix != (self.model == "matrix") for c in grid):
            raise FactorStrengthError("grid cells do not match the model type")
        object.__setattr__(self, "grid", grid)
        if self.reps is None:
            object.__setattr__(self, "reps", DEFAULT_REPS[self.model])
        if self.reps < 1:
            raise FactorStrengthError("reps must be >= 1")
        if self.estimator is None:
            object.__setattr__(self, "estimator", DEFAULT_ESTIMATOR[self.model])

    @classmethod
    def from_dict(cls, raw: dict) -> "MCConfig":
        raw = dict(raw)
        if "noise" in raw:
            raw["noise"] = NoiseSpec(**raw["noise"])
        if "projection" in raw:
            raw["projection"] = ProjectionConfig(**raw["projection"])
        return cls(**raw)

    def to_dict(self) -> dict:
        grid = [[[c.d1, c.d2], c.T] if c.is_matrix else [c.d1, c.T] for c in self.grid]
        return {
            "model": self.model,
            "setting": self.setting,
            "grid": grid,
            "reps": self.reps,
            "base_seed": self.base_seed,
            "estimator": self.estimator,
            "noise": vars(self.noise).copy(),
            "ar_coef": self.ar_coef,
            "projection": vars(self.projection).copy(),
        }

    @property
    def modes(self) -> tuple:
        return ("vector",) if self.model == "vector" else ("matrix-mode-1", "matrix-mode-2")

    @property
    def target_alpha(self) -> np.ndarray:
        """True strengths, concatenated over modes (mode 1 then mode 2)."""
        alpha = [1.0 - 2.0 * z for z in SETTINGS[self.setting]]
        return np.array(alpha * len(self.modes))


def replication_seed(base_seed: int, rep: int) -> int:
    return int(base_seed) ^ int(rep)


def cell_spec(config: MCConfig, cell: Cell, seed: int):
    kwargs = dict(seed=seed, ar_coef=config.ar_coef, noise=config.noise)
    if config.model == "vector":
        return vector_setting(config.setting, cell.d1, cell.T, **kwargs)
    return matrix_setting(config.setting, cell.d1, cell.d2, cell.T, **kwargs)


def run_replication(config: MCConfig, cell: Cell, seed: int) -> np.ndarray:
    """Simulate one panel and return its strength estimates (modes concatenated)."""
    spec = cell_spec(config, cell, seed)
    if config.model == "vector":
        panel, _ = simulate_vector(spec)
        fit = estimate_vector(panel, spec.r, estimator=config.estimator)
        return fit.report.alpha_hat.copy()
    panel, _ = simulate_matrix(spec)
    fit = estimate_matrix(panel, spec.r1, spec.r2, estimator=config.estimator, cfg=config.projection)
    return np.concatenate([rep.alpha_hat for rep in fit.reports])


@dataclass(frozen=True, eq=False)
class CellResult:
    cell: Cell
    alphas: np.ndarray          # (successful reps) x (factors over modes)
    seeds: tuple                # seeds of the successful reps
    failures: tuple             # (seed, message) of the failed reps

    @property
    def fails(self) -> int:
        return len(self.failures)

    @property
    def valid(self) -> bool:
        n = len(self.seeds) + self.fails
        return self.fails <= FAILURE_BUDGET * n


def resolve_workers(workers: Optional[int] = None) -> int:
    if workers is None:
        env = os.environ.get("FSL_THREADS", "").strip()
        workers = int(env) if env else 1
    return max(1, int(workers))


def _one(config, cell, seed):
    try:
        return seed, run_replication(config, cell, seed), None
    except (FactorStrengthError, np.linalg.LinAlgError) as exc:
        log.warning("replication seed=%d in cell %s failed: %s", seed, cell.label(), exc)
        return seed, None, str(exc)


def _run_cells(config, cells, workers):
    jobs = [(cell, replication_seed(config.base_seed, i)) for cell in cells for i in range(config.reps)]
    # single-threaded BLAS everywhere keeps every replication bit-reproducible
    with threadpool_limits(limits=1):
        if workers == 1:
            outcomes = [_one(config, cell, seed) for cell, seed in jobs]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                outcomes = list(pool.map(lambda job: _one(config, *job), jobs))
    results = []
    k = len(config.target_alpha)
    for n, cell in enumerate(cells):
        chunk = outcomes[n * config.reps:(n + 1) * config.reps]
        ok = [(s, a) for s, a, err in chunk if err is None]
        alphas = np.array([a for _, a in ok]) if ok else np.empty((0, k))
        results.append(
            CellResult(
                cell=cell,
                alphas=alphas,
                seeds=tuple(s for s, _ in ok),
                failures=tuple((s, err) for s, _, err in chunk if err is not None),
            )
        )
    return results


def run_cell(config: MCConfig, cell, workers: Optional[int] = None) -> CellResult:
    """All replications of one grid cell."""
    return _run_cells(config, [parse_cell(cell)], resolve_workers(workers))[0]


@dataclass(frozen=True)
class MCRow:
    model: str
    setting: str
    d1: int
    d2: Optional[int]
    T: int
    factor: int
    mode: str
    mean: float
    sd: float
    fails: int = 0

    @property
    def key(self) -> tuple:
        return (self.model, self.setting, self.d1, self.d2, self.T, self.mode, self.factor)


@dataclass(frozen=True)
class MCTable:
    rows: tuple

    def lookup(self) -> dict:
        return {row.key: row for row in self.rows}

    def select(self, **where) -> "MCTable":
        return MCTable(tuple(r for r in self.rows if all(getattr(r, k) == v for k, v in where.items())))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.rows:
            writer.writerow([r.model, r.setting, r.d1, "" if r.d2 is None else r.d2, r.T, r.factor, r.mode,
                             format(r.mean, ".17g"), format(r.sd, ".17g"), r.fails])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "MCTable":
        reader = csv.DictReader(io.StringIO(text))
        missing = set(CSV_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ShapeMismatchError(f"MC table is missing columns {sorted(missing)}")
        rows = []
        for rec in reader:
            rows.append(MCRow(
                model=rec["model"], setting=rec["setting"], d1=int(rec["d1"]),
                d2=int(rec["d2"]) if rec["d2"] else None, T=int(rec["T"]), factor=int(rec["factor"]),
                mode=rec["mode"], mean=float(rec["mean"]), sd=float(rec["sd"]), fails=int(rec["fails"] or 0),
            ))
        return cls(tuple(rows))

    def to_records(self) -> list:
        return [vars(r).copy() for r in self.rows]

    @classmethod
    def from_records(cls, records) -> "MCTable":
        return cls(tuple(MCRow(**rec) for rec in records))


def summarize(config: MCConfig, result: CellResult) -> list:
    rows = []
    r = len(SETTINGS[config.setting])
    for m, mode in enumerate(config.modes):
        for j in range(r):
            col = result.alphas[:, m * r + j]
            n = col.shape[0]
            mean = float(col.mean()) if n else math.nan
            sd = float(col.std(ddof=1)) if n > 1 else 0.0
            rows.append(MCRow(config.model, config.setting, result.cell.d1, result.cell.d2, result.cell.T,
                              j + 1, mode, mean, sd, result.fails))
    return rows


def run_grid(config: MCConfig, workers: Optional[int] = None, return_cells: bool = False):
    """Aggregate every grid cell into an :class:`MCTable`."""
    results = _run_cells(config, list(config.grid), resolve_workers(workers))
    for res in results:
        if not res.valid:
            log.warning("cell %s exceeded the failure budget (%d failures)", res.cell.label(), res.fails)
    table = MCTable(tuple(row for res in results for row in summarize(config, res)))
    if return_cells:
        return table, results
    return table


def mean_abs_error(config: MCConfig, result: CellResult) -> np.ndarray:
    """Replication mean of ``|alpha_hat - alpha|`` per factor (modes concatenated)."""
    return np.abs(result.alphas - config.target_alpha).mean(axis=0)


@dataclass(frozen=True)
class CellVerdict:
    key: tuple
    mean: float
    ref_mean: float
    sd: float
    ref_sd: float
    mean_ok: bool
    sd_ok: bool

    @property
    def passed(self) -> bool:
        return self.mean_ok and self.sd_ok


@dataclass(frozen=True)
class ComparisonReport:
    verdicts: tuple
    mean_tol: float
    sd_factor: float

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    @property
    def failures(self) -> tuple:
        return tuple(v for v in self.verdicts if not v.passed)

    def lines(self) -> list:
        out = []
        for v in self.verdicts:
            model, setting, d1, d2, T, mode, factor = v.key
            dims = f"d={d1}" if d2 is None else f"(d1,d2)=({d1},{d2})"
            out.append(
                f"{'PASS' if v.passed else 'FAIL'} {model} {setting} {dims} T={T} {mode} factor {factor}: "
                f"mean {v.mean:.3f} vs {v.ref_mean:.2f}, sd {v.sd:.3f} vs {v.ref_sd:.2f}"
            )
        return out


def compare_reference(table: MCTable, reference: MCTable, mean_tol: float = 0.03,
                      sd_factor: float = 2.0) -> ComparisonReport:
    """Check each row of ``table`` against the row with the same coordinates in ``reference``.

    A row passes when ``|mean - ref_mean| <= mean_tol`` and
    ``ref_sd / sd_factor <= sd <= ref_sd * sd_factor``.
    """
    ref = reference.lookup()
    missing = [row.key for row in table.rows if row.key not in ref]
    if missing:
        raise ShapeMismatchError(f"{len(missing)} rows have no reference counterpart, e.g. {missing[0]}")
    verdicts = []
    for row in table.rows:
        r = ref[row.key]
        mean_ok = abs(row.mean - r.mean) <= mean_tol
        sd_ok = r.sd / sd_factor <= row.sd <= r.sd * sd_factor
        verdicts.append(CellVerdict(row.key, row.mean, r.mean, row.sd, r.sd, mean_ok, sd_ok))
    return ComparisonReport(tuple(verdicts), mean_tol, sd_factor)


def reference_tables() -> MCTable:
    """Published means and standard deviations for the four simulation tables."""
    text = resources.files("factorstrength").joinpath("data/reference_tables.csv").read_text()
    return MCTable.from_csv(text)
