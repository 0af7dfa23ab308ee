"""Experiment runner: permutations, alpha sweeps for SCPS and K sweeps for CCPS.

For each random permutation of the data the last ``l`` observations are held
out for testing, features are standardised on the training part, the
regressor is (optionally) tuned by 3-fold cross-validation, and every split
fraction and fold count is evaluated by the crisp CRPS of each test
observation.  In calibration mode PIT values are collected instead.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import ccps, scps
from .ccps import conservative_p, fit_ccps, make_folds
from .conformity import ConformityMeasureSpec
from .core import Dataset, DataError, ScoreNotAttainable, TauSource
from .metrics import calibration_curve, crps_crisp_rows
from .regressors import RegressorSpec, fit as fit_regressor
from .scps import fit_scps
from .svaps import example1_sample

log = logging.getLogger(__name__)

DEFAULT_ALPHAS = (0.01, 0.05) + tuple(round(0.1 + 0.05 * i, 2) for i in range(17)) + (0.99,)
DEFAULT_KS = tuple(range(2, 21))
RIDGE_GRID = (0.0, 0.01, 0.1, 1.0, 10.0)
KNN_GRID = (1, 3, 5, 10, 20)
SYNTH_NAMES = ("homoscedastic_linear", "heteroscedastic_linear", "example1")


def load_csv(path) -> Dataset:
    """Read a numeric CSV whose last column is the label.

    A first line containing any non-numeric cell is treated as a header.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    rows = [(i + 1, row) for i, row in enumerate(csv.reader(io.StringIO(text)))
            if row and any(cell.strip() for cell in row)]
    if not rows:
        raise DataError(f"{path}: empty file")

    def parse(lineno, row):
        try:
            return [float(cell) for cell in row]
        except ValueError:
            return None

    if parse(*rows[0]) is None:
        rows = rows[1:]
        if not rows:
            raise DataError(f"{path}: header but no data")
    width = len(rows[0][1])
    if width < 2:
        raise DataError(f"{path}: need at least one feature column and a label")
    values = []
    for lineno, row in rows:
        if len(row) != width:
            raise DataError(f"{path}: line {lineno} has {len(row)} fields, expected {width}")
        parsed = parse(lineno, row)
        if parsed is None:
            raise DataError(f"{path}: line {lineno} has a non-numeric cell")
        values.append(parsed)
    data = np.array(values)
    if not np.all(np.isfinite(data)):
        raise DataError(f"{path}: non-finite values")
    return Dataset(data[:, :-1], data[:, -1])


@dataclass(frozen=True)
class Scaler:
    mean: np.ndarray
    std: np.ndarray

    def transform(self, data: Dataset) -> Dataset:
        safe = np.where(self.std > 0, self.std, 1.0)
        X = np.where(self.std > 0, (data.X - self.mean) / safe, 0.0)
        return Dataset(X, data.y)


def standardize(train: Dataset, *others: Dataset) -> tuple[list[Dataset], Scaler]:
    """Scale features with training statistics only; constant features become 0."""
    if len(train) == 0:
        raise DataError("cannot standardise an empty training set")
    scaler = Scaler(train.X.mean(axis=0), train.X.std(axis=0))
    return [scaler.transform(d) for d in (train, *others)], scaler


def synth(name: str, n: int, seed: int = 0, noise: float = 1.0, dim: int = 3) -> Dataset:
    """Synthetic datasets for desk-scale checks.

    ``homoscedastic_linear``: ``y = 1 + x . w + noise * N(0, 1)``;
    ``heteroscedastic_linear``: noise scaled by ``0.5 + |x_0|``;
    ``example1``: the three-atom example used for Venn-Abers systems.
    """
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    if name == "example1":
        return example1_sample(n, rng)
    if name not in SYNTH_NAMES:
        raise ValueError(f"unknown synthetic dataset {name!r}")
    w = np.linspace(1.0, -1.0, dim) if dim > 1 else np.array([1.0])
    X = rng.standard_normal((n, dim))
    eps = rng.standard_normal(n)
    if name == "heteroscedastic_linear":
        eps = eps * (0.5 + np.abs(X[:, 0]))
    return Dataset(X, 1.0 + X @ w + noise * eps)


def _cv_mse(spec: RegressorSpec, train: Dataset, folds: int) -> float:
    err = 0.0
    n = len(train)
    for fold in make_folds(n, folds):
        rest = np.setdiff1d(np.arange(n), fold, assume_unique=True)
        model = fit_regressor(spec, train[rest])
        err += float(np.sum((model.predict_many(train.X[fold]) - train.y[fold]) ** 2))
    return err / n


def tune(spec: RegressorSpec, train: Dataset, folds: int = 3) -> RegressorSpec:
    """Grid search by contiguous k-fold cross-validated mean squared error.

    Ties go to the first grid value.  Least squares has nothing to tune.
    """
    if len(train) < folds:
        raise DataError("training set smaller than the number of folds")
    if spec.kind == "ridge":
        candidates = [replace(spec, ridge_lambda=lam) for lam in RIDGE_GRID]
    elif spec.kind == "knn":
        max_k = len(train) - -(-len(train) // folds)
        candidates = [replace(spec, knn_k=k) for k in KNN_GRID if k <= max_k]
    else:
        return spec
    if not candidates:
        return spec
    scores = [_cv_mse(c, train, folds) for c in candidates]
    return candidates[int(np.argmin(scores))]


@dataclass
class ExperimentConfig:
    data_path: str | None = None
    synth: str | None = None
    synth_n: int = 506
    test_length: int = 100
    permutations: int = 10
    alphas: tuple[float, ...] = DEFAULT_ALPHAS
    ks: tuple[int, ...] = DEFAULT_KS
    regressor: RegressorSpec = field(default_factory=RegressorSpec)
    measure: str = "simple"
    mode: str = "crps"
    seed: int = 0
    tune: bool = True
    emit_raw: bool = False
    conservative: bool = False
    pit: str = "fuzzy"
    bandwidth_x: float = 1.0
    bandwidth_y: float = 1.0
    calibration_alpha: float = 0.5
    calibration_k: int = 5
    calibration_levels: tuple[float, ...] = tuple(round(0.01 * i, 2) for i in range(1, 100))

    def validate(self):
        if (self.data_path is None) == (self.synth is None):
            raise ValueError("give exactly one of a data file or a synthetic generator")
        if self.permutations < 1:
            raise ValueError("permutations must be at least 1")
        if self.test_length < 1:
            raise ValueError("test length must be positive")
        if self.mode not in ("crps", "calibration"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.pit not in ("fuzzy", "crisp"):
            raise ValueError(f"unknown PIT kind {self.pit!r}")
        if any(not 0 < a < 1 for a in self.alphas):
            raise ValueError("alphas must lie in (0, 1)")
        if any(k < 2 for k in self.ks):
            raise ValueError("K must be at least 2")
        ConformityMeasureSpec(self.measure, self.regressor, self.bandwidth_x, self.bandwidth_y)


def box_stats(values) -> dict[str, float]:
    v = np.asarray(values, dtype=float)
    q = np.percentile(v, [0, 25, 50, 75, 100])
    return dict(zip(("min", "q1", "median", "q3", "max"), map(float, q)))


@dataclass
class ExperimentReport:
    scps_losses: dict[float, list[float]] = field(default_factory=dict)
    ccps_losses: dict[int, list[float]] = field(default_factory=dict)
    scps_pit: list[float] = field(default_factory=list)
    ccps_pit: list[float] = field(default_factory=list)
    tuned: list[dict] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)
    skipped: list[str] = field(default_factory=list)

    def scps_stats(self):
        return {a: box_stats(v) for a, v in self.scps_losses.items() if v}

    def ccps_stats(self):
        return {k: box_stats(v) for k, v in self.ccps_losses.items() if v}

    def best_medians(self) -> dict[str, float | None]:
        s, c = self.scps_stats(), self.ccps_stats()
        return {
            "scps": min((v["median"] for v in s.values()), default=None),
            "ccps": min((v["median"] for v in c.values()), default=None),
        }


def _load(config: ExperimentConfig) -> Dataset:
    if config.data_path is not None:
        return load_csv(config.data_path)
    return synth(config.synth, config.synth_n, seed=config.seed)


def run_experiment(config: ExperimentConfig, data: Dataset | None = None) -> ExperimentReport:
    """Run the permutation protocol and collect CRPS losses or PIT values."""
    config.validate()
    data = _load(config) if data is None else data
    n_total = len(data)
    l = config.test_length
    if l >= n_total:
        raise DataError(f"test length {l} must be smaller than dataset size {n_total}")
    n = n_total - l
    report = ExperimentReport()
    rng = np.random.default_rng(config.seed)
    taus = TauSource(config.seed)
    calibration = config.mode == "calibration"
    alphas = (config.calibration_alpha,) if calibration else config.alphas
    ks = (config.calibration_k,) if calibration else config.ks
    t_start = time.perf_counter()
    t_scps = t_ccps = 0.0

    for perm in range(config.permutations):
        order = rng.permutation(n_total)
        train, test = data[order[:n]], data[order[n:]]
        (train, test), _ = standardize(train, test)
        spec = tune(config.regressor, train) if config.tune else config.regressor
        report.tuned.append(asdict(spec))
        measure = ConformityMeasureSpec(config.measure, spec, config.bandwidth_x, config.bandwidth_y)

        t0 = time.perf_counter()
        for alpha in alphas:
            m = math.floor(alpha * n)
            if not 1 <= m <= n - 1 or (spec.kind == "knn" and spec.knn_k > m):
                msg = f"alpha={alpha}: m={m} infeasible for n={n}"
                if msg not in report.skipped:
                    log.warning("skipping %s", msg)
                    report.skipped.append(msg)
                continue
            model = fit_scps(train, m, measure)
            if calibration:
                report.scps_pit.extend(_pit(model, test, taus, config))
            else:
                jumps = _jumps(scps.predict_jumps, model, test)
                report.scps_losses.setdefault(alpha, []).extend(
                    crps_crisp_rows(jumps, test.y).tolist())
        t1 = time.perf_counter()
        for K in ks:
            smallest_complement = n - -(-n // K)
            if K > n or (spec.kind == "knn" and spec.knn_k > smallest_complement):
                msg = f"K={K} infeasible for n={n}"
                if msg not in report.skipped:
                    log.warning("skipping %s", msg)
                    report.skipped.append(msg)
                continue
            model = fit_ccps(train, K, measure)
            if calibration:
                pit = _pit(model, test, taus, config)
                if config.conservative:
                    pit = conservative_p(pit)
                report.ccps_pit.extend(np.atleast_1d(pit).tolist())
            else:
                jumps = _jumps(ccps.predict_jumps, model, test)
                report.ccps_losses.setdefault(K, []).extend(
                    crps_crisp_rows(jumps, test.y).tolist())
        t2 = time.perf_counter()
        t_scps += t1 - t0
        t_ccps += t2 - t1

    report.timings = {"scps": t_scps, "ccps": t_ccps, "total": time.perf_counter() - t_start}
    return report


def _jumps(predict, model, test: Dataset) -> np.ndarray:
    try:
        return predict(model, test.X)
    except ScoreNotAttainable as exc:
        raise DataError(
            f"{exc}: a predictive distribution is improper at some test object "
            "(try a larger --bandwidth-y or --mode calibration)") from exc


def _pit(model, test: Dataset, taus: TauSource, config: ExperimentConfig):
    if config.pit == "crisp":
        return model.q_crisp(test.X, test.y).tolist()
    return model.q(test.X, test.y, taus.draw(len(test))).tolist()


def _fmt(value) -> str:
    return format(float(value), ".10g")


def _write_csv(path: Path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_report(report: ExperimentReport, config: ExperimentConfig, out_dir) -> list[Path]:
    """Write CSV summaries and ``report.json``; returns the files written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    stat_keys = ("min", "q1", "median", "q3", "max")
    if config.mode == "crps":
        for name, key, stats in (("scps_boxstats.csv", "alpha", report.scps_stats()),
                                 ("ccps_boxstats.csv", "K", report.ccps_stats())):
            rows = [[_fmt(p) if key == "alpha" else str(p)] + [_fmt(s[k]) for k in stat_keys]
                    for p, s in stats.items()]
            _write_csv(out / name, (key,) + stat_keys, rows)
            written.append(out / name)
        if config.emit_raw:
            for name, key, losses in (("scps_raw.csv", "alpha", report.scps_losses),
                                      ("ccps_raw.csv", "K", report.ccps_losses)):
                l = config.test_length
                rows = [[_fmt(p) if key == "alpha" else str(p), j // l, j % l, _fmt(v)]
                        for p, vals in losses.items() for j, v in enumerate(vals)]
                _write_csv(out / name, (key, "permutation", "test_index", "crps"), rows)
                written.append(out / name)
    else:
        for name, pit in (("calibration_scps.csv", report.scps_pit),
                          ("calibration_ccps.csv", report.ccps_pit)):
            if not pit:
                continue
            curve = calibration_curve(pit, config.calibration_levels)
            rows = [[_fmt(a), _fmt(f)] for a, f in zip(curve.alphas, curve.empirical_cdf)]
            _write_csv(out / name, ("alpha", "F_alpha"), rows)
            written.append(out / name)
    summary = {
        "config": _config_echo(config),
        "seed": config.seed,
        "tuned": report.tuned,
        "best_median_crps": report.best_medians(),
        "skipped": report.skipped,
        "timings_seconds": report.timings,
    }
    (out / "report.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                                     encoding="utf-8")
    written.append(out / "report.json")
    return written


def _config_echo(config: ExperimentConfig) -> dict:
    echo = asdict(config)
    echo["alphas"] = list(config.alphas)
    echo["ks"] = list(config.ks)
    echo.pop("calibration_levels")
    return echo
