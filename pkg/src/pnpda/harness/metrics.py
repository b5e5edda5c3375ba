"""RMSE metrics and result tables.

Per-cycle records hold the per-component RMS error over the steps of one
cycle.  Since cycles have equal length, a run's whole-trajectory RMSE is
the root mean square of its cycle records.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from ..dynamics import Trajectory
from ..errors import MisalignedTimes

RECORD_COLUMNS = ("method", "axis_value", "run", "cycle", "component", "error")
AGGREGATE_COLUMNS = ("method", "axis_value", "component", "mean", "std", "n_success", "n_failed")


def rmse(estimate, truth, per_component=True):
    """RMSE over time of ``estimate`` against ``truth``.

    Both are (T, d) arrays or :class:`Trajectory` objects; trajectories must
    share their time grid.  ``per_component`` gives a length-d vector,
    otherwise the root of the mean over all components and times.
    """
    if isinstance(estimate, Trajectory) or isinstance(truth, Trajectory):
        if not (isinstance(estimate, Trajectory) and isinstance(truth, Trajectory)):
            raise MisalignedTimes("compare two trajectories or two arrays")
        if estimate.times.shape != truth.times.shape or np.any(estimate.times != truth.times):
            raise MisalignedTimes("trajectories have different time grids")
        estimate, truth = estimate.states, truth.states
    estimate = np.atleast_2d(np.asarray(estimate, dtype=float))
    truth = np.atleast_2d(np.asarray(truth, dtype=float))
    if estimate.shape != truth.shape:
        raise MisalignedTimes(f"shapes differ: {estimate.shape} vs {truth.shape}")
    sq = (estimate - truth) ** 2
    if per_component:
        return np.sqrt(sq.mean(axis=0))
    return float(np.sqrt(sq.mean()))


def _fmt(v):
    return "" if v == "" else repr(v) if isinstance(v, float) else str(v)


@dataclass
class RunResult:
    method: str
    axis_value: object
    run: int
    errors: np.ndarray = None  # (n_cycles, d) cycle RMS per component
    failure: str = None

    @property
    def ok(self):
        return self.failure is None

    def component_rmse(self):
        return np.sqrt(np.mean(self.errors**2, axis=0))

    def total_rmse(self):
        return float(np.sqrt(np.mean(self.errors**2)))


@dataclass
class ResultTable:
    results: list = field(default_factory=list)

    def __len__(self):
        return len(self.results)

    def extend(self, other):
        self.results.extend(other.results)
        return self

    def cells(self):
        """Ordered distinct ``(method, axis_value)`` pairs."""
        seen = []
        for r in self.results:
            key = (r.method, r.axis_value)
            if key not in seen:
                seen.append(key)
        return seen

    def select(self, method, axis_value=None):
        return [
            r for r in self.results
            if r.method == method and (axis_value is None or _same(r.axis_value, axis_value))
        ]

    def run_values(self, method, axis_value=None, component="all"):
        """Per-run RMSE of successful runs, in run order."""
        vals = []
        for r in self.select(method, axis_value):
            if r.ok:
                vals.append(r.total_rmse() if component == "all" else r.component_rmse()[component])
        return np.array(vals)

    def mean_rmse(self, method, axis_value=None, component="all"):
        v = self.run_values(method, axis_value, component)
        return float(v.mean()) if v.size else float("nan")

    def records(self):
        for r in self.results:
            if not r.ok:
                continue
            n_cycles, d = r.errors.shape
            for c in range(n_cycles):
                for j in range(d):
                    yield (r.method, r.axis_value, r.run, c, j, float(r.errors[c, j]))

    def aggregate(self):
        rows = []
        for method, value in self.cells():
            group = self.select(method, value)
            good = [r for r in group if r.ok]
            n_failed = len(group) - len(good)
            d = good[0].errors.shape[1] if good else 0
            for comp in ["all"] + list(range(d)):
                v = self.run_values(method, value, comp)
                mean = float(v.mean()) if v.size else float("nan")
                std = float(v.std()) if v.size else float("nan")
                rows.append((method, value, comp, mean, std, len(good), n_failed))
        return rows

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RECORD_COLUMNS)
            for row in self.records():
                w.writerow([_fmt(v) for v in row])

    def write_aggregate_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(AGGREGATE_COLUMNS)
            for row in self.aggregate():
                w.writerow([_fmt(v) for v in row])

    @classmethod
    def read_csv(cls, path):
        """Rebuild successful runs from a records CSV (failures are not stored there)."""
        groups = {}
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                key = (row["method"], _parse_value(row["axis_value"]), int(row["run"]))
                groups.setdefault(key, []).append(
                    (int(row["cycle"]), int(row["component"]), float(row["error"]))
                )
        results = []
        for (method, value, run), entries in groups.items():
            n_c = 1 + max(e[0] for e in entries)
            d = 1 + max(e[1] for e in entries)
            err = np.empty((n_c, d))
            for c, j, e in entries:
                err[c, j] = e
            results.append(RunResult(method, value, run, err))
        return cls(results)

    def summary(self):
        """Human-readable mean +- std lines per cell."""
        lines = []
        for method, value, comp, mean, std, n_ok, n_bad in self.aggregate():
            if comp == "all":
                tag = f"{method}" + (f" @ {value}" if value != "" else "")
                lines.append(f"{tag:28s} rmse {mean:8.4f} +- {std:7.4f}  ok {n_ok}  failed {n_bad}")
        return "\n".join(lines)


def _same(a, b):
    if isinstance(a, str) or isinstance(b, str):
        return str(a) == str(b)
    return float(a) == float(b)


def _parse_value(s):
    if s == "":
        return ""
    try:
        return int(s)
    except ValueError:
        try:
            return float(s)
        except ValueError:
            return s
