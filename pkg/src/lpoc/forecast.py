"""Correlated projection ensembles, regional aggregation, and CRPS scoring.

Projections roll the fitted AR(1) recursion forward with errors drawn from
a zero-mean normal whose covariance combines the per-series scales with an
estimated correlation matrix. Regional trajectories are weighted means of
country rates (weights are typically populations); the continuous ranked
probability score compares an ensemble's empirical CDF with an observed
value, lower being better.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .empirical import AR1Params
from .errors import (
    AllZeroWeights,
    DimensionMismatch,
    EmptyEnsemble,
    ShapeMismatch,
    UnknownLabel,
)
from .matrices import CorrelationMatrix, spd_factorize, _freeze


@dataclass(frozen=True, eq=False)
class ProjectionEnsemble:
    """N simulated trajectories x H horizon periods x C series."""

    values: np.ndarray
    labels: tuple[str, ...]
    provenance: dict

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 3:
            raise DimensionMismatch("ensemble values must be N x H x C")
        if v.shape[0] < 2:
            raise DimensionMismatch("an ensemble needs at least 2 trajectories")
        if not np.isfinite(v).all():
            raise DimensionMismatch("ensemble contains non-finite values")
        if len(self.labels) != v.shape[2]:
            raise DimensionMismatch("label count does not match series count")
        object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))
        object.__setattr__(self, "values", _freeze(v))

    @property
    def n_trajectories(self) -> int:
        return self.values.shape[0]

    @property
    def horizon(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class RegionWeights:
    """Region name -> {series label -> weight per horizon period}.

    Weights may be scalars (static across periods) or length-H arrays.
    """

    regions: dict[str, dict[str, np.ndarray | float]]

    def __post_init__(self):
        clean: dict[str, dict[str, np.ndarray | float]] = {}
        for region, per_label in self.regions.items():
            if not per_label:
                raise AllZeroWeights(region, 0)
            clean[region] = {str(k): v for k, v in per_label.items()}
        object.__setattr__(self, "regions", clean)

    def matrix(self, region: str, labels: tuple[str, ...], horizon: int) -> np.ndarray:
        """H x C weight matrix for one region; unlisted labels weigh zero."""
        index = {lab: i for i, lab in enumerate(labels)}
        w = np.zeros((horizon, len(labels)))
        for lab, val in self.regions[region].items():
            if lab not in index:
                raise UnknownLabel(lab)
            arr = np.asarray(val, dtype=float)
            if arr.ndim == 0:
                w[:, index[lab]] = float(arr)
            else:
                if arr.shape != (horizon,):
                    raise DimensionMismatch(
                        f"region {region!r}, label {lab!r}: expected {horizon} period weights"
                    )
                w[:, index[lab]] = arr
        if (w < 0).any():
            raise DimensionMismatch(f"region {region!r} has negative weights")
        return w


def project(
    params: AR1Params,
    correlation: CorrelationMatrix,
    g_last,
    horizon: int,
    n_trajectories: int,
    seed: int = 0,
    labels: tuple[str, ...] | None = None,
) -> ProjectionEnsemble:
    """Simulate forward trajectories from the last observed rates.

    Each trajectory applies the AR(1) recursion for ``horizon`` periods with
    errors drawn from the zero-mean normal with covariance
    diag(sigma) R diag(sigma). Deterministic given the seed.
    """
    g_last = np.asarray(g_last, dtype=float)
    c = params.n_series
    if correlation.dim != c or g_last.shape != (c,):
        raise DimensionMismatch("params, correlation, and g_last dimensions must agree")
    if horizon < 1 or n_trajectories < 2:
        raise DimensionMismatch("need horizon >= 1 and at least 2 trajectories")
    if labels is None:
        labels = correlation.labels or tuple(f"v{i + 1}" for i in range(c))

    chol = spd_factorize(correlation).factor
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n_trajectories, horizon, c))
    shocks = params.sigma * (z @ chol.T)

    out = np.empty((n_trajectories, horizon, c))
    prev = np.broadcast_to(g_last, (n_trajectories, c))
    for h in range(horizon):
        prev = params.mu + params.phi * (prev - params.mu) + shocks[:, h, :]
        out[:, h, :] = prev
    provenance = {
        "seed": int(seed),
        "horizon": int(horizon),
        "n_trajectories": int(n_trajectories),
        "mu": [float(x) for x in params.mu],
        "phi": [float(x) for x in params.phi],
        "sigma": [float(x) for x in params.sigma],
        "g_last": [float(x) for x in g_last],
    }
    return ProjectionEnsemble(values=out, labels=labels, provenance=provenance)


def aggregate(
    ensemble: ProjectionEnsemble,
    weights: RegionWeights,
    mode: str = "rate",
) -> dict[str, np.ndarray]:
    """Collapse country trajectories to per-region trajectories (N x H).

    mode "rate" takes the weighted mean of rates; "count" takes the
    weighted sum (weights then act as population scalers).
    """
    if mode not in ("rate", "count"):
        raise ValueError("mode must be 'rate' or 'count'")
    out: dict[str, np.ndarray] = {}
    for region in weights.regions:
        w = weights.matrix(region, ensemble.labels, ensemble.horizon)
        totals = w.sum(axis=1)
        if (totals <= 0).any():
            period = int(np.argmax(totals <= 0))
            raise AllZeroWeights(region, period + 1)
        weighted = np.einsum("nhc,hc->nh", ensemble.values, w)
        out[region] = weighted / totals if mode == "rate" else weighted
    return out


def crps(sample_values, observation: float) -> float:
    """Sample CRPS of an empirical forecast distribution against one value.

    Computes mean |X_i - x| - (1/2) mean |X_i - X_j|, the exact integral of
    the squared difference between the empirical CDF and the observation's
    step function.
    """
    x = np.asarray(sample_values, dtype=float).ravel()
    n = x.size
    if n == 0:
        raise EmptyEnsemble("CRPS needs at least one sample")
    term1 = float(np.mean(np.abs(x - float(observation))))
    xs = np.sort(x)
    # sum_{i<j} (x_j - x_i), computed in O(n log n) via the sorted prefix trick
    gini = float(xs @ (2.0 * np.arange(n) - n + 1.0))
    return term1 - gini / (n * n)


@dataclass(frozen=True, eq=False)
class CrpsTable:
    """Per-region mean CRPS for two competing ensembles."""

    rows: tuple[dict, ...]
    model_a: str = "model_a"
    model_b: str = "model_b"

    def to_csv(self) -> str:
        lines = [f"region,{self.model_a},{self.model_b},better"]
        for r in self.rows:
            lines.append(
                f"{r['region']},{r['crps_a']:.17g},{r['crps_b']:.17g},{r['better']}"
            )
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        return {"model_a": self.model_a, "model_b": self.model_b, "rows": list(self.rows)}


def compare_models(
    ensemble_a: ProjectionEnsemble,
    ensemble_b: ProjectionEnsemble,
    observations: np.ndarray,
    weights: RegionWeights,
    mode: str = "rate",
    names: tuple[str, str] = ("model_a", "model_b"),
) -> CrpsTable:
    """Mean CRPS per region and horizon for two ensembles of the same layout.

    ``observations`` is an H x C array of realized rates aligned with the
    ensembles' labels; observed regional values use the same weighting as
    the ensembles.
    """
    if ensemble_a.labels != ensemble_b.labels or ensemble_a.horizon != ensemble_b.horizon:
        raise ShapeMismatch("ensembles must share labels and horizon")
    obs = np.asarray(observations, dtype=float)
    h, c = ensemble_a.horizon, len(ensemble_a.labels)
    if obs.shape != (h, c):
        raise ShapeMismatch(f"observations shape {obs.shape}, expected ({h}, {c})")

    agg_a = aggregate(ensemble_a, weights, mode=mode)
    agg_b = aggregate(ensemble_b, weights, mode=mode)
    rows = []
    for region in weights.regions:
        w = weights.matrix(region, ensemble_a.labels, h)
        totals = w.sum(axis=1)
        obs_region = (w * obs).sum(axis=1)
        if mode == "rate":
            obs_region = obs_region / totals
        scores_a = [crps(agg_a[region][:, k], obs_region[k]) for k in range(h)]
        scores_b = [crps(agg_b[region][:, k], obs_region[k]) for k in range(h)]
        ca, cb = float(np.mean(scores_a)), float(np.mean(scores_b))
        better = names[0] if ca < cb else names[1] if cb < ca else "tie"
        rows.append({"region": region, "crps_a": ca, "crps_b": cb, "better": better})
    return CrpsTable(rows=tuple(rows), model_a=names[0], model_b=names[1])


def read_weights_csv(path) -> RegionWeights:
    """Read "region,label,period,weight" rows; period "*" means all periods.

    Periods are 1-based. Rows for the same region/label must either use "*"
    once or enumerate periods; enumerated periods form a dense 1..H block.
    """
    static: dict[str, dict[str, float]] = {}
    periodic: dict[str, dict[str, dict[int, float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for line, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != 4:
                raise DimensionMismatch(f"{path}:{line}: expected 4 fields")
            region, label, period, weight = (s.strip() for s in row)
            if line == 1 and period.lower() in ("period", "t"):
                continue  # header
            wv = float(weight)
            if period == "*":
                static.setdefault(region, {})[label] = wv
            else:
                periodic.setdefault(region, {}).setdefault(label, {})[int(period)] = wv
    regions: dict[str, dict[str, np.ndarray | float]] = {}
    for region, per_label in static.items():
        regions.setdefault(region, {}).update(per_label)
    for region, per_label in periodic.items():
        for label, by_period in per_label.items():
            horizon = max(by_period)
            arr = np.zeros(horizon)
            for k, v in by_period.items():
                if k < 1:
                    raise DimensionMismatch(f"{path}: period must be >= 1 for {label!r}")
                arr[k - 1] = v
            regions.setdefault(region, {})[label] = arr
    if not regions:
        raise DimensionMismatch(f"{path}: no weight rows")
    return RegionWeights(regions=regions)


def save_ensemble(ensemble: ProjectionEnsemble, path, fmt: str = "npz") -> None:
    """Persist an ensemble as compressed binary (npz) or long-format CSV."""
    if fmt == "npz":
        np.savez_compressed(
            path,
            values=ensemble.values,
            labels=np.array(ensemble.labels),
            provenance=json.dumps(ensemble.provenance, sort_keys=True),
        )
    elif fmt == "csv":
        n, h, c = ensemble.values.shape
        with open(path, "w", newline="") as fh:
            fh.write("trajectory,period,label,value\n")
            for i in range(n):
                for k in range(h):
                    for j in range(c):
                        fh.write(f"{i + 1},{k + 1},{ensemble.labels[j]},"
                                 f"{ensemble.values[i, k, j]:.17g}\n")
    else:
        raise ValueError("fmt must be 'npz' or 'csv'")


def load_ensemble(path) -> ProjectionEnsemble:
    """Load an ensemble saved by :func:`save_ensemble` (either format)."""
    path = str(path)
    if path.endswith(".npz"):
        with np.load(path, allow_pickle=False) as data:
            return ProjectionEnsemble(
                values=data["values"],
                labels=tuple(str(x) for x in data["labels"]),
                provenance=json.loads(str(data["provenance"])),
            )
    cells: dict[tuple[int, int, str], float] = {}
    labels_seen: list[str] = []
    n_max = h_max = 0
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [s.strip() for s in header] != ["trajectory", "period", "label", "value"]:
            raise DimensionMismatch(f"{path}: unexpected ensemble CSV header")
        for row in reader:
            if not row:
                continue
            i, k, lab, v = int(row[0]), int(row[1]), row[2].strip(), float(row[3])
            if lab not in labels_seen:
                labels_seen.append(lab)
            cells[(i, k, lab)] = v
            n_max, h_max = max(n_max, i), max(h_max, k)
    values = np.empty((n_max, h_max, len(labels_seen)))
    for (i, k, lab), v in cells.items():
        values[i - 1, k - 1, labels_seen.index(lab)] = v
    return ProjectionEnsemble(values=values, labels=tuple(labels_seen), provenance={})
