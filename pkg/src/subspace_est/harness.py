"""Monte Carlo risk harness: per-trial losses, risk aggregation, parameter
sweeps with closed-form rate predictions, log-log rate fits, and two-segment
phase-transition detection.

Rate conventions.  theory_rate evaluates the constant-free minimax rate for
the model family and constraint kind at the sweep knobs, capped at 1 for
structured sets (sqrt(r) unconstrained); only ratios and fitted slopes are
meaningful, never absolute levels.  All randomness is derived from the model
seed and the trial index, so every estimate is a pure function of its inputs.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import constraints, estimators, models
from .errors import DegenerateInput, DimensionMismatch
from .geometry import subspace_distance

_CSV_FIELDS = ("family", "p1", "p2", "n", "p", "r", "k", "t", "sigma",
               "trials", "seed", "mean_d", "stderr", "theory_rate")
_INT_FIELDS = {"p1", "p2", "n", "p", "r", "k", "trials", "seed"}


@dataclass(frozen=True)
class RiskEstimate:
    """Monte Carlo estimate of the expected subspace loss."""

    mean_distance: float
    stderr: float
    trials: int
    spec_digest: str
    seed: int

    def __post_init__(self):
        if self.trials < 2:
            raise ValueError("need at least 2 trials")
        if self.mean_distance < 0 or self.stderr < 0:
            raise ValueError("risk summaries must be non-negative")


@dataclass
class SweepRow:
    """One sweep grid point: knob values plus the measured and predicted risk.

    Dimension fields not used by the row's family stay None and serialize to
    empty CSV cells.
    """

    family: str
    r: int
    t: float
    sigma: float
    trials: int
    seed: int
    mean_d: float
    stderr: float
    theory_rate: float
    p1: int | None = None
    p2: int | None = None
    n: int | None = None
    p: int | None = None
    k: int | None = None

    def to_csv_values(self):
        out = []
        for name in _CSV_FIELDS:
            value = getattr(self, name)
            if value is None:
                out.append("")
            elif isinstance(value, float):
                out.append(f"{value:.17g}")
            else:
                out.append(str(value))
        return out


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float


@dataclass(frozen=True)
class PhaseTransitionFit:
    """Two-segment log-log fit of risk against signal strength."""

    t_break: float
    slope_low: float
    slope_high: float
    r_squared_low: float
    r_squared_high: float


def _spec_digest(model: models.ModelSpec, cset: constraints.ConstraintSet,
                 config: estimators.EstimatorConfig) -> str:
    h = hashlib.sha256()

    def put(*items):
        for item in items:
            h.update(repr(item).encode())
            h.update(b"|")

    put(model.family, model.rank, model.noise_sd, model.seed,
        model.p1, model.p2, model.n, model.p,
        tuple(model.spectrum.values), model.spectrum.scale,
        model.spectrum.conditioning)
    if model.mean is not None:
        h.update(np.ascontiguousarray(model.mean, dtype=float).tobytes())
    put(cset.kind, cset.p, cset.r, cset.k)
    if cset.basis is not None:
        h.update(np.ascontiguousarray(cset.basis.values).tobytes())
    put(config.method, config.max_iter, config.tol, config.init,
        config.init_seed)
    if config.init_frame is not None:
        h.update(np.ascontiguousarray(config.init_frame.values).tobytes())
    return h.hexdigest()[:16]


def run_trial(model: models.ModelSpec, cset: constraints.ConstraintSet,
              config: estimators.EstimatorConfig, trial_index: int) -> float:
    """Loss d(U_hat, U_truth) of one simulated instance on its own stream."""
    instance = models.sample_instance(model, cset, trial_index=trial_index)
    frame = estimators.estimate(instance, cset, config)
    dist = subspace_distance(frame, instance.truth_left)
    # loss is bounded by the projector-metric diameter of O(p, r)
    bound = math.sqrt(2.0 * model.rank) + 1e-9
    if dist > bound:
        raise AssertionError(f"loss {dist} exceeds diameter bound {bound}")
    return float(dist)


def _map_trials(fn, count: int, threads: int):
    if threads <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))


def monte_carlo_risk(model: models.ModelSpec, cset: constraints.ConstraintSet,
                     config: estimators.EstimatorConfig, trials: int,
                     threads: int = 1) -> RiskEstimate:
    """Mean and standard error of the loss over independent trial streams.

    Trial i always uses the stream (model.seed, i), and losses are aggregated
    in trial order, so the result is bit-identical however many workers run
    and the first half of a doubled run reproduces exactly.
    """
    if trials < 2:
        raise ValueError("need at least 2 trials")
    losses = _map_trials(lambda i: run_trial(model, cset, config, i),
                         trials, threads)
    arr = np.asarray(losses)
    mean = float(np.mean(arr))
    sd = float(np.std(arr, ddof=1))
    return RiskEstimate(mean_distance=mean, stderr=sd / math.sqrt(trials),
                        trials=trials, spec_digest=_spec_digest(model, cset, config),
                        seed=model.seed)


def _structure_term(cset: constraints.ConstraintSet, ambient: int) -> float:
    if cset.kind == constraints.SPARSE:
        k = cset.k
        return math.sqrt(k * math.log(math.e * ambient / k)) + math.sqrt(k)
    if cset.kind == constraints.NONNEG:
        return math.sqrt(ambient)
    if cset.kind == constraints.SUBSPACE:
        return math.sqrt(cset.k)
    if cset.kind == constraints.SIGNS:
        return math.sqrt(ambient)
    return math.sqrt(cset.r * ambient)


def theory_rate(model: models.ModelSpec, cset: constraints.ConstraintSet) -> float:
    """Constant-free minimax rate prediction at the model's knobs.

    Denoising-type families scale as sigma sqrt(t^2 + sigma^2 p2) / t^2 times
    the constraint's entropy term, Wishart as sigma sqrt(t + sigma^2) /
    (t sqrt(n)) times the same term, Wigner as sigma / t times it; capped at 1
    (sqrt(r) when unconstrained).
    """
    sigma = model.noise_sd
    t = model.spectrum.scale
    structure = _structure_term(cset, model.frame_dim)
    if model.family == models.DENOISING:
        base = sigma * math.sqrt(t * t + sigma * sigma * model.p2) / (t * t)
    elif model.family == models.CLUSTERING:
        base = sigma * math.sqrt(t * t + sigma * sigma * model.p) / (t * t)
    elif model.family == models.WISHART:
        base = sigma * math.sqrt(t + sigma * sigma) / (t * math.sqrt(model.n))
    elif model.family == models.WIGNER:
        base = sigma / t
    else:
        raise DimensionMismatch(f"unknown family {model.family!r}")
    cap = math.sqrt(cset.r) if cset.kind == constraints.UNCONSTRAINED else 1.0
    return min(base * structure, cap)


def _rebuild_constraint(cset: constraints.ConstraintSet, ambient: int,
                        rank: int, k) -> constraints.ConstraintSet:
    if k is None:
        k = cset.k
    if cset.kind == constraints.SPARSE:
        return constraints.sparse(ambient, rank, k)
    if cset.kind == constraints.NONNEG:
        return constraints.nonneg(ambient, rank)
    if cset.kind == constraints.SIGNS:
        return constraints.signs(ambient)
    if cset.kind == constraints.UNCONSTRAINED:
        return constraints.unconstrained(ambient, rank)
    # a stored subspace basis cannot follow dimension changes
    if ambient != cset.p or rank != cset.r or k != cset.k:
        raise DimensionMismatch("subspace constraints cannot be re-dimensioned in a sweep")
    return cset


_KNOBS = ("t", "sigma", "p1", "p2", "n", "p", "k", "r")


def sweep(grid, base_model: models.ModelSpec, cset: constraints.ConstraintSet,
          config: estimators.EstimatorConfig, trials: int,
          threads: int = 1) -> list:
    """One risk estimate per grid assignment, tagged with theory_rate.

    Each grid entry maps knob names (among t, sigma, p1, p2, n, p, k, r) to
    values; unspecified knobs keep the base model's values.  Row i runs on
    seed base_model.seed + i.  A t knob installs a flat spectrum at scale t.
    """
    if not grid:
        raise ValueError("empty sweep grid")
    rows = []
    for index, assignment in enumerate(grid):
        unknown = set(assignment) - set(_KNOBS)
        if unknown:
            raise ValueError(f"unknown sweep knobs {sorted(unknown)}")
        changes = {"seed": base_model.seed + index}
        rank = int(assignment.get("r", base_model.rank))
        if "r" in assignment:
            changes["rank"] = rank
        if "t" in assignment or "r" in assignment:
            scale = float(assignment.get("t", base_model.spectrum.scale))
            changes["spectrum"] = models.SpectrumSpec.flat(scale, rank)
        if "sigma" in assignment:
            changes["noise_sd"] = float(assignment["sigma"])
        for name in ("p1", "p2", "n", "p"):
            if name in assignment:
                changes[name] = int(assignment[name])
        model = dataclasses.replace(base_model, **changes)
        row_cset = _rebuild_constraint(cset, model.frame_dim, rank,
                                       assignment.get("k"))
        risk = monte_carlo_risk(model, row_cset, config, trials, threads)
        rows.append(SweepRow(
            family=model.family, r=model.rank, t=model.spectrum.scale,
            sigma=model.noise_sd, trials=trials, seed=model.seed,
            mean_d=risk.mean_distance, stderr=risk.stderr,
            theory_rate=theory_rate(model, row_cset),
            p1=model.p1, p2=model.p2, n=model.n, p=model.p, k=row_cset.k))
    return rows


def write_sweep_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_FIELDS)
        for row in rows:
            writer.writerow(row.to_csv_values())


def read_sweep_csv(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(_CSV_FIELDS):
            raise ValueError(f"unexpected sweep header {header}")
        rows = []
        for record in reader:
            if not record:
                continue
            kwargs = {}
            for name, cell in zip(_CSV_FIELDS, record):
                if cell == "":
                    kwargs[name] = None
                elif name in _INT_FIELDS:
                    kwargs[name] = int(cell)
                elif name == "family":
                    kwargs[name] = cell
                else:
                    kwargs[name] = float(cell)
            rows.append(SweepRow(**kwargs))
        return rows


def fit_rate(xs, ys) -> RateFit:
    """Ordinary least squares of ln y on ln x."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size < 3 or xs.size != ys.size:
        raise ValueError("need at least 3 paired points")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("log-log fit needs positive inputs")
    lx = np.log(xs)
    ly = np.log(ys)
    if np.ptp(lx) < 1e-12:
        raise DegenerateInput("xs are constant; slope is unidentifiable")
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    sse = float(np.sum(resid ** 2))
    sst = float(np.sum((ly - np.mean(ly)) ** 2))
    r_squared = 1.0 if sst <= 1e-300 else 1.0 - sse / sst
    return RateFit(slope=float(slope), intercept=float(intercept),
                   r_squared=r_squared)


def detect_phase_transition(rows) -> PhaseTransitionFit:
    """Two-segment log-log fit of mean_d against t with an exhaustive
    breakpoint search over grid midpoints.

    Needs at least 8 rows whose t values span two decades, three points per
    segment; the breakpoint minimizing total squared residual wins, first on
    ties, and is reported as the geometric midpoint of its bracketing grid
    points.
    """
    ordered = sorted(rows, key=lambda row: row.t)
    ts = np.asarray([row.t for row in ordered], dtype=float)
    ys = np.asarray([row.mean_d for row in ordered], dtype=float)
    if ts.size < 8:
        raise DegenerateInput("need at least 8 sweep rows")
    if np.any(ts <= 0) or np.any(ys <= 0):
        raise DegenerateInput("phase-transition fit needs positive t and risk")
    if ts[-1] / ts[0] < 100.0 * (1 - 1e-12):
        raise DegenerateInput("t grid must span at least two decades")
    candidates = []
    for split in range(2, ts.size - 3):
        low = fit_rate(ts[: split + 1], ys[: split + 1])
        high = fit_rate(ts[split + 1:], ys[split + 1:])
        sse = _segment_sse(ts[: split + 1], ys[: split + 1], low) \
            + _segment_sse(ts[split + 1:], ys[split + 1:], high)
        candidates.append((sse, split, low, high))
    floor = min(c[0] for c in candidates)
    # rounding noise on an exact power law makes every split tie near zero;
    # the slack sends such ties to the first (boundary) split
    _, split, low, high = next(
        c for c in candidates if c[0] <= floor + 1e-10 * (1.0 + floor))
    return PhaseTransitionFit(
        t_break=math.sqrt(ts[split] * ts[split + 1]),
        slope_low=low.slope, slope_high=high.slope,
        r_squared_low=low.r_squared, r_squared_high=high.r_squared)


def _segment_sse(ts, ys, fit: RateFit) -> float:
    resid = np.log(ys) - (fit.slope * np.log(ts) + fit.intercept)
    return float(np.sum(resid ** 2))
