"""Discrete-time multivariate Hawkes networks over bucketed event streams:
definition, branching simulation, and parent-assignment Gibbs inference.

Events are per-(process, bucket) indicators. The intensity of process b at
bucket t is the background rate plus, for every event on any process a at an
earlier bucket within ``dt_max`` lags, ``weights[a, b] * kernel[a, b, lag]``.
Kernels are probability mass functions over lags 1..dt_max, parameterized as
convex combinations of fixed boxcar basis functions so that the Gibbs updates
stay conjugate: parent assignments are drawn per event, then background
rates, weights, and kernel coefficients are drawn from their Gamma/Dirichlet
conditionals.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, InputError, StabilityError
from .events import BucketGrid, EventStream, ProcessSet

DEFAULT_DT_MAX = 96
KERNEL_TOL = 1e-9


def spectral_radius(matrix: np.ndarray, tol: float = 1e-10, max_iter: int = 10000) -> float:
    """Largest eigenvalue magnitude of a nonnegative square matrix.

    Power iteration on the matrix shifted by the identity (which keeps the
    iteration convergent for imprimitive matrices); the shift is subtracted
    from the converged estimate.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError("spectral radius needs a square matrix")
    if np.any(matrix < 0):
        raise ValueError("matrix must be elementwise nonnegative")
    n = matrix.shape[0]
    shifted = matrix + np.eye(n)
    x = np.full(n, 1.0 / n)
    estimate = 1.0
    for _ in range(max_iter):
        y = shifted @ x
        new_estimate = y.sum()
        x = y / new_estimate
        if abs(new_estimate - estimate) < tol:
            estimate = new_estimate
            break
        estimate = new_estimate
    return max(estimate - 1.0, 0.0)


@dataclass
class ImpulseBasis:
    """Fixed lag-distribution basis; rows of ``phi`` are pmfs over lags 1..dt_max."""

    phi: np.ndarray

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        if self.phi.ndim != 2 or self.phi.shape[0] < 1:
            raise ValueError("phi must be a B x dt_max matrix")
        if np.any(self.phi < 0) or np.any(np.abs(self.phi.sum(axis=1) - 1.0) > KERNEL_TOL):
            raise ValueError("every basis function must sum to 1")

    @property
    def n_basis(self) -> int:
        return self.phi.shape[0]

    @property
    def dt_max(self) -> int:
        return self.phi.shape[1]

    @staticmethod
    def default_edges(dt_max: int) -> tuple[tuple[int, int], ...]:
        """Three contiguous lag spans in roughly 1/12, 1/4, 2/3 proportions
        (1-8, 9-32, 33-96 when dt_max is 96)."""
        if dt_max < 3:
            return tuple((d, d) for d in range(1, dt_max + 1))
        low = max(1, dt_max // 12)
        mid = max(low + 1, dt_max // 3)
        return ((1, low), (low + 1, mid), (mid + 1, dt_max))

    @classmethod
    def boxcars(cls, dt_max: int,
                edges: Sequence[tuple[int, int]] | None = None) -> "ImpulseBasis":
        """Uniform boxcar basis over the given inclusive lag spans."""
        if dt_max < 1:
            raise ValueError("dt_max must be >= 1")
        if edges is None:
            edges = cls.default_edges(dt_max)
        previous_hi = 0
        phi = np.zeros((len(edges), dt_max))
        for j, (lo, hi) in enumerate(edges):
            if not (1 <= lo <= hi <= dt_max):
                raise ValueError(f"edge ({lo}, {hi}) outside lags 1..{dt_max}")
            if lo <= previous_hi:
                raise ValueError("basis edges must be ascending and non-overlapping")
            phi[j, lo - 1:hi] = 1.0 / (hi - lo + 1)
            previous_hi = hi
        return cls(phi=phi)


def kernels_from_coefficients(basis: ImpulseBasis, coefficients: np.ndarray) -> np.ndarray:
    """Per-edge kernels g[a, b] = sum_j coefficients[a, b, j] * phi[j]."""
    coefficients = np.asarray(coefficients, dtype=float)
    return np.einsum("abj,jd->abd", coefficients, basis.phi)


@dataclass
class HawkesNetwork:
    """Background rates, weight matrix, and per-edge lag kernels for K processes.

    ``weights[a, b]`` is the expected number of child events on process b per
    event on process a; ``kernels[a, b]`` is the pmf of the parent-child lag.
    """

    labels: tuple[str, ...]
    background: np.ndarray
    weights: np.ndarray
    kernels: np.ndarray
    dt_max: int = DEFAULT_DT_MAX

    def __post_init__(self):
        self.labels = tuple(self.labels)
        k = len(self.labels)
        self.background = np.asarray(self.background, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        self.kernels = np.asarray(self.kernels, dtype=float)
        if self.background.shape != (k,) or np.any(self.background <= 0):
            raise ValueError("background must be a strictly positive K-vector")
        if self.weights.shape != (k, k) or np.any(self.weights < 0):
            raise ValueError("weights must be a nonnegative K x K matrix")
        if self.kernels.shape != (k, k, self.dt_max):
            raise ValueError("kernels must have shape K x K x dt_max")
        if np.any(self.kernels < 0) or \
                np.any(np.abs(self.kernels.sum(axis=2) - 1.0) > KERNEL_TOL):
            raise ValueError("every kernel must be a pmf over lags 1..dt_max")

    @property
    def n_processes(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class GibbsConfig:
    """Sampler schedule and priors. Priors are (shape, rate) Gamma pairs for
    background rates and weights, and a symmetric Dirichlet concentration for
    the kernel coefficients."""

    iterations: int = 1500
    burn_in: int = 500
    thinning: int = 1
    prior_background: tuple[float, float] = (1.0, 1.0)
    prior_weight: tuple[float, float] = (0.5, 10.0)
    prior_impulse: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not self.iterations > self.burn_in >= 0:
            raise ConfigError("need iterations > burn_in >= 0")
        if self.thinning < 1:
            raise ConfigError("thinning must be >= 1")
        for name, pair in (("prior_background", self.prior_background),
                           ("prior_weight", self.prior_weight)):
            if len(pair) != 2 or pair[0] <= 0 or pair[1] <= 0:
                raise ConfigError(f"{name} must be a positive (shape, rate) pair")
        if self.prior_impulse <= 0:
            raise ConfigError("prior_impulse must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")


@dataclass
class ParentAssignment:
    """Per-event parent attribution: -1 for background, otherwise the index of
    an earlier event in the canonical (bucket, process) ordering."""

    event_proc: np.ndarray
    event_bucket: np.ndarray
    parent: np.ndarray
    dt_max: int

    def __post_init__(self):
        self.event_proc = np.asarray(self.event_proc, dtype=np.int64)
        self.event_bucket = np.asarray(self.event_bucket, dtype=np.int64)
        self.parent = np.asarray(self.parent, dtype=np.int64)
        assigned = np.flatnonzero(self.parent >= 0)
        lags = self.event_bucket[assigned] - self.event_bucket[self.parent[assigned]]
        if np.any(lags < 1) or np.any(lags > self.dt_max):
            raise ValueError("parent lags must lie in [1, dt_max]")

    @property
    def n_events(self) -> int:
        return len(self.event_proc)

    @property
    def n_background(self) -> int:
        return int((self.parent < 0).sum())


def event_arrays(process_set: ProcessSet) -> tuple[np.ndarray, np.ndarray]:
    """All events as (process, bucket) arrays in canonical (bucket, process) order."""
    pairs = sorted(
        (bucket, p)
        for p, stream in enumerate(process_set.streams)
        for bucket in stream.event_buckets
    )
    bucket = np.array([b for b, _ in pairs], dtype=np.int64)
    proc = np.array([p for _, p in pairs], dtype=np.int64)
    return proc, bucket


def intensity(net: HawkesNetwork, process_set: ProcessSet, process: int, bucket: int) -> float:
    """Event rate of one process at one bucket given the observed history."""
    k = net.n_processes
    if not 0 <= process < k:
        raise IndexError(f"process {process} out of range")
    if not 0 <= bucket < process_set.grid.n_buckets:
        raise IndexError(f"bucket {bucket} outside the grid")
    rate = float(net.background[process])
    for a, stream in enumerate(process_set.streams):
        history = np.asarray(stream.event_buckets, dtype=np.int64)
        lo = np.searchsorted(history, bucket - net.dt_max)
        hi = np.searchsorted(history, bucket)
        for t in history[lo:hi]:
            rate += net.weights[a, process] * net.kernels[a, process, bucket - t - 1]
    return rate


def _intensity_matrix(net: HawkesNetwork, process_set: ProcessSet) -> np.ndarray:
    n_buckets = process_set.grid.n_buckets
    lam = np.tile(net.background[:, None], (1, n_buckets))
    for a, stream in enumerate(process_set.streams):
        for t in stream.event_buckets:
            span = min(net.dt_max, n_buckets - t - 1)
            if span > 0:
                lam[:, t + 1:t + 1 + span] += net.weights[a][:, None] * net.kernels[a][:, :span]
    return lam


def log_likelihood(net: HawkesNetwork, process_set: ProcessSet) -> float:
    """Per-bucket Poisson log likelihood with mean equal to the intensity.

    Returns -inf if any event sits at a bucket of zero intensity.
    """
    if net.n_processes != len(process_set.streams):
        raise ValueError("network and process set sizes differ")
    lam = _intensity_matrix(net, process_set)
    indicator = np.zeros(lam.shape, dtype=bool)
    for b, stream in enumerate(process_set.streams):
        indicator[b, list(stream.event_buckets)] = True
    at_events = lam[indicator]
    if np.any(at_events <= 0):
        return float("-inf")
    return float(np.log(at_events).sum() - lam.sum())


def simulate_events(net: HawkesNetwork, n_buckets: int, seed: int):
    """Branching simulation before indicator collapsing.

    Background events arrive per (process, bucket) as Poisson(background);
    every event spawns Poisson(weights[a, b]) children on each process at
    lags drawn from the edge kernel, children beyond the horizon discarded.
    Returns parallel (process, bucket) arrays in generation order.
    """
    radius = spectral_radius(net.weights)
    if radius >= 1:
        raise StabilityError(f"non-stationary network: spectral radius {radius:.4f} >= 1")
    rng = np.random.default_rng(seed)
    k = net.n_processes
    procs: list[int] = []
    buckets: list[int] = []
    frontier: list[tuple[int, int]] = []
    for b in range(k):
        counts = rng.poisson(net.background[b], n_buckets)
        for t in np.flatnonzero(counts):
            frontier.extend([(b, int(t))] * int(counts[t]))
    while frontier:
        procs.extend(p for p, _ in frontier)
        buckets.extend(t for _, t in frontier)
        offspring: list[tuple[int, int]] = []
        for a, t in frontier:
            for b in range(k):
                if net.weights[a, b] == 0:
                    continue
                n_children = rng.poisson(net.weights[a, b])
                if n_children == 0:
                    continue
                lags = rng.choice(net.dt_max, size=n_children, p=net.kernels[a, b]) + 1
                for lag in lags:
                    child_bucket = t + int(lag)
                    if child_bucket < n_buckets:
                        offspring.append((b, child_bucket))
        frontier = offspring
    return np.array(procs, dtype=np.int64), np.array(buckets, dtype=np.int64)


def simulate(net: HawkesNetwork, n_buckets: int, seed: int,
             bucket_width: int = 900) -> ProcessSet:
    """Simulate and collapse to per-(process, bucket) event indicators."""
    procs, buckets = simulate_events(net, n_buckets, seed)
    grid = BucketGrid(start=0, bucket_width=bucket_width, n_buckets=n_buckets)
    streams = []
    for p, label in enumerate(net.labels):
        mine = np.unique(buckets[procs == p]) if len(buckets) else np.array([], dtype=np.int64)
        streams.append(EventStream(label=label, event_buckets=tuple(int(t) for t in mine)))
    return ProcessSet(grid=grid, streams=streams)


def _candidate_table(proc: np.ndarray, bucket: np.ndarray, dt_max: int):
    """Padded per-event windows of admissible parents (events 1..dt_max buckets
    earlier, any process). Candidates are fixed across sweeps."""
    n = len(bucket)
    lo = np.searchsorted(bucket, bucket - dt_max, side="left")
    hi = np.searchsorted(bucket, bucket, side="left")
    width = hi - lo
    max_c = int(width.max()) if n else 0
    offsets = np.arange(max_c)
    columns = lo[:, None] + offsets[None, :]
    mask = offsets[None, :] < width[:, None]
    safe = np.where(mask, columns, 0)
    cand_idx = np.where(mask, columns, -1)
    cand_proc = proc[safe]
    cand_lag = np.where(mask, bucket[:, None] - bucket[safe], 1)
    return cand_idx, cand_proc, cand_lag, mask


def _draw_parents(background, weights, kernels, proc, cand_idx, cand_proc,
                  cand_lag, mask, rng) -> np.ndarray:
    n = len(proc)
    bg = background[proc]
    parent = np.full(n, -1, dtype=np.int64)
    if cand_idx.shape[1] == 0:
        rng.random(n)
        return parent
    pw = weights[cand_proc, proc[:, None]] * kernels[cand_proc, proc[:, None], cand_lag - 1]
    pw = np.where(mask, pw, 0.0)
    cum = np.cumsum(pw, axis=1)
    u = rng.random(n) * (bg + cum[:, -1])
    rows = np.flatnonzero(u >= bg)
    if rows.size:
        excess = (u - bg)[rows, None]
        j = np.minimum((cum[rows] <= excess).sum(axis=1), pw.shape[1] - 1)
        parent[rows] = cand_idx[rows, j]
    return parent


def _parent_counts(proc, bucket, parent, k):
    is_background = parent < 0
    bg_counts = np.bincount(proc[is_background], minlength=k)
    child_rows = np.flatnonzero(~is_background)
    parent_proc = proc[parent[child_rows]]
    child_proc = proc[child_rows]
    lags = bucket[child_rows] - bucket[parent[child_rows]]
    child_counts = np.bincount(parent_proc * k + child_proc, minlength=k * k).reshape(k, k)
    return bg_counts, child_counts, parent_proc, child_proc, lags


def _draw_parameters(bg_counts, child_counts, parent_proc, child_proc, lags,
                     coefficients, basis: ImpulseBasis, config: GibbsConfig,
                     rng, n_buckets: int, events_per_proc: np.ndarray):
    shape0, rate0 = config.prior_background
    background = rng.gamma(shape0 + bg_counts, 1.0 / (rate0 + n_buckets))
    background = np.maximum(background, 1e-300)
    shape_w, rate_w = config.prior_weight
    weights = rng.gamma(shape_w + child_counts,
                        1.0 / (rate_w + events_per_proc)[:, None])
    k, n_basis = child_counts.shape[0], basis.n_basis
    soft = np.zeros((k, k, n_basis))
    if lags.size:
        # responsibility of basis j for an assigned lag d: phi_j[d]*theta_j, normalized
        resp = coefficients[parent_proc, child_proc] * basis.phi[:, lags - 1].T
        norms = resp.sum(axis=1, keepdims=True)
        resp = np.where(norms > 0, resp / np.where(norms > 0, norms, 1.0), 1.0 / n_basis)
        np.add.at(soft, (parent_proc, child_proc), resp)
    gam = rng.gamma(config.prior_impulse + soft)
    gam_sum = gam.sum(axis=2, keepdims=True)
    coefficients = np.where(gam_sum > 0, gam / np.where(gam_sum > 0, gam_sum, 1.0),
                            1.0 / n_basis)
    return background, weights, coefficients


def sample_parents(net: HawkesNetwork, process_set: ProcessSet, seed: int) -> ParentAssignment:
    """Draw one parent attribution per event.

    Each event picks background with unnormalized weight equal to the
    background rate, or an earlier event (a, t - d) with weight
    ``weights[a, b] * kernel[a, b, d]`` for lags 1..dt_max.
    """
    if net.n_processes != len(process_set.streams):
        raise ValueError("network and process set sizes differ")
    proc, bucket = event_arrays(process_set)
    cand_idx, cand_proc, cand_lag, mask = _candidate_table(proc, bucket, net.dt_max)
    rng = np.random.default_rng(seed)
    parent = _draw_parents(net.background, net.weights, net.kernels, proc,
                           cand_idx, cand_proc, cand_lag, mask, rng)
    return ParentAssignment(event_proc=proc, event_bucket=bucket, parent=parent,
                            dt_max=net.dt_max)


def update_parameters(assignment: ParentAssignment, process_set: ProcessSet,
                      basis: ImpulseBasis, config: GibbsConfig, seed: int,
                      coefficients: np.ndarray | None = None):
    """Draw (background, weights, coefficients) from their conditionals given
    a parent assignment.

    Background rates are Gamma(shape + background-assigned events, rate +
    n_buckets); weights are Gamma(shape + children on b from a, rate + events
    on a); coefficients are Dirichlet(concentration + per-basis soft counts of
    the assigned lags). ``coefficients`` are the current values used for the
    lag responsibilities (uniform if omitted).
    """
    k = len(process_set.streams)
    if coefficients is None:
        coefficients = np.full((k, k, basis.n_basis), 1.0 / basis.n_basis)
    rng = np.random.default_rng(seed)
    counts = _parent_counts(assignment.event_proc, assignment.event_bucket,
                            assignment.parent, k)
    events_per_proc = np.bincount(assignment.event_proc, minlength=k)
    return _draw_parameters(*counts, coefficients, basis, config, rng,
                            process_set.grid.n_buckets, events_per_proc)


@dataclass
class PosteriorSummary:
    """Posterior means and 90% credible bounds over the retained Gibbs samples."""

    labels: tuple[str, ...]
    mean_background: np.ndarray
    mean_weights: np.ndarray
    ci90_lower: np.ndarray
    ci90_upper: np.ndarray
    mean_impulse: np.ndarray
    n_samples: int


def fit(process_set: ProcessSet, dt_max: int = DEFAULT_DT_MAX,
        basis: ImpulseBasis | None = None,
        config: GibbsConfig | None = None) -> PosteriorSummary:
    """Gibbs inference over a process set: alternate parent assignments and
    conjugate parameter draws, then summarize the retained samples.

    Sweeps run parents, then background rates, then weights, then kernel
    coefficients; samples after ``burn_in`` are kept at every ``thinning``-th
    sweep. Deterministic given ``config.seed``. Empty streams are allowed and
    only receive background mass.
    """
    config = config if config is not None else GibbsConfig()
    basis = basis if basis is not None else ImpulseBasis.boxcars(dt_max)
    if basis.dt_max != dt_max:
        raise ConfigError(f"basis covers lags 1..{basis.dt_max}, expected 1..{dt_max}")
    k = len(process_set.streams)
    if k < 1:
        raise ConfigError("need at least one process")

    proc, bucket = event_arrays(process_set)
    cand = _candidate_table(proc, bucket, dt_max)
    events_per_proc = np.bincount(proc, minlength=k)
    n_buckets = process_set.grid.n_buckets

    rng = np.random.default_rng(config.seed)
    background = np.full(k, config.prior_background[0] / config.prior_background[1])
    weights = np.full((k, k), config.prior_weight[0] / config.prior_weight[1])
    coefficients = np.full((k, k, basis.n_basis), 1.0 / basis.n_basis)

    kept_background, kept_weights, kept_coefficients = [], [], []
    for sweep in range(config.iterations):
        kernels = kernels_from_coefficients(basis, coefficients)
        parent = _draw_parents(background, weights, kernels, proc, *cand, rng)
        counts = _parent_counts(proc, bucket, parent, k)
        background, weights, coefficients = _draw_parameters(
            *counts, coefficients, basis, config, rng, n_buckets, events_per_proc)
        if sweep >= config.burn_in and (sweep - config.burn_in) % config.thinning == 0:
            kept_background.append(background)
            kept_weights.append(weights)
            kept_coefficients.append(coefficients)

    weight_samples = np.stack(kept_weights)
    return PosteriorSummary(
        labels=tuple(process_set.labels),
        mean_background=np.stack(kept_background).mean(axis=0),
        mean_weights=weight_samples.mean(axis=0),
        ci90_lower=np.percentile(weight_samples, 5, axis=0),
        ci90_upper=np.percentile(weight_samples, 95, axis=0),
        mean_impulse=np.stack(kept_coefficients).mean(axis=0),
        n_samples=len(kept_weights),
    )


def write_weight_csv(path: str | Path, labels: Sequence[str], weights: np.ndarray) -> None:
    """Weight matrix with labels on the first row and column, 6 decimal places."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([""] + list(labels))
        for i, label in enumerate(labels):
            writer.writerow([label] + [f"{weights[i, j]:.6f}" for j in range(len(labels))])


def write_posterior_json(path: str | Path, summary: PosteriorSummary,
                         config_echo: dict | None = None) -> None:
    payload = {
        "labels": list(summary.labels),
        "mean_lambda0": [float(x) for x in summary.mean_background],
        "mean_W": summary.mean_weights.tolist(),
        "ci90_W": {
            "lower": summary.ci90_lower.tolist(),
            "upper": summary.ci90_upper.tolist(),
        },
        "mean_impulse": summary.mean_impulse.tolist(),
        "n_samples": summary.n_samples,
        "config": config_echo or {},
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                          encoding="utf-8")


def read_network_json(path: str | Path) -> tuple[HawkesNetwork, int]:
    """Load a network description for simulation.

    Required keys: ``labels``, ``background``, ``weights``. Optional:
    ``dt_max`` (default 96), ``bucket_width`` (default 900), ``basis_edges``,
    ``impulse_coefficients`` (K x K x B, default uniform over the basis), or
    explicit ``kernels`` (K x K x dt_max), which take precedence.
    Returns the network and the bucket width.
    """
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read network file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed network file {path}: {exc}") from exc
    try:
        labels = tuple(str(x) for x in payload["labels"])
        background = np.asarray(payload["background"], dtype=float)
        weights = np.asarray(payload["weights"], dtype=float)
        dt_max = int(payload.get("dt_max", DEFAULT_DT_MAX))
        bucket_width = int(payload.get("bucket_width", 900))
        if "kernels" in payload:
            kernels = np.asarray(payload["kernels"], dtype=float)
        else:
            edges = payload.get("basis_edges")
            basis = ImpulseBasis.boxcars(
                dt_max, edges=[tuple(e) for e in edges] if edges else None)
            k = len(labels)
            coefficients = np.asarray(
                payload.get("impulse_coefficients",
                            np.full((k, k, basis.n_basis), 1.0 / basis.n_basis)),
                dtype=float)
            kernels = kernels_from_coefficients(basis, coefficients)
        net = HawkesNetwork(labels=labels, background=background, weights=weights,
                            kernels=kernels, dt_max=dt_max)
    except (KeyError, ValueError, TypeError) as exc:
        raise InputError(f"invalid network file {path}: {exc}") from exc
    return net, bucket_width
