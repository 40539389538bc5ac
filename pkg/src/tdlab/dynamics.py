"""Trajectory diagnostics over an abstract iterated map.

Everything here works on a MapUnderStudy (a deterministic state -> state
evaluator plus a norm), so the same code that analyzes the encoder can be
validated on scalar toy maps with known Lyapunov exponents.
"""

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .encoder import EncoderParams, NumericalOverflowError, StateTrajectory, encoder_step


class DegenerateEnsembleError(ValueError):
    """Ensemble (or trajectory) carries zero variance; diagnostics undefined."""


def state_norm(state) -> float:
    """Frobenius norm for matrices, absolute value for scalars."""
    return float(np.linalg.norm(np.ravel(state)))


@dataclass(frozen=True)
class MapUnderStudy:
    """Deterministic evolution rule plus the norm its diagnostics use."""

    step: Callable
    norm: Callable = state_norm

    def evolve(self, state, n: int):
        for _ in range(n):
            state = self.step(state)
        return state


def encoder_map(params: EncoderParams) -> MapUnderStudy:
    return MapUnderStudy(step=lambda x: encoder_step(x, params))


def logistic_map(r: float = 4.0) -> MapUnderStudy:
    return MapUnderStudy(step=lambda x: r * x * (1.0 - x), norm=abs)


def scalar_linear_map(a: float) -> MapUnderStudy:
    return MapUnderStudy(step=lambda x: a * x, norm=abs)


@dataclass
class AnalysisSeries:
    """A scalar diagnostic sampled at strictly increasing time steps."""

    times: np.ndarray
    values: np.ndarray
    label: str = ""
    truncated: bool = False  # set when overflow cut the series short

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if len(self.times) != len(self.values):
            raise ValueError("times and values length mismatch")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self):
        return len(self.times)


@dataclass
class LyapunovSeries:
    """Local Lyapunov exponents: raw per-window values and per-step values."""

    times: np.ndarray       # window start steps: 0, tau, 2 tau, ...
    raw: np.ndarray         # ln(||d_{t+tau}|| / k), the per-window exponent
    per_step: np.ndarray    # raw / tau
    tau: int
    truncated: bool = False

    @property
    def values(self) -> np.ndarray:
        # per-step is the default reporting series
        return self.per_step

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True)
class LLEParams:
    k: float = 1.0          # perturbation norm
    tau: int = 10           # re-measure interval in map steps
    horizon: int = 5000     # total map steps T
    seed: int = 0           # perturbation draw

    def __post_init__(self):
        if not (np.isfinite(self.k) and self.k > 0):
            raise ValueError("k must be finite and > 0")
        if self.tau < 1:
            raise ValueError("tau must be >= 1")


def draw_perturbation(x0, target_norm: float, seed: int,
                      norm: Callable = state_norm):
    """Standard-normal direction with the state's shape, rescaled to target_norm."""
    if target_norm <= 0:
        raise ValueError("perturbation norm must be > 0")
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal(np.shape(x0))
    return eps * (target_norm / norm(eps))


def deviation_series(traj: StateTrajectory) -> AnalysisSeries:
    """D(t): mean squared distance of token vectors from their mean."""
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    centered = traj.states - traj.states.mean(axis=1, keepdims=True)
    values = np.square(centered).sum(axis=(1, 2)) / traj.states.shape[1]
    return AnalysisSeries(times=traj.times, values=values, label="deviation")


def sync_offset(series: AnalysisSeries, threshold: float = 1e-5) -> Optional[int]:
    """First recorded time with D(t) < threshold, or None within the horizon."""
    below = series.values < threshold
    if not below.any():
        return None
    return int(series.times[np.argmax(below)])


def local_lyapunov(map_: MapUnderStudy, x0, p: LLEParams) -> LyapunovSeries:
    """Iteratively renormalized perturbation growth rates.

    Each window re-scales the running difference vector to norm k, evolves
    the base and perturbed states tau steps, and records
    ln(||y_{t+tau} - x_{t+tau}|| / k).  Overflow (or a perturbation that
    collapses to exactly zero) ends the series early with truncated=True.
    """
    eps = draw_perturbation(x0, p.k, p.seed, map_.norm)
    x = x0
    times, raw = [], []
    truncated = False
    t = 0
    while t < p.horizon:
        y = x + eps
        try:
            for _ in range(p.tau):
                x = map_.step(x)
                y = map_.step(y)
        except (NumericalOverflowError, FloatingPointError, OverflowError):
            truncated = True
            break
        diff = y - x
        dist = map_.norm(diff)
        if not np.isfinite(dist) or not np.all(np.isfinite(np.ravel(x))):
            truncated = True
            break
        if dist == 0.0:
            truncated = True
            break
        times.append(t)
        raw.append(np.log(dist / p.k))
        eps = diff * (p.k / dist)
        t += p.tau
    raw = np.asarray(raw, dtype=np.float64)
    return LyapunovSeries(times=np.asarray(times, dtype=np.int64), raw=raw,
                          per_step=raw / p.tau, tau=p.tau, truncated=truncated)


def perturbation_response(map_: MapUnderStudy, x0, epsilon_norm: float,
                          steps: int, seed: int) -> AnalysisSeries:
    """||y_t - x_t|| for y_0 = x_0 + eps, ||eps|| = epsilon_norm, t = 0..steps."""
    eps = draw_perturbation(x0, epsilon_norm, seed, map_.norm)
    x, y = x0, x0 + eps
    times = [0]
    dists = [map_.norm(y - x)]
    truncated = False
    for t in range(1, steps + 1):
        try:
            x = map_.step(x)
            y = map_.step(y)
        except (NumericalOverflowError, FloatingPointError, OverflowError):
            truncated = True
            break
        d = map_.norm(y - x)
        if not np.isfinite(d):
            truncated = True
            break
        times.append(t)
        dists.append(d)
    return AnalysisSeries(times=times, values=dists, label="distance",
                          truncated=truncated)


def participation_ratio(eigenvalues: np.ndarray) -> float:
    """Inverse participation ratio of a spectrum normalized to sum 1."""
    s = np.asarray(eigenvalues, dtype=np.float64)
    if np.any(s < 0):
        raise ValueError("eigenvalues must be non-negative")
    total = s.sum()
    if total <= 0:
        raise DegenerateEnsembleError("zero total variance")
    s = s / total
    return float(1.0 / np.square(s).sum())


def effective_dimension(ensemble: np.ndarray) -> float:
    """Participation ratio of the ensemble covariance spectrum.

    ``ensemble`` holds M states along its first axis; each state is
    flattened.  Eigenvalues come from the singular values of the centered
    data matrix (population convention), so the value lies in
    [1, min(M-1, state_dim)].
    """
    flat = np.asarray(ensemble, dtype=np.float64).reshape(len(ensemble), -1)
    m = flat.shape[0]
    if m < 2:
        raise ValueError("ensemble must contain at least 2 states")
    centered = flat - flat.mean(axis=0, keepdims=True)
    sv = np.linalg.svd(centered, compute_uv=False)
    return participation_ratio(sv * sv / m)


def effective_dimension_series(ensembles: Mapping[int, np.ndarray]) -> AnalysisSeries:
    """effective_dimension applied at each recorded time."""
    times = sorted(ensembles)
    values = [effective_dimension(ensembles[t]) for t in times]
    return AnalysisSeries(times=times, values=values, label="effective_dimension")


@dataclass(frozen=True)
class TransientChaosResult:
    length: int            # map steps of chaotic prefix (censored at horizon)
    classification: str    # no_chaos | transient_chaos | still_chaotic


def transient_chaos_length(lle, consecutive: int = 5) -> TransientChaosResult:
    """Length of the positive-LLE prefix before a sustained negative run.

    The transition point is the first sample followed by ``consecutive``
    negative samples in a row; a run that is negative from the very first
    sample is classified no_chaos, and a series with no qualifying run is
    still_chaotic with the horizon as (censored) length.
    """
    if consecutive < 1:
        raise ValueError("consecutive must be >= 1")
    values = np.asarray(lle.values, dtype=np.float64)
    times = np.asarray(lle.times, dtype=np.int64)
    tau = getattr(lle, "tau", None)
    if tau is None:
        tau = int(times[1] - times[0]) if len(times) > 1 else 1
    neg = values < 0
    start = None
    run = 0
    for i, is_neg in enumerate(neg):
        run = run + 1 if is_neg else 0
        if run == consecutive:
            start = i - consecutive + 1
            break
    if start is None:
        horizon = int(times[-1]) + tau if len(times) else 0
        return TransientChaosResult(length=horizon, classification="still_chaotic")
    if start == 0:
        return TransientChaosResult(length=0, classification="no_chaos")
    return TransientChaosResult(length=int(times[start]), classification="transient_chaos")


@dataclass(frozen=True)
class PCAProjection:
    coordinates: np.ndarray               # (n_times, components)
    explained_variance_ratio: np.ndarray  # (components,)


def pca_project(traj: StateTrajectory, components: int) -> PCAProjection:
    """Project flattened states onto their top principal axes over time."""
    if components < 1:
        raise ValueError("components must be >= 1")
    if len(traj) < components + 1:
        raise ValueError("trajectory too short for requested components")
    flat = traj.states.reshape(len(traj), -1)
    centered = flat - flat.mean(axis=0, keepdims=True)
    if not np.any(np.abs(centered) > 0):
        raise DegenerateEnsembleError("constant trajectory")
    _, sv, vt = np.linalg.svd(centered, full_matrices=False)
    coords = centered @ vt[:components].T
    ratio = (sv[:components] ** 2) / np.square(sv).sum()
    return PCAProjection(coordinates=coords, explained_variance_ratio=ratio)


def write_series_csv(series, path) -> None:
    """CSV with header t,value; floats use shortest round-trip formatting."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,value\n")
        for t, v in zip(series.times, series.values):
            fh.write(f"{int(t)},{float(v)!r}\n")
