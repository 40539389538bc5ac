"""Fixed-reservoir linear readouts over trajectory windows.

Ridge regression drives the handwriting task (two output nodes emitting pen
directions), softmax regression drives masked-token prediction, and
layer_sweep fits an independent readout at each time step to trace how task
information moves through the transient.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .encoder import StateTrajectory


class ReadoutError(ValueError):
    pass


class TrainingInstabilityError(RuntimeError):
    pass


@dataclass(frozen=True)
class ReadoutModel:
    weights: np.ndarray    # (state_dim, output_dim)
    intercept: np.ndarray  # (output_dim,)
    kind: str = "linear"   # linear | softmax
    window: Optional[tuple] = None  # (t0, delta_t) the model was trained on

    def predict(self, states: np.ndarray) -> np.ndarray:
        return np.asarray(states, dtype=np.float64) @ self.weights + self.intercept

    def predict_proba(self, states: np.ndarray) -> np.ndarray:
        logits = self.predict(states)
        logits -= logits.max(axis=-1, keepdims=True)
        e = np.exp(logits)
        return e / e.sum(axis=-1, keepdims=True)

    def predict_class(self, states: np.ndarray) -> np.ndarray:
        return self.predict(states).argmax(axis=-1)


@dataclass(frozen=True)
class LetterPath:
    """Stroke polyline in arbitrary units."""

    points: np.ndarray  # (n, 2)
    label: str = ""

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise ValueError("path needs at least 2 (x, y) points")
        object.__setattr__(self, "points", pts)
        if np.linalg.norm(np.diff(pts, axis=0), axis=1).sum() == 0:
            raise ValueError("degenerate path: zero total length")


# Schematic block-letter outlines (stand-ins for font-derived paths).
LETTER_U = LetterPath(label="U", points=np.array([
    [0.0, 1.0], [0.0, 0.30], [0.05, 0.12], [0.20, 0.02], [0.50, 0.0],
    [0.80, 0.02], [0.95, 0.12], [1.0, 0.30], [1.0, 1.0],
]))
LETTER_S = LetterPath(label="S", points=np.array([
    [0.95, 0.90], [0.70, 1.0], [0.30, 1.0], [0.05, 0.88], [0.05, 0.62],
    [0.30, 0.52], [0.70, 0.48], [0.95, 0.38], [0.95, 0.12], [0.70, 0.0],
    [0.30, 0.0], [0.05, 0.10],
]))


def load_letter_path(path, label: str = "") -> LetterPath:
    """Polyline file: one `x y` pair per line."""
    pts = np.loadtxt(path, ndmin=2)
    return LetterPath(points=pts, label=label)


@dataclass(frozen=True)
class HandwritingTargets:
    directions: np.ndarray   # (delta_t, 2) pen direction v_t
    accumulated: np.ndarray  # (delta_t, 2) running sum p_t

    def __len__(self):
        return len(self.directions)


def letter_targets(path: LetterPath, delta_t: int) -> HandwritingTargets:
    """Pen directions from an arc-length-uniform resampling into delta_t+1 points."""
    if delta_t < 1:
        raise ValueError("delta_t must be >= 1")
    pts = path.points
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    total = arc[-1]
    if total == 0:
        raise ValueError("degenerate path: zero total length")
    s = np.linspace(0.0, total, delta_t + 1)
    resampled = np.column_stack([np.interp(s, arc, pts[:, 0]),
                                 np.interp(s, arc, pts[:, 1])])
    directions = np.diff(resampled, axis=0)
    return HandwritingTargets(directions=directions,
                              accumulated=np.cumsum(directions, axis=0))


def fit_ridge(states: np.ndarray, targets: np.ndarray, ridge: float = 1e-6,
              window: Optional[tuple] = None) -> ReadoutModel:
    """Regularized least squares with an unpenalized intercept.

    Solves (Xc' Xc + ridge I) W = Xc' Yc on mean-centered data; the ridge
    penalty multiplies the identity directly (no sample-count scaling).
    """
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    x = np.asarray(states, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    if x.ndim != 2 or len(x) != len(y) or len(x) < 1:
        raise ValueError("states and targets must be matched non-empty 2-d arrays")
    x_mean, y_mean = x.mean(axis=0), y.mean(axis=0)
    xc, yc = x - x_mean, y - y_mean
    gram = xc.T @ xc + ridge * np.eye(x.shape[1])
    try:
        weights = np.linalg.solve(gram, xc.T @ yc)
    except np.linalg.LinAlgError:
        raise ReadoutError("singular normal equations; use ridge > 0") from None
    if not np.all(np.isfinite(weights)):
        raise ReadoutError("non-finite solution; use ridge > 0")
    return ReadoutModel(weights=weights, intercept=y_mean - x_mean @ weights,
                        kind="linear", window=window)


def nmse(outputs: np.ndarray, targets: np.ndarray) -> float:
    """Squared error over the window normalized by the squared target norm."""
    out = np.asarray(outputs, dtype=np.float64)
    tgt = np.asarray(targets, dtype=np.float64)
    if out.shape != tgt.shape:
        raise ValueError(f"shape mismatch {out.shape} vs {tgt.shape}")
    denom = np.square(tgt).sum()
    if denom == 0:
        raise ValueError("zero-norm target")
    return float(np.square(out - tgt).sum() / denom)


def train_eval_split(n: int, seed: int, train_fraction: float = 0.5):
    """Disjoint index split, deterministic in the seed."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    order = np.random.default_rng(seed).permutation(n)
    n_train = max(1, min(n - 1, int(round(train_fraction * n))))
    return np.sort(order[:n_train]), np.sort(order[n_train:])


def _window_states(traj: StateTrajectory, t0: int, delta_t: int) -> Optional[np.ndarray]:
    """Flattened states at t0..t0+delta_t-1, or None if not fully recorded."""
    index = {int(t): i for i, t in enumerate(traj.times)}
    rows = []
    for t in range(t0, t0 + delta_t):
        if t not in index:
            return None
        rows.append(traj.states[index[t]].ravel())
    return np.asarray(rows)


def handwriting_sweep(trajectories: Sequence[StateTrajectory], labels,
                      letters, t0_grid, delta_t_grid, ridge: float = 1e-6,
                      seed: int = 0, train_fraction: float = 0.5) -> dict:
    """Evaluation NMSE of one shared two-output readout per (t0, delta_t) cell.

    Every training sentence contributes its window states with the
    class-appropriate letter's pen directions as targets; evaluation averages
    per-sentence NMSE.  Cells any trajectory cannot cover are marked NaN.
    Returns {(t0, delta_t): nmse}.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if set(np.unique(labels)) - {0, 1}:
        raise ValueError("labels must be binary 0/1")
    if len(np.unique(labels)) < 2:
        raise ValueError("both classes must be present")
    if len(trajectories) != len(labels):
        raise ValueError("one label per trajectory required")
    train_idx, eval_idx = train_eval_split(len(labels), seed, train_fraction)
    result = {}
    for dt in delta_t_grid:
        targets_by_class = [letter_targets(letters[0], dt).directions,
                            letter_targets(letters[1], dt).directions]
        for t0 in t0_grid:
            windows = [_window_states(traj, t0, dt) for traj in trajectories]
            if any(w is None for w in windows):
                result[(t0, dt)] = float("nan")
                continue
            x = np.concatenate([windows[i] for i in train_idx])
            y = np.concatenate([targets_by_class[labels[i]] for i in train_idx])
            model = fit_ridge(x, y, ridge=ridge, window=(t0, dt))
            errors = [nmse(model.predict(windows[i]), targets_by_class[labels[i]])
                      for i in eval_idx]
            result[(t0, dt)] = float(np.mean(errors))
    return result


def write_error_map_csv(error_map: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t0,delta_t,nmse\n")
        for (t0, dt), value in sorted(error_map.items()):
            fh.write(f"{t0},{dt},{float(value)!r}\n")


def softmax_loss_and_grad(weights, intercept, states, labels, classes, l2):
    """Mean cross-entropy with L2 on weights, plus gradients."""
    n = len(states)
    logits = states @ weights + intercept
    logits = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(logits)
    probs = e / e.sum(axis=1, keepdims=True)
    nll = -np.log(probs[np.arange(n), labels]).mean()
    loss = nll + 0.5 * l2 * np.square(weights).sum()
    delta = probs.copy()
    delta[np.arange(n), labels] -= 1.0
    grad_w = states.T @ delta / n + l2 * weights
    grad_b = delta.mean(axis=0)
    return loss, grad_w, grad_b


def fit_softmax(states, labels, classes: int, l2: float = 1e-4,
                epochs: int = 200, step: float = 0.1) -> ReadoutModel:
    """Multinomial logistic readout by deterministic full-batch gradient descent.

    Raises TrainingInstabilityError if the loss increases for 10 consecutive
    epochs (step too large for the data scale).
    """
    x = np.asarray(states, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if y.min() < 0 or y.max() >= classes:
        raise ValueError("labels must lie in [0, classes)")
    weights = np.zeros((x.shape[1], classes))
    intercept = np.zeros(classes)
    prev_loss = np.inf
    rising = 0
    for epoch in range(epochs):
        loss, grad_w, grad_b = softmax_loss_and_grad(weights, intercept, x, y, classes, l2)
        if loss > prev_loss + 1e-12:
            rising += 1
            if rising >= 10:
                raise TrainingInstabilityError(
                    f"loss increased for {rising} consecutive epochs at epoch {epoch}")
        else:
            rising = 0
        prev_loss = loss
        weights = weights - step * grad_w
        intercept = intercept - step * grad_b
    return ReadoutModel(weights=weights, intercept=intercept, kind="softmax")


def pearson(a, b) -> float:
    """Correlation coefficient; NaN flags a constant (undefined) side."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    sa, sb = a.std(), b.std()
    if sa == 0 or sb == 0:
        return float("nan")
    return float(((a - a.mean()) * (b - b.mean())).mean() / (sa * sb))


def layer_sweep(trajectories: Sequence[StateTrajectory], targets, times,
                task: str = "masked_token", seed: int = 0,
                train_fraction: float = 0.5, classes: Optional[int] = None,
                ridge: float = 1e-6, l2: float = 1e-4, epochs: int = 200,
                step: float = 0.1):
    """Independent readout per time step: accuracy (classification) or Pearson.

    ``targets`` is a class-ID vector for the masked_token task and a real
    vector for regression.  A NaN score flags an undefined Pearson value
    (constant predictions).  Returns (times, scores) arrays.
    """
    if task not in ("masked_token", "regression"):
        raise ValueError(f"unknown task {task!r}")
    targets = np.asarray(targets)
    train_idx, eval_idx = train_eval_split(len(trajectories), seed, train_fraction)
    index = {int(t): i for i, t in enumerate(trajectories[0].times)}
    scores = []
    for t in times:
        if t not in index:
            raise ValueError(f"time {t} not recorded in trajectories")
        states = np.asarray([traj.states[index[t]].ravel() for traj in trajectories])
        if task == "masked_token":
            n_classes = classes if classes is not None else int(targets.max()) + 1
            model = fit_softmax(states[train_idx], targets[train_idx], n_classes,
                                l2=l2, epochs=epochs, step=step)
            predicted = model.predict_class(states[eval_idx])
            scores.append(float((predicted == targets[eval_idx]).mean()))
        else:
            model = fit_ridge(states[train_idx], targets[train_idx], ridge=ridge)
            predicted = model.predict(states[eval_idx]).ravel()
            scores.append(pearson(predicted, targets[eval_idx]))
    return np.asarray(list(times), dtype=np.int64), np.asarray(scores)
