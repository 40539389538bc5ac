"""Config-driven experiment orchestration.

A flat `key = value` config (dotted sections, # comments) describes one
experiment; run_experiment executes it deterministically from the master
seed and writes CSV diagnostics plus a key: value report.  Ensemble members
are pure functions of (immutable inputs, member index), so the worker pool
size never changes any emitted byte; results are gathered in member order.
"""

import concurrent.futures
import os
import time
from dataclasses import dataclass, fields, replace

import numpy as np

from . import container as container_mod
from .dynamics import (AnalysisSeries, LLEParams, effective_dimension, encoder_map,
                       local_lyapunov, sync_offset, transient_chaos_length,
                       write_series_csv)
from .embedding import (build_vocab, embed, init_embedding_params, load_pretokenized,
                        tokenize)
from .encoder import (EncoderConfig, NumericalOverflowError, encoder_step, init_params,
                      iterate)
from .readout import LETTER_S, LETTER_U, handwriting_sweep, layer_sweep, write_error_map_csv

VERSION = "0.1.0"

KINDS = ("sync", "lle", "effdim", "transient", "handwriting", "mlm-sweep", "import-check")

# Disjoint topic pools for the synthetic two-class corpus.
WORD_POOL_A = ("river", "stone", "forest", "mountain", "valley", "meadow",
               "rain", "cloud", "moss", "cliff", "brook", "pine")
WORD_POOL_B = ("engine", "circuit", "voltage", "piston", "gear", "signal",
               "sensor", "rotor", "battery", "chassis", "relay", "servo")


class ConfigError(ValueError):
    pass


class EnsembleFailureError(RuntimeError):
    """Every ensemble member overflowed; no diagnostics were produced."""


def parse_config_text(text: str) -> dict:
    """`key = value` lines; # starts a comment; later keys override earlier."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _parse_bool(s: str) -> bool:
    if s.lower() in ("true", "1", "yes"):
        return True
    if s.lower() in ("false", "0", "no"):
        return False
    raise ConfigError(f"expected boolean, got {s!r}")


def parse_times(spec: str) -> list:
    """Comma list of ints, or start:stop:step half-open range."""
    spec = spec.strip()
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) not in (2, 3):
            raise ConfigError(f"bad range {spec!r}; use start:stop[:step]")
        start, stop = int(parts[0]), int(parts[1])
        step = int(parts[2]) if len(parts) == 3 else 1
        return list(range(start, stop, step))
    return [int(p) for p in spec.split(",") if p.strip()]


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "sync"
    seed: int = 0
    out_dir: str = "out"
    workers: int = 0  # 0 -> TDLAB_WORKERS env var, else 1

    hidden_dim: int = 64
    head_dim: int = 64
    intermediate_dim: int = 0  # 0 -> 4 * hidden_dim
    variant: str = "standard_albert"
    layernorm_epsilon: float = 1e-12

    embedding_dim: int = 16
    max_positions: int = 64
    use_positional: bool = True

    corpus_source: str = "synthetic"  # synthetic | text | pretokenized
    corpus_path: str = ""
    vocab_size: int = 64
    n_sentences: int = 20
    n_tokens: int = 32

    weights_source: str = "random_init"  # random_init | container
    weights_path: str = ""

    sync_threshold: float = 1e-5
    sync_horizon: int = 2000
    record_stride: int = 1

    lle_k: float = 1.0
    lle_tau: int = 10
    lle_horizon: int = 2000

    effdim_times: str = "0:201:10"

    transient_k: float = 1.0
    transient_tau: int = 50
    transient_horizon: int = 100000
    transient_consecutive: int = 5

    hw_t0_grid: str = "0,7,14"
    hw_dt_grid: str = "7,14,28"
    hw_ridge: float = 1e-6
    hw_train_fraction: float = 0.5

    mlm_times: str = "0:33:4"
    mlm_l2: float = 1e-4
    mlm_epochs: int = 200
    mlm_step: float = 0.1
    mlm_train_fraction: float = 0.5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"experiment.kind must be one of {KINDS}, got {self.kind!r}")
        positive = ("hidden_dim", "head_dim", "vocab_size", "n_sentences", "n_tokens",
                    "embedding_dim", "max_positions", "lle_tau", "transient_tau",
                    "transient_consecutive", "record_stride")
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        for name in ("sync_threshold", "lle_k", "transient_k"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")
        for name in ("sync_horizon", "lle_horizon", "transient_horizon"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.workers < 0:
            raise ConfigError("workers must be >= 0")
        if self.corpus_source not in ("synthetic", "text", "pretokenized"):
            raise ConfigError(f"unknown corpus.source {self.corpus_source!r}")
        if self.weights_source not in ("random_init", "container"):
            raise ConfigError(f"unknown weights.source {self.weights_source!r}")
        if self.n_tokens > self.max_positions:
            raise ConfigError("corpus.n_tokens exceeds embedding.max_positions")
        if not 0 < self.hw_train_fraction < 1 or not 0 < self.mlm_train_fraction < 1:
            raise ConfigError("train fractions must be in (0, 1)")

    @property
    def effective_workers(self) -> int:
        if self.workers > 0:
            return self.workers
        env = os.environ.get("TDLAB_WORKERS", "").strip()
        return max(1, int(env)) if env else 1

    def encoder_config(self) -> EncoderConfig:
        if self.hidden_dim % self.head_dim:
            raise ConfigError("encoder.hidden_dim must be a multiple of encoder.head_dim")
        inter = self.intermediate_dim or 4 * self.hidden_dim
        try:
            return EncoderConfig(hidden_dim=self.hidden_dim,
                                 num_heads=self.hidden_dim // self.head_dim,
                                 head_dim=self.head_dim, intermediate_dim=inter,
                                 map_variant=self.variant,
                                 layernorm_epsilon=self.layernorm_epsilon)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


# config key -> (field name, parser)
_KEY_TABLE = {
    "experiment.kind": ("kind", str),
    "experiment.seed": ("seed", int),
    "experiment.out": ("out_dir", str),
    "experiment.workers": ("workers", int),
    "encoder.hidden_dim": ("hidden_dim", int),
    "encoder.head_dim": ("head_dim", int),
    "encoder.intermediate_dim": ("intermediate_dim", int),
    "encoder.variant": ("variant", str),
    "encoder.layernorm_epsilon": ("layernorm_epsilon", float),
    "embedding.dim": ("embedding_dim", int),
    "embedding.max_positions": ("max_positions", int),
    "embedding.use_positional": ("use_positional", _parse_bool),
    "corpus.source": ("corpus_source", str),
    "corpus.path": ("corpus_path", str),
    "corpus.vocab_size": ("vocab_size", int),
    "corpus.n_sentences": ("n_sentences", int),
    "corpus.n_tokens": ("n_tokens", int),
    "weights.source": ("weights_source", str),
    "weights.path": ("weights_path", str),
    "sync.threshold": ("sync_threshold", float),
    "sync.horizon": ("sync_horizon", int),
    "sync.record_stride": ("record_stride", int),
    "lle.k": ("lle_k", float),
    "lle.tau": ("lle_tau", int),
    "lle.horizon": ("lle_horizon", int),
    "effdim.times": ("effdim_times", str),
    "transient.k": ("transient_k", float),
    "transient.tau": ("transient_tau", int),
    "transient.horizon": ("transient_horizon", int),
    "transient.consecutive": ("transient_consecutive", int),
    "handwriting.t0_grid": ("hw_t0_grid", str),
    "handwriting.dt_grid": ("hw_dt_grid", str),
    "handwriting.ridge": ("hw_ridge", float),
    "handwriting.train_fraction": ("hw_train_fraction", float),
    "mlm.times": ("mlm_times", str),
    "mlm.l2": ("mlm_l2", float),
    "mlm.epochs": ("mlm_epochs", int),
    "mlm.step": ("mlm_step", float),
    "mlm.train_fraction": ("mlm_train_fraction", float),
}
_FIELD_TO_KEY = {f: k for k, (f, _) in _KEY_TABLE.items()}


def config_from_mapping(mapping: dict, **overrides) -> ExperimentConfig:
    kwargs = {}
    for key, value in mapping.items():
        if key not in _KEY_TABLE:
            raise ConfigError(f"unknown config key {key!r}")
        name, parse = _KEY_TABLE[key]
        try:
            kwargs[name] = parse(value)
        except (ValueError, TypeError):
            raise ConfigError(f"bad value for {key}: {value!r}") from None
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path, **overrides) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return config_from_mapping(parse_config_text(text), **overrides)


def config_to_text(config: ExperimentConfig) -> str:
    """Full resolved config; feeding this back reproduces the run."""
    lines = []
    for f in fields(ExperimentConfig):
        value = getattr(config, f.name)
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{_FIELD_TO_KEY[f.name]} = {value}")
    return "\n".join(lines) + "\n"


def member_seed(master: int, index: int, stream: int = 0) -> int:
    """Integer sub-seed for (master seed, member index) RNG streams."""
    return int(np.random.SeedSequence([master, index, stream]).generate_state(1)[0])


@dataclass
class RunReport:
    kind: str
    config_text: str
    series: dict          # name -> AnalysisSeries
    tables: dict          # name -> (header: list[str], rows: list[tuple])
    summary: dict         # flat key -> value
    wall_clock: float
    version: str = VERSION
    csv_paths: list = None


def _quartiles(values) -> dict:
    """Linear-interpolation quartiles, the numpy default convention."""
    v = np.asarray(values, dtype=np.float64)
    if len(v) == 0:
        return {}
    q1, q2, q3 = np.percentile(v, [25, 50, 75])
    return {"mean": float(v.mean()), "q1": float(q1), "median": float(q2),
            "q3": float(q3), "min": float(v.min()), "max": float(v.max())}


def make_synthetic_corpus(n_sentences: int, n_tokens: int, seed: int,
                          two_class: bool = False):
    """Sentences of pool words; two_class alternates disjoint topic pools."""
    rng = np.random.default_rng([seed, 0xC0])
    lines, labels = [], []
    for i in range(n_sentences):
        label = i % 2 if two_class else 0
        pool = (WORD_POOL_A, WORD_POOL_B)[label] if two_class else WORD_POOL_A + WORD_POOL_B
        words = rng.choice(len(pool), size=n_tokens)
        lines.append(" ".join(pool[w] for w in words))
        labels.append(label)
    return lines, labels


def prepare_inputs(config: ExperimentConfig):
    """Parameters plus the tokenized sentence ensemble (ids, labels, vocab)."""
    two_class = config.kind == "handwriting"
    root = np.random.SeedSequence(config.seed)
    params_seed, embed_seed = (int(c.generate_state(1)[0]) for c in root.spawn(2))

    enc_cfg = config.encoder_config()
    if config.weights_source == "container":
        if not config.weights_path or not os.path.exists(config.weights_path):
            raise ConfigError(f"weights.path {config.weights_path!r} does not exist")
        enc_params, emb_params = container_mod.import_weights(
            config.weights_path, head_dim=config.head_dim,
            layernorm_epsilon=config.layernorm_epsilon)
        emb_params = replace(emb_params, use_positional=config.use_positional)
    else:
        enc_params = init_params(enc_cfg, params_seed)
        emb_params = None  # built after the vocabulary is known

    labels = None
    vocab = None
    if config.corpus_source == "pretokenized":
        if not config.corpus_path or not os.path.exists(config.corpus_path):
            raise ConfigError(f"corpus.path {config.corpus_path!r} does not exist")
        sentences = load_pretokenized(config.corpus_path)[: config.n_sentences]
        if len(sentences) < config.n_sentences:
            raise ConfigError(f"pretokenized corpus has fewer than {config.n_sentences} sentences")
        sentences = [s[: config.n_tokens] for s in sentences]
        if two_class:
            labels = [i % 2 for i in range(len(sentences))]
    else:
        if config.corpus_source == "text":
            if not config.corpus_path or not os.path.exists(config.corpus_path):
                raise ConfigError(f"corpus.path {config.corpus_path!r} does not exist")
            with open(config.corpus_path, encoding="utf-8") as fh:
                lines = [ln.strip() for ln in fh if ln.strip()]
            if len(lines) < config.n_sentences:
                raise ConfigError(f"corpus has {len(lines)} sentences, need {config.n_sentences}")
            lines = lines[: config.n_sentences]
            labels = [i % 2 for i in range(len(lines))] if two_class else None
        else:
            lines, labels = make_synthetic_corpus(config.n_sentences, config.n_tokens,
                                                  config.seed, two_class)
            labels = labels if two_class else None
        vocab = build_vocab(lines, config.vocab_size)
        sentences = [tokenize(line, vocab, config.n_tokens) for line in lines]

    if emb_params is None:
        vocab_size = vocab.size if vocab is not None else config.vocab_size
        emb_params = init_embedding_params(vocab_size, config.embedding_dim,
                                           enc_cfg.hidden_dim, config.max_positions,
                                           embed_seed, config.use_positional)
    return enc_params, emb_params, sentences, labels, vocab


def _pool_map(job, n_members: int, workers: int):
    """Order-preserving map over member indices; jobs must be pure."""
    if workers <= 1:
        return [job(i) for i in range(n_members)]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, range(n_members)))


def _mean_over_members(per_member_series):
    """Mean at each time over the members that reached it."""
    sums, counts = {}, {}
    for series in per_member_series:
        for t, v in zip(series.times, series.values):
            sums[int(t)] = sums.get(int(t), 0.0) + float(v)
            counts[int(t)] = counts.get(int(t), 0) + 1
    times = sorted(sums)
    return AnalysisSeries(times=times, values=[sums[t] / counts[t] for t in times])


def _run_sync(config, enc_params, emb_params, sentences, labels):
    threshold, horizon = config.sync_threshold, config.sync_horizon
    stride = config.record_stride

    def job(i):
        x = embed(sentences[i], emb_params)
        times, values = [], []
        truncated = False
        for t in range(horizon + 1):
            centered = x - x.mean(axis=0, keepdims=True)
            if t % stride == 0:
                times.append(t)
                values.append(float(np.square(centered).sum() / x.shape[0]))
            if t == horizon:
                break
            try:
                x = encoder_step(x, enc_params)
            except NumericalOverflowError:
                truncated = True
                break
        return AnalysisSeries(times=times, values=values, truncated=truncated)

    members = _pool_map(job, len(sentences), config.effective_workers)
    offsets = [sync_offset(s, threshold) for s in members]
    reached = [o for o in offsets if o is not None]
    rows = [(i, "" if offsets[i] is None else offsets[i], int(members[i].truncated))
            for i in range(len(members))]
    truncated_count = sum(m.truncated for m in members)
    if truncated_count == len(members):
        raise EnsembleFailureError("all sync members overflowed")
    summary = {"members": len(members), "synchronized": len(reached),
               "truncated_members": truncated_count}
    summary.update({f"offset_{k}": v for k, v in _quartiles(reached).items()})
    series = {"deviation_mean": _mean_over_members(members)}
    tables = {"offsets": (["member", "offset", "truncated"], rows)}
    return series, tables, summary


def _run_lle(config, enc_params, emb_params, sentences, labels,
             k=None, tau=None, horizon=None):
    k = config.lle_k if k is None else k
    tau = config.lle_tau if tau is None else tau
    horizon = config.lle_horizon if horizon is None else horizon
    fmap = encoder_map(enc_params)

    def job(i):
        x0 = embed(sentences[i], emb_params)
        return local_lyapunov(fmap, x0, LLEParams(k=k, tau=tau, horizon=horizon,
                                                  seed=member_seed(config.seed, i)))
    return _pool_map(job, len(sentences), config.effective_workers)


def _lle_outputs(config, members):
    truncated_count = sum(m.truncated for m in members)
    if all(len(m.times) == 0 for m in members):
        raise EnsembleFailureError("all LLE members overflowed before the first sample")
    rows = []
    for i, m in enumerate(members):
        for t, raw, ps in zip(m.times, m.raw, m.per_step):
            rows.append((i, int(t), repr(float(raw)), repr(float(ps))))
    per_step = [AnalysisSeries(times=m.times, values=m.per_step) for m in members if len(m)]
    raw = [AnalysisSeries(times=m.times, values=m.raw) for m in members if len(m)]
    means = [float(m.per_step.mean()) for m in members if len(m)]
    summary = {"members": len(members), "truncated_members": truncated_count}
    summary.update({f"per_step_mean_{k}": v for k, v in _quartiles(means).items()})
    series = {"lle_per_step_mean": _mean_over_members(per_step),
              "lle_raw_mean": _mean_over_members(raw)}
    tables = {"lle_members": (["member", "t", "raw", "per_step"], rows)}
    return series, tables, summary


def _run_effdim(config, enc_params, emb_params, sentences, labels):
    times = parse_times(config.effdim_times)
    if not times:
        raise ConfigError("effdim.times is empty")
    wanted = sorted(set(times))
    wanted_set = set(wanted)
    horizon = max(wanted)

    def job(i):
        x = embed(sentences[i], emb_params)
        states = {}
        for t in range(horizon + 1):
            if t in wanted_set:
                states[t] = x
            if t == horizon:
                break
            try:
                x = encoder_step(x, enc_params)
            except NumericalOverflowError:
                return None  # member dropped from every ensemble
        return states

    results = _pool_map(job, len(sentences), config.effective_workers)
    collected = [r for r in results if r is not None]
    failures = len(results) - len(collected)
    if len(collected) < 2:
        raise EnsembleFailureError("fewer than 2 effdim members survived")
    values = []
    for t in wanted:
        ensemble = np.stack([states[t] for states in collected])
        values.append(effective_dimension(ensemble))
    summary = {"members": len(collected), "truncated_members": failures,
               "neff_max": float(max(values)), "neff_final": float(values[-1])}
    series = {"neff": AnalysisSeries(times=wanted, values=values)}
    return series, {}, summary


def _run_transient(config, enc_params, emb_params, sentences, labels):
    members = _run_lle(config, enc_params, emb_params, sentences, labels,
                       k=config.transient_k, tau=config.transient_tau,
                       horizon=config.transient_horizon)
    survivors = [m for m in members if len(m)]
    if not survivors:
        raise EnsembleFailureError("all transient members overflowed before the first sample")
    results = [transient_chaos_length(m, config.transient_consecutive) if len(m) else None
               for m in members]
    rows = [(i, "" if r is None else r.length,
             "overflow" if r is None else r.classification, int(members[i].truncated))
            for i, r in enumerate(results)]
    counts = {}
    for r in results:
        key = "overflow" if r is None else r.classification
        counts[key] = counts.get(key, 0) + 1
    lengths = [r.length for r in results if r is not None and r.classification == "transient_chaos"]
    summary = {"members": len(members),
               "truncated_members": sum(m.truncated for m in members)}
    summary.update({f"count_{k}": v for k, v in sorted(counts.items())})
    summary.update({f"length_{k}": v for k, v in _quartiles(lengths).items()})
    tables = {"transient": (["member", "length", "classification", "truncated"], rows)}
    return {}, tables, summary


def _record_trajectories(config, enc_params, emb_params, sentences, horizon):
    def job(i):
        x0 = embed(sentences[i], emb_params)
        return iterate(x0, enc_params, horizon, stride=1)
    return _pool_map(job, len(sentences), config.effective_workers)


def _run_handwriting(config, enc_params, emb_params, sentences, labels):
    t0_grid = parse_times(config.hw_t0_grid)
    dt_grid = parse_times(config.hw_dt_grid)
    if not t0_grid or not dt_grid:
        raise ConfigError("handwriting grids must be non-empty")
    horizon = max(t0_grid) + max(dt_grid)
    try:
        trajectories = _record_trajectories(config, enc_params, emb_params,
                                            sentences, horizon)
    except NumericalOverflowError as exc:
        raise EnsembleFailureError(f"trajectory overflow: {exc}") from None
    error_map = handwriting_sweep(trajectories, labels, (LETTER_U, LETTER_S),
                                  t0_grid, dt_grid, ridge=config.hw_ridge,
                                  seed=member_seed(config.seed, 0, stream=1),
                                  train_fraction=config.hw_train_fraction)
    finite = {cell: v for cell, v in error_map.items() if np.isfinite(v)}
    if not finite:
        raise EnsembleFailureError("no handwriting cell could be evaluated")
    best = min(finite, key=finite.get)
    summary = {"cells": len(error_map), "evaluated_cells": len(finite),
               "class_0": int(sum(1 for l in labels if l == 0)),
               "class_1": int(sum(1 for l in labels if l == 1)),
               "best_t0": best[0], "best_delta_t": best[1],
               "best_nmse": float(finite[best]),
               "worst_nmse": float(max(finite.values()))}
    tables = {"nmse_map": (["t0", "delta_t", "nmse"],
                           [(t0, dt, repr(float(v))) for (t0, dt), v in sorted(error_map.items())])}
    return {}, tables, summary


def _run_mlm_sweep(config, enc_params, emb_params, sentences, labels, vocab):
    times = parse_times(config.mlm_times)
    if not times:
        raise ConfigError("mlm.times is empty")
    if vocab is None:
        raise ConfigError("mlm-sweep needs a tokenized corpus (not pretokenized ids)")
    masked, original = [], []
    for i, ids in enumerate(sentences):
        rng = np.random.default_rng([config.seed, i, 0xA5])
        pos = int(rng.integers(len(ids)))
        ids = ids.copy()
        original.append(int(ids[pos]))
        ids[pos] = vocab.mask_id
        masked.append(ids)
    try:
        trajectories = _record_trajectories(config, enc_params, emb_params,
                                            masked, max(times))
    except NumericalOverflowError as exc:
        raise EnsembleFailureError(f"trajectory overflow: {exc}") from None
    ts, scores = layer_sweep(trajectories, original, times, task="masked_token",
                             seed=member_seed(config.seed, 0, stream=2),
                             train_fraction=config.mlm_train_fraction,
                             classes=vocab.size, l2=config.mlm_l2,
                             epochs=config.mlm_epochs, step=config.mlm_step)
    summary = {"members": len(sentences), "classes": vocab.size}
    if np.isfinite(scores).any():
        best = int(np.nanargmax(scores))
        summary.update({"best_t": int(ts[best]), "best_accuracy": float(scores[best])})
    series = {"accuracy": AnalysisSeries(times=ts, values=scores)}
    return series, {}, summary


def _run_import_check(config):
    if not config.weights_path or not os.path.exists(config.weights_path):
        raise ConfigError(f"weights.path {config.weights_path!r} does not exist")
    enc_params, emb_params = container_mod.import_weights(
        config.weights_path, head_dim=config.head_dim,
        layernorm_epsilon=config.layernorm_epsilon)
    tensors = container_mod.read_container(config.weights_path)
    rows = [(name, "x".join(map(str, arr.shape)), str(arr.dtype))
            for name, arr in tensors.items()]
    cfg = enc_params.config
    summary = {"tensors": len(tensors), "hidden_dim": cfg.hidden_dim,
               "num_heads": cfg.num_heads, "intermediate_dim": cfg.intermediate_dim,
               "vocab_size": emb_params.vocab_size,
               "embedding_dim": emb_params.token_table.shape[1],
               "max_positions": emb_params.max_positions, "valid": True}
    return {}, {"manifest": (["name", "shape", "dtype"], rows)}, summary


def run_experiment(config: ExperimentConfig, write: bool = True) -> RunReport:
    """Execute the configured experiment; optionally export CSVs and report."""
    start = time.monotonic()
    if config.kind == "import-check":
        series, tables, summary = _run_import_check(config)
    else:
        enc_params, emb_params, sentences, labels, vocab = prepare_inputs(config)
        if config.kind == "sync":
            series, tables, summary = _run_sync(config, enc_params, emb_params, sentences, labels)
        elif config.kind == "lle":
            members = _run_lle(config, enc_params, emb_params, sentences, labels)
            series, tables, summary = _lle_outputs(config, members)
        elif config.kind == "effdim":
            series, tables, summary = _run_effdim(config, enc_params, emb_params, sentences, labels)
        elif config.kind == "transient":
            series, tables, summary = _run_transient(config, enc_params, emb_params, sentences, labels)
        elif config.kind == "handwriting":
            series, tables, summary = _run_handwriting(config, enc_params, emb_params, sentences, labels)
        elif config.kind == "mlm-sweep":
            series, tables, summary = _run_mlm_sweep(config, enc_params, emb_params,
                                                     sentences, labels, vocab)
        else:  # pragma: no cover - guarded by config validation
            raise ConfigError(f"unhandled kind {config.kind!r}")
    report = RunReport(kind=config.kind, config_text=config_to_text(config),
                       series=series, tables=tables, summary=summary,
                       wall_clock=time.monotonic() - start)
    if write:
        export_report(report, config.out_dir)
    return report


def export_report(report: RunReport, out_dir) -> list:
    """Write CSVs, the resolved config, and report.txt; overwrites in place."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name, series in report.series.items():
        path = os.path.join(out_dir, f"{name}.csv")
        write_series_csv(series, path)
        paths.append(path)
    for name, (header, rows) in report.tables.items():
        path = os.path.join(out_dir, f"{name}.csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(str(c) for c in row) + "\n")
        paths.append(path)
    config_path = os.path.join(out_dir, "resolved_config.cfg")
    with open(config_path, "w", encoding="utf-8") as fh:
        fh.write(report.config_text)
    with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(f"kind: {report.kind}\n")
        fh.write(f"version: {report.version}\n")
        fh.write(f"wall_clock_seconds: {report.wall_clock:.3f}\n")
        fh.write(f"resolved_config: {config_path}\n")
        for path in paths:
            fh.write(f"csv: {path}\n")
        for key in sorted(report.summary):
            fh.write(f"{key}: {report.summary[key]}\n")
    report.csv_paths = paths
    return paths
