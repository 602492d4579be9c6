"""Dataset ingestion, experiment orchestration and the leakage evaluator.

Everything here is driven by plain JSON-able dicts so experiment reports are
self-contained: a report echoes its configuration and seed and can be re-run
from them.  Timing fields are excluded from the reproducibility hash since
they depend on the machine.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateProperty,
    EmptyDataset,
    InvalidSpec,
    ParseError,
)
from .neural import (
    AffineLayer,
    Mlp,
    auc,
    cross_entropy,
    head_backward,
    output_gradient,
    predict_head,
    sgd_step,
    sgld_step,
)
from .protocol import (
    TrainConfig,
    VerticalData,
    batch_row_counts,
    epoch_permutation,
    hidden_features,
    init_model_parameters,
    predict_proba,
    run_session,
)

_MISSING_TOKENS = {"", "na", "nan", "null", "none"}


# -- datasets ---------------------------------------------------------------------


@dataclass
class Dataset:
    features: np.ndarray       # (n, d) standardized
    labels: np.ndarray         # (n,) in {0, 1}
    columns: list              # feature column names after one-hot encoding
    mean: np.ndarray
    std: np.ndarray
    dropped_rows: int = 0

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def d(self) -> int:
        return self.features.shape[1]


def _is_missing(token: str) -> bool:
    return token.strip().lower() in _MISSING_TOKENS


def load_csv(path, label_column: str) -> Dataset:
    """Parse a headed CSV: numeric columns as reals, categorical columns
    one-hot encoded (sorted category order), all columns standardized.
    Rows with missing values are dropped and counted."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDataset(f"{path} has no header row") from None
        rows = list(reader)
    if label_column not in header:
        raise ParseError(f"label column {label_column!r} not in header {header}")
    label_idx = header.index(label_column)

    kept, dropped = [], 0
    for row in rows:
        if len(row) != len(header):
            raise ParseError(f"row {len(kept) + dropped + 2} has {len(row)} fields, "
                             f"expected {len(header)}")
        if any(_is_missing(tok) for tok in row):
            dropped += 1
        else:
            kept.append(row)
    if not kept:
        raise EmptyDataset(f"{path} has no usable rows")

    feature_names = [name for i, name in enumerate(header) if i != label_idx]
    raw_cols = {name: [] for name in feature_names}
    labels = []
    for r, row in enumerate(kept):
        for i, name in enumerate(header):
            if i == label_idx:
                labels.append(row[i])
            else:
                raw_cols[name].append(row[i])
    try:
        labels = np.array([float(v) for v in labels])
    except ValueError as exc:
        raise ParseError(f"label column {label_column!r} is not numeric: {exc}") from exc
    if not np.all(np.isin(labels, (0.0, 1.0))):
        raise ParseError(f"label column {label_column!r} must be binary 0/1")

    columns, blocks = [], []
    for name in feature_names:
        values = raw_cols[name]
        try:
            blocks.append(np.array([float(v) for v in values]).reshape(-1, 1))
            columns.append(name)
        except ValueError:
            categories = sorted(set(values))
            for cat in categories:
                blocks.append(np.array([1.0 if v == cat else 0.0 for v in values])
                              .reshape(-1, 1))
                columns.append(f"{name}={cat}")
    features = np.hstack(blocks)
    mean = features.mean(axis=0)
    std = features.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    return Dataset(features=(features - mean) / std, labels=labels.astype(np.int64),
                   columns=columns, mean=mean, std=std, dropped_rows=dropped)


def train_test_indices(n: int, train_fraction: float, seed: int):
    """Deterministic shuffled split; train side takes floor(fraction * n) rows."""
    if not 0 < train_fraction < 1:
        raise InvalidSpec("train fraction must be in (0, 1)")
    perm = np.random.default_rng([seed, 9000]).permutation(n)
    cut = int(math.floor(train_fraction * n))
    return perm[:cut], perm[cut:]


def equal_halves(d: int) -> tuple[int, int]:
    """Default vertical split: equal partial features, remainder to A."""
    return (d + 1) // 2, d // 2


def split_vertical(ds: Dataset, columns_a: list | None = None,
                   d_a: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Column indices for the two parties: an explicit column-name list for A,
    a leading-block width, or equal halves by default."""
    if columns_a is not None:
        missing = [c for c in columns_a if c not in ds.columns]
        if missing:
            raise InvalidSpec(f"unknown columns for party A: {missing}")
        idx_a = np.array([ds.columns.index(c) for c in columns_a])
        idx_b = np.array([i for i in range(ds.d) if i not in set(idx_a)])
        if len(idx_a) == 0 or len(idx_b) == 0:
            raise InvalidSpec("each party needs at least one column")
        return idx_a, idx_b
    d_a = d_a if d_a is not None else equal_halves(ds.d)[0]
    return np.arange(d_a), np.arange(d_a, ds.d)


def make_vertical_data(ds: Dataset, train_fraction: float, seed: int,
                       d_a: int | None = None,
                       columns_a: list | None = None) -> VerticalData:
    idx_a, idx_b = split_vertical(ds, columns_a=columns_a, d_a=d_a)
    tr, te = train_test_indices(ds.n, train_fraction, seed)
    x, y = ds.features, ds.labels
    return VerticalData(
        x_a_train=x[np.ix_(tr, idx_a)], x_b_train=x[np.ix_(tr, idx_b)],
        y_train=y[tr],
        x_a_test=x[np.ix_(te, idx_a)], x_b_test=x[np.ix_(te, idx_b)],
        y_test=y[te],
    )


# -- synthetic data with a planted property -----------------------------------------


def gen_synth(rows: int, d_a: int, d_b: int, seed: int = 1,
              class_shift: float = 1.2, property_shift: float = 1.5) -> Dataset:
    """Two Gaussian blobs per class split across both parties, plus a planted
    binary property: the continuous 'amount' column (held by B) is bimodal and
    correlated with two more B columns, so the first hidden layer encodes it.

    Columns are pre-standardized; the property ground truth is recovered by a
    median threshold on 'amount'.
    """
    if d_b < 3:
        raise InvalidSpec("synthetic generator needs at least 3 columns at B")
    rng = np.random.default_rng(seed)
    d = d_a + d_b
    y = rng.integers(0, 2, size=rows)
    x = rng.standard_normal((rows, d))
    y_signed = 2.0 * y - 1.0
    # class signal on the first half of each party's block
    class_cols = list(range(0, max(1, d_a // 2))) + list(range(d_a, d_a + max(1, d_b // 2)))
    x[:, class_cols] += np.outer(y_signed, np.full(len(class_cols), class_shift / 2))
    # planted property, independent of the class
    prop = rng.integers(0, 2, size=rows)
    p_signed = 2.0 * prop - 1.0
    amount_idx = d - 1
    x[:, amount_idx] = rng.standard_normal(rows) * 0.3 + p_signed * property_shift
    for idx in (d - 2, d - 3):
        x[:, idx] += p_signed * (property_shift / 2)
    mean, std = x.mean(axis=0), x.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    columns = [f"a{i}" for i in range(d_a)] + [f"b{i}" for i in range(d_b)]
    columns[amount_idx] = "amount"
    return Dataset(features=(x - mean) / std, labels=y.astype(np.int64),
                   columns=columns, mean=mean, std=std)


# -- monolithic plaintext baseline ----------------------------------------------------


def train_monolithic(cfg: TrainConfig, data: VerticalData):
    """Plaintext mini-batch training of the unsplit model.

    Initial parameters, batch order and update rules mirror the protocol, so
    seeded float-path comparisons are exact and fixed-point runs differ only
    by quantization.
    """
    theta, first_bias, stack, head = init_model_parameters(cfg)
    body = Mlp([AffineLayer(theta, first_bias, cfg.activations[0])] + stack)
    x_train = np.concatenate([data.x_a_train, data.x_b_train], axis=1)
    x_test = np.concatenate([data.x_a_test, data.x_b_test], axis=1)
    n = len(data.y_train)
    noisy_server = cfg.optimizer == "sgld"
    noisy_all = noisy_server and cfg.sgld_scope == "all"
    rng = np.random.default_rng([cfg.effective_noise_seed, 40])

    def step(param, grad, batch, noisy):
        if noisy:
            return sgld_step(param, grad * n, cfg.learning_rate, batch, rng)
        return sgd_step(param, grad, cfg.learning_rate, batch)

    history = []
    for epoch in range(cfg.epochs):
        perm = epoch_permutation(cfg.seed, epoch, n)
        loss_sum, offset = 0.0, 0
        for nb in batch_row_counts(n, cfg.batch_size):
            rows = perm[offset : offset + nb]
            offset += nb
            xb, yb = x_train[rows], data.y_train[rows]
            h, cache = body.forward(xb)
            probs = predict_head(h, head)
            loss_sum += cross_entropy(probs, yb) * nb
            logit_grad = output_gradient(probs, yb)
            dw_h, db_h, dh = head_backward(h, head, logit_grad)
            grads, _ = body.backward(cache, dh)
            head.weights = step(head.weights, dw_h, nb, noisy_all)
            head.bias = step(head.bias, db_h, nb, noisy_all)
            for i, (layer, (dw, db)) in enumerate(zip(body.layers, grads)):
                # first-layer weights belong to the clients; every bias and all
                # deeper weights live on the server
                layer.weights = step(layer.weights, dw, nb,
                                     noisy_all if i == 0 else noisy_server)
                layer.bias = step(layer.bias, db, nb, noisy_server)
        metrics = {"epoch": epoch, "train_loss": loss_sum / n}
        if cfg.eval_each_epoch and len(x_test):
            h, _ = body.forward(x_test)
            probs = predict_head(h, head)
            metrics["test_loss"] = cross_entropy(probs, data.y_test)
            scores = probs[:, 0] if probs.shape[1] == 1 else probs[:, 1]
            if len(np.unique(data.y_test)) == 2:
                metrics["test_auc"] = auc(scores, data.y_test)
        history.append(metrics)
        if cfg.early_stop_loss is not None and metrics["train_loss"] <= cfg.early_stop_loss:
            break
    return body, head, history


def monolithic_predict(body: Mlp, head: AffineLayer, x: np.ndarray) -> np.ndarray:
    h, _ = body.forward(x)
    return predict_head(h, head)


# -- logistic-regression property attack ------------------------------------------------


def fit_logreg(x: np.ndarray, y: np.ndarray, lr: float = 0.1, epochs: int = 500):
    """Full-batch gradient-descent logistic regression on standardized inputs."""
    mean, std = x.mean(axis=0), x.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    xs = (x - mean) / std
    w = np.zeros(x.shape[1])
    b = 0.0
    for _ in range(epochs):
        z = xs @ w + b
        p = 1.0 / (1.0 + np.exp(-np.clip(z, -50, 50)))
        grad = p - y
        w -= lr * (xs.T @ grad) / len(y)
        b -= lr * float(grad.mean())
    return {"w": w, "b": b, "mean": mean, "std": std}


def logreg_scores(model: dict, x: np.ndarray) -> np.ndarray:
    xs = (x - model["mean"]) / model["std"]
    z = xs @ model["w"] + model["b"]
    return 1.0 / (1.0 + np.exp(-np.clip(z, -50, 50)))


@dataclass
class AttackSetup:
    """Shadow-training property attack configuration.

    Row budget: shadow_fraction trains the attacker's imitation model,
    train_fraction trains the target model, test_fraction is held out for
    both task and attack evaluation.  The property is the median-binarized
    value of one feature column.
    """

    property_column: str = "amount"
    shadow_fraction: float = 0.5
    train_fraction: float = 0.25
    test_fraction: float = 0.25
    seed: int = 1

    def __post_init__(self):
        total = self.shadow_fraction + self.train_fraction + self.test_fraction
        if abs(total - 1.0) > 1e-9:
            raise InvalidSpec(f"attack fractions must sum to 1, got {total}")


def binarize_property(ds: Dataset, column: str) -> np.ndarray:
    if column not in ds.columns:
        raise DegenerateProperty(f"no column named {column!r}")
    values = ds.features[:, ds.columns.index(column)]
    if np.ptp(values) < 1e-12:
        raise DegenerateProperty(f"column {column!r} is constant")
    return (values > np.median(values)).astype(np.int64)


def leakage_attack(ds: Dataset, cfg: TrainConfig, setup: AttackSetup,
                   d_a: int | None = None) -> dict:
    """Shadow-train a property-inference attack against the server-side view.

    Trains the target session on the train split, an identically configured
    shadow session on the shadow split, fits logistic regression mapping the
    shadow's hidden features to the property, and scores it on the target's
    hidden features for held-out rows.
    """
    d_a = d_a if d_a is not None else equal_halves(ds.d)[0]
    prop = binarize_property(ds, setup.property_column)
    perm = np.random.default_rng([setup.seed, 777]).permutation(ds.n)
    n_shadow = int(setup.shadow_fraction * ds.n)
    n_train = int(setup.train_fraction * ds.n)
    shadow_idx = perm[:n_shadow]
    train_idx = perm[n_shadow : n_shadow + n_train]
    test_idx = perm[n_shadow + n_train :]

    def vertical(rows_train, rows_test):
        x = ds.features
        return VerticalData(
            x_a_train=x[np.ix_(rows_train, np.arange(d_a))],
            x_b_train=x[np.ix_(rows_train, np.arange(d_a, ds.d))],
            y_train=ds.labels[rows_train],
            x_a_test=x[np.ix_(rows_test, np.arange(d_a))],
            x_b_test=x[np.ix_(rows_test, np.arange(d_a, ds.d))],
            y_test=ds.labels[rows_test],
        )

    target = run_session(cfg, vertical(train_idx, test_idx))
    # the shadow imitates the target: same architecture, initialization and
    # training procedure, trained on the attacker's own (shadow) rows
    shadow_cfg = TrainConfig(**{**json.loads(cfg.to_json()), "eval_each_epoch": False,
                                "noise_seed": cfg.effective_noise_seed + 5000})
    shadow = run_session(shadow_cfg, vertical(shadow_idx, test_idx[:1]))

    shadow_h = hidden_features(shadow, ds.features[np.ix_(shadow_idx, np.arange(d_a))],
                               ds.features[np.ix_(shadow_idx, np.arange(d_a, ds.d))])
    attack_model = fit_logreg(shadow_h, prop[shadow_idx])
    target_h = hidden_features(target, ds.features[np.ix_(test_idx, np.arange(d_a))],
                               ds.features[np.ix_(test_idx, np.arange(d_a, ds.d))])
    attack_auc = auc(logreg_scores(attack_model, target_h), prop[test_idx])

    task_scores = predict_proba(target, ds.features[np.ix_(test_idx, np.arange(d_a))],
                                ds.features[np.ix_(test_idx, np.arange(d_a, ds.d))])
    task_scores = task_scores[:, 0] if task_scores.shape[1] == 1 else task_scores[:, 1]
    return {
        "optimizer": cfg.optimizer,
        "sgld_scope": cfg.sgld_scope,
        "task_auc": auc(task_scores, ds.labels[test_idx]),
        "attack_auc": attack_auc,
        "rows": {"shadow": len(shadow_idx), "train": len(train_idx),
                 "test": len(test_idx)},
    }


# -- experiments ------------------------------------------------------------------------


def _dataset_from_spec(spec: dict) -> tuple[Dataset, int]:
    kind = spec.get("kind", "synthetic")
    if kind == "synthetic":
        ds = gen_synth(spec.get("rows", 20000), spec["d_a"], spec["d_b"],
                       seed=spec.get("seed", 1))
        return ds, spec["d_a"]
    if kind == "csv":
        ds = load_csv(spec["path"], spec["label_column"])
        d_a = spec.get("d_a", equal_halves(ds.d)[0])
        return ds, d_a
    raise InvalidSpec(f"unknown dataset kind {kind!r}")


def run_experiment(config: dict) -> dict:
    """Train the split model and the plaintext baseline on identical splits.

    config = {"train": TrainConfig fields, "dataset": {...},
              "train_fraction": 0.8, "repetitions": 1}
    """
    ds, d_a = _dataset_from_spec(config["dataset"])
    train_fraction = config.get("train_fraction", 0.8)
    repetitions = config.get("repetitions", 1)
    base = dict(config["train"])
    runs, baselines = [], []
    for rep in range(repetitions):
        cfg = TrainConfig(**{**base, "seed": base.get("seed", 1) + rep,
                             "d_a": d_a, "d_b": ds.d - d_a,
                             "layer_dims": [ds.d] + list(base["layer_dims"])[1:]
                             if base["layer_dims"][0] != ds.d else base["layer_dims"]})
        data = make_vertical_data(ds, train_fraction, cfg.seed, d_a)
        result = run_session(cfg, data)
        _, _, base_history = train_monolithic(cfg, data)
        runs.append({
            "seed": cfg.seed,
            "history": result.history,
            "final_test_auc": result.history[-1].get("test_auc"),
            "bytes": {"data_plane": result.data_plane_bytes(),
                      "triples": result.triple_bytes(),
                      "coordinator": result.coordinator_control_bytes()},
            "triples": {"dealt": result.triples_dealt,
                        "consumed": result.triples_consumed},
            "stop_reason": result.stop_reason,
            "timing": {"sim_seconds": result.sim_seconds,
                       "compute_seconds": result.compute_seconds,
                       "wall_seconds": result.wall_seconds},
        })
        baselines.append({
            "seed": cfg.seed,
            "history": base_history,
            "final_test_auc": base_history[-1].get("test_auc"),
        })
    spnn_aucs = [r["final_test_auc"] for r in runs if r["final_test_auc"] is not None]
    nn_aucs = [b["final_test_auc"] for b in baselines if b["final_test_auc"] is not None]
    report = {
        "config": config,
        "dataset": {"rows": ds.n, "features": ds.d, "dropped_rows": ds.dropped_rows},
        "runs": runs,
        "baseline": baselines,
        "spnn_auc_mean": float(np.mean(spnn_aucs)) if spnn_aucs else None,
        "spnn_auc_std": float(np.std(spnn_aucs)) if spnn_aucs else None,
        "nn_auc_mean": float(np.mean(nn_aucs)) if nn_aucs else None,
        "auc_gap": (float(abs(np.mean(spnn_aucs) - np.mean(nn_aucs)))
                    if spnn_aucs and nn_aucs else None),
    }
    return report


_TIMING_KEYS = {"timing", "wall_seconds", "sim_seconds", "compute_seconds"}


def _strip_timing(obj):
    if isinstance(obj, dict):
        return {k: _strip_timing(v) for k, v in obj.items() if k not in _TIMING_KEYS}
    if isinstance(obj, list):
        return [_strip_timing(v) for v in obj]
    return obj


def report_hash(report: dict) -> str:
    """Hash of the machine-independent part of a report."""
    canonical = json.dumps(_strip_timing(report), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()


# -- timing model and sweeps ----------------------------------------------------------------


def epoch_time_model(compute_seconds: float, total_bytes: int, total_frames: int,
                     bandwidth_bps: float, latency_s: float) -> float:
    """Store-and-forward cost of one epoch: measured compute plus serialization
    plus per-frame latency, exact for the lockstep protocol."""
    return compute_seconds + total_bytes * 8.0 / bandwidth_bps + total_frames * latency_s


def _measure_epoch(cfg: TrainConfig, data: VerticalData) -> dict:
    result = run_session(cfg, data)
    include_triples = cfg.protocol_mode == "ss"
    total_bytes = result.data_plane_bytes() + (result.triple_bytes() if include_triples else 0)
    total_frames = result.data_plane_frames() + (result.triple_frames() if include_triples else 0)
    return {
        "mode": cfg.protocol_mode,
        "bytes": total_bytes,
        "frames": total_frames,
        "compute_seconds": result.compute_seconds,
        "coordinator_bytes": result.coordinator_control_bytes(),
        "triples_consumed": result.triples_consumed,
        "sim_seconds": result.sim_seconds,
    }


def bandwidth_sweep(config: dict, bandwidths: list) -> dict:
    """One measured epoch per backend, re-priced at each bandwidth under the
    store-and-forward model; reports the ss/he crossover if one exists."""
    ds, d_a = _dataset_from_spec(config["dataset"])
    base = dict(config["train"])
    base.update(epochs=1, eval_each_epoch=False, d_a=d_a, d_b=ds.d - d_a)
    data = make_vertical_data(ds, config.get("train_fraction", 0.8), base.get("seed", 1), d_a)
    latency = base.get("latency_s", 0.001)
    measured = {}
    for mode in ("ss", "he"):
        cfg = TrainConfig(**{**base, "protocol_mode": mode})
        measured[mode] = _measure_epoch(cfg, data)
    curves = {mode: [] for mode in measured}
    for bw in bandwidths:
        for mode, m in measured.items():
            curves[mode].append(epoch_time_model(m["compute_seconds"], m["bytes"],
                                                 m["frames"], bw, latency))
    # analytic crossover: ss and he epoch times are both affine in 1/bandwidth
    d_compute = measured["he"]["compute_seconds"] - measured["ss"]["compute_seconds"]
    d_comm = (measured["ss"]["bytes"] - measured["he"]["bytes"]) * 8.0 \
        + (measured["ss"]["frames"] - measured["he"]["frames"]) * latency
    crossover = d_comm / d_compute if d_compute > 0 and d_comm > 0 else None
    return {
        "config": config,
        "bandwidths": list(bandwidths),
        "measured": measured,
        "epoch_seconds": curves,
        "crossover_bandwidth_bps": crossover,
        "ss_bytes_exceed_he": measured["ss"]["bytes"] > measured["he"]["bytes"],
    }


def scale_sweep(config: dict, fractions: list) -> dict:
    """SS-mode epoch time against training-set size, with a linear-fit R^2."""
    if any(not 0 < f <= 1 for f in fractions):
        raise InvalidSpec("fractions must lie in (0, 1]")
    ds, d_a = _dataset_from_spec(config["dataset"])
    base = dict(config["train"])
    base.update(epochs=1, eval_each_epoch=False, protocol_mode="ss",
                d_a=d_a, d_b=ds.d - d_a)
    latency = base.get("latency_s", 0.001)
    bandwidth = base.get("bandwidth_bps", 100e6)
    full = make_vertical_data(ds, config.get("train_fraction", 0.8), base.get("seed", 1), d_a)
    rows_list, times, triples, per_fraction = [], [], [], []
    for fraction in fractions:
        rows = max(1, int(fraction * len(full.y_train)))
        data = VerticalData(
            x_a_train=full.x_a_train[:rows], x_b_train=full.x_b_train[:rows],
            y_train=full.y_train[:rows],
            x_a_test=full.x_a_test[:1], x_b_test=full.x_b_test[:1],
            y_test=full.y_test[:1],
        )
        cfg = TrainConfig(**base)
        m = _measure_epoch(cfg, data)
        t = epoch_time_model(m["compute_seconds"], m["bytes"], m["frames"],
                             bandwidth, latency)
        rows_list.append(rows)
        times.append(t)
        triples.append(m["triples_consumed"])
        per_fraction.append({"fraction": fraction, "rows": rows, "epoch_seconds": t,
                             "bytes": m["bytes"], "triples_consumed": m["triples_consumed"]})
    slope, intercept = np.polyfit(rows_list, times, 1)
    predicted = np.polyval([slope, intercept], rows_list)
    ss_res = float(np.sum((np.array(times) - predicted) ** 2))
    ss_tot = float(np.sum((np.array(times) - np.mean(times)) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return {
        "config": config,
        "points": per_fraction,
        "linear_fit": {"slope": float(slope), "intercept": float(intercept),
                       "r_squared": r_squared},
        "triples": triples,
    }


# -- named experiment presets -----------------------------------------------------------------


def fraud_preset() -> dict:
    """Fraud-detection configuration: 28 features, hidden dims (8, 8),
    sigmoid activations, lr 0.001, 80/20 split."""
    return {
        "train": {"layer_dims": [28, 8, 8, 1], "activations": ["sigmoid", "sigmoid"],
                  "head_activation": "sigmoid", "learning_rate": 0.001,
                  "batch_size": 5000, "epochs": 10, "seed": 1,
                  "d_a": 14, "d_b": 14},
        "train_fraction": 0.8,
        "repetitions": 5,
    }


def financial_preset() -> dict:
    """Financial-distress configuration: 556 encoded features, hidden dims
    (400, 16, 8), relu on the last hidden layer and sigmoid elsewhere,
    lr 0.006, 70/30 split."""
    return {
        "train": {"layer_dims": [556, 400, 16, 8, 1],
                  "activations": ["sigmoid", "sigmoid", "relu"],
                  "head_activation": "sigmoid", "learning_rate": 0.006,
                  "batch_size": 5000, "epochs": 10, "seed": 1,
                  "d_a": 278, "d_b": 278},
        "train_fraction": 0.7,
        "repetitions": 5,
    }
