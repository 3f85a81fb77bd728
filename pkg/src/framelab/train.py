"""Adam optimizer, training loops, checkpoints, and inference.

Training is single-threaded and deterministic for a fixed seed: parameter
init, batch shuffling, and every numpy op are seeded or exact, so two runs
with the same seed produce bitwise-identical parameters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from typing import Callable, Optional

import numpy as np

from .dataset import CaseRecord
from .fem import ResponseField
from .frame import Frame, LoadCase
from .graph import NormStats, StructuralGraph, assemble_features, fit_normalizer, graph_from_frame
from .models import (
    BaselineModel,
    GraphArrays,
    SurrogateModel,
    baseline_backward,
    baseline_forward,
    graph_arrays,
    init_baseline,
    init_surrogate,
    loss_and_grad,
    surrogate_backward,
    surrogate_forward,
)

CHECKPOINT_SCHEMA_VERSION = 1


class TrainError(Exception):
    """Raised on divergence or malformed checkpoints."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 100
    lam: float = 1.0           # fixed-node penalty weight (surrogate only)
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    hidden_dim: int = 64
    edge_hidden: int = 32
    n_layers: int = 3
    self_term: bool = True

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise TrainError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.lam < 0:
            raise TrainError(f"lam must be >= 0, got {self.lam}")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise TrainError("batch_size and max_epochs must be >= 1")


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    test_loss: list[float] = field(default_factory=list)
    accuracy: list[tuple[int, float]] = field(default_factory=list)  # (epoch, value)
    best_epoch: int = -1
    best_test_loss: float = float("inf")


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0


def adam_init(params: dict[str, np.ndarray]) -> AdamState:
    return AdamState(
        m={k: np.zeros_like(p) for k, p in params.items()},
        v={k: np.zeros_like(p) for k, p in params.items()},
    )


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    config: TrainConfig,
) -> None:
    """One bias-corrected Adam update, in place."""
    state.t += 1
    b1, b2 = config.beta1, config.beta2
    bc1 = 1.0 - b1**state.t
    bc2 = 1.0 - b2**state.t
    for key, grad in grads.items():
        m = state.m[key]
        v = state.v[key]
        m *= b1
        m += (1.0 - b1) * grad
        v *= b2
        v += (1.0 - b2) * grad**2
        params[key] -= config.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + config.eps)


def _case_matrices(
    frame: Frame, records: list[CaseRecord], graph0: StructuralGraph
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Raw node features, targets, and load pairs stacked over records.
    The topology (and edge features) are shared across cases; only the
    load columns of the node features vary."""
    xs = np.repeat(graph0.node_features[None], len(records), axis=0)
    loads = np.zeros((len(records), 2))
    targets = np.zeros((len(records), graph0.n_nodes, 3))
    mid_pos = graph0.topology.frame_node_pos[frame.loaded_mid_node]
    top_pos = graph0.topology.frame_node_pos[frame.loaded_top_node]
    for i, rec in enumerate(records):
        xs[i, :, 5:8] = 0.0
        xs[i, mid_pos, 5] = rec.f_mid
        xs[i, top_pos, 5] = rec.f_top
        loads[i] = (rec.f_mid, rec.f_top)
        targets[i] = rec.targets
    return xs, targets, loads


def fit_stats(frame: Frame, records: list[CaseRecord]) -> NormStats:
    """Fit normalization statistics on a training split."""
    topo = graph_from_frame(frame, 0)
    graph0 = assemble_features(frame, LoadCase(0.0, 0.0), topo)
    xs, targets, loads = _case_matrices(frame, records, graph0)
    return fit_normalizer(xs, graph0.edge_features, targets, loads)


def _batch_loss_grads(
    model,
    kind: str,
    x: np.ndarray,
    targets: np.ndarray,
    fixed_mask: np.ndarray,
    lam: float,
    ga: Optional[GraphArrays],
) -> tuple[float, dict[str, np.ndarray]]:
    if kind == "gnn":
        pred, cache = surrogate_forward(model, x, ga)
        loss, dpred = loss_and_grad(pred, targets, fixed_mask, lam)
        grads = surrogate_backward(model, ga, cache, dpred)
    else:
        pred, cache = baseline_forward(model, x)
        # the baseline carries no structure information, so it trains on a
        # plain MSE over all outputs with no boundary-condition term
        loss, dpred = loss_and_grad(pred, targets, np.zeros(targets.shape[1]), 0.0)
        grads = baseline_backward(model, cache, dpred)
    return loss, grads


def train(
    model_kind: str,
    frame: Frame,
    train_records: list[CaseRecord],
    test_records: list[CaseRecord],
    config: TrainConfig,
    stats: Optional[NormStats] = None,
    snapshot_fn: Optional[Callable] = None,
    snapshot_every: int = 10,
) -> tuple[object, NormStats, TrainHistory]:
    """Mini-batch training of either model kind ("gnn" or "nn").

    Normalization statistics are fitted on the training split unless
    passed in. The parameters with the best test loss are retained.
    ``snapshot_fn(model, stats) -> float`` is called every
    ``snapshot_every`` epochs to record an accuracy snapshot.

    Raises:
        TrainError: if the loss diverges to NaN, naming the epoch.
    """
    if model_kind not in ("gnn", "nn"):
        raise TrainError(f"unknown model kind {model_kind!r}")
    if not train_records:
        raise TrainError("empty training split")
    if stats is None:
        stats = fit_stats(frame, train_records)

    topo = graph_from_frame(frame, 0)
    graph0 = assemble_features(frame, LoadCase(0.0, 0.0), topo)
    fixed_mask = graph0.fixed_mask

    def prepare(records):
        xs, targets, loads = _case_matrices(frame, records, graph0)
        t_norm = stats.normalize_targets(targets)
        if model_kind == "gnn":
            return stats.normalize_nodes(xs), t_norm
        return stats.normalize_loads(loads), t_norm

    x_train, t_train = prepare(train_records)
    x_test, t_test = prepare(test_records) if test_records else (None, None)

    ga = None
    if model_kind == "gnn":
        ga = graph_arrays(graph0, edge_feats=stats.normalize_edges(graph0.edge_features))
        model = init_surrogate(
            config.seed, config.hidden_dim, config.edge_hidden, config.n_layers, config.self_term
        )
    else:
        model = init_baseline(config.seed, n_nodes=graph0.n_nodes)

    opt = adam_init(model.params)
    history = TrainHistory()
    best_params = {k: p.copy() for k, p in model.params.items()}
    rng = np.random.default_rng(np.random.SeedSequence((config.seed, 0x7A1)))
    n_train = len(train_records)

    for epoch in range(config.max_epochs):
        order = rng.permutation(n_train)
        epoch_losses = []
        for start in range(0, n_train, config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grads = _batch_loss_grads(
                model, model_kind, x_train[idx], t_train[idx], fixed_mask, config.lam, ga
            )
            if not np.isfinite(loss):
                raise TrainError(f"training diverged (non-finite loss) at epoch {epoch}")
            adam_step(model.params, grads, opt, config)
            epoch_losses.append(loss)
        history.train_loss.append(float(np.mean(epoch_losses)))

        if x_test is not None:
            test_loss, _ = _batch_loss_grads(
                model, model_kind, x_test, t_test, fixed_mask, config.lam, ga
            )
            history.test_loss.append(test_loss)
            if test_loss < history.best_test_loss:
                history.best_test_loss = test_loss
                history.best_epoch = epoch
                best_params = {k: p.copy() for k, p in model.params.items()}
        if snapshot_fn is not None and (epoch + 1) % snapshot_every == 0:
            history.accuracy.append((epoch, float(snapshot_fn(model, stats))))

    if x_test is not None:
        model.params = best_params
    return model, stats, history


def predict(
    model, frame: Frame, loads: LoadCase, stats: NormStats
) -> ResponseField:
    """Assemble features, normalize, run the model, denormalize to mm/deg."""
    topo = graph_from_frame(frame, 0)
    graph = assemble_features(frame, loads, topo)
    if isinstance(model, SurrogateModel):
        ga = graph_arrays(graph, edge_feats=stats.normalize_edges(graph.edge_features))
        y, _ = surrogate_forward(model, stats.normalize_nodes(graph.node_features), ga)
    else:
        y, _ = baseline_forward(model, stats.normalize_loads(np.array([loads.f_mid, loads.f_top])))
        y = y[0]
    values = stats.denormalize_targets(y)
    return ResponseField(node_ids=tuple(n.id for n in frame.nodes), values=values)


def save_checkpoint(
    path: str,
    model,
    stats: NormStats,
    config: TrainConfig,
) -> None:
    """JSON checkpoint: parameters by name plus the normalization stats and
    the exact training configuration."""
    doc = {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "model_kind": model.kind,
        "hidden_dim": getattr(model, "hidden_dim", None),
        "edge_hidden": getattr(model, "edge_hidden", None),
        "layer_count": getattr(model, "n_layers", None),
        "self_term_flag": getattr(model, "self_term", None),
        "seed": config.seed,
        "train_config": asdict(config),
        "norm_stats": stats.to_dict(),
        "params": {k: p.tolist() for k, p in model.params.items()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_checkpoint(path: str) -> tuple[object, NormStats, TrainConfig]:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    version = doc.get("schema_version")
    if version != CHECKPOINT_SCHEMA_VERSION:
        raise TrainError(
            f"checkpoint schema version {version} not supported ({CHECKPOINT_SCHEMA_VERSION})"
        )
    params = {k: np.array(p, dtype=float) for k, p in doc["params"].items()}
    stats = NormStats.from_dict(doc["norm_stats"])
    config = TrainConfig(**doc["train_config"])
    if doc["model_kind"] == "gnn":
        model: object = SurrogateModel(
            hidden_dim=doc["hidden_dim"],
            edge_hidden=doc["edge_hidden"],
            n_layers=doc["layer_count"],
            self_term=doc["self_term_flag"],
            params=params,
        )
    elif doc["model_kind"] == "nn":
        model = BaselineModel(params=params)
    else:
        raise TrainError(f"unknown model kind {doc['model_kind']!r} in checkpoint")
    return model, stats, config
