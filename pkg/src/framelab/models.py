"""Edge-conditioned message-passing surrogate and dense baseline.

Both models are plain-numpy with hand-written reverse-mode gradients,
double precision throughout. The surrogate projects node features into a
hidden space, runs three message-passing layers where a small edge
perceptron (EdgeNet) maps each edge's features to a d x d matrix that
transforms the source node's hidden state, aggregates incoming messages by
their mean, and decodes per-node (u_x, u_y, r_z) in normalized space.

Forward functions accept a batch of node-feature matrices over one shared
topology; batched inputs share the EdgeNet evaluation, which is what makes
training on hundreds of cases of a single frame cheap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import StructuralGraph

NODE_IN_DIM = 10
EDGE_IN_DIM = 10
TARGET_DIM = 3
BASELINE_IN_DIM = 2


class ModelError(Exception):
    """Raised for shape mismatches and degenerate graphs."""


@dataclass
class SurrogateModel:
    hidden_dim: int
    edge_hidden: int
    n_layers: int
    self_term: bool
    params: dict[str, np.ndarray]

    @property
    def kind(self) -> str:
        return "gnn"


@dataclass
class BaselineModel:
    params: dict[str, np.ndarray]

    @property
    def kind(self) -> str:
        return "nn"


def _uniform(rng: np.random.Generator, shape: tuple[int, ...], bound: float) -> np.ndarray:
    return rng.uniform(-bound, bound, size=shape)


def init_surrogate(
    seed: int,
    hidden_dim: int = 64,
    edge_hidden: int = 32,
    n_layers: int = 3,
    self_term: bool = True,
) -> SurrogateModel:
    """Fan-in uniform initialization. The EdgeNet output layer gets an
    extra 1/sqrt(d) so early messages W(e) h stay O(|h|)."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x6E4)))
    d, he = hidden_dim, edge_hidden
    params: dict[str, np.ndarray] = {
        "w_in": _uniform(rng, (d, NODE_IN_DIM), 1.0 / np.sqrt(NODE_IN_DIM)),
        "w_out": _uniform(rng, (TARGET_DIM, d), 1.0 / np.sqrt(d)),
    }
    for k in range(n_layers):
        params[f"layer{k}.v1"] = _uniform(rng, (he, EDGE_IN_DIM), 1.0 / np.sqrt(EDGE_IN_DIM))
        params[f"layer{k}.b1"] = _uniform(rng, (he,), 1.0 / np.sqrt(EDGE_IN_DIM))
        params[f"layer{k}.v2"] = _uniform(rng, (d * d, he), 1.0 / np.sqrt(he * d))
        params[f"layer{k}.b2"] = _uniform(rng, (d * d,), 1.0 / np.sqrt(he * d))
        if self_term:
            params[f"layer{k}.self_w"] = _uniform(rng, (d, d), 1.0 / np.sqrt(d))
    return SurrogateModel(
        hidden_dim=d, edge_hidden=he, n_layers=n_layers, self_term=self_term, params=params
    )


def parameter_count(params: dict[str, np.ndarray]) -> int:
    return sum(int(p.size) for p in params.values())


@dataclass
class GraphArrays:
    """Topology in array form plus (normalized) edge features."""
    src: np.ndarray      # (2m,) source node positions
    tgt: np.ndarray      # (2m,) target node positions
    counts: np.ndarray   # (n,) incoming-edge counts
    edge_feats: np.ndarray  # (2m, 10)
    n_nodes: int


def graph_arrays(graph: StructuralGraph, edge_feats: np.ndarray | None = None) -> GraphArrays:
    """Extract index arrays; messages flow source -> target along each
    directed edge.

    Raises:
        ModelError: if some node has no incoming edge (mean aggregation
        over an empty neighborhood is undefined).
    """
    src = graph.edge_index[:, 0]
    tgt = graph.edge_index[:, 1]
    n = graph.n_nodes
    counts = np.bincount(tgt, minlength=n).astype(float)
    if np.any(counts == 0):
        isolated = np.nonzero(counts == 0)[0]
        raise ModelError(f"nodes without incoming edges: {isolated.tolist()}")
    feats = graph.edge_features if edge_feats is None else edge_feats
    return GraphArrays(src=src, tgt=tgt, counts=counts, edge_feats=feats, n_nodes=n)


def _segment_mean(messages: np.ndarray, tgt: np.ndarray, counts: np.ndarray, n: int) -> np.ndarray:
    agg = np.zeros((messages.shape[0], n, messages.shape[2]))
    np.add.at(agg, (slice(None), tgt), messages)
    return agg / counts[None, :, None]


def surrogate_forward(
    model: SurrogateModel, x: np.ndarray, ga: GraphArrays
) -> tuple[np.ndarray, dict]:
    """Forward pass. ``x`` is (batch, n, 10) or (n, 10) of normalized node
    features; returns (batch, n, 3) predictions (normalized space) and the
    cache needed by :func:`surrogate_backward`."""
    squeeze = x.ndim == 2
    if squeeze:
        x = x[None]
    if x.shape[-1] != NODE_IN_DIM:
        raise ModelError(f"node feature dim {x.shape[-1]} != {NODE_IN_DIM}")
    if x.shape[1] != ga.n_nodes:
        raise ModelError(f"node count {x.shape[1]} != topology's {ga.n_nodes}")

    p = model.params
    h = x @ p["w_in"].T
    cache: dict = {"x": x, "hs": [h], "layers": []}
    for k in range(model.n_layers):
        v1, b1 = p[f"layer{k}.v1"], p[f"layer{k}.b1"]
        v2, b2 = p[f"layer{k}.v2"], p[f"layer{k}.b2"]
        pre_edge = ga.edge_feats @ v1.T + b1
        q = np.maximum(pre_edge, 0.0)
        flat = q @ v2.T + b2
        w_edge = flat.reshape(-1, model.hidden_dim, model.hidden_dim)
        h_src = h[:, ga.src, :]
        # (b,e,i) = W_e (i,j) applied to h_src (b,e,j), batched over edges
        messages = np.matmul(h_src.transpose(1, 0, 2), w_edge.transpose(0, 2, 1)).transpose(1, 0, 2)
        pre = _segment_mean(messages, ga.tgt, ga.counts, ga.n_nodes)
        if model.self_term:
            pre = pre + h @ p[f"layer{k}.self_w"].T
        h_new = np.maximum(pre, 0.0)
        cache["layers"].append(
            {"pre_edge": pre_edge, "q": q, "w_edge": w_edge, "h_src": h_src, "pre": pre}
        )
        cache["hs"].append(h_new)
        h = h_new
    y = h @ p["w_out"].T
    if squeeze:
        return y[0], cache
    return y, cache


def surrogate_backward(
    model: SurrogateModel, ga: GraphArrays, cache: dict, dy: np.ndarray
) -> dict[str, np.ndarray]:
    """Exact reverse-mode gradients for every parameter. ``dy`` matches the
    forward output shape; the rectifier subgradient at 0 is taken as 0."""
    if dy.ndim == 2:
        dy = dy[None]
    p = model.params
    grads: dict[str, np.ndarray] = {}
    h_last = cache["hs"][-1]
    grads["w_out"] = np.tensordot(dy, h_last, axes=([0, 1], [0, 1]))
    dh = dy @ p["w_out"]

    for k in reversed(range(model.n_layers)):
        layer = cache["layers"][k]
        h_prev = cache["hs"][k]
        dpre = dh * (layer["pre"] > 0.0)
        dh_prev = np.zeros_like(h_prev)
        if model.self_term:
            grads[f"layer{k}.self_w"] = np.tensordot(dpre, h_prev, axes=([0, 1], [0, 1]))
            dh_prev += dpre @ p[f"layer{k}.self_w"]
        dmsg = (dpre / ga.counts[None, :, None])[:, ga.tgt, :]
        dw_edge = np.matmul(dmsg.transpose(1, 2, 0), layer["h_src"].transpose(1, 0, 2))
        dh_src = np.matmul(dmsg.transpose(1, 0, 2), layer["w_edge"]).transpose(1, 0, 2)
        np.add.at(dh_prev, (slice(None), ga.src), dh_src)
        dflat = dw_edge.reshape(dw_edge.shape[0], -1)
        grads[f"layer{k}.v2"] = dflat.T @ layer["q"]
        grads[f"layer{k}.b2"] = dflat.sum(axis=0)
        dq = dflat @ p[f"layer{k}.v2"]
        dpre_edge = dq * (layer["pre_edge"] > 0.0)
        grads[f"layer{k}.v1"] = dpre_edge.T @ ga.edge_feats
        grads[f"layer{k}.b1"] = dpre_edge.sum(axis=0)
        dh = dh_prev
    grads["w_in"] = np.tensordot(dh, cache["x"], axes=([0, 1], [0, 1]))
    return grads


def model_forward(model: SurrogateModel, graph: StructuralGraph) -> np.ndarray:
    """Predictions for one graph, features taken as given (callers
    normalize). Returns an (n, 3) array in normalized target space."""
    ga = graph_arrays(graph)
    y, _ = surrogate_forward(model, graph.node_features, ga)
    return y


def loss_and_grad(
    pred: np.ndarray,
    target: np.ndarray,
    fixed_mask: np.ndarray,
    lam: float,
) -> tuple[float, np.ndarray]:
    """Mean squared error over free nodes plus lam times the mean squared
    prediction magnitude over fixed nodes; squared norms sum over the three
    components. Batched inputs average the per-graph losses.

    Returns (loss, d loss / d pred).

    Raises:
        ModelError: if no free nodes exist.
    """
    squeeze = pred.ndim == 2
    if squeeze:
        pred, target = pred[None], target[None]
    free = ~fixed_mask.astype(bool)
    n_free = int(free.sum())
    n_fixed = int(fixed_mask.sum())
    if n_free == 0:
        raise ModelError("loss undefined: no free nodes")
    batch = pred.shape[0]
    err = pred[:, free, :] - target[:, free, :]
    loss = float(np.sum(err**2) / (n_free * batch))
    dpred = np.zeros_like(pred)
    dpred[:, free, :] = 2.0 * err / (n_free * batch)
    if n_fixed > 0 and lam != 0.0:
        fixed = fixed_mask.astype(bool)
        loss += lam * float(np.sum(pred[:, fixed, :] ** 2) / (n_fixed * batch))
        dpred[:, fixed, :] = 2.0 * lam * pred[:, fixed, :] / (n_fixed * batch)
    return loss, (dpred[0] if squeeze else dpred)


def init_baseline(seed: int, hidden: int = 64, n_nodes: int = 6) -> BaselineModel:
    """Dense 2 -> hidden -> hidden -> 3*n_nodes perceptron."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xBA5E)))
    out_dim = TARGET_DIM * n_nodes
    params = {
        "w1": _uniform(rng, (hidden, BASELINE_IN_DIM), 1.0 / np.sqrt(BASELINE_IN_DIM)),
        "b1": _uniform(rng, (hidden,), 1.0 / np.sqrt(BASELINE_IN_DIM)),
        "w2": _uniform(rng, (hidden, hidden), 1.0 / np.sqrt(hidden)),
        "b2": _uniform(rng, (hidden,), 1.0 / np.sqrt(hidden)),
        "w3": _uniform(rng, (out_dim, hidden), 1.0 / np.sqrt(hidden)),
        "b3": _uniform(rng, (out_dim,), 1.0 / np.sqrt(hidden)),
    }
    return BaselineModel(params=params)


def baseline_forward(model: BaselineModel, loads: np.ndarray) -> tuple[np.ndarray, dict]:
    """``loads`` is (batch, 2) normalized (f_mid, f_top); returns
    (batch, n_nodes, 3) plus the backward cache."""
    if loads.ndim == 1:
        loads = loads[None]
    p = model.params
    a1 = loads @ p["w1"].T + p["b1"]
    z1 = np.maximum(a1, 0.0)
    a2 = z1 @ p["w2"].T + p["b2"]
    z2 = np.maximum(a2, 0.0)
    out = z2 @ p["w3"].T + p["b3"]
    cache = {"loads": loads, "a1": a1, "z1": z1, "a2": a2, "z2": z2}
    return out.reshape(loads.shape[0], -1, TARGET_DIM), cache


def baseline_backward(
    model: BaselineModel, cache: dict, dy: np.ndarray
) -> dict[str, np.ndarray]:
    if dy.ndim == 2:
        dy = dy[None]
    p = model.params
    dout = dy.reshape(dy.shape[0], -1)
    grads = {
        "w3": dout.T @ cache["z2"],
        "b3": dout.sum(axis=0),
    }
    dz2 = dout @ p["w3"]
    da2 = dz2 * (cache["a2"] > 0.0)
    grads["w2"] = da2.T @ cache["z1"]
    grads["b2"] = da2.sum(axis=0)
    dz1 = da2 @ p["w2"]
    da1 = dz1 * (cache["a1"] > 0.0)
    grads["w1"] = da1.T @ cache["loads"]
    grads["b1"] = da1.sum(axis=0)
    return grads
