"""Featured directed-graph encoding of a frame plus a load case.

A frame maps to a graph whose nodes are the structural joints and whose
edges are the members, each member contributing a pair of oppositely
directed edges with a direction flag. Joint-first bisection refinement
halves every member per level and inserts the midpoints as new nodes.

Node features (10): x, y, bc_ux, bc_uy, bc_rz, fx, fy, mz,
is_intermediate_joint, phi_scwb.
Edge features (10): L, cos, sin, EA, EI, Z, M_p, is_col, is_beam, dir.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .frame import Frame, LoadCase

NODE_FEATURE_DIM = 10
EDGE_FEATURE_DIM = 10
NODE_FEATURE_NAMES = (
    "x", "y", "bc_ux", "bc_uy", "bc_rz", "fx", "fy", "mz",
    "is_intermediate_joint", "phi_scwb",
)
EDGE_FEATURE_NAMES = (
    "L", "cos", "sin", "EA", "EI", "Z", "M_p", "is_col", "is_beam", "dir",
)

# Degenerate feature columns (zero spread) keep mean and get unit std so
# normalization maps them to exactly zero.
DEGENERATE_STD = 1e-12


@dataclass(frozen=True)
class GraphTopology:
    """Load-independent part of the graph: nodes, segments, orientation.

    ``segments`` holds one entry per (possibly bisected) member piece as
    (node_pos_a, node_pos_b, member_index); the forward directed edge runs
    a -> b with dir = +1, the reverse b -> a with dir = -1.
    """
    refinement_level: int
    node_ids: tuple[int, ...]
    node_xy: np.ndarray          # (n, 2)
    node_bc: np.ndarray          # (n, 3) restraint flags
    node_intermediate: np.ndarray  # (n,)
    segments: tuple[tuple[int, int, int], ...]
    frame_node_pos: dict[int, int]  # frame node id -> row in node arrays
    n_frame_nodes: int

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_directed_edges(self) -> int:
        return 2 * len(self.segments)


@dataclass(frozen=True)
class StructuralGraph:
    """Topology plus assembled feature matrices for one load case."""
    topology: GraphTopology
    node_features: np.ndarray   # (n, 10)
    edge_index: np.ndarray      # (2m, 2) int, rows are (source_pos, target_pos)
    edge_features: np.ndarray   # (2m, 10)
    fixed_mask: np.ndarray      # (n,) bool, fully fixed nodes

    @property
    def n_nodes(self) -> int:
        return self.node_features.shape[0]


def graph_from_frame(frame: Frame, refinement_level: int = 0) -> GraphTopology:
    """Build the graph topology, bisecting every member ``refinement_level``
    times. Original joints come first in node order, then midpoint nodes in
    creation order; midpoints are free, unloaded, and flagged intermediate.
    """
    if refinement_level < 0:
        raise ValueError(f"refinement_level must be >= 0, got {refinement_level}")

    node_ids = [n.id for n in frame.nodes]
    xy = [(n.x, n.y) for n in frame.nodes]
    bc = [(n.bc_ux, n.bc_uy, n.bc_rz) for n in frame.nodes]
    intermediate = [n.is_intermediate_joint for n in frame.nodes]
    pos_of = {nid: i for i, nid in enumerate(node_ids)}

    member_pos = {m.id: idx for idx, m in enumerate(frame.members)}
    segments: list[tuple[int, int, int]] = [
        (pos_of[m.node_i], pos_of[m.node_j], member_pos[m.id]) for m in frame.members
    ]

    next_id = max(node_ids) + 1
    for _ in range(refinement_level):
        new_segments: list[tuple[int, int, int]] = []
        for a, b, mi in segments:
            mid_pos = len(node_ids)
            node_ids.append(next_id)
            next_id += 1
            xy.append(((xy[a][0] + xy[b][0]) / 2.0, (xy[a][1] + xy[b][1]) / 2.0))
            bc.append((0, 0, 0))
            intermediate.append(1)
            new_segments.append((a, mid_pos, mi))
            new_segments.append((mid_pos, b, mi))
        segments = new_segments

    return GraphTopology(
        refinement_level=refinement_level,
        node_ids=tuple(node_ids),
        node_xy=np.array(xy, dtype=float),
        node_bc=np.array(bc, dtype=float),
        node_intermediate=np.array(intermediate, dtype=float),
        segments=tuple(segments),
        frame_node_pos={n.id: pos_of[n.id] for n in frame.nodes},
        n_frame_nodes=len(frame.nodes),
    )


def assemble_features(frame: Frame, loads: LoadCase, topology: GraphTopology) -> StructuralGraph:
    """Fill node and edge feature matrices for one load case.

    Loads land only on the original loaded joints; bisection nodes carry
    zero loads and free boundary conditions.

    Raises:
        ValueError: if the topology was built from a different frame.
    """
    if topology.n_frame_nodes != len(frame.nodes) or any(
        n.id not in topology.frame_node_pos for n in frame.nodes
    ):
        raise ValueError("topology does not match the frame it is paired with")

    n = topology.n_nodes
    node_feats = np.zeros((n, NODE_FEATURE_DIM))
    node_feats[:, 0:2] = topology.node_xy
    node_feats[:, 2:5] = topology.node_bc
    per_node_loads = loads.expand(frame)
    for node_id, (fx, fy, mz) in per_node_loads.items():
        pos = topology.frame_node_pos[node_id]
        node_feats[pos, 5:8] = (fx, fy, mz)
    node_feats[:, 8] = topology.node_intermediate
    node_feats[:, 9] = frame.phi_scwb

    e = frame.material.youngs_modulus
    edge_rows = []
    edge_index = []
    for a, b, mi in topology.segments:
        member = frame.members[mi]
        dx = topology.node_xy[b, 0] - topology.node_xy[a, 0]
        dy = topology.node_xy[b, 1] - topology.node_xy[a, 1]
        length = math.hypot(dx, dy)
        cos, sin = dx / length, dy / length
        sec = member.section
        base = [
            length, cos, sin,
            e * sec.area, e * sec.moment_of_inertia,
            sec.plastic_modulus, sec.plastic_moment,
            1.0 if member.kind == "column" else 0.0,
            1.0 if member.kind == "beam" else 0.0,
        ]
        edge_rows.append(base + [1.0])
        edge_index.append((a, b))
        reverse = list(base)
        reverse[1], reverse[2] = -cos, -sin
        edge_rows.append(reverse + [-1.0])
        edge_index.append((b, a))

    fixed_mask = np.all(topology.node_bc == 1.0, axis=1)
    graph = StructuralGraph(
        topology=topology,
        node_features=node_feats,
        edge_index=np.array(edge_index, dtype=int),
        edge_features=np.array(edge_rows, dtype=float),
        fixed_mask=fixed_mask,
    )
    if not np.all(np.isfinite(graph.node_features)) or not np.all(np.isfinite(graph.edge_features)):
        raise ValueError("non-finite feature values")
    return graph


@dataclass(frozen=True)
class NormStats:
    """Normalization statistics fitted on the training split.

    Feature statistics are per column, pooled over nodes/edges of all
    training graphs. Target statistics are per (node, component) so that a
    fixed node's identically-zero target normalizes to exactly zero, which
    the fixed-node training penalty relies on. Standard deviations use the
    population (ddof=0) convention, recorded in ``convention``.
    """
    convention: str
    node_mean: np.ndarray    # (10,)
    node_std: np.ndarray     # (10,)
    edge_mean: np.ndarray    # (10,)
    edge_std: np.ndarray     # (10,)
    target_mean: np.ndarray  # (n_nodes, 3)
    target_std: np.ndarray   # (n_nodes, 3)
    load_mean: np.ndarray    # (2,)
    load_std: np.ndarray     # (2,)

    def normalize_nodes(self, feats: np.ndarray) -> np.ndarray:
        return (feats - self.node_mean) / self.node_std

    def normalize_edges(self, feats: np.ndarray) -> np.ndarray:
        return (feats - self.edge_mean) / self.edge_std

    def normalize_targets(self, targets: np.ndarray) -> np.ndarray:
        return (targets - self.target_mean) / self.target_std

    def denormalize_targets(self, normalized: np.ndarray) -> np.ndarray:
        return normalized * self.target_std + self.target_mean

    def normalize_loads(self, loads: np.ndarray) -> np.ndarray:
        return (loads - self.load_mean) / self.load_std

    def to_dict(self) -> dict:
        return {
            "convention": self.convention,
            "node_mean": self.node_mean.tolist(),
            "node_std": self.node_std.tolist(),
            "edge_mean": self.edge_mean.tolist(),
            "edge_std": self.edge_std.tolist(),
            "target_mean": self.target_mean.tolist(),
            "target_std": self.target_std.tolist(),
            "load_mean": self.load_mean.tolist(),
            "load_std": self.load_std.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "NormStats":
        return cls(
            convention=doc["convention"],
            node_mean=np.array(doc["node_mean"]),
            node_std=np.array(doc["node_std"]),
            edge_mean=np.array(doc["edge_mean"]),
            edge_std=np.array(doc["edge_std"]),
            target_mean=np.array(doc["target_mean"]),
            target_std=np.array(doc["target_std"]),
            load_mean=np.array(doc["load_mean"]),
            load_std=np.array(doc["load_std"]),
        )


def _clamped_std(values: np.ndarray, axis: int = 0) -> np.ndarray:
    std = np.std(values, axis=axis)
    return np.where(std < DEGENERATE_STD, 1.0, std)


def fit_normalizer(
    node_feature_stack: np.ndarray,   # (n_records, n, 10) or (total_rows, 10)
    edge_features: np.ndarray,        # (2m, 10)
    targets: np.ndarray,              # (n_records, n, 3)
    loads: np.ndarray,                # (n_records, 2)
) -> NormStats:
    """Fit per-column feature stats and per-(node, component) target stats.

    Raises:
        ValueError: on fewer than two records.
    """
    targets = np.asarray(targets, dtype=float)
    if targets.ndim != 3 or targets.shape[0] < 2:
        raise ValueError("fit_normalizer needs at least 2 training records")
    node_rows = np.asarray(node_feature_stack, dtype=float)
    if node_rows.ndim == 3:
        node_rows = node_rows.reshape(-1, node_rows.shape[-1])
    loads = np.asarray(loads, dtype=float)
    return NormStats(
        convention="population",
        node_mean=node_rows.mean(axis=0),
        node_std=_clamped_std(node_rows),
        edge_mean=edge_features.mean(axis=0),
        edge_std=_clamped_std(edge_features),
        target_mean=targets.mean(axis=0),
        target_std=_clamped_std(targets),
        load_mean=loads.mean(axis=0),
        load_std=_clamped_std(loads),
    )
