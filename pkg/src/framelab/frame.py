"""Structural domain model: materials, sections, nodes, members, load cases.

Everything here is an immutable value type. The reference structure is a
two-story, one-bay planar steel frame with fully fixed bases; all other
modules (FEM engine, graph encoding, dataset generation) consume these
types and never mutate them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict


@dataclass(frozen=True)
class MaterialProperties:
    """Linear-elastic steel with a single yield strength.

    Attributes:
        youngs_modulus: E in Pa.
        yield_strength: F_y in Pa, used for plastic moment capacities.
    """
    youngs_modulus: float
    yield_strength: float

    def __post_init__(self):
        if self.youngs_modulus <= 0:
            raise ValueError(f"youngs_modulus must be positive, got {self.youngs_modulus}")
        if self.yield_strength <= 0:
            raise ValueError(f"yield_strength must be positive, got {self.yield_strength}")


@dataclass(frozen=True)
class SectionProperties:
    """Cross-section with derived plastic quantities.

    The section is idealized as an equivalent rectangle about the strong
    axis: h_sec = sqrt(12 I / A), plastic modulus Z = A h_sec / 4, and
    plastic moment M_p = F_y Z.
    """
    area: float
    moment_of_inertia: float
    h_sec: float
    plastic_modulus: float
    plastic_moment: float


def derive_section(area: float, moment_of_inertia: float, yield_strength: float) -> SectionProperties:
    """Build a SectionProperties from A, I and F_y.

    Raises:
        ValueError: if any input is non-positive.
    """
    if area <= 0:
        raise ValueError(f"area must be positive, got {area}")
    if moment_of_inertia <= 0:
        raise ValueError(f"moment_of_inertia must be positive, got {moment_of_inertia}")
    if yield_strength <= 0:
        raise ValueError(f"yield_strength must be positive, got {yield_strength}")
    h_sec = math.sqrt(12.0 * moment_of_inertia / area)
    plastic_modulus = area * h_sec / 4.0
    plastic_moment = yield_strength * plastic_modulus
    return SectionProperties(
        area=area,
        moment_of_inertia=moment_of_inertia,
        h_sec=h_sec,
        plastic_modulus=plastic_modulus,
        plastic_moment=plastic_moment,
    )


@dataclass(frozen=True)
class NodeSpec:
    """A frame joint.

    Restraint flags follow the 1 = fixed, 0 = free convention.
    ``is_intermediate_joint`` marks mid-height beam-column joints of the
    as-built frame and midpoint nodes created by graph refinement.
    """
    id: int
    x: float
    y: float
    bc_ux: int = 0
    bc_uy: int = 0
    bc_rz: int = 0
    is_intermediate_joint: int = 0

    def __post_init__(self):
        for name in ("bc_ux", "bc_uy", "bc_rz", "is_intermediate_joint"):
            v = getattr(self, name)
            if v not in (0, 1):
                raise ValueError(f"{name} must be 0 or 1, got {v}")

    @property
    def is_fixed(self) -> bool:
        return self.bc_ux == 1 and self.bc_uy == 1 and self.bc_rz == 1


@dataclass(frozen=True)
class MemberSpec:
    """A prismatic frame member between two nodes.

    kind is "column" for vertical members and "beam" for horizontal ones
    (the reference frame is axis-aligned).
    """
    id: int
    node_i: int
    node_j: int
    section: SectionProperties
    kind: str

    def __post_init__(self):
        if self.node_i == self.node_j:
            raise ValueError(f"member {self.id} connects node {self.node_i} to itself")
        if self.kind not in ("column", "beam"):
            raise ValueError(f"member kind must be 'column' or 'beam', got {self.kind!r}")


@dataclass(frozen=True)
class LoadCase:
    """Two horizontal point loads: f_mid at the mid-story loaded joint,
    f_top at the top-story loaded joint (N).

    expand() turns the pair into full per-node (fx, fy, mz) vectors so the
    FEM solver and the graph encoder share one load representation.
    """
    f_mid: float
    f_top: float

    def expand(self, frame: "Frame") -> dict[int, tuple[float, float, float]]:
        """Per-node (fx, fy, mz) in N / N / N·m, zero except at the loaded joints."""
        fx = {node.id: 0.0 for node in frame.nodes}
        fx[frame.loaded_mid_node] += self.f_mid
        fx[frame.loaded_top_node] += self.f_top
        return {node_id: (value, 0.0, 0.0) for node_id, value in fx.items()}

    def scaled(self, factor: float) -> "LoadCase":
        return LoadCase(self.f_mid * factor, self.f_top * factor)


@dataclass(frozen=True)
class Frame:
    """A planar frame: nodes, members, one material, and global geometry.

    ``loaded_mid_node`` / ``loaded_top_node`` name the joints that receive
    the two horizontal loads of a LoadCase.
    """
    nodes: tuple[NodeSpec, ...]
    members: tuple[MemberSpec, ...]
    material: MaterialProperties
    story_height: float
    bay_width: float
    phi_scwb: float
    loaded_mid_node: int
    loaded_top_node: int

    def node(self, node_id: int) -> NodeSpec:
        return self._node_index[node_id]

    @property
    def _node_index(self) -> dict[int, NodeSpec]:
        return {n.id: n for n in self.nodes}

    def member_length(self, member: MemberSpec) -> float:
        ni = self.node(member.node_i)
        nj = self.node(member.node_j)
        return math.hypot(nj.x - ni.x, nj.y - ni.y)

    @property
    def n_restrained_dofs(self) -> int:
        return sum(n.bc_ux + n.bc_uy + n.bc_rz for n in self.nodes)


# Defaults for the reference two-story frame (SI units).
DEFAULT_E = 2.05e11
DEFAULT_FY = 3.45e8
DEFAULT_STORY_HEIGHT = 3.0
DEFAULT_BAY_WIDTH = 4.0
DEFAULT_PHI_SCWB = 1.2
COLUMN_A, COLUMN_I = 0.08, 3.5e-4
BEAM_A, BEAM_I = 0.04, 2.5e-4


def build_reference_frame(
    story_height: float = DEFAULT_STORY_HEIGHT,
    bay_width: float = DEFAULT_BAY_WIDTH,
    youngs_modulus: float = DEFAULT_E,
    yield_strength: float = DEFAULT_FY,
    column_area: float = COLUMN_A,
    column_inertia: float = COLUMN_I,
    beam_area: float = BEAM_A,
    beam_inertia: float = BEAM_I,
    phi_scwb: float = DEFAULT_PHI_SCWB,
) -> Frame:
    """Build the two-story one-bay frame.

    Node numbering (1-based, matching the reporting order used throughout):
    1 base-left, 2 mid-left, 3 top-left, 4 base-right, 5 mid-right,
    6 top-right. Bases are fully fixed; loads go to nodes 2 and 3.
    """
    if story_height <= 0:
        raise ValueError(f"story_height must be positive, got {story_height}")
    if bay_width <= 0:
        raise ValueError(f"bay_width must be positive, got {bay_width}")
    if phi_scwb <= 0:
        raise ValueError(f"phi_scwb must be positive, got {phi_scwb}")

    material = MaterialProperties(youngs_modulus, yield_strength)
    col = derive_section(column_area, column_inertia, yield_strength)
    beam = derive_section(beam_area, beam_inertia, yield_strength)

    h, w = story_height, bay_width
    nodes = (
        NodeSpec(1, 0.0, 0.0, bc_ux=1, bc_uy=1, bc_rz=1),
        NodeSpec(2, 0.0, h, is_intermediate_joint=1),
        NodeSpec(3, 0.0, 2 * h),
        NodeSpec(4, w, 0.0, bc_ux=1, bc_uy=1, bc_rz=1),
        NodeSpec(5, w, h, is_intermediate_joint=1),
        NodeSpec(6, w, 2 * h),
    )
    members = (
        MemberSpec(1, 1, 2, col, "column"),
        MemberSpec(2, 2, 3, col, "column"),
        MemberSpec(3, 4, 5, col, "column"),
        MemberSpec(4, 5, 6, col, "column"),
        MemberSpec(5, 2, 5, beam, "beam"),
        MemberSpec(6, 3, 6, beam, "beam"),
    )
    return Frame(
        nodes=nodes,
        members=members,
        material=material,
        story_height=story_height,
        bay_width=bay_width,
        phi_scwb=phi_scwb,
        loaded_mid_node=2,
        loaded_top_node=3,
    )


def validate_frame(frame: Frame) -> list[str]:
    """Check structural sanity; returns a list of violations (empty = valid).

    Never raises: the report is the output. The rigid-body check assembles
    the constrained stiffness matrix and inspects its rank, so it catches
    mechanisms that flag-counting alone would miss.
    """
    violations: list[str] = []
    ids = [n.id for n in frame.nodes]
    if len(set(ids)) != len(ids):
        violations.append("duplicate node ids")
    id_set = set(ids)

    for m in frame.members:
        if m.node_i == m.node_j:
            violations.append(f"self-loop member {m.id}")
        if m.node_i not in id_set or m.node_j not in id_set:
            violations.append(f"member {m.id} references a missing node")
            continue
        if frame.member_length(m) <= 0:
            violations.append(f"member {m.id} has zero length")

    # connectivity (undirected reachability over members)
    if frame.nodes and not violations:
        adj: dict[int, set[int]] = {i: set() for i in id_set}
        for m in frame.members:
            adj[m.node_i].add(m.node_j)
            adj[m.node_j].add(m.node_i)
        seen = {frame.nodes[0].id}
        stack = [frame.nodes[0].id]
        while stack:
            for nb in adj[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        if seen != id_set:
            violations.append("frame graph is not connected")

    if not violations:
        import numpy as np
        from .fem import FemError, assemble_global

        try:
            k_full, free = assemble_global(frame)
        except FemError as exc:
            violations.append(str(exc))
        else:
            if not free:
                violations.append("no free DOFs")
            else:
                k_free = k_full[np.ix_(free, free)]
                if np.linalg.matrix_rank(k_free) < len(free):
                    violations.append("unconstrained rigid-body mode (singular stiffness)")
    return violations


def frame_to_json(frame: Frame) -> str:
    """Serialize a frame definition to a JSON document."""
    doc = {
        "nodes": [asdict(n) for n in frame.nodes],
        "members": [
            {
                "id": m.id,
                "node_i": m.node_i,
                "node_j": m.node_j,
                "kind": m.kind,
                "area": m.section.area,
                "moment_of_inertia": m.section.moment_of_inertia,
            }
            for m in frame.members
        ],
        "material": asdict(frame.material),
        "story_height": frame.story_height,
        "bay_width": frame.bay_width,
        "phi_scwb": frame.phi_scwb,
        "loaded_mid_node": frame.loaded_mid_node,
        "loaded_top_node": frame.loaded_top_node,
    }
    return json.dumps(doc, indent=2)


def frame_from_json(text: str) -> Frame:
    """Inverse of :func:`frame_to_json`. Section quantities are re-derived
    from (A, I, F_y), so only independent values are stored."""
    doc = json.loads(text)
    material = MaterialProperties(**doc["material"])
    nodes = tuple(NodeSpec(**n) for n in doc["nodes"])
    members = tuple(
        MemberSpec(
            id=m["id"],
            node_i=m["node_i"],
            node_j=m["node_j"],
            section=derive_section(m["area"], m["moment_of_inertia"], material.yield_strength),
            kind=m["kind"],
        )
        for m in doc["members"]
    )
    return Frame(
        nodes=nodes,
        members=members,
        material=material,
        story_height=doc["story_height"],
        bay_width=doc["bay_width"],
        phi_scwb=doc["phi_scwb"],
        loaded_mid_node=doc["loaded_mid_node"],
        loaded_top_node=doc["loaded_top_node"],
    )
