"""Plane-frame finite element engine.

Linear direct-stiffness solution plus an incremental pushover solver with
concentrated plastic hinges at member ends (bilinear moment behavior,
hardening ratio alpha). Euler-Bernoulli elements, no shear deformation.
All assembly and solving happens in SI units; results are converted to
mm / deg only at the ResponseField boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .frame import Frame, LoadCase, MemberSpec

DOF_PER_NODE = 3

# Post-yield stiffness ratio of a plastic hinge. Kept as the module-wide
# default; solve_nonlinear takes it as an argument.
DEFAULT_HARDENING_RATIO = 0.02


class FemError(Exception):
    """Raised for singular systems, bad loads, or non-converging steps."""


@dataclass(frozen=True)
class ElementStiffness:
    """Local 6x6 stiffness of one member plus its orientation.

    DOF order is (u_i, v_i, th_i, u_j, v_j, th_j) in member-local axes.
    """
    k_local: np.ndarray
    angle: float
    length: float

    @property
    def transformation(self) -> np.ndarray:
        c, s = math.cos(self.angle), math.sin(self.angle)
        t = np.zeros((6, 6))
        r = np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])
        t[:3, :3] = r
        t[3:, 3:] = r
        return t

    @property
    def k_global(self) -> np.ndarray:
        t = self.transformation
        return t.T @ self.k_local @ t


def _bending_block(ei: float, length: float) -> np.ndarray:
    """4x4 bending stiffness on (v_i, th_i, v_j, th_j)."""
    le = length
    return (ei / le**3) * np.array(
        [
            [12.0, 6.0 * le, -12.0, 6.0 * le],
            [6.0 * le, 4.0 * le**2, -6.0 * le, 2.0 * le**2],
            [-12.0, -6.0 * le, 12.0, -6.0 * le],
            [6.0 * le, 2.0 * le**2, -6.0 * le, 4.0 * le**2],
        ]
    )


def _released_bending(ei: float, length: float, hinge_i: bool, hinge_j: bool) -> np.ndarray:
    """Bending block with ideal hinges condensed out at the flagged ends."""
    kb = _bending_block(ei, length)
    released = [idx for idx, flag in ((1, hinge_i), (3, hinge_j)) if flag]
    if not released:
        return kb
    kept = [i for i in range(4) if i not in released]
    kaa = kb[np.ix_(kept, kept)]
    kab = kb[np.ix_(kept, released)]
    kbb = kb[np.ix_(released, released)]
    cond = kaa - kab @ np.linalg.solve(kbb, kab.T)
    out = np.zeros((4, 4))
    out[np.ix_(kept, kept)] = cond
    return out


def _local_stiffness(
    ea: float,
    ei: float,
    length: float,
    hinge_i: bool = False,
    hinge_j: bool = False,
    alpha: float = DEFAULT_HARDENING_RATIO,
) -> np.ndarray:
    """Local 6x6 tangent. Yielded ends combine alpha times the elastic
    bending block with (1 - alpha) times the hinge-released block, which
    makes the end moment grow at alpha times the elastic rate."""
    k = np.zeros((6, 6))
    k[0, 0] = k[3, 3] = ea / length
    k[0, 3] = k[3, 0] = -ea / length
    if hinge_i or hinge_j:
        kb = alpha * _bending_block(ei, length) + (1.0 - alpha) * _released_bending(
            ei, length, hinge_i, hinge_j
        )
    else:
        kb = _bending_block(ei, length)
    bend_dofs = [1, 2, 4, 5]
    k[np.ix_(bend_dofs, bend_dofs)] += kb
    return k


def element_stiffness(frame: Frame, member: MemberSpec) -> ElementStiffness:
    """Elastic element stiffness in local coordinates plus orientation.

    Raises:
        FemError: if the member endpoints coincide.
    """
    ni, nj = frame.node(member.node_i), frame.node(member.node_j)
    length = math.hypot(nj.x - ni.x, nj.y - ni.y)
    if length <= 0.0:
        raise FemError(f"member {member.id} has coincident endpoints")
    angle = math.atan2(nj.y - ni.y, nj.x - ni.x)
    e = frame.material.youngs_modulus
    k_local = _local_stiffness(e * member.section.area, e * member.section.moment_of_inertia, length)
    return ElementStiffness(k_local=k_local, angle=angle, length=length)


def _node_positions(frame: Frame) -> dict[int, int]:
    return {n.id: idx for idx, n in enumerate(frame.nodes)}


def _member_dofs(frame: Frame, member: MemberSpec, pos: dict[int, int]) -> list[int]:
    pi, pj = pos[member.node_i], pos[member.node_j]
    return [3 * pi, 3 * pi + 1, 3 * pi + 2, 3 * pj, 3 * pj + 1, 3 * pj + 2]


def free_dof_indices(frame: Frame) -> list[int]:
    free = []
    for idx, node in enumerate(frame.nodes):
        for comp, flag in enumerate((node.bc_ux, node.bc_uy, node.bc_rz)):
            if flag == 0:
                free.append(3 * idx + comp)
    return free


def assemble_global(
    frame: Frame,
    hinges: dict[tuple[int, str], bool] | None = None,
    alpha: float = DEFAULT_HARDENING_RATIO,
) -> tuple[np.ndarray, list[int]]:
    """Assemble the (3n x 3n) stiffness matrix and the free-DOF index list.

    ``hinges`` maps (member_id, end) -> yielded flag for the tangent used
    by the pushover solver; omit it for the elastic matrix. Constraints are
    applied by row/column elimination on the returned index list, so fixed
    DOFs stay exactly zero.
    """
    pos = _node_positions(frame)
    n_dofs = DOF_PER_NODE * len(frame.nodes)
    k_full = np.zeros((n_dofs, n_dofs))
    e = frame.material.youngs_modulus
    for member in frame.members:
        es = element_stiffness(frame, member)
        if hinges is not None and (hinges.get((member.id, "i"), False) or hinges.get((member.id, "j"), False)):
            k_local = _local_stiffness(
                e * member.section.area,
                e * member.section.moment_of_inertia,
                es.length,
                hinge_i=hinges.get((member.id, "i"), False),
                hinge_j=hinges.get((member.id, "j"), False),
                alpha=alpha,
            )
            t = es.transformation
            k_elem = t.T @ k_local @ t
        else:
            k_elem = es.k_global
        dofs = _member_dofs(frame, member, pos)
        k_full[np.ix_(dofs, dofs)] += k_elem
    return k_full, free_dof_indices(frame)


@dataclass(frozen=True)
class ResponseField:
    """Per-node response: u_x (mm), u_y (mm), r_z (deg), in frame node order."""
    node_ids: tuple[int, ...]
    values: np.ndarray  # (n_nodes, 3)

    def row(self, node_id: int) -> np.ndarray:
        return self.values[self.node_ids.index(node_id)]

    def ux(self, node_id: int) -> float:
        return float(self.row(node_id)[0])

    def uy(self, node_id: int) -> float:
        return float(self.row(node_id)[1])

    def rz(self, node_id: int) -> float:
        return float(self.row(node_id)[2])


@dataclass(frozen=True)
class HingeState:
    """Yield status of one member end."""
    member_id: int
    end: str  # "i" or "j"
    status: str  # "elastic" or "yielded"
    plastic_moment: float
    hardening_ratio: float


@dataclass(frozen=True)
class PushoverPoint:
    load_factor: float
    response: ResponseField
    v1: float
    v2: float


@dataclass(frozen=True)
class PushoverCurve:
    points: tuple[PushoverPoint, ...]


def story_shears(loads: LoadCase) -> tuple[float, float]:
    """(V1, V2): shear carried by the lower and upper story columns."""
    return loads.f_mid + loads.f_top, loads.f_top


def _load_vector(frame: Frame, loads: LoadCase) -> np.ndarray:
    per_node = loads.expand(frame)
    pos = _node_positions(frame)
    f = np.zeros(DOF_PER_NODE * len(frame.nodes))
    for node_id, (fx, fy, mz) in per_node.items():
        p = pos[node_id]
        f[3 * p : 3 * p + 3] = (fx, fy, mz)
    if not np.all(np.isfinite(f)):
        raise FemError("load case contains NaN or Inf")
    return f


def _solve_free(k_full: np.ndarray, free: list[int], f_full: np.ndarray) -> np.ndarray:
    """Solve the eliminated system; returns the full displacement vector
    with exact zeros on restrained DOFs."""
    k_free = k_full[np.ix_(free, free)]
    f_free = f_full[free]
    try:
        d_free = np.linalg.solve(k_free, f_free)
    except np.linalg.LinAlgError as exc:
        raise FemError(f"singular stiffness system (mechanism): {exc}") from exc
    if not np.all(np.isfinite(d_free)):
        raise FemError("non-finite displacement solution")
    # near-singular systems can pass LAPACK yet return garbage; the residual
    # catches rigid-body mechanisms reliably
    residual = np.linalg.norm(k_free @ d_free - f_free)
    scale = np.linalg.norm(f_free)
    if scale > 0 and residual > 1e-6 * scale:
        raise FemError(f"ill-conditioned stiffness system (mechanism), residual {residual:.2e}")
    d = np.zeros_like(f_full)
    d[free] = d_free
    return d


def _to_response(frame: Frame, d_full: np.ndarray) -> ResponseField:
    n = len(frame.nodes)
    values = np.zeros((n, 3))
    for idx in range(n):
        ux, uy, rz = d_full[3 * idx : 3 * idx + 3]
        values[idx] = (ux * 1000.0, uy * 1000.0, math.degrees(rz))
    return ResponseField(node_ids=tuple(node.id for node in frame.nodes), values=values)


def solve_linear(frame: Frame, loads: LoadCase) -> ResponseField:
    """Small-displacement elastic solution."""
    k_full, free = assemble_global(frame)
    f_full = _load_vector(frame, loads)
    d = _solve_free(k_full, free, f_full)
    return _to_response(frame, d)


def _end_moment_increments(
    frame: Frame,
    dd_full: np.ndarray,
    hinges: dict[tuple[int, str], bool],
    alpha: float,
    pos: dict[int, int],
) -> dict[tuple[int, str], float]:
    """Member-end moment increments produced by a displacement increment,
    using each member's current tangent."""
    e = frame.material.youngs_modulus
    out: dict[tuple[int, str], float] = {}
    for member in frame.members:
        es = element_stiffness(frame, member)
        k_local = _local_stiffness(
            e * member.section.area,
            e * member.section.moment_of_inertia,
            es.length,
            hinge_i=hinges.get((member.id, "i"), False),
            hinge_j=hinges.get((member.id, "j"), False),
            alpha=alpha,
        )
        dofs = _member_dofs(frame, member, pos)
        d_local = es.transformation @ dd_full[dofs]
        f_local = k_local @ d_local
        out[(member.id, "i")] = float(f_local[2])
        out[(member.id, "j")] = float(f_local[5])
    return out


def solve_nonlinear(
    frame: Frame,
    loads: LoadCase,
    n_steps: int = 20,
    alpha: float = DEFAULT_HARDENING_RATIO,
    max_bisections: int = 20,
) -> tuple[ResponseField, list[HingeState], PushoverCurve]:
    """Incremental pushover from zero to the full load.

    The load is applied proportionally in ``n_steps`` equal increments.
    Whenever a member-end moment crosses its plastic capacity M_p inside a
    step, the step is subdivided by bisection on the load factor (at most
    ``max_bisections`` halvings) so the hinge activates at its crossing
    point; the end then switches to hinged connectivity with a hardening
    spring of ratio ``alpha``.

    Raises:
        FemError: on a singular tangent, naming the offending step.
    """
    if n_steps < 10:
        raise FemError(f"n_steps must be >= 10, got {n_steps}")
    if not 0.0 < alpha < 1.0:
        raise FemError(f"hardening ratio must lie in (0, 1), got {alpha}")

    pos = _node_positions(frame)
    f_full = _load_vector(frame, loads)
    n_dofs = f_full.shape[0]

    hinges: dict[tuple[int, str], bool] = {
        (m.id, end): False for m in frame.members for end in ("i", "j")
    }
    m_p = {
        (m.id, end): m.section.plastic_moment for m in frame.members for end in ("i", "j")
    }
    moments = {key: 0.0 for key in hinges}
    d_full = np.zeros(n_dofs)
    lam = 0.0
    points = [PushoverPoint(0.0, _to_response(frame, d_full), 0.0, 0.0)]

    for step in range(1, n_steps + 1):
        lam_target = step / n_steps
        stall_guard = 0
        while lam < lam_target - 1e-15:
            k_full, free = assemble_global(frame, hinges=hinges, alpha=alpha)
            try:
                dd_full = _solve_free(k_full, free, f_full * (lam_target - lam))
            except FemError as exc:
                raise FemError(f"load step {step}: {exc}") from exc
            dm = _end_moment_increments(frame, dd_full, hinges, alpha, pos)

            def exceeding(fraction: float) -> list[tuple[int, str]]:
                return [
                    key
                    for key, yielded in hinges.items()
                    if not yielded
                    and abs(moments[key] + fraction * dm[key]) > m_p[key] * (1.0 + 1e-12)
                ]

            if not exceeding(1.0):
                d_full = d_full + dd_full
                for key in moments:
                    moments[key] += dm[key]
                lam = lam_target
                break

            lo, hi = 0.0, 1.0
            for _ in range(max_bisections):
                mid = 0.5 * (lo + hi)
                if exceeding(mid):
                    hi = mid
                else:
                    lo = mid
            d_full = d_full + lo * dd_full
            for key in moments:
                moments[key] += lo * dm[key]
            lam = lam + lo * (lam_target - lam)
            for key in exceeding(hi):
                hinges[key] = True
            stall_guard += 1
            if stall_guard > 2 * len(hinges) + 4:
                raise FemError(f"load step {step}: hinge activation did not converge")

        scaled = loads.scaled(lam_target)
        v1, v2 = story_shears(scaled)
        points.append(PushoverPoint(lam_target, _to_response(frame, d_full), v1, v2))

    states = [
        HingeState(
            member_id=member_id,
            end=end,
            status="yielded" if hinges[(member_id, end)] else "elastic",
            plastic_moment=m_p[(member_id, end)],
            hardening_ratio=alpha,
        )
        for (member_id, end) in sorted(hinges)
    ]
    return points[-1].response, states, PushoverCurve(points=tuple(points))


def count_yielded(states: list[HingeState]) -> int:
    return sum(1 for s in states if s.status == "yielded")
