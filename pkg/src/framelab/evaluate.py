"""Tolerance-based accuracy metrics and report/table emission.

A prediction component counts as accurate when its absolute error is
within the profile's tolerance for that component type and regime. Counts
follow the cases x nodes x components convention so every breakdown is an
exact partition of the total.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import CaseRecord
from .fem import ResponseField, solve_linear, solve_nonlinear
from .frame import Frame, LoadCase
from .graph import NormStats
from .portal import classify_regime_estimate, portal_yield
from .train import predict

COUNTING_CONVENTION = "cases x nodes x components"
CSV_HEADER = "dataset,phase,count,overall,ux,uy,rz"


class EvaluateError(Exception):
    pass


@dataclass(frozen=True)
class ToleranceProfile:
    """Absolute-error thresholds: displacements in mm, rotations in deg.

    ``regime_overrides`` maps a regime label to (displacement, rotation)
    tolerances that replace the defaults for cases in that regime.
    """
    name: str
    displacement_tol: float
    rotation_tol: float
    regime_overrides: dict[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        if self.displacement_tol <= 0 or self.rotation_tol <= 0:
            raise EvaluateError("tolerances must be positive")
        for disp, rot in self.regime_overrides.values():
            if disp <= 0 or rot <= 0:
                raise EvaluateError("tolerances must be positive")

    def tolerances(self, regime: str) -> tuple[float, float]:
        return self.regime_overrides.get(regime, (self.displacement_tol, self.rotation_tol))


# Wider bands in the nonlinear zone account for the larger deformations.
ZONE_PROFILE = ToleranceProfile(
    name="zone",
    displacement_tol=0.2,
    rotation_tol=0.05,
    regime_overrides={"nonlinear": (1.0, 1.0)},
)
STRICT_PROFILE = ToleranceProfile(name="strict", displacement_tol=0.01, rotation_tol=0.001)

PROFILES = {"zone": ZONE_PROFILE, "strict": STRICT_PROFILE}


def component_accurate(pred: float, actual: float, tolerance: float) -> bool:
    """|pred - actual| <= tolerance, for finite inputs."""
    if not (np.isfinite(pred) and np.isfinite(actual)):
        raise EvaluateError("component_accurate needs finite inputs")
    return abs(pred - actual) <= tolerance


@dataclass(frozen=True)
class PhaseAccuracy:
    phase: str   # "overall", "linear", or "nonlinear"
    count: int   # datapoints = cases * nodes * components in this phase
    overall: float
    ux: float
    uy: float
    rz: float


@dataclass(frozen=True)
class AccuracyReport:
    dataset: str
    profile: str
    counting: str
    phases: tuple[PhaseAccuracy, ...]
    per_node: dict[int, float]

    def phase(self, name: str) -> PhaseAccuracy:
        for ph in self.phases:
            if ph.phase == name:
                return ph
        raise KeyError(name)


def _accuracy_flags(
    model, stats: NormStats, frame: Frame, records: list[CaseRecord], profile: ToleranceProfile
) -> np.ndarray:
    """(n_records, n_nodes, 3) boolean accuracy flags."""
    flags = np.zeros((len(records), len(records[0].node_ids), 3), dtype=bool)
    for i, rec in enumerate(records):
        disp_tol, rot_tol = profile.tolerances(rec.regime)
        pred = predict(model, frame, rec.load_case, stats)
        err = np.abs(pred.values - rec.targets)
        flags[i, :, 0] = err[:, 0] <= disp_tol
        flags[i, :, 1] = err[:, 1] <= disp_tol
        flags[i, :, 2] = err[:, 2] <= rot_tol
    return flags


def evaluate(
    model,
    stats: NormStats,
    frame: Frame,
    records: list[CaseRecord],
    profile: ToleranceProfile,
    dataset_name: str = "testing",
) -> AccuracyReport:
    """Accuracy report over a dataset split.

    Regimes absent from the split get no breakdown row rather than a
    zero-filled one.

    Raises:
        EvaluateError: if the split is empty.
    """
    if not records:
        raise EvaluateError("cannot evaluate an empty split")
    flags = _accuracy_flags(model, stats, frame, records, profile)

    def phase_row(name: str, mask: np.ndarray) -> PhaseAccuracy:
        sub = flags[mask]
        return PhaseAccuracy(
            phase=name,
            count=int(sub.size),
            overall=float(sub.mean()),
            ux=float(sub[:, :, 0].mean()),
            uy=float(sub[:, :, 1].mean()),
            rz=float(sub[:, :, 2].mean()),
        )

    regimes = np.array([rec.regime for rec in records])
    phases = [phase_row("overall", np.ones(len(records), dtype=bool))]
    for regime in ("linear", "nonlinear"):
        mask = regimes == regime
        if mask.any():
            phases.append(phase_row(regime, mask))

    per_node = {
        node_id: float(flags[:, pos, :].mean())
        for pos, node_id in enumerate(records[0].node_ids)
    }
    return AccuracyReport(
        dataset=dataset_name,
        profile=profile.name,
        counting=COUNTING_CONVENTION,
        phases=tuple(phases),
        per_node=per_node,
    )


def emit_report(report: AccuracyReport, fmt: str = "text") -> str:
    """Render a report as an aligned-text table or CSV."""
    if fmt == "csv":
        lines = [CSV_HEADER]
        for ph in report.phases:
            lines.append(
                f"{report.dataset},{ph.phase},{ph.count},"
                f"{ph.overall!r},{ph.ux!r},{ph.uy!r},{ph.rz!r}"
            )
        return "\n".join(lines) + "\n"
    if fmt != "text":
        raise EvaluateError(f"unknown report format {fmt!r}")
    lines = [
        f"dataset: {report.dataset}   profile: {report.profile}   "
        f"counting: {report.counting}",
        f"{'phase':<12}{'count':>8}{'overall':>10}{'u_x':>10}{'u_y':>10}{'r_z':>10}",
    ]
    for ph in report.phases:
        lines.append(
            f"{ph.phase:<12}{ph.count:>8}{ph.overall:>9.2%}{ph.ux:>9.2%}"
            f"{ph.uy:>9.2%}{ph.rz:>9.2%}"
        )
    lines.append("per-node: " + "  ".join(
        f"{nid}: {acc:.2%}" for nid, acc in sorted(report.per_node.items())
    ))
    return "\n".join(lines) + "\n"


def parse_report_csv(text: str) -> list[dict]:
    """Inverse of emit_report(..., 'csv') for round-trip checks."""
    lines = [ln for ln in text.strip().splitlines() if ln]
    if lines[0] != CSV_HEADER:
        raise EvaluateError(f"unexpected CSV header {lines[0]!r}")
    rows = []
    for ln in lines[1:]:
        dataset, phase, count, overall, ux, uy, rz = ln.split(",")
        rows.append(
            {
                "dataset": dataset,
                "phase": phase,
                "count": int(count),
                "overall": float(overall),
                "ux": float(ux),
                "uy": float(uy),
                "rz": float(rz),
            }
        )
    return rows


def fem_actual(frame: Frame, loads: LoadCase) -> ResponseField:
    """Ground-truth response: linear below the Portal screen, pushover
    above it (matching how dataset targets are produced)."""
    estimate = portal_yield(frame, frame.material.yield_strength)
    if classify_regime_estimate(loads, estimate) == "linear":
        return solve_linear(frame, loads)
    response, _, _ = solve_nonlinear(frame, loads, n_steps=12)
    return response


def emit_case_table(model, stats: NormStats, frame: Frame, loads: LoadCase) -> str:
    """Side-by-side predicted vs FEM-actual table for one load case.
    Displacements print to 3 decimals, rotations to 6."""
    pred = predict(model, frame, loads, stats)
    actual = fem_actual(frame, loads)
    lines = [
        f"f_mid = {loads.f_mid:.0f} N, f_top = {loads.f_top:.0f} N",
        f"{'node':>4} | {'pred u_x':>10} {'pred u_y':>10} {'pred r_z':>12} | "
        f"{'act u_x':>10} {'act u_y':>10} {'act r_z':>12}",
    ]
    for node_id in pred.node_ids:
        p = pred.row(node_id)
        a = actual.row(node_id)
        lines.append(
            f"{node_id:>4} | {p[0]:>10.3f} {p[1]:>10.3f} {p[2]:>12.6f} | "
            f"{a[0]:>10.3f} {a[1]:>10.3f} {a[2]:>12.6f}"
        )
    return "\n".join(lines) + "\n"
