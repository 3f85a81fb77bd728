"""Load-case sampling, FEM labeling, splitting, and JSONL persistence.

Each case draws (f_mid, f_top) from either the linear or the nonlinear
force range. Cases that pass the Portal elastic screen are solved with the
linear solver; everything else goes through the pushover solver, and the
hinge count decides the final regime label regardless of which range the
case was drawn from.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .fem import FemError, count_yielded, solve_linear, solve_nonlinear
from .frame import Frame, LoadCase
from .portal import DEFAULT_ELASTIC_FRACTION, classify_regime_estimate, portal_yield

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class DatasetError(Exception):
    """Raised for schema mismatches, malformed files, and bad configs."""


@dataclass(frozen=True)
class CaseRecord:
    """One solved load case: inputs, FEM regime label, per-node targets."""
    case_id: int
    f_mid: float
    f_top: float
    regime: str
    node_ids: tuple[int, ...]
    targets: np.ndarray  # (n_nodes, 3): u_x mm, u_y mm, r_z deg

    @property
    def load_case(self) -> LoadCase:
        return LoadCase(self.f_mid, self.f_top)


@dataclass(frozen=True)
class DatasetConfig:
    n_cases: int = 500
    linear_range: tuple[float, float] = (50_000.0, 230_000.0)
    nonlinear_range: tuple[float, float] = (300_000.0, 1_000_000.0)
    linear_fraction: float = 0.6
    split_fraction: float = 0.85
    seed: int = 0
    screen_fraction: float = DEFAULT_ELASTIC_FRACTION
    pushover_steps: int = 12

    def __post_init__(self):
        for name, (lo, hi) in (("linear_range", self.linear_range),
                               ("nonlinear_range", self.nonlinear_range)):
            if not (0 < lo < hi):
                raise DatasetError(f"{name} must be positive and ordered, got ({lo}, {hi})")
        if not 0.0 <= self.linear_fraction <= 1.0:
            raise DatasetError(f"linear_fraction must lie in [0, 1], got {self.linear_fraction}")
        if not 0.0 < self.split_fraction < 1.0:
            raise DatasetError(f"split_fraction must lie in (0, 1), got {self.split_fraction}")
        if self.n_cases < 1:
            raise DatasetError(f"n_cases must be >= 1, got {self.n_cases}")


def _case_rng(seed: int, case_id: int) -> np.random.Generator:
    # Substream per (master seed, case id): draws are independent of
    # generation order, so parallel generation stays deterministic.
    return np.random.default_rng(np.random.SeedSequence((seed, case_id)))


def sample_loads(config: DatasetConfig) -> list[LoadCase]:
    """Draw one load case per case id; both forces come uniformly and
    independently from the range of the regime picked by the mix."""
    cases = []
    for case_id in range(config.n_cases):
        rng = _case_rng(config.seed, case_id)
        lo, hi = (
            config.linear_range
            if rng.uniform() < config.linear_fraction
            else config.nonlinear_range
        )
        f_mid = rng.uniform(lo, hi)
        f_top = rng.uniform(lo, hi)
        cases.append(LoadCase(f_mid=f_mid, f_top=f_top))
    return cases


def generate_dataset(frame: Frame, config: DatasetConfig) -> list[CaseRecord]:
    """Solve every sampled case and label its regime from the FEM result.

    A solver failure aborts that case with the id logged; it is never
    silently dropped from the count without a log line.
    """
    estimate = portal_yield(
        frame, frame.material.yield_strength, elastic_fraction=config.screen_fraction
    )
    node_ids = tuple(n.id for n in frame.nodes)
    records: list[CaseRecord] = []
    for case_id, loads in enumerate(sample_loads(config)):
        try:
            if classify_regime_estimate(loads, estimate) == "linear":
                response = solve_linear(frame, loads)
                regime = "linear"
            else:
                response, states, _ = solve_nonlinear(
                    frame, loads, n_steps=config.pushover_steps
                )
                regime = "nonlinear" if count_yielded(states) > 0 else "linear"
        except FemError as exc:
            logger.error("case %d aborted: %s", case_id, exc)
            continue
        records.append(
            CaseRecord(
                case_id=case_id,
                f_mid=loads.f_mid,
                f_top=loads.f_top,
                regime=regime,
                node_ids=node_ids,
                targets=response.values.copy(),
            )
        )
    return records


def split_dataset(
    records: list[CaseRecord], fraction: float, seed: int
) -> tuple[list[CaseRecord], list[CaseRecord]]:
    """Deterministic shuffled split, stratified by regime label.

    Raises:
        DatasetError: on fewer than 2 records or a fraction outside (0, 1).
    """
    if len(records) < 2:
        raise DatasetError(f"need at least 2 records to split, got {len(records)}")
    if not 0.0 < fraction < 1.0:
        raise DatasetError(f"split fraction must lie in (0, 1), got {fraction}")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x5EED)))
    train: list[CaseRecord] = []
    test: list[CaseRecord] = []
    for regime in ("linear", "nonlinear"):
        stratum = [r for r in records if r.regime == regime]
        if not stratum:
            continue
        order = rng.permutation(len(stratum))
        n_train = int(len(stratum) * fraction + 0.5)
        for rank, idx in enumerate(order):
            (train if rank < n_train else test).append(stratum[idx])
    if not test:
        test.append(train.pop())
    train.sort(key=lambda r: r.case_id)
    test.sort(key=lambda r: r.case_id)
    return train, test


def _record_to_obj(record: CaseRecord) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "case_id": record.case_id,
        "f_mid_n": record.f_mid,
        "f_top_n": record.f_top,
        "regime": record.regime,
        "nodes": [
            {
                "id": node_id,
                "ux_mm": float(row[0]),
                "uy_mm": float(row[1]),
                "rz_deg": float(row[2]),
            }
            for node_id, row in zip(record.node_ids, record.targets)
        ],
    }


def _record_from_obj(obj: dict, line_no: int) -> CaseRecord:
    version = obj.get("schema_version")
    if version is None:
        raise DatasetError(f"line {line_no}: missing field 'schema_version'")
    if version > SCHEMA_VERSION:
        raise DatasetError(
            f"line {line_no}: schema version {version} is newer than supported ({SCHEMA_VERSION})"
        )
    for field_name in ("case_id", "f_mid_n", "f_top_n", "regime", "nodes"):
        if field_name not in obj:
            raise DatasetError(f"line {line_no}: missing field '{field_name}'")
    nodes = obj["nodes"]
    try:
        node_ids = tuple(n["id"] for n in nodes)
        targets = np.array(
            [[n["ux_mm"], n["uy_mm"], n["rz_deg"]] for n in nodes], dtype=float
        )
    except (KeyError, TypeError) as exc:
        raise DatasetError(f"line {line_no}: malformed node entry ({exc})") from exc
    return CaseRecord(
        case_id=obj["case_id"],
        f_mid=obj["f_mid_n"],
        f_top=obj["f_top_n"],
        regime=obj["regime"],
        node_ids=node_ids,
        targets=targets,
    )


def save_dataset(records: list[CaseRecord], path: str) -> None:
    """Write JSON Lines: a header object, then one record per line."""
    header = {
        "kind": "framelab-dataset",
        "schema_version": SCHEMA_VERSION,
        "created": datetime.now(timezone.utc).isoformat(),
        "n_cases": len(records),
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header) + "\n")
        for record in records:
            fh.write(json.dumps(_record_to_obj(record)) + "\n")


def load_dataset(path: str) -> list[CaseRecord]:
    """Read a dataset file, reporting schema problems with line numbers."""
    records: list[CaseRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"line {line_no}: malformed JSON ({exc.msg})") from exc
            if obj.get("kind") == "framelab-dataset":
                version = obj.get("schema_version", 0)
                if version > SCHEMA_VERSION:
                    raise DatasetError(
                        f"line {line_no}: schema version {version} is newer than "
                        f"supported ({SCHEMA_VERSION})"
                    )
                continue
            records.append(_record_from_obj(obj, line_no))
    return records
