"""Portal-Method first-yield estimation and load-regime classification.

The Portal Method reduces the frame to an equivalent beam-column system
and assumes beams yield before columns, so the beam plastic moment sets
the yield criterion: M_y = Z_beam * F_y and V_y ~ 2 M_y / h_story. The
estimate is a fast screen; the authoritative regime label comes from
hinge formation in the nonlinear FEM solve.
"""

from __future__ import annotations

from dataclasses import dataclass

from .fem import count_yielded, solve_nonlinear, story_shears
from .frame import Frame, LoadCase

# Fraction of V_y below which story shears are treated as safely elastic.
DEFAULT_ELASTIC_FRACTION = 0.6


@dataclass(frozen=True)
class YieldEstimate:
    """First-yield screen quantities, all in N·m / N."""
    beam_yield_moment: float  # M_y
    story_shear_yield: float  # V_y
    elastic_bound: float      # fraction of V_y treated as safely linear


@dataclass(frozen=True)
class ScanRow:
    """One row of a proportional load-increment scan."""
    step: int
    load_factor: float
    force: float            # f_top = f_mid at this step
    ratio_story1: float     # V1 / V_y
    ratio_story2: float     # V2 / V_y
    flagged: bool           # first row whose lower-story ratio >= 1


def portal_yield(
    frame: Frame,
    yield_strength: float,
    elastic_fraction: float = DEFAULT_ELASTIC_FRACTION,
) -> YieldEstimate:
    """Estimate the first-yield story shear of a frame.

    ``yield_strength`` is taken as an explicit argument rather than from
    the frame material so alternative steel grades can be screened against
    the same geometry.

    Raises:
        ValueError: if the frame has no beams or F_y is not positive.
    """
    if yield_strength <= 0:
        raise ValueError(f"yield_strength must be positive, got {yield_strength}")
    if not 0.0 < elastic_fraction < 1.0:
        raise ValueError(f"elastic_fraction must lie in (0, 1), got {elastic_fraction}")
    beams = [m for m in frame.members if m.kind == "beam"]
    if not beams:
        raise ValueError("frame has no beam members; Portal Method needs a yielding beam")
    z_beam = beams[0].section.plastic_modulus
    m_y = z_beam * yield_strength
    v_y = 2.0 * m_y / frame.story_height
    return YieldEstimate(
        beam_yield_moment=m_y,
        story_shear_yield=v_y,
        elastic_bound=elastic_fraction * v_y,
    )


def classify_regime_estimate(loads: LoadCase, estimate: YieldEstimate) -> str:
    """Screen a load case against the Portal estimate.

    Returns "linear" when both story shears sit below the elastic bound,
    "nonlinear" when the maximum story shear reaches V_y, and
    "transition" in between.
    """
    v1, v2 = story_shears(loads)
    v_max = max(abs(v1), abs(v2))
    if v_max < estimate.elastic_bound:
        return "linear"
    if v_max >= estimate.story_shear_yield:
        return "nonlinear"
    return "transition"


def classify_regime_fem(frame: Frame, loads: LoadCase, n_steps: int = 12) -> str:
    """Authoritative regime label: nonlinear iff the pushover forms at
    least one plastic hinge at full load."""
    _, states, _ = solve_nonlinear(frame, loads, n_steps=n_steps)
    return "nonlinear" if count_yielded(states) > 0 else "linear"


def increment_scan(
    frame: Frame,
    f_max: float,
    n_steps: int,
    estimate: YieldEstimate,
) -> list[ScanRow]:
    """Proportional scan with f_top = f_mid = (k/n_steps) * f_max.

    Story-shear ratios are reported against the estimate's V_y; the first
    row whose lower-story ratio reaches 1 is flagged.
    """
    if f_max <= 0:
        raise ValueError(f"f_max must be positive, got {f_max}")
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    rows: list[ScanRow] = []
    flagged_yet = False
    for step in range(1, n_steps + 1):
        factor = step / n_steps
        force = factor * f_max
        v1, v2 = story_shears(LoadCase(f_mid=force, f_top=force))
        r1 = v1 / estimate.story_shear_yield
        r2 = v2 / estimate.story_shear_yield
        flag = (not flagged_yet) and r1 >= 1.0
        flagged_yet = flagged_yet or flag
        rows.append(
            ScanRow(step=step, load_factor=factor, force=force,
                    ratio_story1=r1, ratio_story2=r2, flagged=flag)
        )
    return rows
