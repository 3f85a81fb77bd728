"""Portal-Method yield estimation: where does the frame stop being linear?

The screen computes the beam yield moment and the story shear at first
yield, then classifies load cases. The authoritative label still comes
from the nonlinear FEM solve; the screen exists to route cheap cases to
the cheap solver.
"""

from framelab.frame import LoadCase, build_reference_frame
from framelab.portal import (
    classify_regime_estimate,
    classify_regime_fem,
    increment_scan,
    portal_yield,
)

frame = build_reference_frame()

# Q235-grade yield strength gives the classic textbook numbers.
estimate = portal_yield(frame, yield_strength=2.35e8)
print("M_y = %.4e N·m   V_y = %.4e N   elastic bound = %.4e N"
      % (estimate.beam_yield_moment, estimate.story_shear_yield, estimate.elastic_bound))

# Proportional load scan: equal forces at both stories, ramped to 800 kN.
print("\nscan to 800 kN in 12 steps:")
for row in increment_scan(frame, f_max=8.0e5, n_steps=12, estimate=estimate):
    mark = "   <-- first step at/over V_y" if row.flagged else ""
    print("  step %2d  factor %.3f  f = %8.3g N  V1/V_y = %.3f%s"
          % (row.step, row.load_factor, row.force, row.ratio_story1, mark))

# Screen vs FEM labels for a few cases. The screen is deliberately
# conservative: anything above the elastic bound gets the full pushover.
print("\ncase classification (screen vs FEM):")
for f_mid, f_top in [(0.0, 2.0e5), (200e3, 150e3), (300e3, 300e3), (800e3, 600e3)]:
    screen = classify_regime_estimate(LoadCase(f_mid, f_top), estimate)
    fem = classify_regime_fem(frame, LoadCase(f_mid, f_top))
    print("  (%6.0f, %6.0f) kN: screen=%-10s fem=%s"
          % (f_mid / 1e3, f_top / 1e3, screen, fem))
