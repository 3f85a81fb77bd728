"""Linear direct-stiffness solutions of the reference frame, plus the two
properties that make the solver trustworthy: superposition and symmetry."""

import numpy as np

from framelab.fem import solve_linear
from framelab.frame import LoadCase, build_reference_frame

frame = build_reference_frame()

print("per-node response under several load cases (u_x mm / u_y mm / r_z deg):")
for f_mid, f_top in [(200e3, 150e3), (123.5e3, 100e3), (200e3, 200e3)]:
    response = solve_linear(frame, LoadCase(f_mid, f_top))
    print("\n  f_mid = %.1f kN, f_top = %.1f kN" % (f_mid / 1e3, f_top / 1e3))
    for node_id in response.node_ids:
        ux, uy, rz = response.row(node_id)
        print("    node %d: %8.3f  %7.3f  %10.6f" % (node_id, ux, uy, rz))

# Superposition: solving two cases separately and summing equals solving
# their sum. This is the defining property of the linear operator.
a = LoadCase(120e3, 60e3)
b = LoadCase(-40e3, 90e3)
combined = LoadCase(a.f_mid + b.f_mid, a.f_top + b.f_top)
lhs = solve_linear(frame, a).values + solve_linear(frame, b).values
rhs = solve_linear(frame, combined).values
print("\nsuperposition max deviation: %.2e (machine precision)"
      % np.max(np.abs(lhs - rhs)))

# Mirror symmetry: the frame is symmetric about its centerline, so left and
# right joints sway almost identically under horizontal loads.
response = solve_linear(frame, LoadCase(200e3, 150e3))
for left, right in ((2, 5), (3, 6)):
    rel = abs(response.ux(left) - response.ux(right)) / abs(response.ux(left))
    print("mirror pair (%d, %d): u_x differs by %.2f%%" % (left, right, 100 * rel))
