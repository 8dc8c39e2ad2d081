"""Scan the three-arm interferometer's sensitivity landscape and locate the
working points.

The probe is one photon per input mode; the metric is the trace of the
inverse Fisher information of the photon-counting distribution, the bound
on the summed variances of the two phase estimates.  The scan covers the
full (phi1, phi2) torus on a 256 x 256 grid in well under a minute; the
minima are then polished by simplex descent.
"""

import numpy as np

from mmzi import Probe, export_grid, find_working_points, scan_grid, three_mode_mzi

interferometer = three_mode_mzi()
probe = Probe.fock((1, 1, 1))

print("scanning 256 x 256 grid ...")
grid = scan_grid(interferometer, probe, resolution=256)
print(f"minimum Tr[F^-1] on the grid : {grid.min_trace():.6f}")
print(f"singular cells               : {grid.singular_count()}")
print(f"minimum [F^-1]_11            : {np.nanmin(grid.finv11):.6f}")

points = find_working_points(grid, refine_tol=1e-6)
print(f"\n{len(points)} local minima after refinement; the degenerate global set:")
best = points[0].tr_finv
for wp in points:
    if wp.tr_finv > best + 1e-6:
        continue
    print(
        f"  ({wp.phases[0]:.4f}, {wp.phases[1]:.4f})  "
        f"Tr[F^-1] = {wp.tr_finv:.6f}  diag = ({wp.finv11:.4f}, {wp.finv22:.4f})"
    )

print(
    "\nThe minima come in mirror pairs (swapped diagonal metrics) and repeat "
    "under the splitter's exact phase-shift symmetry."
)

export_grid(grid, "three_mode_landscape.csv", fmt="csv")
print("\ngrid exported to three_mode_landscape.csv")
