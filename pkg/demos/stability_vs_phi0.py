"""How the auxiliary control phase of the four-arm interferometer stabilizes
the neighbourhood of its working point.

At phi0 -> 0 the information matrix degenerates around [pi, pi]; raising
phi0 pushes the near-singular structures away, at a small cost in the
attainable precision.  This samples a disc around the working point and
reports the singular-sample count and the determinant floor for a few phi0
values, plus the sensitivity trade-off.
"""

import numpy as np

from mmzi import Probe, four_mode_mzi, stability_region
from mmzi.fisher import fisher_matrix, invert_fisher
from mmzi.probes import build_model

center = (np.pi, np.pi)
probe = Probe.fock((1, 1, 1, 1))

print(f"{'phi0':>8s} {'singular samples':>17s} {'min |det F|':>12s} {'Tr[F^-1] at center':>19s}")
for phi0 in [0.001, 0.01, 0.03, 0.1]:
    interf = four_mode_mzi(phi0)
    report = stability_region(interf, probe, center, delta=0.1, n_samples=1000)
    model = build_model(interf, probe)
    inv = invert_fisher(fisher_matrix(model.distribution(np.array(center))))
    trace = "singular" if inv.singular else f"{inv.trace_inverse():.5f}"
    print(f"{phi0:8.3f} {report.singular_count:17d} {report.min_abs_det:12.2e} {trace:>19s}")

print(
    "\nAway from phi0 = 0 the disc stops collecting singular samples (more"
    "\nstable estimation) while the central sensitivity degrades only slowly."
)
