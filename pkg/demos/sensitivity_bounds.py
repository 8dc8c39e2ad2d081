"""Quantum Fisher information of the benchmark probes versus the limits for
separable (qudit-product) inputs.

For each interferometer preset this prints Tr[F_Q^-1] -- the best possible
summed variance per measurement over all detection schemes -- next to the
bound no separable N-photon probe can beat.  The one-photon-per-arm Fock
states fall below the separable limit; distinguishable photons and
phase-reference-free coherent light sit exactly at or above it.
"""

import numpy as np

from mmzi import (
    Probe,
    four_mode_mzi,
    invert_fisher,
    mmzi_separable_spec,
    qfim_for_probe,
    separable_bounds,
    three_mode_mzi,
)

rows = [
    ("3-arm", three_mode_mzi(), Probe.fock((1, 1, 1)), 3),
    ("3-arm", three_mode_mzi(), Probe.distinguishable((1, 1, 1)), 3),
    ("3-arm", three_mode_mzi(), Probe.coherent(np.sqrt(3.0)), 3),
    ("4-arm", four_mode_mzi(0.001), Probe.fock((1, 1, 1, 1)), 4),
    ("4-arm", four_mode_mzi(0.001), Probe.distinguishable((1, 1, 1, 1)), 4),
    ("4-arm", four_mode_mzi(0.001), Probe.coherent(2.0), 4),
]

print(f"{'circuit':8s} {'probe':16s} {'Tr[FQ^-1]':>10s} {'separable':>10s} {'quantum gain':>13s}")
for label, interf, probe, n_particles in rows:
    fq = qfim_for_probe(interf, probe)
    trace_inv = invert_fisher(fq).trace_inverse()
    bound = separable_bounds(mmzi_separable_spec(n_particles, 2)).trace_min
    gain = "yes" if trace_inv < bound else "no"
    print(f"{label:8s} {probe.kind:16s} {trace_inv:10.4f} {bound:10.4f} {gain:>13s}")

print(
    "\nOnly the indistinguishable Fock probes beat the separable bound: the"
    "\nadvantage is a witness of useful qudit entanglement in the probe."
)
