import itertools

import numpy as np
import pytest
from scipy import stats as sps

from mmzi.optics import Interferometer, four_mode_mzi, three_mode_mzi
from mmzi.probes import (
    CoherentProbeModel,
    Probe,
    build_model,
    coherent_cutoff,
    coherent_distribution,
    outcome_distribution,
)

THREE = three_mode_mzi()
FOUR = four_mode_mzi(0.01)


def finite_difference_grads(model, phis, h=1e-5):
    phis = np.asarray(phis, dtype=float)
    grads = np.zeros((len(model.outcomes), len(phis)))
    for j in range(len(phis)):
        e = np.zeros(len(phis))
        e[j] = h
        hi = model.distribution(phis + e).probs
        lo = model.distribution(phis - e).probs
        grads[:, j] = (hi - lo) / (2 * h)
    return grads


def test_probe_validation():
    with pytest.raises(ValueError):
        Probe.fock((0, 0, 0))
    with pytest.raises(ValueError):
        Probe.coherent(0.0)
    with pytest.raises(ValueError):
        Probe(kind="squeezed")


@pytest.mark.parametrize(
    "interf,probe",
    [
        (THREE, Probe.fock((1, 1, 1))),
        (FOUR, Probe.fock((1, 1, 1, 1))),
        (THREE, Probe.distinguishable((1, 1, 1))),
        (FOUR, Probe.distinguishable((1, 1, 1, 1))),
    ],
)
def test_probability_conservation_and_gradient_sum(interf, probe):
    rng = np.random.default_rng(42)
    model = build_model(interf, probe)
    for _ in range(25):
        phis = rng.uniform(0, 2 * np.pi, 2)
        dist = model.distribution(phis)
        dist.validate()
        assert abs(dist.probs.sum() - 1.0) < 1e-10
        assert np.max(np.abs(dist.grads.sum(axis=0))) < 1e-10


def test_coherent_conservation_at_truncation_tolerance():
    rng = np.random.default_rng(7)
    model = build_model(THREE, Probe.coherent(np.sqrt(3.0)))
    for _ in range(10):
        dist = model.distribution(rng.uniform(0, 2 * np.pi, 2))
        dist.validate()
        assert abs(dist.probs.sum() - 1.0) < 2e-8


@pytest.mark.parametrize(
    "interf,probe",
    [
        (THREE, Probe.fock((1, 1, 1))),
        (FOUR, Probe.fock((1, 1, 1, 1))),
        (THREE, Probe.distinguishable((1, 1, 1))),
        (THREE, Probe.coherent(np.sqrt(3.0))),
        (FOUR, Probe.coherent(2.0)),
    ],
)
def test_analytic_gradients_match_finite_differences(interf, probe):
    rng = np.random.default_rng(11)
    model = build_model(interf, probe)
    for _ in range(100):
        phis = rng.uniform(0, 2 * np.pi, 2)
        dist = model.distribution(phis)
        fd = finite_difference_grads(model, phis)
        # relative to the dominant gradient: per-entry ratios are
        # ill-conditioned where the gradient itself vanishes
        scale = max(np.max(np.abs(fd)), 1e-12)
        assert np.max(np.abs(dist.grads - fd)) / scale < 1e-6


def test_batch_matches_pointwise():
    rng = np.random.default_rng(5)
    for probe in [Probe.fock((1, 1, 1)), Probe.distinguishable((1, 1, 1)),
                  Probe.coherent(1.2)]:
        model = build_model(THREE, probe)
        points = rng.uniform(0, 2 * np.pi, (6, 2))
        probs, grads = model.prob_batch(points)
        for k, phis in enumerate(points):
            dist = model.distribution(phis)
            assert np.allclose(probs[k], dist.probs, atol=1e-12)
            assert np.allclose(grads[k], dist.grads, atol=1e-12)


def test_distinguishable_matches_labeled_enumeration():
    """Brute-force oracle: every photon is labeled and assigned a mode."""
    model = build_model(THREE, Probe.distinguishable((1, 1, 1)), psis=None)
    phis = np.array([0.83, 2.11])
    config = THREE.config(phis)
    u = THREE.u_out @ np.diag(np.exp(-1j * config.mode_totals(3))) @ THREE.u_in
    single = np.abs(u) ** 2  # single[i, q]: photon entering q exits i
    expected = {}
    for assignment in itertools.product(range(3), repeat=3):
        counts = tuple(assignment.count(m) for m in range(3))
        weight = np.prod([single[assignment[q], q] for q in range(3)])
        expected[counts] = expected.get(counts, 0.0) + weight
    dist = model.distribution(phis)
    for occ, p in zip(dist.outcomes, dist.probs):
        assert np.isclose(p, expected.get(occ, 0.0), atol=1e-12)


def test_coherent_identity_circuit_is_poisson():
    eye = np.eye(3, dtype=complex)
    interf = Interferometer(
        u_in=eye, u_out=eye, unknown_modes=(0, 1), control_modes=(0, 1)
    )
    model = CoherentProbeModel(interf, Probe.coherent(np.sqrt(3.0), input_mode=0))
    dist = model.distribution([0.0, 0.0])
    for occ, p in zip(dist.outcomes, dist.probs):
        if occ[1] == 0 and occ[2] == 0:
            assert np.isclose(p, sps.poisson.pmf(occ[0], 3.0), atol=1e-12)
        else:
            assert p < 1e-14


def test_coherent_cutoff_is_minimal_for_tail():
    for mean in [3.0, 4.0]:
        n_max = coherent_cutoff(mean)
        assert sps.poisson.sf(n_max, mean) < 1e-8
        assert sps.poisson.sf(n_max - 1, mean) >= 1e-8


def test_coherent_truncation_tail():
    model = build_model(THREE, Probe.coherent(np.sqrt(3.0)))
    assert sps.poisson.sf(model.n_max, 3.0) < 1e-8
    totals = np.array([sum(occ) for occ in model.outcomes])
    assert totals.max() == model.n_max


def test_outcome_distribution_entry_points():
    config = THREE.config([0.4, 1.3])
    dist = outcome_distribution(THREE.u_in, config, THREE.u_out, Probe.fock((1, 1, 1)))
    assert abs(dist.probs.sum() - 1.0) < 1e-10
    with pytest.raises(ValueError):
        outcome_distribution(THREE.u_in, config, THREE.u_out, Probe.coherent(1.0))
    dist_c = coherent_distribution(
        THREE.u_in, config, THREE.u_out, Probe.coherent(np.sqrt(3.0))
    )
    assert abs(dist_c.probs.sum() - 1.0) < 2e-8
    with pytest.raises(ValueError):
        coherent_distribution(THREE.u_in, config, THREE.u_out, Probe.fock((1, 1, 1)))


def test_fock_outcomes_equal_sector_basis():
    model = build_model(FOUR, Probe.fock((1, 1, 1, 1)))
    assert len(model.outcomes) == 35
    assert all(sum(occ) == 4 for occ in model.outcomes)
