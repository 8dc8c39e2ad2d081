import numpy as np
import pytest

from mmzi.fisher import (
    FisherMatrix,
    SingularSupportError,
    entanglement_witness,
    fisher_matrix,
    invert_fisher,
    mmzi_separable_spec,
    qfim_for_probe,
    qfim_pure,
    qfim_sector_mixture,
    separable_bounds,
)
from mmzi.fock import enumerate_fock_basis, sector_unitary, single_mode_sector_state
from mmzi.optics import four_mode_mzi, three_mode_mzi
from mmzi.probes import OutcomeDistribution, Probe, build_model

THREE = three_mode_mzi()
FOUR = four_mode_mzi(0.001)

Q1 = np.array([0.8920298, 2.1908384])

PAPER_PROBES = [
    (THREE, Probe.fock((1, 1, 1))),
    (THREE, Probe.distinguishable((1, 1, 1))),
    (FOUR, Probe.fock((1, 1, 1, 1))),
    (FOUR, Probe.distinguishable((1, 1, 1, 1))),
]


def synthetic_distribution(probs, grads):
    return OutcomeDistribution(
        outcomes=tuple((k,) for k in range(len(probs))),
        probs=np.asarray(probs, dtype=float),
        grads=np.asarray(grads, dtype=float),
        phases=THREE.config([0.0, 0.0]),
    )


def test_fim_zero_for_phase_independent():
    dist = synthetic_distribution([0.5, 0.5], [[0.0], [0.0]])
    assert np.allclose(fisher_matrix(dist).matrix, 0.0)


def test_fim_two_outcome_interferometer():
    # p = (cos^2(phi/2), sin^2(phi/2)) gives unit information for any phi
    for phi in [0.3, 1.2, 2.7]:
        p = np.array([np.cos(phi / 2) ** 2, np.sin(phi / 2) ** 2])
        dp = np.array([[-np.sin(phi) / 2], [np.sin(phi) / 2]])
        f = fisher_matrix(synthetic_distribution(p, dp))
        assert np.isclose(f.matrix[0, 0], 1.0, atol=1e-12)


def test_fim_singular_support_error():
    dist = synthetic_distribution([0.0, 1.0], [[0.5], [-0.5]])
    with pytest.raises(SingularSupportError):
        fisher_matrix(dist)


def test_fim_drops_removable_zero_outcomes():
    dist = synthetic_distribution([0.0, 0.4, 0.6], [[0.0], [0.2], [-0.2]])
    f = fisher_matrix(dist)
    assert np.isclose(f.matrix[0, 0], 0.04 / 0.4 + 0.04 / 0.6)


def test_fim_diag_at_first_working_point():
    model = build_model(THREE, Probe.fock((1, 1, 1)))
    f = fisher_matrix(model.distribution(Q1))
    inv = invert_fisher(f)
    diag = sorted(np.diag(inv.inverse))
    assert abs(diag[0] - 0.282) < 0.001
    assert abs(diag[1] - 0.309) < 0.001
    assert abs(np.trace(inv.inverse) - 0.5917) < 0.001


def test_invert_identity_and_diagonal():
    inv = invert_fisher(FisherMatrix(np.eye(2)))
    assert not inv.singular
    assert np.allclose(inv.inverse, np.eye(2))
    inv2 = invert_fisher(FisherMatrix(np.diag([4.0, 2.0])))
    assert np.allclose(inv2.inverse, np.diag([0.25, 0.5]))


def test_invert_singular_verdict():
    inv = invert_fisher(FisherMatrix(np.array([[1.0, 1.0], [1.0, 1.0]])))
    assert inv.singular
    assert inv.inverse is None
    assert abs(inv.det) < 1e-12
    with pytest.raises(ValueError):
        inv.trace_inverse()


def test_invert_singular_at_white_region_point():
    # the zero-phase point of the triple-Fock landscape has det F = 0 exactly
    model = build_model(THREE, Probe.fock((1, 1, 1)))
    f = fisher_matrix(model.distribution([0.0, 0.0]))
    inv = invert_fisher(f)
    assert inv.singular
    assert abs(inv.det) < 1e-12


def test_qfim_requires_normalized_state():
    basis = enumerate_fock_basis(3, 1)
    with pytest.raises(ValueError):
        qfim_pure(np.array([1.0, 1.0, 0.0]), basis, (0, 1))


@pytest.mark.parametrize(
    "interf,probe,expected",
    [
        (THREE, Probe.fock((1, 1, 1)), 0.5),
        (THREE, Probe.distinguishable((1, 1, 1)), 1.0),
        (THREE, Probe.coherent(np.sqrt(3.0)), 1.0),
        (FOUR, Probe.fock((1, 1, 1, 1)), 0.375),
        (FOUR, Probe.distinguishable((1, 1, 1, 1)), 0.75),
        (FOUR, Probe.coherent(2.0), 0.75),
    ],
)
def test_qfim_trace_inverse_table(interf, probe, expected):
    fq = qfim_for_probe(interf, probe)
    assert abs(invert_fisher(fq).trace_inverse() - expected) < 1e-6


def test_distinguishable_qfim_closed_form():
    fq = qfim_for_probe(THREE, Probe.distinguishable((1, 1, 1)))
    expected = (4.0 / 3.0) * np.array([[2.0, -1.0], [-1.0, 2.0]])
    assert np.allclose(fq.matrix, expected, atol=1e-12)


def test_qfim_sector_mixture_single_sector():
    basis = enumerate_fock_basis(3, 3)
    state = sector_unitary(THREE.u_in, 3)[:, 0]
    state = state / np.linalg.norm(state)
    direct = qfim_pure(state, basis, (0, 1))
    mixed = qfim_sector_mixture([1.0], [state], [basis], (0, 1))
    assert np.allclose(direct.matrix, mixed.matrix)


def test_qfim_sector_mixture_weight_mismatch():
    basis = enumerate_fock_basis(3, 1)
    state = single_mode_sector_state(THREE.u_in, 0, 1)
    with pytest.raises(ValueError):
        qfim_sector_mixture([0.6, 0.6], [state, state], [basis, basis], (0, 1))


def test_separable_bound_values():
    b3 = separable_bounds(mmzi_separable_spec(3, 2))
    assert np.allclose(b3.f_jj_max, 3.0)
    assert np.allclose(b3.inv_diag_min, 1.0 / 3.0)
    assert abs(b3.trace_min - 2.0 / 3.0) < 1e-12
    b4 = separable_bounds(mmzi_separable_spec(4, 2))
    assert abs(b4.trace_min - 0.5) < 1e-12
    assert np.allclose(b4.inv_diag_min, 0.25)
    b1 = separable_bounds(mmzi_separable_spec(1, 1))
    assert np.allclose(b1.f_jj_max, 1.0)


def test_witness_flags_entangled_fock_probe():
    model = build_model(THREE, Probe.fock((1, 1, 1)))
    f = fisher_matrix(model.distribution(Q1))
    verdict = entanglement_witness(f, mmzi_separable_spec(3, 2))
    assert verdict.trace_violation
    assert all(verdict.inv_diag_violation)
    assert verdict.entangled


def test_witness_zero_matrix_no_violation():
    verdict = entanglement_witness(
        FisherMatrix(np.zeros((2, 2))), mmzi_separable_spec(3, 2)
    )
    assert verdict.fjj_violation == (False, False)
    assert verdict.trace_violation is None  # zero matrix is singular
    assert not verdict.entangled


def test_witness_singular_still_reports_fjj():
    f = FisherMatrix(np.array([[5.0, 5.0], [5.0, 5.0]]))
    verdict = entanglement_witness(f, mmzi_separable_spec(3, 2))
    assert verdict.trace_violation is None
    assert verdict.fjj_violation == (True, True)
    assert verdict.entangled


def test_witness_rejects_quantum_matrix():
    with pytest.raises(ValueError):
        entanglement_witness(
            FisherMatrix(np.eye(2), kind="quantum"), mmzi_separable_spec(3, 2)
        )


@pytest.mark.parametrize("interf,probe", PAPER_PROBES)
def test_cauchy_schwarz_chain(interf, probe):
    rng = np.random.default_rng(17)
    model = build_model(interf, probe)
    for _ in range(40):
        f = fisher_matrix(model.distribution(rng.uniform(0, 2 * np.pi, 2)))
        inv = invert_fisher(f)
        if inv.singular:
            continue
        for j in range(2):
            assert inv.inverse[j, j] * f.matrix[j, j] >= 1.0 - 1e-9


@pytest.mark.parametrize("interf,probe", PAPER_PROBES)
def test_classical_bounded_by_quantum(interf, probe):
    rng = np.random.default_rng(23)
    model = build_model(interf, probe)
    fq = qfim_for_probe(interf, probe).matrix
    for _ in range(100):
        f = fisher_matrix(model.distribution(rng.uniform(0, 2 * np.pi, 2))).matrix
        # diagonal bound
        assert np.all(np.diag(f) <= np.diag(fq) + 1e-9)
        # matrix bound
        assert np.min(np.linalg.eigvalsh(fq - f)) >= -1e-9


def test_variance_bound_on_qfim_diagonal():
    basis = enumerate_fock_basis(3, 3)
    occ = np.array(basis, dtype=float)
    rng = np.random.default_rng(31)
    for _ in range(20):
        z = rng.normal(size=len(basis)) + 1j * rng.normal(size=len(basis))
        state = z / np.linalg.norm(z)
        fq = qfim_pure(state, basis, (0, 1)).matrix
        w = np.abs(state) ** 2
        for j, mode in enumerate((0, 1)):
            var = w @ occ[:, mode] ** 2 - (w @ occ[:, mode]) ** 2
            assert fq[j, j] <= 4.0 * var + 1e-9


def test_qfim_additivity_on_product_states():
    # N independent single photons: QFIM is the sum of the single-photon ones
    single = qfim_for_probe(THREE, Probe.distinguishable((1, 0, 0))).matrix
    single2 = qfim_for_probe(THREE, Probe.distinguishable((0, 1, 0))).matrix
    single3 = qfim_for_probe(THREE, Probe.distinguishable((0, 0, 1))).matrix
    total = qfim_for_probe(THREE, Probe.distinguishable((1, 1, 1))).matrix
    assert np.allclose(total, single + single2 + single3, atol=1e-10)


def test_saturation_for_scalar_matrix():
    f = FisherMatrix(2.5 * np.eye(3))
    inv = invert_fisher(f)
    for j in range(3):
        assert np.isclose(inv.inverse[j, j] * f.matrix[j, j], 1.0)
