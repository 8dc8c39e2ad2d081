import numpy as np
import pytest

from mmzi.optics import (
    Interferometer,
    PhaseConfig,
    compose_interferometer,
    four_mode_mzi,
    multiport_unitary,
    phase_layer,
    three_mode_mzi,
    unitarity_defect,
)


def test_tritter_matrix_entries():
    u = multiport_unitary(3, "tritter")
    assert np.allclose(np.diag(u), 1 / np.sqrt(3))
    off = u[0, 1]
    assert np.isclose(off, np.exp(2j * np.pi / 3) / np.sqrt(3))
    # all off-diagonal entries identical
    mask = ~np.eye(3, dtype=bool)
    assert np.allclose(u[mask], off)
    # flat intensity
    assert np.allclose(np.abs(u) ** 2, 1 / 3)


def test_quarter_matrix_entries():
    u = multiport_unitary(4, "quarter")
    assert np.allclose(np.diag(u), 0.5)
    mask = ~np.eye(4, dtype=bool)
    assert np.allclose(u[mask], -0.5)


@pytest.mark.parametrize("d,kind", [(3, "tritter"), (4, "quarter")])
def test_multiport_unitarity(d, kind):
    assert unitarity_defect(multiport_unitary(d, kind)) < 1e-12


@pytest.mark.parametrize("d,kind", [(2, "tritter"), (3, "quarter"), (5, "tritter")])
def test_multiport_rejects_unsupported(d, kind):
    with pytest.raises(ValueError):
        multiport_unitary(d, kind)


def test_phase_layer_identity_at_zero():
    config = PhaseConfig(unknown=((0, 0.0), (1, 0.0)))
    assert np.allclose(phase_layer(3, config), np.eye(3))


def test_phase_layer_single_entry():
    config = PhaseConfig(unknown=((0, np.pi),))
    layer = phase_layer(3, config)
    assert np.isclose(layer[0, 0], np.exp(-1j * np.pi))
    assert np.isclose(layer[1, 1], 1.0)
    assert np.isclose(layer[2, 2], 1.0)


def test_phase_layer_control_on_third_mode():
    config = PhaseConfig(control=((2, 0.01),))
    layer = phase_layer(4, config)
    assert np.isclose(layer[2, 2], np.exp(-1j * 0.01))
    assert np.isclose(layer[3, 3], 1.0)


def test_phase_layer_duplicate_index_rejected():
    with pytest.raises(ValueError):
        PhaseConfig(unknown=((0, 0.1), (0, 0.2)))


def test_phase_values_reduced_mod_2pi():
    config = PhaseConfig(unknown=((0, 2 * np.pi + 0.5), (1, -0.25)))
    values = dict(config.unknown)
    assert np.isclose(values[0], 0.5)
    assert np.isclose(values[1], 2 * np.pi - 0.25)


def test_compose_identity():
    config = PhaseConfig(unknown=((0, 0.0), (1, 0.0)))
    eye = np.eye(3, dtype=complex)
    assert np.allclose(compose_interferometer(eye, config, eye), np.eye(3))


def test_compose_matches_product():
    u = multiport_unitary(3, "tritter")
    config = PhaseConfig(unknown=((0, 0.0), (1, 0.0)))
    assert np.allclose(compose_interferometer(u, config, u), u @ u)
    config = PhaseConfig(unknown=((0, 0.892), (1, 2.190)))
    expected = u @ phase_layer(3, config) @ u
    assert np.allclose(compose_interferometer(u, config, u), expected)


def test_compose_dimension_mismatch():
    with pytest.raises(ValueError):
        compose_interferometer(np.eye(3), PhaseConfig(), np.eye(4))


def test_composed_unitarity():
    rng = np.random.default_rng(3)
    u = multiport_unitary(4, "quarter")
    for _ in range(20):
        phis = rng.uniform(0, 2 * np.pi, 2)
        config = PhaseConfig(unknown=((0, phis[0]), (1, phis[1])), control=((2, 0.01),))
        assert unitarity_defect(compose_interferometer(u, config, u)) < 1e-12


def test_unitarity_defect_values():
    assert unitarity_defect(np.eye(5)) == 0.0
    assert unitarity_defect(multiport_unitary(3, "tritter")) < 1e-14
    perturbed = multiport_unitary(3, "tritter")
    perturbed[0, 0] += 1e-3
    assert unitarity_defect(perturbed) >= 1e-4


def test_control_and_unknown_shift_cancel():
    # shifting psi_j and phi_j on the same mode by (+x, -x) leaves the circuit alone
    u = multiport_unitary(3, "tritter")
    x = 0.731
    base = PhaseConfig(unknown=((0, 1.1), (1, 0.4)), control=((0, 0.2), (1, 0.9)))
    shifted = PhaseConfig(
        unknown=((0, 1.1 + x), (1, 0.4)), control=((0, 0.2 - x), (1, 0.9))
    )
    assert np.allclose(
        compose_interferometer(u, base, u), compose_interferometer(u, shifted, u)
    )


def test_disjoint_phase_layers_commute():
    a = phase_layer(4, PhaseConfig(unknown=((0, 0.7),)))
    b = phase_layer(4, PhaseConfig(unknown=((2, 1.3),)))
    assert np.allclose(a @ b, b @ a)


def test_interferometer_presets():
    m3 = three_mode_mzi()
    assert m3.d == 3
    assert m3.unknown_modes == (0, 1)
    assert unitarity_defect(m3.unitary([0.1, 0.2])) < 1e-12
    m4 = four_mode_mzi(0.01)
    assert m4.d == 4
    assert m4.fixed_controls == ((2, 0.01),)
    u = m4.unitary([0.3, 0.4], psis=[0.1, 0.2])
    assert unitarity_defect(u) < 1e-12


def test_interferometer_config_counts_controls():
    m4 = four_mode_mzi(0.05)
    config = m4.config([0.3, 0.4], psis=[0.1, 0.2])
    totals = config.mode_totals(4)
    assert np.isclose(totals[0], 0.4)
    assert np.isclose(totals[1], 0.6)
    assert np.isclose(totals[2], 0.05)
    assert totals[3] == 0.0
