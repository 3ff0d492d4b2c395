import numpy as np
import pytest

from blochstrip.bands import BasisProvider
from blochstrip.cell import build_coefficient_field, free_space_field
from blochstrip.radiation import DiscreteBlochMeasure
from blochstrip.transmission import (refraction_report, transmitted_modes,
                                     validate_against_field)

PI2 = np.pi**2


@pytest.fixture(scope="module")
def free_crystal_provider():
    # free space treated as the "crystal" side: closed-form oracle territory
    return BasisProvider(free_space_field(), 4)


def test_free_space_candidates_normal_line(free_crystal_provider):
    omega = np.pi / 2  # omega^2 = pi^2/4
    cands = transmitted_modes(free_crystal_provider, omega, 0.0, grid_n=128)
    assert len(cands) == 1
    c = cands[0]
    assert c.j[0] == pytest.approx(0.25, abs=1e-6)
    assert c.group_velocity[0] == pytest.approx(8 * PI2 * 0.25, rel=1e-3)
    assert abs(c.mu_defect) <= 1e-8 * omega**2


def test_zero_frequency_no_candidates(free_crystal_provider):
    # the only root has vanishing group velocity and is filtered by (c)
    cands = transmitted_modes(free_crystal_provider, 0.0, 0.0, grid_n=64)
    assert cands == []


def test_snell_consistency(free_crystal_provider):
    # free space on both sides: transmitted horizontal wavenumber is the
    # positive branch of sqrt(omega^2/4pi^2 - k2^2)
    k2 = 0.125
    omega = 2 * np.pi * np.hypot(0.3, k2)
    cands = transmitted_modes(free_crystal_provider, omega, k2, grid_n=256)
    survivors = [c for c in cands if not c.vertical_flux]
    assert len(survivors) == 1
    expected = np.sqrt(omega**2 / (4 * PI2) - k2**2)
    assert survivors[0].j[0] == pytest.approx(expected, abs=1e-6)


def test_rod_candidate_reverified_by_eigensolve(rod_provider):
    omega = np.sqrt(3.06)
    cands = transmitted_modes(rod_provider, omega, -0.25, grid_n=256)
    assert len(cands) == 1
    j = cands[0].j
    mu = rod_provider.band_on_points("plus", np.array(j), 1)[0, 0]
    assert mu == pytest.approx(omega**2, rel=1e-8)


def test_root_count_stable_under_grid_doubling(rod_provider):
    omega = np.sqrt(3.06)
    a = transmitted_modes(rod_provider, omega, -0.25, grid_n=128)
    b = transmitted_modes(rod_provider, omega, -0.25, grid_n=256)
    assert len(a) == len(b)


def test_refraction_free_space_is_positive(free_crystal_provider):
    k = (0.3, -0.125)
    omega = 2 * np.pi * np.hypot(*k)
    cands = transmitted_modes(free_crystal_provider, omega, k[1], grid_n=256)
    pred = refraction_report(k, cands, omega)
    assert pred.uniqueness == "unique"
    assert not pred.negative_refraction
    # transmitted vertical group velocity carries the sign of k2
    assert np.sign(pred.candidates[0].group_velocity[1]) == np.sign(k[1])


def test_refraction_normal_incidence_is_false(free_crystal_provider):
    omega = np.pi / 2
    cands = transmitted_modes(free_crystal_provider, omega, 0.0, grid_n=128)
    pred = refraction_report((0.25, 0.0), cands, omega)
    assert pred.negative_refraction is False


def test_refraction_flag_sign_convention():
    from blochstrip.transmission import Candidate
    cand = Candidate(j=(0.4, 0.875), mu_defect=0.0, group_velocity=(6.7, 1.5),
                     gv_from_differences=False, P0=0.5, vertical_flux=False)
    pred = refraction_report((0.129, -0.125), [cand], 1.129)
    assert pred.negative_refraction is True
    pred2 = refraction_report((0.129, 0.125), [cand], 1.129)
    assert pred2.negative_refraction is False


def test_laminate_unique_negative_candidate(laminate_config):
    provider = BasisProvider(laminate_config.field, laminate_config.cutoff)
    cands = transmitted_modes(provider, laminate_config.omega, laminate_config.k[1],
                              grid_n=256)
    pred = refraction_report(laminate_config.k, cands, laminate_config.omega)
    assert pred.uniqueness == "unique"
    assert pred.negative_refraction
    c = pred.candidates[0]
    assert c.group_velocity[0] > 0 and c.group_velocity[1] > 0
    assert c.j[1] == pytest.approx(0.875)


def test_validate_against_synthetic_measure():
    from blochstrip.transmission import Candidate, TransmissionPrediction
    cand = Candidate(j=(0.375, 0.75), mu_defect=0.0, group_velocity=(5.0, -1.0),
                     gv_from_differences=False, P0=0.4, vertical_flux=False)
    pred = TransmissionPrediction(omega=2.0, k=(0.2, -0.25), candidates=[cand],
                                  vertical_candidates=[], negative_refraction=False,
                                  per_candidate_negative=[False], uniqueness="unique")
    atoms = np.zeros((8, 8))
    atoms[3, 6] = 0.9
    atoms[2, 6] = 0.1
    meas = DiscreteBlochMeasure(l=0, side="plus", R=8, atoms=atoms, residual_mass=0.0,
                                field_mass=1.0)
    result = validate_against_field(pred, meas)
    assert not result.impossible
    assert result.distance_to_prediction <= 2 / 8
    assert result.mass_fraction_near_prediction >= 0.99


def test_validate_zero_measure_flagged():
    from blochstrip.transmission import TransmissionPrediction
    pred = TransmissionPrediction(omega=1.0, k=(0.1, 0.0), candidates=[],
                                  vertical_candidates=[], negative_refraction=False,
                                  per_candidate_negative=[], uniqueness="none")
    meas = DiscreteBlochMeasure(l=0, side="plus", R=4, atoms=np.zeros((4, 4)),
                                residual_mass=0.0, field_mass=0.0)
    result = validate_against_field(pred, meas)
    assert result.impossible


def test_free_space_to_free_space_run_peak(free_provider):
    # solve with no crystal at all: the measure peak sits at (k mod 1)
    from blochstrip.solve import ScatterConfig, SpongeSpec, solve_scattering
    from blochstrip.radiation import bloch_measure
    k = (0.375, 0.0)
    cfg = ScatterConfig(omega=2 * np.pi * 0.375, k=k, epsilon=1.0, K=1,
                        x_lo=-34.0, x_hi=34.0, n_cell=16,
                        sponge=SpongeSpec(width=16.0, delta_max=3.0, exponent=3.0),
                        tfsf_plane=-9.0)
    u = solve_scattering(cfg, free_space_field())
    meas = bloch_measure(u, "plus", 0, 8, 2, free_provider)
    from blochstrip.transmission import Candidate, TransmissionPrediction
    cand = Candidate(j=(0.375, 0.0), mu_defect=0.0,
                     group_velocity=(8 * PI2 * 0.375, 0.0),
                     gv_from_differences=False, P0=2 * np.pi * 0.375, vertical_flux=False)
    pred = TransmissionPrediction(omega=cfg.omega, k=k, candidates=[cand],
                                  vertical_candidates=[], negative_refraction=False,
                                  per_candidate_negative=[False], uniqueness="unique")
    result = validate_against_field(pred, meas)
    assert result.distance_to_prediction <= 1 / 8


def test_dielectric_jump_run_peak():
    # a = 4 on the right: the peak lies on the conserved line, on-shell for the
    # scaled closed-form bands mu = 4 * 4pi^2 |k+j|^2
    from blochstrip.solve import ScatterConfig, SpongeSpec, solve_scattering
    from blochstrip.radiation import bloch_measure
    jump = build_coefficient_field({"type": "constant", "value": 4.0})
    provider = BasisProvider(jump, 4)
    k = (0.25, 0.0)
    cfg = ScatterConfig(omega=2 * np.pi * 0.25, k=k, epsilon=1.0, K=1,
                        x_lo=-34.0, x_hi=34.0, n_cell=16,
                        sponge=SpongeSpec(width=16.0, delta_max=3.0, exponent=3.0),
                        tfsf_plane=-9.0)
    u = solve_scattering(cfg, jump)
    R = 8
    meas = bloch_measure(u, "plus", 0, R, 2, provider)
    peak = np.unravel_index(np.argmax(meas.atoms), meas.atoms.shape)
    assert peak[1] == 0  # conserved vertical line
    j_peak = (peak[0] / R, 0.0)
    mu = provider.band_on_points("plus", np.array(j_peak), 1)[0, 0]
    # transmitted wavenumber kappa' = omega/(2 pi sqrt(a)) = 0.125
    assert j_peak[0] == pytest.approx(0.125, abs=2 / R)
    assert mu == pytest.approx(cfg.omega**2, rel=0.1)


def test_laminate_measure_peak_matches_candidate(laminate_run):
    from blochstrip.radiation import truncated_box_coefficients, measure_from_coefficients
    cfg = laminate_run["cfg"]
    provider = laminate_run["provider"]
    cands = transmitted_modes(provider, cfg.omega, cfg.k[1], grid_n=256)
    pred = refraction_report(cfg.k, cands, cfg.omega)
    R = max(cfg.R_sequence)
    coeffs = truncated_box_coefficients(laminate_run["u"], "plus", R, cfg.bands_M,
                                        provider)
    meas = measure_from_coefficients(coeffs, 0)
    result = validate_against_field(pred, meas)
    assert result.distance_to_prediction <= 2 / R
    assert result.mass_fraction_near_prediction >= 0.9
