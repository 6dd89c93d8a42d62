import numpy as np
import pytest

from sivstrain.levels import (
    InconsistentLinesError,
    LevelDiagram,
    OrbitalStrainTerms,
    SpinOrbitParams,
    StrainSusceptibilities,
    ZeemanParams,
    diagram_from_strain,
    nm_to_thz,
    optical_lines,
    orbital_hamiltonian,
    orbital_splitting,
    qubit_levels,
    splittings_from_lines,
    strain_scaling_exponent,
    strain_to_terms,
    thz_to_nm,
)

NU0 = 406.7  # THz, arbitrary anchor for the absolute scale


def eig_splitting(lam, terms):
    w = np.linalg.eigvalsh(orbital_hamiltonian(lam, terms))
    return w[1] - w[0]


def test_zero_strain_splitting():
    assert orbital_splitting(46.0, OrbitalStrainTerms()) == 46.0


def test_splitting_matches_matrix_eigenvalues():
    terms = OrbitalStrainTerms(0.0, 23.0, 0.0)
    assert orbital_splitting(46.0, terms) == pytest.approx(65.054, abs=5e-4)
    assert orbital_splitting(46.0, terms) == pytest.approx(eig_splitting(46.0, terms), rel=1e-13)


def test_alpha_does_not_split():
    assert orbital_splitting(46.0, OrbitalStrainTerms(alpha=100.0)) == 46.0


@pytest.mark.parametrize("bx,by,a", [(3.0, -4.0, 7.0), (150.0, 20.0, -3.0), (0.01, 0.0, 0.0)])
def test_splitting_vs_oracle_random_terms(bx, by, a):
    terms = OrbitalStrainTerms(a, bx, by)
    assert orbital_splitting(46.0, terms) == pytest.approx(eig_splitting(46.0, terms), rel=1e-12)


def test_splitting_asymptote():
    terms = OrbitalStrainTerms(0.0, 1e6, 0.0)
    assert orbital_splitting(46.0, terms) / 2e6 == pytest.approx(1.0, rel=1e-9)


def test_splitting_rejects_bad_lambda():
    with pytest.raises(ValueError):
        orbital_splitting(0.0, OrbitalStrainTerms())
    with pytest.raises(ValueError):
        orbital_splitting(np.nan, OrbitalStrainTerms())
    with pytest.raises(ValueError):
        OrbitalStrainTerms(np.inf, 0, 0)


def test_spin_orbit_defaults_and_validation():
    so = SpinOrbitParams()
    assert (so.lambda_gs, so.lambda_es) == (46.0, 255.0)
    with pytest.raises(ValueError):
        SpinOrbitParams(-1.0, 255.0)


def test_strain_to_terms_examples():
    s = StrainSusceptibilities(t_par=-1.0, t_perp=0.5, d=2.0, f=3.0)
    zero = strain_to_terms(np.zeros((3, 3)), s)
    assert (zero.alpha, zero.beta_x, zero.beta_y) == (0.0, 0.0, 0.0)
    u = 1e-4
    eg = strain_to_terms(np.diag([u, -u, 0.0]), s)
    assert eg.beta_x == pytest.approx(2 * s.d * u, rel=1e-15)
    assert eg.alpha == 0.0 and eg.beta_y == 0.0


def test_strain_to_terms_components():
    s = StrainSusceptibilities(t_par=-1.0, t_perp=0.5, d=2.0, f=3.0)
    e = np.array([[1.0, 0.2, 0.3], [0.2, -0.5, 0.7], [0.3, 0.7, 0.4]])
    t = strain_to_terms(e, s)
    assert t.alpha == pytest.approx(-1.0 * 0.4 + 0.5 * (1.0 - 0.5))
    assert t.beta_x == pytest.approx(2.0 * 1.5 + 3.0 * 0.3)
    assert t.beta_y == pytest.approx(-2 * 2.0 * 0.2 + 3.0 * 0.7)
    t2 = strain_to_terms(2 * e, s)
    assert (t2.alpha, t2.beta_x, t2.beta_y) == pytest.approx((2 * t.alpha, 2 * t.beta_x, 2 * t.beta_y))


def test_strain_to_terms_rejects_asymmetric():
    e = np.zeros((3, 3))
    e[0, 1] = 1e-4
    with pytest.raises(ValueError, match="symmetric"):
        strain_to_terms(e, StrainSusceptibilities())
    with pytest.raises(ValueError):
        strain_to_terms(np.zeros((2, 2)), StrainSusceptibilities())


def test_optical_lines_structure():
    dg = optical_lines(46.0, 255.0, NU0)
    assert (dg.line_A - dg.line_B) * 1e3 == pytest.approx(46.0, rel=1e-9)
    assert (dg.line_A - dg.line_C) * 1e3 == pytest.approx(255.0, rel=1e-9)
    assert (dg.line_C - dg.line_D) * 1e3 == pytest.approx(46.0, rel=1e-9)
    assert dg.line_A >= dg.line_B >= dg.line_C >= dg.line_D
    assert np.mean(dg.lines) == pytest.approx(NU0, rel=1e-15)


def test_optical_lines_degenerate_and_shift():
    dg = optical_lines(0.0, 0.0, NU0)
    assert np.all(dg.lines == NU0)
    shifted = optical_lines(46.0, 255.0, NU0, common_shift=30.0)
    assert np.mean(shifted.lines) == pytest.approx(NU0 + 0.030, rel=1e-15)


def test_lines_move_apart_with_splitting():
    a = optical_lines(46.0, 255.0, NU0)
    b = optical_lines(100.0, 400.0, NU0)
    assert b.line_A > a.line_A and b.line_D < a.line_D
    assert b.wavelengths_nm[0] < a.wavelengths_nm[0]
    assert b.wavelengths_nm[3] > a.wavelengths_nm[3]


def test_optical_lines_rejects_negative():
    with pytest.raises(ValueError):
        optical_lines(-1.0, 255.0, NU0)
    with pytest.raises(ValueError):
        optical_lines(46.0, 255.0, 0.0)


def test_round_trip():
    dg = optical_lines(46.0, 255.0, NU0)
    g, e, nu = splittings_from_lines(*dg.lines)
    # absolute THz lines carry ~1e-13 THz rounding, i.e. ~1e-10 GHz
    assert g == pytest.approx(46.0, abs=1e-12 * NU0 * 1e3)
    assert e == pytest.approx(255.0, abs=1e-12 * NU0 * 1e3)
    assert nu == pytest.approx(NU0, rel=1e-15)


def test_round_trip_relative_to_zero_anchor():
    # with a small anchor the inverse is exact to 1e-12 relative
    dg = optical_lines(46.0, 255.0, 1.0)
    g, e, _ = splittings_from_lines(*dg.lines)
    assert g == pytest.approx(46.0, rel=1e-12)
    assert e == pytest.approx(255.0, rel=1e-12)


def test_jitter_monte_carlo():
    # each line off by at most 1 MHz; splittings average two differences, so at most 2 MHz
    rng = np.random.default_rng(7)
    dg = optical_lines(46.0, 255.0, NU0)
    for _ in range(500):
        lines = dg.lines + rng.uniform(-1e-6, 1e-6, 4)
        g, e, _ = splittings_from_lines(*lines)
        assert abs(g - 46.0) < 2e-3
        assert abs(e - 255.0) < 2e-3


def test_inconsistent_lines_flagged():
    dg = optical_lines(46.0, 255.0, NU0)
    lines = dg.lines.copy()
    lines[0] += 10 * 0.05 / 1e3
    with pytest.raises(InconsistentLinesError):
        splittings_from_lines(*lines)
    with pytest.raises(InconsistentLinesError):
        splittings_from_lines(*lines[::-1])


def test_qubit_levels():
    lv = qubit_levels(46.0, ZeemanParams(1.0))
    assert sorted(lv.values()) == [0.0, 1.0, 46.0, 47.0]
    assert lv["1u"] - lv["1d"] == 1.0
    same = qubit_levels(46.0, ZeemanParams(0.0))
    assert same["1d"] == same["1u"] and same["2d"] == same["2u"]
    with pytest.raises(ValueError):
        ZeemanParams(-0.1)
    with pytest.raises(ValueError):
        qubit_levels(-1.0, ZeemanParams())


def test_scaling_exponent_limits():
    assert strain_scaling_exponent(46.0, 1e-3) == pytest.approx(2.0, abs=1e-4)
    assert strain_scaling_exponent(46.0, 1e5) == pytest.approx(1.0, abs=1e-3)


def test_a1g_strain_leaves_splittings():
    e = np.diag([0.0, 0.0, 1e-4])
    dg = diagram_from_strain(e, NU0)
    ref = diagram_from_strain(np.zeros((3, 3)), NU0)
    assert dg.delta_gs == ref.delta_gs and dg.delta_es == ref.delta_es
    shifts = (dg.lines - ref.lines) * 1e3
    assert np.ptp(shifts) < 1e-6 * np.abs(shifts).max()


def test_wavelength_conversion():
    assert float(thz_to_nm(nm_to_thz(737.0))) == pytest.approx(737.0, rel=1e-15)
    assert float(nm_to_thz(737.0)) == pytest.approx(299792.458 / 737.0, rel=1e-15)


def test_level_diagram_is_frozen():
    dg = optical_lines(46.0, 255.0, NU0)
    assert isinstance(dg, LevelDiagram)
    with pytest.raises(Exception):
        dg.line_A = 0.0
