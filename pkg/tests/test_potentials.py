import numpy as np
import pytest

from magwell.grid import build_grid
from magwell.potentials import (DoubleWellConfig, HarmonicPatch, PotentialError,
                                PotentialSpec, RadialBump, SophonDressing,
                                SophonSite, check_inversion_symmetric, double_well,
                                flatband_sophons, harmonic_well, radial_bump,
                                rectangle_sophons, sophon_dress, unit_hessian_well)


def test_radial_bump_profile():
    v = radial_bump(1.0, 1.0)
    assert v.evaluate(0.0, 0.0) == pytest.approx(-1.0)
    assert v.evaluate(1.0, 0.0) == 0.0
    assert v.evaluate(1.5, 0.0) == 0.0
    # radial symmetry
    assert v.evaluate(0.5, 0.0) == v.evaluate(0.0, 0.5) == v.evaluate(-0.5, 0.0)


def test_radial_bump_smooth_at_edge():
    v = radial_bump(1.0, 2.0)
    rs = np.linspace(0.9, 0.999, 50)
    vals = v.evaluate(rs, np.zeros_like(rs))
    assert np.all(vals <= 0.0)
    assert abs(vals[-1]) < 1e-8  # vanishes with all derivatives at the rim


def test_radial_bump_rejects_bad_parameters():
    with pytest.raises(PotentialError):
        radial_bump(0.0, 1.0)
    with pytest.raises(PotentialError):
        radial_bump(1.0, -2.0)


def test_unit_hessian_well_fd_hessian_identity():
    step = 1e-3
    for cubic in (0.0, 0.1):
        v = unit_hessian_well(1.0, 1.0, cubic)
        f = lambda x, y: float(v.evaluate(np.array(x), np.array(y)))
        hxx = (f(step, 0) - 2 * f(0, 0) + f(-step, 0)) / step ** 2
        hyy = (f(0, step) - 2 * f(0, 0) + f(0, -step)) / step ** 2
        hxy = (f(step, step) + f(-step, -step)
               - f(step, -step) - f(-step, step)) / (4 * step ** 2)
        assert hxx == pytest.approx(1.0, abs=1e-6)
        assert hyy == pytest.approx(1.0, abs=1e-6)
        assert hxy == pytest.approx(0.0, abs=1e-6)
        assert f(0, 0) == pytest.approx(-1.0)


def test_unit_hessian_well_cubic_breaks_radial_symmetry():
    v = unit_hessian_well(1.0, 1.0, 0.1)
    r = 0.4
    assert v.evaluate(r, 0.0) != pytest.approx(v.evaluate(0.0, r), abs=1e-6)


def test_unit_hessian_well_minimum_at_origin():
    from scipy.optimize import minimize

    v = unit_hessian_well(1.0, 1.0, 0.1)
    f = lambda p: float(v.evaluate(np.array(p[0]), np.array(p[1])))
    for start in [(0.2, 0.1), (-0.15, 0.2), (0.05, -0.3)]:
        out = minimize(f, start, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-14})
        assert np.hypot(*out.x) < 1e-8


def test_unit_hessian_well_rejects_huge_cubic():
    with pytest.raises(PotentialError):
        unit_hessian_well(1.0, 0.6, 0.55)


def test_harmonic_patch_nonpositive_on_support():
    v = PotentialSpec((HarmonicPatch((0.0, 0.0), 1.0, 1.0, 0.1),))
    xs = np.linspace(-1.2, 1.2, 101)
    X, Y = np.meshgrid(xs, xs)
    assert np.all(v.evaluate(X, Y) <= 0.0)


def test_compact_wells_zero_outside_support():
    specs = [radial_bump(0.7, 2.0), unit_hessian_well(0.9, 1.0, 0.05)]
    angles = np.linspace(0, 2 * np.pi, 37)
    for spec in specs:
        a = max(w.support_radius for w in spec.wells)
        ring = 1.01 * a
        vals = spec.evaluate(ring * np.cos(angles), ring * np.sin(angles))
        assert np.all(vals == 0.0)


def test_sophon_dress_zero_amplitude_identity():
    planet = RadialBump((0.0, 0.0), 1.0, 1.0)
    dressed = sophon_dress(planet, rectangle_sophons(1.5, 0.4, 0.1, 0.0))
    bare = PotentialSpec((planet,))
    xs = np.linspace(-3, 3, 61)
    X, Y = np.meshgrid(xs, xs)
    assert np.array_equal(dressed.evaluate(X, Y), bare.evaluate(X, Y))


def test_sophon_dress_inversion_symmetric_layout():
    planet = RadialBump((0.0, 0.0), 1.0, 1.0)
    dressed = sophon_dress(planet, rectangle_sophons(1.5, 0.4, 0.1, -0.5))
    g = build_grid(3.0, 33)
    out = check_inversion_symmetric(dressed, g)
    assert out["is_symmetric"]
    assert out["max_asymmetry"] == 0.0


def test_sophon_deviation_area():
    d = SophonDressing(planet=RadialBump((0.0, 0.0), 1.0, 1.0),
                       sophons=rectangle_sophons(1.5, 0.4, 0.05, -0.3))
    assert d.deviation_area() == pytest.approx(4 * np.pi * 0.05 ** 2)


def test_sophon_overlap_rejected():
    planet = RadialBump((0.0, 0.0), 1.0, 1.0)
    with pytest.raises(PotentialError, match="overlap"):
        sophon_dress(planet, rectangle_sophons(1.05, 0.0, 0.2, -0.5))
    with pytest.raises(PotentialError, match="overlap"):
        # vertical pair closer than two radii
        sophon_dress(planet, rectangle_sophons(1.5, 0.05, 0.2, -0.5))


def test_sophon_count_must_be_4_or_8():
    with pytest.raises(PotentialError):
        SophonDressing(planet=RadialBump((0.0, 0.0), 1.0, 1.0),
                       sophons=(SophonSite((1.5, 0.0), 0.1, -0.1),))
    d8 = SophonDressing(planet=RadialBump((0.0, 0.0), 1.0, 1.0),
                        sophons=flatband_sophons(1.5, 0.4, 0.1, -0.5))
    assert len(d8.sophons) == 8


def test_sophon_positive_amplitude_rejected():
    with pytest.raises(PotentialError):
        SophonSite((1.0, 0.0), 0.1, +0.2)


def test_flatband_layout_four_fold_symmetric():
    spec = sophon_dress(RadialBump((0.0, 0.0), 1.0, 1.0),
                        flatband_sophons(1.5, 0.3, 0.1, -0.4))
    xs = np.linspace(-2.2, 2.2, 89)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    v = spec.evaluate(X, Y)
    v_rot = spec.evaluate(Y, -X)
    assert np.max(np.abs(v - v_rot)) < 1e-14


def test_double_well_geometry_and_symmetry():
    cfg = DoubleWellConfig.symmetric(radial_bump(1.0, 1.0), 2.0)
    V = double_well(cfg)
    assert V.evaluate(-2.0, 0.0) == pytest.approx(-1.0)
    assert V.evaluate(2.0, 0.0) == pytest.approx(-1.0)
    assert V.evaluate(0.0, 0.0) == 0.0
    g = build_grid(4.0, 33)
    out = check_inversion_symmetric(V, g)
    assert out["is_symmetric"] and out["max_asymmetry"] == 0.0


def test_double_well_free_mode_asymmetric():
    planet = RadialBump((0.0, 0.0), 1.0, 1.0)
    left = sophon_dress(planet, rectangle_sophons(1.3, 0.4, 0.1, -0.5, vertical_shift=0.1))
    right = sophon_dress(planet, rectangle_sophons(1.3, 0.4, 0.1, -0.5))
    cfg = DoubleWellConfig(left_well=left, right_well=right, d1=1.9,
                           symmetry_mode="free")
    g = build_grid(4.0, 65)
    out = check_inversion_symmetric(double_well(cfg), g)
    assert not out["is_symmetric"]
    assert out["max_asymmetry"] > 0.0


def test_double_well_overlap_rejected():
    with pytest.raises(PotentialError):
        DoubleWellConfig.symmetric(radial_bump(1.0, 1.0), 0.9)


def test_double_well_symmetric_mode_requires_mirror():
    planet = RadialBump((0.0, 0.0), 1.0, 1.0)
    left = sophon_dress(planet, rectangle_sophons(1.3, 0.4, 0.1, -0.5, vertical_shift=0.1))
    with pytest.raises(PotentialError):
        DoubleWellConfig(left_well=left, right_well=left, d1=2.2,
                         symmetry_mode="inversion_symmetric")
    # the mirrored partner is accepted
    DoubleWellConfig(left_well=left, right_well=left.mirrored(), d1=2.2,
                     symmetry_mode="inversion_symmetric")


def test_check_inversion_symmetric_single_offset_well():
    g = build_grid(3.0, 33)
    spec = PotentialSpec((RadialBump((0.5, 0.0), 1.0, 1.0),))
    out = check_inversion_symmetric(spec, g)
    assert not out["is_symmetric"]
    assert out["max_asymmetry"] > 0.1


def test_serialization_roundtrip():
    planet = RadialBump((0.0, 0.0), 1.0, 1.3)
    spec = sophon_dress(planet, rectangle_sophons(1.4, 0.35, 0.12, -0.61))
    spec = spec + unit_hessian_well(0.8, 1.1, 0.07) + harmonic_well(0.5)
    again = PotentialSpec.from_json(spec.to_json())
    assert again == spec
    assert again.to_json() == spec.to_json()
    assert again.sha256() == spec.sha256()


def test_harmonic_global_not_compact():
    spec = harmonic_well(1.0)
    assert not spec.is_compact
    assert spec.evaluate(2.0, 0.0) == pytest.approx(2.0)
