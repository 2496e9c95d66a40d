import numpy as np
import pytest

from magwell.grid import MagneticParams, assemble_operator, build_grid, gauge_transform
from magwell.potentials import (DoubleWellConfig, PotentialSpec, RadialBump,
                                double_well, harmonic_well, radial_bump)
from magwell.spectral import (ConvergenceError, SolveError, SpectralResult,
                              decay_fit, dense_oracle, gap_isolation,
                              parity_split, solve_lowest)


@pytest.fixture(scope="module")
def one_well_op():
    g = build_grid(2.5, 40)
    return assemble_operator(g, radial_bump(1.0, 1.0), MagneticParams(lam=6.0, b=1.0))


def test_sparse_matches_dense_oracle(one_well_op):
    res = solve_lowest(one_well_op, k=5, seed=0)
    ref = dense_oracle(one_well_op)[:5]
    assert np.max(np.abs(res.eigenvalues - ref) / np.abs(ref)) < 1e-8


def test_dirichlet_box_closed_form():
    g = build_grid(1.0, 16)
    op = assemble_operator(g, PotentialSpec(), MagneticParams(lam=1.0, b=0.0))
    n, h = 16, g.h
    k = np.arange(1, n + 1)
    e1d = (2.0 - 2.0 * np.cos(k * np.pi / (n + 1))) / h ** 2
    e2d = np.sort(np.add.outer(e1d, e1d).ravel())
    vals = dense_oracle(op)
    assert np.max(np.abs(vals - e2d) / e2d) < 1e-10


def test_dense_oracle_real_spectrum_and_gauge_invariance(one_well_op):
    vals = dense_oracle(one_well_op)
    assert vals.dtype.kind == "f"
    rng = np.random.default_rng(5)
    chi = rng.uniform(0, 2 * np.pi, (40, 40))
    vals2 = dense_oracle(gauge_transform(one_well_op, chi))
    assert np.max(np.abs(vals - vals2) / np.abs(vals)) < 1e-9


def test_dense_oracle_dimension_limit():
    g = build_grid(3.0, 96)
    op = assemble_operator(g, PotentialSpec(), MagneticParams(lam=1.0, b=0.0))
    with pytest.raises(SolveError, match="dense oracle"):
        dense_oracle(op)


def test_harmonic_validation_well_oracle():
    # frozen dense-oracle value on the 48^2 grid; continuum level is
    # lam * omega0 * sqrt(2) for the scaled harmonic well
    from magwell.grid import SupportTruncationWarning

    g = build_grid(3.0, 48)
    with pytest.warns(SupportTruncationWarning):  # global well, box-truncated
        op = assemble_operator(g, harmonic_well(1.0), MagneticParams(lam=4.0, b=0.0))
    e0 = dense_oracle(op)[0]
    assert e0 == pytest.approx(5.64050992130251, rel=1e-8)
    assert e0 == pytest.approx(4.0 * np.sqrt(2.0), rel=0.01)


def test_landau_level_small():
    g = build_grid(2.5, 48)
    op = assemble_operator(g, PotentialSpec(), MagneticParams(lam=6.0, b=1.0))
    e0 = dense_oracle(op)[0]
    assert e0 == pytest.approx(6.0, rel=0.02)


def test_solve_lowest_certificates(one_well_op):
    res = solve_lowest(one_well_op, k=4, seed=0)
    assert np.all(np.diff(res.eigenvalues) >= 0)
    assert np.all(res.residuals <= res.meta["tolerance"])
    h = one_well_op.grid.h
    V = res.eigenvectors
    gram = h ** 2 * (V.conj().T @ V)
    assert np.max(np.abs(gram - np.eye(4))) < 1e-10
    # phase canonicalization: largest component real positive
    for i in range(4):
        j = np.argmax(np.abs(V[:, i]))
        assert V[j, i].imag == pytest.approx(0.0, abs=1e-12)
        assert V[j, i].real > 0


def test_solve_lowest_deterministic(one_well_op):
    a = solve_lowest(one_well_op, k=2, seed=3)
    b = solve_lowest(one_well_op, k=2, seed=3)
    assert np.array_equal(a.eigenvalues, b.eigenvalues)
    assert np.array_equal(a.eigenvectors, b.eigenvectors)


def test_solve_lowest_variational_bounds():
    # one-well ground state sits inside (-lam^2 depth, 0) at strong coupling
    g = build_grid(2.5, 48)
    p = MagneticParams(lam=8.0, b=1.0)
    op = assemble_operator(g, radial_bump(1.0, 1.0), p)
    res = solve_lowest(op, k=1, seed=0)
    e = res.eigenvalues[0]
    assert -p.lam ** 2 < e < 0


def test_solve_lowest_k_out_of_range(one_well_op):
    with pytest.raises(SolveError):
        solve_lowest(one_well_op, k=0)
    with pytest.raises(SolveError):
        solve_lowest(one_well_op, k=one_well_op.dimension)


def test_solve_lowest_unreachable_tolerance_reports_best(one_well_op):
    # a tolerance below machine resolution must fail the certificate and
    # still hand back the best available result
    with pytest.raises(ConvergenceError) as exc:
        solve_lowest(one_well_op, k=3, tol=1e-30, seed=0)
    result = exc.value.result
    assert result is not None
    assert result.k == 3
    assert np.all(result.residuals > 0)


def test_gap_isolation(one_well_op):
    res = solve_lowest(one_well_op, k=3, seed=0)
    gap = gap_isolation(res, 1)
    assert gap > 0
    with pytest.raises(SolveError):
        gap_isolation(res, 3)


def test_gap_isolation_degenerate_synthetic():
    res = SpectralResult(eigenvalues=np.array([1.0, 1.0, 2.0]),
                         eigenvectors=np.eye(3, dtype=complex),
                         residuals=np.zeros(3))
    assert gap_isolation(res, 1) == 0.0


@pytest.fixture(scope="module")
def symmetric_double():
    g = build_grid(3.2, 96)
    p = MagneticParams(lam=5.0, b=1.0)
    cfg = DoubleWellConfig.symmetric(radial_bump(1.0, 1.0), 1.3)
    # snap d1 to the grid for this fixture
    d1 = round(1.3 / g.h) * g.h
    cfg = DoubleWellConfig.symmetric(radial_bump(1.0, 1.0), d1)
    op = assemble_operator(g, double_well(cfg), p)
    return g, p, op


def test_parity_split_matches_full_solve(symmetric_double):
    g, p, op = symmetric_double
    ps = parity_split(op, seed=0)
    full = solve_lowest(op, k=2, seed=0)
    sector = sorted([ps.e_even, ps.e_odd])
    tol = 10.0 * full.meta["tolerance"]
    assert sector[0] == pytest.approx(full.eigenvalues[0], abs=tol)
    assert sector[1] == pytest.approx(full.eigenvalues[1], abs=tol)


def test_parity_split_b0_ground_even():
    g = build_grid(3.2, 64)
    p = MagneticParams(lam=5.0, b=0.0)
    d1 = round(1.3 / g.h) * g.h
    cfg = DoubleWellConfig.symmetric(radial_bump(1.0, 1.0), d1)
    op = assemble_operator(g, double_well(cfg), p)
    ps = parity_split(op, seed=0)
    assert ps.ground_parity == "even"
    assert ps.e_even < ps.e_odd


def test_parity_split_refuses_asymmetric_potential():
    g = build_grid(3.2, 64)
    p = MagneticParams(lam=5.0, b=1.0)
    spec = PotentialSpec((RadialBump((0.5, 0.0), 1.0, 1.0),))
    op = assemble_operator(g, spec, p)
    with pytest.raises(SolveError, match="not inversion symmetric"):
        parity_split(op)


def test_parity_split_refuses_transformed_gauge(symmetric_double):
    g, p, op = symmetric_double
    chi = np.ones((g.n_x, g.n_y))
    chi[0, 0] = 0.5
    op2 = gauge_transform(op, chi)
    with pytest.raises(SolveError, match="symmetric gauge"):
        parity_split(op2)


def test_decay_fit_synthetic_gaussian():
    g = build_grid(3.0, 64)
    X, Y = g.meshgrid()
    c = 1.7
    psi = np.exp(-c * (X ** 2 + Y ** 2)).ravel().astype(complex)
    psi /= g.grid_norm(psi)
    out = decay_fit(psi, (0.0, 0.0), g, r_inner=1.0, r_outer=2.2)
    assert out["c_fit"] == pytest.approx(c, abs=1e-3)
    assert out["r2_fit"] > 0.999999


def test_decay_fit_solver_state_and_monotonicity():
    g = build_grid(2.8, 72)
    rates = []
    for lam in (4.0, 8.0):
        op = assemble_operator(g, radial_bump(1.0, 1.0), MagneticParams(lam=lam, b=1.0))
        res = solve_lowest(op, k=1, seed=0)
        out = decay_fit(res.eigenvectors[:, 0], (0.0, 0.0), g,
                        r_inner=1.2, r_outer=2.2)
        assert out["c_fit"] > 0
        assert out["r2_fit"] > 0.99
        rates.append(out["c_fit"])
    assert rates[1] > rates[0]  # doubling lam tightens the tail


def test_decay_fit_annulus_validation():
    g = build_grid(2.0, 32)
    psi = np.ones(g.size, dtype=complex)
    with pytest.raises(SolveError):
        decay_fit(psi, (0.0, 0.0), g, r_inner=1.5, r_outer=1.0)
    with pytest.raises(SolveError):
        decay_fit(psi, (0.0, 0.0), g, r_inner=1.0, r_outer=1.99)
