"""Lowest eigenpairs of discrete magnetic operators.

Sparse path: shift-invert Lanczos (ARPACK) with the shift placed below the
whole spectrum via a Gershgorin bound, deterministic start vector from a
seed, and eigenvalues refined by an extended-precision Rayleigh quotient.
Dense path: full Hermitian diagonalization, the ground-truth oracle for
grids up to 4096 points.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import eigh
from scipy.sparse.linalg import ArpackNoConvergence

from .grid import DiscreteOperator, Grid2D, rayleigh_quotient

__all__ = [
    "SpectralResult",
    "ParitySplit",
    "SolveError",
    "ConvergenceError",
    "solve_lowest",
    "dense_oracle",
    "parity_split",
    "decay_fit",
    "gap_isolation",
    "resolution_floor",
]

DENSE_LIMIT = 4096


class SolveError(RuntimeError):
    """Eigenproblem could not be set up or solved as requested."""


class ConvergenceError(SolveError):
    """Iteration stopped before reaching the requested residuals."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


@dataclass
class SpectralResult:
    """Lowest eigenpairs with residual certificates.

    Eigenvalues ascend; eigenvectors are unit-norm in the grid inner product
    h^2 sum conj(u) v and phase-fixed so the largest-modulus component is
    real positive.  residuals[i] = ||H psi_i - E_i psi_i|| in the grid norm.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # (N, k)
    residuals: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return len(self.eigenvalues)


@dataclass
class ParitySplit:
    """Ground energies of the even and odd inversion sectors."""

    e_even: float
    e_odd: float
    ground_parity: str  # "even" | "odd" | "degenerate"
    vec_even: np.ndarray
    vec_odd: np.ndarray
    residuals: tuple[float, float]
    floor: float
    meta: dict = field(default_factory=dict)

    @property
    def diff(self) -> float:
        """Signed sector difference e_even - e_odd."""
        return self.e_even - self.e_odd


def default_shift(op: DiscreteOperator) -> float:
    """A shift strictly below the spectrum (Gershgorin row bound minus margin)."""
    return float(op.diagonal.min()) - 4.0 / op.grid.h ** 2 - 1.0


def default_tolerance(op: DiscreteOperator) -> float:
    """Absolute residual tolerance: 1e-10 relative to the row-sum norm."""
    return 1e-10 * op.rowsum_norm()


def resolution_floor(op: DiscreteOperator, residuals=None, gap: float | None = None) -> float:
    """Smallest energy difference the pipeline certifies.

    Combines the extended-precision Rayleigh-quotient roundoff with the
    residual-squared-over-gap eigenvalue error, times a safety factor of 100.
    Splittings below this are flagged, not trusted.
    """
    eps_ld = float(np.finfo(np.longdouble).eps)
    base = 8.0 * eps_ld * op.rowsum_norm()
    if residuals is not None and gap and gap > 0:
        base += float(np.max(residuals)) ** 2 / gap
    return 100.0 * base


def _start_vector(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return v / np.linalg.norm(v)


def _sparse_lowest(H: sp.csr_matrix, k: int, sigma: float, seed: int,
                   maxiter=None, ncv=None):
    """Shift-invert ARPACK on a sparse Hermitian matrix; returns l2-normalized pairs."""
    n = H.shape[0]
    if not 1 <= k < n - 1:
        raise SolveError(f"k={k} out of range for dimension {n}")
    A = (H - sigma * sp.identity(n, dtype=complex, format="csr")).tocsc()
    lu = spla.splu(A)
    counter = {"matvecs": 0}

    def _solve(x):
        counter["matvecs"] += 1
        return lu.solve(x)

    opinv = spla.LinearOperator((n, n), matvec=_solve, dtype=complex)
    v0 = _start_vector(n, seed)
    if ncv is None:
        ncv = min(n - 1, max(4 * k + 8, 40))
    try:
        vals, vecs = spla.eigsh(H, k=k, sigma=sigma, which="LM", OPinv=opinv,
                                v0=v0, ncv=ncv, maxiter=maxiter, tol=0)
        converged = True
    except ArpackNoConvergence as exc:
        vals, vecs = exc.eigenvalues, exc.eigenvectors
        converged = False
        if vals is None or len(vals) == 0:
            raise ConvergenceError("no eigenpairs converged") from exc
    order = np.argsort(vals)
    return vals[order], vecs[:, order], counter["matvecs"], converged


def _canonical_phase(vec: np.ndarray) -> np.ndarray:
    j = int(np.argmax(np.abs(vec)))
    z = vec[j]
    if z != 0:
        vec = vec * (np.conj(z) / abs(z))
    return vec


def solve_lowest(op: DiscreteOperator, k: int, tol: float | None = None,
                 shift: float | None = None, seed: int = 0,
                 maxiter=None) -> SpectralResult:
    """k lowest eigenpairs of a discrete operator with certified residuals.

    Deterministic for fixed seed.  Raises ConvergenceError (carrying the best
    available result) if any residual exceeds the tolerance.
    """
    tol_abs = default_tolerance(op) if tol is None else float(tol)
    if tol_abs <= 0:
        raise SolveError("tolerance must be positive")
    sigma = default_shift(op) if shift is None else float(shift)
    lowest = float(op.diagonal.min()) - 4.0 / op.grid.h ** 2
    if sigma >= lowest + 1e-12:
        warnings.warn("shift may sit inside the spectrum; using it anyway")

    vals, vecs, matvecs, converged = _sparse_lowest(op.matrix, k, sigma, seed, maxiter)

    h = op.grid.h
    refined = np.empty(len(vals))
    residuals = np.empty(len(vals))
    out = np.empty_like(vecs)
    for i in range(len(vals)):
        v = _canonical_phase(vecs[:, i] / (h * np.linalg.norm(vecs[:, i])))
        e = rayleigh_quotient(op, v)
        r = op.grid.grid_norm(op.matrix @ v - e * v)
        out[:, i] = v
        refined[i] = e
        residuals[i] = r
    order = np.argsort(refined, kind="stable")
    result = SpectralResult(
        eigenvalues=refined[order], eigenvectors=out[:, order],
        residuals=residuals[order],
        meta={"iterations": matvecs, "shift": sigma, "tolerance": tol_abs,
              "seed": seed, "converged": converged})
    if not converged or np.any(result.residuals > tol_abs):
        raise ConvergenceError(
            f"residuals {result.residuals} exceed tolerance {tol_abs:g}",
            result=result)
    return result


def dense_oracle(op: DiscreteOperator, return_vectors: bool = False):
    """Full spectrum by dense Hermitian diagonalization (dimension <= 4096)."""
    if op.dimension > DENSE_LIMIT:
        raise SolveError(
            f"dense oracle limited to dimension {DENSE_LIMIT}, got {op.dimension}")
    A = op.matrix.toarray()
    if return_vectors:
        return eigh(A)
    return eigh(A, eigvals_only=True)


def parity_bases(grid: Grid2D) -> tuple[sp.csc_matrix, sp.csc_matrix]:
    """Isometries onto the even and odd inversion sectors."""
    N = grid.size
    perm = grid.inversion_permutation
    idx = np.arange(N)
    firsts = idx[idx < perm]
    fixed = idx[idx == perm]
    partners = perm[firsts]
    nf = len(firsts)
    s = 1.0 / np.sqrt(2.0)

    rows_e = np.concatenate([firsts, partners, fixed])
    cols_e = np.concatenate([np.arange(nf), np.arange(nf),
                             nf + np.arange(len(fixed))])
    data_e = np.concatenate([np.full(nf, s), np.full(nf, s), np.ones(len(fixed))])
    B_even = sp.csc_matrix((data_e, (rows_e, cols_e)), shape=(N, nf + len(fixed)))

    rows_o = np.concatenate([firsts, partners])
    cols_o = np.concatenate([np.arange(nf), np.arange(nf)])
    data_o = np.concatenate([np.full(nf, s), np.full(nf, -s)])
    B_odd = sp.csc_matrix((data_o, (rows_o, cols_o)), shape=(N, nf))
    return B_even, B_odd


def parity_split(op: DiscreteOperator, tol: float | None = None, seed: int = 0,
                 symmetry_tol: float = 1e-13) -> ParitySplit:
    """Ground energies in the even and odd inversion sectors.

    Refuses operators whose potential is not inversion symmetric on the grid
    (the inversion operator would not commute with H) or that carry a
    transformed gauge (the symmetric gauge is the inversion-covariant one).
    """
    if op.gauge_tag != "symmetric":
        raise SolveError("parity split requires the symmetric gauge")
    v = op.potential_values
    scale = max(1.0, float(np.max(np.abs(v))))
    asym = float(np.max(np.abs(v - v[::-1, ::-1])))
    if asym > symmetry_tol * scale:
        raise SolveError(
            f"potential is not inversion symmetric (max asymmetry {asym:.3g}); "
            "refusing to split parity sectors")

    tol_abs = default_tolerance(op) if tol is None else float(tol)
    sigma = default_shift(op)
    B_even, B_odd = parity_bases(op.grid)
    h = op.grid.h

    energies, vectors, residuals, matvecs = [], [], [], []
    for which, B in (("even", B_even), ("odd", B_odd)):
        Hs = (B.T @ (op.matrix @ B)).tocsr()
        vals, vecs, mv, converged = _sparse_lowest(Hs, 1, sigma, seed)
        full = np.asarray(B @ vecs[:, 0]).ravel()
        full = _canonical_phase(full / (h * np.linalg.norm(full)))
        e = rayleigh_quotient(op, full)
        r = op.grid.grid_norm(op.matrix @ full - e * full)
        if not converged or r > tol_abs:
            raise ConvergenceError(f"{which} sector residual {r:.3g} > {tol_abs:g}")
        energies.append(e)
        vectors.append(full)
        residuals.append(r)
        matvecs.append(mv)

    floor = resolution_floor(op, residuals=residuals)
    diff = energies[0] - energies[1]
    if abs(diff) <= floor:
        parity = "degenerate"
    else:
        parity = "even" if diff < 0 else "odd"
    return ParitySplit(
        e_even=energies[0], e_odd=energies[1], ground_parity=parity,
        vec_even=vectors[0], vec_odd=vectors[1],
        residuals=(residuals[0], residuals[1]), floor=floor,
        meta={"iterations": matvecs, "shift": sigma, "tolerance": tol_abs,
              "seed": seed})


def decay_fit(psi: np.ndarray, center, grid: Grid2D,
              r_inner: float, r_outer: float) -> dict:
    """Least-squares Gaussian decay rate of log|psi| against -|x-center|^2.

    Fits over the annulus r_inner <= |x - center| <= r_outer, which the
    caller chooses outside the potential support and at least 3h away from
    the boundary.  Returns the slope c_fit (|psi| ~ exp(-c r^2)) and the
    coefficient of determination of the fit.
    """
    if r_outer <= r_inner:
        raise SolveError("empty fit annulus")
    if r_outer > grid.L - 3.0 * grid.h + 1e-12:
        raise SolveError("fit annulus reaches within 3h of the boundary")
    X, Y = grid.meshgrid()
    r2 = (X - center[0]) ** 2 + (Y - center[1]) ** 2
    amp = np.abs(np.asarray(psi).reshape(grid.n_x, grid.n_y))
    mask = (r2 >= r_inner ** 2) & (r2 <= r_outer ** 2) & (amp > 1e-140)
    if mask.sum() < 8:
        raise SolveError("fit annulus contains too few usable points")
    x = r2[mask].ravel()
    y = np.log(amp[mask].ravel())
    A = np.column_stack([-x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2_fit = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return {"c_fit": float(coef[0]), "r2_fit": r2_fit, "points": int(mask.sum())}


def gap_isolation(result: SpectralResult, cluster_size: int) -> float:
    """Gap between the low eigenvalue cluster and the next computed eigenvalue."""
    if result.k < cluster_size + 1:
        raise SolveError(
            f"need at least {cluster_size + 1} eigenvalues, have {result.k}")
    return float(result.eigenvalues[cluster_size] - result.eigenvalues[cluster_size - 1])


def export_eigenpairs(result: SpectralResult, grid: Grid2D, path_prefix) -> None:
    """Vector dump (.npy) plus a JSON sidecar with the grid header.

    Writes <prefix>.npy with the (N, k) eigenvector array and <prefix>.json
    with grid metadata, eigenvalues, and residuals.
    """
    import json

    np.save(str(path_prefix) + ".npy", result.eigenvectors)
    header = {
        "grid": grid.to_dict(),
        "eigenvalues": result.eigenvalues.tolist(),
        "residuals": result.residuals.tolist(),
        "meta": {k: v for k, v in result.meta.items()},
    }
    with open(str(path_prefix) + ".json", "w") as fh:
        json.dump(header, fh, sort_keys=True)
