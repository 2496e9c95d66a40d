"""Sophon placement: interaction estimates, sweeps, and root finding.

The dressing adds four satellite wells per planet in a rectangle
(+-dx, +-s).  Gaussian tail estimates order the planet-planet and
planet-sophon interactions, and the phase model theta = lam*b*d1*s (the
translation phase factor evaluated at the dominant sophon height, the
+-s pair giving the cosine) predicts the sign of the hopping coefficient.
Splitting roots are located by bisection on the parity-sector difference;
the non-symmetric zero-hopping configuration comes from a damped Newton
iteration on (Re rho, Im rho).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .grid import Grid2D, MagneticParams, assemble_operator
from .hopping import (HoppingReport, compute_rho, compute_splitting,
                      double_well_report, magnetic_translate, one_well_ground,
                      snap_to_grid)
from .potentials import (DoubleWellConfig, PotentialSpec, RadialBump,
                         SophonDressing, SophonSite, check_inversion_symmetric,
                         double_well, flatband_sophons, rectangle_sophons,
                         sophon_dress)
from .spectral import SolveError, parity_split

__all__ = [
    "InteractionTable",
    "AsymptoticPrediction",
    "SweepRow",
    "TuneResult",
    "SophonExperiment",
    "predict_interactions",
    "predict_rho",
    "sweep",
    "find_zero_splitting",
    "find_parity_transition",
    "find_zero_hopping",
    "find_zero_rho_asymmetric",
    "family_proximity_report",
    "baseline_report",
]


@dataclass
class InteractionTable:
    """Magnitude estimates for planet/sophon interaction channels.

    Entry (mu, nu) couples left well mu (0 = planet) to right well nu.
    magnitude = prefactor * exp(exponent) with exponent
    -lam |x_mu_L - x_nu_R|^2 / 4 and prefactor 1, |tau| or |tau|^2 by the
    number of sophon indices (amplitudes relative to the planet depth).
    """

    magnitudes: np.ndarray
    exponents: np.ndarray
    prefactors: np.ndarray
    centers_left: list
    centers_right: list
    dominance_margin: float
    dominant: tuple[int, int]


@dataclass
class AsymptoticPrediction:
    """Leading-order hopping estimate tau * exp(-lam D^2/4) * cos(theta)."""

    D: float
    theta_model: float
    rho_pred: float
    dominance_margin: float
    dominant_height: float
    tau: float
    in_regime: bool  # dominance_margin > 1, else advisory only


@dataclass
class SweepRow:
    value: float
    rho: complex
    delta: float
    parity_diff: float  # E_even - E_odd, signed
    e_even: float
    e_odd: float
    ground_parity: str
    rho_pred: float
    cos_theta: float
    dominance_margin: float
    floor: float


@dataclass
class TuneResult:
    """Root located by a tuner, with its bracketing/search evidence."""

    kind: str
    parameter: str
    root: tuple[float, ...]
    achieved: dict
    baseline: dict
    bracket: dict | None = None
    evidence: dict = field(default_factory=dict)
    evaluations: int = 0
    trace: list = field(default_factory=list)


def predict_interactions(left: SophonDressing, right: SophonDressing,
                         d1: float, params: MagneticParams) -> InteractionTable:
    """All planet/sophon channel magnitudes for wells displaced to -+d1."""
    cl = [(-d1 + 0.0, 0.0)] + [(-d1 + s.offset[0], s.offset[1]) for s in left.sophons]
    cr = [(+d1 + 0.0, 0.0)] + [(+d1 + s.offset[0], s.offset[1]) for s in right.sophons]
    amp_l = [1.0] + [abs(s.amplitude) / left.planet.depth for s in left.sophons]
    amp_r = [1.0] + [abs(s.amplitude) / right.planet.depth for s in right.sophons]

    nl, nr = len(cl), len(cr)
    expo = np.empty((nl, nr))
    pref = np.empty((nl, nr))
    for mu in range(nl):
        for nu in range(nr):
            d2 = (cl[mu][0] - cr[nu][0]) ** 2 + (cl[mu][1] - cr[nu][1]) ** 2
            expo[mu, nu] = -params.lam * d2 / 4.0
            if mu == 0 and nu == 0:
                pref[mu, nu] = 1.0
            elif mu == 0:
                pref[mu, nu] = amp_r[nu]
            elif nu == 0:
                pref[mu, nu] = amp_l[mu]
            else:
                pref[mu, nu] = amp_l[mu] * amp_r[nu]
    mags = pref * np.exp(expo)
    rel = mags / mags[0, 0]
    rel[0, 0] = 0.0
    dom = np.unravel_index(np.argmax(rel), rel.shape)
    return InteractionTable(magnitudes=mags, exponents=expo, prefactors=pref,
                            centers_left=cl, centers_right=cr,
                            dominance_margin=float(rel[dom]),
                            dominant=(int(dom[0]), int(dom[1])))


def predict_rho(dressing: SophonDressing, d1: float,
                params: MagneticParams) -> AsymptoticPrediction:
    """Hopping sign/magnitude model from the closest sophon channel.

    D is the distance from the nearest left sophon to the right planet
    center; the phase is the translation factor exp(-i lam b d1 x2)
    evaluated at that sophon's height, the +-s partner turning it into a
    cosine.  Only meaningful when the sophon channels dominate the
    planet-planet one (in_regime).
    """
    best = None
    for s in dressing.sophons:
        # left well sits at -d1: sophon at (-d1+ox, oy), right planet at (+d1, 0)
        D = math.hypot(s.offset[0] - 2.0 * d1, s.offset[1])
        if best is None or D < best[0]:
            best = (D, abs(s.offset[1]), s.amplitude)
    D, height, tau_abs = best
    tau = tau_abs / dressing.planet.depth
    theta = params.lam * params.b * d1 * height
    rho_pred = tau * math.exp(-params.lam * D ** 2 / 4.0) * math.cos(theta)
    table = predict_interactions(dressing, _mirror_dressing(dressing), d1, params)
    return AsymptoticPrediction(D=D, theta_model=theta, rho_pred=rho_pred,
                                dominance_margin=table.dominance_margin,
                                dominant_height=height, tau=tau,
                                in_regime=table.dominance_margin > 1.0)


def _mirror_dressing(d: SophonDressing) -> SophonDressing:
    soph = tuple(replace(s, offset=(-s.offset[0], -s.offset[1])) for s in d.sophons)
    return SophonDressing(planet=d.planet.mirrored(), sophons=soph)


@dataclass(frozen=True)
class SophonExperiment:
    """A reproducible sophon-dressing experiment: geometry, field, and grid.

    d1 is snapped to the grid on construction; all solver randomness flows
    from the single seed.
    """

    lam: float = 5.0
    b: float = 1.0
    d1: float = 1.9
    planet_radius: float = 1.0
    planet_depth: float = 1.0
    dx: float = 1.55
    s: float = 0.45
    sophon_radius: float = 0.15
    tau: float = -0.7
    L: float = 4.0
    n: int = 256
    seed: int = 0
    layout: str = "rectangle"  # or "flatband" (adds the rotated quartet)

    def grid(self) -> Grid2D:
        return Grid2D(self.n, self.n, self.L)

    def params(self) -> MagneticParams:
        return MagneticParams(lam=self.lam, b=self.b)

    @property
    def d1_snapped(self) -> float:
        return snap_to_grid(self.d1, self.grid())

    def planet(self) -> RadialBump:
        return RadialBump((0.0, 0.0), self.planet_radius, self.planet_depth)

    def dressing(self, s=None, dx=None, tau=None, vshift=0.0) -> SophonDressing:
        s = self.s if s is None else s
        dx = self.dx if dx is None else dx
        tau = self.tau if tau is None else tau
        if self.layout == "flatband":
            if vshift != 0.0:
                raise SolveError("vertical shifts are for the rectangle family")
            sites = flatband_sophons(dx, s, self.sophon_radius, tau)
        elif self.layout == "rectangle":
            sites = rectangle_sophons(dx, s, self.sophon_radius, tau, vshift)
        else:
            raise SolveError(f"unknown layout {self.layout!r}")
        return SophonDressing(planet=self.planet(), sophons=sites)

    def one_well(self, s=None, dx=None, tau=None, vshift=0.0) -> PotentialSpec:
        d = self.dressing(s=s, dx=dx, tau=tau, vshift=vshift)
        return sophon_dress(d.planet, d.sophons)

    def symmetric_config(self, s=None, dx=None, tau=None) -> DoubleWellConfig:
        return DoubleWellConfig.symmetric(self.one_well(s=s, dx=dx, tau=tau),
                                          self.d1_snapped)

    def sheared_well(self, s: float, shear: float) -> PotentialSpec:
        """Left-well variant with only the top sophon pair raised by ``shear``.

        No rigid rectangle (any vertical shift, any half-height) can be the
        inversion image of this layout once shear != 0, so a double well
        pairing it with a rectangle is non-inversion-symmetric for every
        choice of the remaining parameters.
        """
        offs = [(self.dx, s + shear), (-self.dx, s + shear),
                (self.dx, -s), (-self.dx, -s)]
        sites = tuple(SophonSite(o, self.sophon_radius, self.tau) for o in offs)
        d = SophonDressing(planet=self.planet(), sophons=sites)
        return sophon_dress(d.planet, d.sophons)

    def free_config(self, s: float, vshift_right: float,
                    shear: float) -> DoubleWellConfig:
        left = self.sheared_well(s, shear)
        right = self.one_well(s=s, vshift=vshift_right)
        return DoubleWellConfig(left_well=left, right_well=right,
                                d1=self.d1_snapped, symmetry_mode="free")

    def bare_config(self) -> DoubleWellConfig:
        return DoubleWellConfig.symmetric(PotentialSpec((self.planet(),)),
                                          self.d1_snapped)

    def with_overrides(self, **kw) -> "SophonExperiment":
        return replace(self, **kw)

    def check_resolution(self):
        if self.sophon_radius < 4.0 * self.grid().h:
            raise SolveError(
                f"sophon radius {self.sophon_radius} spans fewer than 4 cells "
                f"at n={self.n}, L={self.L}")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("lam", "b", "d1", "planet_radius", "planet_depth", "dx", "s",
                 "sophon_radius", "tau", "L", "n", "seed", "layout")}


def baseline_report(exp: SophonExperiment) -> HoppingReport:
    """Bare radial double well at the experiment's lam, b, d1."""
    return double_well_report(exp.bare_config(), exp.grid(), exp.params(),
                              seed=exp.seed)


def _row_from_report(exp, value, rep: HoppingReport, dressing) -> SweepRow:
    pred = predict_rho(dressing, exp.d1_snapped, exp.params())
    return SweepRow(
        value=value, rho=rep.rho, delta=rep.delta,
        parity_diff=rep.parity_diff, e_even=rep.e_even, e_odd=rep.e_odd,
        ground_parity=rep.ground_parity, rho_pred=pred.rho_pred,
        cos_theta=math.cos(pred.theta_model),
        dominance_margin=pred.dominance_margin,
        floor=rep.diagnostics["resolution_floor"])


def sweep(exp: SophonExperiment, parameter: str, values) -> list[SweepRow]:
    """Full pipeline per parameter value (monotone order enforced)."""
    if parameter not in ("s", "dx", "tau"):
        raise SolveError(f"unknown sweep parameter {parameter!r}")
    values = [float(v) for v in values]
    if values != sorted(values):
        raise SolveError("sweep values must ascend")
    exp.check_resolution()
    grid, params = exp.grid(), exp.params()
    rows = []
    for v in values:
        kw = {parameter: v}
        cfg = exp.symmetric_config(**kw)
        rep = double_well_report(cfg, grid, params, seed=exp.seed)
        rows.append(_row_from_report(exp, v, rep, exp.dressing(**kw)))
    return rows


def _parity_diff(exp: SophonExperiment, parameter: str, value: float,
                 grid, params) -> float:
    """E_even - E_odd for one dressed configuration (sector solves only)."""
    cfg = exp.symmetric_config(**{parameter: value})
    op = assemble_operator(grid, double_well(cfg), params)
    ps = parity_split(op, seed=exp.seed)
    return ps.diff


def find_zero_splitting(exp: SophonExperiment, parameter: str,
                        bracket: tuple[float, float],
                        param_tol: float = 2e-6) -> TuneResult:
    """Bisection on sign(E_even - E_odd) down to a parameter width param_tol.

    The endpoints must already bracket a sign change.  Returns the midpoint
    configuration's achieved splitting together with the bare radial baseline
    at the same lam, b, d1.
    """
    exp.check_resolution()
    grid, params = exp.grid(), exp.params()
    lo, hi = float(bracket[0]), float(bracket[1])
    f_lo = _parity_diff(exp, parameter, lo, grid, params)
    f_hi = _parity_diff(exp, parameter, hi, grid, params)
    evals = 2
    trace = [(lo, f_lo), (hi, f_hi)]
    if math.copysign(1.0, f_lo) == math.copysign(1.0, f_hi):
        raise SolveError(
            f"no sign change of E_even - E_odd in bracket [{lo}, {hi}]: "
            f"f(lo)={f_lo:.3e}, f(hi)={f_hi:.3e}")
    while hi - lo > param_tol:
        mid = 0.5 * (lo + hi)
        f_mid = _parity_diff(exp, parameter, mid, grid, params)
        evals += 1
        trace.append((mid, f_mid))
        if math.copysign(1.0, f_mid) == math.copysign(1.0, f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid

    root = 0.5 * (lo + hi)
    rep = double_well_report(exp.symmetric_config(**{parameter: root}),
                             grid, params, seed=exp.seed)
    base = baseline_report(exp)
    return TuneResult(
        kind="zero_splitting", parameter=parameter, root=(root,),
        achieved={"delta": rep.delta, "rho": rep.rho,
                  "parity_diff": rep.parity_diff,
                  "floor": rep.diagnostics["resolution_floor"]},
        baseline={"delta": base.delta, "rho": base.rho},
        bracket={"lo": lo, "hi": hi, "f_lo": f_lo, "f_hi": f_hi,
                 "width": hi - lo},
        evaluations=evals, trace=trace)


def find_parity_transition(exp: SophonExperiment, parameter: str,
                           bracket: tuple[float, float],
                           param_tol: float = 2e-6) -> TuneResult:
    """Parameter at which the ground state flips between even and odd.

    Same sign function as the zero-splitting search (the parity flips where
    E_even - E_odd changes sign); endpoint parities are re-verified and
    returned as evidence.
    """
    grid, params = exp.grid(), exp.params()
    lo, hi = float(bracket[0]), float(bracket[1])
    rep_lo = double_well_report(exp.symmetric_config(**{parameter: lo}),
                                grid, params, seed=exp.seed)
    rep_hi = double_well_report(exp.symmetric_config(**{parameter: hi}),
                                grid, params, seed=exp.seed)
    if rep_lo.ground_parity == rep_hi.ground_parity:
        raise SolveError(
            f"ground parity is {rep_lo.ground_parity} at both endpoints; "
            "no transition in bracket")
    inner = find_zero_splitting(exp, parameter, bracket, param_tol=param_tol)
    result = TuneResult(
        kind="parity_transition", parameter=parameter, root=inner.root,
        achieved=inner.achieved,
        baseline=inner.baseline, bracket=inner.bracket,
        evidence={"parity_lo": rep_lo.ground_parity,
                  "parity_hi": rep_hi.ground_parity,
                  "delta_lo": rep_lo.delta, "delta_hi": rep_hi.delta},
        evaluations=inner.evaluations + 2, trace=inner.trace)
    return result


def _rho_symmetric(exp: SophonExperiment, s: float, grid, params) -> complex:
    """Hopping coefficient of the symmetric dressed pair (one-well solve only)."""
    well = exp.one_well(s=s)
    _, res = one_well_ground(well, grid, params, seed=exp.seed)
    phi_L = magnetic_translate(res.eigenvectors[:, 0], "+", exp.d1_snapped, params, grid)
    phi_R = magnetic_translate(res.eigenvectors[:, 0], "-", exp.d1_snapped, params, grid)
    return compute_rho(phi_L, phi_R, well.shifted(exp.d1_snapped, 0.0), grid, params)


def find_zero_hopping(exp: SophonExperiment, bracket: tuple[float, float],
                      param_tol: float = 1e-6) -> TuneResult:
    """Bisection on Re rho over the sophon height (symmetric family).

    rho is real for these inversion-symmetric configurations, so its sign
    change locates the hopping zero directly; this is the tuning step used
    for the flat-band crystal well.
    """
    exp.check_resolution()
    grid, params = exp.grid(), exp.params()
    lo, hi = float(bracket[0]), float(bracket[1])
    f_lo = _rho_symmetric(exp, lo, grid, params).real
    f_hi = _rho_symmetric(exp, hi, grid, params).real
    evals = 2
    trace = [(lo, f_lo), (hi, f_hi)]
    if math.copysign(1.0, f_lo) == math.copysign(1.0, f_hi):
        raise SolveError(
            f"no sign change of Re rho in bracket [{lo}, {hi}]: "
            f"{f_lo:.3e} vs {f_hi:.3e}")
    while hi - lo > param_tol:
        mid = 0.5 * (lo + hi)
        f_mid = _rho_symmetric(exp, mid, grid, params).real
        evals += 1
        trace.append((mid, f_mid))
        if math.copysign(1.0, f_mid) == math.copysign(1.0, f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    root = 0.5 * (lo + hi)
    rho_root = _rho_symmetric(exp, root, grid, params)
    base = baseline_report(exp)
    return TuneResult(
        kind="zero_hopping", parameter="s", root=(root,),
        achieved={"rho": rho_root, "abs_rho": abs(rho_root)},
        baseline={"rho": base.rho, "abs_rho": abs(base.rho)},
        bracket={"lo": lo, "hi": hi, "f_lo": f_lo, "f_hi": f_hi,
                 "width": hi - lo},
        evaluations=evals, trace=trace)


def _rho_free(exp: SophonExperiment, s: float, vshift: float, shear: float,
              grid, params) -> complex:
    """Hopping coefficient of the sheared-left / shifted-right configuration."""
    left = exp.sheared_well(s, shear)
    right = exp.one_well(s=s, vshift=vshift)
    _, rl = one_well_ground(left, grid, params, seed=exp.seed)
    _, rr = one_well_ground(right, grid, params, seed=exp.seed + 1)
    phi_L = magnetic_translate(rl.eigenvectors[:, 0], "+", exp.d1_snapped, params, grid)
    phi_R = magnetic_translate(rr.eigenvectors[:, 0], "-", exp.d1_snapped, params, grid)
    return compute_rho(phi_L, phi_R, right.shifted(exp.d1_snapped, 0.0), grid, params)


def find_zero_rho_asymmetric(exp: SophonExperiment,
                             start: tuple[float, float] = (0.5, 0.05),
                             shear: float = 0.05,
                             target: float | None = None,
                             max_iter: int = 40,
                             fd_step: float = 2e-3) -> TuneResult:
    """Newton iteration driving (Re rho, Im rho) to zero in free mode.

    The left well carries a fixed shear (its top sophon pair raised by
    ``shear``), which no rectangle layout on the right can mirror, so every
    configuration in the search family is non-inversion-symmetric and rho is
    genuinely complex.  The search parameters are (s, vshift_right): the
    shared half-height controls the oscillatory real part, the right
    rectangle's vertical shift rotates the phase.  The Jacobian comes from
    forward differences; steps are damped and, if the Jacobian degenerates,
    regularized (the trace records the search).  Succeeds when |rho| <=
    target (default 1e-3 times the bare radial baseline).
    """
    if shear == 0.0:
        raise SolveError("shear must be nonzero; the family would contain "
                         "inversion-symmetric configurations")
    exp.check_resolution()
    grid, params = exp.grid(), exp.params()
    base = baseline_report(exp)
    base_rho = abs(base.rho)
    if target is None:
        target = 1e-3 * base_rho

    p = np.array(start, dtype=float)
    rho = _rho_free(exp, p[0], p[1], shear, grid, params)
    evals = 1
    trace = [(tuple(p), rho)]
    start_rho = abs(rho)

    for _ in range(max_iter):
        if abs(rho) <= target:
            break
        F = np.array([rho.real, rho.imag])
        J = np.empty((2, 2))
        for col in range(2):
            q = p.copy()
            q[col] += fd_step
            r2 = _rho_free(exp, q[0], q[1], shear, grid, params)
            evals += 1
            J[0, col] = (r2.real - rho.real) / fd_step
            J[1, col] = (r2.imag - rho.imag) / fd_step
        # Levenberg guard against a degenerate phase direction
        scale = float(np.max(np.abs(J)))
        if scale == 0.0:
            raise SolveError("Jacobian vanished; no descent direction "
                             f"(trace: {len(trace)} points)")
        mu = 0.0
        for _ in range(8):
            try:
                step = np.linalg.solve(J + mu * scale * np.eye(2), -F)
                break
            except np.linalg.LinAlgError:
                mu = 10.0 * mu if mu else 1e-6
        step_norm = float(np.linalg.norm(step))
        if step_norm > 0.2:
            step *= 0.2 / step_norm
        accepted = False
        for _ in range(6):
            q = p + step
            try:
                r_new = _rho_free(exp, q[0], q[1], shear, grid, params)
            except Exception:
                step *= 0.5
                evals += 1
                continue
            evals += 1
            if abs(r_new) < abs(rho):
                p, rho = q, r_new
                trace.append((tuple(p), rho))
                accepted = True
                break
            step *= 0.5
        if not accepted:
            raise SolveError(
                f"stalled at |rho|={abs(rho):.3e} (target {target:.3e}); "
                f"search trace has {len(trace)} points")
    else:
        raise SolveError(
            f"no convergence after {max_iter} iterations: |rho|={abs(rho):.3e} "
            f"vs target {target:.3e}")

    cfg = exp.free_config(p[0], p[1], shear)
    combined = double_well(cfg)
    sym = check_inversion_symmetric(combined, grid)
    op_info = compute_splitting(assemble_operator(grid, combined, params),
                                seed=exp.seed)
    return TuneResult(
        kind="zero_rho_asymmetric", parameter="(s, vshift_right)",
        root=(float(p[0]), float(p[1])),
        achieved={"rho": rho, "abs_rho": abs(rho),
                  "delta_at_root": op_info["delta"],
                  "start_abs_rho": start_rho},
        baseline={"rho": base.rho, "abs_rho": base_rho},
        evidence={"inversion_symmetric": sym["is_symmetric"],
                  "max_asymmetry": sym["max_asymmetry"],
                  "gap_isolation": op_info["gap_isolation"],
                  "shear": shear},
        evaluations=evals, trace=trace)


def family_proximity_report(dressed: PotentialSpec, bare: PotentialSpec,
                            grid: Grid2D) -> dict:
    """Sup-norm deviation and the area of the set where two potentials differ."""
    a = dressed.evaluate_on(grid)
    b = bare.evaluate_on(grid)
    diff = np.abs(a - b)
    area = float(np.count_nonzero(diff) * grid.h ** 2)
    return {"sup_deviation": float(diff.max()), "deviation_area": area}
