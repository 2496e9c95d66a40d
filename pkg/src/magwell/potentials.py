"""Compactly supported well potentials and double-well composition.

All wells are value objects: evaluation is pure, specs serialize to plain
dicts (lossless JSON round trip), and every compact well is exactly zero
outside its declared support disc.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "PotentialError",
    "RadialBump",
    "HarmonicPatch",
    "HarmonicGlobal",
    "PotentialSpec",
    "SophonSite",
    "SophonDressing",
    "DoubleWellConfig",
    "radial_bump",
    "unit_hessian_well",
    "harmonic_well",
    "sophon_dress",
    "rectangle_sophons",
    "flatband_sophons",
    "double_well",
    "check_inversion_symmetric",
]


class PotentialError(ValueError):
    """Invalid well geometry or parameters."""


def _bump(t: np.ndarray) -> np.ndarray:
    """Smooth bump profile exp(1 - 1/(1-t)) on t < 1, zero beyond."""
    out = np.zeros_like(t, dtype=float)
    inside = t < 1.0
    ti = t[inside]
    with np.errstate(over="ignore", under="ignore"):
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - ti))
    return out


def _smoothstep(u: np.ndarray) -> np.ndarray:
    """C-infinity step: 1 for u <= 0, 0 for u >= 1."""
    out = np.zeros_like(u, dtype=float)
    out[u <= 0.0] = 1.0
    mid = (u > 0.0) & (u < 1.0)
    um = u[mid]
    with np.errstate(over="ignore", under="ignore"):
        g1 = np.exp(-1.0 / (1.0 - um))
        g0 = np.exp(-1.0 / um)
    out[mid] = g1 / (g0 + g1)
    return out


@dataclass(frozen=True)
class RadialBump:
    """Smooth radial well -depth * exp(1 - 1/(1 - r^2/a^2)), zero outside B_a."""

    center: tuple[float, float]
    radius: float
    depth: float

    def __post_init__(self):
        if self.radius <= 0 or self.depth <= 0:
            raise PotentialError(
                f"radius and depth must be positive, got a={self.radius}, depth={self.depth}")

    def evaluate(self, X, Y):
        t = ((X - self.center[0]) ** 2 + (Y - self.center[1]) ** 2) / self.radius ** 2
        return -self.depth * _bump(t)

    def shifted(self, dx, dy):
        return replace(self, center=(self.center[0] + dx, self.center[1] + dy))

    def mirrored(self):
        return replace(self, center=(-self.center[0], -self.center[1]))

    @property
    def support_radius(self):
        return self.radius

    def to_dict(self):
        return {"kind": "radial_bump", "center": list(self.center),
                "radius": self.radius, "depth": self.depth}


# Fraction of the support radius over which the patch core is untouched by
# the cutoff; derivatives at the minimum are those of the bare core.
_PLATEAU = 0.6


@dataclass(frozen=True)
class HarmonicPatch:
    """C-infinity well with v(c) = -depth, gradient 0 and unit Hessian at c.

    Core -depth + |x-c|^2/2 + cubic_asymmetry*(x1-c1)^3 multiplied by a smooth
    radial cutoff that is identically 1 inside 0.6a and 0 outside a.  The cubic
    term breaks radial symmetry without touching the value, gradient or
    Hessian at the minimum.
    """

    center: tuple[float, float]
    radius: float
    depth: float
    cubic_asymmetry: float = 0.0

    def __post_init__(self):
        if self.radius <= 0 or self.depth <= 0:
            raise PotentialError("radius and depth must be positive")
        # Nonpositivity on the support: the core is largest on the rim.
        rim = -self.depth + 0.5 * self.radius ** 2 + abs(self.cubic_asymmetry) * self.radius ** 3
        if rim >= 0:
            raise PotentialError(
                f"well not nonpositive on its support (rim value {rim:.3g}); "
                "increase depth or shrink radius")

    def evaluate(self, X, Y):
        dx = X - self.center[0]
        dy = Y - self.center[1]
        r2 = dx ** 2 + dy ** 2
        core = -self.depth + 0.5 * r2 + self.cubic_asymmetry * dx ** 3
        r = np.sqrt(r2)
        u = (r / self.radius - _PLATEAU) / (1.0 - _PLATEAU)
        return core * _smoothstep(u)

    def shifted(self, dx, dy):
        return replace(self, center=(self.center[0] + dx, self.center[1] + dy))

    def mirrored(self):
        # v(-x) flips the sign of the cubic term about the mirrored center
        return replace(self, center=(-self.center[0], -self.center[1]),
                       cubic_asymmetry=-self.cubic_asymmetry)

    @property
    def support_radius(self):
        return self.radius

    def to_dict(self):
        return {"kind": "harmonic_patch", "center": list(self.center),
                "radius": self.radius, "depth": self.depth,
                "cubic_asymmetry": self.cubic_asymmetry}


@dataclass(frozen=True)
class HarmonicGlobal:
    """Global harmonic well omega0^2 |x|^2 / 2 (validation only, not compact)."""

    omega0: float

    def __post_init__(self):
        if self.omega0 <= 0:
            raise PotentialError("omega0 must be positive")

    def evaluate(self, X, Y):
        return 0.5 * self.omega0 ** 2 * (X ** 2 + Y ** 2)

    def shifted(self, dx, dy):
        raise PotentialError("the global harmonic well is pinned at the origin")

    def mirrored(self):
        return self

    @property
    def support_radius(self):
        return math.inf

    def to_dict(self):
        return {"kind": "harmonic_global", "omega0": self.omega0}


_KINDS = {"radial_bump": RadialBump, "harmonic_patch": HarmonicPatch,
          "harmonic_global": HarmonicGlobal}


def _well_from_dict(d: dict):
    kind = d.get("kind")
    if kind not in _KINDS:
        raise PotentialError(f"unknown well kind {kind!r}")
    d = dict(d)
    d.pop("kind")
    if "center" in d:
        d["center"] = tuple(d["center"])
    return _KINDS[kind](**d)


@dataclass(frozen=True)
class PotentialSpec:
    """A sum of primitive wells; the empty spec is v == 0."""

    wells: tuple = ()

    def evaluate(self, X, Y):
        X = np.asarray(X, dtype=float)
        out = np.zeros(np.broadcast(X, Y).shape, dtype=float)
        for w in self.wells:
            out += w.evaluate(X, Y)
        return out

    def evaluate_on(self, grid) -> np.ndarray:
        X, Y = grid.meshgrid()
        return self.evaluate(X, Y)

    def shifted(self, dx, dy) -> "PotentialSpec":
        return PotentialSpec(tuple(w.shifted(dx, dy) for w in self.wells))

    def mirrored(self) -> "PotentialSpec":
        return PotentialSpec(tuple(w.mirrored() for w in self.wells))

    def __add__(self, other: "PotentialSpec") -> "PotentialSpec":
        return PotentialSpec(self.wells + other.wells)

    @property
    def is_compact(self) -> bool:
        return all(math.isfinite(w.support_radius) for w in self.wells)

    def support_extents(self) -> list[float]:
        """Per-well max distance from the origin reached by the support."""
        out = []
        for w in self.wells:
            if not math.isfinite(w.support_radius):
                out.append(math.inf)
            else:
                cx, cy = w.center
                out.append(max(abs(cx), abs(cy)) + w.support_radius)
        return out

    def to_dict(self) -> dict:
        return {"wells": [w.to_dict() for w in self.wells]}

    @classmethod
    def from_dict(cls, d: dict) -> "PotentialSpec":
        return cls(tuple(_well_from_dict(w) for w in d.get("wells", [])))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, s: str) -> "PotentialSpec":
        return cls.from_dict(json.loads(s))

    def sha256(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


def radial_bump(a: float, depth: float) -> PotentialSpec:
    """Radially symmetric compact well at the origin: v(0) = -depth, 0 outside B_a."""
    return PotentialSpec((RadialBump((0.0, 0.0), a, depth),))


def harmonic_well(omega0: float) -> PotentialSpec:
    return PotentialSpec((HarmonicGlobal(omega0),))


def unit_hessian_well(a: float, depth: float, cubic_asymmetry: float = 0.0) -> PotentialSpec:
    """C3 well with unique minimum -depth at the origin and identity Hessian.

    The minimum is verified by dense sampling over the support; a cubic
    asymmetry large enough to create a competing minimum is rejected.
    """
    patch = HarmonicPatch((0.0, 0.0), a, depth, cubic_asymmetry)
    spec = PotentialSpec((patch,))
    xs = np.linspace(-a, a, 241)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    vals = spec.evaluate(X, Y)
    kmin = np.unravel_index(np.argmin(vals), vals.shape)
    if abs(xs[kmin[0]]) > 1.5 * (xs[1] - xs[0]) or abs(xs[kmin[1]]) > 1.5 * (xs[1] - xs[0]):
        raise PotentialError("minimum moved away from the origin; cubic_asymmetry too large")
    near = vals < vals[kmin] + 1e-9 * depth
    ii, jj = np.nonzero(near)
    if np.ptp(ii) > 2 or np.ptp(jj) > 2:
        raise PotentialError("minimum is not unique; cubic_asymmetry too large")
    return spec


@dataclass(frozen=True)
class SophonSite:
    """One satellite well: offset from the planet center, radius, amplitude <= 0."""

    offset: tuple[float, float]
    radius: float
    amplitude: float

    def __post_init__(self):
        if self.radius <= 0:
            raise PotentialError("sophon radius must be positive")
        if self.amplitude > 0:
            raise PotentialError("sophon amplitudes are restricted to tau <= 0")

    def to_dict(self):
        return {"offset": list(self.offset), "radius": self.radius,
                "amplitude": self.amplitude}


@dataclass(frozen=True)
class SophonDressing:
    """A planet well plus 4 or 8 satellite wells at fixed offsets."""

    planet: RadialBump
    sophons: tuple[SophonSite, ...]

    def __post_init__(self):
        if len(self.sophons) not in (4, 8):
            raise PotentialError(f"expected 4 or 8 sophons, got {len(self.sophons)}")
        discs = [((0.0, 0.0), self.planet.radius)] + [
            (s.offset, s.radius) for s in self.sophons]
        for a in range(len(discs)):
            for b in range(a + 1, len(discs)):
                (xa, ya), ra = discs[a]
                (xb, yb), rb = discs[b]
                if math.hypot(xa - xb, ya - yb) <= ra + rb:
                    raise PotentialError(
                        f"overlapping discs: well {a} and well {b} "
                        f"(centers {discs[a][0]}, {discs[b][0]})")

    def centers(self) -> list[tuple[float, float]]:
        """Planet center first, then sophon centers (absolute coordinates)."""
        px, py = self.planet.center
        return [(px, py)] + [(px + s.offset[0], py + s.offset[1]) for s in self.sophons]

    def min_sophon_radius(self) -> float:
        return min(s.radius for s in self.sophons)

    def deviation_area(self) -> float:
        return sum(math.pi * s.radius ** 2 for s in self.sophons if s.amplitude != 0.0)

    def to_dict(self):
        return {"planet": self.planet.to_dict(),
                "sophons": [s.to_dict() for s in self.sophons]}


def rectangle_sophons(dx: float, s: float, radius: float, amplitude: float,
                      vertical_shift: float = 0.0) -> tuple[SophonSite, ...]:
    """Four sophons at (+-dx, vertical_shift +- s) around the planet center.

    With vertical_shift = 0 the layout is the inversion-symmetric rectangle;
    a nonzero shift breaks both the inversion and the reflection symmetry.
    """
    offs = [(dx, vertical_shift + s), (dx, vertical_shift - s),
            (-dx, vertical_shift + s), (-dx, vertical_shift - s)]
    return tuple(SophonSite(o, radius, amplitude) for o in offs)


def flatband_sophons(dx: float, s: float, radius: float, amplitude: float) -> tuple[SophonSite, ...]:
    """Eight sophons: the rectangle plus its 90-degree rotation (4-fold symmetric)."""
    rect = [(dx, s), (dx, -s), (-dx, s), (-dx, -s)]
    rot = [(-y, x) for (x, y) in rect]
    return tuple(SophonSite(o, radius, amplitude) for o in rect + rot)


def sophon_dress(planet: RadialBump, sophons) -> PotentialSpec:
    """Planet plus satellite wells; sophons with zero amplitude are dropped.

    Each satellite uses the same smooth bump profile scaled to its radius and
    |amplitude|, so the deviation from the bare planet is supported exactly on
    the sophon discs.
    """
    dressing = SophonDressing(planet=planet, sophons=tuple(sophons))
    wells = [planet]
    px, py = planet.center
    for s in dressing.sophons:
        if s.amplitude == 0.0:
            continue
        wells.append(RadialBump((px + s.offset[0], py + s.offset[1]),
                                s.radius, -s.amplitude))
    return PotentialSpec(tuple(wells))


@dataclass(frozen=True)
class DoubleWellConfig:
    """Two one-well specs (centered at the origin) to be displaced to -+d.

    In inversion_symmetric mode the right well is the point reflection of the
    left one, so the combined potential is even.
    """

    left_well: PotentialSpec
    right_well: PotentialSpec
    d1: float
    symmetry_mode: str = "inversion_symmetric"

    def __post_init__(self):
        if self.symmetry_mode not in ("inversion_symmetric", "free"):
            raise PotentialError(f"unknown symmetry mode {self.symmetry_mode!r}")
        extent = max([0.0] + [math.hypot(w.center[0], w.center[1]) + w.support_radius
                              for spec in (self.left_well, self.right_well)
                              for w in spec.wells])
        if self.d1 <= extent:
            raise PotentialError(
                f"d1={self.d1} must exceed the one-well support radius {extent:.4g}")
        if self.symmetry_mode == "inversion_symmetric":
            if self.right_well.to_dict() != self.left_well.mirrored().to_dict():
                raise PotentialError(
                    "inversion_symmetric mode requires right_well(x) == left_well(-x)")

    @classmethod
    def symmetric(cls, well: PotentialSpec, d1: float) -> "DoubleWellConfig":
        return cls(left_well=well, right_well=well.mirrored(), d1=d1,
                   symmetry_mode="inversion_symmetric")

    def to_dict(self):
        return {"left_well": self.left_well.to_dict(),
                "right_well": self.right_well.to_dict(),
                "d1": self.d1, "symmetry_mode": self.symmetry_mode}


def double_well(cfg: DoubleWellConfig) -> PotentialSpec:
    """v_L + v_R with the left well displaced to (-d1, 0), the right to (+d1, 0)."""
    left = cfg.left_well.shifted(-cfg.d1, 0.0)
    right = cfg.right_well.shifted(+cfg.d1, 0.0)
    for wl in left.wells:
        for wr in right.wells:
            gap = math.hypot(wl.center[0] - wr.center[0], wl.center[1] - wr.center[1])
            if gap <= wl.support_radius + wr.support_radius:
                raise PotentialError(
                    f"overlapping supports after displacement: {wl.center} / {wr.center}")
    return left + right


def check_inversion_symmetric(v: PotentialSpec, grid, tol: float = 1e-14) -> dict:
    """Max grid asymmetry max_x |v(x) - v(-x)| and a boolean at tolerance tol."""
    vals = v.evaluate_on(grid)
    asym = float(np.max(np.abs(vals - vals[::-1, ::-1])))
    return {"is_symmetric": asym <= tol, "max_asymmetry": asym}
