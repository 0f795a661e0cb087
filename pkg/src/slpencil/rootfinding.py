"""Zeros of truncated characteristic series.

Two routes to the eigenvalues: global polynomial root extraction through the
companion matrix, and argument-principle localization on rectangles with
winding numbers, residue-formula refinement and Newton polishing.  A root is
certified when the sampled boundary minimum of |Phi_M| beats a rigorous bound
on |Phi - Phi_M|, which by Rouche's theorem puts the truncated roots in
bijection with true eigenvalues inside the rectangle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import mpmath
import numpy as np

from .errors import RootLocalizationError
from .problems import CharacteristicSeries

BOUNDARY_ABS_FLOOR = 1e-280
MAX_PHASE_STEP = math.pi / 2
MAX_LOCAL_REFINES = 10  # per-segment density doublings before giving up


@dataclass(frozen=True)
class Rectangle:
    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def __post_init__(self):
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ValueError(f"degenerate rectangle {self}")

    @property
    def center(self) -> complex:
        return complex((self.re_min + self.re_max) / 2, (self.im_min + self.im_max) / 2)

    @property
    def diameter(self) -> float:
        return math.hypot(self.re_max - self.re_min, self.im_max - self.im_min)

    def corners(self) -> list[complex]:
        return [complex(self.re_min, self.im_min), complex(self.re_max, self.im_min),
                complex(self.re_max, self.im_max), complex(self.re_min, self.im_max)]

    def contains(self, z: complex) -> bool:
        return (self.re_min <= z.real <= self.re_max
                and self.im_min <= z.imag <= self.im_max)

    def max_abs_from(self, center: complex) -> float:
        return max(abs(c - center) for c in self.corners())

    @staticmethod
    def around(z: complex, half_width: float) -> "Rectangle":
        return Rectangle(z.real - half_width, z.real + half_width,
                         z.imag - half_width, z.imag + half_width)


@dataclass(frozen=True)
class WindingResult:
    rectangle: Rectangle
    winding: int
    boundary_min_abs: float


@dataclass(frozen=True)
class EigenvalueRecord:
    value: complex
    multiplicity: int
    method: str  # "poly_roots" | "arg_principle"
    certified: bool
    residual: float
    back_map: complex | None = None


# ---------------------------------------------------------------------------
# polynomial route


def poly_roots(series: CharacteristicSeries) -> list[complex]:
    """All roots of the truncated polynomial, shifted back by the series center.

    Leading coefficients too small to divide by in double precision (they only
    move roots near infinity) are dropped before forming the companion matrix.
    """
    coeffs = series.coeffs
    if not np.any(coeffs != 0):
        raise ValueError("all characteristic coefficients vanish")
    top = np.max(np.abs(coeffs))
    deg = len(coeffs) - 1
    while deg > 0 and abs(coeffs[deg]) <= 1e-300 * top:
        deg -= 1
    roots = np.roots(coeffs[:deg + 1][::-1])
    return [complex(z) + series.center for z in roots]


def newton_polish(series: CharacteristicSeries, z0: complex, *, steps: int = 5,
                  dps: int = 50) -> complex:
    """Newton iteration in extended working precision on the double-precision
    coefficients; falls back to the input if the residual does not improve."""
    coeffs = [mpmath.mpc(c) for c in series.coeffs]
    deriv = [k * c for k, c in enumerate(coeffs)][1:]

    def horner(cs, z):
        acc = mpmath.mpc(0)
        for c in reversed(cs):
            acc = acc * z + c
        return acc

    with mpmath.workdps(dps):
        center = mpmath.mpc(series.center)
        z = mpmath.mpc(z0) - center
        best = z
        best_abs = abs(horner(coeffs, z))
        for _ in range(steps):
            dp = horner(deriv, z)
            if dp == 0:
                break
            z = z - horner(coeffs, z) / dp
            cur = abs(horner(coeffs, z))
            if cur < best_abs:
                best, best_abs = z, cur
        return complex(best + center)


# ---------------------------------------------------------------------------
# argument principle


def _boundary_points(rect: Rectangle, n: int) -> np.ndarray:
    """n points along the positively oriented boundary, corners included."""
    w = rect.re_max - rect.re_min
    h = rect.im_max - rect.im_min
    per = 2 * (w + h)
    counts = [max(2, round(n * s / per)) for s in (w, h, w, h)]
    segs = []
    c = rect.corners()
    for k in range(4):
        a, b = c[k], c[(k + 1) % 4]
        t = np.linspace(0.0, 1.0, counts[k], endpoint=False)
        segs.append(a + (b - a) * t)
    return np.concatenate(segs)


def _phase_steps(series, pts: np.ndarray, vals: np.ndarray) -> np.ndarray:
    """Per-segment argument increments, locally refining any step above pi/2."""
    nxt_vals = np.roll(vals, -1)
    nxt_pts = np.roll(pts, -1)
    steps = np.angle(nxt_vals / vals)
    bad = np.flatnonzero(np.abs(steps) > MAX_PHASE_STEP)
    for i in bad:
        steps[i] = _refine_step(series, pts[i], nxt_pts[i], vals[i], nxt_vals[i])
    return steps


def _refine_step(series, z1: complex, z2: complex, v1: complex, v2: complex,
                 depth: int = 0) -> float:
    step = np.angle(v2 / v1)
    if abs(step) <= MAX_PHASE_STEP:
        return float(step)
    if depth >= MAX_LOCAL_REFINES:
        raise RootLocalizationError(
            f"argument jump between {z1} and {z2} unresolved after "
            f"{MAX_LOCAL_REFINES} density doublings (zero on or near the contour?)"
        )
    zm = (z1 + z2) / 2
    vm = complex(series(zm))
    if vm == 0 or abs(vm) < BOUNDARY_ABS_FLOOR:
        raise RootLocalizationError(f"characteristic function vanishes at {zm}")
    return (_refine_step(series, z1, zm, v1, vm, depth + 1)
            + _refine_step(series, zm, z2, vm, v2, depth + 1))


def winding_number(series, rect: Rectangle, samples_per_contour: int = 4000, *,
                   abs_floor: float = BOUNDARY_ABS_FLOOR) -> WindingResult:
    """Winding of the series image of the rectangle boundary around 0.

    Computed by summing phase differences along the sampled contour; any pair
    turning by more than pi/2 is resampled locally (doubling density up to
    2^10) before the whole computation is declared unresolvable.
    """
    pts = _boundary_points(rect, samples_per_contour)
    vals = np.asarray(series(pts), dtype=np.complex128)
    min_abs = float(np.min(np.abs(vals)))
    if min_abs < abs_floor:
        raise RootLocalizationError(
            f"zero on the contour of {rect}: boundary |Phi| = {min_abs:g}"
        )
    total = float(np.sum(_phase_steps(series, pts, vals)))
    winding = round(total / (2 * math.pi))
    if abs(total - 2 * math.pi * winding) > 0.25 * 2 * math.pi:
        raise RootLocalizationError(
            f"total argument change {total:.3f} is not close to a multiple of 2*pi"
        )
    return WindingResult(rect, winding, min_abs)


def _residue_trapezoid(series, rect: Rectangle, samples: int) -> complex:
    pts = _boundary_points(rect, samples)
    nxt = np.roll(pts, -1)
    prv = np.roll(pts, 1)
    dz = (nxt - prv) / 2.0
    vals = np.asarray(series(pts), dtype=np.complex128)
    dvals = np.asarray(series.deriv(pts), dtype=np.complex128)
    return complex(np.sum(pts * dvals / vals * dz))


def residue_refine(series, rect: Rectangle, multiplicity: int,
                   samples: int = 4000) -> complex:
    """Zero position by the residue formula (2*pi*i*N)^-1 contour-int z Phi'/Phi dz.

    Trapezoid rule along the rectangle boundary; the corners leave an O(h^2)
    error expansion, so two Richardson levels push the rule to O(h^6).
    """
    t1 = _residue_trapezoid(series, rect, samples)
    t2 = _residue_trapezoid(series, rect, 2 * samples)
    t4 = _residue_trapezoid(series, rect, 4 * samples)
    r1 = (4 * t2 - t1) / 3
    r2 = (4 * t4 - t2) / 3
    integral = (16 * r2 - r1) / 15
    return complex(integral / (2j * math.pi * multiplicity))


def _evaluation_noise(series, rect: Rectangle) -> float:
    """Rounding-noise scale of Phi_M on the rectangle boundary.

    Below a small multiple of this level the sampled values are cancellation
    noise and winding numbers stop being meaningful, which happens inside the
    natural resolution radius of multiple zeros.
    """
    term_scale = getattr(series, "term_scale", None)
    if term_scale is None:
        return 0.0
    center = getattr(series, "center", 0.0 + 0.0j)
    far = max(rect.corners(), key=lambda c: abs(c - center))
    m = getattr(series, "truncation", 64)
    return 8.0 * math.sqrt(m + 1) * np.finfo(float).eps * term_scale(far)


def _finalize(series, region: Rectangle, winding: int, samples: int,
              polish_steps: int) -> list[EigenvalueRecord]:
    z = residue_refine(series, region, winding, samples)
    if polish_steps > 0:
        z = newton_polish(series, z, steps=polish_steps)
    return [EigenvalueRecord(
        value=z, multiplicity=winding, method="arg_principle",
        certified=False, residual=float(abs(series(z))),
    )]


def localize(series, region: Rectangle, tol: float = 1e-10, *,
             samples_per_contour: int = 4000, polish_steps: int = 5,
             _winding: WindingResult | None = None) -> list[EigenvalueRecord]:
    """Recursive rectangle bisection by winding number.

    Rectangles with winding zero are discarded; once a rectangle's diameter
    falls below tol the zero inside is pinned by the residue formula and
    polished by a few Newton steps (reverting to the residue estimate if
    Newton does not reduce |Phi_M|).  Subdivision also stops early if the
    boundary values sink into rounding noise, the resolution limit of a
    multiple zero; clusters tighter than that (or than tol) come back as one
    record with the summed winding.
    """
    w = _winding if _winding is not None else winding_number(
        series, region, samples_per_contour)
    if w.winding == 0:
        return []
    if w.winding < 0:
        raise RootLocalizationError(
            f"negative winding {w.winding} on {region}: not a polynomial image"
        )
    if region.diameter <= tol or w.boundary_min_abs < _evaluation_noise(series, region):
        return _finalize(series, region, w.winding, samples_per_contour,
                         polish_steps)

    wide = (region.re_max - region.re_min) >= (region.im_max - region.im_min)
    lo, hi = (region.re_min, region.re_max) if wide else (region.im_min, region.im_max)
    for attempt in range(8):
        # bisect the longer side, nudging the cut if a zero sits on it
        jitter = ((-1) ** attempt) * math.ceil(attempt / 2) * 1e-3 * region.diameter
        mid = (lo + hi) / 2 + jitter
        if not lo < mid < hi:
            continue
        if wide:
            r1 = Rectangle(region.re_min, mid, region.im_min, region.im_max)
            r2 = Rectangle(mid, region.re_max, region.im_min, region.im_max)
        else:
            r1 = Rectangle(region.re_min, region.re_max, region.im_min, mid)
            r2 = Rectangle(region.re_min, region.re_max, mid, region.im_max)
        try:
            w1 = winding_number(series, r1, samples_per_contour)
            w2 = winding_number(series, r2, samples_per_contour)
        except RootLocalizationError:
            continue
        if w1.winding + w2.winding != w.winding:
            continue
        out = localize(series, r1, tol, samples_per_contour=samples_per_contour,
                       polish_steps=polish_steps, _winding=w1)
        out += localize(series, r2, tol, samples_per_contour=samples_per_contour,
                        polish_steps=polish_steps, _winding=w2)
        return sorted(out, key=lambda rec: (rec.value.real, rec.value.imag))
    if w.boundary_min_abs < 16 * _evaluation_noise(series, region):
        # every cut line lands in the noise skirt of an (almost) multiple zero
        return _finalize(series, region, w.winding, samples_per_contour,
                         polish_steps)
    raise RootLocalizationError(
        f"could not split {region} without landing on a zero after 8 jitters"
    )


def certify(record: EigenvalueRecord, series, tail: float,
            rect: Rectangle, samples_per_contour: int = 4000) -> EigenvalueRecord:
    """Rouche check: certified when min boundary |Phi_M| exceeds the tail bound.

    tail must bound |Phi - Phi_M| on the rectangle boundary; the count of true
    zeros inside then equals the winding of Phi_M, so the record's multiplicity
    is trustworthy.
    """
    if not math.isfinite(tail):
        return replace(record, certified=False)
    pts = _boundary_points(rect, samples_per_contour)
    vals = np.abs(np.asarray(series(pts), dtype=np.complex128))
    ok = bool(np.min(vals) > tail)
    return replace(record, certified=ok)
