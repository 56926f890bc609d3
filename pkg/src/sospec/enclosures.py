"""Spectral enclosures derived from second order spectral points.

A point z of the second order spectrum certifies that the real interval
[Re z - |Im z|, Re z + |Im z|] meets Spec(A).  If additionally the interval
(a, b) contains exactly one spectral point and z lies in the disk with
diameter (a, b), the half-widths shrink to |Im z|^2 / (b - Re z) and
|Im z|^2 / (Re z - a).
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateGap, EmptyExterior, OutsideDisk, PreconditionError
from .pencil import SecondOrderSpectrum

INF = math.inf


@dataclass(frozen=True)
class EnclosureInterval:
    lo: float
    hi: float
    source: str
    point: complex
    label: str = ""

    def __post_init__(self):
        if self.source not in ("residual", "improved"):
            raise PreconditionError(f"unknown enclosure source {self.source!r}")
        if not self.lo <= self.hi:
            raise PreconditionError("enclosure needs lo <= hi")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def issubset(self, other: "EnclosureInterval") -> bool:
        return other.lo <= self.lo and self.hi <= other.hi

    def certified(self) -> "EnclosureInterval":
        """Copy widened by one ulp per endpoint, so printed bounds stay valid."""
        return replace(self, lo=float(np.nextafter(self.lo, -INF)),
                       hi=float(np.nextafter(self.hi, INF)))


@dataclass(frozen=True)
class GapInterval:
    """Interval (a, b) with a possibly -inf and b possibly +inf."""

    a: float
    b: float
    contains: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if not self.a < self.b:
            raise PreconditionError("gap needs a < b")

    def in_disk(self, z: complex, tol: float = 0.0) -> bool:
        """Membership of ``z`` in the open disk with diameter (a, b), shrunk by ``tol``."""
        a, b = self.a, self.b
        if a == -INF and b == INF:
            return True
        if a == -INF:
            return z.real < b - tol
        if b == INF:
            return z.real > a + tol
        return abs(z - 0.5 * (a + b)) < 0.5 * (b - a) - tol

    @classmethod
    def from_json(cls, doc: dict) -> "GapInterval":
        return cls(parse_bound(doc["a"]), parse_bound(doc["b"]),
                   tuple(float(x) for x in doc.get("contains", ())))

    def to_json(self) -> dict:
        return {"a": format_bound(self.a), "b": format_bound(self.b)}


def parse_bound(x) -> float:
    if isinstance(x, str):
        key = x.strip().lower()
        if key in ("-inf", "-infinity"):
            return -INF
        if key in ("+inf", "inf", "infinity", "+infinity"):
            return INF
        return float(key)
    return float(x)


def format_bound(x: float):
    if x == -INF:
        return "-inf"
    if x == INF:
        return "+inf"
    return x


def residual_interval(z: complex, label: str = "") -> EnclosureInterval:
    z = complex(z)
    r = abs(z.imag)
    return EnclosureInterval(z.real - r, z.real + r, "residual", z, label)


def improved_interval(z: complex, gap: GapInterval, label: str = "",
                      tol: float = 1e-12) -> EnclosureInterval:
    """Quadratic-residual enclosure; requires exactly one eigenvalue in the gap."""
    z = complex(z)
    a, b = gap.a, gap.b
    if not gap.in_disk(z):
        raise OutsideDisk(f"{z} is not in the disk over ({a}, {b})")
    x, y2 = z.real, z.imag ** 2
    scale = tol * max(1.0, abs(z))
    if x - a <= scale or b - x <= scale:
        raise DegenerateGap(f"Re z = {x} is too close to a gap endpoint")
    lo = x - (y2 / (b - x) if b != INF else 0.0)
    hi = x + (y2 / (x - a) if a != -INF else 0.0)
    return EnclosureInterval(lo, hi, "improved", z, label)


def alpha_lower_bound(z: complex, a: float, b: float, tol: float = 1e-12) -> float:
    """Lower bound for sigma(z) on the closed disk over a spectral gap (a, b)."""
    z = complex(z)
    if not (math.isfinite(a) and math.isfinite(b)) or not a < b:
        raise PreconditionError("alpha needs a finite interval a < b")
    radius = 0.5 * (b - a)
    if abs(z - 0.5 * (a + b)) > radius * (1 + tol):
        raise OutsideDisk(f"{z} is not in the disk over ({a}, {b})")
    za, zb = abs(z - a), abs(z - b)
    if za == 0 or zb == 0:
        return 0.0
    cosine = ((b - a) ** 2 - za**2 - zb**2) / (2 * zb * za)
    return max(0.0, cosine) * min(za, zb) ** 2


@dataclass(frozen=True)
class Thm34Constants:
    """Constants of the clustering theorem for a group of eigenvalues in (a, b)."""

    gamma: float
    kappa: float
    d: float
    m: int
    s: int
    eps_max: float

    def delta_max(self, eps: float) -> float:
        """Largest admissible graph-norm distance for cluster radius ``eps``."""
        return self.kappa * eps * eps


def gamma_constant(a: float, b: float, m: int, s: int) -> float:
    w2 = (b - a) ** 2
    root5 = math.sqrt(5.0)
    return 2 * root5 * m * w2 * ((1 + max(abs(a), abs(b))) ** 2 + w2 * (2 * root5 * s + 8))


def thm34_constants(a: float, b: float, m: int, s: int, spectrum_outside: Sequence[float],
                    eigenvalues: Sequence[float] | None = None) -> Thm34Constants:
    """gamma, kappa = d^2/gamma and the admissible cluster radius bound.

    ``eigenvalues`` (the s distinct eigenvalues inside (a, b)), when given,
    add the half-spacing term to the radius bound.
    """
    if not a < b:
        raise PreconditionError("need a < b")
    if not m >= s >= 1:
        raise PreconditionError("need m >= s >= 1")
    outside = [float(x) for x in spectrum_outside]
    if not outside:
        raise EmptyExterior("spectrum outside (a, b) is empty")
    d = min(min(abs(x - a), abs(x - b)) for x in outside)
    gamma = gamma_constant(a, b, m, s)
    kappa = d * d / gamma
    eps_max = 1.0 / (m**0.25 * math.sqrt(kappa))
    if eigenvalues is not None:
        chain = [a] + sorted(float(x) for x in eigenvalues) + [b]
        eps_max = min(eps_max, min(abs(u - v) / 2 for u, v in zip(chain, chain[1:])))
    return Thm34Constants(gamma, kappa, d, m, s, eps_max)


def isolation_radius(lam: float, other_spectrum: Iterable[float]) -> float:
    others = [float(x) for x in other_spectrum if x != lam]
    if not others:
        raise EmptyExterior("no other spectral points given")
    return min(abs(x - lam) for x in others) / math.sqrt(2.0)


def pair_and_enclose(spectrum: SecondOrderSpectrum, gaps: Sequence[GapInterval],
                     labels: Sequence[str] | None = None,
                     real_tol: float = 1e-12) -> list[EnclosureInterval]:
    """Residual (and, where admissible, improved) enclosures for points inside each gap disk."""
    _check_disjoint(gaps)
    if labels is None:
        labels = [f"gap{i + 1}" for i in range(len(gaps))]
    scale = max([1.0] + [abs(pt.value) for pt in spectrum])
    out = []
    for gap, label in zip(gaps, labels):
        for pt in spectrum:
            if pt.im < 0 or not gap.in_disk(pt.value):
                continue
            z = pt.value
            if abs(pt.im) < real_tol * scale:
                z = complex(pt.re, 0.0)
            out.append(residual_interval(z, label))
            try:
                out.append(improved_interval(z, gap, label))
            except (OutsideDisk, DegenerateGap):
                pass
    out.sort(key=lambda e: (e.point.real, e.source != "residual", e.lo))
    return out


def _check_disjoint(gaps: Sequence[GapInterval]):
    ordered = sorted(gaps, key=lambda g: g.a)
    for g, h in zip(ordered, ordered[1:]):
        if h.a < g.b:
            raise PreconditionError(f"gaps ({g.a}, {g.b}) and ({h.a}, {h.b}) overlap")


def enclosures_to_csv(rows: Iterable[EnclosureInterval], certify: bool = True) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["eig_label", "source", "lo", "hi", "re", "im"])
    for e in rows:
        if certify:
            e = e.certified()
        writer.writerow([e.label, e.source, repr(e.lo), repr(e.hi),
                         repr(e.point.real), repr(abs(e.point.imag))])
    return buf.getvalue()
