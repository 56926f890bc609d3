"""Analytic operator models with closed-form spectra.

Every model here acts on an infinite orthonormal system, but the trial space
and its image under A stay inside finitely many basis vectors, so each one is
represented exactly by a :class:`~sospec.pencil.MatrixModel` on that active
set.  The closed forms are what the tests compare the numerics against.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InfeasibleMixing, OutsideAdmissibleRegion, PoleHit, PreconditionError
from .pencil import (ClusterConfig, MatrixModel, PencilTriple, SecondOrderSpectrum,
                     SpectralPoint, assemble_pencil, mobius, mobius_image,
                     multiset_distance, second_order_spectrum)

# closed forms are lists of (value, algebraic multiplicity, geometric multiplicity)
ClosedForm = list


def _pair_index(k: int, sign: str) -> int:
    """Active-set position of e_k^+ / e_k^- (k >= 1)."""
    return 2 * (k - 1) + (0 if sign == "+" else 1)


def _rotation_blocks(n: int, block) -> np.ndarray:
    """Block-diagonal operator on e_1^+-, ..., e_n^+- with ``block(k)`` as 2x2 block."""
    a = np.zeros((2 * n, 2 * n))
    for k in range(1, n + 1):
        i = _pair_index(k, "+")
        a[i:i + 2, i:i + 2] = block(k)
    return a


def _leading_basis(n: int) -> np.ndarray:
    """Columns e_1^+-, ..., e_{n-1}^+-, e_n^- of the 2n-dimensional active set."""
    eye = np.eye(2 * n)
    cols = list(range(2 * n - 2)) + [_pair_index(n, "-")]
    return eye[:, cols]


# ---------------------------------------------------------------------------
# indefinite model with compact resolvent
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiagonalPairModel:
    """A = sum_k k |f_k^+><f_k^+| - k |f_k^-><f_k^-|, f_k^+- = (e_k^+ +- e_k^-)/sqrt 2.

    The trial space spans e_1^+-, ..., e_{n-1}^+- and e_n^-.
    """

    n: int

    def __post_init__(self):
        if self.n < 2:
            raise PreconditionError("need n >= 2")

    @property
    def dim(self) -> int:
        return 2 * self.n - 1

    def operator(self) -> np.ndarray:
        # in (e^+, e^-) coordinates each block is k * [[0, 1], [1, 0]]
        return _rotation_blocks(self.n, lambda k: k * np.array([[0.0, 1.0], [1.0, 0.0]]))

    def model(self) -> MatrixModel:
        n = self.n
        spec = [s * k for k in range(1, n + 1) for s in (-1, 1)]
        return MatrixModel(self.operator(), _leading_basis(n), exact_spectrum=spec)

    def galerkin_closed_form(self) -> list[float]:
        return sorted([0.0] + [s * k for k in range(1, self.n) for s in (-1, 1)])

    def spec2_closed_form(self) -> ClosedForm:
        pts = [(complex(s * k), 2, 1) for k in range(1, self.n) for s in (-1, 1)]
        pts += [(complex(0, self.n), 1, 1), (complex(0, -self.n), 1, 1)]
        return pts


def example12_pencil(n: int) -> PencilTriple:
    return assemble_pencil(DiagonalPairModel(n).model())


# ---------------------------------------------------------------------------
# semi-bounded model with essential spectrum {-1}
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SemiBoundedModel:
    """A = sum_k k^r |f_k^+><f_k^+| - |f_k^-><f_k^-| with f_k^+- rotated by angle 1/k."""

    n: int
    r: float

    def __post_init__(self):
        if self.n < 2:
            raise PreconditionError("need n >= 2")
        if not self.r > 0:
            raise PreconditionError("need r > 0")

    @property
    def dim(self) -> int:
        return 2 * self.n - 1

    def _block(self, k):
        c, s = math.cos(1.0 / k), math.sin(1.0 / k)
        fp = np.array([c, s])    # f_k^+ = cos e^+ + sin e^-
        fm = np.array([s, -c])   # f_k^- = sin e^+ - cos e^-
        return k**self.r * np.outer(fp, fp) - np.outer(fm, fm)

    def operator(self) -> np.ndarray:
        return _rotation_blocks(self.n, self._block)

    def model(self) -> MatrixModel:
        spec = [-1.0] * self.n + [k**self.r for k in range(1, self.n + 1)]
        return MatrixModel(self.operator(), _leading_basis(self.n), exact_spectrum=spec)

    @property
    def alpha(self) -> float:
        n, r = self.n, self.r
        return n**r * math.sin(1 / n) ** 2 - math.cos(1 / n) ** 2

    @property
    def gamma(self) -> float:
        n, r = self.n, self.r
        return (n**r + 1) * math.sin(1 / n) * math.cos(1 / n)

    def galerkin_closed_form(self) -> list[float]:
        vals = [-1.0] * (self.n - 1) + [k**self.r for k in range(1, self.n)] + [self.alpha]
        return sorted(vals)

    def spec2_closed_form(self) -> ClosedForm:
        n = self.n
        pts = [(complex(-1.0), 2 * (n - 1), n - 1)]
        pts += [(complex(k**self.r), 2, 1) for k in range(1, n)]
        pts += [(complex(self.alpha, self.gamma), 1, 1), (complex(self.alpha, -self.gamma), 1, 1)]
        return _merge_closed_form(pts)


def _merge_closed_form(pts: ClosedForm) -> ClosedForm:
    """Combine entries with identical values (e.g. k^r = 1 for k = 1 is distinct from -1)."""
    out: dict[complex, list[int]] = {}
    for val, alg, geom in pts:
        acc = out.setdefault(val, [0, 0])
        acc[0] += alg
        acc[1] += geom
    return [(v, a, g) for v, (a, g) in out.items()]


def example14_pencil(n: int, r: float) -> PencilTriple:
    return assemble_pencil(SemiBoundedModel(n, r).model())


def example14_limit_point(n: int, r: float) -> complex:
    m = SemiBoundedModel(n, r)
    return complex(m.alpha, m.gamma)


# ---------------------------------------------------------------------------
# Galerkin pollution at prescribed targets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PollutionModel:
    """Diagonal A with eigenvalues lam_minus[m] < 0 <= lam_plus[m] (1-based m).

    The trial space adds to e_1^+-, ..., e_n^+- one mixed vector
    cos(theta_j) e_{k+j}^- + sin(theta_j) e_{k+j}^+ per target.
    """

    targets: tuple[float, ...]
    k: int
    lam_minus: tuple[float, ...] | None = None
    lam_plus: tuple[float, ...] | None = None

    def eigenvalues(self, count: int) -> tuple[np.ndarray, np.ndarray]:
        lm = self.lam_minus or tuple(-float(m) for m in range(1, count + 1))
        lp = self.lam_plus or tuple(float(m) for m in range(1, count + 1))
        if len(lm) < count or len(lp) < count:
            raise PreconditionError(f"need at least {count} eigenvalues of each sign")
        return np.asarray(lm[:count], float), np.asarray(lp[:count], float)

    def angles(self, n: int | None = None) -> np.ndarray:
        n = len(self.targets) if n is None else n
        lm, lp = self.eigenvalues(self.k + n)
        out = []
        for j, g in enumerate(self.targets[:n], start=1):
            lo, hi = lm[self.k + j - 1], lp[self.k + j - 1]
            if not lo < g < hi:
                raise InfeasibleMixing(f"target {g} is outside ({lo}, {hi})")
            out.append(math.acos(math.sqrt((hi - g) / (hi - lo))))
        return np.array(out)

    def model(self, n: int | None = None) -> MatrixModel:
        n = len(self.targets) if n is None else n
        if not 1 <= n <= len(self.targets):
            raise PreconditionError("n must be between 1 and the number of targets")
        if self.k < n:
            raise PreconditionError("need k >= n so mixed vectors avoid e_1..e_n")
        size = self.k + n
        lm, lp = self.eigenvalues(size)
        diag = np.empty(2 * size)
        diag[0::2], diag[1::2] = lp, lm
        eye = np.eye(2 * size)
        cols = [eye[:, i] for i in range(2 * n)]
        for j, theta in enumerate(self.angles(n), start=1):
            m = self.k + j
            cols.append(math.cos(theta) * eye[:, _pair_index(m, "-")]
                        + math.sin(theta) * eye[:, _pair_index(m, "+")])
        return MatrixModel(np.diag(diag), np.column_stack(cols), exact_spectrum=list(diag))

    def spec2_closed_form(self, n: int | None = None) -> ClosedForm:
        n = len(self.targets) if n is None else n
        lm, lp = self.eigenvalues(self.k + n)
        pts = [(complex(v), 2, 1) for v in np.concatenate([lp[:n], lm[:n]])]
        for j, g in enumerate(self.targets[:n], start=1):
            lo, hi = lm[self.k + j - 1], lp[self.k + j - 1]
            y = math.sqrt((hi - g) * (g - lo))
            pts += [(complex(g, y), 1, 1), (complex(g, -y), 1, 1)]
        return _merge_closed_form(pts)


def pollution_pencil(spec: PollutionModel, n: int | None = None) -> PencilTriple:
    return assemble_pencil(spec.model(n))


# ---------------------------------------------------------------------------
# slowly rotated eigenvector
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RankRotationModel:
    """A = sum_{k>=0} k |e_k><e_k|, trial space e_1..e_{n-1}, alpha e_0 + beta e_n."""

    n: int
    beta: float

    def __post_init__(self):
        if self.n < 2:
            raise PreconditionError("need n >= 2")
        if not 0 < self.beta < 1:
            raise PreconditionError("need 0 < beta < 1")

    @property
    def alpha(self) -> float:
        return math.sqrt(1 - self.beta**2)

    def model(self) -> MatrixModel:
        n = self.n
        eye = np.eye(n + 1)
        cols = [eye[:, k] for k in range(1, n)] + [self.alpha * eye[:, 0] + self.beta * eye[:, n]]
        return MatrixModel(np.diag(np.arange(n + 1, dtype=float)), np.column_stack(cols),
                           exact_spectrum=list(range(n + 1)))

    @property
    def gamma(self) -> complex:
        """The non-real point n beta (beta + i alpha)."""
        return self.n * self.beta * complex(self.beta, self.alpha)

    def spec2_closed_form(self) -> ClosedForm:
        g = self.gamma
        return [(complex(k), 2, 1) for k in range(1, self.n)] + [(g, 1, 1), (g.conjugate(), 1, 1)]

    def graph_distance(self) -> float:
        """||(alpha - 1) e_0 + beta e_n|| in the graph norm of A^2."""
        n, b = self.n, self.beta
        return math.sqrt((self.alpha - 1) ** 2 + b**2 * (1 + n**2 + n**4))


def rank_rotation_pencil(n: int, beta: float) -> PencilTriple:
    return assemble_pencil(RankRotationModel(n, beta).model())


# ---------------------------------------------------------------------------
# prescribed non-real points
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PrescribedPointSpec:
    """Target z for a one-vector trial space built on anchors c1 <= c2 <= c3."""

    c1: float
    c2: float
    c3: float
    z: complex
    delta: float = 0.0

    def __post_init__(self):
        if not self.c1 <= self.c2 <= self.c3:
            raise PreconditionError("anchors must satisfy c1 <= c2 <= c3")
        if self.delta < 0:
            raise PreconditionError("delta must be non-negative")

    @property
    def anchors(self) -> tuple[float, float, float]:
        return (self.c1, self.c2, self.c3)


def in_admissible_region(z: complex, c1: float, c2: float, c3: float, tol: float = 1e-12) -> bool:
    """z in D[c1, c3] minus the open disks over (c1, c2) and (c2, c3)."""
    def dist_to_center(a, b):
        return abs(z - 0.5 * (a + b)), 0.5 * (b - a)

    d, rad = dist_to_center(c1, c3)
    scale = tol * max(1.0, abs(c1), abs(c3))
    if d > rad + scale:
        return False
    for a, b in ((c1, c2), (c2, c3)):
        d, rad = dist_to_center(a, b)
        if rad > 0 and d < rad - scale:
            return False
    return True


def lemma54_coefficients(spec: PrescribedPointSpec, tol: float = 1e-12) -> tuple[float, float, float]:
    """Real weights alpha_k with sum alpha_k^2 = 1 placing the point z.

    With y = sum alpha_k x_k and exact eigenvectors x_k of c_k, the quadratic
    <Ay, Ay> - 2 w <Ay, y> + w^2 <y, y> has roots z and conj(z).
    """
    c1, c2, c3 = spec.anchors
    z = complex(spec.z)
    if not in_admissible_region(z, c1, c2, c3, tol=1e-9):
        raise OutsideAdmissibleRegion(f"{z} is not in A({c1}, {c2}, {c3})")
    if c1 == c3:
        return (1.0, 0.0, 0.0)
    # affine normalization c1 -> -1, c3 -> 1; the weights are scale-invariant
    w = (2 * z - (c1 + c3)) / (c3 - c1)
    c = (2 * c2 - (c1 + c3)) / (c3 - c1)
    a = min(abs(w), 1.0)
    cos_t = w.real / abs(w) if abs(w) > 0 else 0.0
    if 1 - a <= tol or abs(1 - c * c) <= tol:
        # on the outer circle: only the two outer anchors are used
        a = 1.0
        beta_p, beta_m, alpha2_sq = 0.5 * (1 - cos_t), 0.5 * (1 + cos_t), 0.0
    else:
        beta_p = 0.5 * ((a * a + c) / (1 + c) - a * cos_t)
        beta_m = 0.5 * ((a * a - c) / (1 - c) + a * cos_t)
        alpha2_sq = (1 - a * a) / (1 - c * c)
    if beta_p < -tol or beta_m < -tol:
        raise OutsideAdmissibleRegion(f"{z} gives negative weights ({beta_p}, {beta_m})")
    return (math.sqrt(max(beta_p, 0.0)), math.sqrt(alpha2_sq), math.sqrt(max(beta_m, 0.0)))


@dataclass(frozen=True)
class AnchorModel:
    """Diagonal operator with near-eigenvectors x_k for each anchor value c_k.

    Anchor k owns two basis vectors with eigenvalues c_k and c_k + delta and
    x_k is their normalized sum, so A x_k = c_k x_k + r_k with
    ||r_k|| = delta / sqrt 2 < delta, and different anchors never interact.
    """

    operator: np.ndarray
    vectors: np.ndarray
    anchors: tuple[float, ...]
    delta: float

    @classmethod
    def build(cls, anchors: Sequence[float], delta: float) -> "AnchorModel":
        k = len(anchors)
        diag = np.empty(2 * k)
        vecs = np.zeros((2 * k, k))
        for i, c in enumerate(anchors):
            diag[2 * i], diag[2 * i + 1] = c, c + delta
            vecs[2 * i:2 * i + 2, i] = 1 / math.sqrt(2)
        return cls(np.diag(diag), vecs, tuple(float(c) for c in anchors), float(delta))


@dataclass(frozen=True)
class Realization:
    spectrum: SecondOrderSpectrum
    coefficients: tuple[float, float, float]
    error: float
    constant: float


def lemma54_realize(spec: PrescribedPointSpec, model: AnchorModel | None = None,
                    cfg: ClusterConfig = ClusterConfig()) -> Realization:
    """Second order spectrum of span{sum_k alpha_k x_k}; error = max |root - target|."""
    coeffs = lemma54_coefficients(spec)
    model = model or AnchorModel.build(spec.anchors, spec.delta)
    if model.vectors.shape[1] != 3:
        raise PreconditionError("model must provide three anchor vectors")
    y = model.vectors @ np.asarray(coeffs)
    spectrum = second_order_spectrum(assemble_pencil(MatrixModel(model.operator, y)), cfg)
    z = complex(spec.z)
    err = multiset_distance(spectrum.expanded(), [z, z.conjugate()])
    const = err / model.delta if model.delta > 0 else 0.0
    return Realization(spectrum, coeffs, err, const)


def prescribed_points_model(specs: Sequence[PrescribedPointSpec], delta: float) -> MatrixModel:
    """Trial space span{y_1, ..., y_N}, one vector per target on disjoint anchor triples."""
    blocks, cols = [], []
    size = 0
    for spec in specs:
        am = AnchorModel.build(spec.anchors, delta)
        y = am.vectors @ np.asarray(lemma54_coefficients(spec))
        blocks.append(np.diag(am.operator))
        cols.append((size, y))
        size += y.size
    diag = np.concatenate(blocks)
    basis = np.zeros((size, len(specs)))
    for j, (offset, y) in enumerate(cols):
        basis[offset:offset + y.size, j] = y
    return MatrixModel(np.diag(diag), basis, exact_spectrum=list(diag))


# ---------------------------------------------------------------------------
# Moebius invariance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MobiusReport:
    distance: float
    multiplicities_match: bool
    mapped: SecondOrderSpectrum = field(repr=False)
    direct: SecondOrderSpectrum = field(repr=False)


def mapped_model(model: MatrixModel, a: float, b: float, c: float, d: float,
                 tol: float = 1e-12) -> MatrixModel:
    """F(A) on g(A) L with F(w) = (a w + b)/(c w + d), g(w) = c w + d."""
    if a * d == c * b:
        raise PreconditionError("Moebius map is degenerate (ad == cb)")
    evals, evecs = np.linalg.eigh(model.operator)
    g = c * evals + d
    if np.any(np.abs(g) <= tol * np.maximum(1.0, np.abs(c * evals) + abs(d))):
        raise PoleHit("g(A) = cA + d is not invertible")
    f_evals = mobius(a, b, c, d, evals, tol=tol)
    f_op = (evecs * f_evals) @ evecs.conj().T
    g_basis = (c * model.operator + d * np.eye(model.operator.shape[0])) @ model.basis
    return MatrixModel(0.5 * (f_op + f_op.conj().T), g_basis)


def verify_mobius(model: MatrixModel, a: float, b: float, c: float, d: float,
                  cfg: ClusterConfig = ClusterConfig()) -> MobiusReport:
    base = second_order_spectrum(assemble_pencil(model), cfg)
    mapped = mobius_image(base, a, b, c, d)
    direct = second_order_spectrum(assemble_pencil(mapped_model(model, a, b, c, d)), cfg)
    dist = multiset_distance(mapped.expanded(), direct.expanded())
    match = len(mapped) == len(direct)
    if match:
        for pt in mapped:
            other = direct.nearest(pt.value)
            if (other.algebraic_mult, other.geometric_mult) != (pt.algebraic_mult, pt.geometric_mult):
                match = False
                break
    return MobiusReport(dist, match, mapped, direct)


def spectrum_matches(computed: SecondOrderSpectrum, closed: ClosedForm) -> tuple[float, bool]:
    """(max value deviation, multiplicities equal) against a closed form."""
    expected = [v for v, alg, _ in closed for _ in range(alg)]
    dist = multiset_distance(computed.expanded(), expected)
    ok = len(computed) == len(closed)
    if ok:
        for val, alg, geom in closed:
            pt = computed.nearest(val)
            if (pt.algebraic_mult, pt.geometric_mult) != (alg, geom):
                ok = False
                break
    return dist, ok


def polar(z: complex) -> tuple[float, float]:
    return abs(z), cmath.phase(z)
