"""Quadratic pencil assembly, linearization and second order spectra.

Given a trial basis b_1..b_n of a subspace L and a self-adjoint operator A,
the second order spectrum Spec_2(A, L) is the set of complex z for which the
quadratic pencil

    Q(z) = m2 - 2 z m1 + z**2 m0,
    m0[j, k] = <b_k, b_j>, m1[j, k] = <A b_k, b_j>, m2[j, k] = <A b_k, A b_j>,

is singular.  Everything here consumes only these three Gram-type matrices.
"""
from __future__ import annotations

import csv
import math
import io
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np
import scipy.linalg as sla
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import NonPositiveDefiniteMass, PoleHit, PreconditionError, SolverFailure

EPS = np.finfo(float).eps


# ---------------------------------------------------------------------------
# operator models
# ---------------------------------------------------------------------------

class OperatorModel:
    """Source of the inner products <A^p b_i, A^q b_j>, p, q in {0, 1}.

    Subclasses implement :meth:`inner`; models that can produce the three
    Gram matrices faster should also override :meth:`blocks`.
    """

    dim: int
    exact_spectrum: list[float] | None = None

    def inner(self, i: int, j: int, p: int, q: int) -> complex:
        raise NotImplementedError

    def blocks(self):
        """Return ``(m0, m1, m2)`` built entry by entry from :meth:`inner`."""
        n = self.dim
        out = [np.empty((n, n), dtype=complex) for _ in range(3)]
        for j in range(n):
            for k in range(n):
                out[0][j, k] = self.inner(k, j, 0, 0)
                out[1][j, k] = self.inner(k, j, 1, 0)
                out[2][j, k] = self.inner(k, j, 1, 1)
        return tuple(out)


class MatrixModel(OperatorModel):
    """Finite-dimensional model: Hermitian ``operator`` and trial ``basis`` columns.

    Toy operators on infinite-dimensional spaces are represented exactly this
    way whenever the trial space and its image under A lie in a finite
    "active" set of basis vectors.
    """

    def __init__(self, operator, basis, exact_spectrum=None):
        op = np.asarray(operator)
        basis = np.asarray(basis)
        if basis.ndim == 1:
            basis = basis[:, None]
        if op.ndim != 2 or op.shape[0] != op.shape[1]:
            raise PreconditionError("operator must be a square matrix")
        if basis.shape[0] != op.shape[0]:
            raise PreconditionError("basis vectors must live in the operator's space")
        if basis.shape[1] < 1:
            raise PreconditionError("trial basis must be non-empty")
        self.operator = op
        self.basis = basis
        self.dim = basis.shape[1]
        self.exact_spectrum = None if exact_spectrum is None else list(exact_spectrum)

    @cached_property
    def _images(self):
        return self.operator @ self.basis

    def inner(self, i, j, p, q):
        left = self._images[:, i] if p else self.basis[:, i]
        right = self._images[:, j] if q else self.basis[:, j]
        return complex(np.vdot(right, left))

    def blocks(self):
        x, ax = self.basis, self._images
        return x.conj().T @ x, x.conj().T @ ax, ax.conj().T @ ax


# ---------------------------------------------------------------------------
# pencil
# ---------------------------------------------------------------------------

def _hermitize(m):
    m = np.asarray(m)
    return 0.5 * (m + m.conj().T)


def _real_if_close(m):
    if np.iscomplexobj(m) and not np.any(m.imag):
        return np.ascontiguousarray(m.real)
    return m


@dataclass(frozen=True, eq=False)
class PencilTriple:
    """The Hermitian matrices m0 (Gram), m1 (Galerkin) and m2 (squared)."""

    m0: np.ndarray
    m1: np.ndarray
    m2: np.ndarray

    def __post_init__(self):
        shapes = {np.shape(self.m0), np.shape(self.m1), np.shape(self.m2)}
        if len(shapes) != 1:
            raise PreconditionError(f"pencil blocks disagree in shape: {shapes}")
        (shape,) = shapes
        if len(shape) != 2 or shape[0] != shape[1] or shape[0] < 1:
            raise PreconditionError("pencil blocks must be non-empty square matrices")

    @property
    def n(self) -> int:
        return self.m0.shape[0]

    def q(self, z: complex) -> np.ndarray:
        """Evaluate Q(z) = m2 - 2 z m1 + z^2 m0 in the original basis."""
        return self.m2 - 2 * z * self.m1 + z * z * self.m0

    @cached_property
    def _ortho(self):
        c = _cholesky(self.m0)
        return c, _congruence(c, self.m1), _congruence(c, self.m2)

    @property
    def cholesky_factor(self) -> np.ndarray:
        return self._ortho[0]

    @property
    def l_hat(self) -> np.ndarray:
        """m1 expressed in an orthonormal basis of the trial space."""
        return self._ortho[1]

    @property
    def b_hat(self) -> np.ndarray:
        """m2 expressed in an orthonormal basis of the trial space."""
        return self._ortho[2]

    def q_hat(self, z: complex) -> np.ndarray:
        """Q(z) in an orthonormal basis."""
        out = self.b_hat - 2 * z * self.l_hat
        out = out.astype(np.result_type(out, z), copy=True)
        out[np.diag_indices_from(out)] += z * z
        return out

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {"n": self.n, "m0": _matrix_to_json(self.m0),
                "m1": _matrix_to_json(self.m1), "m2": _matrix_to_json(self.m2)}

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, doc: dict) -> "PencilTriple":
        mats = [_matrix_from_json(doc[key]) for key in ("m0", "m1", "m2")]
        n = int(doc.get("n", mats[0].shape[0]))
        if any(m.shape != (n, n) for m in mats):
            raise PreconditionError(f"pencil JSON matrices are not {n}x{n}")
        return cls(*mats)

    @classmethod
    def from_json(cls, text: str) -> "PencilTriple":
        return cls.from_dict(json.loads(text))


def _matrix_to_json(m):
    m = np.asarray(m)
    if np.iscomplexobj(m) and np.any(m.imag):
        return [[[float(v.real), float(v.imag)] for v in row] for row in m]
    return np.real(m).astype(float).tolist()


def _matrix_from_json(rows):
    arr = np.asarray(rows, dtype=float)
    if arr.ndim == 3:
        if arr.shape[2] != 2:
            raise PreconditionError("complex entries must be [re, im] pairs")
        arr = arr[..., 0] + 1j * arr[..., 1]
    if arr.ndim != 2:
        raise PreconditionError("matrix must be a list of rows")
    return arr


def _cholesky(m0):
    """Upper factor C with m0 = C^H C."""
    try:
        c = sla.cholesky(m0, lower=False, check_finite=True)
    except (sla.LinAlgError, ValueError) as exc:
        raise NonPositiveDefiniteMass(
            "Gram matrix is not positive definite; the trial basis is "
            "linearly dependent") from exc
    # c[i, i]^2 / m0[i, i] is the squared sine of the angle between b_i and
    # the span of b_1..b_{i-1}; at the rounding level the basis is dependent
    sines = np.abs(np.diag(c)) ** 2 / np.real(np.diag(m0))
    if sines.min() <= 10 * c.shape[0] * EPS:
        raise NonPositiveDefiniteMass(
            "Gram matrix is numerically singular; the trial basis is "
            "linearly dependent")
    return c


def gram_condition(p: "PencilTriple") -> float:
    """Estimated 2-norm condition number of the diagonally equilibrated m0.

    Diagonal scaling does not affect the accuracy of the Cholesky factor, so
    this (not the raw condition number) bounds the orthonormalization error.
    """
    d = np.sqrt(np.real(np.diag(p.m0)))
    c = p.cholesky_factor / d[None, :]
    (trcon,) = sla.get_lapack_funcs(("trcon",), (c,))
    rcond, info = trcon(c, norm="1", uplo="U", diag="N")
    if info != 0 or rcond <= 0:
        return math.inf
    return float(rcond) ** -2


def _congruence(c, m):
    """C^{-H} m C^{-1}, re-Hermitized."""
    w = sla.solve_triangular(c, m, trans="C", lower=False)
    out = sla.solve_triangular(c, w.conj().T, trans="C", lower=False).conj().T
    return _hermitize(out)


def assemble_pencil(model: OperatorModel) -> PencilTriple:
    """Build the pencil for ``model``; raises NonPositiveDefiniteMass on a dependent basis."""
    if model.dim < 1:
        raise PreconditionError("model.dim must be at least 1")
    m0, m1, m2 = (_real_if_close(_hermitize(m)) for m in model.blocks())
    pencil = PencilTriple(m0, m1, m2)
    pencil.cholesky_factor  # noqa: B018 - fail early on a dependent basis
    return pencil


# ---------------------------------------------------------------------------
# linearization
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Linearization:
    """Companion matrix [[0, I], [-B^, 2 L^]] of the orthonormalized pencil.

    ``scale`` is the factor s used when solving: the eigenvalues of
    [[0, I], [-B^/s^2, 2 L^/s]] times s are those of ``t_mat``, and the scaled
    form balances the three coefficient norms.
    """

    t_mat: np.ndarray
    cholesky_factor: np.ndarray
    scale: float = 1.0

    def scaled(self) -> np.ndarray:
        n = self.t_mat.shape[0] // 2
        s = self.scale
        out = self.t_mat.copy()
        out[n:, :n] /= s * s
        out[n:, n:] /= s
        return out


def linearize(p: PencilTriple) -> Linearization:
    n = p.n
    b, l_ = p.b_hat, p.l_hat
    dtype = np.result_type(b, l_)
    t = np.zeros((2 * n, 2 * n), dtype=dtype)
    t[:n, n:] = np.eye(n)
    t[n:, :n] = -b
    t[n:, n:] = 2 * l_
    norm_b = np.linalg.norm(b, 2)
    scale = float(np.sqrt(norm_b)) if norm_b > 0 else 1.0
    return Linearization(t, p.cholesky_factor, scale)


# ---------------------------------------------------------------------------
# second order spectrum
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClusterConfig:
    """Tolerances for turning raw eigenvalues into points with multiplicities.

    Two eigenvalues are grouped when their distance is at most
    ``tol * max(1, |z|) + abs_floor`` with ``tol = max(rel_tol, defect_tol)``.
    ``defect_tol`` exists because a defective eigenvalue of the linearization
    (e.g. an exactly captured eigenvalue, whose Jordan blocks have size 2)
    splits at the square root of the rounding level; set it to 0 to group
    with ``rel_tol`` only.  The splitting grows with the conditioning of the
    Gram matrix, so ``cond_factor * sqrt(eps * kappa)`` (``kappa`` the
    equilibrated condition number of m0) raises the width for ill-conditioned
    bases.  Points whose imaginary part is below the width are snapped to the
    real axis.
    """

    rel_tol: float = 1e-8
    abs_floor: float = 1e-12
    rank_tol: float = 1e-8
    defect_tol: float = 1e-5
    cond_factor: float = 4.0

    def __post_init__(self):
        for name in ("rel_tol", "abs_floor", "rank_tol", "defect_tol", "cond_factor"):
            if getattr(self, name) < 0:
                raise PreconditionError(f"{name} must be non-negative")

    @property
    def width(self) -> float:
        return max(self.rel_tol, self.defect_tol)

    def radius(self, z, width: float | None = None) -> float:
        w = self.width if width is None else width
        return w * max(1.0, abs(z)) + self.abs_floor

    def width_for(self, p: "PencilTriple") -> float:
        """Grouping width for ``p``, widened for an ill-conditioned Gram matrix."""
        if self.cond_factor == 0:
            return self.width
        return max(self.width, self.cond_factor * float(np.sqrt(EPS * gram_condition(p))))


@dataclass(frozen=True)
class SpectralPoint:
    value: complex
    algebraic_mult: int
    geometric_mult: int

    def __post_init__(self):
        if not 1 <= self.geometric_mult <= self.algebraic_mult:
            raise PreconditionError("need 1 <= geometric_mult <= algebraic_mult")

    @property
    def re(self) -> float:
        return float(np.real(self.value))

    @property
    def im(self) -> float:
        return float(np.imag(self.value))


def _sort_key(pt: SpectralPoint):
    return (pt.re, pt.im, pt.algebraic_mult, pt.geometric_mult)


@dataclass(frozen=True)
class SecondOrderSpectrum:
    """Clustered second order spectrum; points sorted by (Re, Im, multiplicity)."""

    points: tuple[SpectralPoint, ...]
    cluster_tol: float = 0.0
    raw: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(sorted(self.points, key=_sort_key)))

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    @property
    def values(self) -> np.ndarray:
        return np.array([pt.value for pt in self.points], dtype=complex)

    @property
    def total_algebraic(self) -> int:
        return sum(pt.algebraic_mult for pt in self.points)

    def expanded(self) -> np.ndarray:
        """Point values repeated by algebraic multiplicity."""
        return np.array([pt.value for pt in self.points
                         for _ in range(pt.algebraic_mult)], dtype=complex)

    def real_points(self, tol: float = 0.0) -> list[SpectralPoint]:
        return [pt for pt in self.points if abs(pt.im) <= tol]

    def nearest(self, z: complex) -> SpectralPoint:
        if not self.points:
            raise ValueError("empty spectrum")
        return min(self.points, key=lambda pt: abs(pt.value - z))

    def within(self, center: complex, radius: float) -> list[SpectralPoint]:
        return [pt for pt in self.points if abs(pt.value - center) < radius]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["re", "im", "alg_mult", "geom_mult"])
        for pt in self.points:
            writer.writerow([repr(pt.re), repr(pt.im), pt.algebraic_mult, pt.geometric_mult])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "SecondOrderSpectrum":
        rows = csv.DictReader(io.StringIO(text))
        pts = [SpectralPoint(complex(float(r["re"]), float(r["im"])),
                             int(r["alg_mult"]), int(r["geom_mult"])) for r in rows]
        return cls(tuple(pts))


def _eigvals(mat):
    try:
        return sla.eigvals(mat, check_finite=True)
    except (sla.LinAlgError, ValueError) as exc:
        raise SolverFailure("QR iteration failed on the linearization") from exc


def _link_components(vals: np.ndarray, cfg: ClusterConfig, width: float) -> np.ndarray:
    """Single-linkage labels of ``vals`` for radius ``width * max(1, |z|) + abs_floor``."""
    n = vals.size
    if n == 0:
        return np.zeros(0, dtype=int)
    order = np.argsort(vals.real, kind="stable")
    v = vals[order]
    mag = np.maximum(1.0, np.abs(v))
    reach = width * mag.max() + cfg.abs_floor
    rows, cols = [], []
    for i in range(n):
        j = i + 1
        while j < n and v[j].real - v[i].real <= reach:
            if abs(v[j] - v[i]) <= width * max(mag[i], mag[j]) + cfg.abs_floor:
                rows.append(order[i])
                cols.append(order[j])
            j += 1
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    return labels


def cluster_eigenvalues(eigs, cfg: ClusterConfig = ClusterConfig(), width: float | None = None):
    """Group raw eigenvalues into conjugate-symmetric (center, alg_mult) pairs.

    Eigenvalues are folded into the closed upper half plane, grouped, and
    each group is emitted either as one real point or as a conjugate pair
    sharing one center, so the result is exactly conjugate-symmetric.
    """
    width = cfg.width if width is None else width
    eigs = np.asarray(eigs, dtype=complex).ravel()
    folded = eigs.real + 1j * np.abs(eigs.imag)
    labels = _link_components(folded, cfg, width)
    out = []
    for lab in np.unique(labels):
        members = folded[labels == lab]
        center = complex(members.real.mean(), members.imag.mean())
        size = members.size
        if abs(center.imag) <= cfg.radius(center, width):
            out.append((complex(center.real, 0.0), size))
            continue
        n_up = int(np.count_nonzero(eigs[labels == lab].imag > 0))
        if size % 2 or n_up != size // 2:
            raise SolverFailure(
                f"eigenvalues near {center} are not conjugate-symmetric "
                f"({n_up} above, {size - n_up} below the real axis)")
        out.append((center, size // 2))
        out.append((center.conjugate(), size // 2))
    return out


def _nullity(q, rank_tol):
    sv = sla.svdvals(q)
    if sv[0] == 0:
        return sv.size
    return int(np.count_nonzero(sv <= rank_tol * sv[0]))


def second_order_spectrum(p: PencilTriple, cfg: ClusterConfig = ClusterConfig()) -> SecondOrderSpectrum:
    lin = linearize(p)
    eigs = lin.scale * _eigvals(lin.scaled())
    width = cfg.width_for(p)
    points = []
    for center, alg in cluster_eigenvalues(eigs, cfg, width):
        geom = 1
        if alg > 1:
            geom = min(alg, max(1, _nullity(p.q_hat(center), cfg.rank_tol)))
        points.append(SpectralPoint(center, alg, geom))
    return SecondOrderSpectrum(tuple(points), width, raw=eigs)


# ---------------------------------------------------------------------------
# approximate spectral distance and Galerkin values
# ---------------------------------------------------------------------------

def sigma(p: PencilTriple, z: complex) -> float:
    """Smallest singular value of Q(z) in an orthonormal trial basis."""
    return float(sla.svdvals(p.q_hat(z))[-1])


def sigma_map(p: PencilTriple, re_range: tuple[float, float], im_range: tuple[float, float],
              n_re: int, n_im: int) -> np.ndarray:
    """Evaluate :func:`sigma` on a grid; rows follow increasing Im, columns increasing Re."""
    if n_re < 1 or n_im < 1:
        raise PreconditionError("grid must have at least one node per axis")
    xs = np.linspace(re_range[0], re_range[1], n_re)
    ys = np.linspace(im_range[0], im_range[1], n_im)
    out = np.empty((n_im, n_re))
    for i, y in enumerate(ys):
        for j, x in enumerate(xs):
            out[i, j] = sigma(p, complex(x, y))
    return out


def galerkin_spectrum(p: PencilTriple) -> np.ndarray:
    """Ritz values: eigenvalues of m1 u = lambda m0 u, ascending."""
    try:
        vals = sla.eigh(p.m1, p.m0, eigvals_only=True)
    except sla.LinAlgError as exc:
        raise NonPositiveDefiniteMass("Gram matrix is not positive definite") from exc
    return np.sort(vals)


# ---------------------------------------------------------------------------
# Moebius transformations
# ---------------------------------------------------------------------------

def mobius(a: float, b: float, c: float, d: float, w, *, tol: float = 1e-12):
    """F(w) = (a w + b) / (c w + d) for scalar or array ``w``."""
    w = np.asarray(w)
    den = c * w + d
    if np.any(np.abs(den) <= tol * np.maximum(1.0, np.abs(c * w) + abs(d))):
        raise PoleHit("point maps to the pole of the Moebius transformation")
    return (a * w + b) / den


def mobius_image(s: SecondOrderSpectrum, a: float, b: float, c: float, d: float,
                 *, tol: float = 1e-12) -> SecondOrderSpectrum:
    """Map every point by F(w) = (a w + b)/(c w + d), keeping multiplicities."""
    if a * d == c * b:
        raise PreconditionError("Moebius map is degenerate (ad == cb)")
    pts = []
    for pt in s.points:
        # F has real coefficients, so F(conj z) = conj F(z); map the upper
        # representative to keep conjugate symmetry exact
        val = complex(mobius(a, b, c, d, complex(pt.re, abs(pt.im)), tol=tol))
        if pt.im == 0:
            val = complex(val.real, 0.0)
        elif pt.im < 0:
            val = val.conjugate()
        pts.append(SpectralPoint(val, pt.algebraic_mult, pt.geometric_mult))
    return SecondOrderSpectrum(tuple(pts), s.cluster_tol)


# ---------------------------------------------------------------------------
# multiset comparisons used by the oracles
# ---------------------------------------------------------------------------

def multiset_distance(x: Iterable[complex], y: Iterable[complex]) -> float:
    """Bottleneck-free matching distance: max |x_i - y_pi(i)| under the optimal assignment."""
    from scipy.optimize import linear_sum_assignment

    x = np.asarray(list(x), dtype=complex)
    y = np.asarray(list(y), dtype=complex)
    if x.size != y.size:
        return float("inf")
    if x.size == 0:
        return 0.0
    cost = np.abs(x[:, None] - y[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max())


# ---------------------------------------------------------------------------
# residual form: accurate near-real points
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SampledPencil:
    """Trial basis and its image under A, sampled with quadrature weights.

    Columns of ``f`` and ``g`` hold sqrt(w_q) b_k(x_q) and sqrt(w_q) (A b_k)(x_q),
    so m0 = f^H f, m1 = f^H g and m2 = g^H g.  For a matrix model the rows are
    simply the coordinates of the ambient space.  Both dense arrays and
    scipy sparse matrices are accepted.
    """

    f: object
    g: object

    def __post_init__(self):
        if self.f.shape != self.g.shape or len(self.f.shape) != 2:
            raise PreconditionError("sample matrices must share one 2D shape")

    @classmethod
    def from_model(cls, model: "MatrixModel") -> "SampledPencil":
        return cls(np.asarray(model.basis), np.asarray(model.operator @ model.basis))

    def pencil(self) -> PencilTriple:
        fh = self.f.conj().T
        return PencilTriple(*(_hermitize(_dense(m)) for m in
                              (fh @ self.f, fh @ self.g, self.g.conj().T @ self.g)))

    @cached_property
    def residual_form(self) -> "ResidualForm":
        return ResidualForm.from_samples(self.f, self.g)


def _dense(m) -> np.ndarray:
    return m.toarray() if hasattr(m, "toarray") else np.asarray(m)


@dataclass(frozen=True)
class ResidualForm:
    """Q(z) in the Ritz basis: diag((mu - z)^2) + K.

    mu are the Ritz values and K[i, k] = <r_k, r_i> the Gram matrix of the
    Ritz residuals r_k = (A - mu_k) u_k.  Because K is built from residual
    vectors rather than by subtracting large quadratic forms, an isolated
    point mu_j + i y keeps full relative accuracy in y even when
    y**2 is far below eps * ||m2||.
    """

    mu: np.ndarray
    k: np.ndarray

    @classmethod
    def from_samples(cls, f, g, chunk: int = 4096) -> "ResidualForm":
        fh = f.conj().T
        c = _cholesky(_hermitize(_dense(fh @ f)))
        x0 = sla.solve_triangular(c, np.eye(c.shape[0], dtype=c.dtype))
        mu, w = np.linalg.eigh(_hermitize(x0.conj().T @ _dense(fh @ g) @ x0))
        x = x0 @ w  # coefficients of the Ritz vectors
        k = np.zeros((x.shape[1], x.shape[1]), dtype=np.result_type(x, 1.0))
        for start in range(0, f.shape[0], chunk):
            rows = slice(start, start + chunk)
            res = g[rows] @ x - (f[rows] @ x) * mu
            k += res.conj().T @ res
        return cls(mu, _hermitize(k))

    def isolated(self, j: int, y: float, factor: float = 8.0) -> bool:
        """True when no other Ritz value lies within ``factor * y`` of mu_j."""
        others = np.delete(self.mu, j)
        return others.size == 0 or np.min(np.abs(others - self.mu[j])) > factor * y

    def refine(self, z0: complex, tol: float = 4 * EPS, max_iter: int = 50) -> complex:
        """Newton on the Schur complement of Q at the Ritz value nearest Re z0.

        Returns the root in the closed upper half plane.
        """
        j = int(np.argmin(np.abs(self.mu - complex(z0).real)))
        mu, k = self.mu, self.k
        idx = np.arange(mu.size) != j
        k_row, k_col, k22 = k[j, idx], k[idx, j], k[np.ix_(idx, idx)]
        z = complex(mu[j], np.sqrt(max(k[j, j].real, 0.0)))
        for _ in range(max_iter):
            d = mu[idx] - z
            q22 = k22 + np.diag(d * d)
            yl = np.linalg.solve(q22.T, k_row) if idx.any() else np.zeros(0)
            yr = np.linalg.solve(q22, k_col) if idx.any() else np.zeros(0)
            fval = (mu[j] - z) ** 2 + k[j, j] - k_row @ yr
            fder = -2 * (mu[j] - z) + (yl * (-2 * d)) @ yr
            if fder == 0:
                break
            step = fval / fder
            z -= step
            if abs(step) <= tol * max(1.0, abs(z)):
                return complex(z.real, abs(z.imag))
        raise SolverFailure(f"refinement near {mu[j]} did not converge")


def refine_point(sp: SampledPencil, z0: complex, factor: float = 8.0) -> complex:
    """Accurate version of a computed point ``z0`` when its Ritz value is isolated.

    Falls back to ``z0`` (upper representative) if another Ritz value is too close
    for the scalar Schur complement to be trusted.
    """
    rf = sp.residual_form
    z0 = complex(z0)
    j = int(np.argmin(np.abs(rf.mu - z0.real)))
    y = max(abs(z0.imag), float(np.sqrt(max(rf.k[j, j].real, 0.0))))
    if not rf.isolated(j, y, factor):
        return complex(z0.real, abs(z0.imag))
    return rf.refine(z0)
