"""C1 Hermite finite elements of order 3-5 on uniform 1D meshes.

The trial space consists of piecewise polynomials of degree r that are
continuously differentiable and vanish at both ends of the interval.  On the
reference element s in [0, 1] the local basis is the cubic Hermite quartet
plus r - 3 interior bubbles s^2 (1 - s)^2 s^m, which have zero value and slope
at both element ends and hence do not disturb C1 continuity.

Global dof ordering: nodes left to right with (value, slope) per node, where
the two boundary value dofs are removed, followed by the bubbles element by
element.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as P
from numpy.polynomial.legendre import leggauss
from scipy.sparse import csr_matrix

from .errors import PreconditionError, UnsupportedOrder
from .pencil import PencilTriple, SampledPencil, _hermitize

# monomial coefficients (increasing degree) in s of the reference shape functions
_HERMITE = (
    (1.0, 0.0, -3.0, 2.0),   # value at s = 0
    (0.0, 1.0, -2.0, 1.0),   # slope at s = 0 (times h)
    (0.0, 0.0, 3.0, -2.0),   # value at s = 1
    (0.0, 0.0, -1.0, 1.0),   # slope at s = 1 (times h)
)
_BUBBLES = (
    (0.0, 0.0, 1.0, -2.0, 1.0),        # s^2 (1-s)^2
    (0.0, 0.0, 0.0, 1.0, -2.0, 1.0),   # s^3 (1-s)^2
)


@dataclass(frozen=True)
class UniformMesh:
    x_lo: float
    x_hi: float
    n_elem: int

    def __post_init__(self):
        if not self.x_lo < self.x_hi:
            raise PreconditionError("mesh needs x_lo < x_hi")
        if self.n_elem < 1:
            raise PreconditionError("mesh needs at least one element")

    @property
    def h(self) -> float:
        return (self.x_hi - self.x_lo) / self.n_elem

    @property
    def nodes(self) -> np.ndarray:
        return self.x_lo + self.h * np.arange(self.n_elem + 1)


@dataclass(frozen=True)
class DofInfo:
    kind: str      # "value", "slope" or "bubble"
    index: int     # node index, or element index for bubbles
    degree: int = 0  # bubble number within the element


class HermiteSpace:
    """Dirichlet C1 space of order ``r`` on ``mesh``."""

    def __init__(self, mesh: UniformMesh, r: int):
        if r not in (3, 4, 5):
            raise UnsupportedOrder(f"order r={r} not supported; use 3, 4 or 5")
        if mesh.n_elem < 2:
            raise PreconditionError("need at least two elements")
        self.mesh = mesh
        self.r = r
        n = mesh.n_elem
        dofs: list[DofInfo] = []
        node_dofs = np.full((n + 1, 2), -1, dtype=int)
        for node in range(n + 1):
            if 0 < node < n:
                node_dofs[node, 0] = len(dofs)
                dofs.append(DofInfo("value", node))
            node_dofs[node, 1] = len(dofs)
            dofs.append(DofInfo("slope", node))
        nb = r - 3
        bubble_dofs = np.empty((n, nb), dtype=int)
        for e in range(n):
            for m in range(nb):
                bubble_dofs[e, m] = len(dofs)
                dofs.append(DofInfo("bubble", e, m))
        self.dofs = tuple(dofs)
        # element -> global index of each local shape function (-1: removed)
        elem = np.arange(n)
        self.local_to_global = np.column_stack(
            [node_dofs[elem, 0], node_dofs[elem, 1],
             node_dofs[elem + 1, 0], node_dofs[elem + 1, 1], bubble_dofs])

    @property
    def dof_count(self) -> int:
        return len(self.dofs)

    @property
    def n_local(self) -> int:
        return self.r + 1

    def local_coefficients(self) -> list[np.ndarray]:
        """Monomial coefficients in s of the local shape functions, before h-scaling."""
        return [np.array(c) for c in _HERMITE + _BUBBLES[: self.r - 3]]

    def local_scale(self) -> np.ndarray:
        """Factor applied to each local function so slope dofs mean d/dx = 1."""
        h = self.mesh.h
        return np.array([1.0, h, 1.0, h] + [1.0] * (self.r - 3))

    def shape_tables(self, s: np.ndarray, deriv: int = 0) -> np.ndarray:
        """Local functions (rows) or their x-derivatives evaluated at reference points ``s``."""
        h = self.mesh.h
        out = []
        for coef, scale in zip(self.local_coefficients(), self.local_scale()):
            c = P.polyder(coef, deriv) if deriv else coef
            out.append(scale * P.polyval(s, c) / h**deriv)
        return np.array(out)

    def evaluate(self, coeffs: np.ndarray, x: np.ndarray, deriv: int = 0) -> np.ndarray:
        """Evaluate the function with global coefficients ``coeffs`` (or its derivative) at ``x``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        mesh = self.mesh
        e = np.clip(((x - mesh.x_lo) // mesh.h).astype(int), 0, mesh.n_elem - 1)
        s = (x - mesh.x_lo) / mesh.h - e
        out = np.zeros_like(x)
        for a in range(self.n_local):
            g = self.local_to_global[e, a]
            coef = self.local_coefficients()[a]
            c = P.polyder(coef, deriv) if deriv else coef
            val = self.local_scale()[a] * P.polyval(s, c) / mesh.h**deriv
            out += np.where(g >= 0, coeffs[np.maximum(g, 0)], 0.0) * val
        return out


def build_space(mesh: UniformMesh, r: int) -> HermiteSpace:
    return HermiteSpace(mesh, r)


# ---------------------------------------------------------------------------
# potentials and quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Potential:
    kind: str
    func: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if self.kind not in ("zero", "mathieu", "crystal", "custom"):
            raise PreconditionError(f"unknown potential kind {self.kind!r}")
        if self.kind == "custom" and self.func is None:
            raise PreconditionError("custom potential needs a function")

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(x)
        if self.kind == "mathieu":
            return 2.0 * np.cos(2.0 * x)
        if self.kind == "crystal":
            return np.cos(x) - np.exp(-x * x)
        return np.asarray(self.func(x), dtype=float) * np.ones_like(x)

    @classmethod
    def named(cls, kind: str) -> "Potential":
        return cls(kind)


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre rule mapped to [0, 1]."""

    points_per_element: int

    def __post_init__(self):
        if self.points_per_element < 1:
            raise PreconditionError("need at least one quadrature point")

    @classmethod
    def default(cls, r: int) -> "QuadratureRule":
        return cls(max(r + 3, 12))

    def reference(self) -> tuple[np.ndarray, np.ndarray]:
        x, w = leggauss(self.points_per_element)
        return 0.5 * (x + 1.0), 0.5 * w


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def _scatter(space: HermiteSpace, local: np.ndarray) -> np.ndarray:
    """Sum per-element local matrices (n_elem, nloc, nloc) into the global matrix."""
    n = space.dof_count
    glob = space.local_to_global
    keep = glob >= 0
    out = np.zeros((n, n))
    for a in range(space.n_local):
        for b in range(space.n_local):
            mask = keep[:, a] & keep[:, b]
            np.add.at(out, (glob[mask, a], glob[mask, b]), local[mask, a, b])
    return out


def assemble_schrodinger(space: HermiteSpace, potential: Potential,
                         quad: QuadratureRule | None = None) -> PencilTriple:
    """Pencil of A = -d^2/dx^2 + V on the Dirichlet Hermite space."""
    quad = quad or QuadratureRule.default(space.r)
    s, w = quad.reference()
    mesh = space.mesh
    h = mesh.h
    phi = space.shape_tables(s)              # (nloc, nq)
    d2 = space.shape_tables(s, deriv=2)
    x = mesh.x_lo + h * (np.arange(mesh.n_elem)[:, None] + s[None, :])  # (ne, nq)
    v = potential.eval(x)
    aphi = -d2[None, :, :] + v[:, None, :] * phi[None, :, :]           # (ne, nloc, nq)
    hw = h * w
    m0_loc = np.einsum("aq,bq,q->ab", phi, phi, hw)
    m0 = _scatter(space, np.broadcast_to(m0_loc, (mesh.n_elem,) + m0_loc.shape))
    # m1[j, k] = int (A b_k) b_j ; local[e, j, k]
    m1 = _scatter(space, np.einsum("ekq,jq,q->ejk", aphi, phi, hw))
    m2 = _scatter(space, np.einsum("ekq,ejq,q->ejk", aphi, aphi, hw))
    return PencilTriple(_hermitize(m0), _hermitize(m1), _hermitize(m2))


def sample_schrodinger(space: HermiteSpace, potential: Potential,
                       quad: QuadratureRule | None = None) -> SampledPencil:
    """Weighted point samples of the basis and of A applied to it.

    Row e * nq + q belongs to quadrature point q of element e; the Gram
    matrices of these samples reproduce :func:`assemble_schrodinger`.
    """
    quad = quad or QuadratureRule.default(space.r)
    s, w = quad.reference()
    mesh = space.mesh
    h, ne, nq = mesh.h, mesh.n_elem, s.size
    phi = space.shape_tables(s)
    d2 = space.shape_tables(s, deriv=2)
    x = mesh.x_lo + h * (np.arange(ne)[:, None] + s[None, :])
    v = potential.eval(x)
    sw = np.sqrt(h * w)
    rows = np.arange(ne * nq).reshape(ne, nq)
    r_idx, c_idx, f_val, g_val = [], [], [], []
    for a in range(space.n_local):
        col = space.local_to_global[:, a]
        keep = col >= 0
        r_idx.append(rows[keep].ravel())
        c_idx.append(np.repeat(col[keep], nq))
        f_val.append(np.broadcast_to(sw * phi[a], (int(keep.sum()), nq)).ravel())
        g_val.append((sw * (-d2[a] + v * phi[a]))[keep].ravel())
    shape = (ne * nq, space.dof_count)
    r_idx, c_idx = np.concatenate(r_idx), np.concatenate(c_idx)
    # duplicate (row, col) pairs cannot occur: a node dof appears once per element
    f = csr_matrix((np.concatenate(f_val), (r_idx, c_idx)), shape=shape)
    g = csr_matrix((np.concatenate(g_val), (r_idx, c_idx)), shape=shape)
    return SampledPencil(f, g)


def identity_gram(space: HermiteSpace, quad: QuadratureRule | None = None):
    """Gram matrices of (b, b), (b', b') and (b'', b'') used for Sobolev norms."""
    quad = quad or QuadratureRule.default(space.r)
    s, w = quad.reference()
    hw = space.mesh.h * w
    ne = space.mesh.n_elem
    mats = []
    for deriv in range(3):
        t = space.shape_tables(s, deriv)
        loc = np.einsum("aq,bq,q->ab", t, t, hw)
        mats.append(_scatter(space, np.broadcast_to(loc, (ne,) + loc.shape)))
    return mats


def best_approx_error(space: HermiteSpace, f, df, d2f,
                      quad: QuadratureRule | None = None) -> tuple[float, float, float]:
    """Best approximation of f in the H^2 inner product; returns (L2, H1, H2) errors.

    The H1 and H2 values are the full Sobolev norms of the error, i.e. the
    H2 value is sqrt(|e|_0^2 + |e'|_0^2 + |e''|_0^2).
    """
    quad = quad or QuadratureRule.default(space.r)
    s, w = quad.reference()
    mesh = space.mesh
    h = mesh.h
    x = mesh.x_lo + h * (np.arange(mesh.n_elem)[:, None] + s[None, :])
    hw = h * w
    g0, g1, g2 = identity_gram(space, quad)
    gram = g0 + g1 + g2
    rhs_loc = np.zeros((mesh.n_elem, space.n_local))
    for deriv, fn in enumerate((f, df, d2f)):
        t = space.shape_tables(s, deriv)
        rhs_loc += np.einsum("aq,eq,q->ea", t, fn(x), hw)
    rhs = np.zeros(space.dof_count)
    glob = space.local_to_global
    for a in range(space.n_local):
        mask = glob[:, a] >= 0
        np.add.at(rhs, glob[mask, a], rhs_loc[mask, a])
    coeffs = np.linalg.solve(gram, rhs)
    errs = []
    for deriv, fn in enumerate((f, df, d2f)):
        t = space.shape_tables(s, deriv)
        approx = np.zeros_like(x)
        for a in range(space.n_local):
            g = glob[:, a]
            approx += np.where(g >= 0, coeffs[np.maximum(g, 0)], 0.0)[:, None] * t[a][None, :]
        errs.append(float(np.sum((fn(x) - approx) ** 2 * hw)))
    l2 = math.sqrt(errs[0])
    h1 = math.sqrt(errs[0] + errs[1])
    h2 = math.sqrt(errs[0] + errs[1] + errs[2])
    return l2, h1, h2
