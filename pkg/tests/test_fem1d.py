import math

import numpy as np
import pytest

from sospec import galerkin_spectrum, second_order_spectrum
from sospec.errors import PreconditionError, UnsupportedOrder
from sospec.fem1d import (HermiteSpace, Potential, QuadratureRule, UniformMesh, assemble_schrodinger,
                          best_approx_error, build_space, identity_gram, sample_schrodinger)


def _space(n, r, lo=0.0, hi=math.pi):
    return build_space(UniformMesh(lo, hi, n), r)


def test_cubic_hermite_element_matrices():
    # one interior node of a two-element mesh on [0, 2h]: value and slope dofs
    h = 0.5
    space = build_space(UniformMesh(0.0, 2 * h, 2), 3)
    g0, g1, _ = identity_gram(space)
    node = [i for i, d in enumerate(space.dofs) if d.kind == "value"][0]
    assert g0[node, node] == pytest.approx(2 * 13 * h / 35)
    assert g1[node, node] == pytest.approx(2 * 6 / (5 * h))
    slope = [i for i, d in enumerate(space.dofs) if d.kind == "slope" and d.index == 1][0]
    assert g0[slope, slope] == pytest.approx(2 * h**3 / 105)
    end = [i for i, d in enumerate(space.dofs) if d.kind == "slope" and d.index == 0][0]
    assert g0[node, end] == pytest.approx(13 * h**2 / 420)


@pytest.mark.parametrize("r", [3, 4, 5])
def test_dof_count_and_support(r):
    space = _space(6, r)
    assert space.dof_count == 2 * 7 - 2 + 6 * (r - 3)


def test_unsupported_order_and_bad_mesh():
    with pytest.raises(UnsupportedOrder):
        HermiteSpace(UniformMesh(0.0, 1.0, 4), 6)
    with pytest.raises(PreconditionError):
        UniformMesh(1.0, 0.0, 4)
    with pytest.raises(PreconditionError):
        Potential("quartic")


def test_galerkin_free_laplacian():
    p = assemble_schrodinger(_space(10, 3), Potential("zero"))
    assert galerkin_spectrum(p)[0] == pytest.approx(1.0, abs=1e-6)


def test_mathieu_first_point():
    p = assemble_schrodinger(_space(48, 3), Potential("mathieu"))
    spec = second_order_spectrum(p)
    z = min((pt.value for pt in spec if pt.im > 0), key=lambda w: abs(w + 0.1102))
    assert abs(z.real + 0.1102) < 1e-3
    assert 0.0 < z.imag < 3e-3


def test_samples_reproduce_assembled_pencil():
    space = _space(8, 4)
    pot = Potential("mathieu")
    p = assemble_schrodinger(space, pot)
    q = sample_schrodinger(space, pot).pencil()
    for a, b in zip((p.m0, p.m1, p.m2), (q.m0, q.m1, q.m2)):
        np.testing.assert_allclose(a, b, atol=1e-12 * np.abs(a).max())


@pytest.mark.parametrize("r", [3, 4, 5])
def test_best_approximation_rate(r):
    f, df, d2f = np.sin, np.cos, lambda x: -np.sin(x)
    e1 = best_approx_error(_space(4, r), f, df, d2f)[2]
    e2 = best_approx_error(_space(8, r), f, df, d2f)[2]
    # H2 error of degree-r elements decays like h^(r-1)
    assert math.log2(e1 / e2) == pytest.approx(r - 1, abs=0.3)


def test_quadrature_rule():
    s, w = QuadratureRule(5).reference()
    assert w.sum() == pytest.approx(1.0)
    assert (s ** 9 * w).sum() == pytest.approx(0.1)
    assert QuadratureRule.default(5).points_per_element == 12
