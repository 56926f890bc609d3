import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from sospec import MatrixModel, assemble_pencil, second_order_spectrum
from sospec.enclosures import GapInterval, improved_interval, residual_interval
from sospec.errors import NonPositiveDefiniteMass
from sospec.fem1d import Potential, UniformMesh, assemble_schrodinger, build_space

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def _model(seed):
    rng = np.random.default_rng(seed)
    size = int(rng.integers(2, 9))
    evals = np.sort(rng.uniform(-5, 5, size))
    q, _ = np.linalg.qr(rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size)))
    op = (q * evals) @ q.conj().T
    basis = rng.standard_normal((size, int(rng.integers(1, size + 1))))
    return MatrixModel(0.5 * (op + op.conj().T), basis), evals


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_residual_intervals_meet_the_spectrum(seed):
    model, evals = _model(seed)
    try:
        spec = second_order_spectrum(assemble_pencil(model))
    except NonPositiveDefiniteMass:
        return
    assert spec.total_algebraic == 2 * model.dim
    for pt in spec:
        e = residual_interval(pt.value)
        slack = 1e-7 * max(1.0, abs(pt.value))
        assert np.any((evals >= e.lo - slack) & (evals <= e.hi + slack))


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_improved_intervals_hold_the_isolated_eigenvalue(seed):
    model, evals = _model(seed)
    try:
        spec = second_order_spectrum(assemble_pencil(model))
    except NonPositiveDefiniteMass:
        return
    chain = np.concatenate([[-np.inf], evals, [np.inf]])
    for j in range(1, len(chain) - 1):
        gap = GapInterval(chain[j - 1], chain[j + 1])
        for pt in spec:
            if pt.im > 0 and gap.in_disk(pt.value, tol=1e-9):
                e = improved_interval(pt.value, gap)
                slack = 1e-7 * max(1.0, abs(pt.value))
                assert e.lo - slack <= chain[j] <= e.hi + slack


@settings(max_examples=10, deadline=None)
@given(st.integers(min_value=4, max_value=16), st.sampled_from([3, 4, 5]),
       st.sampled_from(["zero", "mathieu"]))
def test_fem_spectrum_structure(n_elem, r, potential):
    p = assemble_schrodinger(build_space(UniformMesh(0.0, np.pi, n_elem), r), Potential(potential))
    spec = second_order_spectrum(p)
    assert spec.total_algebraic == 2 * p.n
    ups = sorted((pt.re, pt.im) for pt in spec if pt.im > 0)
    downs = sorted((pt.re, -pt.im) for pt in spec if pt.im < 0)
    assert ups == downs
