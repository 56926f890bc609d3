import math

import numpy as np
import pytest

from sospec import MatrixModel, assemble_pencil, second_order_spectrum
from sospec.enclosures import (EnclosureInterval, GapInterval, alpha_lower_bound, enclosures_to_csv,
                               format_bound, improved_interval, pair_and_enclose, parse_bound,
                               residual_interval, thm34_constants)
from sospec.errors import DegenerateGap, EmptyExterior, OutsideDisk, PreconditionError


def test_residual_interval_is_symmetric():
    e = residual_interval(1.0 + 0.25j, "x")
    assert (e.lo, e.hi, e.source) == (0.75, 1.25, "residual")
    assert e.contains(1.2) and not e.contains(1.3)


def test_improved_interval_formula_and_nesting():
    z, gap = 1.0 + 0.1j, GapInterval(0.0, 3.0)
    imp = improved_interval(z, gap)
    assert imp.lo == pytest.approx(1.0 - 0.01 / 2.0)
    assert imp.hi == pytest.approx(1.0 + 0.01 / 1.0)
    assert imp.issubset(residual_interval(z))


def test_improved_interval_with_infinite_endpoints():
    imp = improved_interval(-1.0 + 0.2j, GapInterval(-math.inf, 0.0))
    assert imp.hi == -1.0
    assert imp.lo == pytest.approx(-1.04)


def test_improved_interval_preconditions():
    with pytest.raises(OutsideDisk):
        improved_interval(1.0 + 2.0j, GapInterval(0.0, 3.0))
    with pytest.raises(PreconditionError):
        GapInterval(1.0, 1.0)
    with pytest.raises(DegenerateGap):
        improved_interval(3.0 - 1e-14 + 0j, GapInterval(-math.inf, 3.0))


def test_improved_enclosure_contains_true_eigenvalue(rng):
    # A = diag(-3, 1, 5); one trial vector mixing the three eigenvectors
    a = np.diag([-3.0, 1.0, 5.0])
    x = np.array([[0.1], [1.0], [0.15]])
    spec = second_order_spectrum(assemble_pencil(MatrixModel(a, x)))
    rows = pair_and_enclose(spec, [GapInterval(-3.0, 5.0)], ["lambda"])
    assert {r.source for r in rows} == {"residual", "improved"}
    assert all(r.contains(1.0) for r in rows)


def test_overlapping_gaps_rejected():
    spec = second_order_spectrum(assemble_pencil(MatrixModel(np.diag([0.0, 1.0]), np.eye(2))))
    with pytest.raises(PreconditionError):
        pair_and_enclose(spec, [GapInterval(0.0, 2.0), GapInterval(1.0, 3.0)])


def test_alpha_lower_bound():
    assert alpha_lower_bound(0.5 + 0j, 0.0, 1.0) == pytest.approx(0.25)
    assert alpha_lower_bound(0.5 + 0.5j, 0.0, 1.0) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(OutsideDisk):
        alpha_lower_bound(0.5 + 0.6j, 0.0, 1.0)


def test_bound_parsing_roundtrip():
    for s, v in (("-inf", -math.inf), ("+inf", math.inf), ("2.5", 2.5)):
        assert parse_bound(s) == v
        assert parse_bound(format_bound(v)) == v
    assert GapInterval.from_json(GapInterval(-math.inf, 1.0).to_json()) == GapInterval(-math.inf, 1.0)


def test_csv_is_certified_outward():
    e = EnclosureInterval(1.0, 2.0, "residual", 1.5 + 0.5j, "l")
    lines = enclosures_to_csv([e]).splitlines()
    assert lines[0] == "eig_label,source,lo,hi,re,im"
    lo, hi = map(float, lines[1].split(",")[2:4])
    assert lo < 1.0 and hi > 2.0


def test_cluster_constants():
    c = thm34_constants(0.0, 1.0, 2, 1, [-1.0, 3.0])
    assert c.d == 1.0 and c.kappa == pytest.approx(1.0 / c.gamma)
    assert c.delta_max(0.1) == pytest.approx(c.kappa * 0.01)
    with pytest.raises(EmptyExterior):
        thm34_constants(0.0, 1.0, 2, 1, [])
