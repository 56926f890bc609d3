import json
import math

import numpy as np
import pytest

from sospec import second_order_spectrum
from sospec.errors import PairingAmbiguity, PreconditionError
from sospec.experiments import (RunConfig, SlopeFit, chained_enclosures, fem_problem, fit_slope,
                                pair_nearest, reference_eigenvalues, run_converge,
                                run_mathieu_table, run_toy)
from sospec.pencil import SecondOrderSpectrum, SpectralPoint


def test_fit_slope_exact_power_law():
    h = np.array([0.4, 0.2, 0.1, 0.05])
    slope, r2 = fit_slope(h, 3.0 * h**4)
    assert slope == pytest.approx(4.0) and r2 == pytest.approx(1.0)


def test_slope_invariant_under_scaling():
    h = [0.3, 0.2, 0.1]
    y = [2e-3, 5e-4, 4e-5]
    assert fit_slope(h, y)[0] == pytest.approx(fit_slope(h, [1e6 * v for v in y])[0])


def test_slopefit_validation():
    with pytest.raises(PreconditionError):
        SlopeFit(3, 1, (0.1, 0.2), (1e-3, 1e-4), 4.0, 1.0)
    with pytest.raises(PreconditionError):
        SlopeFit(3, 1, (0.2, 0.1), (1e-3, 0.0), 4.0, 1.0)


def test_runconfig_roundtrip(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"command": "fem", "n_elem": 8, "formats": "csv,json"}))
    cfg = RunConfig.from_file(path)
    assert cfg.command == "fem" and cfg.get("n_elem") == 8 and cfg.formats == ("csv", "json")
    with pytest.raises(PreconditionError):
        RunConfig("nope")
    with pytest.raises(PreconditionError):
        RunConfig("fem", formats=("pdf",))


def test_reference_eigenvalues():
    assert reference_eigenvalues("zero", 3) == [1.0, 4.0, 9.0]
    assert reference_eigenvalues("mathieu", 1)[0] == pytest.approx(-0.110248816992, abs=1e-10)
    with pytest.raises(PreconditionError):
        reference_eigenvalues("crystal", 2)


def test_pairing_ambiguity():
    spec = SecondOrderSpectrum((SpectralPoint(1.0 + 1.0j, 1, 1), SpectralPoint(1.0 - 1.0j, 1, 1),
                                SpectralPoint(3.0 + 1.0j, 1, 1), SpectralPoint(3.0 - 1.0j, 1, 1)))
    with pytest.raises(PairingAmbiguity):
        pair_nearest(spec, 2.0)
    assert pair_nearest(spec, 1.1) == 1.0 + 1.0j


def test_converge_small_sweep():
    cfg = RunConfig("converge", {"potential": "zero", "orders": [3], "eigenvalues": [1, 2],
                                 "meshes": {"3": [10, 15, 20]}})
    fits = run_converge(cfg)
    assert [f.j for f in fits] == [1, 2]
    # |Im z| decays like h^(r - 1)
    for f in fits:
        assert f.slope == pytest.approx(2.0, abs=0.15) and f.r2 > 0.99


def test_mathieu_table_contains_references():
    rows = run_mathieu_table(RunConfig("enclose", {"r": 3}))
    ref = reference_eigenvalues("mathieu", 5)
    for row in rows:
        assert row["lo"] <= ref[row["j"] - 1] <= row["hi"]
    assert {row["source"] for row in rows} == {"residual", "improved"}


def test_chained_gaps_need_extra_target():
    p, samples = fem_problem("zero", 0.0, math.pi, 10, 3)
    with pytest.raises(PreconditionError):
        chained_enclosures(second_order_spectrum(p), [1.0, 4.0], 2, samples)


@pytest.mark.parametrize("params", [
    {"model": "ex12", "n": 3}, {"model": "ex14", "n": 3, "r": 2},
    {"model": "rank-rotation", "n": 4, "beta": 0.2},
    {"model": "pollution", "targets": [0.5], "k": 2},
    {"model": "prescribed", "z": [0.2, 0.4]},
])
def test_toy_runner(params):
    rows = run_toy(RunConfig("toy", params))
    assert max(r["deviation"] for r in rows) <= 1e-8
    assert all(r["alg_mult"] == r["expected_alg"] for r in rows)
