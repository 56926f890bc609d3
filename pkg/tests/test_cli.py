import csv
import io
import json
import subprocess
import sys

import pytest

from sospec.cli import main
from sospec.pencil import PencilTriple


def _config(tmp_path, doc):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(doc))
    return str(path)


def test_toy_to_stdout(tmp_path, capsys):
    assert main(["toy", "--config", _config(tmp_path, {"model": "ex12", "n": 3})]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert rows and float(max(r["deviation"] for r in rows)) <= 1e-8


def test_fem_writes_all_formats(tmp_path):
    out = tmp_path / "out"
    code = main(["fem", "--config", _config(tmp_path, {"potential": "mathieu", "n_elem": 12}),
                 "--out", str(out), "--format", "csv,json,svg-data", "--dump-matrices"])
    assert code == 0
    for name in ("spectrum.csv", "galerkin.csv", "spectrum.json", "spectrum.svg", "pencil.json"):
        assert (out / name).exists(), name
    p = PencilTriple.from_json((out / "pencil.json").read_text())
    assert p.n == 2 * 13 - 2
    header = (out / "spectrum.csv").read_text().splitlines()[0]
    assert header == "re,im,alg_mult,geom_mult"


def test_enclose_with_gaps_and_sigma_map(tmp_path, capsys):
    doc = {"fem": {"potential": "mathieu", "n_elem": 24, "r": 3}, "gaps": [{"a": "-inf", "b": 3.0}]}
    assert main(["enclose", "--config", _config(tmp_path, doc)]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert all(float(r["lo"]) <= -0.11024881699209521 <= float(r["hi"]) for r in rows)
    doc = {"model": "ex12", "n": 2, "re_range": [-2, 2], "im_range": [0, 2], "n_re": 5, "n_im": 3}
    assert main(["sigma-map", "--config", _config(tmp_path, doc)]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 16


def test_output_is_deterministic(tmp_path):
    cfg = _config(tmp_path, {"model": "ex14", "n": 3, "r": 2})
    main(["toy", "--config", cfg, "--out", str(tmp_path / "a")])
    main(["toy", "--config", cfg, "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "toy.csv").read_bytes() == (tmp_path / "b" / "toy.csv").read_bytes()


def test_exit_codes(tmp_path, capsys):
    assert main(["toy", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["toy", "--config", _config(tmp_path, {"model": "nope"})]) == 2
    doc = {"model": "ex12", "n": 2, "gaps": [{"a": 0.0, "b": 2.0}, {"a": 1.0, "b": 3.0}]}
    assert main(["enclose", "--config", _config(tmp_path, doc)]) == 2
    assert main(["toy", "--config", _config(tmp_path, {"model": "ex12"}), "--dump-matrices"]) == 2
    with pytest.raises(SystemExit):
        main(["bogus", "--config", "x"])


def test_console_script_help():
    out = subprocess.run([sys.executable, "-m", "sospec.cli", "--help"], capture_output=True,
                         text=True, check=True).stdout
    assert "enclosures.csv: eig_label,source,lo,hi,re,im" in out
