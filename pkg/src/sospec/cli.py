"""Command-line driver ``sospec``.

Every command reads a JSON config, runs one experiment and writes its rows
as CSV, JSON and/or raw SVG polyline data.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .enclosures import GapInterval, enclosures_to_csv, format_bound, pair_and_enclose
from .errors import PreconditionError, SospecError, SolverFailure
from .experiments import (FORMATS, RunConfig, fem_pencil, run_converge, run_crystal,
                          run_mathieu_table, run_toy, toy_model)
from .pencil import (PencilTriple, assemble_pencil, galerkin_spectrum, second_order_spectrum,
                     sigma_map)

EXIT_OK, EXIT_PRECONDITION, EXIT_SOLVER = 0, 2, 3

SCHEMAS = {
    "toy": "toy.csv: model,expected_re,expected_im,expected_alg,expected_geom,"
           "re,im,alg_mult,geom_mult,deviation",
    "fem": "spectrum.csv: re,im,alg_mult,geom_mult; galerkin.csv: index,value",
    "converge": "slopes.csv: potential,r,j,slope,r2; residuals.csv: r,j,h,residual",
    "enclose": "enclosures.csv: eig_label,source,lo,hi,re,im",
    "sigma-map": "sigma.csv: re,im,sigma",
    "crystal": "enclosures.csv: eig_label,source,lo,hi,re,im",
}

EPILOG = "CSV schemas:\n" + "\n".join(f"  {k:10s} {v}" for k, v in SCHEMAS.items()) + """

exit codes: 0 success, 2 precondition violation, 3 solver failure
"""


@dataclass
class Artifact:
    """One named output table plus optional plot series and matrices."""

    name: str
    columns: list[str]
    rows: list[dict]
    meta: dict = field(default_factory=dict)
    series: dict[str, list[tuple[float, float]]] | None = None
    axes: tuple[str, str] = ("x", "y")


@dataclass
class Outcome:
    artifacts: list[Artifact]
    pencils: dict[str, PencilTriple] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _fmt(x):
    if isinstance(x, float):
        return format_bound(x) if math.isinf(x) else repr(x)
    return x


def to_csv(columns: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return format_bound(float(x)) if math.isinf(x) else float(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def to_svg(series: dict[str, list[tuple[float, float]]], axes: tuple[str, str],
           width: int = 480, height: int = 360, pad: int = 40) -> str:
    """Unstyled SVG: two axis lines and one polyline per series, in data order."""
    pts = [p for s in series.values() for p in s]
    xs, ys = [p[0] for p in pts], [p[1] for p in pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    sx = (width - 2 * pad) / ((x1 - x0) or 1.0)
    sy = (height - 2 * pad) / ((y1 - y0) or 1.0)

    def tx(x, y):
        return pad + (x - x0) * sx, height - pad - (y - y0) * sy

    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" '
             f'data-x-range="{x0!r} {x1!r}" data-y-range="{y0!r} {y1!r}">',
             f'<line class="axis" data-label="{axes[0]}" x1="{pad}" y1="{height - pad}" '
             f'x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
             f'<line class="axis" data-label="{axes[1]}" x1="{pad}" y1="{height - pad}" '
             f'x2="{pad}" y2="{pad}" stroke="black"/>']
    for name, data in series.items():
        coords = " ".join("%.3f,%.3f" % tx(x, y) for x, y in data)
        raw = " ".join(f"{x!r},{y!r}" for x, y in data)
        lines.append(f'<polyline data-series="{name}" data-values="{raw}" points="{coords}" '
                     'fill="none" stroke="black"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def write_outcome(outcome: Outcome, cfg: RunConfig, stdout=None):
    if cfg.out is None:
        stdout = stdout or sys.stdout
        for art in outcome.artifacts:
            if len(outcome.artifacts) > 1:
                stdout.write(f"# {art.name}\n")
            stdout.write(to_csv(art.columns, art.rows))
        return
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    for art in outcome.artifacts:
        if "csv" in cfg.formats:
            (out / f"{art.name}.csv").write_text(to_csv(art.columns, art.rows))
        if "json" in cfg.formats:
            doc = {"command": cfg.command, "params": cfg.params, "meta": art.meta,
                   "rows": art.rows}
            (out / f"{art.name}.json").write_text(json.dumps(_jsonable(doc), indent=2) + "\n")
        if "svg-data" in cfg.formats and art.series:
            (out / f"{art.name}.svg").write_text(to_svg(art.series, art.axes))
    if cfg.dump_matrices:
        for name, p in outcome.pencils.items():
            (out / f"{name}.json").write_text(p.to_json())


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _pencil_source(params: dict) -> PencilTriple:
    """Pencil from a JSON file, a toy model or a FEM description."""
    if "pencil" in params:
        return PencilTriple.from_json(Path(params["pencil"]).read_text())
    if "model" in params:
        return assemble_pencil(toy_model(params["model"], params)[0])
    if "fem" in params:
        return _fem_from(params["fem"])
    raise PreconditionError("config needs one of 'pencil', 'model' or 'fem'")


def _fem_from(doc: dict) -> PencilTriple:
    return fem_pencil(doc.get("potential", "zero"), float(doc.get("x_lo", 0.0)),
                      float(doc.get("x_hi", math.pi)), int(doc["n_elem"]), int(doc.get("r", 3)),
                      doc.get("quad_points"))


def _spectrum_artifact(p: PencilTriple, name: str = "spectrum") -> Artifact:
    spec = second_order_spectrum(p)
    rows = [{"re": pt.re, "im": pt.im, "alg_mult": pt.algebraic_mult,
             "geom_mult": pt.geometric_mult} for pt in spec]
    series = {"spec2": [(pt.re, pt.im) for pt in spec]}
    return Artifact(name, ["re", "im", "alg_mult", "geom_mult"], rows,
                    {"total_algebraic": spec.total_algebraic, "n": p.n}, series, ("re", "im"))


def cmd_toy(cfg: RunConfig) -> Outcome:
    rows = run_toy(cfg)
    cols = ["model", "expected_re", "expected_im", "expected_alg", "expected_geom",
            "re", "im", "alg_mult", "geom_mult", "deviation"]
    meta = {"max_deviation": max(r["deviation"] for r in rows)}
    p = assemble_pencil(toy_model(cfg.get("model", "ex12"), cfg.params)[0])
    return Outcome([Artifact("toy", cols, rows, meta)], {"pencil": p})


def cmd_fem(cfg: RunConfig) -> Outcome:
    p = _fem_from(cfg.params)
    gal = [{"index": i + 1, "value": float(v)} for i, v in enumerate(galerkin_spectrum(p))]
    return Outcome([_spectrum_artifact(p), Artifact("galerkin", ["index", "value"], gal)],
                   {"pencil": p})


def cmd_converge(cfg: RunConfig) -> Outcome:
    fits = run_converge(cfg)
    pot = cfg.get("potential", "zero")
    slopes = [{"potential": pot, "r": f.r, "j": f.j, "slope": f.slope, "r2": f.r2} for f in fits]
    resid = [{"r": f.r, "j": f.j, "h": h, "residual": y}
             for f in fits for h, y in zip(f.h_values, f.residuals)]
    series = {f"r{f.r}_j{f.j}": [(math.log10(h), math.log10(y))
                                 for h, y in zip(f.h_values, f.residuals)] for f in fits}
    return Outcome([Artifact("slopes", ["potential", "r", "j", "slope", "r2"], slopes),
                    Artifact("residuals", ["r", "j", "h", "residual"], resid, series=series,
                             axes=("log10 h", "log10 |Im z|"))])


ENCLOSURE_COLUMNS = ["eig_label", "source", "lo", "hi", "re", "im"]


def _enclosure_artifact(rows: list[dict], meta: dict | None = None) -> Artifact:
    series = {f"{r['eig_label']}_{r['source']}": [(r["lo"], 0.0), (r["hi"], 0.0)] for r in rows}
    return Artifact("enclosures", ENCLOSURE_COLUMNS, rows, meta or {}, series, ("x", ""))


def cmd_enclose(cfg: RunConfig) -> Outcome:
    if "gaps" not in cfg.params:
        rows = run_mathieu_table(cfg)
        return Outcome([_enclosure_artifact(rows, {"chained_gaps": True})])
    p = _pencil_source(cfg.params)
    gaps = [GapInterval.from_json(g) for g in cfg.get("gaps")]
    encl = pair_and_enclose(second_order_spectrum(p), gaps, cfg.get("labels"))
    text = enclosures_to_csv(encl, certify=bool(cfg.get("certify", True)))
    rows = list(csv.DictReader(io.StringIO(text)))
    for row in rows:
        for key in ("lo", "hi", "re", "im"):
            row[key] = float(row[key])
    return Outcome([_enclosure_artifact(rows)], {"pencil": p})


def cmd_sigma_map(cfg: RunConfig) -> Outcome:
    p = _pencil_source(cfg.params)
    re_rng = tuple(float(x) for x in cfg.get("re_range", (-1.0, 1.0)))
    im_rng = tuple(float(x) for x in cfg.get("im_range", (0.0, 1.0)))
    n_re, n_im = int(cfg.get("n_re", 21)), int(cfg.get("n_im", 21))
    grid = sigma_map(p, re_rng, im_rng, n_re, n_im)
    xs, ys = np.linspace(*re_rng, n_re), np.linspace(*im_rng, n_im)
    rows = [{"re": float(x), "im": float(y), "sigma": float(grid[i, j])}
            for i, y in enumerate(ys) for j, x in enumerate(xs)]
    series = {f"im={y!r}": [(float(x), float(grid[i, j])) for j, x in enumerate(xs)]
              for i, y in enumerate(ys)}
    return Outcome([Artifact("sigma", ["re", "im", "sigma"], rows, series=series,
                             axes=("re", "sigma"))], {"pencil": p})


def cmd_crystal(cfg: RunConfig) -> Outcome:
    rows = run_crystal(cfg)
    meta = {k: rows[0][k] for k in ("a", "b", "l", "h", "r", "n_elem", "dofs")}
    return Outcome([_enclosure_artifact(rows, meta)])


HANDLERS = {"toy": cmd_toy, "fem": cmd_fem, "converge": cmd_converge, "enclose": cmd_enclose,
            "sigma-map": cmd_sigma_map, "crystal": cmd_crystal}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sospec", description="Second order spectra, enclosures and FEM experiments.",
        epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("command", choices=sorted(HANDLERS))
    parser.add_argument("--config", required=True, help="JSON file with the run parameters")
    parser.add_argument("--out", help="output directory (default: CSV to stdout)")
    parser.add_argument("--format", default=None,
                        help=f"comma separated subset of {','.join(FORMATS)} (default csv)")
    parser.add_argument("--dump-matrices", action="store_true",
                        help="also write assembled pencils as JSON")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise PreconditionError(f"cannot read config {args.config}: {exc}") from exc
        cfg = RunConfig.from_dict(doc, command=args.command)
        if args.out:
            cfg.out = Path(args.out)
        if args.format:
            cfg = RunConfig(cfg.command, cfg.params, cfg.out,
                            tuple(f.strip() for f in args.format.split(",") if f.strip()),
                            cfg.dump_matrices)
        cfg.dump_matrices = cfg.dump_matrices or args.dump_matrices
        if cfg.dump_matrices and cfg.out is None:
            raise PreconditionError("--dump-matrices needs --out")
        write_outcome(HANDLERS[cfg.command](cfg), cfg)
    except PreconditionError as exc:
        print(f"sospec: precondition violated: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (SolverFailure, SospecError, np.linalg.LinAlgError) as exc:
        print(f"sospec: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
