"""Command-line driver: cluster a point cloud or image, emit JSON and SVG.

The JSON report (schema id ``cec-report/1``) carries the input descriptor,
the configuration echo, one entry per surviving cluster (family label,
weight, mean, covariance, descending eigenvalues, orientation of the
principal eigenvector in degrees from the +x axis), the final energy,
per-restart energies and the per-point labels. All numbers are serialized
with 9 significant digits. The ``timing_seconds`` field is null unless
``--timing`` is passed, so repeated runs with identical inputs and seed are
byte-identical.

The SVG overlay shares the raster frame of the input (y grows downward,
orientation angles turn from +x toward +y); each cluster is drawn as the
ellipse centered at its fitted mean with semi-axes ``2*sqrt(eigenvalue)``
along the fitted eigenvectors, which is the boundary of the uniform density
whose covariance matches the fitted Gaussian.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from .engine import ClusteringResult, EngineConfig, run
from .errors import (
    CecError,
    ConfigError,
    DegenerateCluster,
    EmptyInput,
    InvalidSpectrum,
    UnsupportedDimensionForSvg,
)
from .families import (
    Diagonal,
    FamilySpec,
    FixedCovariance,
    FixedEigenvalues,
    FixedRadius,
    Full,
    Spherical,
)
from .image import BinaryMask, binarize, load_image, mask_to_points
from .linalg import eigh

__all__ = [
    "SCHEMA",
    "PALETTE",
    "parse_family_spec",
    "format_family_spec",
    "load_points_csv",
    "build_report",
    "render_svg",
    "main",
    "console_entry",
]

SCHEMA = "cec-report/1"

#: fixed 12-color palette cycled over clusters (ellipses and point layer)
PALETTE = [
    "#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#46a5b3",
    "#f032e6", "#9a6324", "#800000", "#808000", "#000075", "#568203",
]


def parse_family_spec(text: str) -> FamilySpec:
    """Parse one family spec token.

    Grammar: ``full`` | ``diag`` | ``spherical`` | ``fixed-radius:<r>`` |
    ``fixed-eigs:<l1>,...,<lN>`` | ``fixed-cov:@<matrix-file>``. Eigenvalues
    given out of order are sorted descending with a warning.
    """
    token = text.strip()
    if token == "full":
        return Full()
    if token == "diag":
        return Diagonal()
    if token == "spherical":
        return Spherical()
    if token.startswith("fixed-radius:"):
        raw = token[len("fixed-radius:"):]
        try:
            r = float(raw)
        except ValueError:
            raise ConfigError(f"malformed radius {raw!r} in {token!r}") from None
        try:
            return FixedRadius(r)
        except InvalidSpectrum as exc:
            raise ConfigError(f"{exc} in {token!r}") from None
    if token.startswith("fixed-eigs:"):
        raw = token[len("fixed-eigs:"):]
        try:
            values = [float(v) for v in raw.split(",") if v != ""]
        except ValueError:
            raise ConfigError(f"malformed eigenvalue list {raw!r} in {token!r}") from None
        ordered = sorted(values, reverse=True)
        if ordered != values:
            warnings.warn(
                f"fixed-eigs values {values} reordered to descending {ordered}",
                stacklevel=2,
            )
        try:
            return FixedEigenvalues(tuple(ordered))
        except InvalidSpectrum as exc:
            raise ConfigError(f"{exc} in {token!r}") from None
    if token.startswith("fixed-cov:@"):
        path = Path(token[len("fixed-cov:@"):])
        if not path.exists():
            raise ConfigError(f"matrix file {path} not found in {token!r}")
        try:
            matrix = np.loadtxt(path, delimiter=None, dtype=np.float64, ndmin=2)
        except ValueError:
            try:
                matrix = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
            except ValueError:
                raise ConfigError(f"cannot parse matrix file {path}") from None
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ConfigError(f"matrix file {path} is not square (shape {matrix.shape})")
        if np.max(np.abs(matrix - matrix.T), initial=0.0) > 1e-8 * (1.0 + np.abs(matrix).max()):
            raise ConfigError(f"matrix file {path} is not symmetric")
        try:
            return FixedCovariance(matrix)
        except (InvalidSpectrum, CecError) as exc:
            raise ConfigError(f"{exc} in {token!r}") from None
    raise ConfigError(f"unknown family spec {token!r}")


def format_family_spec(spec: FamilySpec) -> str:
    """Canonical textual label of a family (path-free for fixed covariances)."""
    if isinstance(spec, Full):
        return "full"
    if isinstance(spec, Diagonal):
        return "diag"
    if isinstance(spec, Spherical):
        return "spherical"
    if isinstance(spec, FixedRadius):
        return f"fixed-radius:{spec.radius:.9g}"
    if isinstance(spec, FixedEigenvalues):
        return "fixed-eigs:" + ",".join(f"{v:.9g}" for v in spec.lambdas)
    if isinstance(spec, FixedCovariance):
        return "fixed-cov"
    raise ConfigError(f"unknown family spec {spec!r}")


def _parse_family_arg(text: str):
    """Split ``<spec>:<count>`` and parse both parts."""
    head, sep, tail = text.rpartition(":")
    if not sep:
        raise ConfigError(f"family argument {text!r} is missing its ':<count>' suffix")
    try:
        count = int(tail)
    except ValueError:
        raise ConfigError(f"malformed cluster count {tail!r} in {text!r}") from None
    if count < 1:
        raise ConfigError(f"cluster count must be >= 1 in {text!r}")
    return parse_family_spec(head), count


def load_points_csv(path) -> np.ndarray:
    """Read a point per row (``x,y[,z...]``); a non-numeric first row is a header."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"cannot read {p}")
    rows = []
    width = None
    for ln, line in enumerate(p.read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        fields = [f.strip() for f in line.split(",")]
        try:
            row = [float(f) for f in fields]
        except ValueError:
            if ln == 1 or (ln > 1 and not rows):
                continue  # header line
            raise ConfigError(f"{p}:{ln}: non-numeric value in {line!r}") from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ConfigError(
                f"{p}:{ln}: expected {width} columns, found {len(row)}"
            )
        rows.append(row)
    if not rows:
        raise EmptyInput(f"{p} contains no points")
    return np.asarray(rows, dtype=np.float64)


def _round_floats(obj):
    """Round every float in a JSON-ready structure to 9 significant digits."""
    if isinstance(obj, float):
        return float(f"{obj:.9g}")
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def build_report(result: ClusteringResult, input_desc: dict, config_echo: dict,
                 timing_seconds=None) -> dict:
    """Assemble the ``cec-report/1`` document as a plain dict."""
    n = int(result.labels.shape[0])
    clusters = []
    for fit in result.fitted:
        cov = fit.gaussian.covariance
        decomp = eigh(cov)
        entry = {
            "family": format_family_spec(fit.family),
            "count": int(fit.count),
            "weight": fit.count / n,
            "mean": [float(v) for v in fit.gaussian.mean],
            "covariance": [[float(v) for v in row] for row in cov],
            "eigenvalues": [float(v) for v in decomp.eigenvalues],
        }
        if cov.shape[0] == 2:
            v0 = decomp.eigenvectors[:, 0]
            entry["orientation_degrees"] = math.degrees(math.atan2(v0[1], v0[0]))
        else:
            entry["orientation_degrees"] = None
        clusters.append(entry)
    report = {
        "schema": SCHEMA,
        "input": input_desc,
        "config": config_echo,
        "clusters": clusters,
        "final_energy": float(result.final_energy),
        "restart_energies": [float(v) for v in result.restart_energies],
        "best_restart": int(result.restart_index_of_best),
        "sweeps_used": int(result.sweeps_used),
        "energy_trace": [float(v) for v in result.energy_trace],
        "labels": [int(v) for v in result.labels],
        "timing_seconds": timing_seconds,
    }
    return _round_floats(report)


def _svg_color(i: int) -> str:
    return PALETTE[i % len(PALETTE)]


def render_svg(report: dict, mask: BinaryMask = None, points=None) -> str:
    """SVG 1.1 overlay: one ellipse per cluster, optional labeled point layer.

    Semi-axes are ``2*sqrt(eigenvalue)`` of the reported (already rounded)
    eigenvalues; the rotation angle is the reported orientation. Raises
    UnsupportedDimensionForSvg for non-2-D results.
    """
    clusters = report.get("clusters", [])
    for entry in clusters:
        if len(entry["mean"]) != 2:
            raise UnsupportedDimensionForSvg(
                f"cannot draw {len(entry['mean'])}-dimensional clusters"
            )
    if points is None and mask is not None:
        points = mask_to_points(mask)
    labels = report.get("labels")

    if mask is not None:
        x0, y0, x1, y1 = 0.0, 0.0, float(mask.width), float(mask.height)
    else:
        xs, ys = [], []
        if points is not None and len(points):
            pts = np.asarray(points, dtype=np.float64)
            xs += [float(pts[:, 0].min()), float(pts[:, 0].max())]
            ys += [float(pts[:, 1].min()), float(pts[:, 1].max())]
        for entry in clusters:
            reach = 2.0 * math.sqrt(max(entry["eigenvalues"][0], 0.0))
            xs += [entry["mean"][0] - reach, entry["mean"][0] + reach]
            ys += [entry["mean"][1] - reach, entry["mean"][1] + reach]
        if not xs:
            xs, ys = [0.0, 100.0], [0.0, 100.0]
        pad = 0.05 * max(max(xs) - min(xs), max(ys) - min(ys), 1.0)
        x0, y0 = min(xs) - pad, min(ys) - pad
        x1, y1 = max(xs) + pad, max(ys) + pad

    width = x1 - x0
    height = y1 - y0
    stroke = max(width, height) / 300.0
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width:.6f}" height="{height:.6f}" '
        f'viewBox="{x0:.6f} {y0:.6f} {width:.6f} {height:.6f}">',
        f'<rect x="{x0:.6f}" y="{y0:.6f}" width="{width:.6f}" height="{height:.6f}" '
        'fill="white"/>',
    ]
    if points is not None and len(points):
        pts = np.asarray(points, dtype=np.float64)
        radius = max(min(width, height) / 400.0, 0.35)
        out.append('<g stroke="none" fill-opacity="0.55">')
        for i, (px, py) in enumerate(pts):
            color = _svg_color(int(labels[i])) if labels is not None else "#555555"
            out.append(
                f'<circle cx="{px:.3f}" cy="{py:.3f}" r="{radius:.3f}" fill="{color}"/>'
            )
        out.append("</g>")
    for i, entry in enumerate(clusters):
        rx = 2.0 * math.sqrt(max(entry["eigenvalues"][0], 0.0))
        ry = 2.0 * math.sqrt(max(entry["eigenvalues"][-1], 0.0))
        angle = entry.get("orientation_degrees") or 0.0
        cx, cy = entry["mean"]
        out.append(
            f'<ellipse cx="0" cy="0" rx="{rx:.6f}" ry="{ry:.6f}" '
            f'transform="translate({cx:.6f} {cy:.6f}) rotate({angle:.6f})" '
            f'fill="none" stroke="{_svg_color(i)}" stroke-width="{stroke:.6f}"/>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(2, f"error:config: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="cec",
        description="Detect ellipse-shaped point groups by cross-entropy clustering.",
    )
    parser.add_argument("--input", required=True, help="input file: .csv, .png or .pgm")
    parser.add_argument(
        "--family", action="append", required=True, metavar="SPEC:COUNT",
        help="coding family and its initial cluster count, e.g. full:5, "
             "fixed-eigs:4938.5,5.7:10, fixed-radius:2.5:3, fixed-cov:@mat.txt:2 "
             "(repeatable)",
    )
    parser.add_argument("--min-weight", type=float, default=0.02,
                        help="clusters lighter than this fraction are removed (default 0.02)")
    parser.add_argument("--restarts", type=int, default=10, help="seeded restarts (default 10)")
    parser.add_argument("--seed", type=int, default=0, help="base random seed (default 0)")
    parser.add_argument("--max-sweeps", type=int, default=100,
                        help="maximum Hartigan sweeps per restart (default 100)")
    parser.add_argument("--epsilon", type=float, default=1e-6,
                        help="covariance ridge regularization (default 1e-6)")
    parser.add_argument("--threshold", default="otsu", metavar="otsu|fixed:T",
                        help="binarization threshold for image input (default otsu)")
    parser.add_argument("--polarity", choices=["dark", "bright"], default="dark",
                        help="which pixels are foreground (default dark)")
    parser.add_argument("--out-json", metavar="PATH",
                        help="write the JSON report here (default: stdout)")
    parser.add_argument("--out-svg", metavar="PATH", help="write an SVG overlay here")
    parser.add_argument("--timing", action="store_true",
                        help="include wall-clock timing in the report "
                             "(off by default to keep output deterministic)")
    return parser


def _load_input(args):
    path = Path(args.input)
    suffix = path.suffix.lower()
    desc = {"path": str(path), "kind": suffix.lstrip(".")}
    mask = None
    if suffix == ".csv":
        points = load_points_csv(path)
    elif suffix in (".png", ".pgm"):
        image = load_image(path)
        thr = args.threshold.strip()
        if thr == "otsu":
            mask = binarize(image, method="otsu", polarity=args.polarity)
        elif thr.startswith("fixed:"):
            try:
                t = float(thr[len("fixed:"):])
            except ValueError:
                raise ConfigError(f"malformed threshold {thr!r}") from None
            mask = binarize(image, method="fixed", threshold=t, polarity=args.polarity)
        else:
            raise ConfigError(f"threshold must be 'otsu' or 'fixed:T', got {thr!r}")
        points = mask_to_points(mask)
        if points.shape[0] == 0:
            raise EmptyInput(f"{path}: binarization left no foreground pixels")
        desc.update({
            "width": mask.width,
            "height": mask.height,
            "polarity": mask.foreground,
            "foreground_pixels": mask.foreground_count,
        })
    else:
        raise ConfigError(f"unsupported input format {suffix!r} (expected .csv, .png or .pgm)")
    desc["points"] = int(points.shape[0])
    desc["dimension"] = int(points.shape[1]) if points.ndim == 2 else 1
    return points, mask, desc


def _main(argv) -> int:
    args = _build_parser().parse_args(argv)
    points, mask, input_desc = _load_input(args)
    pool = [_parse_family_arg(text) for text in args.family]
    config = EngineConfig(
        family_pool=pool,
        min_weight=args.min_weight,
        max_sweeps=args.max_sweeps,
        restarts=args.restarts,
        seed=args.seed,
        epsilon_reg=args.epsilon,
    )
    t0 = time.perf_counter()
    result = run(points, config)
    elapsed = time.perf_counter() - t0

    config_echo = {
        "families": [
            {"family": format_family_spec(spec), "count": count}
            for spec, count in pool
        ],
        "seed": args.seed,
        "restarts": args.restarts,
        "min_weight": args.min_weight,
        "max_sweeps": args.max_sweeps,
        "epsilon": args.epsilon,
        "threshold": args.threshold if mask is not None else None,
        "polarity": args.polarity if mask is not None else None,
    }
    report = build_report(
        result, input_desc, config_echo,
        timing_seconds=elapsed if args.timing else None,
    )
    payload = json.dumps(report, indent=2) + "\n"
    if args.out_json:
        Path(args.out_json).write_text(payload)
    else:
        sys.stdout.write(payload)

    if args.out_svg:
        try:
            svg = render_svg(report, mask=mask,
                             points=points if points.shape[1] == 2 else None)
        except UnsupportedDimensionForSvg as exc:
            sys.stderr.write(f"warning:{exc.kind}: {exc}; SVG output skipped\n")
        else:
            Path(args.out_svg).write_text(svg)
    return 0


def main(argv=None) -> int:
    """CLI entry point; returns the process exit code."""
    try:
        return _main(argv)
    except (DegenerateCluster, EmptyInput) as exc:
        sys.stderr.write(f"error:{exc.kind}: {exc}\n")
        return 3
    except CecError as exc:
        sys.stderr.write(f"error:{exc.kind}: {exc}\n")
        return 2


def console_entry():
    raise SystemExit(main())
