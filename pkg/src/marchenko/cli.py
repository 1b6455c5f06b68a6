"""Command-line front end.

Exit codes
----------
0  success (stability: every component stable; oracle-compare: agreement)
1  stability/filter found non-stable components, or oracle-compare disagreed
2  usage, parse or validation error
3  grid reaches below the convergence abscissa of the series
4  term budget exceeded while expanding
5  singular operator in the direct solve
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import kernel, oracle, recursion, spectrum, stability

EXIT_OK = 0
EXIT_FLAGGED = 1
EXIT_USAGE = 2
EXIT_DIVERGENT = 3
EXIT_BUDGET = 4
EXIT_SINGULAR = 5

FIGURES = {
    # name: (beta, default x range)
    "fig1": (10.0, (0.0, 1.0)),
    "fig2": (0.49, (0.8, 2.0)),
}
FIGURE_DEPTHS = (1.0, 0.99)
FIGURE_DISPLAY_SCALE = {"fig2": 1e-15}


def _diag(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _emit(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        Path(path).write_text(text)


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _load(path: str | None) -> tuple[spectrum.SpectralDataset, list]:
    if path is None:
        raise spectrum.SpectrumError("--input is required")
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise spectrum.SpectrumError(str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise spectrum.SpectrumError(f"{path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise spectrum.SpectrumError(f"{path}: expected a JSON object")
    return spectrum.dataset_from_json(raw), raw.get("components", [])


def _grid(args, default=(0.0, 1.0)) -> np.ndarray:
    lo = default[0] if args.x_min is None else args.x_min
    hi = default[1] if args.x_max is None else args.x_max
    if not lo < hi:
        raise spectrum.SpectrumError(f"x-min ({lo}) must be below x-max ({hi})")
    if args.samples < 2:
        raise spectrum.SpectrumError("--samples must be >= 2")
    return np.linspace(lo, hi, args.samples)


def _expand(args, dataset):
    if args.prune < 0:
        raise spectrum.SpectrumError("--prune must be nonnegative")
    return recursion.expand(dataset, args.order, args.prune, args.max_terms)


def cmd_invert(args) -> int:
    dataset, _ = _load(args.input)
    xs = _grid(args)
    exp = _expand(args, dataset)
    xstar = kernel.convergence_abscissa(dataset)
    _diag(f"convergence abscissa: {xstar:.6g}")
    _diag(f"generations: {exp.generations_computed} (terms: {len(exp)})")
    if args.dump_terms:
        Path(args.dump_terms).write_text(exp.dumps() + "\n")
    _emit(kernel.potential_csv(exp, xs), args.output)
    return EXIT_OK


def cmd_stability(args) -> int:
    dataset, _ = _load(args.input)
    pert = stability.PerturbationSpec.relative(dataset, args.perturb)
    report = stability.lyapunov_report(dataset, pert, args.iterations, args.margin)
    _emit(_json_text(report.to_json()), args.output)
    for e in report:
        _diag(f"A={e.component.amplitude} k={e.component.wavenumber}: "
              f"lambda={e.closed_form_exponent:.6g} growth={e.growth_rate:.6g} -> {e.classification.value}")
    return EXIT_OK if report.all_stable else EXIT_FLAGGED


def cmd_filter(args) -> int:
    dataset, rows = _load(args.input)
    pert = stability.PerturbationSpec.relative(dataset, args.perturb)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        kept, removed, report = stability.filter_stable(dataset, args.margin, pert, args.iterations)
    if len(rows) == len(dataset):
        # no merging happened: pass the kept rows through untouched
        stable = [e.classification is stability.Classification.STABLE for e in report]
        components = [row for row, keep in zip(rows, stable) if keep]
    else:
        components = spectrum.dataset_to_json(kept)["components"]
    _emit(_json_text({"components": components, "report": report.to_json()}), args.output)
    _diag(f"kept {len(kept)} of {len(dataset)} components, removed {len(removed)}")
    if report.all_unstable:
        _diag("warning: no stable component survived")
        return EXIT_FLAGGED
    return EXIT_OK


def cmd_oracle_compare(args) -> int:
    dataset, _ = _load(args.input)
    xs = _grid(args)
    exp = _expand(args, dataset)
    rep = oracle.compare(exp, dataset, xs, args.grid, args.length)
    _emit(_json_text(rep.to_json()), args.output)
    _diag(f"max relative error: {rep.max_rel_err:.3e}")
    if rep.divergent_points:
        _diag(f"series divergent at {len(rep.divergent_points)} point(s) below x* = {rep.abscissa:.6g}")
        return EXIT_FLAGGED
    return EXIT_OK if rep.max_rel_err < args.tolerance else EXIT_FLAGGED


def figure_table(name: str, xs: np.ndarray, order: int, prune: float) -> tuple[np.ndarray, np.ndarray]:
    """``K(x, x)`` for the reference depth and the perturbed depth of a figure."""
    beta, _ = FIGURES[name]
    curves = []
    for d in FIGURE_DEPTHS:
        ds = spectrum.validate_dataset([(2.0 * d, 1j * beta)])
        curves.append(kernel.eval_diagonal(recursion.expand(ds, order, prune), xs))
    return curves[0], curves[1]


def cmd_figures(args) -> int:
    beta, default_range = FIGURES[args.figure]
    xs = _grid(args, default_range)
    ref, pert = figure_table(args.figure, xs, args.order, args.prune)
    lines = [
        f"# figure: {args.figure}; beta={beta}; d={FIGURE_DEPTHS[0]} and d={FIGURE_DEPTHS[1]}; "
        f"order={args.order}",
    ]
    if args.figure in FIGURE_DISPLAY_SCALE:
        lines.append(
            f"# display_scale: {FIGURE_DISPLAY_SCALE[args.figure]:g} "
            "(reference plot scaling; values below are unscaled)"
        )
    lines.append("x,k_d1_re,k_d1_im,k_d099_re,k_d099_im")
    for x, a, b in zip(xs, ref, pert):
        lines.append(",".join(repr(float(v)) for v in (x, a.real, a.imag, b.real, b.imag)))
    _emit("\n".join(lines) + "\n", args.output)
    diff = np.max(np.abs(ref - pert))
    _diag(f"max |K_d1 - K_d099| = {diff:.3e} ({diff / np.max(np.abs(ref)):.3e} of peak)")
    return EXIT_OK


def cmd_fit(args) -> int:
    samples = spectrum.load_samples(args.input)
    try:
        ks = [complex(tok.strip().replace("i", "j")) for tok in args.wavenumbers.split(",") if tok.strip()]
    except ValueError as exc:
        raise spectrum.SpectrumError(f"bad --wavenumbers: {exc}") from exc
    res = spectrum.fit_amplitudes(samples, ks)
    _diag(f"residual norm: {res.residual_norm:.3e}; condition: {res.condition:.3e}")
    _emit(_json_text(spectrum.dataset_to_json(res.dataset)), args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="dataset JSON (samples CSV for fit)")
    common.add_argument("--output", help="output path (default: stdout)")
    common.add_argument("--order", type=int, default=recursion.DEFAULT_MAX_GENERATION,
                        help="maximum number of generations")
    common.add_argument("--prune", type=float, default=recursion.DEFAULT_PRUNE_TOLERANCE)
    common.add_argument("--max-terms", type=int, default=recursion.DEFAULT_TERM_BUDGET,
                        help="live-term budget per generation")
    common.add_argument("--x-min", type=float, default=None)
    common.add_argument("--x-max", type=float, default=None)
    common.add_argument("--samples", type=int, default=101)
    common.add_argument("--margin", type=float, default=stability.DEFAULT_MARGIN)
    common.add_argument("--perturb", type=float, default=stability.DEFAULT_RELATIVE_PERTURBATION,
                        help="relative amplitude perturbation")
    common.add_argument("--iterations", type=int, default=stability.DEFAULT_ITERATIONS)

    parser = argparse.ArgumentParser(
        prog="marchenko",
        description="Marchenko inversion of exponential-sum data via coefficient recursion.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("invert", parents=[common], help="kernel diagonal and potential on a grid")
    p.add_argument("--dump-terms", metavar="PATH", help="write the expansion terms as JSON")
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("stability", parents=[common], help="Lyapunov report per component")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("filter", parents=[common], help="keep only stable components")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("oracle-compare", parents=[common], help="series against direct solve")
    p.add_argument("--grid", type=int, default=oracle.DEFAULT_GRID_SIZE, help="quadrature nodes")
    p.add_argument("--length", type=float, default=None, help="truncation point L (default: automatic)")
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(func=cmd_oracle_compare)

    p = sub.add_parser("figures", parents=[common], help="single-component reference curves")
    p.add_argument("--figure", choices=sorted(FIGURES), required=True)
    p.set_defaults(func=cmd_figures)

    p = sub.add_parser("fit", parents=[common], help="amplitudes from sampled data")
    p.add_argument("--wavenumbers", required=True, help="comma-separated complex values, e.g. '10j,1j'")
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except spectrum.SpectrumError as exc:
        _diag(f"error: {exc}")
        return EXIT_USAGE
    except kernel.DivergentRegion as exc:
        _diag(f"error: {exc}")
        _diag(f"convergence abscissa: {exc.abscissa:.6g}")
        return EXIT_DIVERGENT
    except recursion.TermBudgetExceeded as exc:
        _diag(f"error: {exc}")
        return EXIT_BUDGET
    except oracle.SingularOperator as exc:
        _diag(f"error: {exc}")
        return EXIT_SINGULAR
    except oracle.TruncationInsufficient as exc:
        _diag(f"error: {exc}")
        return EXIT_USAGE
    except ValueError as exc:
        # remaining argument-range errors (order, iterations, grid size)
        _diag(f"error: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
