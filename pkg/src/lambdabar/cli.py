"""Command-line front end: spectra, solves, studies, sweeps, verification.

Subcommands: spectrum, solve, klein-g0, mobius, teich, maximize, sweep,
verify-all.  Options may come from a flat key=value config file (--config),
overridden by flags.  Data files are byte-identical for identical
configuration and seed; every run writes a manifest with per-file sha256
digests next to its output, and report tables get a rendered figure
alongside unless --no-plot.

Exit codes: 0 success, 1 usage error, 2 failed checks.  The environment
variable LAMBDABAR_THREADS caps BLAS/OpenMP threads (set before heavy
imports); LAMBDABAR_CORRUPT_SOLVER is a test hook that skews the Galerkin
solver so failure paths can be exercised.
"""

from __future__ import annotations

import argparse
import os
import sys

USAGE_EXIT = 1
CHECK_EXIT = 2


def _apply_thread_env() -> None:
    threads = os.environ.get("LAMBDABAR_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)


_apply_thread_env()


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(USAGE_EXIT)


def _parse_pair(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 'a,b', got {text!r}")
    return float(parts[0]), float(parts[1])


def _parse_floats(text: str) -> list[float]:
    return [float(p) for p in text.split(",") if p.strip()]


def read_config(path: str) -> dict:
    """Flat key=value file; '#' comments; '-' and '_' interchangeable."""
    out = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"malformed config line: {raw.rstrip()}")
            key, value = line.split("=", 1)
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def build_parser() -> _Parser:
    parser = _Parser(prog="lambdabar",
                     description="Normalized first Laplace eigenvalue "
                                 "laboratory for flat tori and Klein bottles.")
    sub = parser.add_subparsers(dest="command", required=True)
    parser._subcommands = {}

    def add_parser(name, **kw):
        p = sub.add_parser(name, **kw)
        p.error = parser.error  # usage errors exit 1, not argparse's 2
        parser._subcommands[name] = p
        return p

    def common(p):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--output", help="output file (JSON or CSV)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--no-plot", action="store_true",
                       help="skip the figure next to the output table")

    p = add_parser("spectrum", help="closed-form flat spectrum")
    common(p)
    p.add_argument("--torus", type=_parse_pair, metavar="A,B")
    p.add_argument("--klein", type=float, metavar="B")
    p.add_argument("--count", type=int, default=10)

    p = add_parser("solve", help="Galerkin solve for a density")
    common(p)
    p.add_argument("--torus", type=_parse_pair, metavar="A,B")
    p.add_argument("--klein", type=float, metavar="B")
    p.add_argument("--factor", default="one",
                   help="one | cosx:AMP | wp | wp:T (elliptic pullback)")
    p.add_argument("--factor-csv", help="sampled-grid CSV (columns x,y,f)")
    p.add_argument("--bandwidth", type=int, default=8)
    p.add_argument("--resolution", type=int)
    p.add_argument("--count", type=int, default=6)
    p.add_argument("--dump-factor", action="store_true",
                   help="also export the sampled factor as CSV")

    p = add_parser("klein-g0", help="extremal Klein-bottle tone")
    common(p)
    p.add_argument("--resolution", type=int, default=1024)
    p.add_argument("--structure",
                   choices=["torus", "klein-reflection", "klein-reciprocal"])

    p = add_parser("mobius", help="dilation-flow studies")
    common(p)
    p.add_argument("--study", choices=["degeneration", "monotonicity"],
                   default="degeneration")
    p.add_argument("--t-grid", type=_parse_floats, default=[0.0, 0.5, 0.9],
                   metavar="T1,T2,...")
    p.add_argument("--bandwidth", type=int,
                   help="default 12 (degeneration) / 8 (monotonicity)")
    p.add_argument("--resolution", type=int,
                   help="default 512 (degeneration) / 128 (monotonicity)")

    p = add_parser("teich", help="distance and continuity certificate")
    common(p)
    p.add_argument("--tori", nargs=2, type=_parse_pair, metavar=("A1,B1", "A2,B2"))
    p.add_argument("--klein", nargs=2, type=float, metavar=("B1", "B2"))

    p = add_parser("maximize", help="maximize lambda1*area in a class")
    common(p)
    p.add_argument("--modulus", type=_parse_pair, metavar="A,B")
    p.add_argument("--klein", type=float, metavar="B")
    p.add_argument("--bandwidth", type=int, default=6,
                   help="solver bandwidth")
    p.add_argument("--opt-bandwidth", type=int, default=2)
    p.add_argument("--budget", type=int, default=2000)
    p.add_argument("--start", choices=["flat", "random"], default="flat")

    p = add_parser("sweep", help="flat or optimized moduli sweeps")
    common(p)
    p.add_argument("--torus-b", type=_parse_floats, metavar="B1,B2,...")
    p.add_argument("--torus-a", type=float, default=0.0)
    p.add_argument("--klein-b", type=_parse_floats, metavar="B1,B2,...")
    p.add_argument("--optimize", action="store_true",
                   help="run the in-class maximizer per grid point")
    p.add_argument("--budget", type=int, default=60)
    p.add_argument("--bandwidth", type=int, default=6)

    p = add_parser("verify-all", help="run the acceptance suite")
    common(p)
    p.add_argument("--quick", action="store_true",
                   help="sub-minute subset of the criteria")
    return parser


def _with_config(parser: _Parser, argv) -> argparse.Namespace:
    probe = _Parser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if known.config:
        cfg = read_config(known.config)
        coerced = {}
        for key, value in cfg.items():
            if key in ("torus", "modulus", "tori"):
                coerced[key] = _parse_pair(value)
            elif key in ("t_grid", "torus_b", "klein_b"):
                coerced[key] = _parse_floats(value)
            elif key in ("no_plot", "optimize", "quick", "dump_factor"):
                coerced[key] = value.lower() in ("1", "true", "yes")
            elif key in ("count", "bandwidth", "resolution", "seed",
                         "budget", "opt_bandwidth"):
                coerced[key] = int(value)
            elif key in ("klein",):
                coerced[key] = float(value)
            else:
                coerced[key] = value
        parser.set_defaults(**coerced)
        # subparsers build their own namespaces, so defaults go there too
        for sp in parser._subcommands.values():
            sp.set_defaults(**coerced)
    return parser.parse_args(argv)


def _emit(args, payload: dict = None, rows: list = None, header: list = None,
          figure=None, manifest=None, extra_files=()):
    """Write output (JSON payload or CSV rows), figure, and manifest."""
    from .reporting import RunManifest, write_csv, write_json

    out = args.output
    if manifest is None:
        manifest = RunManifest(command=args.command, config=_config_echo(args))
    if out:
        if rows is not None:
            write_csv(out, header, rows)
        else:
            write_json(out, payload)
        manifest.add_file(out, "data")
        for path in extra_files:
            manifest.add_file(path, "data")
        if figure is not None and not args.no_plot:
            fig_path = os.path.splitext(out)[0] + ".png"
            figure(fig_path)
            manifest.add_file(fig_path, "figure")
        manifest_path = os.path.splitext(out)[0] + ".manifest.json"
        manifest.write(manifest_path)
    else:
        import json

        from .reporting import _jsonable
        if rows is not None:
            print(",".join(header))
            for row in rows:
                print(",".join(str(row.get(h, "")) if isinstance(row, dict)
                               else str(v) for h, v in
                               zip(header, row if not isinstance(row, dict)
                                   else [row.get(h) for h in header])))
        else:
            print(json.dumps(_jsonable(payload), indent=2, sort_keys=True))
    return manifest


def _config_echo(args) -> dict:
    skip = {"command", "config"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _require_base(args, parser):
    from .lattices import KleinModulus, TorusModulus

    torus = getattr(args, "torus", None) or getattr(args, "modulus", None)
    klein = getattr(args, "klein", None)
    if (torus is None) == (klein is None):
        parser.error("specify exactly one of --torus/--modulus or --klein")
    if torus is not None:
        from .lattices import Lattice, reduce_to_fundamental_domain
        a, b = torus
        try:
            return TorusModulus(a, b)
        except ValueError:
            lat = Lattice([1.0, 0.0], [a, b])
            return reduce_to_fundamental_domain(lat)
    return KleinModulus(klein)


def cmd_spectrum(args, parser) -> int:
    import numpy as np

    from .lattices import KleinModulus, TorusModulus, flat_klein_spectrum, flat_torus_spectrum
    from .reporting import render_staircase_figure

    base = _require_base(args, parser)
    if isinstance(base, TorusModulus):
        spec = flat_torus_spectrum(base, args.count)
    else:
        spec = flat_klein_spectrum(base, args.count)
    payload = spec.as_dict()
    payload["multiplicities"] = [[v, m] for v, m in spec.multiplicity_groups()]
    payload["seed"] = args.seed

    def fig(path):
        render_staircase_figure(path, spec.eigenvalues, spec.area,
                                title="flat spectrum counting function")
    _emit(args, payload=payload, figure=fig)
    return 0


def _builtin_factor(name: str, base):
    import numpy as np

    from .galerkin import ConformalFactor
    from .lattices import TorusModulus

    kind, _, param = name.partition(":")
    if kind in ("one", "flat"):
        return ConformalFactor.one(base)
    if kind == "cosx":
        if not isinstance(base, TorusModulus):
            raise ValueError("the cosx factor is defined on tori; use a "
                             "glide-invariant CSV grid for Klein bottles")
        amp = float(param) if param else 0.5
        if not -1.0 < amp < 1.0:
            raise ValueError("cosx amplitude must lie in (-1, 1)")
        return ConformalFactor(
            base, func=lambda x, y: 1.0 + amp * np.cos(2.0 * np.pi * x),
            description=f"1+{amp}cos(2 pi x)")
    if kind == "wp":
        if not isinstance(base, TorusModulus):
            raise ValueError("the elliptic pullback factor needs a torus")
        from .mobius import MobiusMap, disk_automorphism_rapidity, weierstrass_sphere_map
        from .lattices import Lattice
        t = float(param) if param else 0.0
        lat = Lattice([1.0, 0.0], [base.a, base.b])
        smap = weierstrass_sphere_map(lat)
        samples = smap.samples(512)
        dens = samples.density
        if t:
            gamma = MobiusMap.dilation(disk_automorphism_rapidity(t),
                                       np.array([0.0, 1.0, 0.0]))
            dens = dens * gamma.conformal_scale(samples.points) ** 2
        return ConformalFactor.from_grid(base, dens.reshape(512, 512),
                                         description=f"wp pullback t={t}")
    raise ValueError(f"unknown factor {name!r}")


def _factor_from_csv(path: str, base):
    import numpy as np

    from .galerkin import ConformalFactor

    data = np.loadtxt(path, delimiter=",", skiprows=1)
    if data.ndim != 2 or data.shape[1] != 3:
        raise ValueError("factor CSV must have columns x,y,f")
    n = int(round(np.sqrt(data.shape[0])))
    if n * n != data.shape[0]:
        raise ValueError("factor CSV must hold a square midpoint grid")
    return ConformalFactor.from_grid(base, data[:, 2].reshape(n, n),
                                     description=f"csv:{os.path.basename(path)}")


def _dump_factor_csv(path: str, factor) -> str:
    import numpy as np

    from .galerkin import midpoint_grid
    from .reporting import write_csv

    n = factor.values.shape[0] if factor.values is not None else 128
    vals = factor.sample(n)
    s, t = midpoint_grid(n)
    basis = factor.cover_lattice_basis()
    x = basis[0, 0] * s + basis[0, 1] * t
    y = basis[1, 0] * s + basis[1, 1] * t
    rows = zip(x.ravel(), y.ravel(), vals.ravel())
    return write_csv(path, ["x", "y", "f"], rows)


def cmd_solve(args, parser) -> int:
    from .galerkin import assemble
    from .reporting import render_staircase_figure

    base = _require_base(args, parser)
    if args.factor_csv:
        factor = _factor_from_csv(args.factor_csv, base)
    else:
        factor = _builtin_factor(args.factor, base)
    problem = assemble(factor, args.bandwidth, args.resolution)
    spec = problem.spectrum(args.count)
    payload = spec.as_dict()
    payload.update(seed=args.seed, factor=factor.description,
                   bandwidth=args.bandwidth, resolution=problem.resolution)
    extra = []
    if args.dump_factor and args.output:
        extra.append(_dump_factor_csv(
            os.path.splitext(args.output)[0] + ".factor.csv", factor))

    def fig(path):
        render_staircase_figure(path, spec.eigenvalues, spec.area,
                                title=f"spectrum, f = {factor.description}")
    _emit(args, payload=payload, figure=fig, extra_files=extra)
    return 0


def cmd_klein_g0(args, parser) -> int:
    import numpy as np

    from .reporting import render_curve_figure
    from .revolution import (QUOTIENT_CANDIDATES, _IsothermalCircle,
                             SturmLiouvilleProblem, klein_g0_lambda1bar,
                             maximal_klein_metric)

    res = klein_g0_lambda1bar(args.resolution, structure=args.structure)
    payload = res.as_dict()
    payload["seed"] = args.seed

    def fig(path):
        metric = maximal_klein_metric()
        struct = next(c for c in QUOTIENT_CANDIDATES if c.name == res.structure)
        iso = (_IsothermalCircle(metric, min(args.resolution, 512))
               if struct.parity_rule == "reciprocal" else None)
        mus, tones = [], []
        for mu, parity in struct.frequencies(8):
            if iso is not None:
                vals = iso.solve(mu, parity, count=4)
            else:
                vals = SturmLiouvilleProblem(
                    metric, mu, min(args.resolution, 512)).solve(4, parity)
            pos = vals[vals > 1e-9]
            if pos.size:
                mus.append(mu)
                tones.append(float(pos[0]))
        render_curve_figure(path, mus, tones, "fiber frequency",
                            "first eigenvalue",
                            title=f"reduced problems, {res.structure}",
                            hline=res.lambda1, hline_label="adopted lambda1")
    _emit(args, payload=payload, figure=fig)
    return 0 if not res.ambiguous else CHECK_EXIT


def cmd_mobius(args, parser) -> int:
    import numpy as np

    from .reporting import render_curve_figure

    header = ["t", "area", "lambda1", "lambda1bar"]
    if args.study == "degeneration":
        from .mobius import mobius_degeneration_study
        rows = mobius_degeneration_study(t_grid=args.t_grid,
                                         bandwidth=args.bandwidth,
                                         resolution=args.resolution)
    else:
        from .galerkin import ConformalFactor, assemble
        from .lattices import square_modulus
        from .mobius import MobiusMap, clifford_torus_map
        smap = clifford_torus_map()
        rows = []
        for t in args.t_grid:
            samples = smap.samples(args.resolution)
            dens = samples.density
            if t:
                gamma = MobiusMap.dilation(float(t), np.array([1.0, 0, 0, 0]))
                dens = dens * gamma.conformal_scale(samples.points) ** 2
            # lattice coordinates rescale the 2 pi x 2 pi square to the unit
            # torus; the conformal factor absorbs the Jacobian
            vals = (2.0 * np.pi) ** 2 * dens.reshape(args.resolution,
                                                     args.resolution)
            factor = ConformalFactor.from_grid(square_modulus(), vals,
                                               description=f"clifford t={t}")
            spec = assemble(factor, args.bandwidth).spectrum(3)
            rows.append({"t": float(t), "area": spec.area,
                         "lambda1": spec.lambda1,
                         "lambda1bar": spec.lambda1_bar})

    def fig(path):
        render_curve_figure(path, [r["t"] for r in rows],
                            [r["lambda1"] for r in rows], "t", "lambda1",
                            title=f"{args.study} along the dilation flow")
    _emit(args, rows=rows, header=header, figure=fig)
    return 0


def cmd_teich(args, parser) -> int:
    from .lattices import KleinModulus, TorusModulus
    from .teich import continuity_certificate

    if (args.tori is None) == (args.klein is None):
        parser.error("specify exactly one of --tori or --klein")
    if args.tori:
        (a1, b1), (a2, b2) = args.tori
        cert = continuity_certificate(TorusModulus(a1, b1),
                                      TorusModulus(a2, b2))
    else:
        b1, b2 = args.klein
        cert = continuity_certificate(KleinModulus(b1), KleinModulus(b2))
    payload = cert.as_dict()
    payload["seed"] = args.seed
    _emit(args, payload=payload)
    return 0 if cert.passed else CHECK_EXIT


def cmd_maximize(args, parser) -> int:
    from .maximize import maximize_in_class
    from .reporting import render_trace_figure

    base = _require_base(args, parser)
    report = maximize_in_class(base, opt_bandwidth=args.opt_bandwidth,
                               solver_bandwidth=args.bandwidth,
                               budget=args.budget, seed=args.seed,
                               start=args.start)
    payload = report.as_dict()

    def fig(path):
        render_trace_figure(path, payload["trace"], ceiling=report.ceiling,
                            title="in-class maximization")
    _emit(args, payload=payload, figure=fig)
    return 0 if report.passed else CHECK_EXIT


def cmd_sweep(args, parser) -> int:
    import numpy as np

    from .lattices import (KleinModulus, TorusModulus, flat_klein_spectrum,
                           flat_torus_spectrum)
    from .reporting import render_curve_figure

    if (args.torus_b is None) == (args.klein_b is None):
        parser.error("specify exactly one of --torus-b or --klein-b")
    if args.torus_b:
        moduli = [TorusModulus(args.torus_a, b) for b in args.torus_b]
        xs = args.torus_b
        xlabel = "b (torus ray)"
    else:
        moduli = [KleinModulus(b) for b in args.klein_b]
        xs = args.klein_b
        xlabel = "b (Klein ray)"

    if args.optimize:
        from .maximize import degeneration_sweep
        rows = degeneration_sweep(moduli, per_class_budget=args.budget,
                                  solver_bandwidth=args.bandwidth,
                                  seed=args.seed)
        out_rows = []
        for m, r in zip(moduli, rows):
            modulus = (f"{m.a}:{m.b}" if isinstance(m, TorusModulus)
                       else f"{m.b}")
            out_rows.append({"modulus": modulus,
                             "best_lambda1bar": r["best_lambda1bar"],
                             "budget": r["budget"], "seed": r["seed"]})
        header = ["modulus", "best_lambda1bar", "budget", "seed"]
        ys = [r["best_lambda1bar"] for r in out_rows]
    else:
        out_rows = []
        for m in moduli:
            if isinstance(m, TorusModulus):
                spec = flat_torus_spectrum(m, 2)
                out_rows.append({"a": m.a, "b": m.b, "area": spec.area,
                                 "lambda1": spec.lambda1,
                                 "lambda1bar": spec.lambda1_bar})
                header = ["a", "b", "area", "lambda1", "lambda1bar"]
            else:
                spec = flat_klein_spectrum(m, 2)
                out_rows.append({"b": m.b, "area": spec.area,
                                 "lambda1": spec.lambda1,
                                 "lambda1bar": spec.lambda1_bar})
                header = ["b", "area", "lambda1", "lambda1bar"]
        ys = [r["lambda1bar"] for r in out_rows]

    def fig(path):
        render_curve_figure(path, xs, ys, xlabel, "lambda1 * area",
                            title="fundamental-tone sweep")
    _emit(args, rows=out_rows, header=header, figure=fig)
    return 0


def cmd_verify_all(args, parser) -> int:
    from .acceptance import run_all
    from .reporting import RunManifest, write_json

    results = run_all(quick=args.quick, echo=print)
    payload = {
        "quick": args.quick,
        "seed": args.seed,
        "criteria": [r.as_dict() for r in results],
        "pass": all(r.passed for r in results),
    }
    if args.output:
        manifest = RunManifest(command="verify-all",
                               config=_config_echo(args))
        write_json(args.output, payload)
        manifest.add_file(args.output, "data")
        for r in results:
            manifest.add_check(f"criterion-{r.index}", r.passed, r.detail)
        manifest.write(os.path.splitext(args.output)[0] + ".manifest.json")
    failed = [r.index for r in results if not r.passed]
    if failed:
        print(f"FAILED criteria: {failed}", file=sys.stderr)
        return CHECK_EXIT
    print("all criteria passed")
    return 0


COMMANDS = {
    "spectrum": cmd_spectrum,
    "solve": cmd_solve,
    "klein-g0": cmd_klein_g0,
    "mobius": cmd_mobius,
    "teich": cmd_teich,
    "maximize": cmd_maximize,
    "sweep": cmd_sweep,
    "verify-all": cmd_verify_all,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _with_config(parser, sys.argv[1:] if argv is None else argv)
        return COMMANDS[args.command](args, parser)
    except SystemExit:
        raise
    except (ValueError, FileNotFoundError) as exc:
        print(f"lambdabar: {exc}", file=sys.stderr)
        return USAGE_EXIT


if __name__ == "__main__":
    sys.exit(main())
