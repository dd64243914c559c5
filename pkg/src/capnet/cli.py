"""Command-line surface: bound reports, compression, estimation, demos, suites.

Exit codes: 0 success, 1 usage, 2 parse/shape error, 3 verification failure,
4 numerical failure.  All commands are deterministic for a fixed RunConfig
(including the seed); CAPNET_THREADS may cap the worker count but can never
change results (computations run on a single worker).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import bounds, compress, lowerbound, matlin, rademacher, verify
from .errors import NumericalError, ParseError, ShapeError, VerificationError
from .network import (Dataset, Layer, Network, load_dataset, load_network,
                      profile, save_network)

_FMT = bounds._fmt


def worker_cap() -> int:
    """Parsed CAPNET_THREADS; a cap on workers (speed only, never results)."""
    raw = os.environ.get("CAPNET_THREADS", "")
    try:
        return max(1, int(raw)) if raw else 1
    except ValueError:
        return 1


@dataclass(frozen=True)
class RunConfig:
    """Resolved options for one CLI invocation (defaults are printed in
    report headers so no run is ambiguous)."""

    command: str
    p: float = 2.0
    gamma: float = 1.0
    r: int | None = None
    seed: int = 42
    samples: int = 0
    restarts: int = 8
    steps: int = 500
    fmt: str = "table"
    B: float | None = None
    override_gamma: float | None = None
    override_m: float | None = None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _parse_p(text: str) -> float:
    p = math.inf if text.strip().lower() in ("inf", "infinity") else float(text)
    if not math.isinf(p):
        matlin.schatten(p)  # validates the domain
    return p


def _float_list(text: str) -> list[float]:
    return [_parse_p(tok) for tok in text.split(",") if tok.strip()]


def _int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([
            v if isinstance(v, str)
            else _FMT(v) if isinstance(v, (float, np.floating))
            else str(v)
            for v in row
        ])
    return buf.getvalue()


def build_parser() -> _Parser:
    parser = _Parser(prog="capnet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, network=False, data=False):
        if network:
            sp.add_argument("--network", required=True, help="network JSON file")
        if data:
            sp.add_argument("--data", help="dataset JSON file")
        sp.add_argument("--p", type=_parse_p, default=2.0,
                        help="Schatten exponent in [1, 64] or inf (default 2)")
        sp.add_argument("--gamma", type=float, default=1.0, help="margin parameter")
        sp.add_argument("--gamma-cap", type=float, default=None,
                        help="upper cap applied to gamma")
        sp.add_argument("--seed", type=int, default=42)
        sp.add_argument("--samples", type=int, default=None)
        sp.add_argument("--restarts", type=int, default=8)
        sp.add_argument("--steps", type=int, default=500)
        sp.add_argument("--format", dest="fmt", choices=("table", "structured", "csv"),
                        default="table")
        sp.add_argument("--out", default=None, help="output file (default stdout)")
        sp.add_argument("--override-Gamma", dest="override_gamma", type=float, default=None,
                        help="what-if spectral-norm product")
        sp.add_argument("--override-M", dest="override_m", type=float, default=None,
                        help="what-if Schatten-norm product")

    sp = sub.add_parser("report", help="evaluate every applicable bound")
    common(sp, network=True, data=True)
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("compress", help="rank-1 layer replacement with certificate")
    common(sp, network=True, data=True)
    sp.add_argument("--r", type=int, required=True, help="replacement depth budget")
    sp.add_argument("--B", type=float, default=None, help="domain radius when no dataset")
    sp.set_defaults(func=cmd_compress)

    sp = sub.add_parser("rademacher", help="Monte Carlo complexity of the norm-ball class")
    common(sp, network=True, data=True)
    sp.set_defaults(func=cmd_rademacher)

    sp = sub.add_parser("lowerbound", help="construction-vs-floor ratio table (CSV)")
    common(sp)
    sp.add_argument("--h-grid", type=_int_list, default=[2, 4, 8])
    sp.add_argument("--m-grid", type=_int_list, default=[8, 16])
    sp.add_argument("--p-grid", type=_float_list, default=[1.0, 2.0, math.inf])
    sp.set_defaults(func=cmd_lowerbound)

    sp = sub.add_parser("sweep", help="depth sweep with pinned norm products (CSV)")
    common(sp, network=False, data=True)
    sp.add_argument("--depths", type=_int_list, default=list(range(2, 65)))
    sp.add_argument("--family", choices=("ultrathin", "random"), default="ultrathin")
    sp.add_argument("--product", type=float, default=1.0,
                    help="pinned Frobenius-norm product")
    sp.add_argument("--m", type=int, default=16, help="synthesised sample count")
    sp.add_argument("--B", type=float, default=1.0, help="synthesised data radius")
    sp.add_argument("--dim", type=int, default=4, help="synthesised input dimension")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("verify", help="run property suites")
    sp.add_argument("--suite", choices=tuple(verify.SUITES) + ("all",), default="all")
    sp.set_defaults(func=cmd_verify)
    return parser


def _config(args, command: str) -> RunConfig:
    gamma = args.gamma
    if getattr(args, "gamma_cap", None) is not None:
        gamma = min(gamma, args.gamma_cap)
    return RunConfig(
        command=command, p=args.p, gamma=gamma, r=getattr(args, "r", None),
        seed=args.seed, samples=args.samples if args.samples is not None else 0,
        restarts=args.restarts, steps=args.steps, fmt=args.fmt,
        B=getattr(args, "B", None),
        override_gamma=args.override_gamma, override_m=args.override_m,
    )


def cmd_report(args) -> int:
    cfg = _config(args, "report")
    if not args.data:
        raise ParseError("report requires --data")
    net = load_network(args.network)
    data = load_dataset(args.data)
    report = bounds.report_for(net, data, p=cfg.p, gamma=cfg.gamma,
                               gamma_override=cfg.override_gamma,
                               schatten_override=cfg.override_m)
    if cfg.fmt == "table":
        text = f"# defaults: p={_FMT(cfg.p)} gamma={_FMT(cfg.gamma)} seed={cfg.seed}\n" \
            + report.render_table()
    elif cfg.fmt == "structured":
        text = report.render_structured()
    else:
        text = report.render_csv()
    _emit(text, args.out)
    return 0


def cmd_compress(args) -> int:
    cfg = _config(args, "compress")
    net = load_network(args.network)
    if args.data:
        B = load_dataset(args.data).radius
        b_source = "dataset"
    elif cfg.B is not None:
        B = cfg.B
        b_source = "user"
    else:
        raise ParseError("compress needs --data or --B for the domain radius")
    if math.isinf(cfg.p):
        raise ParseError("compress needs a finite Schatten exponent")
    compressed, cert = compress.rank1_replace(
        net, p=cfg.p, r=cfg.r, B=B,
        gamma_override=cfg.override_gamma, schatten_override=cfg.override_m,
    )
    samples = cfg.samples or 1000
    observed = compress.verify_certificate(net, compressed, cert, B=B,
                                           samples=samples, seed=cfg.seed)
    lines = [
        f"replaced layer {cert.r_prime} of {net.depth} (requested r={cert.r_requested})",
        f"degenerate_zero={str(cert.degenerate_zero).lower()} B={_FMT(B)} ({b_source})",
        f"lemma_bound={_FMT(cert.lemma_bound)}",
        f"theorem_bound={_FMT(cert.theorem_bound)}",
        f"observed_deviation={_FMT(observed)} ({samples} samples, seed {cfg.seed})",
    ]
    if args.out:
        save_network(compressed, args.out)
        with open(args.out + ".cert.json", "w", encoding="utf-8") as fh:
            json.dump(cert.to_obj(), fh, indent=1)
            fh.write("\n")
        lines.append(f"wrote {args.out} and {args.out}.cert.json")
    sys.stdout.write("\n".join(lines) + "\n")
    return 0


def _ball_class(net: Network, p: float) -> rademacher.ClassSpec:
    """The norm-ball class induced by a network's own per-layer norms."""
    kind = matlin.schatten(p)
    cons = []
    for layer in net.layers:
        radius = matlin.matrix_norm(layer.weight, kind)
        if radius <= 0:
            raise ShapeError("a zero layer induces an empty ball class")
        cons.append((matlin.BallConstraint(kind, radius),))
    return rademacher.ClassSpec(template=net, constraints=tuple(cons))


def cmd_rademacher(args) -> int:
    cfg = _config(args, "rademacher")
    if not args.data:
        raise ParseError("rademacher requires --data")
    net = load_network(args.network)
    data = load_dataset(args.data)
    spec = _ball_class(net, cfg.p)
    est = rademacher.mc_rademacher(spec, data, epsilon_samples=cfg.samples or 32,
                                   restarts=cfg.restarts, steps=cfg.steps, seed=cfg.seed)
    obj = {
        "value": est.value, "method": est.method, "epsilon_samples": est.epsilon_samples,
        "sup_restarts": est.sup_restarts, "sup_steps": est.sup_steps,
        "std_error": est.std_error, "seed": est.seed, "p": cfg.p,
    }
    if cfg.fmt == "structured":
        text = json.dumps(obj, indent=1) + "\n"
    elif cfg.fmt == "csv":
        text = _csv_text(list(obj), [list(obj.values())])
    else:
        text = "".join(f"{k}: {_FMT(v) if isinstance(v, float) else v}\n"
                       for k, v in obj.items())
    _emit(text, args.out)
    return 0


def cmd_lowerbound(args) -> int:
    cfg = _config(args, "lowerbound")
    rows = lowerbound.demonstrate_lower_bound(
        h_grid=args.h_grid, m_grid=args.m_grid, p_grid=args.p_grid,
        seed=cfg.seed, samples=cfg.samples,
    )
    header = ["h", "m", "p", "diag_value", "scalar_value", "bound_lower", "ratio"]
    text = _csv_text(header, [[r["h"], r["m"], _FMT(r["p"]), r["diag_value"],
                               r["scalar_value"], r["bound_lower"], r["ratio"]]
                              for r in rows])
    _emit(text, args.out)
    return 0


def _ultrathin(depth: int, dim: int, product: float, seed: int) -> Network:
    """Depth-d chain: one row vector then positive scalars, all Frobenius
    norms equal to product^(1/d)."""
    per = product ** (1.0 / depth)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0,)))
    v = rng.standard_normal(dim)
    v *= per / float(np.linalg.norm(v))
    layers = [Layer(weight=v[None, :], activation="relu" if depth > 1 else None)]
    for j in range(2, depth + 1):
        layers.append(Layer(weight=np.array([[per]]),
                            activation="relu" if j < depth else None))
    return Network(layers=tuple(layers), input_dim=dim)


def _random_family(depth: int, dim: int, product: float, seed: int) -> Network:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1, depth)))
    net = verify.random_net(rng, depth=depth, max_width=6, scalar_output=True,
                            input_dim=dim)
    per = product ** (1.0 / depth)
    layers = [
        Layer(weight=l.weight * (per / matlin.matrix_norm(l.weight, matlin.FROBENIUS)),
              activation=l.activation)
        for l in net.layers
    ]
    return Network(layers=tuple(layers), input_dim=dim)


def _sphere_dataset(m: int, dim: int, radius: float, seed: int) -> Dataset:
    pts = np.empty((m, dim))
    for i in range(m):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(2, i)))
        v = rng.standard_normal(dim)
        pts[i] = radius * v / float(np.linalg.norm(v))
    return Dataset(points=pts)


def cmd_sweep(args) -> int:
    cfg = _config(args, "sweep")
    if any(d < 1 for d in args.depths):
        raise ParseError("depths must be positive")
    if args.data:
        data = load_dataset(args.data)
    else:
        data = _sphere_dataset(args.m, args.dim, args.B, cfg.seed)
    B, m = data.radius, data.m
    rows = []
    active_plateau = []
    for d in args.depths:
        if args.family == "ultrathin":
            net = _ultrathin(d, data.dim, args.product, cfg.seed)
        else:
            net = _random_family(d, data.dim, args.product, cfg.seed)
        prof = profile(net, 2.0)
        ney = bounds.bound_frobenius_exp_depth(prof, B, m)
        sqd = bounds.bound_frobenius_sqrt_depth(prof, data)
        free = bounds.bound_frobenius_depth_free(prof, B, m, cfg.gamma)
        first = bounds.logbar(m) ** 0.75 * math.sqrt(
            bounds.logbar(prof.frobenius_product / prof.gamma)) / m ** 0.25
        second = math.sqrt(d / m)
        if args.family == "ultrathin" and first < second:
            active_plateau.append(free)
        mc_val, mc_err = "", ""
        if cfg.samples:
            spec = _ball_class(net, 2.0)
            est = rademacher.mc_rademacher(spec, data, epsilon_samples=cfg.samples,
                                           restarts=cfg.restarts, steps=cfg.steps,
                                           seed=cfg.seed)
            mc_val, mc_err = est.value, est.std_error
        rows.append([d, ney, sqd, free, mc_val, mc_err])
    if active_plateau and max(active_plateau) - min(active_plateau) >= 1e-9:
        raise VerificationError(
            "depth-free column varies across depths while its first branch is active"
        )
    text = _csv_text(
        ["depth", "frobenius_exp_depth", "frobenius_sqrt_depth",
         "frobenius_depth_free", "mc_estimate", "mc_std_error"], rows)
    _emit(text, args.out)
    return 0


def cmd_verify(args) -> int:
    names = list(verify.SUITES) if args.suite == "all" else [args.suite]
    results = verify.run_suites(names)
    failed = False
    for res in results:
        status = "PASS" if res.ok else "FAIL"
        detail = f" ({res.detail})" if res.detail else ""
        sys.stdout.write(f"{status} {res.label}{detail}\n")
        failed = failed or not res.ok
    return 3 if failed else 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"capnet: missing file: {exc.filename}", file=sys.stderr)
        return 2
    except (ParseError, ShapeError) as exc:
        print(f"capnet: {exc}", file=sys.stderr)
        return 2
    except VerificationError as exc:
        print(f"capnet: verification failed: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"capnet: numerical failure: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"capnet: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
