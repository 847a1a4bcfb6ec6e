"""Command-line front end.

Subcommands: predict, bounds, witness, brute-class, exponent, borel, report.
Exit codes: 0 success, 2 usage error, 3 theorem hypothesis violated,
4 enumeration budget refused.  Reports go to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .algebra import ExtensionSpec, TruncatedAlgebra
from .errors import (
    BudgetExceeded,
    HypothesisNotSatisfied,
    NoWitness,
    UsageError,
    WeilradError,
)
from .experiments import ExperimentConfig, borel_exponent_experiment, brute_class, brute_exponent
from .field import CoefficientField
from .invariants import (
    FibreSpec,
    certify_class,
    imprimitive_borel_witness,
    is_unusual,
    predict_class,
    superdiagonal_order_witness,
)
from .matgroup import GroupTag
from .report import build_report, load_grid, render_figures, render_pretty, render_tsv


class _StreamAction(argparse.Action):
    """Collects --fibre/--phi-injective occurrences in order, so the flag can
    attach to the nearest preceding unusual fibre."""

    def __call__(self, parser, namespace, values, option_string=None):
        stream = getattr(namespace, "fibre_stream", None)
        if stream is None:
            stream = []
            setattr(namespace, "fibre_stream", stream)
        stream.append((self.dest, values))


def _fibres_from_stream(stream) -> list[FibreSpec]:
    if not stream:
        raise UsageError("at least one --fibre is required")
    fibres: list[FibreSpec] = []
    for kind, value in stream:
        if kind == "fibre":
            fibres.append(FibreSpec.parse(value))
        else:
            for i in range(len(fibres) - 1, -1, -1):
                if is_unusual(fibres[i]):
                    fibres[i] = dataclasses.replace(fibres[i], phi_injective_on_center=True)
                    break
            else:
                raise UsageError("--phi-injective has no preceding unusual fibre to attach to")
    return fibres


def _add_fibre_args(sub):
    sub.add_argument("--fibre", dest="fibre", action=_StreamAction, metavar="SPEC",
                     help="fibre spec, e.g. SL2@p=2;e=1,1 or GL2@p=3;e=1")
    sub.add_argument("--phi-injective", dest="phi", action=_StreamAction, nargs=0,
                     help="assert the central injectivity hypothesis for the "
                          "nearest preceding unusual fibre")


def _add_common(sub):
    sub.add_argument("--format", choices=("json", "tsv", "pretty"), default="json")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--budget", type=int, default=None)
    sub.add_argument("--field", default=None, help="coefficient field, e.g. F2, F4, F9")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="weilrad")
    cmds = parser.add_subparsers(dest="command", required=True)

    p = cmds.add_parser("predict", help="theorem-level class prediction for a list of fibres")
    _add_fibre_args(p)
    _add_common(p)

    p = cmds.add_parser("bounds", help="two-sided class certificate for one fibre")
    _add_fibre_args(p)
    _add_common(p)

    p = cmds.add_parser("witness", help="explicit matrix witnesses for one fibre")
    _add_fibre_args(p)
    _add_common(p)

    p = cmds.add_parser("brute-class", help="lower central series of the finite group of points")
    p.add_argument("--group", required=True, help="GL<n>, SL2, PGL2, T<rank> or Borel2")
    p.add_argument("--ext", required=True, help="extension spec, e.g. p=2;e=1,1")
    _add_common(p)

    p = cmds.add_parser("exponent", help="max p-power element order (exhaustive or sampled)")
    p.add_argument("--group", required=True)
    p.add_argument("--ext", required=True)
    p.add_argument("--samples", type=int, default=4096)
    _add_common(p)

    p = cmds.add_parser("borel", help="Borel-model exponent experiment")
    p.add_argument("--ext", required=True)
    p.add_argument("--samples", type=int, default=4096)
    _add_common(p)

    p = cmds.add_parser("report", help="aggregate document over a grid of configurations")
    p.add_argument("--grid", default=None, help="grid JSON file (default: shipped grid)")
    p.add_argument("--figures", default=None, metavar="DIR",
                   help="also render PNG figures into DIR")
    p.add_argument("--timings", action="store_true", help="include measured wall times")
    _add_common(p)
    return parser


def _emit(data: dict, fmt: str) -> None:
    if fmt == "json":
        sys.stdout.write(json.dumps(data, sort_keys=True, separators=(",", ":")) + "\n")
    elif fmt == "pretty":
        sys.stdout.write(json.dumps(data, sort_keys=True, indent=2) + "\n")
    else:
        lines = ["key\tvalue"]
        flat = json.loads(json.dumps(data, sort_keys=True))

        def walk(prefix, obj):
            if isinstance(obj, dict):
                for k, v in obj.items():
                    walk(f"{prefix}.{k}" if prefix else str(k), v)
            elif isinstance(obj, list):
                for i, v in enumerate(obj):
                    walk(f"{prefix}[{i}]", v)
            else:
                lines.append(f"{prefix}\t{obj}")

        walk("", flat)
        sys.stdout.write("\n".join(lines) + "\n")


def _coeff(args, p: int) -> CoefficientField | None:
    if args.field is None:
        return None
    F = CoefficientField.from_name(args.field)
    if F.p != p:
        raise UsageError(f"field {args.field} has characteristic {F.p}, extension wants {p}")
    return F


def _cmd_predict(args) -> int:
    fibres = _fibres_from_stream(getattr(args, "fibre_stream", None))
    coeff = _coeff(args, fibres[0].extension.p)
    report = predict_class(fibres, coeff)
    data = {"command": "predict"}
    data.update(report.to_json_dict())
    _emit(data, args.format)
    return 0


def _cmd_bounds(args) -> int:
    fibres = _fibres_from_stream(getattr(args, "fibre_stream", None))
    if len(fibres) != 1:
        raise UsageError("bounds wants exactly one --fibre")
    cert = certify_class(fibres[0], _coeff(args, fibres[0].extension.p))
    data = {
        "command": "bounds",
        "fibre": str(fibres[0]),
        "upper": cert.upper,
        "witness_lower": cert.lower,
        "proved": cert.proved,
        "ell": cert.ell,
        "source": cert.source,
    }
    _emit(data, args.format)
    return 0


def _cmd_witness(args) -> int:
    stream = getattr(args, "fibre_stream", None)
    if not stream:
        raise UsageError("at least one --fibre is required")
    raw = stream[0][1]
    data: dict = {"command": "witness"}
    if raw.startswith("Borel2@"):
        ext = ExtensionSpec.parse(raw.split("@", 1)[1])
        A = TruncatedAlgebra(ext, _coeff(args, ext.p))
        data["fibre"] = raw
        try:
            w = imprimitive_borel_witness(A)
            data["borel_witness"] = w.to_json_dict()
            data["order_exponent"] = w.p_power_order()
        except NoWitness as exc:
            data["borel_witness"] = None
            data["reason"] = str(exc)
        _emit(data, args.format)
        return 0
    fibres = _fibres_from_stream(stream)
    fibre = fibres[0]
    cert = certify_class(fibre, _coeff(args, fibre.extension.p))
    data["fibre"] = str(fibre)
    data["class_witness"] = cert.witness.to_json_dict()
    data["ell"] = cert.ell
    A = TruncatedAlgebra(fibre.extension, _coeff(args, fibre.extension.p))
    x = superdiagonal_order_witness(A)
    data["superdiagonal_order_witness"] = x.to_json_dict()
    _emit(data, args.format)
    return 0


def _experiment_config(args) -> ExperimentConfig:
    ext = ExtensionSpec.parse(args.ext)
    tag = GroupTag.parse(args.group) if hasattr(args, "group") else GroupTag.borel2()
    d = 1
    if args.field is not None:
        F = CoefficientField.from_name(args.field)
        if F.p != ext.p:
            raise UsageError(f"field {args.field} has characteristic {F.p}, extension wants {ext.p}")
        d = F.d
    return ExperimentConfig(
        tag=tag,
        extension=ext,
        field_degree=d,
        budget=args.budget,
        seed=args.seed,
        samples=getattr(args, "samples", 4096),
    )


def _cmd_brute_class(args) -> int:
    cfg = _experiment_config(args)
    series = brute_class(cfg)
    data = {"command": "brute-class", "config": cfg.to_json_dict()}
    data.update(series.to_json_dict())
    _emit(data, args.format)
    return 0


def _cmd_exponent(args) -> int:
    cfg = _experiment_config(args)
    res = brute_exponent(cfg)
    data = {"command": "exponent", "config": cfg.to_json_dict()}
    data.update(res.to_json_dict())
    _emit(data, args.format)
    return 0


def _cmd_borel(args) -> int:
    args.group = "Borel2"
    cfg = _experiment_config(args)
    rec = borel_exponent_experiment(cfg)
    data = {"command": "borel"}
    data.update(rec)
    _emit(data, args.format)
    return 0


def _cmd_report(args) -> int:
    grid = load_grid(args.grid)
    report = build_report(grid, seed=args.seed, budget=args.budget, timings=args.timings)
    if args.figures:
        written = render_figures(report, args.figures)
        print(f"wrote {len(written)} figure(s) to {args.figures}", file=sys.stderr)
    if args.format == "tsv":
        sys.stdout.write(render_tsv(report))
    elif args.format == "pretty":
        sys.stdout.write(render_pretty(report))
    else:
        sys.stdout.write(json.dumps(report, sort_keys=True, separators=(",", ":")) + "\n")
    return 0


_DISPATCH = {
    "predict": _cmd_predict,
    "bounds": _cmd_bounds,
    "witness": _cmd_witness,
    "brute-class": _cmd_brute_class,
    "exponent": _cmd_exponent,
    "borel": _cmd_borel,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        return _DISPATCH[args.command](args)
    except BudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except HypothesisNotSatisfied as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except WeilradError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
