"""Grid reports: predictions, certificates, oracle results and bound checks.

The report document is deterministic for a fixed seed; measured wall times
are only included when explicitly requested, so the default JSON output is
byte-stable across runs.
"""

from __future__ import annotations

import json
import time
from importlib import resources

from .algebra import ExtensionSpec, TruncatedAlgebra
from .errors import BudgetExceeded, HypothesisNotSatisfied, UsageError
from .experiments import (
    ExperimentConfig,
    borel_exponent_experiment,
    brute_class,
    brute_exponent,
    stabilization_check,
)
from .field import CoefficientField
from .invariants import (
    FibreSpec,
    certify_class,
    exponent_bound_from_nilpotency,
    exponent_bound_from_rank,
    fibre_class,
)
from .matgroup import GroupTag, unipotent_count


def load_default_grid() -> dict:
    with resources.files("weilrad.data").joinpath("default_grid.json").open("r") as fh:
        return json.load(fh)


def load_grid(path: str | None) -> dict:
    if path is None:
        return load_default_grid()
    try:
        with open(path) as fh:
            grid = json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed grid file {path}: line {exc.lineno} column {exc.colno}") from exc
    if not isinstance(grid, dict) or "rows" not in grid:
        raise UsageError(f"grid file {path} must be a JSON object with a 'rows' list")
    return grid


def _oracle_tag(fibre: FibreSpec) -> GroupTag:
    kind = fibre.kind
    if kind.family == "torus":
        return GroupTag.torus(kind.torus_rank)
    if kind.family == "sl2_torus":
        return GroupTag.sl2()
    if kind.family == "gl":
        return GroupTag.gl(kind.n)
    return GroupTag.pgl2()


def _field_degree(name: str, p: int) -> int:
    F = CoefficientField.from_name(name)
    if F.p != p:
        raise UsageError(f"field {name} has characteristic {F.p}, extension wants {p}")
    return F.d


def _rank_for_bounds(fibre: FibreSpec) -> int | None:
    fam = fibre.kind.family
    if fam == "gl":
        return fibre.kind.n
    if fam in ("sl2_torus", "pgl2"):
        return 2
    return None


def build_row(row: dict, seed: int, budget: int | None, timings: bool) -> dict:
    t0 = time.perf_counter()
    fibre = FibreSpec.parse(row["fibre"], phi_injective=bool(row.get("phi_injective", False)))
    field_name = row.get("field", f"F{fibre.extension.p}")
    d = _field_degree(field_name, fibre.extension.p)
    out: dict = {
        "fibre": str(fibre),
        "field": field_name,
        "degree": fibre.extension.degree,
        "status": "OK",
    }
    try:
        out["ell"] = fibre_class(fibre)
    except HypothesisNotSatisfied:
        out["ell"] = None
        out["status"] = "HYPOTHESIS-UNMET"
    cert = certify_class(fibre)
    out["upper"] = cert.upper
    out["lower"] = cert.lower
    out["proved"] = cert.proved
    out["unusual"] = cert.unusual
    out["witness"] = cert.witness.to_json_dict()

    tag = _oracle_tag(fibre)
    cfg = ExperimentConfig(tag=tag, extension=fibre.extension, field_degree=d,
                           budget=budget, seed=seed)
    count = unipotent_count(tag, cfg.algebra())
    oracle: dict = {"group": str(tag), "count": count}
    if row.get("oracle_class", True):
        try:
            series = brute_class(cfg)
            oracle["class"] = series.class_number
            oracle["sizes"] = list(series.sizes)
            oracle["match"] = (series.class_number == out["ell"]) if out["ell"] is not None else None
        except BudgetExceeded as exc:
            oracle["class"] = None
            oracle["skipped"] = f"budget: {exc.count} > {exc.budget}"
    else:
        oracle["class"] = None
    out["oracle"] = oracle

    A = TruncatedAlgebra(fibre.extension)
    bound_nil = exponent_bound_from_nilpotency(A)
    rank = _rank_for_bounds(fibre)
    exponent: dict = {"bound_nilpotency": bound_nil}
    if rank is not None:
        exponent["bound_rank"] = exponent_bound_from_rank(fibre.extension, rank)
    if fibre.kind.family == "torus":
        exponent["bound_rank"] = exponent_bound_from_rank(fibre.extension, 1)
        exponent["torus_exponent"] = fibre.extension.extension_exponent
    if row.get("oracle_exponent", True):
        res = brute_exponent(cfg)
        exponent["observed"] = res.exponent
        exponent["max_order"] = res.max_order
        exponent["exhaustive"] = res.exhaustive
        dominated = res.exponent <= bound_nil
        if rank is not None:
            dominated = dominated and res.exponent <= exponent["bound_rank"]
        exponent["dominated"] = dominated
    out["exponent"] = exponent

    stab_fields = row.get("stabilize") or []
    if len(stab_fields) >= 2:
        degrees = tuple(_field_degree(n, fibre.extension.p) for n in stab_fields)
        eff_budget = cfg.effective_budget()
        feasible = tuple(
            dd
            for dd in degrees
            if unipotent_count(tag, cfg.algebra(dd)) <= eff_budget
        )
        if len(feasible) >= 2:
            stab_cfg = ExperimentConfig(tag=tag, extension=fibre.extension,
                                        field_degree=feasible[0], budget=budget,
                                        seed=seed, stabilization=feasible)
            out["stabilization"] = stabilization_check(stab_cfg)
            if not out["stabilization"]["stabilized"]:
                out["status"] = "INCONCLUSIVE"
        else:
            out["stabilization"] = {"status": "SKIPPED", "reason": "budget"}
    else:
        out["stabilization"] = None
    out["wall_ms"] = round((time.perf_counter() - t0) * 1000.0, 3) if timings else None
    return out


def build_report(grid: dict, seed: int = 0, budget: int | None = None,
                 timings: bool = False) -> dict:
    rows = [build_row(r, seed, budget, timings) for r in grid.get("rows", [])]
    borel_rows = []
    for spec in grid.get("borel", []):
        t0 = time.perf_counter()
        ext = ExtensionSpec.parse(spec["ext"])
        d = _field_degree(spec.get("field", f"F{ext.p}"), ext.p)
        cfg = ExperimentConfig(tag=GroupTag.borel2(), extension=ext, field_degree=d,
                               budget=budget, seed=seed)
        rec = borel_exponent_experiment(cfg)
        rec["wall_ms"] = round((time.perf_counter() - t0) * 1000.0, 3) if timings else None
        borel_rows.append(rec)
    ok_ells = [r["ell"] for r in rows if r["ell"] is not None]
    violations = []
    for r in rows:
        exp = r.get("exponent", {})
        if exp.get("observed") is not None and not exp.get("dominated", True):
            violations.append(f"{r['fibre']}: exponent {exp['observed']} above bound")
        if r["oracle"].get("match") is False:
            violations.append(f"{r['fibre']}: oracle class {r['oracle']['class']} != ell {r['ell']}")
    for rec in borel_rows:
        if not rec["dichotomy_holds"]:
            violations.append(f"Borel2@{rec['ext']}: dichotomy failed")
    return {
        "command": "report",
        "meta": {
            "seed": seed,
            "budget": budget,
            "timings": timings,
            "row_count": len(rows),
            "borel_count": len(borel_rows),
        },
        "rows": rows,
        "borel": borel_rows,
        "summary": {
            "max_class_predicted": max(ok_ells) if ok_ells else None,
            "rows_ok": sum(1 for r in rows if r["status"] == "OK"),
            "rows_hypothesis_unmet": sum(1 for r in rows if r["status"] == "HYPOTHESIS-UNMET"),
            "violations": violations,
        },
    }


# -- renderers ---------------------------------------------------------------------


_TSV_COLUMNS = (
    "section", "fibre", "field", "status", "ell", "upper", "lower", "proved",
    "oracle_class", "class_match", "exponent", "max_order", "stabilized",
)


def render_tsv(report: dict) -> str:
    lines = ["\t".join(_TSV_COLUMNS)]
    for r in report["rows"]:
        exp = r.get("exponent", {})
        stab = r.get("stabilization")
        lines.append(
            "\t".join(
                str(v)
                for v in (
                    "fibre", r["fibre"], r["field"], r["status"], r["ell"], r["upper"],
                    r["lower"], r["proved"], r["oracle"].get("class"),
                    r["oracle"].get("match"), exp.get("observed"), exp.get("max_order"),
                    (stab or {}).get("status") if stab else None,
                )
            )
        )
    for rec in report["borel"]:
        lines.append(
            "\t".join(
                str(v)
                for v in (
                    "borel", f"Borel2@{rec['ext']}", rec["field"],
                    "OK" if rec["dichotomy_holds"] else "DISCREPANT",
                    None, None, None, None, None, None,
                    rec["exponent"], rec["max_order"], None,
                )
            )
        )
    return "\n".join(lines) + "\n"


def render_pretty(report: dict) -> str:
    out = []
    out.append(f"report: {report['meta']['row_count']} rows, seed {report['meta']['seed']}")
    for r in report["rows"]:
        exp = r.get("exponent", {})
        oracle = r["oracle"]
        bits = [
            f"{r['fibre']:>24s}", f"{r['field']:>4s}", f"{r['status']:<16s}",
            f"ell={r['ell']}", f"bounds=[{r['lower']},{r['upper']}]",
            f"proved={r['proved']}",
        ]
        if oracle.get("class") is not None:
            bits.append(f"oracle={oracle['class']}")
        if exp.get("observed") is not None:
            bits.append(f"maxord={exp['max_order']}")
        out.append("  ".join(bits))
    for rec in report["borel"]:
        out.append(
            f"  Borel2@{rec['ext']:<14s} exponent={rec['exponent']} "
            f"expected={rec['expected_dichotomy']} holds={rec['dichotomy_holds']}"
        )
    summ = report["summary"]
    out.append(f"violations: {len(summ['violations'])}")
    out.extend(f"  ! {v}" for v in summ["violations"])
    return "\n".join(out) + "\n"


def render_figures(report: dict, outdir: str) -> list[str]:
    """PNG figures next to the delimited output: predicted class against the
    extension degree per fibre family, and the Borel exponent dichotomy."""
    import os

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    os.makedirs(outdir, exist_ok=True)
    written = []

    by_family: dict[str, list[tuple[int, int, object]]] = {}
    for r in report["rows"]:
        if r["ell"] is None:
            continue
        family = r["fibre"].split("@")[0]
        by_family.setdefault(family, []).append(
            (r["degree"], r["ell"], r["oracle"].get("class"))
        )
    if by_family:
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for family, pts in sorted(by_family.items()):
            pts = sorted(pts)
            xs = [p[0] for p in pts]
            ys = [p[1] for p in pts]
            ax.plot(xs, ys, marker="o", label=family)
            oracle_pts = [(x, oc) for x, _, oc in pts if oc is not None]
            if oracle_pts:
                ax.scatter(
                    [x for x, _ in oracle_pts],
                    [y for _, y in oracle_pts],
                    marker="x", s=70, color="black", zorder=5,
                )
        ax.set_xscale("log", base=2)
        ax.set_xlabel("extension degree")
        ax.set_ylabel("nilpotency class")
        ax.set_title("predicted class (lines) vs brute-force oracle (x)")
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = os.path.join(outdir, "class_vs_degree.png")
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    if report["borel"]:
        fig, ax = plt.subplots(figsize=(6.0, 3.2))
        labels = [rec["ext"] for rec in report["borel"]]
        observed = [rec["exponent"] for rec in report["borel"]]
        expected = [rec["expected_dichotomy"] for rec in report["borel"]]
        xs = range(len(labels))
        ax.bar([x - 0.17 for x in xs], observed, width=0.34, label="exponent")
        ax.bar([x + 0.17 for x in xs], expected, width=0.34, label="dichotomy value")
        ax.set_xticks(list(xs))
        ax.set_xticklabels(labels, fontsize=8)
        ax.set_ylabel("p-power exponent")
        ax.set_title("Borel model exponent")
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = os.path.join(outdir, "borel_exponent.png")
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written
