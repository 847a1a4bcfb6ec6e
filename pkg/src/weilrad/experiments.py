"""Brute-force oracles over finite coefficient fields.

These are literal computations on the finite groups of points: lower central
series by commutator generation and breadth-first subgroup closure with
canonical-form hashing, exhaustive or seeded-sample element-order scans, and
the Borel-model exponent experiment.  Results are oracle data: the theorem
calculators never trust them alone, and they never trust the calculators.
"""

from __future__ import annotations

import json
import os
import random
import time
from dataclasses import dataclass, field

import numpy as np

from .algebra import ExtensionSpec, TruncatedAlgebra
from .bulk import BatchEngine
from .errors import BudgetExceeded, InternalError, UsageError
from .field import CoefficientField
from .invariants import borel_exponent_conjecture, imprimitive_borel_witness
from .matgroup import AlgebraMatrix, GroupTag, UnipotentElement, unipotent_count

DEFAULT_BUDGET = 1 << 20
VERIFY_CAP = 1 << 14
CHUNK = 1 << 15


def default_budget() -> int:
    raw = os.environ.get("WEILRAD_BUDGET")
    if raw is None:
        return DEFAULT_BUDGET
    try:
        value = int(raw)
    except ValueError as exc:
        raise UsageError(f"WEILRAD_BUDGET={raw!r} is not an integer") from exc
    if value < 1:
        raise UsageError("WEILRAD_BUDGET must be positive")
    return value


@dataclass(frozen=True)
class ExperimentConfig:
    tag: GroupTag
    extension: ExtensionSpec
    field_degree: int = 1
    budget: int | None = None
    seed: int = 0
    samples: int = 4096
    stabilization: tuple[int, ...] = ()
    # separate gate for exhaustive order scans: the class computation closes
    # small commutator subgroups and never materializes the group, so a raised
    # class budget need not force a full-order sweep
    exponent_budget: int | None = None

    def algebra(self, degree: int | None = None) -> TruncatedAlgebra:
        d = self.field_degree if degree is None else degree
        return TruncatedAlgebra(self.extension, CoefficientField(self.extension.p, d))

    def effective_budget(self) -> int:
        return default_budget() if self.budget is None else self.budget

    def effective_exponent_budget(self) -> int:
        if self.exponent_budget is not None:
            return self.exponent_budget
        return self.effective_budget()

    def to_json_dict(self) -> dict:
        return {
            "group": str(self.tag),
            "ext": str(self.extension),
            "field": f"F{self.extension.p ** self.field_degree}",
            "budget": self.effective_budget(),
            "seed": self.seed,
            "samples": self.samples,
            "stabilization": [f"F{self.extension.p ** d}" for d in self.stabilization],
        }


@dataclass(frozen=True)
class SeriesResult:
    order: int
    sizes: tuple[int, ...]
    class_number: int
    level_witnesses: tuple[str, ...]
    generators_verified: bool | None

    def to_json_dict(self) -> dict:
        return {
            "order": self.order,
            "sizes": list(self.sizes),
            "class": self.class_number,
            "level_witnesses": list(self.level_witnesses),
            "generators_verified": self.generators_verified,
        }


@dataclass(frozen=True)
class ExponentResult:
    exponent: int
    max_order: int
    witness_text: str
    exhaustive: bool
    checked: int
    count: int
    histogram: dict

    @property
    def coverage(self) -> float:
        return self.checked / self.count if self.count else 1.0

    def to_json_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "max_order": self.max_order,
            "witness": self.witness_text,
            "exhaustive": self.exhaustive,
            "checked": self.checked,
            "count": self.count,
            "coverage": self.coverage,
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
        }


# -- generators --------------------------------------------------------------------


def structured_generators(tag: GroupTag, A: TruncatedAlgebra) -> list[UnipotentElement]:
    """Level-spanning generating set of the finite group of points: one
    elementary element per (nonconstant monomial, field basis vector, free
    position).  Spanning each reduction-kernel quotient makes them generate."""
    F = A.coeff
    one, zero = A.one(), A.zero()
    basis_coeffs = [F.from_digits([0] * t + [1] + [0] * (F.d - 1 - t)) for t in range(F.d)]
    elems = []
    for mono in A.monomials:
        if sum(mono) == 0:
            continue
        for c in basis_coeffs:
            elems.append(A.monomial_element(mono, c))
    gens = []
    n = tag.size
    if tag.family == "gl":
        for e in elems:
            for i in range(n):
                for j in range(n):
                    rows = [[one if a == b else zero for b in range(n)] for a in range(n)]
                    rows[i][j] = (one + e) if i == j else e
                    gens.append(UnipotentElement(tag, AlgebraMatrix(A, rows), validate=False))
    elif tag.family == "sl2":
        for e in elems:
            t = one + e
            gens.append(UnipotentElement(tag, AlgebraMatrix(A, [[one, e], [zero, one]]), validate=False))
            gens.append(UnipotentElement(tag, AlgebraMatrix(A, [[one, zero], [e, one]]), validate=False))
            gens.append(
                UnipotentElement(tag, AlgebraMatrix(A, [[t, zero], [zero, t.inverse()]]), validate=False)
            )
    elif tag.family == "pgl2":
        seen = set()
        for e in elems:
            for i in range(2):
                for j in range(2):
                    rows = [[one, zero], [zero, one]]
                    rows = [list(r) for r in rows]
                    rows[i][j] = (one + e) if i == j else e
                    g = UnipotentElement(tag, AlgebraMatrix(A, rows), validate=False)
                    if g not in seen and not g.is_identity():
                        seen.add(g)
                        gens.append(g)
    elif tag.family == "borel2":
        for e in elems:
            gens.append(
                UnipotentElement(tag, AlgebraMatrix(A, [[one + e, zero], [zero, one]]), validate=False)
            )
            gens.append(
                UnipotentElement(tag, AlgebraMatrix(A, [[one, zero], [zero, one + e]]), validate=False)
            )
            gens.append(UnipotentElement(tag, AlgebraMatrix(A, [[one, e], [zero, one]]), validate=False))
    elif tag.family == "torus":
        for e in elems:
            for i in range(n):
                rows = [[one if a == b else zero for b in range(n)] for a in range(n)]
                rows[i][i] = one + e
                gens.append(UnipotentElement(tag, AlgebraMatrix(A, rows), validate=False))
    else:
        raise UsageError(f"unknown tag {tag}")
    return gens


# -- closure -----------------------------------------------------------------------


def _mulclose(engine: BatchEngine, gen_rows: list[np.ndarray], cap: int):
    """Breadth-first closure of <gens> under multiplication; returns the
    element key -> index dict and the stacked rows, in discovery order."""
    id_row = engine.identity_row
    elems = {id_row.tobytes(): 0}
    rows = [id_row]
    frontier = id_row[None, :, :, :]
    while frontier.shape[0]:
        new_rows = []
        for g in gen_rows:
            prods = engine.mul_single(frontier, g)
            for key, row in zip(engine.keys(prods), prods):
                if key not in elems:
                    elems[key] = len(rows)
                    rows.append(np.array(row, dtype=np.uint8))
                    new_rows.append(rows[-1])
                    if len(elems) > cap:
                        raise BudgetExceeded(len(elems), cap)
        frontier = np.stack(new_rows) if new_rows else np.zeros((0,) + id_row.shape, np.uint8)
    return elems, rows


def _normal_closure(engine, seeds, conj_gens, cap):
    """Smallest subgroup containing the seeds and closed under conjugation by
    the given generators.  Returns (element keys, rows, generating elements)."""
    gens: list[UnipotentElement] = []
    seen = set()
    for s in seeds:
        if s not in seen and not s.is_identity():
            seen.add(s)
            gens.append(s)
    conj_pairs = [(g, g.inverse()) for g in conj_gens]
    while True:
        elems, rows = _mulclose(engine, [engine.from_unipotent(g) for g in gens], cap)
        added = False
        for g, ginv in conj_pairs:
            for t in list(gens):
                c = g * t * ginv
                if engine.from_unipotent(c).tobytes() not in elems:
                    gens.append(c)
                    added = True
        if not added:
            return elems, rows, gens


def brute_class(cfg: ExperimentConfig) -> SeriesResult:
    """Literal lower central series of the finite group of points.

    Terms are computed from generating sets: the commutator subgroup of G with
    a normal H = <T> is the normal closure of the commutators of the
    generators, then closed breadth-first with canonical-form hashing."""
    if cfg.tag.family == "gl" and cfg.tag.size > 4:
        raise UsageError("brute class supports GL(n) only up to n = 4")
    A = cfg.algebra()
    count = unipotent_count(cfg.tag, A)
    budget = cfg.effective_budget()
    if count > budget:
        raise BudgetExceeded(count, budget)
    engine = BatchEngine(A, cfg.tag)
    gens = structured_generators(cfg.tag, A)
    verified = None
    if count <= VERIFY_CAP:
        elems, _ = _mulclose(engine, [engine.from_unipotent(g) for g in gens], count + 1)
        if len(elems) != count:
            raise InternalError(
                f"generator closure has {len(elems)} elements, expected {count}"
            )
        verified = True
    gen_invs = [g.inverse() for g in gens]
    sizes = [count]
    witnesses = []
    level_gens = gens
    while True:
        seeds = []
        seen = set()
        for g, ginv in zip(gens, gen_invs):
            for t in level_gens:
                c = g * t * ginv * t.inverse()
                if not c.is_identity() and c not in seen:
                    seen.add(c)
                    seeds.append(c)
        if not seeds:
            sizes.append(1)
            break
        elems, rows, closure_gens = _normal_closure(engine, seeds, gens, budget)
        if len(elems) >= sizes[-1]:
            raise InternalError("lower central series failed to shrink")
        if sizes[0] % len(elems):
            raise InternalError("subgroup size does not divide the group order")
        sizes.append(len(elems))
        witnesses.append(seeds[0].to_text())
        if len(elems) == 1:
            break
        level_gens = closure_gens
        if len(sizes) > 64:
            raise InternalError("lower central series failed to terminate")
    class_number = len(sizes) - 1
    return SeriesResult(
        order=count,
        sizes=tuple(sizes),
        class_number=class_number,
        level_witnesses=tuple(witnesses),
        generators_verified=verified,
    )


# -- exponent ---------------------------------------------------------------------


def brute_exponent(cfg: ExperimentConfig) -> ExponentResult:
    """Maximum p-power order over the group's points: exhaustive within the
    budget, otherwise a seeded uniform sample (by point index)."""
    A = cfg.algebra()
    engine = BatchEngine(A, cfg.tag)
    count = unipotent_count(cfg.tag, A)
    cap = 64
    best_s = -1
    best_row = None
    histogram: dict[int, int] = {}
    exhaustive = count <= cfg.effective_exponent_budget()
    if exhaustive:
        checked = count
        for start in range(0, count, CHUNK):
            stop = min(start + CHUNK, count)
            X = engine.decode_range(start, stop)
            orders = engine.orders(X, cap)
            for s, n in zip(*np.unique(orders, return_counts=True)):
                histogram[int(s)] = histogram.get(int(s), 0) + int(n)
            top = int(orders.max())
            if top > best_s:
                best_s = top
                best_row = np.array(X[int(np.argmax(orders))], dtype=np.uint8)
    else:
        rng = random.Random(cfg.seed)
        indices = [rng.randrange(count) for _ in range(cfg.samples)]
        checked = len(indices)
        for start in range(0, checked, CHUNK):
            X = engine.decode_index_list(indices[start : start + CHUNK])
            orders = engine.orders(X, cap)
            for s, n in zip(*np.unique(orders, return_counts=True)):
                histogram[int(s)] = histogram.get(int(s), 0) + int(n)
            top = int(orders.max())
            if top > best_s:
                best_s = top
                best_row = np.array(X[int(np.argmax(orders))], dtype=np.uint8)
    witness = engine.to_unipotent(best_row)
    return ExponentResult(
        exponent=best_s,
        max_order=A.p**best_s,
        witness_text=witness.to_text(),
        exhaustive=exhaustive,
        checked=checked,
        count=count,
        histogram=histogram,
    )


def borel_exponent_experiment(cfg: ExperimentConfig) -> dict:
    """Exponent of the 2x2 Borel model radical, compared against the
    primitive/imprimitive dichotomy, the e+s bound, and the conjectural
    prediction.  Only the dichotomy is ever asserted by callers."""
    if cfg.tag.family != "borel2":
        raise UsageError("the Borel experiment wants the Borel2 tag")
    spec = cfg.extension
    A = cfg.algebra()
    e = spec.extension_exponent
    primitive = spec.is_primitive
    res = brute_exponent(cfg)
    # the p^e-power of (1+m1, m2; 0, 1+m4) has corner m2*(m1-m4)^(p^e - 1),
    # so the corner image vanishes exactly when m^(p^e) = 0
    corner_trivial = A.maximal_ideal().power(A.p**e).is_zero()
    structural_upper = e if corner_trivial else e + 1
    if res.exponent > structural_upper:
        raise InternalError("observed order exceeds the structural bound")
    if primitive != corner_trivial:
        raise InternalError("corner image triviality must match primitivity")
    if primitive:
        witness = None
        one, zero = A.one(), A.zero()
        torus_rows = [[one + A.gen(int(np.argmax(spec.exponents))), zero], [zero, one]]
        attained = UnipotentElement(GroupTag.borel2(), AlgebraMatrix(A, torus_rows), validate=False)
    else:
        witness = imprimitive_borel_witness(A)
        attained = witness
    attained_order = attained.p_power_order()
    exponent_exact = structural_upper
    if attained_order != exponent_exact:
        raise InternalError("attaining witness does not reach the structural bound")
    expected = e if primitive else e + 1
    conjecture = borel_exponent_conjecture("GL2", spec)
    e_plus_s = e + 1  # s = 1: the smallest s with p^s > h - 1 for h = 2
    discrepancies = []
    if conjecture["predicted_exponent"] != exponent_exact:
        discrepancies.append(
            f"conjectural prediction {conjecture['predicted_exponent']} != exponent {exponent_exact}"
        )
    if res.exhaustive and res.exponent != exponent_exact:
        raise InternalError("exhaustive scan disagrees with the certified exponent")
    return {
        "ext": str(spec),
        "field": A.coeff.name,
        "primitive": primitive,
        "exponent": exponent_exact,
        "max_order": A.p**exponent_exact,
        "observed_exponent": res.exponent,
        "observed_exhaustive": res.exhaustive,
        "observed_coverage": res.coverage,
        "expected_dichotomy": expected,
        "dichotomy_holds": exponent_exact == expected,
        "structural_upper": structural_upper,
        "e_plus_s_bound": e_plus_s,
        "witness": witness.to_text() if witness is not None else attained.to_text(),
        "witness_order_exponent": attained_order,
        "conjecture": conjecture,
        "discrepancies": discrepancies,
    }


def stabilization_check(cfg: ExperimentConfig) -> dict:
    """Compare brute results across coefficient-field degrees; the class (and
    the exponent, where the enumeration fits the budget) must agree for the
    oracle to be considered stable."""
    if len(cfg.stabilization) < 2:
        raise UsageError("stabilization wants at least two coefficient-field degrees")
    classes = {}
    exponents = {}
    for d in cfg.stabilization:
        sub = ExperimentConfig(
            tag=cfg.tag,
            extension=cfg.extension,
            field_degree=d,
            budget=cfg.budget,
            seed=cfg.seed,
            samples=cfg.samples,
            exponent_budget=cfg.exponent_budget,
        )
        name = f"F{cfg.extension.p ** d}"
        classes[name] = brute_class(sub).class_number
        if unipotent_count(cfg.tag, sub.algebra()) <= sub.effective_exponent_budget():
            exponents[name] = brute_exponent(sub).exponent
    class_values = set(classes.values())
    exp_values = set(exponents.values())
    stabilized = len(class_values) == 1 and len(exp_values) <= 1
    return {
        "stabilized": stabilized,
        "status": "STABLE" if stabilized else "INCONCLUSIVE",
        "classes": classes,
        "exponents": exponents,
    }


# -- one-line records ---------------------------------------------------------------


def run_experiment(cfg: ExperimentConfig, include_wall: bool = True) -> dict:
    """One JSON-able record per configuration.  wall_ms is measured and thus
    the only nondeterministic field; strip it for byte comparisons."""
    t0 = time.perf_counter()
    A = cfg.algebra()
    count = unipotent_count(cfg.tag, A)
    budget = cfg.effective_budget()
    record: dict = {"config": cfg.to_json_dict(), "order": count}
    skipped = []
    if count <= budget:
        record["class"] = brute_class(cfg).class_number
        exp = brute_exponent(cfg)
        record["exponent"] = exp.exponent
        record["max_order"] = exp.max_order
        record["witness"] = exp.witness_text
    else:
        record["class"] = None
        exp = brute_exponent(cfg)  # sampled
        record["exponent"] = exp.exponent
        record["max_order"] = exp.max_order
        record["witness"] = exp.witness_text
        skipped.append(f"class skipped: {count} points exceed budget {budget}")
    if cfg.stabilization:
        record["stabilized"] = stabilization_check(cfg)["stabilized"]
    else:
        record["stabilized"] = None
    record["skipped"] = skipped
    record["wall_ms"] = round((time.perf_counter() - t0) * 1000.0, 3) if include_wall else None
    return record


def jsonl_line(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))
