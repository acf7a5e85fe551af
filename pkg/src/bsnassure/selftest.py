"""The bundled acceptance suite: one runner per criterion, each with its own oracle."""

from __future__ import annotations

import contextlib
import dataclasses
import hashlib
import io
import tempfile
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from .cgm import default_cgm
from .config import ScenarioConfig, load_config
from .core import RiskLevel, VitalKind, classify_vital
from .dataset import MiningDataset
from .mining import fit_linear, learn_rules, learn_tree, mine_cgm
from .mining.linear import normal_equation_solve
from .mining.tree import training_accuracy
from .mutations import MUTATIONS, mutate_for
from .refine import refine_and_compare
from .simulator import run_simulation
from .stats import t_interval
from .trace import dumps, loads
from .verifier import Verdict, check_all, check_property, compute_ted, pooled_tsn, summarize


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float
    budget_s: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] criterion {self.number}: {self.name} - {self.detail} "
                f"({self.seconds:.3f}s, budget {self.budget_s:g}s)")


def scenario_path(name: str) -> Path:
    return Path(str(resources.files("bsnassure").joinpath(f"data/scenarios/{name}.json")))


def load_scenario(name: str) -> ScenarioConfig:
    return load_config(scenario_path(name))


# --- 1: classification -------------------------------------------------------

# The operationalization table as written: descending chains of bounds and bands.
REFERENCE_TABLE = {
    VitalKind.OXYGENATION: "100 > low > 94 > moderate > 90 > high > 0",
    VitalKind.PULSE_RATE: "300 > high > 120 > low > 80 > high > 0",
    VitalKind.TEMPERATURE: "50 > high > 38 > moderate > 37 > low > 35 > moderate > 30 > high > 0",
}

INTERIOR_CASES = [
    (VitalKind.OXYGENATION, 96, RiskLevel.LOW), (VitalKind.OXYGENATION, 99.5, RiskLevel.LOW),
    (VitalKind.OXYGENATION, 92, RiskLevel.MODERATE), (VitalKind.OXYGENATION, 85, RiskLevel.HIGH),
    (VitalKind.OXYGENATION, 40, RiskLevel.HIGH),
    (VitalKind.PULSE_RATE, 130, RiskLevel.HIGH), (VitalKind.PULSE_RATE, 100, RiskLevel.LOW),
    (VitalKind.PULSE_RATE, 81, RiskLevel.LOW), (VitalKind.PULSE_RATE, 60, RiskLevel.HIGH),
    (VitalKind.PULSE_RATE, 250, RiskLevel.HIGH),
    (VitalKind.TEMPERATURE, 37.5, RiskLevel.MODERATE), (VitalKind.TEMPERATURE, 32, RiskLevel.MODERATE),
    (VitalKind.TEMPERATURE, 36, RiskLevel.LOW), (VitalKind.TEMPERATURE, 40, RiskLevel.HIGH),
    (VitalKind.TEMPERATURE, 25, RiskLevel.HIGH),
]


def reference_classifier(chain: str) -> Callable[[int], RiskLevel]:
    """Classifier over integer hundredths built from a table chain; boundaries go to the riskier side."""
    tokens = [t.strip() for t in chain.split(">")]
    bounds = [int(round(float(t) * 100)) for t in tokens[0::2]]
    bands = [RiskLevel.parse(t) for t in tokens[1::2]]

    def classify(v: int) -> RiskLevel:
        for i, band in enumerate(bands):
            hi, lo = bounds[i], bounds[i + 1]
            if lo < v < hi:
                return band
            if v == hi:
                return band if i == 0 else max(band, bands[i - 1])
        raise ValueError(v)
    return classify


def criterion_1() -> tuple[bool, str]:
    bad = [(k.value, v) for k, v, want in INTERIOR_CASES if classify_vital(k, v) is not want]
    mismatches = 0
    points = 0
    for kind, chain in REFERENCE_TABLE.items():
        ref = reference_classifier(chain)
        top = int(chain.split(">")[0]) * 100
        for h in range(1, top + 1):
            points += 1
            if classify_vital(kind, h / 100) is not ref(h):
                mismatches += 1
    ok = not bad and mismatches == 0
    return ok, f"{len(INTERIOR_CASES) - len(bad)}/15 interior cases, {mismatches} grid mismatches over {points} points"


# --- 2: t interval -------------------------------------------------------------

def criterion_2() -> tuple[bool, str]:
    ci = t_interval(-0.02902, 0.01939, 4, 0.95)
    ok = (abs(ci.low - -0.08284) <= 1e-4 and abs(ci.high - 0.02484) <= 1e-4 and ci.includes_zero)
    return ok, f"({ci.low:.5f}, {ci.high:.5f}) includes_zero={ci.includes_zero}"


# --- 3: scheduling window ---------------------------------------------------

def criterion_3() -> tuple[bool, str]:
    parts, ok = [], True
    for n in (1, 3, 5, 10, 20):
        cfg = ScenarioConfig(num_sensor_nodes=n, sim_duration_ms=60_000.0)
        s = summarize(pooled_tsn(run_simulation(cfg)))
        if n < 20:
            ok &= s.violation_fraction == 0.0
            parts.append(f"n={n}: vf={s.violation_fraction:g}")
        else:
            ok &= 110.0 <= s.mean <= 130.0 and s.violation_fraction > 0.9
            parts.append(f"n=20: mean={s.mean:.2f}ms vf={s.violation_fraction:.3f}")
    return ok, "; ".join(parts)


# --- 4: emergency detection ----------------------------------------------------

def criterion_4() -> tuple[bool, str]:
    ok, samples, worst, runs = True, 0, 0.0, 0
    configs = [ScenarioConfig(num_sensor_nodes=n, sim_duration_ms=60_000.0, seed=seed)
               for n in (1, 3, 5, 10) for seed in (0, 1)]
    configs += [c.replace(patient=dataclasses.replace(c.patient, initial_risk="high")) for c in configs[::2]]
    configs.append(load_scenario("nominal_5"))
    for cfg in configs:
        trace = run_simulation(cfg)
        v = check_property(trace, "P3")
        ted = compute_ted(trace)
        runs += 1
        samples += len(ted.samples)
        worst = max([worst, *ted.samples])
        ok &= v.violated == 0
    return ok and samples > 0, (f"{runs} runs, {samples} T_ED samples, max {worst:.2f} ms, "
                                "P3 violations 0" if ok else "P3 violated")


# --- 5: lifetime ratio -------------------------------------------------------

def criterion_5() -> tuple[bool, str]:
    report = refine_and_compare(load_scenario("refine_default"), [1, 2, 3, 4, 5])
    ratio, agree = report["ratio"], report["ratio_oracle_agreement"]
    valid = report["reverification"]["status"] == "VALID"
    ok = ratio >= 3.0 and agree <= 0.10 and valid
    return ok, (f"ratio={ratio:.2f} oracle_ratio={report['oracle_ratio']:.2f} "
                f"disagreement={agree:.4f} reverification={report['reverification']['status']}")


# --- 6: learners -------------------------------------------------------------

def perfect_thresholds(xs, labels) -> list[float]:
    """Brute force: every midpoint that separates the two classes exactly."""
    values = sorted(set(xs))
    out = []
    for lo, hi in zip(values, values[1:]):
        t = (lo + hi) / 2
        left = {c for x, c in zip(xs, labels) if x <= t}
        right = {c for x, c in zip(xs, labels) if x > t}
        if len(left) == 1 and len(right) == 1 and left != right:
            out.append(t)
    return out


def criterion_6() -> tuple[bool, str]:
    rng = np.random.default_rng(2024)
    datasets = [(list(range(1, 11)), 5, 1.0)]
    for _ in range(6):
        step = float(rng.choice([0.5, 1.0, 0.25]))
        xs = [round(float(v) * step, 4) for v in rng.permutation(40)]
        datasets.append((xs, float(np.median(xs)) + step / 4, step))
    fails = []
    for xs, planted, step in datasets:
        labels = ["pos" if x > planted else "neg" for x in xs]
        ds = MiningDataset(("x", "class"), tuple(zip(map(float, xs), labels)), "class")
        oracle = perfect_thresholds(xs, labels)
        tree = learn_tree(ds)
        t_tree = tree.root.threshold
        if training_accuracy(tree, ds) != 1.0 or t_tree not in oracle or abs(t_tree - planted) > step:
            fails.append(f"tree@{planted}")
        rules = learn_rules(ds)
        rows = [dict(x=x, **{"class": c}) for x, c in zip(map(float, xs), labels)]
        acc = sum(rules.predict(r) == r["class"] for r in rows) / len(rows)
        thr = [c.value for r in rules.rules for c in r.conditions]
        if acc != 1.0 or not thr or any(abs(t - planted) > step for t in thr):
            fails.append(f"rules@{planted}")
    X = rng.normal(size=(30, 3))
    beta = np.array([1.5, -2.0, 0.25, 4.0])
    y = beta[0] + X @ beta[1:]
    ds = MiningDataset(("a", "b", "c", "y"), tuple(tuple(map(float, (*row, t))) for row, t in zip(X, y)))
    model = fit_linear(ds, "y")
    got = np.array([model.intercept, *model.coefficients.values()])
    ref = normal_equation_solve(X, y)
    lin_err = float(max(np.abs(got - ref).max(), np.abs(got - beta).max()))
    if lin_err > 1e-8:
        fails.append("linear")
    return not fails, (f"{len(datasets)} threshold datasets, linear max error {lin_err:.1e}"
                       + (f"; failed: {fails}" if fails else ""))


# --- 7: mutation soundness ---------------------------------------------------

def criterion_7() -> tuple[bool, str]:
    trace = run_simulation(load_scenario("nominal_5"))
    base = {v.property_id: v for v in check_all(trace)}
    ok = all(v.verdict is Verdict.SATISFIED for v in base.values())
    parts = []
    for pid in MUTATIONS:
        mutated, index = mutate_for(trace, pid)
        mutated = loads(dumps(mutated))
        v = check_property(mutated, pid)
        hit = v.verdict is Verdict.VIOLATED and v.witness is not None and v.witness[0] == index
        ok &= hit and base[pid].verdict is Verdict.SATISFIED
        parts.append(f"{pid}:{'ok' if hit else 'MISSED'}")
    return ok, ", ".join(parts)


# --- 8: determinism ------------------------------------------------------------

def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def criterion_8() -> tuple[bool, str]:
    from .cli import main
    cfg = scenario_path("nominal_5")
    digests: dict[str, set] = {"trace": set(), "verify": set(), "mine": set()}
    with tempfile.TemporaryDirectory() as tmp:
        d = Path(tmp)
        for i in range(2):
            tr, rep, kn = d / f"t{i}.csv", d / f"r{i}.json", d / f"k{i}.json"
            with contextlib.redirect_stdout(io.StringIO()):
                codes = [
                    main(["simulate", "--config", str(cfg), "--out", str(tr)]),
                    main(["verify", "--trace", str(tr), "--out", str(rep)]),
                    main(["mine", "--trace", str(tr), "--verdicts", str(rep), "--out", str(kn)]),
                ]
            if codes != [0, 0, 0]:
                return False, f"exit codes {codes}"
            digests["trace"].add(_sha(tr))
            digests["verify"].add(_sha(rep))
            digests["mine"].add(_sha(kn))
    ok = all(len(v) == 1 for v in digests.values())
    return ok, ", ".join(f"{k} sha256 {next(iter(v))[:12]}" if len(v) == 1 else f"{k} differs"
                         for k, v in digests.items())


# --- 9: mining end to end ------------------------------------------------------

def criterion_9() -> tuple[bool, str]:
    cgm = default_cgm()
    out = []
    counts = {}
    for name in ("nominal_5", "nodes_20"):
        trace = run_simulation(load_scenario(name))
        knowledge = mine_cgm(cgm, trace, check_all(trace))
        counts[name] = knowledge.dissonances
        out.append(f"{name}: {len(knowledge.dissonances)} dissonances")
    p2 = [d for d in counts["nodes_20"] if d.property_id == "P2"]
    ok = not counts["nominal_5"] and bool(p2)
    if p2:
        out.append(f"P2 region '{p2[0].region}'")
    return ok, "; ".join(out)


CRITERIA = [
    (1, "classification fidelity", criterion_1, 1.0),
    (2, "t-interval reproduction", criterion_2, 0.001),
    (3, "scheduling-window calibration", criterion_3, 50.0),  # five runs at 10 s each
    (4, "emergency-detection property", criterion_4, 10.0),
    (5, "lifetime ratio", criterion_5, 60.0),
    (6, "learner oracles", criterion_6, 5.0),
    (7, "verifier mutation soundness", criterion_7, 5.0),
    (8, "determinism", criterion_8, 10.0),
    (9, "CGM mining end-to-end", criterion_9, 30.0),
]


def run_criterion(number: int) -> CriterionResult:
    for num, name, fn, budget in CRITERIA:
        if num == number:
            t0 = time.perf_counter()
            ok, detail = fn()
            dt = time.perf_counter() - t0
            if number == 2:
                # Time the computation alone, not the first-call import overhead.
                t0 = time.perf_counter()
                t_interval(-0.02902, 0.01939, 4, 0.95)
                dt = time.perf_counter() - t0
            within = dt <= budget
            if not within:
                detail += "; over runtime budget"
            return CriterionResult(num, name, ok and within, detail, dt, budget)
    raise KeyError(number)


def run_all(echo: Callable[[str], None] = print) -> list[CriterionResult]:
    results = []
    for num, *_ in CRITERIA:
        r = run_criterion(num)
        echo(r.line())
        results.append(r)
    return results
