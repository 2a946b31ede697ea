"""Run a scenario's requested analyses and collect the results as report rows."""
from __future__ import annotations

import csv
import io
import json
import math
import zlib
from dataclasses import dataclass, field
from importlib.metadata import PackageNotFoundError, version

from . import detect, estimands, estimation, interference
from .exceptions import VaxmedError
from .graph import check_nde_assumptions
from .scenario import Scenario
from .scm import sample_units

REPORT_COLUMNS = ("analysis", "analytic", "estimate", "se", "flags")
ABS_TOL = 1e-9


def toolkit_version() -> str:
    try:
        return version("vaxmed")
    except PackageNotFoundError:
        return "unknown"


@dataclass(frozen=True)
class Row:
    analysis: str
    analytic: float | None = None
    estimate: float | None = None
    se: float | None = None
    flags: tuple[str, ...] = ()
    kind: str = "difference"
    error: str | None = None

    @property
    def is_error(self) -> bool:
        return self.error is not None


def _full(x) -> str:
    if x is None:
        return ""
    return repr(float(x))


def _display(x, kind: str) -> str:
    if x is None:
        return ""
    if kind == "ve":
        return estimands.format_ve(x)
    return estimands.format_probability(x)


@dataclass
class Report:
    scenario: str
    seed: int
    sample_size: int
    rows: list[Row] = field(default_factory=list)
    toolkit: str = field(default_factory=toolkit_version)

    def __getitem__(self, analysis: str) -> Row:
        for r in self.rows:
            if r.analysis == analysis:
                return r
        raise KeyError(analysis)

    @property
    def has_errors(self) -> bool:
        return any(r.is_error for r in self.rows)

    def _flags(self, r: Row) -> str:
        flags = list(r.flags)
        if r.error:
            flags.insert(0, f"error: {r.error}")
        return "; ".join(flags)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in self.rows:
            w.writerow([r.analysis, _full(r.analytic), _full(r.estimate), _full(r.se), self._flags(r)])
        return buf.getvalue()

    def to_table(self) -> str:
        body = [REPORT_COLUMNS] + [
            (r.analysis, _display(r.analytic, r.kind), _display(r.estimate, r.kind),
             "" if r.se is None else f"{r.se:.4f}", self._flags(r))
            for r in self.rows
        ]
        widths = [max(len(line[k]) for line in body) for k in range(4)]
        lines = [f"scenario {self.scenario}  seed {self.seed}  n {self.sample_size}"]
        for line in body:
            lines.append("  ".join(c.ljust(w) for c, w in zip(line[:4], widths)) + "  " + line[4])
        return "\n".join(s.rstrip() for s in lines) + "\n"

    def meta(self) -> dict:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "sample_size": self.sample_size,
            "toolkit_version": self.toolkit,
            "columns": list(REPORT_COLUMNS),
        }

    def meta_json(self) -> str:
        return json.dumps(self.meta(), indent=2, sort_keys=True) + "\n"


def derived_seed(seed: int, tag: str) -> list[int]:
    """Seed entropy for one named sub-stream of a run; stable across processes."""
    return [int(seed), zlib.crc32(tag.encode())]


class _Runner:
    def __init__(self, sc: Scenario, seed: int, n: int):
        self.sc, self.seed, self.n = sc, seed, n
        self.roles = sc.roles
        self.model = sc.model
        self.report = Report(sc.name, seed, n)
        self._data = None
        self._assumptions = None

    # shared pieces -------------------------------------------------------
    @property
    def data(self):
        if self._data is None:
            self._data = sample_units(self.model, self.n, derived_seed(self.seed, "sample"))
        return self._data

    def role(self, k):
        return self.roles.get(k)

    @property
    def assumptions(self):
        if self._assumptions is None and self.role("mediator"):
            r = self.roles
            self._assumptions = check_nde_assumptions(
                self.model.dag, r["exposure"], r["mediator"], r["outcome"], r.get("adjust", [])
            )
        return self._assumptions

    def identification_flags(self, adjust=None) -> tuple[str, ...]:
        r = self.roles
        rep = self.assumptions if adjust is None else check_nde_assumptions(
            self.model.dag, r["exposure"], r["mediator"], r["outcome"], adjust
        )
        if rep is None or rep.all_hold:
            return ()
        failing = [f"A{k}" for k in sorted(rep.verdicts) if not rep[k].holds]
        return (f"not identified: {','.join(failing)} not graphically satisfied",)

    def add(self, *rows: Row):
        self.report.rows.extend(rows)

    def guarded(self, name, fn):
        try:
            fn()
        except VaxmedError as exc:
            self.add(Row(name, error=str(exc)))

    # analyses ------------------------------------------------------------
    def estimand(self, e: str):
        r, m = self.roles, self.model
        a, y, b = r.get("exposure"), r.get("outcome"), r.get("mediator")
        if e == "pse":
            res = estimands.path_specific_effects(m, a, r["mask"], r["contacts"], y)
            for v in (res.mask_blocked, res.contacts_blocked, res.mediated_mask, res.mediated_contacts, res.direct):
                self.add(Row(v.name, v.difference))
            self.add(Row("pse_residual", res.residual, flags=("total minus the three path terms",)))
            return
        flags = ()
        if e == "tau_rw":
            v = estimands.total_effect(m, a, y)
        elif e == "tau_vt":
            v = estimands.trial_estimand(m, a, r["perception"], y)
        elif e == "nde":
            v = estimands.natural_direct_effect(m, a, b, y)
            flags = self.identification_flags()
        elif e == "nie":
            v = estimands.natural_indirect_effect(m, a, b, y)
            flags = self.identification_flags()
        else:
            level = int(e[4:-1])
            v = estimands.controlled_direct_effect(m, a, b, y, level)
        self.add(
            Row(f"{e}.risk_treated", v.risk_treated, kind="risk"),
            Row(f"{e}.risk_control", v.risk_control, kind="risk"),
            Row(f"{e}.difference", v.difference, flags=flags),
            Row(f"{e}.ve", v.ve, kind="ve"),
        )

    def estimator(self, entry: dict):
        r = self.roles
        adjust = list(entry.get("adjust", r.get("adjust", [])))
        name = entry["name"] + (f"[{','.join(adjust)}]" if "adjust" in entry else "")
        a, y, b = r["exposure"], r["outcome"], r.get("mediator")
        seed = derived_seed(self.seed, name)
        if entry["name"] == "plugin_nde":
            res = estimation.plugin_nde(self.data, a, b, y, adjust, self.sc.bootstrap, seed)
            target = estimands.natural_direct_effect(self.model, a, b, y).difference
            limit = estimation.plugin_nde_limit(self.model, a, b, y, adjust)
            flags = list(self.identification_flags(adjust))
        else:
            res = estimation.plugin_total(self.data, a, y, adjust, self.sc.bootstrap, seed)
            target = estimands.total_effect(self.model, a, y).difference
            limit = estimation.plugin_total_limit(self.model, a, y, adjust)
            flags = []
        if abs(limit - target) > ABS_TOL:
            flags.append(f"population limit {limit:.6f} differs from estimand")
        flags += [f"positivity {f}" for f in res.positivity_flags]
        self.add(Row(name, target, res.estimate, res.se, tuple(flags)))

    def misclassification(self, flip: float):
        r = self.roles
        a, b, y = r["exposure"], r["mediator"], r["outcome"]
        adjust = r.get("adjust", [])
        name = f"misclassified_nde[{flip:g}]"
        seed = derived_seed(self.seed, name)
        noisy = estimation.misclassify_mediator(self.data, b, flip, seed)
        res = estimation.plugin_nde(noisy, a, b, y, adjust, self.sc.bootstrap, seed)
        limit = estimation.plugin_nde_limit(self.model, a, b, y, adjust, flip)
        self.add(Row(name, limit, res.estimate, res.se, tuple(f"positivity {f}" for f in res.positivity_flags)))

    def detection(self, d: str):
        r, m = self.roles, self.model
        a, cond = r["exposure"], r.get("cond", [])
        guard = tuple(detect.conditioning_guard(m.dag, a, cond))
        if d == "panel":
            p = detect.panel_interpretation(m.dag, a, r["behaviour"], r["outcome"], r["probe"], cond)
            flags = [f"conclusion={p.conclusion}"] + [f"path {'->'.join(q)}" for q in p.paths]
            self.add(Row("panel", flags=tuple(flags) + guard))
            return
        if d == "alt_outcome":
            analytic, _ = detect.analytic_contrasts(m, a, r["probe"], cond)
            res = detect.alt_outcome_test(self.data, a, r["probe"], cond, self.sc.z_threshold)
        else:
            analytic, _ = detect.analytic_contrasts(m, a, r["outcome"], cond, r["subgroup"])
            res = detect.negative_control_population_test(
                self.data, a, r["outcome"], r["subgroup"], cond, self.sc.z_threshold
            )
        est = None if math.isnan(res.difference) else res.difference
        se = None if math.isnan(res.se) else res.se
        self.add(Row(d, analytic, est, se, (f"verdict={res.verdict}",) + res.flags + guard))

    def assumption_rows(self):
        rep = self.assumptions
        for k in sorted(rep.verdicts):
            self.add(Row(f"assumption{k}", flags=(str(rep[k]),)))

    def interference(self, kind: str):
        gm = self.sc.grouped_model()
        value = interference.average_effects(gm, kind)
        flags = ("spillover against all others unvaccinated",) if kind == "spillover" else ()
        self.add(Row(f"interference.{kind}", value, flags=(f"alpha={gm.alpha:g}",) + flags))

    def run(self) -> Report:
        an = self.sc.analyses
        for e in an["estimands"]:
            self.guarded(e, lambda e=e: self.estimand(e))
        for entry in an["estimators"]:
            label = entry["name"] + (f"[{','.join(entry['adjust'])}]" if "adjust" in entry else "")
            self.guarded(label, lambda entry=entry: self.estimator(entry))
        for flip in an["misclassification"]:
            self.guarded(f"misclassified_nde[{flip:g}]", lambda flip=flip: self.misclassification(flip))
        for d in an["detection"]:
            self.guarded(d, lambda d=d: self.detection(d))
        if an["assumptions"]:
            self.guarded("assumptions", self.assumption_rows)
        for kind in an["interference"]:
            self.guarded(f"interference.{kind}", lambda kind=kind: self.interference(kind))
        return self.report


def run(scenario: Scenario, seed: int | None = None, n: int | None = None) -> Report:
    """Execute every analysis the scenario requests; failures become error rows."""
    seed = scenario.seed if seed is None else seed
    n = scenario.sample_size if n is None else n
    return _Runner(scenario, seed, n).run()
