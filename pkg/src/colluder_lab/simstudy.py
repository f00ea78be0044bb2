"""Replicated simulation studies: draw laws, sample, fit, aggregate bias and RMSE.

Replications are independent cells seeded by (scenario seed, sample-size
index, replication index), so results are reproducible under any scheduling;
aggregation is a deterministic fold in replication order.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ColluderLabError, LawError
from .estimate import Dataset, FitConfig, LikelihoodModel, fit
from .fixtures import ccm_graph
from .lawtable import CategoricalLaw, SimConstraints, observable_axes, random_law
from .mdgraph import MissingDataGraph, VertexRole, load_json_source


def sample_dataset(law: CategoricalLaw, n: int, seed=None) -> Dataset:
    """Draw ``n`` i.i.d. records by forward sampling and masking the proxies."""
    if n < 1:
        raise LawError("sample size must be positive")
    rng = np.random.default_rng(seed)
    joint = law.joint_table()
    probs = joint.values.astype(float).reshape(-1)
    probs = probs / probs.sum()
    counts = rng.multinomial(n, probs)

    graph = law.graph
    axes = observable_axes(graph)
    names = joint.names
    pos = {name: i for i, name in enumerate(names)}
    pair_of_true = {p.true: p.indicator for p in graph.pairs}

    full = np.array(list(np.ndindex(*joint.values.shape)), dtype=np.int64)
    observed = np.empty((len(full), len(axes)), dtype=np.int64)
    for j, a in enumerate(axes):
        col = full[:, pos[a.name]]
        if a.kind == "proxy":
            r = full[:, pos[pair_of_true[a.name]]]
            col = np.where(r == 1, col, a.size - 1)
        observed[:, j] = col

    rows = np.repeat(observed, counts, axis=0)
    rng.shuffle(rows, axis=0)
    return Dataset(graph, rows)


@dataclass(frozen=True)
class SimScenario:
    """One simulation design on the two-variable colluder graph with X -> Y."""

    m: int = 2
    q: int = 2
    sample_sizes: tuple[int, ...] = (1000, 10000, 100000)
    replications: int = 200
    seed: int = 0
    constraints: SimConstraints = field(default_factory=SimConstraints)
    restarts: int = 2
    max_failure_rate: float = 0.02

    def __post_init__(self):
        if self.replications < 1:
            raise LawError("replications must be at least 1")
        if any(n < 1 for n in self.sample_sizes):
            raise LawError("sample sizes must be positive")
        if self.m > self.q:
            raise LawError(f"CCM({self.m},{self.q}) needs m <= q for an identifiable design")

    def graph(self) -> MissingDataGraph:
        return ccm_graph(self.m, self.q)

    def to_json(self) -> dict:
        return {"m": self.m, "q": self.q, "sample_sizes": list(self.sample_sizes),
                "replications": self.replications, "seed": self.seed,
                "constraints": self.constraints.to_json(), "restarts": self.restarts,
                "max_failure_rate": self.max_failure_rate}

    @classmethod
    def from_json(cls, source) -> "SimScenario":
        obj = load_json_source(source)
        known = {"m", "q", "sample_sizes", "replications", "seed", "constraints",
                 "restarts", "max_failure_rate"}
        unknown = set(obj) - known
        if unknown:
            raise LawError(f"unknown scenario keys: {sorted(unknown)}")
        kwargs = dict(obj)
        if "sample_sizes" in kwargs:
            kwargs["sample_sizes"] = tuple(int(n) for n in kwargs["sample_sizes"])
        if "constraints" in kwargs:
            kwargs["constraints"] = SimConstraints.from_json(kwargs["constraints"])
        return cls(**kwargs)


def _parameter_layout(graph: MissingDataGraph):
    """Reported probabilities with labels and colluder/other group membership."""
    model = LikelihoodModel(graph)
    coords = []
    for name, given, level, _, row_i in model.parameter_coords():
        role = graph.vertex(name).role
        group = ("colluder" if role is VertexRole.RESPONSE_INDICATOR and given
                 else "other")
        if role is VertexRole.RESPONSE_INDICATOR:
            head = f"p({name}=1"
        else:
            head = f"p({name}={level}"
        label = head + (f" | {', '.join(f'{n}={v}' for n, v in given)})" if given else ")")
        coords.append((name, given, level, row_i, group, label))
    return model, coords


def _probs_at(model: LikelihoodModel, cpts, coords) -> np.ndarray:
    out = np.empty(len(coords))
    for i, (name, _given, level, row_i, _group, _label) in enumerate(coords):
        L = cpts[name].shape[-1]
        out[i] = float(np.asarray(cpts[name], dtype=float).reshape(-1, L)[row_i, level])
    return out


def _run_cell(scenario: SimScenario, n_idx: int, rep: int):
    """One replication at one sample size; returns the error vector or None."""
    graph = scenario.graph()
    model, coords = _parameter_layout(graph)
    ss = np.random.SeedSequence((scenario.seed, n_idx, rep))
    law_seed, data_seed, fit_seed = ss.spawn(3)
    law = random_law(graph, scenario.constraints, law_seed)
    data = sample_dataset(law, scenario.sample_sizes[n_idx], data_seed)
    config = FitConfig(restarts=scenario.restarts, compute_ci=False,
                       seed=int(fit_seed.generate_state(1)[0]))
    result = fit(data, graph, config)
    if not result.converged:
        return None
    truth = _probs_at(model, law.cpts, coords)
    est = _probs_at(model, result.cpts, coords)
    return est - truth


@dataclass(frozen=True)
class GroupSummary:
    group: str
    label: str
    n: int
    bias_min: float
    bias_max: float
    rmse_mean: float
    rmse_max: float

    def to_json(self) -> dict:
        return {"group": self.group, "label": self.label, "n": self.n,
                "bias_min": self.bias_min, "bias_max": self.bias_max,
                "rmse_mean": self.rmse_mean, "rmse_max": self.rmse_max}


@dataclass(frozen=True)
class SimReport:
    scenario: SimScenario
    summaries: tuple[GroupSummary, ...]
    per_parameter: dict
    failures: dict

    def summary(self, group: str, n: int) -> GroupSummary:
        for s in self.summaries:
            if s.group == group and s.n == n:
                return s
        raise KeyError((group, n))

    def to_json(self) -> dict:
        return {"scenario": self.scenario.to_json(),
                "summaries": [s.to_json() for s in self.summaries],
                "per_parameter": {str(k): v for k, v in self.per_parameter.items()},
                "failures": {str(k): v for k, v in self.failures.items()}}

    @classmethod
    def from_json(cls, source) -> "SimReport":
        obj = load_json_source(source)
        summaries = tuple(GroupSummary(**s) for s in obj["summaries"])
        per_parameter = {int(k): v for k, v in obj["per_parameter"].items()}
        return cls(SimScenario.from_json(obj["scenario"]), summaries,
                   per_parameter, {int(k): v for k, v in obj["failures"].items()})

    def format_table(self) -> str:
        head = f"Scenario m={self.scenario.m}, q={self.scenario.q} " \
               f"({self.scenario.replications} replications)"
        rows = [("Parameters for", "n", "Bias min", "Bias max", "RMSE mean", "RMSE max")]
        for group in ("colluder", "other"):
            for s in self.summaries:
                if s.group != group:
                    continue
                rows.append((s.label, str(s.n), f"{s.bias_min:.4f}", f"{s.bias_max:.4f}",
                             f"{s.rmse_mean:.4f}", f"{s.rmse_max:.4f}"))
        widths = [max(len(r[i]) for r in rows) for i in range(6)]
        lines = [head, ""]
        for i, r in enumerate(rows):
            lines.append("  ".join(f"{r[j]:<{widths[j]}}" if j == 0 else f"{r[j]:>{widths[j]}}"
                                   for j in range(6)).rstrip())
            if i == 0:
                lines.append("-" * (sum(widths) + 10))
        fails = ", ".join(f"n={n}: {c}" for n, c in sorted(self.failures.items()))
        lines.append("")
        lines.append(f"non-converged replications excluded: {fails}")
        return "\n".join(lines)


def run_scenario(scenario: SimScenario, threads: int = 1) -> SimReport:
    """Run every (sample size, replication) cell and aggregate bias and RMSE by group.

    Non-convergent fits are excluded from the aggregates and counted; the
    scenario fails if more than ``max_failure_rate`` of the replications at
    any sample size did not converge.
    """
    graph = scenario.graph()
    _, coords = _parameter_layout(graph)
    labels = [c[5] for c in coords]
    groups = [c[4] for c in coords]

    cells = [(n_idx, rep) for n_idx in range(len(scenario.sample_sizes))
             for rep in range(scenario.replications)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_cell, [scenario] * len(cells),
                                    [c[0] for c in cells], [c[1] for c in cells],
                                    chunksize=8))
    else:
        results = [_run_cell(scenario, n_idx, rep) for n_idx, rep in cells]

    summaries = []
    per_parameter: dict = {}
    failures: dict = {}
    group_label = {
        g: ", ".join(sorted({_vertex_label(graph, c[0]) for c in coords if c[4] == g}))
        for g in ("colluder", "other")
    }
    for n_idx, n in enumerate(scenario.sample_sizes):
        errs = [results[i] for i, (ni, _) in enumerate(cells) if ni == n_idx]
        ok = np.array([e for e in errs if e is not None])
        failed = sum(1 for e in errs if e is None)
        failures[n] = failed
        if failed > scenario.max_failure_rate * scenario.replications:
            raise ColluderLabError(
                f"scenario failed: {failed}/{scenario.replications} replications "
                f"did not converge at n={n}")
        bias = ok.mean(axis=0)
        rmse = np.sqrt((ok ** 2).mean(axis=0))
        per_parameter[n] = {lb: {"bias": float(b), "rmse": float(r)}
                            for lb, b, r in zip(labels, bias, rmse)}
        for group in ("colluder", "other"):
            sel = [i for i, g in enumerate(groups) if g == group]
            if not sel:
                continue
            summaries.append(GroupSummary(
                group, group_label[group], n,
                bias_min=float(bias[sel].min()), bias_max=float(bias[sel].max()),
                rmse_mean=float(rmse[sel].mean()), rmse_max=float(rmse[sel].max())))
    per_parameter = {int(k): v for k, v in per_parameter.items()}
    return SimReport(scenario, tuple(summaries), per_parameter, failures)


def _vertex_label(graph: MissingDataGraph, name: str) -> str:
    parents = CategoricalLaw.parent_order(graph, name)
    head = f"p({name}=1" if graph.vertex(name).role is VertexRole.RESPONSE_INDICATOR \
        else f"p({name}"
    return head + (f" | {', '.join(parents)})" if parents else ")")
