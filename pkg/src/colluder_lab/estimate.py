"""Maximum likelihood for the categorical full law from incomplete records.

The likelihood marginalizes each record over its completion set (all full
configurations compatible with the observed values).  CPT rows are mapped to
unconstrained parameters by exponential normalization with the first level
pinned as reference, gradients are exact via posterior expected counts, and
optimization is limited-memory quasi-Newton with a Newton polishing stage.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from string import ascii_lowercase
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import ndtri

from .errors import DataError, FitError
from .lawtable import CategoricalLaw, ObservedLawTable, observable_axes
from .mdgraph import MissingDataGraph, VertexRole

_THETA_BOUND = 40.0


# -- datasets -------------------------------------------------------------------


class Dataset:
    """Incomplete records over the observable columns of a graph.

    Columns follow graph declaration order: fully observed variables, then
    each partially observed variable under its true-variable name (value =
    level or the NA code, which is the level count), then response
    indicators.  ``weights`` are per-record multiplicities (counts, or
    population masses for expected-data fits).
    """

    NA = -1  # convenience alias accepted in input rows; stored as the NA level

    def __init__(self, graph: MissingDataGraph, rows, weights=None,
                 columns: Sequence[str] | None = None):
        self.graph = graph
        axes = observable_axes(graph)
        names = [a.name for a in axes]
        rows = np.asarray(rows, dtype=np.int64)
        if rows.ndim == 1:
            rows = rows.reshape(1, -1)
        if rows.size and rows.shape[1] != len(names):
            raise DataError(f"records have {rows.shape[1]} columns, expected {len(names)}")
        if columns is not None:
            columns = list(columns)
            if sorted(columns) != sorted(names):
                raise DataError(f"columns {columns} do not match graph vertices {names}")
            perm = [columns.index(n) for n in names]
            rows = rows[:, perm]
        rows = rows.copy()

        na_axis = {}
        for i, a in enumerate(axes):
            if a.kind == "proxy":
                na = a.size - 1
                col = rows[:, i]
                col[col == self.NA] = na
                na_axis[i] = na
        for i, a in enumerate(axes):
            col = rows[:, i] if rows.size else np.empty(0, dtype=np.int64)
            bad = np.nonzero((col < 0) | (col >= a.size))[0]
            if bad.size:
                raise DataError(f"value {rows[bad[0], i]} out of range for column {a.name!r}",
                                line=int(bad[0]) + 2)
        for p in graph.pairs:
            xi = names.index(p.true)
            ri = names.index(p.indicator)
            na = na_axis[xi]
            if rows.size:
                bad = np.nonzero((rows[:, xi] == na) != (rows[:, ri] == 0))[0]
                if bad.size:
                    raise DataError(
                        f"inconsistent record: {p.true} must be NA exactly when {p.indicator}=0",
                        line=int(bad[0]) + 2)

        if weights is None:
            weights = np.ones(len(rows))
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (len(rows),):
            raise DataError("weights must have one entry per record")
        if np.any(weights < 0):
            raise DataError("weights must be non-negative")
        rows.setflags(write=False)
        weights.setflags(write=False)
        self.columns = tuple(names)
        self.rows = rows
        self.weights = weights

    @property
    def n_records(self) -> int:
        return len(self.rows)

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    def na_level(self, column: str) -> int:
        axes = observable_axes(self.graph)
        for a in axes:
            if a.name == column and a.kind == "proxy":
                return a.size - 1
        raise DataError(f"column {column!r} is not a partially observed variable")

    def patterns(self) -> tuple[np.ndarray, np.ndarray]:
        """Unique rows and their aggregated weights."""
        if not len(self.rows):
            return self.rows, self.weights
        uniq, inverse = np.unique(self.rows, axis=0, return_inverse=True)
        w = np.bincount(inverse, weights=self.weights, minlength=len(uniq))
        return uniq, w

    def permuted(self, order) -> "Dataset":
        return Dataset(self.graph, self.rows[order], self.weights[order])

    # -- CSV --------------------------------------------------------------

    @classmethod
    def from_csv(cls, path, graph: MissingDataGraph, *, na_token: str = "NA",
                 one_based: bool = False) -> "Dataset":
        axes = observable_axes(graph)
        kind = {a.name: a.kind for a in axes}
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError("empty CSV file") from None
            header = [h.strip() for h in header]
            if sorted(header) != sorted(a.name for a in axes):
                raise DataError(f"CSV columns {header} do not match graph vertices "
                                f"{[a.name for a in axes]}")
            rows = []
            for lineno, rec in enumerate(reader, start=2):
                if not rec or all(not c.strip() for c in rec):
                    continue
                if len(rec) != len(header):
                    raise DataError("wrong number of fields", line=lineno)
                out = []
                for name, cell in zip(header, rec):
                    cell = cell.strip()
                    if cell == na_token:
                        if kind[name] != "proxy":
                            raise DataError(f"NA not allowed in column {name!r}", line=lineno)
                        out.append(cls.NA)
                        continue
                    try:
                        v = int(cell)
                    except ValueError:
                        raise DataError(f"non-integer value {cell!r} in column {name!r}",
                                        line=lineno) from None
                    if one_based and kind[name] != "indicator":
                        v -= 1
                    out.append(v)
                rows.append(out)
        try:
            return cls(graph, np.array(rows, dtype=np.int64).reshape(len(rows), len(header)),
                       columns=header)
        except DataError as e:
            raise DataError(str(e)) from None

    def to_csv(self, path, *, na_token: str = "NA", one_based: bool = False) -> None:
        if not np.allclose(self.weights, 1.0):
            raise DataError("only unit-weight datasets can be written as record CSVs")
        axes = observable_axes(self.graph)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.columns)
            for row in self.rows:
                out = []
                for a, v in zip(axes, row):
                    if a.kind == "proxy" and v == a.size - 1:
                        out.append(na_token)
                    elif one_based and a.kind != "indicator":
                        out.append(int(v) + 1)
                    else:
                        out.append(int(v))
                writer.writerow(out)


def population_dataset(obs: ObservedLawTable) -> Dataset:
    """A weighted dataset carrying the exact observed law (one record per positive cell)."""
    rows, weights = [], []
    for idx in np.ndindex(*obs.values.shape):
        p = float(obs.values[idx])
        if p > 0.0:
            rows.append(idx)
            weights.append(p)
    return Dataset(obs.graph, np.array(rows, dtype=np.int64), np.array(weights))


def completion_set(record: Mapping[str, int], graph: MissingDataGraph) -> list[dict]:
    """All full configurations compatible with one observed record.

    The record assigns every observable column (NA for a partially observed
    variable may be given as the NA level or -1).  Singleton when nothing is
    missing; otherwise the hidden true values range over their state spaces.
    """
    axes = observable_axes(graph)
    missing = [a.name for a in axes if a.name not in record]
    if missing:
        raise DataError(f"record is missing columns {missing}")
    options: list[tuple[str, range | tuple]] = []
    for a in axes:
        v = record[a.name]
        if a.kind == "proxy":
            levels = a.size - 1
            if v in (Dataset.NA, levels):
                options.append((a.name, range(levels)))
            else:
                options.append((a.name, (v,)))
        else:
            options.append((a.name, (v,)))
    out: list[dict] = [{}]
    for name, vals in options:
        out = [{**d, name: v} for d in out for v in vals]
    return out


# -- likelihood model -------------------------------------------------------------


class LikelihoodModel:
    """Parameter packing plus fast marginalized likelihood and score for one graph."""

    def __init__(self, graph: MissingDataGraph):
        self.graph = graph
        verts = graph.non_proxy_vertices()
        for v in verts:
            if v.levels is None:
                raise FitError(f"vertex {v.name!r} is continuous; the categorical "
                               f"likelihood requires declared levels")
        self.names = [v.name for v in verts]
        self.levels = [v.levels for v in verts]
        self.pos = {n: i for i, n in enumerate(self.names)}
        self.parents = {v.name: CategoricalLaw.parent_order(graph, v.name) for v in verts}
        self.shape = tuple(self.levels)

        if len(self.names) > len(ascii_lowercase):
            raise FitError("too many vertices for the table-based likelihood")
        letters = {n: ascii_lowercase[i] for i, n in enumerate(self.names)}
        self._subs = [
            "".join(letters[p] for p in self.parents[n]) + letters[n] for n in self.names
        ]
        all_letters = "".join(letters[n] for n in self.names)
        self._joint_sub = ",".join(self._subs) + "->" + all_letters
        self._count_subs = [all_letters + "->" + s for s in self._subs]

        self._blocks = []  # (name, offset, n_rows, levels, cpt_shape)
        off = 0
        for n in self.names:
            L = self.levels[self.pos[n]]
            n_rows = 1
            for p in self.parents[n]:
                n_rows *= graph.vertex(p).levels
            cpt_shape = tuple(graph.vertex(p).levels for p in self.parents[n]) + (L,)
            self._blocks.append((n, off, n_rows, L, cpt_shape))
            off += n_rows * (L - 1)
        self.n_params = off

    # -- parameter transform ------------------------------------------------

    def theta_to_cpts(self, theta: np.ndarray) -> dict[str, np.ndarray]:
        """Map unconstrained parameters to CPTs (reference level pinned at 0)."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise FitError(f"theta has shape {theta.shape}, expected ({self.n_params},)")
        cpts = {}
        for name, off, n_rows, L, cpt_shape in self._blocks:
            block = theta[off:off + n_rows * (L - 1)].reshape(n_rows, L - 1)
            logits = np.concatenate([np.zeros((n_rows, 1)), block], axis=1)
            logits -= logits.max(axis=1, keepdims=True)
            ex = np.exp(logits)
            cpts[name] = (ex / ex.sum(axis=1, keepdims=True)).reshape(cpt_shape)
        return cpts

    def cpts_to_theta(self, cpts: Mapping[str, np.ndarray]) -> np.ndarray:
        theta = np.zeros(self.n_params)
        for name, off, n_rows, L, cpt_shape in self._blocks:
            arr = np.asarray(cpts[name], dtype=float).reshape(n_rows, L)
            if np.any(arr <= 0.0):
                raise FitError(f"CPT for {name!r} has a zero entry; the unconstrained "
                               f"transform covers the open simplex only")
            theta[off:off + n_rows * (L - 1)] = (
                np.log(arr[:, 1:]) - np.log(arr[:, :1])).reshape(-1)
        return theta

    def law(self, theta: np.ndarray) -> CategoricalLaw:
        return CategoricalLaw(self.graph, self.theta_to_cpts(theta))

    def joint(self, cpts: Mapping[str, np.ndarray]) -> np.ndarray:
        return np.einsum(self._joint_sub, *[np.asarray(cpts[n], dtype=float)
                                            for n in self.names])

    # -- data binding ---------------------------------------------------------

    def bind(self, data: Dataset) -> "_BoundData":
        if data.graph is not self.graph and data.columns != tuple(
                a.name for a in observable_axes(self.graph)):
            raise FitError("dataset columns do not match the model graph")
        patterns, weights = data.patterns()
        if not len(patterns):
            raise FitError("empty dataset")
        axes = observable_axes(self.graph)
        completions = []
        for row in patterns:
            allowed = []
            for a, v in zip(axes, row):
                if a.kind == "proxy" and v == a.size - 1:
                    allowed.append(np.arange(a.size - 1))
                else:
                    allowed.append(np.array([v]))
            mesh = np.meshgrid(*allowed, indexing="ij")
            completions.append(np.ravel_multi_index([m.ravel() for m in mesh], self.shape))
        return _BoundData(patterns, weights, completions)

    # -- objective -------------------------------------------------------------

    def pattern_probs(self, theta: np.ndarray, bound: "_BoundData") -> np.ndarray:
        flat = self.joint(self.theta_to_cpts(theta)).reshape(-1)
        return np.array([flat[idx].sum() for idx in bound.completions])

    def log_likelihood(self, theta: np.ndarray, bound: "_BoundData") -> float:
        probs = self.pattern_probs(theta, bound)
        mask = bound.weights > 0
        if np.any(probs[mask] <= 0.0):
            return -np.inf
        return float(np.dot(bound.weights[mask], np.log(probs[mask])))

    def gradient(self, theta: np.ndarray, bound: "_BoundData") -> np.ndarray:
        cpts = self.theta_to_cpts(theta)
        joint = self.joint(cpts)
        flat = joint.reshape(-1)
        scatter = np.zeros_like(flat)
        for idx, w in zip(bound.completions, bound.weights):
            if w == 0.0:
                continue
            p = flat[idx].sum()
            if p <= 0.0:
                raise FitError("gradient undefined: a record has probability zero")
            scatter[idx] += w / p
        expected = scatter.reshape(self.shape) * joint

        grad = np.zeros(self.n_params)
        for (name, off, n_rows, L, cpt_shape), sub in zip(self._blocks, self._count_subs):
            counts = np.einsum(sub, expected).reshape(n_rows, L)
            probs = np.asarray(cpts[name], dtype=float).reshape(n_rows, L)
            row_tot = counts.sum(axis=1, keepdims=True)
            g = counts[:, 1:] - row_tot * probs[:, 1:]
            grad[off:off + n_rows * (L - 1)] = g.reshape(-1)
        return grad

    def hessian(self, theta: np.ndarray, bound: "_BoundData", step: float = 1e-5) -> np.ndarray:
        """Central finite differences of the analytic gradient (symmetrized)."""
        k = self.n_params
        H = np.zeros((k, k))
        for i in range(k):
            h = step * max(1.0, abs(theta[i]))
            up, dn = theta.copy(), theta.copy()
            up[i] += h
            dn[i] -= h
            H[i] = (self.gradient(up, bound) - self.gradient(dn, bound)) / (2 * h)
        return (H + H.T) / 2.0

    # -- labels ------------------------------------------------------------------

    def parameter_coords(self):
        """All reported probabilities: (vertex, parent assignment, level, theta block)."""
        out = []
        for name, off, n_rows, L, cpt_shape in self._blocks:
            parent_shape = cpt_shape[:-1]
            for row_i, pa in enumerate(np.ndindex(*parent_shape) if parent_shape else [()]):
                for level in range(1, L):
                    out.append((name, tuple(zip(self.parents[name], pa)), level,
                                off + row_i * (L - 1), row_i))
        return out


@dataclass
class _BoundData:
    patterns: np.ndarray
    weights: np.ndarray
    completions: list[np.ndarray]


# -- module-level operations --------------------------------------------------------


def log_likelihood(theta: np.ndarray, data: Dataset, graph: MissingDataGraph) -> float:
    """Marginalized log-likelihood: sum over records of log sum over completions."""
    model = LikelihoodModel(graph)
    return model.log_likelihood(np.asarray(theta, dtype=float), model.bind(data))


def grad_log_likelihood(theta: np.ndarray, data: Dataset, graph: MissingDataGraph) -> np.ndarray:
    """Exact analytic gradient of :func:`log_likelihood` in the unconstrained parameters."""
    model = LikelihoodModel(graph)
    return model.gradient(np.asarray(theta, dtype=float), model.bind(data))


# -- fitting --------------------------------------------------------------------------


@dataclass(frozen=True)
class FitConfig:
    restarts: int = 5
    seed: int | None = None
    max_iterations: int = 10_000
    grad_tol: float = 1e-8
    allow_nonidentifiable: bool = False
    boundary_tol: float = 1e-6
    info_rel_tol: float = 1e-8
    ci_level: float = 0.95
    polish_steps: int = 60
    compute_ci: bool = True


@dataclass(frozen=True)
class ParameterEstimate:
    vertex: str
    given: tuple[tuple[str, int], ...]
    level: int
    estimate: float
    se: float | None
    ci: tuple[float, float] | None
    boundary: bool
    reliable: bool

    def label(self, one_based: bool = False, graph: MissingDataGraph | None = None) -> str:
        def show(name, lv):
            if one_based and graph is not None and \
                    graph.vertex(name).role is not VertexRole.RESPONSE_INDICATOR:
                return lv + 1
            return lv

        head = f"p({self.vertex}={show(self.vertex, self.level)}"
        if self.given:
            cond = ", ".join(f"{n}={show(n, v)}" for n, v in self.given)
            return f"{head} | {cond})"
        return head + ")"

    def to_json(self) -> dict:
        return {"vertex": self.vertex, "given": [list(g) for g in self.given],
                "level": self.level, "estimate": self.estimate, "se": self.se,
                "ci": list(self.ci) if self.ci else None,
                "boundary": self.boundary, "reliable": self.reliable}


@dataclass
class FitResult:
    theta: np.ndarray
    cpts: dict[str, np.ndarray]
    log_likelihood: float
    grad_norm: float
    parameters: list[ParameterEstimate]
    converged: bool
    iterations: int
    restarts: int
    best_restart: int
    graph: MissingDataGraph

    def to_json(self) -> dict:
        return {
            "log_likelihood": self.log_likelihood,
            "grad_norm": self.grad_norm,
            "converged": self.converged,
            "iterations": self.iterations,
            "restarts": self.restarts,
            "best_restart": self.best_restart,
            "theta": [float(t) for t in self.theta],
            "cpts": {k: np.asarray(v).tolist() for k, v in self.cpts.items()},
            "parameters": [p.to_json() for p in self.parameters],
        }

    def format_table(self, one_based: bool = False) -> str:
        rows = [("Parameter", "Estimate", "95% CI")]
        for p in self.parameters:
            est = f"{p.estimate:.3f}"
            if not p.reliable:
                ci = "(not reliably estimable)"
            elif p.ci is not None:
                ci = f"({p.ci[0]:.3f}, {p.ci[1]:.3f})"
            else:
                ci = ""
            if p.boundary:
                est += "*"
            rows.append((p.label(one_based, self.graph), est, ci))
        w0 = max(len(r[0]) for r in rows)
        w1 = max(len(r[1]) for r in rows)
        lines = [f"{r[0]:<{w0}}  {r[1]:>{w1}}  {r[2]}".rstrip() for r in rows]
        lines.insert(1, "-" * max(len(line) for line in lines))
        if any(p.boundary for p in self.parameters):
            lines.append("* estimate within boundary tolerance of 0 or 1")
        return "\n".join(lines)


def _newton_polish(model: LikelihoodModel, bound: _BoundData, theta: np.ndarray,
                   config: FitConfig) -> tuple[np.ndarray, np.ndarray | None]:
    """Damped Newton steps to drive the score toward machine-level stationarity.

    Near the maximum the log-likelihood differences fall below float
    resolution, so steps are also accepted when they clearly contract the
    gradient without losing likelihood beyond rounding.
    """
    theta = theta.copy()
    best_ll = model.log_likelihood(theta, bound)
    ll_slack = max(1.0, abs(best_ll)) * 1e-12
    hess = None
    for _ in range(config.polish_steps):
        g = model.gradient(theta, bound)
        gn = float(np.linalg.norm(g))
        if gn <= config.grad_tol * 1e-2:
            break
        hess = model.hessian(theta, bound)
        # Modified Newton: reflect convex-side curvature and keep the
        # magnitude of flat eigenvalues, so saddle and ridge directions still
        # yield ascent steps sized by the actual curvature; cap the step so
        # backtracking starts from a sane trust region.
        evals, evecs = np.linalg.eigh(hess)
        floor = max(1e-10 * float(np.abs(evals).max(initial=0.0)), 1e-14)
        stabilized = -np.maximum(np.abs(evals), floor)
        step = -evecs @ ((evecs.T @ g) / stabilized)
        if not np.all(np.isfinite(step)):
            break
        big = float(np.abs(step).max())
        if big > 4.0:
            step *= 4.0 / big
        accepted = False
        scale = 1.0
        for _ in range(30):
            cand = np.clip(theta + scale * step, -_THETA_BOUND, _THETA_BOUND)
            ll = model.log_likelihood(cand, bound)
            if ll > best_ll + ll_slack:
                theta, best_ll, accepted = cand, ll, True
                break
            if ll >= best_ll - ll_slack and np.isfinite(ll):
                cand_gn = float(np.linalg.norm(model.gradient(cand, bound)))
                if cand_gn < 0.97 * gn:
                    theta, best_ll, accepted = cand, max(best_ll, ll), True
                    break
            scale *= 0.5
        if not accepted:
            break
    return theta, hess


def fit(data: Dataset, graph: MissingDataGraph, config: FitConfig | None = None) -> FitResult:
    """Maximum likelihood estimation with multiple restarts and Wald intervals.

    Requires a structurally identifiable graph unless
    ``config.allow_nonidentifiable`` is set; a non-identifiable model still
    optimizes fine but the optimum is a ridge, so estimates of the affected
    parameters are arbitrary within it.
    """
    config = config or FitConfig()
    if data.n_records == 0:
        raise FitError("empty dataset")
    model = LikelihoodModel(graph)
    bound = model.bind(data)

    if not config.allow_nonidentifiable:
        from .identify import decide_full_law
        verdict = decide_full_law(graph)
        if not verdict.identifiable:
            raise FitError(
                "graph is structurally non-identifiable; pass allow_nonidentifiable=True "
                f"to fit anyway: {[r.detail for r in verdict.reasons]}")

    rng = np.random.default_rng(config.seed)
    starts = [np.zeros(model.n_params)]
    while len(starts) < max(1, config.restarts):
        cpts = {}
        for name, off, n_rows, L, cpt_shape in model._blocks:
            cpts[name] = rng.dirichlet(np.ones(L), size=n_rows).reshape(cpt_shape)
        starts.append(model.cpts_to_theta(cpts))

    best = None
    total_iters = 0
    for i, start in enumerate(starts):
        res = minimize(
            lambda t: -model.log_likelihood(t, bound),
            start,
            jac=lambda t: -model.gradient(t, bound),
            method="L-BFGS-B",
            bounds=[(-_THETA_BOUND, _THETA_BOUND)] * model.n_params,
            options={"maxiter": config.max_iterations, "ftol": 1e-16, "gtol": 1e-10},
        )
        total_iters += int(res.nit)
        ll = -float(res.fun)
        if best is None or ll > best[0]:
            best = (ll, i, res.x)

    _, best_i, theta = best
    theta, hess = _newton_polish(model, bound, theta, config)
    ll = model.log_likelihood(theta, bound)
    grad = model.gradient(theta, bound)
    grad_norm = float(np.linalg.norm(grad))
    converged = grad_norm <= config.grad_tol and total_iters < config.max_iterations

    cpts = model.theta_to_cpts(theta)
    parameters: list[ParameterEstimate] = []
    if config.compute_ci:
        if hess is None:
            hess = model.hessian(theta, bound)
        info = -hess
        eigval, eigvec = np.linalg.eigh(info)
        lam_max = float(eigval.max(initial=0.0))
        null_mask = eigval <= config.info_rel_tol * max(lam_max, 0.0)
        inv = np.where(null_mask, 0.0, 1.0 / np.where(null_mask, 1.0, eigval))
        cov = (eigvec * inv) @ eigvec.T
        z = float(ndtri(0.5 + config.ci_level / 2.0))
        null_vecs = eigvec[:, null_mask]

        for name, given, level, off, row_i in model.parameter_coords():
            blk = next(b for b in model._blocks if b[0] == name)
            _, boff, n_rows, L, cpt_shape = blk
            p_row = cpts[name].reshape(n_rows, L)[row_i]
            est = float(p_row[level])
            # dp_level / dtheta_k over the row's free parameters
            dp = np.zeros(model.n_params)
            for k in range(1, L):
                dp[boff + row_i * (L - 1) + (k - 1)] = p_row[level] * ((k == level) - p_row[k])
            se = float(np.sqrt(max(dp @ cov @ dp, 0.0)))
            boundary = est <= config.boundary_tol or est >= 1.0 - config.boundary_tol
            gnorm2 = float(dp @ dp)
            if gnorm2 == 0.0:
                null_frac = 1.0
            else:
                null_frac = float(((null_vecs.T @ dp) ** 2).sum()) / gnorm2
            reliable = (not boundary) and null_frac <= 1e-6
            ci = None
            if reliable:
                ci = (max(0.0, est - z * se), min(1.0, est + z * se))
            parameters.append(ParameterEstimate(name, given, level, est,
                                                se if reliable else None, ci,
                                                boundary, reliable))
    else:
        for name, given, level, off, row_i in model.parameter_coords():
            blk = next(b for b in model._blocks if b[0] == name)
            _, boff, n_rows, L, cpt_shape = blk
            p_row = cpts[name].reshape(n_rows, L)[row_i]
            est = float(p_row[level])
            boundary = est <= config.boundary_tol or est >= 1.0 - config.boundary_tol
            parameters.append(ParameterEstimate(name, given, level, est, None, None,
                                                boundary, not boundary))

    return FitResult(theta=theta, cpts=cpts, log_likelihood=ll, grad_norm=grad_norm,
                     parameters=parameters, converged=converged, iterations=total_iters,
                     restarts=len(starts), best_restart=best_i, graph=graph)
