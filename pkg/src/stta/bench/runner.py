"""Trial runner, percentile summaries and CSV emission."""

from __future__ import annotations

import csv
import dataclasses
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import baselines
from ..assemble import SttaConfig, stta_approximate
from ..baselines import MethodKind
from ..drm import splitmix64
from ..formats import DenseTensor, TTTensor, _dense_array, clip_ranks, rel_error, unfold
from . import recipes

RANDOMIZED = {MethodKind.STTA, MethodKind.TT_HMT, MethodKind.OTTS, MethodKind.GN_MATRIX, MethodKind.HMT_MATRIX}

_RECIPES = {
    "hilbert": lambda p, seed: recipes.gen_hilbert(int(p.get("d", 7)), int(p.get("n", 5))),
    "sqrt-sum": lambda p, seed: recipes.gen_sqrt_sum(
        int(p.get("d", 5)), int(p.get("n", 10)), float(p.get("a", 0.2)), float(p.get("b", 2.0))
    ),
    "decaying-tt": lambda p, seed: recipes.gen_decaying_tt(
        int(p.get("d", 5)), int(p.get("n", 10)), int(p.get("r", 5)),
        float(p.get("sigma_max", 1.0)), float(p.get("sigma_min", 1e-10)),
        seed=seed, clip=_truthy(p.get("clip", "false")),
    ),
    "tt-plus-sparse": lambda p, seed: recipes.gen_tt_plus_sparse(
        seed, d=int(p.get("d", 5)), n=int(p.get("n", 10)), r=int(p.get("r", 5)), nnz=int(p.get("N", 100))
    ),
    "sum-of-tt": lambda p, seed: recipes.gen_sum_of_tt(
        seed, count=int(p.get("count", 20)), decay=float(p.get("decay", 10.0)),
        d=int(p.get("d", 5)), n=int(p.get("n", 10)), r=int(p.get("r", 3)),
    ),
    "random-cp": lambda p, seed: recipes.gen_random_cp(
        seed, n_terms=int(p.get("N", 100)), d=int(p.get("d", 5)), n=int(p.get("n", 10)),
        power=float(p.get("decay", 5.0)),
    ),
}

RECIPES = tuple(_RECIPES)


def _truthy(v):
    return str(v).strip().lower() in ("1", "true", "yes", "on")


def build_tensor(recipe: str, params=None, seed: int = 0):
    if recipe not in _RECIPES:
        raise ValueError(f"unknown recipe {recipe!r}; choose from {', '.join(RECIPES)}")
    return _RECIPES[recipe](dict(params or {}), seed)


# ------------------------------------------------------------ oversampling

_RULE = re.compile(r"^\s*(\d*)\s*\*?\s*r\s*(?:([+-])\s*(\d+))?\s*$")
_RULE_ELL = re.compile(r"^\s*r\s*\+\s*(?:l|ell)\s*$")


@dataclass(frozen=True)
class OversamplingRule:
    """``factor * r + offset`` applied to each (clipped) target rank."""

    factor: int = 2
    offset: int = 0

    @classmethod
    def parse(cls, text: str, ell: int | None = None) -> "OversamplingRule":
        if _RULE_ELL.match(text):
            if ell is None:
                raise ValueError("rule 'r+ell' needs a value for ell")
            return cls(1, int(ell))
        m = _RULE.match(text)
        if not m:
            raise ValueError(f"cannot parse oversampling rule {text!r}")
        factor = int(m.group(1)) if m.group(1) else 1
        offset = int(m.group(3) or 0) * (-1 if m.group(2) == "-" else 1)
        return cls(factor, offset)

    def __call__(self, ranks):
        return tuple(self.factor * r + self.offset for r in ranks)

    def __str__(self):
        head = "r" if self.factor == 1 else f"{self.factor}r"
        if self.offset:
            return f"{head}{self.offset:+d}"
        return head


# -------------------------------------------------------------- spec/record


def trial_seed(seed: int, trial: int) -> int:
    return splitmix64((int(seed) ^ int(trial)) & 0xFFFFFFFFFFFFFFFF)


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    recipe: str
    methods: tuple
    rank_grid: tuple
    recipe_params: dict = field(default_factory=dict)
    oversampling: tuple = ("2r",)
    oversample_side: str = "left"
    drm_kinds: tuple = ("gaussian",)
    trials: int = 30
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(MethodKind.parse(m) for m in self.methods))
        object.__setattr__(self, "drm_kinds", tuple(self.drm_kinds))
        object.__setattr__(self, "oversampling", tuple(str(o) for o in self.oversampling))
        grid = tuple(r if isinstance(r, int) else tuple(int(v) for v in r) for r in self.rank_grid)
        object.__setattr__(self, "rank_grid", grid)
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not grid:
            raise ValueError("rank grid is empty")
        if not self.methods:
            raise ValueError("no methods given")
        if self.oversample_side not in ("left", "right"):
            raise ValueError("oversample_side must be 'left' or 'right'")
        for o in self.oversampling:
            OversamplingRule.parse(o)
        for k in self.drm_kinds:
            if k not in ("gaussian", "tt"):
                raise ValueError(f"unknown DRM kind {k!r}")
        if self.recipe not in _RECIPES:
            raise ValueError(f"unknown recipe {self.recipe!r}")


@dataclass(frozen=True)
class ExperimentRecord:
    experiment: str
    method: str
    drm_kind: str
    rank: str
    oversampling: str
    trial: int
    seed: int
    rel_error_input_norm: float
    rel_error_approx_norm: float
    wall_time_ms: float
    error: str = ""

    @property
    def rank_value(self):
        return _parse_rank_field(self.rank)


COLUMNS = tuple(f.name for f in dataclasses.fields(ExperimentRecord))


def _rank_field(rank):
    return str(rank) if isinstance(rank, int) else "x".join(str(r) for r in rank)


def _parse_rank_field(text):
    parts = tuple(int(v) for v in str(text).split("x"))
    return parts[0] if len(parts) == 1 else parts


# ------------------------------------------------------------------ methods


def _as_matrix(t, cap=None):
    if len(t.shape) != 2:
        raise ValueError("matrix methods need a 2-mode tensor")
    values = t.values if isinstance(t, DenseTensor) else _dense_array(t, cap)
    return unfold(DenseTensor(values), 1)


def _clipped(dims, rank):
    return clip_ranks(dims, rank)


def run_method(method, t, rank, rule: OversamplingRule, side: str, drm_kind: str, seed: int, workers=None):
    """Run one method and return the TT approximation (matrix methods return a d=2 TT)."""
    dims = tuple(t.shape)
    target = _clipped(dims, rank)
    big = rule(target)
    if method is MethodKind.TT_SVD:
        return baselines.tt_svd(t, target)
    if method is MethodKind.TT_HMT:
        return baselines.tt_hmt(t, target, seed, drm_kind)
    if method is MethodKind.STTA:
        if side == "left":
            config = SttaConfig(big, target, seed=seed, drm_kind=drm_kind)
        else:
            config = SttaConfig(target, big, seed=seed, drm_kind=drm_kind)
        return stta_approximate(t, config, workers=workers)
    if method is MethodKind.OTTS:
        return baselines.otts(t, target, big, seed, drm_kind)
    a = _as_matrix(t)
    r = target[0]
    if method is MethodKind.HMT_MATRIX:
        res = baselines.hmt_matrix(a, r, seed)
        left, right = res.Q, res.QtA
    else:
        res = baselines.gn_matrix(a, r, big[0] - r, seed)
        left, right = res.AX, baselines.lstsq_pinv(res.YtAX, res.YtA)
    return TTTensor([left[None, :, :], right[:, :, None]])


def _one(spec, t, method, drm_kind, rank, rule_text, trial, workers):
    seed = trial_seed(spec.seed, trial)
    rule = OversamplingRule.parse(rule_text)
    shown_rule = rule_text if method in (MethodKind.STTA, MethodKind.OTTS, MethodKind.GN_MATRIX) else ""
    base = dict(
        experiment=spec.name, method=method.value, drm_kind=drm_kind if method in RANDOMIZED else "",
        rank=_rank_field(rank), oversampling=shown_rule, trial=trial, seed=seed,
    )
    try:
        start = time.perf_counter()
        approx = run_method(method, t, rank, rule, spec.oversample_side, drm_kind, seed, workers)
        elapsed = 1e3 * (time.perf_counter() - start)
        e_in = rel_error(t, approx, "input")
        e_ap = rel_error(t, approx, "approx")
    except Exception as exc:  # reported in the row, the sweep goes on
        return ExperimentRecord(**base, rel_error_input_norm=float("nan"), rel_error_approx_norm=float("nan"),
                                wall_time_ms=float("nan"), error=f"{type(exc).__name__}: {exc}")
    return ExperimentRecord(**base, rel_error_input_norm=e_in, rel_error_approx_norm=e_ap, wall_time_ms=elapsed)


def _jobs(spec):
    for method in spec.methods:
        kinds = spec.drm_kinds if method in RANDOMIZED else ("",)
        rules = spec.oversampling if method in (MethodKind.STTA, MethodKind.OTTS, MethodKind.GN_MATRIX) else ("2r",)
        trials = range(spec.trials) if method in RANDOMIZED else range(1)
        for kind in kinds:
            for rank in spec.rank_grid:
                for rule in rules:
                    for trial in trials:
                        yield method, kind or "gaussian", rank, rule, trial


def _sort_key(rec: ExperimentRecord):
    rank = rec.rank_value
    rank = (rank,) if isinstance(rank, int) else rank
    rule = OversamplingRule.parse(rec.oversampling) if rec.oversampling else OversamplingRule(0, 0)
    return (rec.method, rec.drm_kind, rank, rule.factor, rule.offset, rec.trial)


def run_experiment(spec: ExperimentSpec, workers: int | None = None, tensor=None) -> list:
    """All (method, DRM kind, rank, oversampling, trial) rows, sorted deterministically.

    The tensor is built once from ``spec.seed`` (or passed in); each trial
    draws its DRMs from ``splitmix64(seed ^ trial)``. Deterministic methods
    run a single trial. Failures are reported in the ``error`` column.
    """
    t = tensor if tensor is not None else build_tensor(spec.recipe, spec.recipe_params, spec.seed)
    jobs = list(_jobs(spec))
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(lambda j: _one(spec, t, *j, None), jobs))
    else:
        records = [_one(spec, t, *j, None) for j in jobs]
    return sorted(records, key=_sort_key)


# --------------------------------------------------------------- summaries


@dataclass(frozen=True)
class Summary:
    method: str
    drm_kind: str
    rank: str
    oversampling: str
    trials: int
    median: float
    p20: float
    p80: float
    median_time_ms: float


def percentiles(values, qs=(20, 50, 80)):
    """Percentiles with linear interpolation between order statistics."""
    v = np.asarray(values, dtype=np.float64)
    return tuple(float(np.percentile(v, q, method="linear")) for q in qs)


def summarize(records, column: str = "rel_error_input_norm") -> list:
    groups = {}
    for rec in records:
        if rec.error:
            continue
        groups.setdefault((rec.method, rec.drm_kind, rec.rank, rec.oversampling), []).append(rec)
    out = []
    for key, recs in groups.items():
        p20, med, p80 = percentiles([getattr(r, column) for r in recs])
        (tmed,) = percentiles([r.wall_time_ms for r in recs], (50,))
        out.append(Summary(*key, len(recs), med, p20, p80, tmed))
    out.sort(key=lambda s: _sort_key(ExperimentRecord("", s.method, s.drm_kind, s.rank, s.oversampling,
                                                      0, 0, 0.0, 0.0, 0.0)))
    return out


# --------------------------------------------------------------------- CSV


def emit_csv(records, path) -> None:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(COLUMNS)
            for rec in records:
                w.writerow([_csv_value(getattr(rec, c)) for c in COLUMNS])
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc


def _csv_value(v):
    return repr(v) if isinstance(v, float) else v


_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentRecord)}


def read_csv(path) -> list:
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise OSError(f"cannot read CSV {path}: {exc}") from exc
    out = []
    for row in rows:
        vals = {}
        for c in COLUMNS:
            raw = row.get(c, "")
            kind = _TYPES[c]
            if kind in ("int", int):
                vals[c] = int(raw)
            elif kind in ("float", float):
                vals[c] = float(raw)
            else:
                vals[c] = raw
        out.append(ExperimentRecord(**vals))
    return out


def emit_plot_data(summaries, path) -> None:
    """Whitespace-separated columns, one block per method/DRM/oversampling, blank-line separated."""
    blocks = {}
    for s in summaries:
        blocks.setdefault((s.method, s.drm_kind, s.oversampling), []).append(s)
    lines = []
    for (method, kind, rule), rows in blocks.items():
        lines.append(f"# {method} {kind or '-'} {rule or '-'}")
        lines.append("# rank median p20 p80 median_time_ms")
        for s in rows:
            lines.append(f"{s.rank} {s.median:.6e} {s.p20:.6e} {s.p80:.6e} {s.median_time_ms:.6e}")
        lines.append("")
        lines.append("")
    try:
        Path(path).write_text("\n".join(lines))
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
