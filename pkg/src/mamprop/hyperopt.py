"""Hyperparameter search: grid, random, and Tree-structured Parzen Estimator.

All searchers maximize the objective callable (by convention the mean
5-fold validation R^2).  Search spaces are declarative: integer and
log-uniform continuous ranges, categorical levels, and conditionals that
activate only for a given parent level (a polynomial degree that exists
only when the kernel is polynomial, say).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .base import ValidationError, rng_stream
from .data_model import LABELS


@dataclass(frozen=True)
class IntUniform:
    lo: int
    hi: int  # inclusive


@dataclass(frozen=True)
class FloatLogUniform:
    lo: float
    hi: float


@dataclass(frozen=True)
class Categorical:
    levels: tuple


@dataclass(frozen=True)
class Conditional:
    parent: str
    level: object
    domain: object


class SearchSpace:
    """Ordered name -> domain mapping; conditional parents must be declared
    before their dependents."""

    def __init__(self, params: dict):
        if not params:
            raise ValidationError("search space cannot be empty")
        seen = set()
        for name, dom in params.items():
            inner = dom.domain if isinstance(dom, Conditional) else dom
            if isinstance(inner, (IntUniform, FloatLogUniform)):
                if not (inner.lo < inner.hi):
                    raise ValidationError(f"{name}: lo must be < hi")
                if isinstance(inner, FloatLogUniform) and inner.lo <= 0:
                    raise ValidationError(f"{name}: log-uniform bounds must be positive")
            elif isinstance(inner, Categorical):
                if len(inner.levels) < 1:
                    raise ValidationError(f"{name}: categorical needs at least one level")
            else:
                raise ValidationError(f"{name}: unsupported domain {inner!r}")
            if isinstance(dom, Conditional):
                if dom.parent not in seen:
                    raise ValidationError(f"{name}: conditional parent {dom.parent!r} not declared before it")
            seen.add(name)
        self.params = dict(params)

    def _active(self, name, dom, config) -> bool:
        return not isinstance(dom, Conditional) or config.get(dom.parent) == dom.level

    def sample(self, rng) -> dict:
        config = {}
        for name, dom in self.params.items():
            if not self._active(name, dom, config):
                continue
            inner = dom.domain if isinstance(dom, Conditional) else dom
            config[name] = _sample_domain(inner, rng)
        return config

    def active_items(self, config):
        for name, dom in self.params.items():
            if self._active(name, dom, config) and name in config:
                inner = dom.domain if isinstance(dom, Conditional) else dom
                yield name, inner


def _sample_domain(dom, rng):
    if isinstance(dom, IntUniform):
        # continuous draw, then round (duplicates allowed by design)
        return int(np.clip(round(rng.uniform(dom.lo, dom.hi)), dom.lo, dom.hi))
    if isinstance(dom, FloatLogUniform):
        return float(np.exp(rng.uniform(math.log(dom.lo), math.log(dom.hi))))
    if isinstance(dom, Categorical):
        return dom.levels[int(rng.integers(len(dom.levels)))]
    raise ValidationError(f"cannot sample from {dom!r}")


@dataclass
class Trial:
    config: dict
    value: float | None
    status: str  # ok | failed

    def to_dict(self):
        return {"config": dict(self.config), "value": self.value, "status": self.status}


class TrialHistory:
    def __init__(self):
        self.trials: list[Trial] = []
        self._best_index: int | None = None

    def append(self, trial: Trial):
        self.trials.append(trial)
        if trial.status == "ok":
            if self._best_index is None or trial.value > self.trials[self._best_index].value:
                self._best_index = len(self.trials) - 1

    @property
    def best(self) -> Trial:
        if self._best_index is None:
            raise ValidationError("no completed trials")
        return self.trials[self._best_index]

    @property
    def best_index(self) -> int:
        if self._best_index is None:
            raise ValidationError("no completed trials")
        return self._best_index

    def completed(self) -> list[Trial]:
        return [t for t in self.trials if t.status == "ok"]

    def to_dict(self) -> dict:
        return {"trials": [t.to_dict() for t in self.trials],
                "best_index": self._best_index}


def _evaluate(objective, config) -> Trial:
    try:
        return Trial(config=config, value=float(objective(config)), status="ok")
    except Exception:
        return Trial(config=config, value=None, status="failed")


# ---------------------------------------------------------------------------
# Grid search

def _grid_points(dom, resolution):
    if isinstance(dom, IntUniform):
        span = dom.hi - dom.lo + 1
        pts = np.unique(np.round(np.linspace(dom.lo, dom.hi, min(resolution, span))).astype(int))
        return [int(p) for p in pts]
    if isinstance(dom, FloatLogUniform):
        return [float(v) for v in np.geomspace(dom.lo, dom.hi, resolution)]
    if isinstance(dom, Categorical):
        return list(dom.levels)
    raise ValidationError(f"cannot grid {dom!r}")


def grid_search(space: SearchSpace, objective, resolution: int = 10) -> TrialHistory:
    """Evaluate every grid point (conditionals expand only when active)."""
    if resolution < 1:
        raise ValidationError("resolution must be >= 1")

    configs = [{}]
    for name, dom in space.params.items():
        nxt = []
        for cfg in configs:
            if isinstance(dom, Conditional):
                if cfg.get(dom.parent) == dom.level:
                    for val in _grid_points(dom.domain, resolution):
                        c = dict(cfg)
                        c[name] = val
                        nxt.append(c)
                else:
                    nxt.append(cfg)
            else:
                for val in _grid_points(dom, resolution):
                    c = dict(cfg)
                    c[name] = val
                    nxt.append(c)
        configs = nxt
    if not configs:
        raise ValidationError("empty grid")

    history = TrialHistory()
    for cfg in configs:
        history.append(_evaluate(objective, cfg))
    return history


def random_search(space: SearchSpace, objective, n_trials: int, seed: int = 0) -> TrialHistory:
    if n_trials < 1:
        raise ValidationError("n_trials must be >= 1")
    rng = rng_stream(seed)
    history = TrialHistory()
    for _ in range(n_trials):
        history.append(_evaluate(objective, space.sample(rng)))
    return history


# ---------------------------------------------------------------------------
# TPE

def _transform(dom, value):
    if isinstance(dom, FloatLogUniform):
        return math.log(value)
    return float(value)


def _domain_window(dom):
    if isinstance(dom, FloatLogUniform):
        return math.log(dom.lo), math.log(dom.hi)
    return float(dom.lo), float(dom.hi)


def _bandwidth(values_t, lo, hi):
    width = hi - lo
    n = len(values_t)
    sigma = float(np.std(values_t)) if n > 1 else 0.0
    return max(sigma * n ** (-0.2), 0.01 * width)


def _kde_logpdf(x_t, values_t, lo, hi):
    """Mixture of Gaussian kernels around observed values plus one uniform
    prior component over the (transformed) domain, all equally weighted."""
    width = hi - lo
    prior = 1.0 / width
    if not values_t:
        return math.log(prior)
    bw = _bandwidth(values_t, lo, hi)
    vals = np.asarray(values_t)
    dens = np.exp(-0.5 * ((x_t - vals) / bw) ** 2) / (bw * math.sqrt(2 * math.pi))
    total = (float(dens.sum()) + prior) / (len(values_t) + 1)
    return math.log(max(total, 1e-300))


def _categorical_logpdf(value, observed, levels):
    counts = {lvl: 1.0 for lvl in levels}  # add-one smoothing
    for v in observed:
        counts[v] = counts.get(v, 1.0) + 1.0
    total = sum(counts.values())
    return math.log(counts.get(value, 1.0) / total)


def _sample_from_set(dom, values, rng):
    if isinstance(dom, Categorical):
        counts = np.array([1.0 + sum(1 for v in values if v == lvl) for lvl in dom.levels])
        probs = counts / counts.sum()
        return dom.levels[int(rng.choice(len(dom.levels), p=probs))]
    lo, hi = _domain_window(dom)
    pick = int(rng.integers(len(values) + 1))
    if pick == len(values):  # prior component
        x_t = float(rng.uniform(lo, hi))
    else:
        values_t = [_transform(dom, v) for v in values]
        bw = _bandwidth(values_t, lo, hi)
        x_t = float(rng.normal(values_t[pick], bw))
    x_t = min(max(x_t, lo), hi)  # never propose out of domain
    if isinstance(dom, FloatLogUniform):
        return float(math.exp(x_t))
    return int(np.clip(round(x_t), dom.lo, dom.hi))


def _tpe_propose(space: SearchSpace, completed, rng, gamma, n_candidates):
    order = sorted(range(len(completed)), key=lambda i: (-completed[i].value, i))
    n_good = max(1, math.ceil(gamma * len(completed)))
    good = [completed[i].config for i in order[:n_good]]
    bad = [completed[i].config for i in order[n_good:]]

    candidates = []
    for _ in range(n_candidates):
        config = {}
        for name, dom in space.params.items():
            if isinstance(dom, Conditional):
                if config.get(dom.parent) != dom.level:
                    continue
                inner = dom.domain
            else:
                inner = dom
            good_vals = [c[name] for c in good if name in c]
            config[name] = _sample_from_set(inner, good_vals, rng)
        candidates.append(config)

    def score(config) -> float:
        total = 0.0
        for name, inner in space.active_items(config):
            value = config[name]
            good_vals = [c[name] for c in good if name in c]
            bad_vals = [c[name] for c in bad if name in c]
            if isinstance(inner, Categorical):
                total += _categorical_logpdf(value, good_vals, inner.levels)
                total -= _categorical_logpdf(value, bad_vals, inner.levels)
            else:
                lo, hi = _domain_window(inner)
                x_t = _transform(inner, value)
                total += _kde_logpdf(x_t, [_transform(inner, v) for v in good_vals], lo, hi)
                total -= _kde_logpdf(x_t, [_transform(inner, v) for v in bad_vals], lo, hi)
        return total

    scores = [score(c) for c in candidates]
    return candidates[int(np.argmax(scores))]


def tpe_search(space: SearchSpace, objective, n_trials: int, seed: int = 0,
               gamma: float = 0.25, n_candidates: int = 24, n_startup: int = 10) -> TrialHistory:
    """Random startup trials, then candidates drawn from the good-trial
    density and ranked by the good/bad density ratio."""
    if n_trials <= n_startup:
        raise ValidationError(f"n_trials must exceed n_startup ({n_startup})")
    if not (0 < gamma < 1):
        raise ValidationError("gamma must be in (0, 1)")
    rng = rng_stream(seed)
    history = TrialHistory()
    for t in range(n_trials):
        completed = history.completed()
        if t < n_startup or not completed:
            config = space.sample(rng)
        else:
            config = _tpe_propose(space, completed, rng, gamma, n_candidates)
        history.append(_evaluate(objective, config))
    return history


# ---------------------------------------------------------------------------
# Benchmark search spaces

_NEURONS = (32, 64, 128, 256, 512)
_TUNABLE = ("rf", "gb", "svr", "mlp")


def builtin_space(task: str, family: str) -> SearchSpace:
    """The benchmark's published ranges per (task, model family)."""
    from .learners import canonical_family

    if task not in LABELS:
        raise ValidationError(f"unknown task {task!r}")
    fam = canonical_family(family)
    if fam not in _TUNABLE:
        raise ValidationError(f"no benchmark search space for family {family!r}")
    if fam in ("rf", "gb"):
        return SearchSpace({"n_estimators": IntUniform(1, 500)})
    if fam == "svr":
        return SearchSpace({
            "c": IntUniform(1, 1000),
            "kernel": Categorical(("linear", "poly", "rbf", "sigmoid")),
            "degree": Conditional("kernel", "poly", Categorical((2, 3, 4))),
        })
    return SearchSpace({
        "n1": Categorical(_NEURONS),
        "n2": Categorical(_NEURONS),
        "n3": Categorical(_NEURONS),
        "alpha": FloatLogUniform(1e-7, 1e-1),
    })


def config_to_params(family: str, config: dict) -> dict:
    """Map a search-space configuration onto estimator constructor arguments."""
    from .learners import canonical_family

    fam = canonical_family(family)
    cfg = dict(config)
    if fam == "mlp" and {"n1", "n2", "n3"} <= set(cfg):
        cfg["layer_sizes"] = (cfg.pop("n1"), cfg.pop("n2"), cfg.pop("n3"))
    return cfg
