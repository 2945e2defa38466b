"""Loss families, weighted totals, and the adaptive weight annealer.

Component losses are mean-squared mismatches or residuals; each problem
assembles its own components on a recorder (see problems/*), and this
module weights, totals, differentiates and logs them.  Component names
map onto named weights:

    residual -> w_r        ic/ic1/ic2 -> w_i      bc -> w_b
    sp -> w_sp             measurement -> w_l
    pde1/pde2, data1/data2, sp1/sp2 -> the channel-flow weights

The annealer rebalances the channel-flow weights from gradient
statistics, anchored at w_pde1 = 1, and freezes permanently after a
configured iteration count.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .autodiff import AdjointRecorder, grad_params
from .errors import ConfigurationError, NumericError
from .network import param_length
from .problems.base import build_layers

#: Annealing never scales a weight by more than this, so early vanishing
#: gradients cannot blow the balance up.
ANNEAL_RATIO_CAP = 1e6

#: Components the annealer may touch (the anchor pde1 stays at 1).
ANNEALED_COMPONENTS = ("pde2", "data1", "data2", "sp1", "sp2")


@dataclass(frozen=True)
class LossWeights:
    """Named nonnegative weights; defaults follow the all-ones convention."""

    w_i: float = 1.0
    w_b: float = 1.0
    w_r: float = 1.0
    w_sp: float = 1.0
    w_l: float = 1.0
    w_pde1: float = 1.0
    w_pde2: float = 1.0
    w_data1: float = 1.0
    w_data2: float = 1.0
    w_sp1: float = 1.0
    w_sp2: float = 1.0

    def __post_init__(self):
        for name, value in self.as_dict().items():
            if not np.isfinite(value) or value < 0.0:
                raise ConfigurationError(f"weight {name} must be finite and >= 0")

    def as_dict(self) -> dict[str, float]:
        return {k: float(getattr(self, k)) for k in self.__dataclass_fields__}


_COMPONENT_WEIGHT = {
    "residual": "w_r", "ic": "w_i", "ic1": "w_i", "ic2": "w_i", "bc": "w_b",
    "sp": "w_sp", "measurement": "w_l",
    "pde1": "w_pde1", "pde2": "w_pde2", "data1": "w_data1", "data2": "w_data2",
    "sp1": "w_sp1", "sp2": "w_sp2",
}


def component_weight(weights: LossWeights, name: str) -> float:
    try:
        return float(getattr(weights, _COMPONENT_WEIGHT[name]))
    except KeyError:
        raise ConfigurationError(f"no weight defined for loss component {name!r}")


@dataclass(frozen=True)
class LossBreakdown:
    """Per-component values plus the weighted total."""

    components: dict[str, float]
    weights: dict[str, float]
    total: float


def total_loss(components: dict[str, float], weights: LossWeights) -> LossBreakdown:
    """Weighted sum of component losses; zero-weight components drop out."""
    used = {}
    total = 0.0
    for name in components:
        w = component_weight(weights, name)
        used[name] = w
        if w != 0.0:
            total += w * components[name]
    return LossBreakdown(dict(components), used, total)


def anneal_weights(prev: LossWeights, grad_stats: dict[str, tuple[float, float]],
                   alpha: float = 0.1) -> LossWeights:
    """One update of the gradient-balance annealer.

    ``grad_stats`` maps component name to (max |grad|, mean |grad|); the
    anchor entry 'pde1' supplies the numerator.  Each annealed weight
    moves toward max|grad_pde1| / (w_j * mean|grad_j|); ratios are capped
    so a vanishing component gradient cannot produce a non-finite weight.
    """
    if not 0.0 < alpha <= 1.0:
        raise ConfigurationError("annealing rate alpha must be in (0, 1]")
    if "pde1" not in grad_stats:
        raise ConfigurationError("annealing needs gradient stats for the anchor pde1")
    ref_max = float(grad_stats["pde1"][0])
    updates = {}
    for name in ANNEALED_COMPONENTS:
        if name not in grad_stats:
            continue
        mean_j = float(grad_stats[name][1])
        w_prev = component_weight(prev, name)
        ratio = ref_max / mean_j if mean_j > 0.0 else ANNEAL_RATIO_CAP
        ratio = min(ratio, ANNEAL_RATIO_CAP)
        updates["w_" + name] = (1.0 - alpha) * w_prev + alpha * ratio / w_prev
    out = replace(prev, w_pde1=1.0, **updates)
    return out


# ---------------------------------------------------------------------------
# Public per-family wrappers (evaluate one component on a fresh recorder).


def _components(problem, params, spec, datasets: dict) -> dict[str, float]:
    rec = AdjointRecorder()
    layers = build_layers(rec, params, spec, trainable=False)
    extras = _extra_values(problem, params, spec, rec, trainable=False)
    nodes = problem.stage_components(rec, layers, extras, spec.activation, datasets)
    out = {}
    for name, node in nodes.items():
        value = float(node.value)
        if not np.isfinite(value):
            raise NumericError(f"loss component {name!r} is not finite")
        out[name] = value
    return out


def _extra_values(problem, params, spec, rec, trainable):
    n_extra = getattr(problem, "n_extra_params", 0)
    if n_extra == 0:
        return []
    tail = np.asarray(params[param_length(spec):], dtype=np.float64)
    if tail.shape[0] != n_extra:
        raise ConfigurationError(
            f"problem expects {n_extra} extra parameters, vector carries {tail.shape[0]}")
    make = rec.leaf if trainable else rec.constant
    return [make(np.asarray(v)) for v in tail]


def residual_loss(problem, params, spec, dataset) -> float:
    """Mean squared governing-equation residual over a residual dataset."""
    comps = _components(problem, params, spec, {"residual": dataset})
    vals = [v for k, v in comps.items() if k.startswith(("residual", "pde"))]
    return float(sum(vals))


def ic_loss(problem, params, spec, dataset) -> float:
    kind = dataset.kind if dataset.kind in ("initial", "transfer_initial") else "initial"
    comps = _components(problem, params, spec, {kind: dataset})
    return float(sum(v for k, v in comps.items() if k.startswith("ic")))


def bc_loss(problem, params, spec, dataset) -> float:
    comps = _components(problem, params, spec, {"boundary": dataset})
    return comps["bc"]


def supervised_loss(problem, params, spec, dataset) -> float:
    key = "supervised" if dataset.kind != "measurement" else "measurement"
    comps = _components(problem, params, spec, {key: dataset})
    return float(sum(comps.values()))


# ---------------------------------------------------------------------------
# Training objective.


class StageObjective:
    """Weighted loss + gradient for one training stage's datasets.

    Exposes ``value_and_grad`` for optimizers and ``gradient_stats`` for
    the annealer; both evaluate on a fresh recorder per call.
    """

    def __init__(self, problem, spec, datasets: dict, weights: LossWeights):
        self.problem = problem
        self.spec = spec
        self.datasets = {k: d for k, d in datasets.items() if d is not None and len(d)}
        self.weights = weights
        self.last_breakdown: LossBreakdown | None = None

    def _build(self, params):
        rec = AdjointRecorder()
        layers = build_layers(rec, params, self.spec, trainable=True)
        extras = _extra_values(self.problem, params, self.spec, rec, trainable=True)
        nodes = self.problem.stage_components(
            rec, layers, extras, self.spec.activation, self.datasets)
        leaves = [n for pair in layers for n in pair] + list(extras)
        return rec, nodes, leaves

    def components(self, params) -> dict[str, float]:
        _, nodes, _ = self._build(params)
        return {k: float(n.value) for k, n in nodes.items()}

    def value_and_grad(self, params) -> tuple[float, np.ndarray, LossBreakdown]:
        rec, nodes, leaves = self._build(params)
        total = None
        comp_vals = {}
        for name, node in nodes.items():
            w = component_weight(self.weights, name)
            comp_vals[name] = float(node.value)
            if w == 0.0:
                continue
            term = rec.scale(node, w)
            total = term if total is None else total + term
        if total is None:
            raise ConfigurationError("all loss components have zero weight")
        breakdown = LossBreakdown(comp_vals, {k: component_weight(self.weights, k)
                                              for k in comp_vals}, float(total.value))
        self.last_breakdown = breakdown
        grad = grad_params(total, rec, leaves)
        return breakdown.total, grad, breakdown

    def gradient_stats(self, params) -> dict[str, tuple[float, float]]:
        """(max |grad|, mean |grad|) per component, for weight annealing."""
        rec, nodes, leaves = self._build(params)
        stats = {}
        for name, node in nodes.items():
            g = grad_params(node, rec, leaves)
            ga = np.abs(g)
            stats[name] = (float(ga.max()), float(ga.mean()))
        return stats
