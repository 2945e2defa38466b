"""Shared machinery for benchmark problem definitions.

A problem object owns its geometry, residual operator, target functions
and output conventions.  The training loop talks to problems through:

* ``stage_components(rec, layers, extras, datasets)`` -- scalar loss
  nodes per component, built on the caller's recorder;
* ``predictor(params, spec)`` -- a cheap evaluator used for supervised
  targets, window handoff and metrics (same kernels as training, so
  supervised targets match forward evaluation bitwise);
* metadata: ``time_order``, ``n_outputs``, ``n_extra_params``,
  ``target_keys``.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import AdjointRecorder, mlp_apply_jets
from ..multiindex import JetSpace
from ..network import forward, unpack_params


def mean_sq(rec, node):
    """Mean of squares of a per-point node."""
    return rec.mean(node * node)


def mlp_output_jets(rec, layers, activation, pts, space):
    """Jets of every network output over a point batch: (N, n_out, C) node."""
    seeds = rec.constant(space.seed(np.asarray(pts, dtype=np.float64)))
    return mlp_apply_jets(rec, layers, activation, seeds, space)


def take_output(rec, out_node, j):
    """Jet coefficients of one network output: (N, C) node."""
    return rec.emit("take_output", (out_node,), aux=j)


def build_layers(rec: AdjointRecorder, params, spec, trainable: bool = True):
    """Register network parameters on a recorder, layer by layer."""
    make = rec.leaf if trainable else rec.constant
    return [(make(w), make(b)) for w, b in unpack_params(params, spec)]


class ModelPredictor:
    """Evaluates a trained problem model at points, without gradients.

    ``predict`` returns the problem's target-keyed values; for
    second-order problems ``predict_with_dt`` adds time derivatives.
    Value predictions run through the same order-0 kernel path as
    network.forward, so handing them to supervised datasets preserves
    bitwise equality with later forward evaluations.
    """

    def __init__(self, problem, params, spec):
        self.problem = problem
        self.params = np.asarray(params, dtype=np.float64)
        self.spec = spec

    def predict(self, pts) -> dict[str, np.ndarray]:
        return self.problem.predict_values(self.params, self.spec, pts)

    def predict_with_dt(self, pts) -> dict[str, np.ndarray]:
        return self.problem.predict_values_with_dt(self.params, self.spec, pts)
