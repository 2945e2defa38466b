"""Nonlinear wave propagation on a spherical shell, forward and inverse.

Governing equation: u_tt = c^2 (u_xx + u_yy + u_zz) + sin(u) + Q with a
traveling, slowly decaying closed-form solution

    u(x, y, z, t) = cos(x + y + z - 0.2 pi t) * 40 / (t + 40)

that fixes the initial condition, the Dirichlet boundary values and
(after substitution into the equation) the source Q.  The inverse mode
drops the known Q and gives the network a second output that has to
recover it from sparse point measurements of u.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..autodiff import kmul, kunary
from ..multiindex import JetSpace
from ..network import forward
from ..sampling import Dataset, SphericalShell
from .base import ModelPredictor, mean_sq, mlp_output_jets, take_output

OMEGA = 0.2 * np.pi
DECAY = 40.0

#: Default measurement locations for the source-inversion mode.
MEASUREMENT_POINTS = (
    (0.8, 0.0, 0.0),
    (-0.8, 0.0, 0.0),
    (0.0, 0.8, 0.0),
    (0.0, -0.8, 0.0),
)


def wave_exact(points) -> np.ndarray:
    """Closed-form displacement at (x, y, z, t) rows."""
    pts = np.asarray(points, dtype=np.float64)
    s = pts[:, 0] + pts[:, 1] + pts[:, 2]
    return np.cos(s - OMEGA * pts[:, 3]) * DECAY / (pts[:, 3] + DECAY)


def wave_exact_dt(points) -> np.ndarray:
    """Time derivative of the closed form (the velocity initial condition)."""
    pts = np.asarray(points, dtype=np.float64)
    s = pts[:, 0] + pts[:, 1] + pts[:, 2]
    phase = s - OMEGA * pts[:, 3]
    amp = DECAY / (pts[:, 3] + DECAY)
    return OMEGA * np.sin(phase) * amp - np.cos(phase) * DECAY / (pts[:, 3] + DECAY) ** 2


def wave_source(points) -> np.ndarray:
    """Source Q obtained by substituting the exact solution into the PDE."""
    pts = np.asarray(points, dtype=np.float64)
    s = pts[:, 0] + pts[:, 1] + pts[:, 2]
    t = pts[:, 3]
    phase = s - OMEGA * t
    amp = DECAY / (t + DECAY)
    u = np.cos(phase) * amp
    return (
        -np.sin(u)
        + (3.0 - OMEGA ** 2) * u
        - 2.0 * OMEGA * np.sin(phase) * DECAY / (t + DECAY) ** 2
        + np.cos(phase) * 2.0 * DECAY / (t + DECAY) ** 3
    )


def wave_exact_jets(points, space: JetSpace) -> np.ndarray:
    """Jet coefficients of the exact solution (for manufactured checks)."""
    seeds = space.seed(np.asarray(points, dtype=np.float64))
    s = seeds[:, 0] + seeds[:, 1] + seeds[:, 2] - OMEGA * seeds[:, 3]
    t_shift = seeds[:, 3].copy()
    t_shift[:, 0] += DECAY
    inv, _ = kunary("recip", t_shift, space, need_w=False)
    cos_s, _ = kunary("cos", s, space, need_w=False)
    return DECAY * kmul(cos_s, inv, space)


@dataclass(frozen=True)
class WaveProblem:
    """Nonlinear wave benchmark; set inverse=True for source recovery."""

    c: float = 1.0
    r_in: float = 0.6
    r_out: float = 1.0
    inverse: bool = False
    geometry: SphericalShell = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "geometry", SphericalShell(self.r_in, self.r_out))

    name = "wave"
    time_order = 2
    jet_order = 2
    spatial_dim = 3
    n_extra_params = 0
    target_keys = ("value",)

    @property
    def n_outputs(self) -> int:
        return 2 if self.inverse else 1

    @property
    def input_dim(self) -> int:
        return 4

    # -- jet spaces ------------------------------------------------------

    @property
    def residual_space(self) -> JetSpace:
        return JetSpace.reduced(4, ((2, 0, 0, 0), (0, 2, 0, 0), (0, 0, 2, 0), (0, 0, 0, 2)))

    # -- dataset target functions -----------------------------------------

    def initial_targets(self, space_pts) -> dict[str, np.ndarray]:
        pts = np.column_stack([space_pts, np.zeros(space_pts.shape[0])])
        return {"value": wave_exact(pts), "dt": wave_exact_dt(pts)}

    def boundary_targets(self, pts) -> dict[str, np.ndarray]:
        return {"value": wave_exact(pts)}

    # -- network evaluation ------------------------------------------------

    def predict_values(self, params, spec, pts) -> dict[str, np.ndarray]:
        vals = forward(params, spec, np.asarray(pts, dtype=np.float64))
        return {"value": vals[:, 0]}

    def predict_values_with_dt(self, params, spec, pts) -> dict[str, np.ndarray]:
        from ..autodiff import AdjointRecorder
        from .base import build_layers

        pts = np.asarray(pts, dtype=np.float64)
        space = JetSpace.full(4, 1)
        rec = AdjointRecorder()
        layers = build_layers(rec, params, spec, trainable=False)
        out = mlp_output_jets(rec, layers, spec.activation, pts, space)
        return {
            "value": out.value[:, 0, 0].copy(),
            "dt": out.value[:, 0, space.derivative_index(3)].copy(),
        }

    def predict_source(self, params, spec, pts) -> np.ndarray:
        """Inverse mode: the network's recovered source values."""
        if not self.inverse:
            return wave_source(pts)
        vals = forward(params, spec, np.asarray(pts, dtype=np.float64))
        return vals[:, 1]

    def predictor(self, params, spec) -> ModelPredictor:
        return ModelPredictor(self, params, spec)

    # -- loss assembly -----------------------------------------------------

    def residual_nodes(self, rec, layers, activation, pts) -> dict:
        space = self.residual_space
        out = mlp_output_jets(rec, layers, activation, pts, space)
        u = take_output(rec, out, 0)
        u_tt = rec.extract(u, space.index_of((0, 0, 0, 2)))
        lap = (rec.extract(u, space.index_of((2, 0, 0, 0)))
               + rec.extract(u, space.index_of((0, 2, 0, 0)))
               + rec.extract(u, space.index_of((0, 0, 2, 0))))
        u_val = rec.extract(u, 0)
        if self.inverse:
            q = rec.extract(take_output(rec, out, 1), 0)
        else:
            q = rec.constant(wave_source(pts))
        r = u_tt - rec.scale(lap, self.c ** 2) - rec.unary("sin", u_val) - q
        return {"residual": r}

    def stage_components(self, rec, layers, extras, activation, datasets) -> dict:
        """Scalar loss nodes per component for one training stage."""
        comps = {}
        if "residual" in datasets:
            r = self.residual_nodes(rec, layers, activation, datasets["residual"].points)
            comps["residual"] = mean_sq(rec, r["residual"])
        for kind, name in (("initial", "ic"), ("transfer_initial", "ic")):
            if kind in datasets:
                ds = datasets[kind]
                space = JetSpace.full(4, 1)
                out = mlp_output_jets(rec, layers, activation, ds.points, space)
                u = take_output(rec, out, 0)
                err_v = rec.extract(u, 0) - rec.constant(ds.targets["value"])
                # value and velocity sums share one normalization (N1 + N2 points)
                sq = rec.sum(err_v * err_v)
                n_terms = len(ds)
                if "dt" in ds.targets:
                    err_d = (rec.extract(u, space.derivative_index(3))
                             - rec.constant(ds.targets["dt"]))
                    sq = sq + rec.sum(err_d * err_d)
                    n_terms += len(ds)
                comps[name] = rec.scale(sq, 1.0 / n_terms)
        if "boundary" in datasets:
            ds = datasets["boundary"]
            pred = self.predict_value_nodes(rec, layers, activation, ds.points)
            comps["bc"] = mean_sq(rec, pred - rec.constant(ds.targets["value"]))
        if "supervised" in datasets:
            ds = datasets["supervised"]
            pred = self.predict_value_nodes(rec, layers, activation, ds.points)
            comps["sp"] = mean_sq(rec, pred - rec.constant(ds.targets["value"]))
        if "measurement" in datasets and len(datasets["measurement"]):
            ds = datasets["measurement"]
            pred = self.predict_value_nodes(rec, layers, activation, ds.points)
            comps["measurement"] = mean_sq(rec, pred - rec.constant(ds.targets["value"]))
        return comps

    def predict_value_nodes(self, rec, layers, activation, pts):
        space = JetSpace.full(4, 0)
        out = mlp_output_jets(rec, layers, activation, pts, space)
        return rec.extract(take_output(rec, out, 0), 0)

    # -- metrics ------------------------------------------------------------

    def reference_values(self, pts) -> np.ndarray:
        return wave_exact(pts)


def make_measurements(truth_fn, locations, t_lo: float, t_hi: float, cadence: float,
                      noise_pct: float, seed) -> Dataset:
    """Sample a truth function on a time grid and add multiplicative noise.

    Readings start one cadence after t_lo; noise is Gaussian with sigma
    equal to `noise_pct` of each true value.
    """
    locations = np.asarray(locations, dtype=np.float64)
    times = np.arange(t_lo + cadence, t_hi + 1e-12, cadence)
    pts = np.column_stack([
        np.repeat(locations, len(times), axis=0),
        np.tile(times, len(locations)),
    ])
    values = np.asarray(truth_fn(pts), dtype=np.float64)
    if noise_pct:
        rng = np.random.default_rng(seed)
        values = values * (1.0 + noise_pct * rng.standard_normal(values.shape))
    return Dataset("measurement", pts, {"value": values})
