"""Kirchhoff plate with linearly varying thickness, clamped on all edges.

The deflection field w satisfies the variable-stiffness vibration
equation

    D lap^2 w + 2 D_x d_x(lap w) + 2 D_y d_y(lap w) + (lap D)(lap w)
      - (1 - mu) (D_xx w_yy - 2 D_xy w_xy + D_yy w_xx) + rho h w_tt = F

with D = E h^3 / (12 (1 - mu^2)) and h linear in y, so D and its y
derivatives are closed-form cubics.  Boundary conditions are enforced
exactly by the hard-constraint ansatz w = u * x^2 y^2 (x-1)^2 (y-1)^2,
leaving only the initial condition and the residual in the loss.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..autodiff import AdjointRecorder, Jet, kmul
from ..multiindex import JetSpace
from ..network import forward
from ..sampling import UnitSquarePlate
from .base import ModelPredictor, build_layers, mean_sq, mlp_output_jets, take_output

#: Derivative set the residual needs: full biharmonic family plus w_tt.
_RESIDUAL_DERIVS = (
    (4, 0, 0), (0, 4, 0), (2, 2, 0),
    (3, 0, 0), (1, 2, 0), (2, 1, 0), (0, 3, 0),
    (2, 0, 0), (0, 2, 0), (1, 1, 0),
    (0, 0, 2),
)


@dataclass(frozen=True)
class PlateProblem:
    """Clamped square plate, thickness h = h_slope * y + h_base."""

    elastic_modulus: float = 3.0e10
    poisson: float = 0.3
    density: float = 2500.0
    h_base: float = 0.016
    h_slope: float = 0.008
    load_scale: float = 25000.0
    include_velocity_ic: bool = False
    geometry: UnitSquarePlate = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "geometry", UnitSquarePlate())

    name = "plate"
    time_order = 2
    jet_order = 4
    spatial_dim = 2
    n_outputs = 1
    n_extra_params = 0
    target_keys = ("value",)
    uses_boundary_data = False  # boundary conditions hold by construction

    @property
    def input_dim(self) -> int:
        return 3

    @property
    def residual_space(self) -> JetSpace:
        return JetSpace.reduced(3, _RESIDUAL_DERIVS)

    # -- material fields ---------------------------------------------------

    def thickness(self, y):
        return self.h_slope * np.asarray(y) + self.h_base

    def stiffness(self, y):
        h = self.thickness(y)
        return self.elastic_modulus * h ** 3 / (12.0 * (1.0 - self.poisson ** 2))

    def stiffness_dy(self, y):
        h = self.thickness(y)
        return self.elastic_modulus * 3.0 * self.h_slope * h ** 2 / (12.0 * (1.0 - self.poisson ** 2))

    def stiffness_dyy(self, y):
        h = self.thickness(y)
        return self.elastic_modulus * 6.0 * self.h_slope ** 2 * h / (12.0 * (1.0 - self.poisson ** 2))

    def load(self, t):
        """Uniform pressure history driving the plate."""
        t = np.asarray(t, dtype=np.float64)
        return self.load_scale * (np.sin(t / 2.0) + 0.5 * np.cos(t / 3.0)
                                  + np.exp(-t / 10.0)) * np.sin(t / 5.0)

    # -- dataset target functions -------------------------------------------

    def initial_targets(self, space_pts) -> dict[str, np.ndarray]:
        n = space_pts.shape[0]
        targets = {"value": np.zeros(n)}
        if self.include_velocity_ic:
            targets["dt"] = np.zeros(n)
        return targets

    def boundary_targets(self, pts) -> dict[str, np.ndarray]:
        return {"value": np.zeros(pts.shape[0])}

    # -- network evaluation (through the ansatz) -----------------------------

    def predict_values(self, params, spec, pts) -> dict[str, np.ndarray]:
        pts = np.asarray(pts, dtype=np.float64)
        raw = forward(params, spec, pts)[:, 0]
        return {"value": raw * _multiplier_values(pts)}

    def predict_values_with_dt(self, params, spec, pts) -> dict[str, np.ndarray]:
        pts = np.asarray(pts, dtype=np.float64)
        space = JetSpace.full(3, 1)
        rec = AdjointRecorder()
        layers = build_layers(rec, params, spec, trainable=False)
        out = mlp_output_jets(rec, layers, spec.activation, pts, space)
        mult = _multiplier_values(pts)
        u = out.value[:, 0, :]
        return {
            "value": u[:, 0] * mult,
            "dt": u[:, space.derivative_index(2)] * mult,  # multiplier is static
        }

    def predictor(self, params, spec) -> ModelPredictor:
        return ModelPredictor(self, params, spec)

    # -- loss assembly --------------------------------------------------------

    def residual_nodes(self, rec, layers, activation, pts) -> dict:
        space = self.residual_space
        out = mlp_output_jets(rec, layers, activation, pts, space)
        u = take_output(rec, out, 0)
        mult = rec.constant(ansatz_multiplier_coeffs(pts, space))
        w = rec.jet_mul(u, mult, space)
        r = self._residual_from_w(rec, w, space, pts)
        return {"residual": r}

    def _residual_from_w(self, rec, w, space: JetSpace, pts):
        y = pts[:, 1]
        t = pts[:, 2]
        d = rec.constant(self.stiffness(y))
        d_y = rec.constant(self.stiffness_dy(y))
        d_yy = rec.constant(self.stiffness_dyy(y))
        rho_h = rec.constant(self.density * self.thickness(y))

        def part(*axes):
            return rec.extract(w, space.derivative_index(*axes))

        biharm = part(0, 0, 0, 0) + rec.scale(part(0, 0, 1, 1), 2.0) + part(1, 1, 1, 1)
        lap = part(0, 0) + part(1, 1)
        dy_lap = part(0, 0, 1) + part(1, 1, 1)
        lhs = (d * biharm
               + rec.scale(d_y * dy_lap, 2.0)
               + d_yy * lap
               - rec.scale(d_yy * part(0, 0), 1.0 - self.poisson)
               + rho_h * part(2, 2))
        return lhs - rec.constant(self.load(t))

    def stage_components(self, rec, layers, extras, activation, datasets) -> dict:
        comps = {}
        if "residual" in datasets:
            r = self.residual_nodes(rec, layers, activation, datasets["residual"].points)
            comps["residual"] = mean_sq(rec, r["residual"])
        for kind in ("initial", "transfer_initial"):
            if kind not in datasets:
                continue
            ds = datasets[kind]
            space = JetSpace.full(3, 1)
            out = mlp_output_jets(rec, layers, activation, ds.points, space)
            u = take_output(rec, out, 0)
            mult = rec.constant(_multiplier_values(ds.points))
            w_val = rec.extract(u, 0) * mult
            err = w_val - rec.constant(ds.targets["value"])
            sq = rec.sum(err * err)
            n_terms = len(ds)
            if "dt" in ds.targets:
                w_dt = rec.extract(u, space.derivative_index(2)) * mult
                err_d = w_dt - rec.constant(ds.targets["dt"])
                sq = sq + rec.sum(err_d * err_d)
                n_terms += len(ds)
            comps["ic"] = rec.scale(sq, 1.0 / n_terms)
        if "supervised" in datasets:
            ds = datasets["supervised"]
            pred = self.predict_value_nodes(rec, layers, activation, ds.points)
            comps["sp"] = mean_sq(rec, pred - rec.constant(ds.targets["value"]))
        return comps

    def predict_value_nodes(self, rec, layers, activation, pts):
        space = JetSpace.full(3, 0)
        out = mlp_output_jets(rec, layers, activation, pts, space)
        raw = rec.extract(take_output(rec, out, 0), 0)
        return raw * rec.constant(_multiplier_values(pts))

    def reference_values(self, pts) -> np.ndarray:
        raise NotImplementedError(
            "the plate has no closed-form reference; compare against the "
            "finite-difference oracle")


# ---------------------------------------------------------------------------
# Hard-constraint ansatz multiplier x^2 y^2 (x-1)^2 (y-1)^2.


def _multiplier_values(pts) -> np.ndarray:
    x = pts[:, 0]
    y = pts[:, 1]
    return (x * (x - 1.0) * y * (y - 1.0)) ** 2


def ansatz_multiplier_coeffs(pts, space: JetSpace) -> np.ndarray:
    """Jet coefficients of the boundary-vanishing polynomial multiplier.

    Exact to every retained derivative order; the double roots on the
    edges zero the value and the normal derivative identically.
    """
    pts = np.asarray(pts, dtype=np.float64)
    seeds = space.seed(pts)
    x, y = seeds[:, 0], seeds[:, 1]
    x1 = x.copy()
    x1[:, 0] -= 1.0
    y1 = y.copy()
    y1[:, 0] -= 1.0
    gx = kmul(x, x1, space)
    gy = kmul(y, y1, space)
    g = kmul(gx, gy, space)
    return kmul(g, g, space)


def plate_ansatz(u_jet: Jet, x: float, y: float) -> Jet:
    """Deflection jet from a raw network-output jet at one point."""
    space = JetSpace.full(u_jet.dim, u_jet.order)
    pts = np.array([[x, y, 0.0]])[:, : u_jet.dim]
    mult = ansatz_multiplier_coeffs(pts, space)[0]
    return Jet(u_jet.order, u_jet.dim, kmul(u_jet.coeffs, mult, space))


def plate_residual(w_jet: Jet, problem: PlateProblem, y: float, t: float) -> float:
    """Governing-equation residual from a deflection jet at one point."""
    d = problem.stiffness(y)
    d_y = problem.stiffness_dy(y)
    d_yy = problem.stiffness_dyy(y)

    def part(*axes):
        return w_jet.derivative(tuple(
            sum(1 for a in axes if a == i) for i in range(w_jet.dim)))

    biharm = part(0, 0, 0, 0) + 2.0 * part(0, 0, 1, 1) + part(1, 1, 1, 1)
    lap = part(0, 0) + part(1, 1)
    dy_lap = part(0, 0, 1) + part(1, 1, 1)
    lhs = (d * biharm + 2.0 * d_y * dy_lap + d_yy * lap
           - (1.0 - problem.poisson) * d_yy * part(0, 0)
           + problem.density * problem.thickness(y) * part(2, 2))
    return float(lhs - problem.load(t))


# ---------------------------------------------------------------------------
# Manufactured pairs (independent closed forms for verification).


def manufactured_sine_w(pts) -> np.ndarray:
    pts = np.asarray(pts, dtype=np.float64)
    return np.sin(np.pi * pts[:, 0]) * np.sin(np.pi * pts[:, 1]) * np.sin(pts[:, 2])


def manufactured_sine_w_jets(pts, space: JetSpace) -> np.ndarray:
    from ..autodiff import kunary

    seeds = space.seed(np.asarray(pts, dtype=np.float64))
    sx, _ = kunary("sin", np.pi * seeds[:, 0], space, need_w=False)
    sy, _ = kunary("sin", np.pi * seeds[:, 1], space, need_w=False)
    st, _ = kunary("sin", seeds[:, 2], space, need_w=False)
    return kmul(kmul(sx, sy, space), st, space)


def manufactured_sine_load(pts, problem: PlateProblem) -> np.ndarray:
    """Forcing that makes sin(pi x) sin(pi y) sin(t) an exact solution."""
    pts = np.asarray(pts, dtype=np.float64)
    x, y, t = pts[:, 0], pts[:, 1], pts[:, 2]
    w = np.sin(np.pi * x) * np.sin(np.pi * y) * np.sin(t)
    d = problem.stiffness(y)
    d_y = problem.stiffness_dy(y)
    d_yy = problem.stiffness_dyy(y)
    rho_h = problem.density * problem.thickness(y)
    pi = np.pi
    return ((4.0 * pi ** 4 * d - 2.0 * pi ** 2 * d_yy
             + (1.0 - problem.poisson) * pi ** 2 * d_yy - rho_h) * w
            - 4.0 * pi ** 3 * d_y * np.sin(pi * x) * np.cos(pi * y) * np.sin(t))


def _poly_derivs(s) -> list[np.ndarray]:
    """Derivatives 0..4 of s^2 (1-s)^2."""
    s = np.asarray(s, dtype=np.float64)
    return [
        s ** 2 - 2.0 * s ** 3 + s ** 4,
        2.0 * s - 6.0 * s ** 2 + 4.0 * s ** 3,
        2.0 - 12.0 * s + 12.0 * s ** 2,
        -12.0 + 24.0 * s,
        np.full_like(s, 24.0),
    ]


def manufactured_clamped_w(pts, omega: float = 3.0) -> np.ndarray:
    """Polynomial manufactured deflection honoring the clamped edges."""
    pts = np.asarray(pts, dtype=np.float64)
    gx = _poly_derivs(pts[:, 0])[0]
    gy = _poly_derivs(pts[:, 1])[0]
    return gx * gy * np.sin(omega * pts[:, 2])


def manufactured_clamped_velocity(pts, omega: float = 3.0) -> np.ndarray:
    pts = np.asarray(pts, dtype=np.float64)
    gx = _poly_derivs(pts[:, 0])[0]
    gy = _poly_derivs(pts[:, 1])[0]
    return gx * gy * omega * np.cos(omega * pts[:, 2])


def manufactured_clamped_load(pts, problem: PlateProblem, omega: float = 3.0) -> np.ndarray:
    """Forcing for the clamped polynomial pair (supports the FD oracle tests)."""
    pts = np.asarray(pts, dtype=np.float64)
    x, y, t = pts[:, 0], pts[:, 1], pts[:, 2]
    xd = _poly_derivs(x)
    yd = _poly_derivs(y)
    d = problem.stiffness(y)
    d_y = problem.stiffness_dy(y)
    d_yy = problem.stiffness_dyy(y)
    rho_h = problem.density * problem.thickness(y)
    spatial = (d * (xd[4] * yd[0] + 2.0 * xd[2] * yd[2] + xd[0] * yd[4])
               + 2.0 * d_y * (xd[2] * yd[1] + xd[0] * yd[3])
               + d_yy * (xd[2] * yd[0] + xd[0] * yd[2])
               - (1.0 - problem.poisson) * d_yy * xd[2] * yd[0]
               - rho_h * omega ** 2 * xd[0] * yd[0])
    return spatial * np.sin(omega * t)
