"""One-dimensional open-channel flow with tabulated cross-section geometry.

The unknowns are discharge Q(x, t) and water level Z(x, t) on a reach,
governed by the continuity and momentum equations

    B dZ/dt + dQ/dx = q_l
    dQ/dt + d(Q^2/A)/dx + g A dZ/dx + g n^2 |Q| Q / (A R^{4/3}) = q_l U_l

with Manning roughness n as an optimizable scalar confined to (0.01,
0.1).  Channel shape enters through per-station cross-section profiles:
piecewise-linear bed elevation against transverse coordinate y.  For a
water depth H the width, wetted area and wetted perimeter come from
exact segment geometry; per-station tables over a depth grid are
averaged across stations into reach functions B(H), A(H), R(H) used by
the network pipeline.

Network inputs are scaled to kilometers/hours and normalized to [-1, 1]
over the full planning horizon (fixed per problem instance, so
parameters stay meaningful across training windows); raw outputs are
squashed through sigmoids into configured physical ranges.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError, GeometryError, UnsupportedProfileError
from ..multiindex import JetSpace
from ..network import forward, param_length
from ..sampling import Dataset, Reach
from .base import ModelPredictor, mean_sq, take_output

GRAVITY = 9.81
ROUGHNESS_RANGE = (0.01, 0.1)

#: Depth-grid resolution for the tabulated geometry functions.
DEPTH_GRID_LEVELS = 512


@dataclass(frozen=True)
class CrossSection:
    """Surveyed profile at one station: elevation z against transverse y."""

    station_x: float
    y: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64)
        z = np.asarray(self.z, dtype=np.float64)
        if y.ndim != 1 or y.shape != z.shape or y.size < 2:
            raise ConfigurationError("cross-section needs matching 1-D y and z, >= 2 points")
        if not np.all(np.diff(y) > 0.0):
            raise ConfigurationError("cross-section y coordinates must strictly increase")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)

    @property
    def z_min(self) -> float:
        return float(self.z.min())


def section_properties(y, z, level: float) -> tuple[float, float, float]:
    """Exact (width, area, wetted perimeter) of a profile at a water level.

    The level must cut the profile exactly twice (one simple channel);
    area integrates the linear segments exactly, the perimeter is the
    clipped polyline arc length.
    """
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    d = z - level
    if d[0] < 0.0 or d[-1] < 0.0:
        raise GeometryError(f"water level {level} overtops the profile ends")
    crossings = []
    for i in range(len(y) - 1):
        d0, d1 = d[i], d[i + 1]
        if d0 == 0.0:
            crossings.append(y[i])
        if d0 * d1 < 0.0:
            crossings.append(y[i] + (y[i + 1] - y[i]) * d0 / (d0 - d1))
    if d[-1] == 0.0:
        crossings.append(y[-1])
    if len(crossings) < 2:
        raise GeometryError(f"water level {level} does not intersect the profile twice")
    if len(crossings) > 2:
        raise UnsupportedProfileError(
            f"water level {level} cuts the profile {len(crossings)} times "
            "(multi-channel sections are not supported)")
    y_lo, y_hi = crossings
    inside = (y > y_lo) & (y < y_hi)
    ys = np.concatenate([[y_lo], y[inside], [y_hi]])
    zs = np.concatenate([[level], z[inside], [level]])
    depth = level - zs
    width = y_hi - y_lo
    area = float(np.sum(0.5 * (depth[1:] + depth[:-1]) * np.diff(ys)))
    perimeter = float(np.sum(np.hypot(np.diff(ys), np.diff(zs))))
    return float(width), area, perimeter


@dataclass(frozen=True)
class SectionGeometry:
    """Reach-averaged geometry tables against depth, plus the thalweg line."""

    depth_grid: np.ndarray
    width_table: np.ndarray
    area_table: np.ndarray
    radius_table: np.ndarray
    station_x: np.ndarray
    station_z_min: np.ndarray

    def _interp(self, table, h):
        return np.interp(h, self.depth_grid, table)

    def width(self, h):
        return self._interp(self.width_table, h)

    def area(self, h):
        return self._interp(self.area_table, h)

    def hydraulic_radius(self, h):
        return self._interp(self.radius_table, h)

    def z_min(self, x):
        return np.interp(x, self.station_x, self.station_z_min)

    def z_min_slope(self, x):
        slopes = np.diff(self.station_z_min) / np.diff(self.station_x)
        seg = np.clip(np.searchsorted(self.station_x, x, side="right") - 1,
                      0, len(slopes) - 1)
        return slopes[seg]

    def interp_aux(self, which: str):
        """(grid, values, slopes) for the taped linear-interpolation op."""
        table = {"width": self.width_table, "area": self.area_table,
                 "radius": self.radius_table}[which]
        slopes = np.diff(table) / np.diff(self.depth_grid)
        return self.depth_grid, table, slopes


def build_section_geometry(sections, h_max: float,
                           n_levels: int = DEPTH_GRID_LEVELS) -> SectionGeometry:
    """Tabulate per-section exact geometry and average across stations.

    The depth grid spans (0, 1.2 h_max] uniformly; every queried level
    must cut each profile exactly twice.
    """
    if not sections:
        raise ConfigurationError("need at least one cross-section")
    sections = sorted(sections, key=lambda s: s.station_x)
    grid = 1.2 * h_max * np.arange(1, n_levels + 1) / n_levels
    widths = np.zeros((len(sections), n_levels))
    areas = np.zeros_like(widths)
    radii = np.zeros_like(widths)
    for i, sec in enumerate(sections):
        for j, h in enumerate(grid):
            b, a, p = section_properties(sec.y, sec.z, sec.z_min + h)
            widths[i, j] = b
            areas[i, j] = a
            radii[i, j] = a / p
    geometry = SectionGeometry(
        depth_grid=grid,
        width_table=widths.mean(axis=0),
        area_table=areas.mean(axis=0),
        radius_table=radii.mean(axis=0),
        station_x=np.array([s.station_x for s in sections], dtype=np.float64),
        station_z_min=np.array([s.z_min for s in sections], dtype=np.float64),
    )
    if not np.all(np.diff(geometry.area_table) > 0.0):
        raise GeometryError("tabulated wetted area is not strictly increasing in depth")
    if np.any(geometry.width_table <= 0.0) or np.any(geometry.radius_table <= 0.0):
        raise GeometryError("tabulated width/radius must be positive")
    return geometry


def roughness_from_raw(raw) -> float:
    """Map the unconstrained trainable scalar into (0.01, 0.1)."""
    lo, hi = ROUGHNESS_RANGE
    return lo + (hi - lo) / (1.0 + np.exp(-raw))


def raw_from_roughness(n: float) -> float:
    lo, hi = ROUGHNESS_RANGE
    if not lo < n < hi:
        raise ConfigurationError(f"roughness {n} outside ({lo}, {hi})")
    frac = (n - lo) / (hi - lo)
    return float(np.log(frac / (1.0 - frac)))


@dataclass(frozen=True)
class ChannelProblem:
    """Saint-Venant reach with measured series and optimizable roughness."""

    reach: Reach
    geometry_tables: SectionGeometry
    q_bounds: tuple[float, float]
    h_bounds: tuple[float, float]
    horizon_s: float
    initial_roughness: float = 0.055
    gravity: float = GRAVITY

    name = "saint_venant"
    time_order = 1
    jet_order = 1
    spatial_dim = 1
    n_outputs = 2
    n_extra_params = 1
    target_keys = ("Q", "Z")
    uses_boundary_data = False   # gauge data replaces boundary conditions
    uses_initial_data = False    # and there is no initial condition either

    def __post_init__(self):
        if not self.q_bounds[0] < self.q_bounds[1]:
            raise ConfigurationError("discharge bounds must satisfy min < max")
        if not 0.0 < self.h_bounds[0] < self.h_bounds[1]:
            raise ConfigurationError("depth bounds must satisfy 0 < min < max")

    @property
    def geometry(self) -> Reach:
        return self.reach

    @property
    def input_dim(self) -> int:
        return 2

    @property
    def residual_space(self) -> JetSpace:
        return JetSpace.full(2, 1)

    def initial_extras(self) -> np.ndarray:
        return np.array([raw_from_roughness(self.initial_roughness)])

    def roughness(self, params) -> float:
        return float(roughness_from_raw(params[-1]))

    # -- input normalization -------------------------------------------------

    def _input_scaling(self):
        # x in km and t in hours, then both affinely into [-1, 1]
        x_lo, x_hi = self.reach.x_lo / 1000.0, self.reach.x_hi / 1000.0
        t_lo, t_hi = 0.0, self.horizon_s / 3600.0
        ax = 2.0 / ((x_hi - x_lo) * 1000.0)
        bx = -1.0 - 2.0 * x_lo / (x_hi - x_lo)
        at = 2.0 / ((t_hi - t_lo) * 3600.0)
        bt = -1.0
        return ax, bx, at, bt

    def normalized_inputs(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        ax, bx, at, bt = self._input_scaling()
        return np.column_stack([ax * pts[:, 0] + bx, at * pts[:, 1] + bt])

    def _input_jets(self, pts, space: JetSpace) -> np.ndarray:
        """Normalized-input jets carrying derivatives w.r.t. SI (x, t)."""
        pts = np.asarray(pts, dtype=np.float64)
        ax, bx, at, bt = self._input_scaling()
        seeds = space.seed(pts)
        xg = ax * seeds[:, 0]
        xg[:, 0] += bx
        tg = at * seeds[:, 1]
        tg[:, 0] += bt
        return np.stack([xg, tg], axis=1)

    # -- output pipeline -------------------------------------------------------

    def predict_values(self, params, spec, pts) -> dict[str, np.ndarray]:
        pts = np.asarray(pts, dtype=np.float64)
        raw = forward(params[: param_length(spec)], spec, self.normalized_inputs(pts))
        q_lo, q_hi = self.q_bounds
        h_lo, h_hi = self.h_bounds
        q = (q_hi - q_lo) / (1.0 + np.exp(-raw[:, 0])) + q_lo
        h = (h_hi - h_lo) / (1.0 + np.exp(-raw[:, 1])) + h_lo
        return {"Q": q, "Z": h + self.geometry_tables.z_min(pts[:, 0]), "H": h}

    def predict_values_with_dt(self, params, spec, pts) -> dict[str, np.ndarray]:
        return self.predict_values(params, spec, pts)

    def predictor(self, params, spec) -> ModelPredictor:
        return ModelPredictor(self, params, spec)

    # -- jet pipeline through the tape ------------------------------------------

    def _output_jets(self, rec, layers, activation, pts, space):
        """Transformed (Q, H, Z, B, A, R) jet nodes at the residual points."""
        inputs = rec.constant(self._input_jets(pts, space))
        net = mlp_output_jets_from(rec, layers, activation, inputs, space)
        q_raw = take_output(rec, net, 0)
        h_raw = take_output(rec, net, 1)
        q_lo, q_hi = self.q_bounds
        h_lo, h_hi = self.h_bounds
        q = rec.scale(rec.jet_unary("sigmoid", q_raw, space), q_hi - q_lo)
        q = _shift_value(rec, q, q_lo)
        h = rec.scale(rec.jet_unary("sigmoid", h_raw, space), h_hi - h_lo)
        h = _shift_value(rec, h, h_lo)
        z = rec.emit("add", (h, rec.constant(self._zmin_jets(pts, space))))
        g = self.geometry_tables
        b = rec.jet_unary("interp", h, space, aux=g.interp_aux("width"))
        a = rec.jet_unary("interp", h, space, aux=g.interp_aux("area"))
        r = rec.jet_unary("interp", h, space, aux=g.interp_aux("radius"))
        return q, h, z, b, a, r

    def _zmin_jets(self, pts, space: JetSpace) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        g = self.geometry_tables
        out = np.zeros((pts.shape[0], space.size))
        out[:, 0] = g.z_min(pts[:, 0])
        out[:, space.derivative_index(0)] = g.z_min_slope(pts[:, 0])
        return out

    def residual_nodes(self, rec, layers, extras, activation, pts) -> dict:
        space = self.residual_space
        q, h, z, b, a, r = self._output_jets(rec, layers, activation, pts, space)
        ix = space.derivative_index(0)
        it = space.derivative_index(1)
        q_x = rec.extract(q, ix)
        q_t = rec.extract(q, it)
        z_x = rec.extract(z, ix)
        z_t = rec.extract(z, it)
        b_val = rec.extract(b, 0)
        a_val = rec.extract(a, 0)
        r_val = rec.extract(r, 0)
        q_val = rec.extract(q, 0)
        continuity = b_val * z_t + q_x
        advect = rec.jet_mul(rec.jet_mul(q, q, space),
                             rec.jet_unary("recip", a, space), space)
        advect_x = rec.extract(advect, ix)
        n_node = _roughness_node(rec, extras[0])
        friction = (rec.scale(n_node * n_node, self.gravity)
                    * rec.unary("abs", q_val) * q_val
                    / (a_val * (r_val ** (4.0 / 3.0))))
        momentum = (q_t + advect_x + rec.scale(a_val * z_x, self.gravity) + friction)
        return {"pde1": continuity, "pde2": momentum}

    def stage_components(self, rec, layers, extras, activation, datasets) -> dict:
        comps = {}
        if "residual" in datasets:
            r = self.residual_nodes(rec, layers, extras, activation,
                                    datasets["residual"].points)
            comps["pde1"] = mean_sq(rec, r["pde1"])
            comps["pde2"] = mean_sq(rec, r["pde2"])
        if "measurement" in datasets and len(datasets["measurement"]):
            ds = datasets["measurement"]
            self._masked_value_losses(rec, layers, activation, ds,
                                      comps, "data1", "data2")
        if "supervised" in datasets:
            ds = datasets["supervised"]
            self._masked_value_losses(rec, layers, activation, ds,
                                      comps, "sp1", "sp2")
        if "transfer_initial" in datasets:
            ds = datasets["transfer_initial"]
            self._masked_value_losses(rec, layers, activation, ds,
                                      comps, "ic1", "ic2")
        return comps

    def _masked_value_losses(self, rec, layers, activation, ds, comps,
                             q_name, z_name):
        for key, name in (("Q", q_name), ("Z", z_name)):
            if key not in ds.targets:
                continue
            target = ds.targets[key]
            mask = np.isfinite(target)
            if not np.any(mask):
                continue
            pts = ds.points[mask]
            pred = self._value_nodes(rec, layers, activation, pts)[key]
            comps[name] = mean_sq(rec, pred - rec.constant(target[mask]))

    def _value_nodes(self, rec, layers, activation, pts):
        space = JetSpace.full(2, 0)
        inputs = rec.constant(self._input_jets(pts, space))
        net = mlp_output_jets_from(rec, layers, activation, inputs, space)
        q_lo, q_hi = self.q_bounds
        h_lo, h_hi = self.h_bounds
        q = rec.scale(rec.unary("sigmoid", rec.extract(take_output(rec, net, 0), 0)),
                      q_hi - q_lo) + q_lo
        h = rec.scale(rec.unary("sigmoid", rec.extract(take_output(rec, net, 1), 0)),
                      h_hi - h_lo) + h_lo
        z = h + rec.constant(self.geometry_tables.z_min(pts[:, 0]))
        return {"Q": q, "Z": z, "H": h}


def mlp_output_jets_from(rec, layers, activation, inputs_node, space):
    from ..autodiff import mlp_apply_jets

    return mlp_apply_jets(rec, layers, activation, inputs_node, space)


def _shift_value(rec, node, offset: float):
    return rec.emit("shift_coeff0", (node,), aux=float(offset))


def _roughness_node(rec, raw_node):
    lo, hi = ROUGHNESS_RANGE
    return rec.scale(rec.unary("sigmoid", raw_node), hi - lo) + lo


# ---------------------------------------------------------------------------
# Prismatic trapezoidal channels (synthetic data construction).


def trapezoid_properties(bottom_width: float, side_slope: float, depth):
    """Closed-form (B, A, P, R) of a symmetric trapezoid at given depth."""
    depth = np.asarray(depth, dtype=np.float64)
    b = bottom_width + 2.0 * side_slope * depth
    a = (bottom_width + side_slope * depth) * depth
    p = bottom_width + 2.0 * depth * np.sqrt(1.0 + side_slope ** 2)
    return b, a, p, a / p


def manning_discharge(area, radius, slope: float, n: float):
    """Steady uniform flow rate from the Manning relation."""
    return np.asarray(area) * np.asarray(radius) ** (2.0 / 3.0) * np.sqrt(slope) / n


def trapezoid_profile(bottom_width: float, side_slope: float, wall_height: float,
                      z_bed: float) -> tuple[np.ndarray, np.ndarray]:
    """Piecewise-linear trapezoid profile in absolute elevations."""
    m = side_slope
    y = np.array([-m * wall_height, 0.0, bottom_width, bottom_width + m * wall_height])
    z = np.array([z_bed + wall_height, z_bed, z_bed, z_bed + wall_height])
    return y, z


def prismatic_sections(n_stations: int, length: float, bottom_width: float,
                       side_slope: float, bed_slope: float, z_upstream: float,
                       wall_height: float) -> list[CrossSection]:
    """Identical trapezoid sections on a uniformly sloping bed."""
    out = []
    for i in range(n_stations):
        x = length * i / (n_stations - 1)
        y, z = trapezoid_profile(bottom_width, side_slope, wall_height,
                                 z_upstream - bed_slope * x)
        out.append(CrossSection(x, y, z))
    return out


# ---------------------------------------------------------------------------
# Measurement and cross-section file formats.


def write_sections_csv(sections, path) -> None:
    """Columns station_x_m, y_m, elevation_m; rows grouped by station."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["station_x_m", "y_m", "elevation_m"])
        for sec in sections:
            for y, z in zip(sec.y, sec.z):
                writer.writerow([repr(float(sec.station_x)), repr(float(y)), repr(float(z))])


def read_sections_csv(path) -> list[CrossSection]:
    groups: dict[float, list[tuple[float, float]]] = {}
    order: list[float] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            x = float(row["station_x_m"])
            if x not in groups:
                groups[x] = []
                order.append(x)
            groups[x].append((float(row["y_m"]), float(row["elevation_m"])))
    sections = []
    for x in order:
        pairs = groups[x]
        sections.append(CrossSection(x, np.array([p[0] for p in pairs]),
                                     np.array([p[1] for p in pairs])))
    return sections


def write_measurements_csv(dataset: Dataset, path) -> None:
    """Columns t_s, location, quantity{Q|Z}, value; one row per reading."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_s", "location", "quantity", "value"])
        for key in ("Q", "Z"):
            if key not in dataset.targets:
                continue
            vals = dataset.targets[key]
            for i in range(len(dataset)):
                if np.isfinite(vals[i]):
                    writer.writerow([repr(float(dataset.points[i, 1])),
                                     repr(float(dataset.points[i, 0])), key,
                                     repr(float(vals[i]))])


def read_measurements_csv(path) -> Dataset:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            rows.append((float(row["location"]), float(row["t_s"]),
                         row["quantity"], float(row["value"])))
    pts = np.array([[r[0], r[1]] for r in rows], dtype=np.float64)
    q = np.full(len(rows), np.nan)
    z = np.full(len(rows), np.nan)
    for i, r in enumerate(rows):
        if r[2] == "Q":
            q[i] = r[3]
        elif r[2] == "Z":
            z[i] = r[3]
        else:
            raise ConfigurationError(f"unknown measured quantity {r[2]!r}")
    return Dataset("measurement", pts, {"Q": q, "Z": z})


def gauge_dataset(times, q_up, q_down, z_station, x_up: float, x_down: float,
                  x_station: float) -> Dataset:
    """Assemble the gauge series into one measurement dataset."""
    times = np.asarray(times, dtype=np.float64)
    n = times.size
    pts = np.concatenate([
        np.column_stack([np.full(n, x_up), times]),
        np.column_stack([np.full(n, x_down), times]),
        np.column_stack([np.full(n, x_station), times]),
    ])
    q = np.concatenate([q_up, q_down, np.full(n, np.nan)])
    z = np.concatenate([np.full(2 * n, np.nan), z_station])
    return Dataset("measurement", pts, {"Q": q, "Z": z})
