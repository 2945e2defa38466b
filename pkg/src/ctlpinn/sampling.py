"""Latin hypercube sampling over problem domains and dataset construction.

Datasets tag point sets by role: initial, boundary, residual, supervised
(targets from a previous window's model), transfer-initial (state handed
across a window boundary), and measurement.  Spatial coordinates come
first, time last.  All sampling is deterministic in the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

DATASET_KINDS = (
    "initial", "boundary", "residual", "supervised", "transfer_initial", "measurement",
)


@dataclass(frozen=True)
class TimeWindow:
    """Half-open training window (t_lo, t_hi], in seconds."""

    t_lo: float
    t_hi: float

    def __post_init__(self):
        if not self.t_hi > self.t_lo:
            raise ConfigurationError(f"empty time window ({self.t_lo}, {self.t_hi}]")

    @property
    def length(self) -> float:
        return self.t_hi - self.t_lo


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ConfigurationError("interval needs lo < hi")

    @property
    def spatial_dim(self) -> int:
        return 1


@dataclass(frozen=True)
class Box:
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        if len(self.lo) != len(self.hi) or not all(h > l for l, h in zip(self.lo, self.hi)):
            raise ConfigurationError("box needs lo < hi componentwise")

    @property
    def spatial_dim(self) -> int:
        return len(self.lo)


class UnitSquarePlate(Box):
    """The [0,1] x [0,1] plate mid-surface."""

    def __init__(self):
        super().__init__((0.0, 0.0), (1.0, 1.0))


@dataclass(frozen=True)
class SphericalShell:
    """3-D shell between two concentric spheres."""

    r_in: float
    r_out: float

    def __post_init__(self):
        if not 0.0 < self.r_in < self.r_out:
            raise ConfigurationError("shell needs 0 < r_in < r_out")

    @property
    def spatial_dim(self) -> int:
        return 3


@dataclass(frozen=True)
class Reach:
    """One-dimensional channel reach along x, in meters."""

    x_lo: float
    x_hi: float

    def __post_init__(self):
        if not self.x_hi > self.x_lo:
            raise ConfigurationError("reach needs x_lo < x_hi")

    @property
    def spatial_dim(self) -> int:
        return 1


def lhs_unit(n: int, d: int, seed) -> np.ndarray:
    """Latin hypercube sample: (n, d) in [0,1)^d, one point per stratum."""
    if n < 1 or d < 1:
        raise ConfigurationError("lhs_unit needs n >= 1 and d >= 1")
    rng = np.random.default_rng(seed)
    out = np.empty((n, d), dtype=np.float64)
    for j in range(d):
        out[:, j] = (rng.permutation(n) + rng.random(n)) / n
    return out


def _sphere_directions(u: np.ndarray) -> np.ndarray:
    """Area-uniform unit vectors from two unit-square columns."""
    z = 2.0 * u[:, 0] - 1.0
    phi = 2.0 * np.pi * u[:, 1]
    s = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    return np.column_stack([s * np.cos(phi), s * np.sin(phi), z])


def map_to_domain(unit: np.ndarray, geometry, window: TimeWindow | None = None) -> np.ndarray:
    """Measure-preserving map of unit samples into a domain (x time window).

    With a window, the last unit column becomes time on (t_lo, t_hi]; the
    map is descending so the window start itself is never sampled.
    """
    unit = np.asarray(unit, dtype=np.float64)
    want = _interior_columns(geometry) + (1 if window is not None else 0)
    if unit.shape[1] != want:
        raise ConfigurationError(
            f"{type(geometry).__name__} with{'out' if window is None else ''} time "
            f"needs {want} unit columns, got {unit.shape[1]}")
    spatial_u = unit[:, :-1] if window is not None else unit
    if isinstance(geometry, (Interval, Reach)):
        lo = geometry.lo if isinstance(geometry, Interval) else geometry.x_lo
        hi = geometry.hi if isinstance(geometry, Interval) else geometry.x_hi
        pts = lo + spatial_u * (hi - lo)
    elif isinstance(geometry, Box):
        lo = np.asarray(geometry.lo)
        hi = np.asarray(geometry.hi)
        pts = lo + spatial_u * (hi - lo)
    elif isinstance(geometry, SphericalShell):
        # inverse-CDF radius makes the sample volume-uniform
        r3 = geometry.r_in ** 3 + spatial_u[:, 0] * (geometry.r_out ** 3 - geometry.r_in ** 3)
        r = np.cbrt(r3)
        pts = r[:, None] * _sphere_directions(spatial_u[:, 1:3])
    else:
        raise ConfigurationError(f"cannot sample interior of {type(geometry).__name__}")
    if window is None:
        return pts
    t = window.t_hi - unit[:, -1] * window.length
    return np.column_stack([pts, t])


def _interior_columns(geometry) -> int:
    return geometry.spatial_dim


def sample_boundary(geometry, n: int, seed, area_weighted: bool = False) -> np.ndarray:
    """Points on the spatial boundary (no time column).

    The shell splits points evenly between inner and outer spheres by
    default; `area_weighted` splits in proportion to sphere areas.
    """
    rng = np.random.default_rng(seed)
    if isinstance(geometry, SphericalShell):
        if area_weighted:
            a_in = geometry.r_in ** 2
            a_out = geometry.r_out ** 2
            n_in = int(round(n * a_in / (a_in + a_out)))
        else:
            n_in = n // 2
        n_out = n - n_in
        dirs = _sphere_directions(lhs_unit(n, 2, rng.integers(2 ** 62)))
        radii = np.concatenate([
            np.full(n_in, geometry.r_in), np.full(n_out, geometry.r_out)])
        return dirs * radii[:, None]
    if isinstance(geometry, Box):
        d = geometry.spatial_dim
        lo = np.asarray(geometry.lo)
        hi = np.asarray(geometry.hi)
        pts = lo + lhs_unit(n, d, rng.integers(2 ** 62)) * (hi - lo)
        faces = rng.integers(0, 2 * d, size=n)
        for i in range(n):
            axis, side = divmod(int(faces[i]), 2)
            pts[i, axis] = hi[axis] if side else lo[axis]
        return pts
    raise ConfigurationError(f"no boundary sampler for {type(geometry).__name__}")


def boundary_normal(geometry, point: np.ndarray) -> np.ndarray:
    """Unit outward normal of the domain at a boundary point."""
    point = np.asarray(point, dtype=np.float64)
    if isinstance(geometry, SphericalShell):
        r = np.linalg.norm(point)
        unit = point / r
        # the shell's outward normal on the inner sphere points at the center
        return unit if abs(r - geometry.r_out) <= abs(r - geometry.r_in) else -unit
    if isinstance(geometry, Box):
        lo = np.asarray(geometry.lo)
        hi = np.asarray(geometry.hi)
        gaps = np.concatenate([np.abs(point - lo), np.abs(point - hi)])
        k = int(np.argmin(gaps))
        d = geometry.spatial_dim
        normal = np.zeros(d)
        axis, is_hi = k % d, k >= d
        normal[axis] = 1.0 if is_hi else -1.0
        return normal
    raise ConfigurationError(f"no boundary normal for {type(geometry).__name__}")


@dataclass
class Dataset:
    """Tagged point set; points are (N, spatial+1) with time last."""

    kind: str
    points: np.ndarray
    targets: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in DATASET_KINDS:
            raise ConfigurationError(f"unknown dataset kind {self.kind!r}")
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.kind == "residual" and self.targets:
            raise ConfigurationError("residual datasets carry no targets")
        for key, val in self.targets.items():
            arr = np.asarray(val, dtype=np.float64)
            if arr.shape[0] != self.points.shape[0]:
                raise ConfigurationError(f"target {key!r} length mismatch")
            self.targets[key] = arr

    def __len__(self) -> int:
        return int(self.points.shape[0])


def build_dataset(kind: str, problem, window: TimeWindow, count: int, seed,
                  source_model=None) -> Dataset:
    """Construct one dataset family for a training window.

    `problem` supplies the geometry and the initial/boundary target
    functions; `source_model` (an object with ``predict(points)`` and,
    for second-order problems, ``predict_with_dt(points)``) supplies
    supervised and transfer-initial targets.
    """
    if count < 1:
        raise ConfigurationError("dataset count must be >= 1")
    geometry = problem.geometry
    d = geometry.spatial_dim
    if kind == "residual":
        unit = lhs_unit(count, d + 1, seed)
        return Dataset(kind, map_to_domain(unit, geometry, window))
    if kind == "initial":
        unit = lhs_unit(count, d, seed)
        space = map_to_domain(unit, geometry)
        pts = np.column_stack([space, np.zeros(count)])
        return Dataset(kind, pts, problem.initial_targets(space))
    if kind == "boundary":
        rng = np.random.default_rng(seed)
        space = sample_boundary(geometry, count, rng.integers(2 ** 62))
        t = window.t_hi - rng.random(count) * window.length
        pts = np.column_stack([space, t])
        return Dataset(kind, pts, problem.boundary_targets(pts))
    if kind == "supervised":
        if source_model is None:
            raise ConfigurationError("supervised datasets need a source model")
        unit = lhs_unit(count, d + 1, seed)
        pts = map_to_domain(unit, geometry, window)
        return Dataset(kind, pts, source_model.predict(pts))
    if kind == "transfer_initial":
        if source_model is None:
            raise ConfigurationError("transfer-initial datasets need a source model")
        unit = lhs_unit(count, d, seed)
        space = map_to_domain(unit, geometry)
        pts = np.column_stack([space, np.full(count, window.t_lo)])
        if getattr(problem, "time_order", 1) >= 2:
            targets = source_model.predict_with_dt(pts)
        else:
            targets = source_model.predict(pts)
        return Dataset(kind, pts, targets)
    raise ConfigurationError(f"build_dataset cannot construct kind {kind!r}")


def dump_dataset_csv(dataset: Dataset, path) -> None:
    """Write `kind,x,y,z,t,target_kind,target_value` rows (blank where absent)."""
    d = dataset.points.shape[1] - 1
    with open(path, "w") as fh:
        fh.write("kind,x,y,z,t,target_kind,target_value\n")
        for i in range(len(dataset)):
            coords = [""] * 3
            for j in range(min(d, 3)):
                coords[j] = repr(dataset.points[i, j])
            base = f"{dataset.kind},{coords[0]},{coords[1]},{coords[2]},{dataset.points[i, -1]!r}"
            if not dataset.targets:
                fh.write(base + ",,\n")
            else:
                for key in sorted(dataset.targets):
                    fh.write(f"{base},{key},{dataset.targets[key][i]!r}\n")
