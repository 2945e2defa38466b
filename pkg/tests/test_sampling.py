import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctlpinn.errors import ConfigurationError
from ctlpinn.sampling import (
    Box,
    Dataset,
    Interval,
    Reach,
    SphericalShell,
    TimeWindow,
    UnitSquarePlate,
    boundary_normal,
    build_dataset,
    dump_dataset_csv,
    lhs_unit,
    map_to_domain,
    sample_boundary,
)


def test_lhs_stratification_quartiles():
    u = lhs_unit(4, 1, seed=3)
    strata = np.sort(np.floor(u[:, 0] * 4).astype(int))
    assert strata.tolist() == [0, 1, 2, 3]


def test_lhs_single_point():
    u = lhs_unit(1, 5, seed=0)
    assert u.shape == (1, 5)
    assert np.all((u >= 0) & (u < 1))


def test_lhs_deterministic():
    assert lhs_unit(32, 3, seed=9).tobytes() == lhs_unit(32, 3, seed=9).tobytes()


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 64), st.integers(1, 4), st.integers(0, 10_000))
def test_lhs_stratification_property(n, d, seed):
    u = lhs_unit(n, d, seed)
    for j in range(d):
        occupancy = np.bincount(np.floor(u[:, j] * n).astype(int), minlength=n)
        assert np.all(occupancy == 1)


def test_interval_endpoint_mapping():
    geom = Interval(2.0, 5.0)
    pts = map_to_domain(np.array([[0.0], [1.0 - 1e-12]]), geom)
    assert pts[0, 0] == 2.0
    assert pts[1, 0] < 5.0


def test_shell_radii_in_range():
    geom = SphericalShell(0.6, 1.0)
    u = lhs_unit(2000, 3, seed=1)
    pts = map_to_domain(u, geom)
    r = np.linalg.norm(pts, axis=1)
    assert np.all((r >= 0.6) & (r <= 1.0))


def test_shell_mean_radius_matches_volume_average():
    geom = SphericalShell(0.6, 1.0)
    pts = map_to_domain(lhs_unit(100_000, 3, seed=4), geom)
    r = np.linalg.norm(pts, axis=1)
    analytic = 3.0 * (1.0 - 0.6 ** 4) / (4.0 * (1.0 - 0.6 ** 3))
    assert abs(r.mean() - analytic) / analytic < 0.01


def test_time_column_in_half_open_window():
    geom = Interval(0.0, 1.0)
    win = TimeWindow(2.0, 3.0)
    pts = map_to_domain(lhs_unit(500, 2, seed=5), geom, win)
    assert np.all(pts[:, 1] > 2.0)
    assert np.all(pts[:, 1] <= 3.0)


def test_boundary_points_on_spheres():
    geom = SphericalShell(0.6, 1.0)
    pts = sample_boundary(geom, 101, seed=0)
    r = np.linalg.norm(pts, axis=1)
    on_inner = np.isclose(r, 0.6, atol=1e-12)
    on_outer = np.isclose(r, 1.0, atol=1e-12)
    assert np.all(on_inner | on_outer)
    assert on_inner.sum() == 50  # even split, odd remainder to the outer sphere
    weighted = sample_boundary(geom, 1000, seed=0, area_weighted=True)
    frac_in = np.isclose(np.linalg.norm(weighted, axis=1), 0.6).mean()
    assert abs(frac_in - 0.36 / 1.36) < 0.02


def test_boundary_normals():
    geom = SphericalShell(0.6, 1.0)
    np.testing.assert_allclose(boundary_normal(geom, [1.0, 0.0, 0.0]), [1.0, 0.0, 0.0])
    np.testing.assert_allclose(boundary_normal(geom, [0.0, 0.6, 0.0]), [0.0, -1.0, 0.0])
    plate = UnitSquarePlate()
    np.testing.assert_allclose(boundary_normal(plate, [0.0, 0.4]), [-1.0, 0.0])
    np.testing.assert_allclose(boundary_normal(plate, [0.3, 1.0]), [0.0, 1.0])


def test_geometry_validation():
    with pytest.raises(ConfigurationError):
        Interval(1.0, 1.0)
    with pytest.raises(ConfigurationError):
        SphericalShell(0.0, 1.0)
    with pytest.raises(ConfigurationError):
        TimeWindow(2.0, 2.0)
    with pytest.raises(ConfigurationError):
        Box((0.0, 0.0), (1.0,))


class _ToyProblem:
    """1-D problem stub: u(x, 0) = cos(x), Dirichlet value = t on the boundary."""

    geometry = Interval(0.0, 2.0)
    time_order = 2

    def initial_targets(self, space):
        return {"value": np.cos(space[:, 0]), "dt": np.zeros(space.shape[0])}

    def boundary_targets(self, pts):
        return {"value": pts[:, -1].copy()}


class _ExactSource:
    """Stand-in source model answering with a closed form."""

    def predict(self, pts):
        return {"value": np.cos(pts[:, 0]) * (1.0 + pts[:, -1])}

    def predict_with_dt(self, pts):
        out = self.predict(pts)
        out["dt"] = np.cos(pts[:, 0])
        return out


def test_build_residual_dataset():
    ds = build_dataset("residual", _ToyProblem(), TimeWindow(0.0, 1.0), 64, seed=0)
    assert len(ds) == 64
    assert not ds.targets
    assert np.all((ds.points[:, 0] >= 0.0) & (ds.points[:, 0] <= 2.0))
    assert np.all((ds.points[:, 1] > 0.0) & (ds.points[:, 1] <= 1.0))


def test_build_initial_dataset_targets():
    ds = build_dataset("initial", _ToyProblem(), TimeWindow(0.0, 1.0), 32, seed=1)
    assert np.all(ds.points[:, 1] == 0.0)
    np.testing.assert_allclose(ds.targets["value"], np.cos(ds.points[:, 0]))
    np.testing.assert_array_equal(ds.targets["dt"], 0.0)


def test_supervised_identity_source():
    src = _ExactSource()
    ds = build_dataset("supervised", _ToyProblem(), TimeWindow(0.0, 2.0), 16, seed=2,
                       source_model=src)
    np.testing.assert_array_equal(
        ds.targets["value"], src.predict(ds.points)["value"])


def test_supervised_requires_source():
    with pytest.raises(ConfigurationError):
        build_dataset("supervised", _ToyProblem(), TimeWindow(0.0, 1.0), 8, seed=0)


def test_transfer_initial_at_window_start_with_dt():
    src = _ExactSource()
    ds = build_dataset("transfer_initial", _ToyProblem(), TimeWindow(10.0, 60.0), 8,
                       seed=3, source_model=src)
    assert np.all(ds.points[:, 1] == 10.0)
    assert "dt" in ds.targets  # second-order problem hands velocity across


def test_transfer_initial_first_order_values_only():
    class FirstOrder(_ToyProblem):
        time_order = 1

    ds = build_dataset("transfer_initial", FirstOrder(), TimeWindow(10.0, 60.0), 8,
                       seed=3, source_model=_ExactSource())
    assert "dt" not in ds.targets


def test_dataset_build_deterministic():
    a = build_dataset("residual", _ToyProblem(), TimeWindow(0.0, 1.0), 50, seed=7)
    b = build_dataset("residual", _ToyProblem(), TimeWindow(0.0, 1.0), 50, seed=7)
    assert a.points.tobytes() == b.points.tobytes()


def test_residual_rejects_targets():
    with pytest.raises(ConfigurationError):
        Dataset("residual", np.zeros((3, 2)), {"value": np.zeros(3)})


def test_dataset_csv_dump(tmp_path):
    ds = build_dataset("initial", _ToyProblem(), TimeWindow(0.0, 1.0), 4, seed=1)
    path = tmp_path / "points.csv"
    dump_dataset_csv(ds, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "kind,x,y,z,t,target_kind,target_value"
    assert len(lines) == 1 + 4 * 2  # value and dt rows per point
    assert lines[1].startswith("initial,")
