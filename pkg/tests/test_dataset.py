import numpy as np
import pytest

from dgp_pursuit.scenario.dataset import EmptySectorError, ExpertRegions, generate_dataset
from dgp_pursuit.scenario.target import TargetMotion, rollout

DUFF = TargetMotion()


def test_sectors_partition_plane(rng):
    r = ExpertRegions()
    xy = rng.normal(size=(1000, 2))
    s = r.sector_of(xy)
    assert set(np.unique(s)) == {0, 1, 2}
    ang = np.degrees(np.arctan2(xy[:, 1], xy[:, 0])) % 360
    expected = np.where((ang >= 90) & (ang < 210), 0, np.where((ang >= 210) & (ang < 330), 1, 2))
    assert np.array_equal(s, expected)


def test_every_default_sector_is_covered():
    traj = rollout(DUFF, 100.0, 0.01)
    counts = np.bincount(ExpertRegions().sector_of(traj[:, 1:3]), minlength=3)
    assert np.all(counts > 0)


def test_default_dataset_shape_and_membership():
    ds = generate_dataset(DUFF, ExpertRegions(), 0.01, seed=0)
    r = ExpertRegions()
    assert [d.M for d in ds] == [10, 10, 10]
    for k, d in enumerate(ds):
        assert np.all(r.sector_of(d.X[:, :2]) == k)
        assert np.allclose(d.sigma_n, 0.1)
        assert len(np.unique(d.X, axis=0)) == 10


def test_noiseless_outputs_equal_velocity_field():
    ds = generate_dataset(DUFF, ExpertRegions(samples_per_drone=(100000,) * 3), 0.0, seed=1, duration=20.0)
    for d in ds:
        V = np.array([DUFF.body_velocity_flat(0.0, x) for x in d.X])
        assert np.allclose(d.Y, V, atol=1e-12)


def test_seed_determinism():
    a = generate_dataset(DUFF, ExpertRegions(), 0.01, seed=5)
    b = generate_dataset(DUFF, ExpertRegions(), 0.01, seed=5)
    c = generate_dataset(DUFF, ExpertRegions(), 0.01, seed=6)
    assert all(np.array_equal(x.Y, y.Y) and np.array_equal(x.X, y.X) for x, y in zip(a, b))
    assert not np.array_equal(a[0].Y, c[0].Y)
    assert np.array_equal(a[0].X, c[0].X)


def test_noise_statistics():
    ds = generate_dataset(DUFF, ExpertRegions(samples_per_drone=(300,) * 3), 0.01, seed=2)
    resid = np.vstack([d.Y - np.array([DUFF.body_velocity_flat(0.0, x) for x in d.X]) for d in ds])
    assert abs(resid.std() - 0.1) < 0.01


def test_empty_sector_names_drone():
    m = TargetMotion(kind="constant", initial_pose=TargetMotion().initial_pose)
    with pytest.raises(EmptySectorError) as info:
        generate_dataset(m, ExpertRegions(), 0.01, seed=0, duration=1.0)
    assert "drone" in str(info.value)
    assert info.value.drone in (0, 2)


def test_region_validation():
    with pytest.raises(ValueError):
        ExpertRegions((90.0, 80.0), (10, 10))
    with pytest.raises(ValueError):
        ExpertRegions((0.0, 120.0), (10, 0))
    with pytest.raises(ValueError):
        ExpertRegions((0.0, 360.0), (10, 10))
    assert ExpertRegions.from_json({"samples_per_drone": 5}, 4).samples_per_drone == (5, 5, 5, 5)
    assert ExpertRegions.uniform(3).boundaries_deg == (90.0, 210.0, 330.0)
