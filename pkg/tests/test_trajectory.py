from __future__ import annotations

import json
import math

import numpy as np
import pytest

from giantatom.core_model import SystemConfig
from giantatom.errors import GridAlignmentError
from giantatom.trajectory import Trajectory, atomic_write, common_samples, max_pop_deviation


def _traj(tag="dde", n=11, rate=0.1, cfg=None):
    t = np.arange(n) * 0.5
    return Trajectory(t, np.exp(-rate * t) * np.exp(-0.2j * t), tag, config=cfg)


def test_basic_properties():
    tr = _traj()
    assert tr.dt == 0.5
    np.testing.assert_allclose(tr.pop, np.exp(-0.2 * tr.times))
    assert tr.index_of(2.5) == 5
    assert tr.eps_at(0.0) == 1.0


def test_off_grid_time_rejected():
    with pytest.raises(GridAlignmentError):
        _traj().index_of(0.3)
    with pytest.raises(GridAlignmentError):
        _traj().delayed(0.7)


def test_delayed_shift_has_zero_history():
    tr = _traj()
    shifted = tr.delayed(1.0)
    assert np.all(shifted[:2] == 0)
    np.testing.assert_array_equal(shifted[2:], tr.eps[:-2])


@pytest.mark.parametrize(
    "times, eps",
    [([0.0, 0.0, 1.0], [1, 1, 1]), ([0.5, 1.0], [1, 1]), ([0.0, 1.0], [1])],
)
def test_invalid_grids_rejected(times, eps):
    with pytest.raises(ValueError):
        Trajectory(times, eps, "dde")


def test_unknown_solver_tag_rejected():
    with pytest.raises(ValueError):
        Trajectory([0.0, 1.0], [1, 1], "magic")


def test_csv_round_trip_and_columns(tmp_path):
    tr = _traj()
    path = tmp_path / "run.csv"
    tr.to_csv(path, reference_rate=0.2, header_comment="manifest=abc")
    lines = path.read_text().splitlines()
    assert lines[0] == "# manifest=abc"
    assert lines[1] == "t,re_eps,im_eps,pop,ref_exp,deviation"
    back = Trajectory.from_csv(path, "dde")
    np.testing.assert_array_equal(back.eps, tr.eps)
    np.testing.assert_array_equal(back.times, tr.times)
    plain = tr.to_csv()
    assert plain.splitlines()[0] == "t,re_eps,im_eps,pop"


def test_json_round_trip_with_metadata(tmp_path):
    cfg = SystemConfig.giant_atom(d=2, phi_c=0.0)
    tr = _traj("lattice", cfg=cfg)
    tr.t_max_valid = 39.6
    path = tmp_path / "run.json"
    tr.to_json(path, extra={"manifest_hash": "xyz"})
    payload = json.loads(path.read_text())
    assert payload["metadata"]["config_hash"] == cfg.config_hash()
    assert payload["metadata"]["solver_tag"] == "lattice"
    assert payload["metadata"]["manifest_hash"] == "xyz"
    back = Trajectory.from_json(path)
    assert back.config == cfg
    assert back.t_max_valid == 39.6
    np.testing.assert_array_equal(back.eps, tr.eps)


def test_serialisation_is_deterministic():
    assert _traj().to_csv() == _traj().to_csv()
    assert _traj().to_json() == _traj().to_json()


def test_atomic_write_leaves_no_temporaries(tmp_path):
    target = tmp_path / "sub" / "file.txt"
    atomic_write(target, "hello")
    atomic_write(target, "world")
    assert target.read_text() == "world"
    assert [p.name for p in target.parent.iterdir()] == ["file.txt"]


def test_common_samples_and_pop_deviation():
    coarse = _traj(n=11)
    t = np.arange(41) * 0.125
    fine = Trajectory(t, np.exp(-0.05 * t), "collision")
    tt, a, b = common_samples(coarse, fine)
    np.testing.assert_allclose(tt, coarse.times)
    dev = max_pop_deviation(coarse, fine)
    expected = np.max(np.abs(np.exp(-0.2 * tt) - np.exp(-0.1 * tt)))
    assert dev == pytest.approx(expected)
    assert math.isfinite(dev)
