"""Trajectory text format round-trips and schema errors."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opdyn.exact import Trajectory
from opdyn.pauli import PauliBasis
from opdyn.trajio import read_trajectory, write_trajectory


def _traj(coeffs, times=None, meta=None):
    basis = PauliBasis.from_labels(["XI", "YZ", "ZI"])
    if times is None:
        times = np.linspace(0.0, 1.0, coeffs.shape[0])
    return Trajectory(times, basis, coeffs, meta or {"n_sites": "2"})


def test_round_trip_value_exact(tmp_path):
    rng = np.random.default_rng(0)
    traj = _traj(rng.standard_normal((7, 3)),
                 meta={"n_sites": "2", "policy": "mode=full symmetry=off"})
    path = tmp_path / "t.traj"
    write_trajectory(traj, path)
    back = read_trajectory(path)
    # [TRIVIAL] 17 significant digits reproduce doubles exactly
    assert np.array_equal(back.times, traj.times)
    assert np.array_equal(back.coeffs, traj.coeffs)
    assert back.basis.labels == traj.basis.labels
    assert back.meta == traj.meta


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(min_value=-1e6, max_value=1e6,
                          allow_nan=False, allow_subnormal=False),
                min_size=6, max_size=6))
def test_round_trip_arbitrary_values(tmp_path_factory, values):
    # [DERIVED] property: any finite doubles survive the text round trip.
    coeffs = np.array(values).reshape(2, 3)
    traj = _traj(coeffs, times=np.array([0.0, 0.5]))
    path = tmp_path_factory.mktemp("h") / "t.traj"
    write_trajectory(traj, path)
    assert np.array_equal(read_trajectory(path).coeffs, coeffs)


def test_rejects_wrong_header(tmp_path):
    path = tmp_path / "bad.traj"
    path.write_text("something-else v9\n")
    with pytest.raises(ValueError):
        read_trajectory(path)


def test_rejects_ragged_rows(tmp_path):
    traj = _traj(np.zeros((3, 3)))
    path = tmp_path / "t.traj"
    write_trajectory(traj, path)
    path.write_text(path.read_text() + "0.9 1.0\n")
    with pytest.raises(ValueError):
        read_trajectory(path)


def test_rejects_empty_body(tmp_path):
    path = tmp_path / "t.traj"
    path.write_text("opdyn-traj v1\nn_sites=2\nXI YZ ZI\n")
    with pytest.raises(ValueError):
        read_trajectory(path)
