import json

import numpy as np
import pytest

from atomsim import io
from atomsim.chaos import lyapunov_map
from atomsim.dynamics import AtomState, SimParams, integrate
from atomsim.ensemble import histogram


def test_trajectory_csv_round_trip(tmp_path):
    traj = integrate(AtomState.ground(0.0, 10.0), SimParams(1e-3, 0.2), 20.0)
    p = io.write_trajectory_csv(tmp_path / "t.csv", traj)
    assert p.read_text().splitlines()[0] == "tau,x,p,g1,g2,G1,G2,H,norm,u"
    t = io.read_table(p)
    np.testing.assert_array_equal(t["tau"], traj.tau)
    np.testing.assert_array_equal(t["G2"], traj.y[:, 5])
    np.testing.assert_array_equal(t["u"], traj.u)


def test_map_csv_sidecar_and_matrix(tmp_path):
    m = lyapunov_map((-0.2, 0.2), (5.0, 10.0), (2, 3), tau_total=50.0)
    io.write_map_csv(tmp_path / "m.csv", m)
    d, p, lam, conv = io.read_map_csv(tmp_path / "m.csv")
    np.testing.assert_array_equal(d, m.delta_axis)
    np.testing.assert_array_equal(p, m.p0_axis)
    np.testing.assert_array_equal(lam, m.lambda_grid)
    np.testing.assert_array_equal(conv, m.converged_grid)
    side = io.map_sidecar(m)
    assert side["resolution"] == [2, 3] and side["method"] == "variational" and side["tau_total"] == 50.0
    io.write_gnuplot_matrix(tmp_path / "m.matrix", m)
    rows = [list(map(float, r.split())) for r in (tmp_path / "m.matrix").read_text().splitlines()]
    assert rows[0] == [3, 5.0, 7.5, 10.0]
    assert rows[2][1:] == list(m.lambda_grid[1])


def test_histogram_csv(tmp_path):
    h = histogram([0.1, 0.2, 1.3], 0.5, (-1, 2))
    io.write_histogram_csv(tmp_path / "h.csv", h)
    t = io.read_table(tmp_path / "h.csv")
    np.testing.assert_array_equal(t["count"], h.counts)
    assert (tmp_path / "h.csv").read_text().startswith("bin_left,count,density\n")


def test_config_parsing():
    cfg = io.parse_config("# run\ndelta = 0.2  # detuning\n\nP0=10\nomega-r = 1e-3\n")
    assert cfg == {"delta": "0.2", "p0": "10", "omega_r": "1e-3"}
    with pytest.raises(io.ConfigError):
        io.parse_config("delta 0.2")
    with pytest.raises(io.ConfigError):
        io.parse_config("a = 1\na = 2")


def test_config_write_read_round_trip(tmp_path):
    io.write_config(tmp_path / "c.cfg", {"delta": 0.2, "tau": 1000.0})
    assert io.read_config(tmp_path / "c.cfg") == {"delta": "0.2", "tau": "1000.0"}


def test_env_overrides():
    env = {"ATOMSIM_DELTA": "0.5", "ATOMSIM_OTHER": "x", "DELTA": "9"}
    assert io.env_overrides(["delta", "p0"], env) == {"delta": "0.5"}


def test_manifest_hash_and_wall_time():
    m1 = io.manifest("simulate", {"a": 1.0, "b": [1, 2]}, {"x": np.float64(2.0)}, None)
    m2 = io.manifest("simulate", {"b": [1, 2], "a": 1.0}, {"x": 2.0}, None)
    assert m1["config_hash"] == m2["config_hash"]
    assert "wall_time_s" not in m1
    assert "wall_time_s" in io.manifest("simulate", {}, {}, 0.5)
    doc = json.loads(io.dumps(m1))
    assert doc["version"] and doc["tool"] == "atomsim"
    assert json.loads(io.dumps({"v": float("nan")})) == {"v": None}
