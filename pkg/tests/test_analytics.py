import json
import math

import numpy as np
import pytest

from ftnpl.analytics import (
    RunSummary,
    TrajectoryLog,
    convergence_verdict,
    cross_entropy_and_kl,
    csv_header,
    cycle_score,
    entropy,
    step_metrics,
    time_average,
)
from ftnpl.errors import NumericError, PreconditionError
from ftnpl.numerics.rng import make_rng

ORIGIN = (np.zeros(2), np.zeros(2))


def test_step_metrics_examples():
    x = np.array([0.3, -0.2, 0.1, 0.9])
    assert step_metrics(x, x)[0] == 0.0
    assert step_metrics(np.zeros(4), x, ORIGIN)[1] == 0.0
    assert step_metrics(np.array([1.0, 0, 0, 0]), np.zeros(4))[0] == 1.0
    assert step_metrics(x, x)[1] is None


def test_step_metrics_dimension_check():
    with pytest.raises(PreconditionError):
        step_metrics(np.zeros(4), np.zeros(3))


def test_cross_entropy_uniform():
    u = np.array([0.5, 0.5])
    H, kl = cross_entropy_and_kl((u, u), (u, u))
    assert H == pytest.approx(2 * np.log(2), abs=1e-15)
    assert H == pytest.approx(1.3863, abs=1e-4)
    assert kl == 0.0


def test_kl_zero_at_reference():
    s = (np.array([0.2, 0.8]), np.array([0.6, 0.4]))
    assert cross_entropy_and_kl(s, s)[1] == pytest.approx(0.0, abs=1e-15)


def test_entropy_identity():
    rng = make_rng(0)
    for _ in range(100):
        s = (rng.dirichlet([1, 1]), rng.dirichlet([1, 1]))
        m = (rng.dirichlet([1, 1]), rng.dirichlet([1, 1]))
        H, kl = cross_entropy_and_kl(s, m)
        assert abs(H - entropy(s) - kl) <= 1e-12


def test_cross_entropy_zero_mass():
    u = np.array([0.5, 0.5])
    with pytest.raises(NumericError):
        cross_entropy_and_kl((u, u), (np.array([1.0, 0.0]), u))


def test_time_average_examples():
    np.testing.assert_array_equal(time_average(np.tile([1.0, 2.0], (5, 1))), [1.0, 2.0])
    v = np.array([0.3, -0.7, 1.0, 2.0])
    np.testing.assert_array_equal(time_average(np.array([v, -v, v, -v])), np.zeros(4))
    with pytest.raises(PreconditionError):
        time_average(np.zeros((0, 4)))


def _circle(n_per_rev=100, revs=10, radius=1.0):
    th = 2 * np.pi * np.arange(n_per_rev * revs + 1) / n_per_rev
    traj = np.zeros((len(th), 4))
    traj[:, 0] = radius * np.cos(th)
    traj[:, 2] = radius * np.sin(th)
    return traj


def test_verdict_all_zero():
    assert convergence_verdict(np.zeros((100, 4)), ORIGIN, 0.05) == "last_iterate"


def test_verdict_circle_is_weak_only():
    assert convergence_verdict(_circle()[:-1], ORIGIN, 0.05) == "weak_only"


def test_verdict_outward_spiral_diverges():
    t = np.linspace(0, 20 * np.pi, 2000)
    traj = np.zeros((len(t), 4))
    traj[:, 0] = (0.1 + t) * np.cos(t)
    traj[:, 2] = (0.1 + t) * np.sin(t)
    assert convergence_verdict(traj, ORIGIN, 0.05) == "diverged"


def test_verdict_without_reference():
    with pytest.raises(PreconditionError):
        convergence_verdict(np.zeros((10, 4)), None)
    with pytest.raises(PreconditionError):
        convergence_verdict(np.zeros((10, 4)), ORIGIN, window=11)


def test_cycle_score_examples():
    line = np.zeros((50, 4))
    line[:, 0] = np.linspace(1.0, 0.0, 50)
    line[:, 2] = np.linspace(2.0, 0.0, 50)
    assert cycle_score(line, ORIGIN) == pytest.approx(0.0, abs=1e-12)
    assert cycle_score(_circle(), ORIGIN) >= 0.9
    assert cycle_score(np.zeros((10, 4)), ORIGIN) == 0.0


def test_csv_header_schema():
    assert ",".join(csv_header(2)) == (
        "t,phi_0,phi_1,omega_0,omega_1,c_0,c_1,loss_pi,loss_D,r_m,step_norm_sq,dist_mne"
    )
    assert csv_header(1)[5:7] == ["c_0", "loss_pi"]


def test_log_round_trip_text():
    log = TrajectoryLog(1)
    log.append(1, [0.1, 0.2], [0.3, 0.4], [0.5], 1.0, -1.0)
    log.append(2, [0.1, 0.2], [0.3, 0.4], [0.5], 1.0, -1.0, r_m=-0.25, step_norm_sq=0.0, dist_mne=0.5)
    lines = log.to_csv_text().splitlines()
    assert lines[0] == "t,phi_0,phi_1,omega_0,omega_1,c_0,loss_pi,loss_D,r_m,step_norm_sq,dist_mne"
    assert lines[1] == "1,0.1,0.2,0.3,0.4,0.5,1.0,-1.0,,,"
    assert lines[2].endswith("-0.25,0.0,0.5")
    assert math.isnan(log.column("r_m")[0])


def test_log_rows_strictly_ordered():
    log = TrajectoryLog(2)
    log.append(3, [0, 0], [0, 0], None, 0.0, 0.0)
    with pytest.raises(PreconditionError):
        log.append(3, [0, 0], [0, 0], None, 0.0, 0.0)
    with pytest.raises(PreconditionError):
        log.append(4, [0, 0], [0, 0], [1.0], 0.0, 0.0)


def test_from_arrays_metrics():
    traj = np.array([[1.0, 0, 0, 0], [0.0, 0, 0, 0], [0.0, 0, 0, 1.0]])
    log = TrajectoryLog.from_arrays(traj, np.zeros((2, 2)), [1.0, 2.0], [-1.0, -2.0], None, ORIGIN)
    np.testing.assert_array_equal(log.column("step_norm_sq"), [1.0, 1.0])
    np.testing.assert_array_equal(log.column("dist_mne"), [0.0, 1.0])
    np.testing.assert_array_equal(log.column("t"), [1, 2])


def test_summary_json(tmp_path):
    s = RunSummary.from_trajectory(_circle(), ORIGIN, experiment="pennies", learner="ftrl_l2", seed=0, steps=10)
    assert s.verdict == "weak_only"
    path = s.write(tmp_path / "s.json")
    data = json.loads(path.read_text())
    assert data["cycle_score"] >= 0.9 and data["experiment"] == "pennies"
    bare = RunSummary.from_trajectory(np.zeros((3, 4)), None, experiment="toygan", learner="gda", seed=1, steps=3)
    assert bare.verdict is None
