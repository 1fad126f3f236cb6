"""Trajectory logging and convergence diagnostics."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ._io import atomic_write_text
from .errors import NumericError, PreconditionError

__all__ = [
    "TrajectoryLog",
    "RunSummary",
    "csv_header",
    "step_metrics",
    "cross_entropy_and_kl",
    "time_average",
    "convergence_verdict",
    "cycle_score",
    "VERDICTS",
]

VERDICTS = ("last_iterate", "weak_only", "diverged")


def csv_header(code_size: int) -> list[str]:
    return (
        ["t", "phi_0", "phi_1", "omega_0", "omega_1"]
        + [f"c_{i}" for i in range(code_size)]
        + ["loss_pi", "loss_D", "r_m", "step_norm_sq", "dist_mne"]
    )


def _fmt(x) -> str:
    if x is None:
        return ""
    x = float(x)
    return "" if math.isnan(x) else repr(x)


class TrajectoryLog:
    """Column store with one row per step; ``NaN`` marks an empty cell.

    ``phi`` and ``omega`` hold the two logged coordinates of each player
    (for network games these are summary statistics).
    """

    def __init__(self, code_size: int):
        self.code_size = int(code_size)
        self._rows: list[tuple] = []

    def __len__(self) -> int:
        return len(self._rows)

    def append(self, t: int, phi, omega, c, loss_pi, loss_D, r_m=None, step_norm_sq=None, dist_mne=None):
        if self._rows and t <= self._rows[-1][0]:
            raise PreconditionError(f"step {t} does not follow step {self._rows[-1][0]}")
        c = np.zeros(self.code_size) if c is None else np.asarray(c, dtype=float).reshape(-1)
        if c.size != self.code_size:
            raise PreconditionError(f"code has {c.size} entries, log expects {self.code_size}")
        nan = float("nan")
        self._rows.append(
            (
                int(t),
                *map(float, np.asarray(phi, dtype=float)[:2]),
                *map(float, np.asarray(omega, dtype=float)[:2]),
                *map(float, c),
                float(loss_pi),
                float(loss_D),
                nan if r_m is None else float(r_m),
                nan if step_norm_sq is None else float(step_norm_sq),
                nan if dist_mne is None else float(dist_mne),
            )
        )

    @classmethod
    def from_arrays(cls, traj, codes, loss_pi, loss_D, r_m=None, mu_star=None, t0: int = 1):
        """Build a log from a ``(T + 1, 4)`` strategy trajectory (row 0 is the start)."""
        traj = np.asarray(traj, dtype=float)
        T = len(traj) - 1
        codes = np.asarray(codes, dtype=float).reshape(T, -1)
        log = cls(codes.shape[1])
        steps = np.sum(np.diff(traj, axis=0) ** 2, axis=1)
        dist = None if mu_star is None else np.linalg.norm(traj[1:] - np.concatenate(mu_star), axis=1)
        for i in range(T):
            log.append(
                t0 + i,
                traj[i + 1, :2],
                traj[i + 1, 2:4],
                codes[i],
                loss_pi[i],
                loss_D[i],
                None if r_m is None else r_m[i],
                steps[i],
                None if dist is None else dist[i],
            )
        return log

    @property
    def header(self) -> list[str]:
        return csv_header(self.code_size)

    def column(self, name: str) -> np.ndarray:
        i = self.header.index(name)
        return np.array([r[i] for r in self._rows], dtype=float)

    def strategies(self) -> np.ndarray:
        """``(T, 4)`` array of the logged ``(phi_0, phi_1, omega_0, omega_1)``."""
        return np.array([r[1:5] for r in self._rows], dtype=float).reshape(-1, 4)

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for r in self._rows:
            w.writerow([str(r[0])] + [_fmt(x) for x in r[1:]])
        return buf.getvalue()

    def write_csv(self, path):
        return atomic_write_text(path, self.to_csv_text())


def step_metrics(mu_t, mu_prev, mu_star=None):
    """``(|mu_t - mu_prev|^2, |mu_t - mu_star|)`` over concatenated strategies.

    Strategies may be arrays or ``(phi, omega)`` pairs; the distance is
    ``None`` without a reference.
    """
    a = _flat(mu_t)
    b = _flat(mu_prev)
    if a.shape != b.shape:
        raise PreconditionError("strategy dimensions differ")
    sq = float(np.sum((a - b) ** 2))
    if mu_star is None:
        return sq, None
    s = _flat(mu_star)
    if s.shape != a.shape:
        raise PreconditionError("reference dimension differs")
    return sq, float(np.linalg.norm(a - s))


def _flat(x) -> np.ndarray:
    if isinstance(x, (tuple, list)) and len(x) and np.ndim(x[0]) >= 1:
        return np.concatenate([np.asarray(p, dtype=float).reshape(-1) for p in x])
    return np.asarray(x, dtype=float).reshape(-1)


def cross_entropy_and_kl(mu_star: Sequence, mu: Sequence):
    """Summed cross entropy ``H(mu*, mu)`` and ``KL(mu* || mu)`` over both players."""
    H = 0.0
    kl = 0.0
    for s, m in zip(mu_star, mu):
        s = np.asarray(s, dtype=float)
        m = np.asarray(m, dtype=float)
        support = s > 0
        if np.any(m[support] <= 0):
            raise NumericError("strategy puts zero mass where the reference does not", op="cross_entropy")
        H -= float(np.sum(s[support] * np.log(m[support])))
        kl += float(np.sum(s[support] * (np.log(s[support]) - np.log(m[support]))))
    return H, kl


def entropy(mu_star: Sequence) -> float:
    """Summed Shannon entropy of the reference strategies."""
    out = 0.0
    for s in mu_star:
        s = np.asarray(s, dtype=float)
        s = s[s > 0]
        out -= float(np.sum(s * np.log(s)))
    return out


def time_average(history) -> np.ndarray:
    """Arithmetic mean of the strategy history ``(T, d)``."""
    h = np.asarray(history, dtype=float)
    if h.size == 0 or len(h) == 0:
        raise PreconditionError("history is empty")
    return h.mean(axis=0)


def _traj_and_ref(traj, mu_star):
    if isinstance(traj, TrajectoryLog):
        traj = traj.strategies()
    traj = np.asarray(traj, dtype=float)
    if mu_star is None:
        raise PreconditionError("no equilibrium reference: verdict unavailable")
    return traj, _flat(mu_star)


def convergence_verdict(traj, mu_star, eps: float = 0.05, window: int | None = None) -> str:
    """Classify a trajectory as ``last_iterate``, ``weak_only`` or ``diverged``.

    ``last_iterate``: every iterate in the final ``window`` steps (default
    the last 10%) lies within ``eps`` of ``mu_star``. ``weak_only``: that
    fails but the time average lies within ``eps``. Otherwise ``diverged``.
    """
    traj, ref = _traj_and_ref(traj, mu_star)
    T = len(traj)
    if window is None:
        window = max(1, T // 10)
    if window < 1 or window > T:
        raise PreconditionError(f"window {window} must be between 1 and the trajectory length {T}")
    dist = np.linalg.norm(traj - ref, axis=1)
    if np.all(dist[-window:] < eps):
        return "last_iterate"
    if np.linalg.norm(traj.mean(axis=0) - ref) < eps:
        return "weak_only"
    return "diverged"


def cycle_score(traj, mu_star, coords=(0, 2)) -> float:
    """Share of path length spent rotating around ``mu_star``, in ``[0, 1]``.

    Works in the plane of coordinates ``coords`` (by default ``phi[0]`` and
    ``omega[0]``). Each step's displacement is split into radial and
    tangential parts relative to the step midpoint; the score is
    ``|sum of signed tangential parts| / sum of step lengths``. Pure
    rotation scores 1, straight approach 0, and back-and-forth motion
    cancels. Steps whose midpoint sits on ``mu_star`` contribute length but
    no rotation.
    """
    traj, ref = _traj_and_ref(traj, mu_star)
    z = traj[:, list(coords)] - ref[list(coords)]
    if len(z) < 2:
        return 0.0
    dz = np.diff(z, axis=0)
    mid = 0.5 * (z[1:] + z[:-1])
    r = np.linalg.norm(mid, axis=1)
    length = np.linalg.norm(dz, axis=1)
    total = length.sum()
    if total == 0.0:
        return 0.0
    cross = mid[:, 0] * dz[:, 1] - mid[:, 1] * dz[:, 0]
    tangential = np.where(r > 0, cross / np.where(r > 0, r, 1.0), 0.0)
    return float(min(1.0, abs(tangential.sum()) / total))


@dataclass
class RunSummary:
    """Scalar digest of one run, serialized as JSON."""

    experiment: str
    learner: str
    seed: int
    steps: int
    final_distance: float | None = None
    min_distance: float | None = None
    time_average_distance: float | None = None
    cycle_score: float | None = None
    verdict: str | None = None
    regret_curve: list | None = None
    extras: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    @classmethod
    def from_trajectory(cls, traj, mu_star, eps: float = 0.05, window: int | None = None, **kw):
        """Fill the distance-based fields from a ``(T, 4)`` trajectory."""
        s = cls(**kw)
        if mu_star is None or len(traj) == 0:
            return s
        traj, ref = _traj_and_ref(traj, mu_star)
        dist = np.linalg.norm(traj - ref, axis=1)
        s.final_distance = float(dist[-1])
        s.min_distance = float(dist.min())
        s.time_average_distance = float(np.linalg.norm(traj.mean(axis=0) - ref))
        s.cycle_score = cycle_score(traj, ref)
        s.verdict = convergence_verdict(traj, ref, eps, window)
        return s

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=_json_default) + "\n"

    def write(self, path):
        return atomic_write_text(path, self.to_json())


def _json_default(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(f"cannot serialize {type(x).__name__}")
