"""CSV serialization of domain objects.

All floats are written with 9 significant digits and LF line endings, so
identical inputs produce byte-identical files.
"""

from __future__ import annotations

import math

import numpy as np

from .curves import BifurcationCurve
from .equilibria import BifurcationLadder, Nullclines
from .simulate import Trajectory
from .slowfast import BreakCurve3, GsptTrajectory

__all__ = [
    "fmt",
    "trajectory_csv",
    "sweep_csv",
    "curve_csv",
    "ladder_csv",
    "nullclines_csv",
    "gspt_csv",
    "break_curve_csv",
]


def fmt(x: float) -> str:
    """One float at 9 significant digits; NaN spelled out."""
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return format(float(x), ".9g")


def _table(header: list, rows) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(fmt(v) if not isinstance(v, str) else v for v in row)
                 for row in rows)
    return "\n".join(lines) + "\n"


def trajectory_csv(traj: Trajectory) -> str:
    if traj.model == "mech":
        header = ["t", "c", "theta", "h"]
    elif traj.model == "atri":
        header = ["t", "c", "h"]
    else:
        header = ["t", "x", "y"]
    rows = (np.concatenate(([t], y)) for t, y in zip(traj.t, traj.y))
    return _table(header, rows)


def sweep_csv(points, param_name: str) -> str:
    header = [param_name, "c_min", "c_max", "period", "frequency",
              "oscillating", "n_equilibria"]
    rows = []
    for pt in points:
        s = pt.summary
        rows.append([pt.param_value, s.c_min, s.c_max, s.period, s.frequency,
                     "1" if s.oscillating else "0", str(len(pt.equilibria))])
    return _table(header, rows)


def curve_csv(curve: BifurcationCurve) -> str:
    rows = ([c, mu, lam, curve.kind.value]
            for c, mu, lam in zip(curve.c, curve.mu, curve.lam))
    return _table(["c", "mu", "lambda", "kind"], rows)


def ladder_csv(ladder: BifurcationLadder) -> str:
    rows = ([e.mu, e.kind.value, e.branch_c] for e in ladder.events)
    return _table(["mu", "kind", "branch_c"], rows)


def nullclines_csv(n: Nullclines) -> str:
    rows = zip(n.c, n.h_flux, n.h_gate)
    return _table(["c", "h_F", "h_G"], rows)


def gspt_csv(traj: GsptTrajectory) -> str:
    rows = []
    for seg in traj.segments:
        for t, c, th, h in zip(seg.t, seg.c, seg.theta, seg.h):
            rows.append([seg.phase, t, c, th, h])
    return _table(["phase", "t", "c", "theta", "h"], rows)


def break_curve_csv(bc: BreakCurve3) -> str:
    rows = zip(bc.c, bc.theta, bc.h)
    return _table(["c", "theta_F", "h_F"], rows)
