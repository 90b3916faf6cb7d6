"""Converged solution points and branches, with the CSV interchange
format shared by every method."""

import math
from dataclasses import dataclass, field

import numpy as np

CSV_COLUMNS = ["index", "omega", "a_star", "f_meas", "a1", "phase1",
               "total_amp", "invasiveness_rel", "converged",
               "open_loop_stable", "wall_time_s"]


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return ""
    return repr(v)


def _parse(text):
    if text == "":
        return None
    if text == "true":
        return True
    if text == "false":
        return False
    return float(text)


@dataclass
class BranchPoint:
    """One converged solution of a continuation or testing run.

    ``wall_time_s`` is the simulated experiment time spent obtaining the
    point, which keeps artifacts reproducible bit for bit.
    """

    omega: float
    a1: float
    f_meas: float
    phase_lag: float = 0.0
    total_amp: float = 0.0
    a_star: float = None
    measured: object = None       # HarmonicVector of the response
    forcing: object = None        # HarmonicVector of the realized drive
    invasiveness: object = None   # InvasivenessReport
    converged: bool = True
    open_loop_stable: bool = None
    wall_time_s: float = 0.0
    coeffs: np.ndarray = None     # orbit coefficients (reference engine)
    multipliers: tuple = None     # Floquet multipliers when computed

    @property
    def invasiveness_rel(self):
        return None if self.invasiveness is None else self.invasiveness.relative


@dataclass
class Branch:
    """Ordered branch points with method provenance."""

    method: str
    points: list = field(default_factory=list)
    config_digest: str = ""
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def omegas(self):
        return np.array([p.omega for p in self.points])

    def amps(self):
        return np.array([p.a1 for p in self.points])

    def to_csv(self, path):
        lines = [",".join(CSV_COLUMNS)]
        for i, p in enumerate(self.points):
            row = [str(i), _fmt(p.omega), _fmt(p.a_star), _fmt(p.f_meas),
                   _fmt(p.a1), _fmt(p.phase_lag), _fmt(p.total_amp),
                   _fmt(p.invasiveness_rel), _fmt(p.converged),
                   _fmt(p.open_loop_stable), _fmt(p.wall_time_s)]
            lines.append(",".join(row))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path, method=""):
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            if header != CSV_COLUMNS:
                raise ValueError(f"unexpected branch CSV header in {path}")
            branch = cls(method=method)
            for line in fh:
                cells = [_parse(c) for c in line.strip().split(",")]
                row = dict(zip(CSV_COLUMNS, cells))
                from .control import InvasivenessReport
                inv = row["invasiveness_rel"]
                branch.points.append(BranchPoint(
                    omega=row["omega"], a1=row["a1"], f_meas=row["f_meas"],
                    phase_lag=row["phase1"] or 0.0,
                    total_amp=row["total_amp"] or 0.0,
                    a_star=row["a_star"],
                    invasiveness=None if inv is None else
                    InvasivenessReport(residual_norm=math.nan, relative=inv),
                    converged=bool(row["converged"]),
                    open_loop_stable=row["open_loop_stable"],
                    wall_time_s=row["wall_time_s"] or 0.0))
        return branch
