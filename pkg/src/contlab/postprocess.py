"""Surface assembly, constant-force response extraction and branch
comparison metrics."""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

CSV_COLUMNS = ["omega", "a_star", "f_meas", "a_meas", "flag"]


@dataclass
class SurfaceGrid:
    """Measured force/response over a rectangular (frequency, target)
    grid; flagged cells are excluded from interpolation."""

    omega_axis: np.ndarray
    a_star_axis: np.ndarray
    f_meas: np.ndarray        # shape (n_omega, n_a)
    a_meas: np.ndarray
    flags: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.omega_axis = np.asarray(self.omega_axis, dtype=float)
        self.a_star_axis = np.asarray(self.a_star_axis, dtype=float)
        self.f_meas = np.asarray(self.f_meas, dtype=float)
        self.a_meas = np.asarray(self.a_meas, dtype=float)
        self.flags = np.asarray(self.flags, dtype=bool)
        if np.any(np.diff(self.omega_axis) <= 0.0) or \
                np.any(np.diff(self.a_star_axis) <= 0.0):
            raise ValueError("grid axes must be strictly increasing")
        shape = (self.omega_axis.size, self.a_star_axis.size)
        for arr in (self.f_meas, self.a_meas, self.flags):
            if arr.shape != shape:
                raise ValueError(f"expected field shape {shape}, got {arr.shape}")

    def to_csv(self, path):
        lines = [",".join(CSV_COLUMNS)]
        for i, om in enumerate(self.omega_axis):
            for j, a in enumerate(self.a_star_axis):
                lines.append(",".join([
                    repr(float(om)), repr(float(a)),
                    repr(float(self.f_meas[i, j])),
                    repr(float(self.a_meas[i, j])),
                    "true" if self.flags[i, j] else "false"]))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path):
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            if header != CSV_COLUMNS:
                raise ValueError(f"unexpected surface CSV header in {path}")
            rows = [line.strip().split(",") for line in fh if line.strip()]
        oms = sorted({float(r[0]) for r in rows})
        ast = sorted({float(r[1]) for r in rows})
        grid = cls(np.array(oms), np.array(ast),
                   np.full((len(oms), len(ast)), math.nan),
                   np.full((len(oms), len(ast)), math.nan),
                   np.zeros((len(oms), len(ast)), dtype=bool))
        io = {v: i for i, v in enumerate(oms)}
        ia = {v: j for j, v in enumerate(ast)}
        for r in rows:
            i, j = io[float(r[0])], ia[float(r[1])]
            grid.f_meas[i, j] = float(r[2])
            grid.a_meas[i, j] = float(r[3])
            grid.flags[i, j] = r[4] == "true"
        if np.any(np.isnan(grid.f_meas)):
            raise ValueError("surface CSV does not cover the full grid")
        return grid


def _line_splines(axis, values, flags):
    """Not-a-knot cubic splines along one axis, one per grid line,
    skipping flagged nodes.  Returns a list of callables or None."""
    out = []
    for col in range(values.shape[1]):
        good = ~flags[:, col] & np.isfinite(values[:, col])
        n = int(np.sum(good))
        if n >= 4:
            out.append(CubicSpline(axis[good], values[good, col],
                                   bc_type="not-a-knot"))
        elif n >= 2:
            out.append(_poly_interp(axis[good], values[good, col]))
        else:
            out.append(None)
    return out


def _poly_interp(xs, ys):
    coef = np.polyfit(xs, ys, len(xs) - 1)

    def f(x):
        return np.polyval(coef, x)
    return f


def _tensor_eval(grid, values, omega_q, a_q):
    """Tensor-product cubic interpolation of a surface field on a dense
    rectangular query grid, ignoring flagged cells."""
    lines = _line_splines(grid.omega_axis, values, grid.flags)
    mid = np.full((len(omega_q), grid.a_star_axis.size), math.nan)
    for j, f in enumerate(lines):
        if f is not None:
            mid[:, j] = f(omega_q)
    out = np.full((len(omega_q), len(a_q)), math.nan)
    for i in range(len(omega_q)):
        good = np.isfinite(mid[i])
        n = int(np.sum(good))
        if n >= 4:
            sp = CubicSpline(grid.a_star_axis[good], mid[i, good],
                             bc_type="not-a-knot")
            out[i] = sp(a_q)
        elif n >= 2:
            out[i] = _poly_interp(grid.a_star_axis[good], mid[i, good])(a_q)
    return out


def _bisect_edge(p0, p1, g0, g1, evaluate, n_iter=30):
    """Root of the interpolated level function along a grid edge."""
    for _ in range(n_iter):
        pm = (0.5 * (p0[0] + p1[0]), 0.5 * (p0[1] + p1[1]))
        gm = evaluate(pm)
        if not math.isfinite(gm):
            break
        if (g0 < 0.0) == (gm < 0.0):
            p0, g0 = pm, gm
        else:
            p1, g1 = pm, gm
    return 0.5 * (p0[0] + p1[0]), 0.5 * (p0[1] + p1[1])


def slice_constant_force(grid, f_star, refine=4):
    """Constant-force response curves from a measured surface.

    Fits the force field with tensor cubic splines over unflagged cells,
    traces the zero-level set of (force - f_star) by marching squares on
    a ``refine``-times denser grid with bisection polish, and reads the
    response amplitude along each curve.  Returns a list of polylines,
    each a dict of omega / a_star / a_meas arrays.
    """
    fin = grid.f_meas[~grid.flags]
    if not (np.nanmin(fin) <= f_star <= np.nanmax(fin)):
        return []
    om_q = np.linspace(grid.omega_axis[0], grid.omega_axis[-1],
                       refine * (grid.omega_axis.size - 1) + 1)
    a_q = np.linspace(grid.a_star_axis[0], grid.a_star_axis[-1],
                      refine * (grid.a_star_axis.size - 1) + 1)
    F = _tensor_eval(grid, grid.f_meas, om_q, a_q) - f_star

    def f_at(p):
        val = _tensor_eval(grid, grid.f_meas, np.array([p[0]]),
                           np.array([p[1]]))[0, 0]
        return val - f_star

    # marching squares: collect level-crossing segments per cell
    segments = []
    for i in range(len(om_q) - 1):
        for j in range(len(a_q) - 1):
            corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]
            vals = [F[a, b] for a, b in corners]
            if any(not math.isfinite(v) for v in vals):
                continue
            pts = []
            for k in range(4):
                (i0, j0), (i1, j1) = corners[k], corners[(k + 1) % 4]
                v0, v1 = vals[k], vals[(k + 1) % 4]
                if (v0 < 0.0) != (v1 < 0.0):
                    p0 = (om_q[i0], a_q[j0])
                    p1 = (om_q[i1], a_q[j1])
                    pts.append(_bisect_edge(p0, p1, v0, v1, f_at))
            if len(pts) == 2:
                segments.append(pts)
    polylines = _link_segments(segments)
    out = []
    for line in polylines:
        oms = np.array([p[0] for p in line])
        ast = np.array([p[1] for p in line])
        a_meas = _pointwise(grid, grid.a_meas, oms, ast)
        out.append({"omega": oms, "a_star": ast, "a_meas": a_meas})
    return out


def _pointwise(grid, values, oms, ast):
    out = np.empty(len(oms))
    for idx in range(len(oms)):
        out[idx] = _tensor_eval(grid, values, np.array([oms[idx]]),
                                np.array([ast[idx]]))[0, 0]
    return out


def _link_segments(segments, tol=1e-9):
    """Chain marching-squares segments into polylines."""
    def key(p):
        return (round(p[0] / max(abs(p[0]), 1e-12) * 1e10),
                round(p[1], 12), round(p[0], 12))

    remaining = [list(s) for s in segments]
    lines = []
    while remaining:
        line = remaining.pop()
        grown = True
        while grown:
            grown = False
            for idx, seg in enumerate(remaining):
                for end, insert in ((line[-1], "append"), (line[0], "prepend")):
                    for a, b in ((seg[0], seg[1]), (seg[1], seg[0])):
                        if abs(a[0] - end[0]) < 1e-9 and abs(a[1] - end[1]) < 1e-9:
                            if insert == "append":
                                line.append(b)
                            else:
                                line.insert(0, b)
                            remaining.pop(idx)
                            grown = True
                            break
                    if grown:
                        break
                if grown:
                    break
        lines.append(line)
    lines.sort(key=len, reverse=True)
    return lines


def branch_compare(test, reference, amp_floor_frac=1e-3):
    """Pointwise deviation of a test branch from a reference branch.

    Matches each test point to the nearest sheet of the reference
    polyline (scaled metric), interpolates the reference amplitude at
    the matched frequency when the local sheet brackets it, and reports
    max/mean relative amplitude deviation plus the relative deviation of
    the frequency of maximum amplitude.
    """
    to = np.asarray([p.omega for p in test.points], dtype=float)
    ta = np.asarray([p.a1 for p in test.points], dtype=float)
    ro = np.asarray([p.omega for p in reference.points], dtype=float)
    ra = np.asarray([p.a1 for p in reference.points], dtype=float)
    keep_t = np.isfinite(to) & np.isfinite(ta)
    to, ta = to[keep_t], ta[keep_t]
    if len(to) == 0 or len(ro) < 2:
        raise ValueError("need non-empty branches to compare")
    lo = max(to.min(), ro.min())
    hi = min(to.max(), ro.max())
    if hi <= lo:
        raise ValueError("branches have disjoint frequency coverage")
    om_scale = max(ro.max() - ro.min(), 1e-12)
    a_scale = max(ra.max() - ra.min(), 1e-12)
    rx, ry = ro / om_scale, ra / a_scale
    devs = []
    for om, a in zip(to, ta):
        if om < lo - 1e-12 or om > hi + 1e-12:
            continue
        px, py = om / om_scale, a / a_scale
        best, jbest, tbest = math.inf, 0, 0.0
        for j in range(len(rx) - 1):
            dx, dy = rx[j + 1] - rx[j], ry[j + 1] - ry[j]
            denom = dx * dx + dy * dy
            tt = 0.0 if denom == 0.0 else min(1.0, max(0.0, (
                (px - rx[j]) * dx + (py - ry[j]) * dy) / denom))
            d2 = (rx[j] + tt * dx - px) ** 2 + (ry[j] + tt * dy - py) ** 2
            if d2 < best:
                best, jbest, tbest = d2, j, tt
        a_ref = None
        for j in range(max(0, jbest - 3), min(len(ro) - 1, jbest + 4)):
            o0, o1 = ro[j], ro[j + 1]
            if (o0 - om) * (o1 - om) <= 0.0 and o0 != o1:
                cand = ra[j] + (ra[j + 1] - ra[j]) * (om - o0) / (o1 - o0)
                if a_ref is None or abs(cand - a) < abs(a_ref - a):
                    a_ref = cand
        if a_ref is None:
            a_ref = ra[jbest] + tbest * (ra[jbest + 1] - ra[jbest])
        floor = amp_floor_frac * ra.max()
        devs.append(abs(a - a_ref) / max(abs(a_ref), floor))
    if not devs:
        raise ValueError("no test points inside the reference coverage")
    peak_dev = abs(to[np.argmax(ta)] - ro[np.argmax(ra)]) / ro[np.argmax(ra)]
    return {"max_rel_amp_dev": float(np.max(devs)),
            "mean_rel_amp_dev": float(np.mean(devs)),
            "peak_freq_dev_rel": float(peak_dev),
            "n_compared": len(devs)}
