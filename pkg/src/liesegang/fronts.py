"""Precipitation-front extraction, ring segmentation, boundary classification.

The front function ell(x) maps each precipitated node to its ignition time.
On a healthy ring domain it is strictly increasing (up to grid ties), squeezed
between the envelopes (x/alpha_star)^2 and (x/alpha)^2, and rings alternate
with interrings starting from a ring at x = 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grids import GridSpec
from .model import ModelConstants, ModelParams
from .records import SolutionRecord

REGULAR, DEGENERATE, JUMP = 0, 1, 2
_LABEL_NAMES = {REGULAR: "regular", DEGENERATE: "degenerate", JUMP: "jump"}
DEFAULT_JUMP_FACTOR = 50.0
JUMP_MEDIAN_WINDOW = 15


class EmptyFront(ValueError):
    """No node ever ignited."""


@dataclass
class FrontFunction:
    """Ignition time per grid node (NaN where the node never switched)."""

    x: np.ndarray
    ell: np.ndarray
    dx: float
    dt: float
    u_star: float
    residuals: np.ndarray
    residual_max: float
    front_tol: float
    residual_ok: bool
    tie_pairs: list = field(default_factory=list)
    monotonicity_violations: list = field(default_factory=list)

    @property
    def mask(self) -> np.ndarray:
        return np.isfinite(self.ell)

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    @property
    def ignited_x(self) -> np.ndarray:
        return self.x[self.mask]

    @property
    def ignited_ell(self) -> np.ndarray:
        return self.ell[self.mask]

    def tie_fraction(self) -> float:
        n = self.indices.size
        return len(self.tie_pairs) / n if n else 0.0

    def segments(self) -> list[tuple[int, int]]:
        """Contiguous index ranges [i0, i1] of precipitated nodes."""
        idx = self.indices
        if idx.size == 0:
            return []
        breaks = np.flatnonzero(np.diff(idx) > 1)
        starts = np.concatenate(([0], breaks + 1))
        ends = np.concatenate((breaks, [idx.size - 1]))
        return [(int(idx[s]), int(idx[e])) for s, e in zip(starts, ends)]

    @staticmethod
    def from_arrays(x, ell, dx: float, dt: float, u_star: float = np.nan) -> "FrontFunction":
        """Construct a synthetic front directly from coordinate/time arrays."""
        x = np.asarray(x, dtype=float)
        ell = np.asarray(ell, dtype=float)
        f = FrontFunction(x=x, ell=ell, dx=dx, dt=dt, u_star=u_star,
                          residuals=np.full(x.shape, np.nan), residual_max=0.0,
                          front_tol=np.inf, residual_ok=True)
        _scan_monotonicity(f)
        return f


def _scan_monotonicity(front: FrontFunction) -> None:
    idx = front.indices
    front.tie_pairs = []
    front.monotonicity_violations = []
    for a, b in zip(idx[:-1], idx[1:]):
        d = front.ell[b] - front.ell[a]
        if d == 0.0:
            front.tie_pairs.append((float(front.x[a]), float(front.x[b])))
        elif d < 0.0:
            front.monotonicity_violations.append((float(front.x[a]), float(front.x[b]), float(d)))


def default_front_tol(grid: GridSpec) -> float:
    return 10.0 * (grid.dx + grid.dt / grid.dx)


def extract_front(record: SolutionRecord, front_tol: float | None = None) -> FrontFunction:
    """Front function from recorded ignition times.

    Also verifies the threshold residual |u(x, ell(x)) - u_star| at every
    front node against ``front_tol`` (default ``10*(dx + dt/dx)``) and scans
    for monotonicity violations and grid ties.
    """
    ell = record.ignition_time
    if not np.isfinite(ell).any():
        raise EmptyFront("no node ignited in this record")
    if front_tol is None:
        front_tol = default_front_tol(record.grid)
    residuals = np.abs(record.ignition_u - record.params.u_star)
    residual_max = float(np.nanmax(residuals))
    front = FrontFunction(
        x=record.x, ell=ell.copy(), dx=record.grid.dx, dt=record.grid.dt,
        u_star=record.params.u_star, residuals=residuals, residual_max=residual_max,
        front_tol=front_tol, residual_ok=bool(residual_max <= front_tol),
    )
    _scan_monotonicity(front)
    return front


# -- ring segmentation ------------------------------------------------------

RING, INTERRING, UNDETERMINED = 1, 0, -1


@dataclass
class RingSegmentation:
    """Alternating rings/interrings with shared breakpoints at cell midpoints.

    A trailing interring that reaches the end of the analyzed range is
    reported as open-ended ``(a, inf)``; ``X_star`` is where alternation
    fails, or the analyzed data end.
    """

    rings: list
    interrings: list
    X_star: float
    node_class: np.ndarray
    analyzed_x_max: float


def _node_classes(record: SolutionRecord, i_max: int) -> np.ndarray:
    """RING if p == 1 at every stored time above the node's parabola time
    (with one-step slack), INTERRING if p == 0 at all times, else UNDETERMINED."""
    x = record.x[: i_max + 1]
    cap = (x / record.params.alpha) ** 2
    times = record.times
    p = record.p[:, : i_max + 1]
    classes = np.full(i_max + 1, UNDETERMINED, dtype=np.int8)
    never = (p <= 0.0).all(axis=0)
    classes[never] = INTERRING
    above = times[:, None] > cap[None, :] + record.grid.dt
    has_above = above.any(axis=0)
    ring = has_above & np.array([(p[above[:, j], j] == 1.0).all() for j in range(i_max + 1)])
    classes[ring & ~never] = RING
    return classes


def segment_rings(record: SolutionRecord, measure_tol: float = 0.0) -> RingSegmentation:
    """Segment the precipitation pattern above the parabola into rings and gaps.

    Only nodes whose parabola time lies inside the record (x <= alpha*
    sqrt(t_max)) are classified.  Runs shorter than ``measure_tol`` times the
    analyzed span are merged into their surroundings when both neighbors
    agree (the grid analogue of ignoring measure-zero exceptional sets).
    """
    alpha = record.params.alpha
    dx = record.grid.dx
    i_max = min(int(math.floor(alpha * math.sqrt(record.grid.t_max) / dx)), record.grid.n_x)
    classes = _node_classes(record, i_max)
    analyzed_x_max = record.x[i_max]

    runs = []  # (class, i0, i1)
    j = 0
    while j <= i_max:
        k = j
        while k + 1 <= i_max and classes[k + 1] == classes[j]:
            k += 1
        runs.append([int(classes[j]), j, k])
        j = k + 1

    if measure_tol > 0.0 and len(runs) >= 3:
        min_nodes = math.ceil(measure_tol * analyzed_x_max / dx)
        merged = True
        while merged:
            merged = False
            for r in range(1, len(runs) - 1):
                cls, i0, i1 = runs[r]
                if cls == UNDETERMINED or i1 - i0 + 1 >= min_nodes:
                    continue
                if runs[r - 1][0] == runs[r + 1][0] != UNDETERMINED:
                    runs[r - 1][2] = runs[r + 1][2]
                    del runs[r:r + 2]
                    merged = True
                    break
        rebuilt = np.full(i_max + 1, UNDETERMINED, dtype=np.int8)
        for cls, i0, i1 in runs:
            rebuilt[i0:i1 + 1] = cls
        classes = rebuilt

    rings, interrings = [], []
    X_star = 0.0
    expected = RING
    x = record.x
    for cls, i0, i1 in runs:
        if cls != expected:
            break
        left = 0.0 if i0 == 0 else x[i0] - 0.5 * dx
        right = x[i1] + 0.5 * dx if i1 < i_max else analyzed_x_max
        if cls == RING:
            rings.append((float(left), float(right)))
        else:
            if i1 == i_max:
                right = math.inf
            interrings.append((float(left), float(right)))
        X_star = analyzed_x_max if i1 == i_max else x[i1] + 0.5 * dx
        expected = INTERRING if cls == RING else RING
    return RingSegmentation(rings=rings, interrings=interrings, X_star=float(X_star),
                            node_class=classes, analyzed_x_max=float(analyzed_x_max))


# -- boundary classification -------------------------------------------------

@dataclass
class BoundaryClass:
    labels: np.ndarray          # per ignited node, in index order of FrontFunction.indices
    histogram: dict
    ring_start_checks: list     # (x, ell, parabola_time, tol, ok)


def parabola_tol(x, dx: float, dt: float, alpha: float):
    """Propagated grid uncertainty of the parabola time x^2/alpha^2."""
    return np.maximum(2.0 * dt, 4.0 * np.asarray(x) * dx / alpha**2)


def classify_boundary(front: FrontFunction, params: ModelParams, grid: GridSpec,
                      jump_factor: float = DEFAULT_JUMP_FACTOR,
                      segmentation: RingSegmentation | None = None) -> BoundaryClass:
    """Label every front node Regular / Degenerate (on the parabola within
    grid tolerance) / Jump (discrete increment above ``jump_factor`` times the
    local median increment; the node after the step is flagged)."""
    idx = front.indices
    xs = front.x[idx]
    ells = front.ell[idx]
    tol = parabola_tol(xs, grid.dx, grid.dt, params.alpha)
    labels = np.full(idx.size, REGULAR, dtype=np.int8)
    labels[np.abs(ells - (xs / params.alpha) ** 2) <= tol] = DEGENERATE

    if idx.size >= 2:
        incs = np.diff(ells)
        half = JUMP_MEDIAN_WINDOW // 2
        for j in range(incs.size):
            lo, hi = max(0, j - half), min(incs.size, j + half + 1)
            med = float(np.median(incs[lo:hi]))
            if med > 0 and incs[j] > jump_factor * med and labels[j + 1] == REGULAR:
                labels[j + 1] = JUMP

    hist = {name: int(np.sum(labels == code)) for code, name in _LABEL_NAMES.items()}
    ring_start_checks = []
    if segmentation is not None:
        for (a, _b) in segmentation.rings:
            i = int(np.argmin(np.abs(front.x - a)))
            if not np.isfinite(front.ell[i]):
                continue
            pt = (front.x[i] / params.alpha) ** 2
            tol_i = float(parabola_tol(front.x[i], grid.dx, grid.dt, params.alpha))
            ok = bool(abs(front.ell[i] - pt) <= tol_i)
            ring_start_checks.append((float(front.x[i]), float(front.ell[i]), pt, tol_i, ok))
    return BoundaryClass(labels=labels, histogram=hist, ring_start_checks=ring_start_checks)


# -- front slope bound --------------------------------------------------------

@dataclass
class SlopeReport:
    holds: bool
    worst_margin: float
    worst_pair: tuple | None
    n_pairs: int
    C_ell: float


def front_slope_check(front: FrontFunction, constants: ModelConstants) -> SlopeReport:
    """Quadratic growth bound ell(y2)-ell(y1) >= C_ell*(y2^2-y1^2) across all
    node pairs of the front restricted to x <= L and ell <= T2."""
    sel = front.mask & (front.x <= constants.ring_width_L) & (front.ell <= constants.T2)
    xs = front.x[sel]
    ells = front.ell[sel]
    if xs.size < 2:
        return SlopeReport(True, math.inf, None, 0, constants.C_ell)
    d_ell = ells[None, :] - ells[:, None]
    d_sq = xs[None, :] ** 2 - xs[:, None] ** 2
    margin = d_ell - constants.C_ell * d_sq
    iu = np.triu_indices(xs.size, k=1)
    margins = margin[iu]
    worst = int(np.argmin(margins))
    worst_margin = float(margins[worst])
    pair = (float(xs[iu[0][worst]]), float(xs[iu[1][worst]]))
    return SlopeReport(holds=bool(worst_margin >= 0.0), worst_margin=worst_margin,
                       worst_pair=pair, n_pairs=margins.size, C_ell=constants.C_ell)


# -- canonical precipitation reconstruction -----------------------------------

def reconstruct_p(front: FrontFunction, times: np.ndarray) -> np.ndarray:
    """Canonical field: p(x, t) = 1 where x precipitates and t > ell(x), else 0."""
    times = np.asarray(times, dtype=float)
    ell = np.where(front.mask, front.ell, np.inf)
    return (times[:, None] > ell[None, :]).astype(float)


def front_report(record: SolutionRecord, measure_tol: float = 0.0,
                 jump_factor: float = DEFAULT_JUMP_FACTOR,
                 front_tol: float | None = None) -> dict:
    """Everything the ``analyze`` subcommand emits, as one JSON-ready dict."""
    front = extract_front(record, front_tol=front_tol)
    seg = segment_rings(record, measure_tol=measure_tol)
    cls = classify_boundary(front, record.params, record.grid, jump_factor=jump_factor,
                            segmentation=seg)
    slope = None
    if record.constants is not None:
        rep = front_slope_check(front, record.constants)
        slope = {"holds": rep.holds, "worst_margin": rep.worst_margin,
                 "worst_pair": list(rep.worst_pair) if rep.worst_pair else None,
                 "n_pairs": rep.n_pairs, "C_ell": rep.C_ell}
    return {
        "I_ranges": [[float(record.x[a]), float(record.x[b])] for a, b in front.segments()],
        "ell": front.ell,
        "rings": [list(r) for r in seg.rings],
        "interrings": [list(r) for r in seg.interrings],
        "X_star": seg.X_star,
        "classification": cls.histogram,
        "ring_start_checks": [list(c) for c in cls.ring_start_checks],
        "residuals": {"max": front.residual_max, "tol": front.front_tol,
                      "ok": front.residual_ok},
        "ties": {"count": len(front.tie_pairs), "fraction": front.tie_fraction()},
        "monotonicity_violations": [list(v) for v in front.monotonicity_violations],
        "slope_bound": slope,
    }
