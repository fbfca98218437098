"""Hand-built records for fixture-style tests."""
import numpy as np

import liesegang as lg
from liesegang import model
from liesegang.records import BACK_OFFSETS, RIGHT_CELLS


def make_record(params, grid, times, u=None, p=None, ignition_time=None,
                relay_kind=None, accum=None):
    """Assemble a SolutionRecord from explicit snapshot arrays.

    ``u`` defaults to psi on the grid (zero deficit); ``p`` defaults to the
    canonical indicator of ``ignition_time``; unspecified ignition data stays
    unset.
    """
    times = np.asarray(times, dtype=float)
    x = grid.x
    n = x.size
    psi_vals = model.psi(x[None, :], times[:, None], params)
    if u is None:
        u = psi_vals.copy()
    u = np.asarray(u, dtype=float)
    if ignition_time is None:
        ignition_time = np.full(n, np.nan)
    ignition_time = np.asarray(ignition_time, dtype=float)
    if p is None:
        ell = np.where(np.isfinite(ignition_time), ignition_time, np.inf)
        p = (times[:, None] > ell[None, :]).astype(float)
    return lg.SolutionRecord(
        params=params, grid=grid,
        relay_kind=relay_kind or lg.RelayKind.sharp(),
        snapshot_stride=1, scheme="synthetic",
        times=times, w=u - psi_vals, p=np.asarray(p, dtype=float),
        accum=accum if accum is not None else np.zeros_like(u),
        ignition_time=ignition_time,
        ignition_u=np.full(n, np.nan),
        ignition_u_right=np.full((n, RIGHT_CELLS), np.nan),
        ignition_u_back=np.full((n, len(BACK_OFFSETS)), np.nan),
        constants=None,
    )
