"""Shared fixtures.

The desk-scale reference runs take a couple of minutes in total; they are
session-scoped and shared between the unit tests and the acceptance suite.
Set LIESEGANG_TEST_CACHE to a directory to reuse records across pytest
invocations (they are keyed by configuration, and runs are deterministic).
"""
import os
from pathlib import Path

import pytest

import liesegang as lg

ALPHA, BETA, FRACTION = 1.0, 1.0, 0.8


def cached_run(key, builder):
    cache_dir = os.environ.get("LIESEGANG_TEST_CACHE")
    if not cache_dir:
        return builder()
    prefix = Path(cache_dir) / key
    if (prefix.parent / (prefix.name + ".npz")).exists():
        return lg.SolutionRecord.load(prefix)
    record = builder()
    prefix.parent.mkdir(parents=True, exist_ok=True)
    record.save(prefix)
    return record


@pytest.fixture(scope="session")
def params():
    return lg.ModelParams.from_fraction(ALPHA, BETA, FRACTION)


@pytest.fixture(scope="session")
def constants(params):
    return lg.compute_constants(params)


@pytest.fixture(scope="session")
def grid_default(constants):
    return lg.GridSpec.make(dx=2.5e-3, dt=2.5e-6, x_max=6.0, t_max=2.0 * constants.T2)


@pytest.fixture(scope="session")
def grid_coarse(constants):
    # fast grid for contract tests; domain rule still satisfied
    return lg.GridSpec.make(dx=0.01, dt=2e-5, x_max=4.0, t_max=2.0 * constants.T2)


@pytest.fixture(scope="session")
def rec_sharp(params, grid_default):
    return cached_run("sharp_default",
                      lambda: lg.run(params, grid_default, lg.RelayKind.sharp(),
                                     snapshot_stride=100))


@pytest.fixture(scope="session")
def rec_property_p(params, grid_default):
    return cached_run("property_p_default",
                      lambda: lg.run(params, grid_default, lg.RelayKind.property_p(),
                                     snapshot_stride=100))


@pytest.fixture(scope="session")
def rec_mollified(params, grid_default):
    def build(eps):
        return cached_run(f"mollified_{eps:g}",
                          lambda: lg.run(params, grid_default, lg.RelayKind.mollified(eps),
                                         snapshot_stride=100))
    return {eps: build(eps) for eps in (1e-3, 5e-4)}


@pytest.fixture(scope="session")
def rec_halved(params, constants):
    # one simultaneous halving of (dx, dt), run to T2 (covers every probe)
    grid = lg.GridSpec.make(dx=1.25e-3, dt=1.25e-6, x_max=6.0, t_max=constants.T2)
    return cached_run("sharp_halved_T2",
                      lambda: lg.run(params, grid, lg.RelayKind.sharp(),
                                     snapshot_stride=100))


@pytest.fixture(scope="session")
def rec_coarse_sharp(params, grid_coarse):
    return lg.run(params, grid_coarse, lg.RelayKind.sharp(), snapshot_stride=50)
