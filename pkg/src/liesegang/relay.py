"""Spatially distributed one-sided non-ideal relay.

Each grid node carries an accumulator ``a(x, t) = integral of (u - u_star)_+``
and a precipitation value derived from it.  The relay never switches back:
the accumulator is non-negative and non-decreasing, so the precipitation
value is non-decreasing in time at every node.

Three variants are supported:

* ``sharp``       -- p = 1 as soon as a > 0 (with the convention p = 0 at a = 0),
* ``mollified``   -- p = S(a / eps) for a monotone C^1 smoothstep S,
* ``property_p``  -- sharp, but a node stops accumulating once t exceeds its
  parabola time x^2/alpha^2, so the value above the parabola is frozen.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ModelParams

SHARP = "sharp"
MOLLIFIED = "mollified"
PROPERTY_P = "property_p"
_VARIANTS = (SHARP, MOLLIFIED, PROPERTY_P)


class LengthMismatch(ValueError):
    """Field length does not match the relay state."""


@dataclass(frozen=True)
class RelayKind:
    variant: str
    epsilon: float | None = None

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ValueError(f"unknown relay variant {self.variant!r}; expected one of {_VARIANTS}")
        if self.variant == MOLLIFIED:
            if self.epsilon is None or not (self.epsilon > 0):
                raise ValueError("mollified relay requires epsilon > 0")
        elif self.epsilon is not None:
            raise ValueError(f"{self.variant} relay takes no epsilon")

    @staticmethod
    def sharp() -> "RelayKind":
        return RelayKind(SHARP)

    @staticmethod
    def mollified(epsilon: float) -> "RelayKind":
        return RelayKind(MOLLIFIED, epsilon)

    @staticmethod
    def property_p() -> "RelayKind":
        return RelayKind(PROPERTY_P)

    def label(self) -> str:
        if self.variant == MOLLIFIED:
            return f"mollified(eps={self.epsilon:g})"
        return self.variant


@dataclass
class RelayState:
    """Per-node accumulator state.

    ``cap_time`` holds the parabola time x^2/alpha^2 of every node; only the
    property_p variant consults it.  ``ignition_time`` is NaN until the first
    step with a strict accumulator increase and is set to the end time of
    that step.
    """

    u_star: float
    accumulator: np.ndarray
    ignition_time: np.ndarray
    cap_time: np.ndarray
    last_ignited: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.intp))

    @staticmethod
    def create(x: np.ndarray, params: ModelParams) -> "RelayState":
        n = x.shape[0]
        return RelayState(
            u_star=params.u_star,
            accumulator=np.zeros(n),
            ignition_time=np.full(n, np.nan),
            cap_time=(np.asarray(x, dtype=float) / params.alpha) ** 2,
        )

    @property
    def size(self) -> int:
        return self.accumulator.shape[0]


def smoothstep(s):
    """Cubic smoothstep: 0 for s <= 0, 1 for s >= 1, 3s^2 - 2s^3 between."""
    s_arr = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    out = s_arr * s_arr * (3.0 - 2.0 * s_arr)
    if np.isscalar(s):
        return float(out)
    return out


def accumulate(state: RelayState, u_field: np.ndarray, dt: float, t_new: float,
               kind: RelayKind) -> RelayState:
    """Advance the accumulator by one left-endpoint rectangle of (u - u_star)_+.

    ``u_field`` is the concentration at the end of the step and ``t_new`` the
    corresponding time.  For the property_p variant, nodes whose parabola
    time lies below ``t_new`` are frozen and receive no increment.  Newly
    ignited node indices are recorded in ``state.last_ignited``.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    u_field = np.asarray(u_field, dtype=float)
    if u_field.shape[0] != state.size:
        raise LengthMismatch(f"field has {u_field.shape[0]} nodes, state has {state.size}")
    inc = np.maximum(u_field - state.u_star, 0.0) * dt
    if kind.variant == PROPERTY_P:
        inc[t_new > state.cap_time] = 0.0
    newly = np.flatnonzero((inc > 0.0) & np.isnan(state.ignition_time))
    state.ignition_time[newly] = t_new
    state.accumulator += inc
    state.last_ignited = newly
    return state


def evaluate(state: RelayState, kind: RelayKind) -> np.ndarray:
    """Precipitation value per node for the current accumulator."""
    if kind.variant == MOLLIFIED:
        return smoothstep(state.accumulator / kind.epsilon)
    return (state.accumulator > 0.0).astype(float)
