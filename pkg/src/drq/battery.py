"""Equivalent-circuit lithium-ion battery environment.

States are the state of charge and the RC-branch voltage; the control is a
discrete charging current; the safety constraint is on terminal voltage.

    soc'  = soc + I*dt/Q
    v_rc' = v_rc - (dt/(R1*C1))*v_rc + (dt/C1)*I
    v     = ocv(soc) + v_rc + I*R0          (pre-step soc and v_rc)
    r     = -(soc' - soc_target)^2
    g     = v - v_limit

The open-circuit-voltage map is a user-loadable piecewise-linear table; the
bundled default is a stand-in LFP-like curve (measured OCV data for the
reference cell is not public), shaped so the voltage limit binds during
fast charge.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

import numpy as np


class OcvFormatError(ValueError):
    """Malformed open-circuit-voltage table file."""


@dataclass(frozen=True)
class EcmParams:
    """Cell and episode parameters. capacity is in ampere-seconds.

    noise_std adds Gaussian noise to the measured voltage (not the
    dynamics); the default 0 keeps the environment noiseless.
    """

    capacity: float = 8280.0
    r1: float = 0.01
    c1: float = 2500.0
    r0: float = 0.01
    dt: float = 2.5
    v_limit: float = 3.6
    i_min: float = 0.0
    i_max: float = 46.0
    soc_init: float = 0.2
    soc_target: float = 0.7
    noise_std: float = 0.0

    def __post_init__(self):
        for name in ("capacity", "r1", "c1", "r0", "dt"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.i_min > self.i_max:
            raise ValueError("i_min must be <= i_max")
        if not 0 <= self.soc_init < self.soc_target <= 1:
            raise ValueError("need 0 <= soc_init < soc_target <= 1")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")


@dataclass(frozen=True)
class EcmState:
    soc: float
    v_rc: float


@dataclass(frozen=True)
class OcvTable:
    """Piecewise-linear OCV map; queries clamp to the endpoint voltages."""

    soc: np.ndarray
    voltage: np.ndarray

    def __post_init__(self):
        soc = np.asarray(self.soc, dtype=float)
        volt = np.asarray(self.voltage, dtype=float)
        if soc.size < 2:
            raise OcvFormatError("OCV table needs at least 2 points")
        if soc.size != volt.size:
            raise OcvFormatError("OCV soc/voltage columns differ in length")
        if not np.all(np.isfinite(soc)) or not np.all(np.isfinite(volt)):
            raise OcvFormatError("OCV table contains non-finite values")
        if not np.all(np.diff(soc) > 0):
            raise OcvFormatError("OCV soc breakpoints must be strictly increasing")
        if np.any(np.diff(volt) < 0):
            raise OcvFormatError("OCV voltages must be non-decreasing")
        object.__setattr__(self, "soc", soc)
        object.__setattr__(self, "voltage", volt)

    def __call__(self, soc: float) -> float:
        return float(np.interp(soc, self.soc, self.voltage))


def load_ocv(path) -> OcvTable:
    """Read a two-column (soc, voltage) comma-separated file; a single
    non-numeric header line is tolerated."""
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise OcvFormatError(f"{path}:{lineno}: expected 'soc,voltage'")
            try:
                rows.append((float(parts[0]), float(parts[1])))
            except ValueError:
                if lineno == 1:
                    continue  # header
                raise OcvFormatError(f"{path}:{lineno}: non-numeric row {line!r}")
    if len(rows) < 2:
        raise OcvFormatError(f"{path}: OCV table needs at least 2 data rows")
    arr = np.array(rows)
    return OcvTable(arr[:, 0], arr[:, 1])


def default_ocv() -> OcvTable:
    """Bundled stand-in OCV curve (flat mid-range, steep near full)."""
    ref = resources.files("drq").joinpath("data/ocv_default.csv")
    with resources.as_file(ref) as path:
        return load_ocv(path)


def action_grid(params: EcmParams, count: int = 24) -> np.ndarray:
    """Evenly spaced current levels spanning [i_min, i_max]."""
    if count < 2:
        raise ValueError("action grid needs at least 2 levels")
    return np.linspace(params.i_min, params.i_max, count)


def reset(params: EcmParams) -> EcmState:
    return EcmState(soc=params.soc_init, v_rc=0.0)


def step(
    params: EcmParams, table: OcvTable, state: EcmState, current: float
) -> tuple[EcmState, float, float, float]:
    """One environment step. Returns (next_state, voltage, reward, g)."""
    if not params.i_min <= current <= params.i_max:
        raise ValueError(
            f"current {current} outside [{params.i_min}, {params.i_max}]"
        )
    soc_next = state.soc + current * params.dt / params.capacity
    v_rc_next = (
        state.v_rc
        - (params.dt / (params.r1 * params.c1)) * state.v_rc
        + (params.dt / params.c1) * current
    )
    voltage = table(state.soc) + state.v_rc + current * params.r0
    reward = -((soc_next - params.soc_target) ** 2)
    g = voltage - params.v_limit
    return EcmState(soc_next, v_rc_next), voltage, reward, g


class BatteryEnv:
    """Episode-facing wrapper: vector states, a discrete current grid, and
    the declared input ranges the agents normalize against."""

    def __init__(
        self,
        params: EcmParams | None = None,
        table: OcvTable | None = None,
        grid_size: int = 24,
        noise_rng: np.random.Generator | None = None,
    ):
        self.params = params or EcmParams()
        self.table = table or default_ocv()
        self.action_values = action_grid(self.params, grid_size)
        self.state_low = np.array([0.0, 0.0])
        self.state_high = np.array([1.0, self.params.i_max * self.params.r1])
        self.action_low = self.params.i_min
        self.action_high = self.params.i_max
        if self.params.noise_std > 0 and noise_rng is None:
            raise ValueError("noise_std > 0 requires a noise_rng")
        self.noise_rng = noise_rng

    def reset(self) -> np.ndarray:
        s = reset(self.params)
        return np.array([s.soc, s.v_rc])

    def step(self, state: np.ndarray, current: float):
        """Returns (next_state, reward, g_values, info)."""
        s = EcmState(float(state[0]), float(state[1]))
        nxt, voltage, reward, g = step(self.params, self.table, s, current)
        if self.params.noise_std > 0:
            noise = self.params.noise_std * float(self.noise_rng.standard_normal())
            voltage += noise
            g += noise
        return (
            np.array([nxt.soc, nxt.v_rc]),
            reward,
            (g,),
            {"voltage": voltage},
        )
