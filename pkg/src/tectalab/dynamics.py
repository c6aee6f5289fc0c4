"""Numerical kernels: Lorenz generator (RK4), leaky integrate-and-fire
neurons and exponential synapses (exponential Euler), and the retinotectal
propagation feasibility check.

The LIF and synapse updates are exact for piecewise-constant input over a
step, which is what makes the closed-form subthreshold checks in the test
suite hold to machine precision.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .circuit import Circuit, GroupConfig, resolve_group
from .errors import ConfigError, GroupError, NumericError

# Canonical chaotic regime; the abstraction is dimensionless.
LORENZ_SIGMA = 10.0
LORENZ_RHO = 28.0
LORENZ_BETA = 8.0 / 3.0


@dataclass(frozen=True)
class LorenzParams:
    sigma: float = LORENZ_SIGMA
    rho: float = LORENZ_RHO
    beta: float = LORENZ_BETA
    dt: float = 0.01
    steps: int = 1000
    init: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.steps < 1:
            raise ConfigError(f"steps must be >= 1, got {self.steps}")
        for p in ("sigma", "rho", "beta"):
            if getattr(self, p) <= 0.0:
                raise ConfigError(f"{p} must be positive, got {getattr(self, p)}")


@dataclass(frozen=True)
class LIFParams:
    tau_m: float = 20.0
    v_rest: float = 0.0
    r_m: float = 1.0
    v_th: float = 1.0
    v_reset: float = 0.0
    dt: float = 1.0

    def __post_init__(self):
        if self.tau_m <= 0.0:
            raise ConfigError(f"tau_m must be positive, got {self.tau_m}")
        if self.v_th <= self.v_rest:
            raise ConfigError(f"v_th ({self.v_th}) must exceed v_rest ({self.v_rest})")
        if self.dt <= 0.0:
            raise ConfigError(f"dt must be positive, got {self.dt}")


@dataclass(frozen=True)
class SynapseParams:
    tau_s: float = 5.0
    dt: float = 1.0

    def __post_init__(self):
        if self.tau_s <= 0.0:
            raise ConfigError(f"tau_s must be positive, got {self.tau_s}")
        if self.dt <= 0.0:
            raise ConfigError(f"dt must be positive, got {self.dt}")


@dataclass(frozen=True)
class NetworkState:
    """Per-node membrane potentials, aggregated synaptic currents, and the
    binary spike vector of the current step."""

    v: np.ndarray
    i_syn: np.ndarray
    spikes: np.ndarray

    @classmethod
    def rest(cls, n: int, lif: LIFParams) -> "NetworkState":
        return cls(
            v=np.full(n, lif.v_rest, dtype=float),
            i_syn=np.zeros(n, dtype=float),
            spikes=np.zeros(n, dtype=float),
        )


@dataclass(frozen=True)
class FeasibilityReport:
    pathway: str
    source_group: str
    target_group: str
    target_activity: float
    propagated: bool
    mode: str = "spikes"  # "spikes" counts target spikes; "current" uses peak current
    window: int = 0
    pulse_amplitude: float = 0.0
    pulse_steps: int = 0

    def to_dict(self) -> dict:
        return {
            "pathway": self.pathway,
            "source_group": self.source_group,
            "target_group": self.target_group,
            "target_activity": self.target_activity,
            "propagated": self.propagated,
            "mode": self.mode,
            "window": self.window,
            "pulse_amplitude": self.pulse_amplitude,
            "pulse_steps": self.pulse_steps,
        }


def _lorenz_rhs(state: np.ndarray, p: LorenzParams) -> np.ndarray:
    x, y, z = state
    return np.array([
        p.sigma * (y - x),
        x * (p.rho - z) - y,
        x * y - p.beta * z,
    ])


def lorenz_trajectory(p: LorenzParams) -> np.ndarray:
    """Integrate the Lorenz system with classical fixed-step RK4.

    Returns an array of shape (steps + 1, 3) whose first row is ``init``.
    """
    traj = np.empty((p.steps + 1, 3), dtype=float)
    traj[0] = p.init
    state = traj[0].copy()
    dt = p.dt
    for step in range(1, p.steps + 1):
        k1 = _lorenz_rhs(state, p)
        k2 = _lorenz_rhs(state + 0.5 * dt * k1, p)
        k3 = _lorenz_rhs(state + 0.5 * dt * k2, p)
        k4 = _lorenz_rhs(state + dt * k3, p)
        state = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(state)):
            raise NumericError("Lorenz integration produced non-finite state", where=step)
        traj[step] = state
    return traj


def lif_step(state: NetworkState, input_current: np.ndarray, p: LIFParams) -> NetworkState:
    """One exponential-Euler LIF update followed by threshold/reset.

    V relaxes toward V_rest + R_m * I with time constant tau_m; nodes at or
    above threshold emit a spike and are reset to v_reset.
    """
    i = np.asarray(input_current, dtype=float)
    if i.shape != state.v.shape:
        raise ConfigError(f"input current shape {i.shape} != state shape {state.v.shape}")
    decay = np.exp(-p.dt / p.tau_m)
    v_inf = p.v_rest + p.r_m * i
    v = v_inf + (state.v - v_inf) * decay
    spikes = (v >= p.v_th).astype(float)
    v = np.where(spikes > 0.0, p.v_reset, v)
    return NetworkState(v=v, i_syn=state.i_syn, spikes=spikes)


def synapse_step(
    i_syn: np.ndarray,
    spikes: np.ndarray,
    weights: np.ndarray,
    p: SynapseParams,
) -> np.ndarray:
    """Exponential decay plus per-target aggregation of presynaptic spikes:
    I <- I * exp(-dt/tau_s) + W @ S, with W[i, j] the weight from j to i."""
    i_syn = np.asarray(i_syn, dtype=float)
    spikes = np.asarray(spikes, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (i_syn.size, spikes.size):
        raise ConfigError(
            f"weight shape {weights.shape} incompatible with currents ({i_syn.size}) "
            f"and spikes ({spikes.size})"
        )
    return i_syn * np.exp(-p.dt / p.tau_s) + weights @ spikes


def propagation_check(
    circuit: Circuit,
    groups: GroupConfig,
    source: str,
    target: str,
    pulse_amplitude: float = 2.0,
    pulse_steps: int = 20,
    window: int = 200,
    lif: LIFParams = LIFParams(),
    syn: SynapseParams = SynapseParams(),
    pathway: str | None = None,
    count_spikes: bool = True,
) -> FeasibilityReport:
    """Drive the source group with a constant current pulse from rest and
    report whether activity reaches the target group within the window.

    Propagation means at least one target spike (default), or a peak target
    synaptic current above 1e-6 when spike counting is disabled.
    """
    groups.validate_against(circuit)
    if groups.port(source) != "input":
        raise GroupError(f"source group {source!r} is not flagged as an input port")
    src_nodes = resolve_group(groups, source)
    tgt_nodes = resolve_group(groups, target)
    src_idx = circuit.indices(src_nodes)
    tgt_idx = circuit.indices(tgt_nodes)

    n = circuit.n
    state = NetworkState.rest(n, lif)
    i_syn = np.zeros(n, dtype=float)
    external = np.zeros(n, dtype=float)

    target_spikes = 0.0
    peak_current = 0.0
    for step in range(window):
        external[:] = 0.0
        if step < pulse_steps:
            external[src_idx] = pulse_amplitude
        i_syn = synapse_step(i_syn, state.spikes, circuit.matrix, syn)
        state = lif_step(
            NetworkState(v=state.v, i_syn=i_syn, spikes=state.spikes),
            i_syn + external,
            lif,
        )
        target_spikes += float(state.spikes[tgt_idx].sum())
        peak_current = max(peak_current, float(np.max(np.abs(i_syn[tgt_idx]))))

    if count_spikes:
        activity = target_spikes
        propagated = activity > 0.0
        mode = "spikes"
    else:
        activity = peak_current
        propagated = activity > 1e-6
        mode = "current"
    return FeasibilityReport(
        pathway=pathway if pathway is not None else f"{source}->{target}",
        source_group=source,
        target_group=target,
        target_activity=activity,
        propagated=propagated,
        mode=mode,
        window=window,
        pulse_amplitude=pulse_amplitude,
        pulse_steps=pulse_steps,
    )


def activity_trace(
    circuit: Circuit,
    groups: GroupConfig,
    source: str,
    pulse_amplitude: float = 2.0,
    pulse_steps: int = 20,
    window: int = 200,
    lif: LIFParams = LIFParams(),
    syn: SynapseParams = SynapseParams(),
) -> list[tuple[int, str, float, float, int]]:
    """Full (step, node, V, I, spike) trace of a pulse-driven run, for the
    simulate subcommand's CSV output."""
    groups.validate_against(circuit)
    src_idx = circuit.indices(resolve_group(groups, source))
    n = circuit.n
    state = NetworkState.rest(n, lif)
    i_syn = np.zeros(n, dtype=float)
    rows: list[tuple[int, str, float, float, int]] = []
    for step in range(window):
        external = np.zeros(n, dtype=float)
        if step < pulse_steps:
            external[src_idx] = pulse_amplitude
        i_syn = synapse_step(i_syn, state.spikes, circuit.matrix, syn)
        state = lif_step(
            NetworkState(v=state.v, i_syn=i_syn, spikes=state.spikes),
            i_syn + external,
            lif,
        )
        for node_idx, name in enumerate(circuit.node_names):
            rows.append(
                (step, name, float(state.v[node_idx]), float(i_syn[node_idx]),
                 int(state.spikes[node_idx]))
            )
    return rows
