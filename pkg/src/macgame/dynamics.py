"""Constrained evolutionary dynamics on the discretized action grid.

Three revision protocols drive the population flow, all built from the
expected payoffs F_i of the grid actions against the current state and
gated so that no mass ever flows toward an action outside the mixed
capacity region (target gating; mass on newly infeasible actions is free
to leave):

  bnn         inflow proportional to positive excess payoff over the
              population average, uniform outflow
  replicator  imitative: growth rate equals payoff minus average, so the
              support never grows
  smith       pairwise comparisons, switch rate max(F_j - F_i, 0)^theta

Velocities sum to zero by construction; explicit Euler with clip-and-
renormalize keeps states on the simplex and reports the per-step drift.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .capacity import CapacityRegionView, feasible_rows
from .game import Utility
from .evolution import (
    EXACT_ENUM_LIMIT,
    INDICATOR_SLACK,
    PopulationState,
    _opponent_index_grids,
    expected_payoff_mc,
    mean_rate,
    region_mass,
)

TABLE_CELL_LIMIT = 4_000_000


@dataclass(frozen=True)
class Protocol:
    """Revision protocol: kind, Smith exponent theta, growth parameter K."""

    kind: str
    theta: float = 1.0
    K: float = 1.0

    def __post_init__(self):
        if self.kind not in ("bnn", "replicator", "smith"):
            raise ValueError(f"unknown protocol '{self.kind}'")
        if self.kind == "smith" and self.theta < 1.0:
            raise ValueError("theta must be >= 1")
        if self.K <= 0.0:
            raise ValueError("growth parameter K must be positive")

    @classmethod
    def bnn(cls, K: float = 1.0) -> "Protocol":
        return cls("bnn", K=K)

    @classmethod
    def replicator(cls, K: float = 1.0) -> "Protocol":
        return cls("replicator", K=K)

    @classmethod
    def smith(cls, theta: float = 1.0, K: float = 1.0) -> "Protocol":
        return cls("smith", theta=theta, K=K)


class PayoffTable:
    """Precomputed feasibility masks for fast exact F evaluation on one grid.

    The feasibility of (grid[i], opponent combo) never changes, so a
    simulation only needs one boolean table; each step reduces it against
    the current product masses.
    """

    def __init__(self, view: CapacityRegionView, g: Utility, grid: np.ndarray,
                 cell_limit: int = TABLE_CELL_LIMIT):
        self.view = view
        self.grid = np.asarray(grid, dtype=float)
        n = self.grid.size
        m = view.m
        self.m = m
        combos = n ** (m - 1)
        if n * combos > cell_limit:
            raise ValueError(
                f"payoff table would need {n * combos} cells (> {cell_limit})")
        self.gvals = np.asarray(g(self.grid), dtype=float)
        if m == 1:
            self._opp_idx = ()
            mask = feasible_rows(view, self.grid[:, None])
            self.mask = mask.astype(float)[:, None]
            return
        flat = np.arange(combos)
        self._opp_idx = _opponent_index_grids(n, m - 1, flat)
        mask = np.empty((n, combos), dtype=bool)
        opp_cols = [self.grid[ix] for ix in self._opp_idx]
        for i, a in enumerate(self.grid):
            profiles = np.column_stack([np.full(combos, a)] + opp_cols)
            mask[i] = feasible_rows(view, profiles)
        self.mask = mask.astype(float)

    def payoffs(self, masses: np.ndarray) -> np.ndarray:
        """F over the whole grid for the state with these masses."""
        if self.m == 1:
            probs = np.ones(1)
        else:
            probs = np.ones(self.mask.shape[1])
            for ix in self._opp_idx:
                probs *= masses[ix]
        nu = self.mask @ probs
        mean = float(np.dot(self.grid, masses))
        bound = self.view.total - (self.m - 1) * mean
        gate = self.grid <= bound + INDICATOR_SLACK
        return self.gvals * nu * gate


def _payoff_vector(view, g, state, table, payoff_method, samples, seed_seq):
    if table is not None:
        return table.payoffs(state.masses)
    if payoff_method == "exact":
        if state.n ** (view.m - 1) > EXACT_ENUM_LIMIT:
            raise ValueError("grid too large for exact payoffs; use montecarlo")
        nu = np.array([region_mass(view, float(a), state) for a in state.grid])
        bound = view.total - (view.m - 1) * mean_rate(state)
        gate = state.grid <= bound + INDICATOR_SLACK
        return np.asarray(g(state.grid), dtype=float) * nu * gate
    if payoff_method == "montecarlo":
        if seed_seq is None:
            seed_seq = np.random.SeedSequence(0)
        children = seed_seq.spawn(state.n)
        F = np.empty(state.n)
        for i, a in enumerate(state.grid):
            val, _ = expected_payoff_mc(view, g, float(a), state, samples=samples,
                                        seed=children[i])
            F[i] = val
        return F
    raise ValueError(f"unknown payoff method '{payoff_method}'")


def _flow(view: CapacityRegionView, protocol: Protocol, state: PopulationState,
          F: np.ndarray) -> np.ndarray:
    """Protocol velocity given the payoff vector F at this state."""
    lam = state.masses
    w = state.base_weights
    K = protocol.K
    Fbar = float(np.dot(lam, F))
    gate = state.grid <= view.total - (view.m - 1) * mean_rate(state) + INDICATOR_SLACK
    if protocol.kind == "bnn":
        excess = np.maximum(F - Fbar, 0.0)
        excess[~gate] = 0.0
        return K * (w * excess - lam * float(np.dot(w, excess)))
    if protocol.kind == "replicator":
        return K * lam * (F - Fbar)
    # smith: R[i, j] is the switch rate from j to i, gated on the target i
    R = np.maximum(F[:, None] - F[None, :], 0.0) ** protocol.theta
    R[~gate, :] = 0.0
    return K * (w * (R @ lam) - lam * (w @ R))


def velocity(view: CapacityRegionView, g: Utility, protocol: Protocol,
             state: PopulationState, table: PayoffTable = None,
             payoff_method: str = "exact", samples: int = 100_000,
             seed_seq=None) -> np.ndarray:
    """Population flow of the given protocol at this state; sums to zero."""
    F = _payoff_vector(view, g, state, table, payoff_method, samples, seed_seq)
    return _flow(view, protocol, state, F)


def euler_update(masses: np.ndarray, v: np.ndarray, dt: float) -> tuple:
    """One explicit Euler step on the simplex; returns (new masses, drift).

    Drift is how far the clipped update strays from total mass 1 before
    renormalization.
    """
    raw = masses + dt * v
    if not np.all(np.isfinite(raw)):
        raise ValueError("step size too large: masses diverged")
    clipped = np.maximum(raw, 0.0)
    s = float(clipped.sum())
    if s <= 0.0:
        raise ValueError("step size too large: all mass clipped away")
    return clipped / s, abs(s - 1.0)


def step(view: CapacityRegionView, g: Utility, protocol: Protocol,
         state: PopulationState, dt: float, table: PayoffTable = None) -> PopulationState:
    """Advance the state by one Euler step of the protocol flow."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    v = velocity(view, g, protocol, state, table=table)
    masses, _ = euler_update(state.masses, v, dt)
    return state.replace_masses(masses)


def rest_point_residual(view: CapacityRegionView, g: Utility, protocol: Protocol,
                        state: PopulationState, table: PayoffTable = None) -> float:
    """L1 norm of the protocol velocity; zero exactly at rest points."""
    return float(np.abs(velocity(view, g, protocol, state, table=table)).sum())


@dataclass
class DynamicsRun:
    """Everything one simulation needs, with explicit-Euler defaults."""

    protocol: Protocol
    state0: PopulationState
    dt: float = 0.01
    steps: int = 20_000
    record_every: int = 100
    seed: int = 0
    payoff_method: str = "exact"
    samples: int = 100_000

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.steps < 0:
            raise ValueError("steps must be non-negative")
        if self.record_every < 1:
            raise ValueError("record_every must be at least 1")
        if self.payoff_method not in ("exact", "montecarlo"):
            raise ValueError(f"unknown payoff method '{self.payoff_method}'")


@dataclass
class Trace:
    """Recorded trajectory: one row per sampled tick, plus the final state."""

    t: np.ndarray
    mean_rate: np.ndarray
    avg_payoff: np.ndarray
    velocity_l1: np.ndarray
    mass_drift: np.ndarray
    final_state: PopulationState

    @property
    def max_drift(self) -> float:
        return float(self.mass_drift.max())


def simulate(view: CapacityRegionView, g: Utility, run: DynamicsRun) -> Trace:
    """Iterate the Euler steps, recording every `record_every` ticks.

    Exact payoffs reuse one precomputed feasibility table; Monte Carlo
    payoffs get a fresh deterministic substream per step and grid point,
    so traces are reproducible for a given seed either way.
    """
    state = run.state0
    table = None
    if run.payoff_method == "exact":
        table = PayoffTable(view, g, state.grid)

    rows = {k: [] for k in ("t", "mean_rate", "avg_payoff", "velocity_l1", "mass_drift")}

    def payoffs_at(k: int) -> np.ndarray:
        seq = None
        if run.payoff_method == "montecarlo":
            seq = np.random.SeedSequence(run.seed, spawn_key=(k,))
        return _payoff_vector(view, g, state, table, run.payoff_method,
                              run.samples, seq)

    def record(k: int, F: np.ndarray, v: np.ndarray, drift: float):
        rows["t"].append(k * run.dt)
        rows["mean_rate"].append(mean_rate(state))
        rows["avg_payoff"].append(float(np.dot(state.masses, F)))
        rows["velocity_l1"].append(float(np.abs(v).sum()))
        rows["mass_drift"].append(drift)

    F = payoffs_at(0)
    v = _flow(view, run.protocol, state, F)
    drift = 0.0
    record(0, F, v, drift)
    for k in range(1, run.steps + 1):
        masses, drift = euler_update(state.masses, v, run.dt)
        state = state.replace_masses(masses)
        F = payoffs_at(k)
        v = _flow(view, run.protocol, state, F)
        if k % run.record_every == 0 or k == run.steps:
            record(k, F, v, drift)
    return Trace(
        t=np.array(rows["t"]),
        mean_rate=np.array(rows["mean_rate"]),
        avg_payoff=np.array(rows["avg_payoff"]),
        velocity_l1=np.array(rows["velocity_l1"]),
        mass_drift=np.array(rows["mass_drift"]),
        final_state=state,
    )
