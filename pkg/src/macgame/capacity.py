"""Polymatroid geometry of the Gaussian multiple-access rate region.

All rates and capacities are in nats. A channel with per-user received
SNRs s_1..s_m admits the rate region

    { alpha >= 0 : sum_{i in J} alpha_i <= ln(1 + sum_{i in J} s_i) for every nonempty J },

a polymatroid whose rank function C(J) = ln(1 + s(J)) is monotone and
submodular. The maximal face (total rate equal to the grand capacity,
every user at or above its interference-limited safe rate) is where the
game-theoretic structure lives, so the module also provides a residual
and a sampler for it.

Users are indexed 0..m-1 throughout.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

FEASIBILITY_TOL = 1e-9

# Exhaustive subset enumeration is the membership test; beyond this it is
# no longer a desk-scale computation.
MAX_ENUM_USERS = 20

# itertools-based ordered subset listings (for display) stay cheap up to here.
MAX_LISTING_USERS = 12


@dataclass
class ChannelModel:
    """Physical channel: everything derives from the per-user received SNRs."""

    snr: np.ndarray

    def __post_init__(self):
        self.snr = np.atleast_1d(np.asarray(self.snr, dtype=float))
        if self.snr.ndim != 1 or self.snr.size < 1:
            raise ValueError("snr must be a non-empty 1-D array")
        if not np.all(np.isfinite(self.snr)) or np.any(self.snr <= 0.0):
            raise ValueError("every snr must be positive and finite")

    @property
    def m(self) -> int:
        return int(self.snr.size)

    @property
    def symmetric(self) -> bool:
        s0 = float(self.snr[0])
        return bool(np.all(np.abs(self.snr - s0) <= 1e-12 * max(abs(s0), 1.0)))

    @classmethod
    def symmetric_model(cls, m: int, power: float, noise_var: float, gain: float = 1.0):
        """All users share the same transmit power, gain, and noise floor."""
        if m < 1:
            raise ValueError("need at least one user")
        return cls(np.full(m, power * gain / noise_var))

    @classmethod
    def from_link_budget(cls, powers, gains, noise_var: float):
        powers = np.asarray(powers, dtype=float)
        gains = np.asarray(gains, dtype=float)
        if powers.shape != gains.shape:
            raise ValueError("powers and gains must have matching length")
        return cls(powers * gains / noise_var)


def _subset_indices(m: int, subset) -> list[int]:
    idx = sorted({int(i) for i in subset})
    if not idx:
        raise ValueError("empty subset has no capacity")
    if idx[0] < 0 or idx[-1] >= m:
        raise ValueError(f"subset {idx} out of range for {m} users")
    return idx


def capacity_of(model: ChannelModel, subset) -> float:
    """Joint capacity C(J) = ln(1 + sum of SNRs in J), in nats."""
    idx = _subset_indices(model.m, subset)
    return math.log1p(float(model.snr[idx].sum()))


def safe_rate(model: ChannelModel, user: int, subset) -> float:
    """Rate of `user` when the other members of `subset` are treated as noise.

    Equals C(subset) - C(subset minus user) by the log identity.
    """
    idx = _subset_indices(model.m, subset)
    if int(user) not in idx:
        raise ValueError(f"user {user} not in subset {idx}")
    rest = float(model.snr[idx].sum()) - float(model.snr[int(user)])
    return math.log1p(float(model.snr[int(user)]) / (1.0 + rest))


def subset_sums(values: np.ndarray) -> np.ndarray:
    """Sums of `values` over every subset, indexed by bitmask.

    1-D input of length m gives a vector of length 2**m; a (B, m) batch
    gives (B, 2**m). Entry at mask k is the sum over the set bits of k.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        out = np.zeros(1)
        for v in values:
            out = np.concatenate([out, out + v])
        return out
    out = np.zeros((values.shape[0], 1))
    for j in range(values.shape[1]):
        out = np.concatenate([out, out + values[:, j:j + 1]], axis=1)
    return out


def all_subsets(m: int):
    """Nonempty subsets as 0-based tuples, ordered by (size, members)."""
    for k in range(1, m + 1):
        yield from itertools.combinations(range(m), k)


@dataclass
class CapacityRegionView:
    """Cached region geometry for one channel: rank values, safe rates, masks."""

    model: ChannelModel
    cap: np.ndarray          # C over all 2**m bitmasks (cap[0] = 0)
    safe_rates: np.ndarray   # r_{i,N} against the full user set
    single_caps: np.ndarray  # C({i}) per user

    @classmethod
    def build(cls, model: ChannelModel) -> "CapacityRegionView":
        m = model.m
        if m > MAX_ENUM_USERS:
            raise ValueError(
                f"subset enumeration supports at most {MAX_ENUM_USERS} users, got {m}")
        cap = np.log1p(subset_sums(model.snr))
        total = float(model.snr.sum())
        safe = np.log1p(model.snr / (1.0 + total - model.snr))
        single = np.log1p(model.snr)
        if model.symmetric and m >= 2:
            # Equal split of the grand capacity must sit strictly below any
            # single-user cap; concavity of ln guarantees it, so a violation
            # means the inputs are corrupt.
            if not cap[-1] / m < single.min():
                raise ValueError("capacity anomaly: C(N)/m >= C({i}) on a symmetric channel")
        return cls(model=model, cap=cap, safe_rates=safe, single_caps=single)

    @property
    def m(self) -> int:
        return self.model.m

    @property
    def total(self) -> float:
        """Grand-coalition capacity C(N)."""
        return float(self.cap[-1])

    def capacity(self, subset) -> float:
        idx = _subset_indices(self.m, subset)
        mask = sum(1 << i for i in idx)
        return float(self.cap[mask])

    def rank_table(self) -> dict:
        """C(J) for every nonempty J, keyed by member tuple, (size, lex) order."""
        if self.m > MAX_LISTING_USERS:
            raise ValueError(f"subset listing supports at most {MAX_LISTING_USERS} users")
        return {J: self.capacity(J) for J in all_subsets(self.m)}

    @property
    def constraint_matrix(self) -> np.ndarray:
        """0/1 matrix with one row per nonempty subset, (size, lex) order."""
        if self.m > MAX_LISTING_USERS:
            raise ValueError(f"subset listing supports at most {MAX_LISTING_USERS} users")
        rows = []
        for J in all_subsets(self.m):
            row = np.zeros(self.m)
            row[list(J)] = 1.0
            rows.append(row)
        return np.array(rows)


def build_view(model: ChannelModel) -> CapacityRegionView:
    return CapacityRegionView.build(model)


def as_profile(m: int, rates) -> np.ndarray:
    rates = np.atleast_1d(np.asarray(rates, dtype=float))
    if rates.shape != (m,):
        raise ValueError(f"rate profile must have length {m}, got shape {rates.shape}")
    if not np.all(np.isfinite(rates)):
        raise ValueError("rate profile must be finite")
    return rates


def is_feasible(view: CapacityRegionView, rates, tol: float = FEASIBILITY_TOL) -> bool:
    """Exhaustive membership test: every subset-sum constraint within `tol`."""
    rates = as_profile(view.m, rates)
    if rates.min() < -tol:
        return False
    sums = subset_sums(rates)
    return bool(np.all(sums <= view.cap + tol))


def feasible_rows(view: CapacityRegionView, profiles: np.ndarray,
                  tol: float = FEASIBILITY_TOL) -> np.ndarray:
    """Vectorised membership for a (B, m) batch of profiles."""
    profiles = np.asarray(profiles, dtype=float)
    ok = profiles.min(axis=1) >= -tol
    sums = subset_sums(profiles)
    return ok & np.all(sums <= view.cap + tol, axis=1)


def prefix_feasible(view: CapacityRegionView, rates, tol: float = FEASIBILITY_TOL) -> bool:
    """Symmetric-channel membership oracle: sorted prefix sums against C(k).

    Independent of the exhaustive test; sorting descending makes the size-k
    prefix the worst size-k subset, which is all that needs checking when
    every user has the same SNR.
    """
    if not view.model.symmetric:
        raise ValueError("prefix test is valid only for symmetric channels")
    rates = as_profile(view.m, rates)
    if rates.min() < -tol:
        return False
    s = float(view.model.snr[0])
    ordered = np.sort(rates)[::-1]
    prefix = np.cumsum(ordered)
    caps_k = np.log1p(s * np.arange(1, view.m + 1))
    return bool(np.all(prefix <= caps_k + tol))


def max_face_residual(view: CapacityRegionView, rates,
                      tol: float = FEASIBILITY_TOL) -> float:
    """Largest violation of membership in the maximal face; 0 means on-face.

    The face is: feasible, every rate at or above its safe rate, and total
    rate equal to C(N). Violations below `tol` count as zero.
    """
    rates = as_profile(view.m, rates)
    sums = subset_sums(rates)
    worst = max(
        float(-rates.min()),
        float((sums - view.cap).max()),
        float((view.safe_rates - rates).max()),
        abs(float(rates.sum()) - view.total),
    )
    return 0.0 if worst <= tol else worst


def sample_max_face(view: CapacityRegionView, count: int, seed: int,
                    max_draws: int = 100_000) -> np.ndarray:
    """Draw `count` profiles on the maximal face, deterministically per seed.

    Maps flat Dirichlet draws onto {alpha >= r, sum alpha = C(N)} and rejects
    the (few) candidates that break one of the remaining subset constraints.
    Not uniform over the face polytope; intended as a test-point generator.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    m = view.m
    slack = view.total - float(view.safe_rates.sum())
    if slack < -FEASIBILITY_TOL:
        raise ValueError("degenerate face: safe rates exceed total capacity")
    slack = max(slack, 0.0)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    out = np.empty((0, m))
    drawn = 0
    batch = 256
    while out.shape[0] < count:
        if drawn >= max_draws:
            raise RuntimeError(
                f"face sampling failed: {drawn} draws produced "
                f"{out.shape[0]} of {count} points (degenerate face)")
        w = rng.dirichlet(np.ones(m), size=batch)
        cand = view.safe_rates + slack * w
        cand = cand[feasible_rows(view, cand)]
        out = np.concatenate([out, cand], axis=0)
        drawn += batch
    return out[:count]


def face_vertices(view: CapacityRegionView, limit: int = 720, seed: int = 0) -> np.ndarray:
    """Greedy (permutation) vertices of the maximal face.

    Every permutation pi yields the corner that serves users in order,
    each taking its marginal capacity. All m! corners for small m, a
    seeded sample of `limit` permutations otherwise.
    """
    m = view.m
    snr = view.model.snr
    if math.factorial(m) <= limit:
        perms = itertools.permutations(range(m))
    else:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
        perms = (tuple(rng.permutation(m)) for _ in range(limit))
    verts = []
    for perm in perms:
        v = np.zeros(m)
        acc = 0.0
        prev = 0.0
        for u in perm:
            acc += float(snr[u])
            c = math.log1p(acc)
            v[u] = c - prev
            prev = c
        verts.append(v)
    return np.array(verts)
