"""Virtual-time simulator of chain-of-thought policy serving.

Three strategies over a per-token cost model:

* naive: regenerate the full chain plus action tokens every step;
* sync N-step: regenerate the frozen ("high") sections every N-th step,
  encode them otherwise;
* async: a second policy instance continuously regenerates the high
  sections while the serving instance encodes the latest completed chain
  and generates the remaining ("low") sections plus actions each step.

Intervention freezes overlay any strategy: while a freeze window is
active the whole chain is encoded and only action tokens are generated.
Everything runs on a virtual clock; traces are exact and deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import InfeasibleTargets, InvalidConfig

ACTION_TOKENS = 7


@dataclass(frozen=True)
class CostModel:
    """Per-token costs; encoding must be cheaper than generating."""

    gen_cost: float
    enc_cost: float = 0.0
    overhead: float = 0.0

    def validate(self) -> None:
        if not (self.gen_cost > self.enc_cost >= 0.0):
            raise InvalidConfig(
                f"need gen_cost > enc_cost >= 0, got {self.gen_cost} / {self.enc_cost}"
            )
        if self.overhead < 0.0:
            raise InvalidConfig("overhead must be >= 0")


@dataclass(frozen=True)
class ChainProfile:
    """Token split of a chain under a freeze strategy."""

    high_tokens: int
    low_tokens: int
    action_tokens: int = ACTION_TOKENS

    def validate(self) -> None:
        if min(self.high_tokens, self.low_tokens, self.action_tokens) < 0:
            raise InvalidConfig("token counts must be non-negative")

    @property
    def total(self) -> int:
        return self.high_tokens + self.low_tokens + self.action_tokens


@dataclass(frozen=True)
class Strategy:
    kind: str  # "naive" | "sync" | "async"
    n: int = 1


NAIVE = Strategy("naive")
ASYNC = Strategy("async")


def sync_freeze(n: int) -> Strategy:
    return Strategy("sync", n)


@dataclass
class StepEvent:
    index: int
    start: float
    end: float
    generated: int
    encoded: int
    refreshed: bool
    chain_age: float = 0.0


@dataclass
class RefreshEvent:
    start: float
    end: float
    generated: int


@dataclass
class ScheduleTrace:
    strategy: Strategy
    steps: list[StepEvent] = field(default_factory=list)
    refreshes: list[RefreshEvent] = field(default_factory=list)
    instances: int = 1

    @property
    def elapsed(self) -> float:
        return self.steps[-1].end if self.steps else 0.0

    @property
    def steps_per_second(self) -> float:
        return len(self.steps) / self.elapsed if self.elapsed else 0.0

    @property
    def compute_seconds(self) -> float:
        """Busy time summed over instances; async roughly doubles it."""
        busy = sum(s.end - s.start for s in self.steps)
        end = self.elapsed
        busy += sum(min(r.end, end) - r.start for r in self.refreshes if r.start < end)
        return busy

    def summary(self) -> dict:
        return {
            "strategy": self.strategy.kind + (f"({self.strategy.n})" if self.strategy.kind == "sync" else ""),
            "steps": len(self.steps),
            "elapsed": self.elapsed,
            "steps_per_second": self.steps_per_second,
            "generated_tokens": sum(s.generated for s in self.steps),
            "encoded_tokens": sum(s.encoded for s in self.steps),
            "instances": self.instances,
            "compute_seconds": self.compute_seconds,
        }


def _freeze_spans(freezes) -> list[tuple[int, int]]:
    return sorted((int(start), int(horizon)) for start, horizon in (freezes or []))


def simulate(
    strategy: Strategy,
    profile: ChainProfile,
    cost: CostModel,
    steps: int,
    freezes=None,
) -> ScheduleTrace:
    """Run one strategy for a number of control steps.

    `freezes` is an optional list of (start_step, horizon) intervention
    windows; a later freeze supersedes an active one (last writer wins).
    """
    profile.validate()
    cost.validate()
    if steps < 1:
        raise InvalidConfig(f"steps must be >= 1, got {steps}")
    if strategy.kind not in ("naive", "sync", "async"):
        raise InvalidConfig(f"unknown strategy kind {strategy.kind!r}")
    if strategy.kind == "sync" and strategy.n < 1:
        raise InvalidConfig(f"sync freeze interval must be >= 1, got {strategy.n}")

    high, low, act = profile.high_tokens, profile.low_tokens, profile.action_tokens
    spans = _freeze_spans(freezes)
    for start, horizon in spans:
        if horizon < 1:
            raise InvalidConfig(f"freeze horizon must be >= 1, got {horizon}")

    trace = ScheduleTrace(strategy=strategy, instances=2 if strategy.kind == "async" else 1)

    # async instance A regenerates high sections back to back
    refresh_time = cost.overhead + cost.gen_cost * high
    chain_ready = 0.0  # completion time of the newest chain held by the executor

    clock = 0.0
    freeze_until = -1
    for t in range(steps):
        for start, horizon in spans:
            if start == t:
                freeze_until = t + horizon  # last writer wins
        frozen = t < freeze_until

        if frozen:
            generated, encoded = act, high + low
            refreshed = False
        elif strategy.kind == "naive":
            generated, encoded = high + low + act, 0
            refreshed = True
        elif strategy.kind == "sync":
            if t % strategy.n == 0:
                generated, encoded = high + low + act, 0
                refreshed = True
            else:
                generated, encoded = low + act, high
                refreshed = False
        else:  # async executor
            if t == 0:
                generated, encoded = high + low + act, 0  # cold start
                refreshed = True
                chain_ready = 0.0
            else:
                generated, encoded = low + act, high
                refreshed = False

        duration = cost.overhead + cost.gen_cost * generated + cost.enc_cost * encoded
        age = 0.0
        if strategy.kind == "async" and not frozen and t > 0:
            completed = math.floor(clock / refresh_time) if refresh_time > 0 else 0
            if completed > 0:
                chain_ready = completed * refresh_time
            age = clock - chain_ready
        trace.steps.append(
            StepEvent(
                index=t, start=clock, end=clock + duration,
                generated=generated, encoded=encoded,
                refreshed=refreshed, chain_age=age,
            )
        )
        clock += duration

    if strategy.kind == "async" and refresh_time > 0:
        n_refresh = math.ceil(clock / refresh_time)
        trace.refreshes = [
            RefreshEvent(start=k * refresh_time, end=(k + 1) * refresh_time, generated=high)
            for k in range(n_refresh)
        ]
    return trace


def speedup(strategy: Strategy, profile: ChainProfile, cost: CostModel, steps: int = 2000) -> float:
    """Throughput of a strategy relative to naive execution."""
    base = simulate(NAIVE, profile, cost, steps).steps_per_second
    other = simulate(strategy, profile, cost, steps).steps_per_second
    return other / base


def closed_form_high_low_ratio(target_speedup: float, n: int) -> float:
    """high/low split for an N-step freeze hitting a target speed-up.

    Simplified accounting (no action tokens, free encoding, no overhead):
    solves  target * (low + high/n) = high + low.
    """
    s = float(target_speedup)
    if not 1.0 <= s < n:
        raise InfeasibleTargets(f"speed-up {s} outside [1, {n}) for {n}-step freeze")
    return (s - 1.0) / (1.0 - s / n)


@dataclass
class CalibrationResult:
    profile: ChainProfile
    cost: CostModel
    achieved: dict
    targets: dict
    max_rel_deviation: float
    exact: bool


_SYNC_KEY = "speedup_5step"
_ASYNC_KEY = "speedup_async"


def _analytic_speedups(u: float, base: float, n: int) -> tuple[float, float]:
    # base = overhead + gen * (total + action); u = high * (gen - enc)
    return base / (base - u * (n - 1) / n), base / (base - u)


def calibrate(
    targets: dict | None = None,
    total_tokens: int = 350,
    action_tokens: int = ACTION_TOKENS,
    gen_cost: float = 1.0,
    enc_ratio: float = 0.25,
    overhead: float = 0.0,
    sync_n: int = 5,
    tolerance: float = 0.01,
    verify_steps: int = 5000,
) -> CalibrationResult:
    """Find a (profile, cost) pair reproducing target speed-ups.

    Both strategies' speed-ups depend on the parameters only through
    u = high * (gen - enc), so the fit is a one-dimensional search. When
    no u satisfies every target within `tolerance`, the closest point
    (minimax relative deviation) is returned and flagged inexact; targets
    that no parameter setting can reach at all raise InfeasibleTargets.
    """
    targets = dict(targets or {_SYNC_KEY: 1.24, _ASYNC_KEY: 1.40})
    unknown = set(targets) - {_SYNC_KEY, _ASYNC_KEY}
    if unknown:
        raise InvalidConfig(f"unknown calibration targets {sorted(unknown)}")
    if not targets:
        raise InvalidConfig("at least one target required")
    for key, value in targets.items():
        if value < 1.0:
            raise InvalidConfig(f"target {key}={value} must be >= 1")
    if not 0.0 <= enc_ratio < 1.0:
        raise InvalidConfig("enc_ratio must be in [0, 1)")
    if gen_cost <= 0:
        raise InvalidConfig("gen_cost must be positive")

    base = overhead + gen_cost * (total_tokens + action_tokens)
    u_max = gen_cost * total_tokens  # high = total, enc = 0

    # per-target reachability against the analytic envelope
    s_max, a_max = _analytic_speedups(u_max, base, sync_n)
    closest_env = _closest_point(targets, base, sync_n, u_max)
    if _SYNC_KEY in targets and targets[_SYNC_KEY] > s_max * (1 + 1e-9):
        raise InfeasibleTargets(
            f"{_SYNC_KEY}={targets[_SYNC_KEY]} exceeds the achievable bound {s_max:.3f} "
            f"(total={total_tokens}, action={action_tokens})",
            closest=closest_env,
        )
    if _ASYNC_KEY in targets and targets[_ASYNC_KEY] > a_max * (1 + 1e-9):
        raise InfeasibleTargets(
            f"{_ASYNC_KEY}={targets[_ASYNC_KEY]} exceeds the achievable bound {a_max:.3f}",
            closest=closest_env,
        )

    u_best, _ = closest_env

    # realize u as (high, enc): prefer the requested enc_ratio
    enc = enc_ratio * gen_cost
    high = u_best / (gen_cost - enc) if u_best > 0 else 0.0
    if high > total_tokens:
        high = float(total_tokens)
        enc = gen_cost - u_best / high
    high_i = int(round(high))
    profile = ChainProfile(high_tokens=high_i, low_tokens=total_tokens - high_i, action_tokens=action_tokens)
    cost = CostModel(gen_cost=gen_cost, enc_cost=enc, overhead=overhead)

    achieved = {
        _SYNC_KEY: speedup(sync_freeze(sync_n), profile, cost, verify_steps),
        _ASYNC_KEY: speedup(ASYNC, profile, cost, verify_steps),
    }
    deviation = max(abs(achieved[k] / v - 1.0) for k, v in targets.items())
    return CalibrationResult(
        profile=profile,
        cost=cost,
        achieved=achieved,
        targets=targets,
        max_rel_deviation=deviation,
        exact=deviation <= tolerance,
    )


def _closest_point(targets: dict, base: float, sync_n: int, u_max: float) -> tuple[float, float]:
    """(u, deviation) minimizing the max relative deviation over targets."""

    def dev(u: float) -> float:
        s, a = _analytic_speedups(u, base, sync_n)
        worst = 0.0
        if _SYNC_KEY in targets:
            worst = max(worst, abs(s / targets[_SYNC_KEY] - 1.0))
        if _ASYNC_KEY in targets:
            worst = max(worst, abs(a / targets[_ASYNC_KEY] - 1.0))
        return worst

    grid = 4000
    best_u, best_d = 0.0, dev(0.0)
    for i in range(1, grid + 1):
        u = u_max * i / grid
        d = dev(u)
        if d < best_d:
            best_u, best_d = u, d
    # local refinement around the best grid point
    lo = max(0.0, best_u - u_max / grid)
    hi = min(u_max, best_u + u_max / grid)
    for _ in range(60):
        m1 = lo + (hi - lo) / 3
        m2 = hi - (hi - lo) / 3
        if dev(m1) <= dev(m2):
            hi = m2
        else:
            lo = m1
    u = (lo + hi) / 2
    if dev(u) < best_d:
        best_u, best_d = u, dev(u)
    return best_u, best_d
