"""Replications, experiments and threshold sweeps of the n-th market."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..analytics import MarketParams
from ..utility_models import UtilityModel
from . import kernel as K
from .assignment import max_weight_assignment

__all__ = [
    "Greedy",
    "PopulationThreshold",
    "UtilityThreshold",
    "BatchAndMatch",
    "Policy",
    "parse_policy",
    "SimConfig",
    "SystemState",
    "ReplicationResult",
    "ExperimentSummary",
    "replication_seed",
    "run_replication",
    "run_experiment",
    "threshold_sweep",
    "summarize",
]

# stream order inside one replication
STREAMS = ("arrival_b", "arrival_s", "abandon_b", "abandon_s", "utility_b", "utility_s", "batch")


@dataclass(frozen=True)
class Greedy:
    def describe(self) -> str:
        return "greedy"


@dataclass(frozen=True)
class PopulationThreshold:
    """Match an arrival iff the other side has at least z (and at least one) agents."""

    z: float = 0.0

    def __post_init__(self):
        if not self.z >= 0:
            raise ValueError("population threshold z must be >= 0")

    def describe(self) -> str:
        return f"population:z={self.z:g}"


@dataclass(frozen=True)
class UtilityThreshold:
    """Match an arrival iff its best utility strictly exceeds the threshold.

    ``v_s`` applies to arriving buyers (who look at sellers), ``v_b`` to
    arriving sellers.  ``math.inf`` disables matching on that side.
    """

    v_b: float
    v_s: float

    def __post_init__(self):
        if not (self.v_b >= 0 and self.v_s >= 0):
            raise ValueError("utility thresholds must be >= 0")

    def describe(self) -> str:
        if self.v_b == self.v_s:
            return f"utility:v={self.v_b:g}"
        return f"utility:vb={self.v_b:g},vs={self.v_s:g}"


@dataclass(frozen=True)
class BatchAndMatch:
    delta: float

    def __post_init__(self):
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise ValueError("batch window delta must be positive and finite")

    def describe(self) -> str:
        return f"batch:delta={self.delta:g}"


Policy = Greedy | PopulationThreshold | UtilityThreshold | BatchAndMatch


def parse_policy(text: str) -> Policy:
    """Parse ``greedy``, ``population:z=148``, ``utility:v=42`` or
    ``utility:vb=52.7,vs=52.3``, ``batch:delta=0.75``."""
    name, _, args = text.strip().partition(":")
    kv = {}
    for item in filter(None, (s.strip() for s in args.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            raise ValueError(f"bad policy parameter {item!r}")
        kv[key.strip()] = float(val)
    name = name.strip().lower()
    allowed = {"greedy": set(), "population": {"z"}, "utility": {"v", "vb", "vs"}, "batch": {"delta"}}
    if name not in allowed:
        raise ValueError(f"unknown policy {name!r}; choose from {sorted(allowed)}")
    extra = set(kv) - allowed[name]
    if extra:
        raise ValueError(f"unknown parameters {sorted(extra)} for policy {name}")
    if name == "greedy":
        return Greedy()
    if name == "population":
        return PopulationThreshold(kv.get("z", 0.0))
    if name == "batch":
        if "delta" not in kv:
            raise ValueError("batch policy needs delta")
        return BatchAndMatch(kv["delta"])
    if "v" in kv:
        if "vb" in kv or "vs" in kv:
            raise ValueError("give either v or vb/vs")
        return UtilityThreshold(kv["v"], kv["v"])
    if not {"vb", "vs"} <= set(kv):
        raise ValueError("utility policy needs v, or both vb and vs")
    return UtilityThreshold(kv["vb"], kv["vs"])


@dataclass(frozen=True)
class SimConfig:
    model: UtilityModel
    params: MarketParams
    policy: Policy
    horizon: float = 1500.0
    warmup: float = 150.0
    initial_buyers: int | None = None  # default n
    initial_sellers: int | None = None
    replications: int = 100
    base_seed: int = 0
    probe_level: float = math.inf  # buyer level whose time fraction is reported

    def __post_init__(self):
        if not (0 <= self.warmup < self.horizon and math.isfinite(self.horizon)):
            raise ValueError("need 0 <= warmup < horizon < inf")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not 0 <= self.base_seed < 2 ** 64:
            raise ValueError("base_seed must be an unsigned 64-bit integer")
        for name in ("initial_buyers", "initial_sellers"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be >= 0")
        if isinstance(self.policy, BatchAndMatch) and not self.model.iid:
            raise ValueError("batch-and-match needs an i.i.d. utility family")

    @property
    def b0(self) -> int:
        return self.params.n if self.initial_buyers is None else int(self.initial_buyers)

    @property
    def s0(self) -> int:
        return self.params.n if self.initial_sellers is None else int(self.initial_sellers)


@dataclass
class SystemState:
    buyers: int
    sellers: int
    clock: float
    cum_utility: float
    matches: int
    abandon_b: int
    abandon_s: int
    arrivals_b: int
    arrivals_s: int


@dataclass
class ReplicationResult:
    rep_index: int
    seed: int
    utility_rate: float
    abandon_frac_b: float
    abandon_frac_s: float
    matches: int  # after warmup
    mean_B: float
    mean_S: float
    state: SystemState  # whole-run counters, for conservation checks
    probe_fraction: float = math.nan
    batch_cycles: int = 0
    mean_batch_matches: float = math.nan

    CSV_FIELDS = ("rep_index", "seed", "utility_rate", "abandon_frac_b", "abandon_frac_s",
                  "matches", "mean_B", "mean_S")

    def csv_row(self) -> list[str]:
        return [str(self.rep_index), str(self.seed), repr(float(self.utility_rate)),
                repr(float(self.abandon_frac_b)), repr(float(self.abandon_frac_s)),
                str(self.matches), repr(float(self.mean_B)), repr(float(self.mean_S))]


@dataclass
class ExperimentSummary:
    mean_rate: float
    ci_low: float
    ci_high: float
    abandon_frac_b: float
    abandon_frac_s: float
    mean_matches_per_unit_time: float
    per_replication: list[ReplicationResult] = field(repr=False, default_factory=list)
    ci_degenerate: bool = False
    sd: float = math.nan  # spread of the replication rates

    @property
    def spread_band(self) -> tuple[float, float]:
        """mean +- 1.96 sd: where about 95% of single replications fall."""
        return self.mean_rate - 1.96 * self.sd, self.mean_rate + 1.96 * self.sd

    @property
    def half_width(self) -> float:
        return 0.5 * (self.ci_high - self.ci_low)

    @property
    def replications(self) -> int:
        return len(self.per_replication)


def replication_seed(base_seed: int, rep_index: int, point: int | None = None) -> int:
    """64-bit seed of replication ``rep_index``.

    Derived as SeedSequence(base_seed, spawn_key=(rep_index,)); a sweep run
    without common random numbers uses spawn_key=(point, rep_index) instead.
    """
    key = (rep_index,) if point is None else (point, rep_index)
    ss = np.random.SeedSequence(base_seed, spawn_key=key)
    return int(ss.generate_state(1, np.uint64)[0])


def _streams(seed: int) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.PCG64(c))
            for c in np.random.SeedSequence(seed).spawn(len(STREAMS))]


def _policy_args(policy: Policy) -> tuple[int, float, float, float]:
    if isinstance(policy, Greedy):
        return K.POP, 0.0, math.inf, math.inf
    if isinstance(policy, PopulationThreshold):
        return K.POP, float(policy.z), math.inf, math.inf
    if isinstance(policy, UtilityThreshold):
        return K.UTIL, 0.0, float(policy.v_b), float(policy.v_s)
    return K.BATCH, 0.0, math.inf, math.inf


def run_replication(config: SimConfig, seed: int, rep_index: int = 0) -> ReplicationResult:
    """Simulate one path of the n-th system and collect post-warmup statistics."""
    p = config.params
    n = p.n
    g = _streams(seed)
    arr_b, arr_s = n * p.lambda_b, n * p.lambda_s
    fs = np.zeros(K.N_FSTATE)
    ist = np.zeros(K.N_ISTATE, dtype=np.int64)
    ist[K.I_B], ist[K.I_S] = config.b0, config.s0
    fs[K.F_NAB] = g[0].standard_exponential() / arr_b if arr_b > 0 else math.inf
    fs[K.F_NAS] = g[1].standard_exponential() / arr_s if arr_s > 0 else math.inf
    fs[K.F_PDB] = g[2].standard_exponential()
    fs[K.F_PDS] = g[3].standard_exponential()
    code, z, v_b, v_s = _policy_args(config.policy)
    kind = config.model.kind
    p0, p1, p2 = config.model.kernel_params()
    warm, horizon = float(config.warmup), float(config.horizon)

    def run_to(t_stop):
        K.advance(fs, ist, t_stop, warm, code, z, v_b, v_s, float(config.probe_level),
                  kind, p0, p1, p2, arr_b, arr_s, p.eta_b, p.eta_s, *g[:6])

    cycles = 0
    cycle_matches = 0
    if isinstance(config.policy, BatchAndMatch):
        delta = config.policy.delta
        k = 1
        while k * delta <= horizon:
            epoch = k * delta
            run_to(epoch)
            m = int(min(ist[K.I_B], ist[K.I_S]))
            if m > 0:
                w = config.model.inverse_cdf(g[6].random((m, m)))
                _, total = max_weight_assignment(w)
                ist[K.I_B] -= m
                ist[K.I_S] -= m
                ist[K.I_MATCH] += m
            if epoch > warm:
                cycles += 1
                cycle_matches += m
                if m > 0:
                    fs[K.F_UTIL] += total
                    ist[K.I_MATCH_PW] += m
            k += 1
    run_to(horizon)

    span = horizon - warm
    frac = lambda a, b: a / b if b > 0 else 0.0
    state = SystemState(
        buyers=int(ist[K.I_B]), sellers=int(ist[K.I_S]), clock=float(fs[K.F_T]),
        cum_utility=float(fs[K.F_UTIL]), matches=int(ist[K.I_MATCH]),
        abandon_b=int(ist[K.I_ABN_B]), abandon_s=int(ist[K.I_ABN_S]),
        arrivals_b=int(ist[K.I_ARR_B]), arrivals_s=int(ist[K.I_ARR_S]))
    return ReplicationResult(
        rep_index=rep_index,
        seed=int(seed),
        utility_rate=float(fs[K.F_UTIL]) / span,
        abandon_frac_b=frac(int(ist[K.I_ABN_B_PW]), int(ist[K.I_ARR_B_PW])),
        abandon_frac_s=frac(int(ist[K.I_ABN_S_PW]), int(ist[K.I_ARR_S_PW])),
        matches=int(ist[K.I_MATCH_PW]),
        mean_B=float(fs[K.F_AREA_B]) / span,
        mean_S=float(fs[K.F_AREA_S]) / span,
        state=state,
        probe_fraction=float(fs[K.F_PROBE]) / span,
        batch_cycles=cycles,
        mean_batch_matches=cycle_matches / cycles if cycles else math.nan,
    )


def summarize(results: list[ReplicationResult], span: float) -> ExperimentSummary:
    """Mean and 95% normal-approximation CI over replications."""
    rates = np.array([r.utility_rate for r in results])
    mean = float(rates.mean())
    if len(rates) > 1:
        sd = float(rates.std(ddof=1))
        half = 1.959963984540054 * sd / math.sqrt(len(rates))
        degenerate = False
    else:
        sd = math.nan
        half = 0.0
        degenerate = True
    return ExperimentSummary(
        mean_rate=mean,
        ci_low=mean - half,
        ci_high=mean + half,
        abandon_frac_b=float(np.mean([r.abandon_frac_b for r in results])),
        abandon_frac_s=float(np.mean([r.abandon_frac_s for r in results])),
        mean_matches_per_unit_time=float(np.mean([r.matches for r in results])) / span,
        per_replication=list(results),
        ci_degenerate=degenerate,
        sd=sd,
    )


def _run_all(config: SimConfig, seeds: list[int], threads: int) -> list[ReplicationResult]:
    jobs = list(enumerate(seeds))
    if threads <= 1 or len(jobs) == 1:
        return [run_replication(config, s, i) for i, s in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda job: run_replication(config, job[1], job[0]), jobs))


def run_experiment(config: SimConfig, threads: int = 1) -> ExperimentSummary:
    """Run ``config.replications`` independent replications and aggregate them."""
    seeds = [replication_seed(config.base_seed, i) for i in range(config.replications)]
    return summarize(_run_all(config, seeds, threads), config.horizon - config.warmup)


def _with_value(policy: Policy, value: float, target: str | None) -> Policy:
    if isinstance(policy, (Greedy, PopulationThreshold)):
        return PopulationThreshold(value)
    if isinstance(policy, UtilityThreshold):
        if target == "v_b":
            return replace(policy, v_b=value)
        if target == "v_s":
            return replace(policy, v_s=value)
        return UtilityThreshold(value, value)
    return BatchAndMatch(value)


def threshold_sweep(config: SimConfig, grid, common_random_numbers: bool = True,
                    target: str | None = None, threads: int = 1) -> list[tuple[float, ExperimentSummary]]:
    """Evaluate the policy of ``config`` at each grid value.

    The grid value replaces z, Delta or both utility thresholds; ``target``
    ("v_b" or "v_s") varies one utility threshold only.  With common random
    numbers every grid point reuses the same replication seeds.
    """
    grid = [float(x) for x in grid]
    if not grid:
        raise ValueError("threshold grid is empty")
    out = []
    for j, value in enumerate(grid):
        cfg = replace(config, policy=_with_value(config.policy, value, target))
        point = None if common_random_numbers else j
        seeds = [replication_seed(config.base_seed, i, point) for i in range(config.replications)]
        out.append((value, summarize(_run_all(cfg, seeds, threads), config.horizon - config.warmup)))
    return out
