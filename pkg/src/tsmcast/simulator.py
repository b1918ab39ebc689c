"""Monte Carlo realization of the cache-enabled multicast network.

Each trial samples BSs and users in discs around a typical user at the
origin, assigns tiers and cached combinations, draws one T-slot window of
requests, routes every request to its serving BS and decodes the typical
request at the SINR of its serving BS's active slot.

Trials are independent. Trial ``i`` draws from its own generator seeded by
``SeedSequence(seed, spawn_key=(i,))``, so estimates do not depend on how
trials are split across threads.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .model import CacheDesign, ModelBundle, NetworkConfig, Popularity, SchemeConfig

PROPOSED = "proposed"
BASELINE_TEMPORAL = "baseline-temporal"
BASELINE_CONTINUOUS = "baseline-continuous"
VARIANTS = (PROPOSED, BASELINE_TEMPORAL, BASELINE_CONTINUOUS)

RADIUS_SCALE = 5.0
Z95 = 1.959963984540054


def default_radius(net: NetworkConfig, design: CacheDesign) -> float:
    """User-region radius: the least cached file's serving BS lies beyond
    half of it with probability exp(-6.25)."""
    return RADIUS_SCALE / math.sqrt(math.pi * net.lambda_b * float(design.hit.min()))


@dataclass(frozen=True)
class SimulationSettings:
    trials: int = 20_000
    seed: int = 0
    radius: float | None = None  # user/association region; None = default_radius
    interference_radius_factor: float = 5.0  # BS region radius = factor * radius
    variant: str = PROPOSED
    threads: int = 1
    loaded_interferers_only: bool = False
    baseline_backhaul: bool = False  # temporal baseline also fetches uncached files

    def __post_init__(self):
        from .model import ValidationError

        bad = []
        if self.trials < 1:
            bad.append(f"trials >= 1 (got {self.trials})")
        if self.variant not in VARIANTS:
            bad.append(f"variant one of {VARIANTS} (got {self.variant!r})")
        if self.radius is not None and not self.radius >= 0:
            bad.append(f"radius >= 0 (got {self.radius})")
        if not self.interference_radius_factor >= 1:
            bad.append("interference_radius_factor >= 1")
        if self.seed < 0:
            bad.append("seed >= 0")
        if bad:
            raise ValidationError(bad)


@dataclass(eq=False)
class ScenarioSnapshot:
    radius: float  # BS region
    user_radius: float
    bs_xy: np.ndarray  # (B, 2)
    bs_tier: np.ndarray  # (B,), values in 1..T
    bs_combo: np.ndarray  # (B,), combination indices
    user_xy: np.ndarray  # (U, 2)
    requests: np.ndarray  # (U, T), 1-based file labels
    membership: np.ndarray = field(repr=False)  # (I, N) combination -> file

    @property
    def n_bs(self) -> int:
        return len(self.bs_tier)

    def stores(self, n: int) -> np.ndarray:
        """Mask of BSs whose combination holds file n."""
        return self.membership[self.bs_combo, n - 1]

    def files_at(self, b: int) -> list[int]:
        return [int(m) + 1 for m in np.flatnonzero(self.membership[self.bs_combo[b]])]

    def to_json(self) -> str:
        return json.dumps(
            {
                "radius": self.radius,
                "user_radius": self.user_radius,
                "bs": [
                    {"x": float(x), "y": float(y), "tier": int(t), "combination": int(c)}
                    for (x, y), t, c in zip(self.bs_xy, self.bs_tier, self.bs_combo)
                ],
                "users": [[float(x), float(y)] for x, y in self.user_xy],
                "requests": self.requests.tolist(),
            }
        )


def _uniform_disc(rng: np.random.Generator, count: int, radius: float) -> np.ndarray:
    r = radius * np.sqrt(rng.random(count))
    phi = 2 * np.pi * rng.random(count)
    return np.column_stack((r * np.cos(phi), r * np.sin(phi)))


def sample_scenario(
    net: NetworkConfig,
    pop: Popularity,
    design: CacheDesign,
    scheme: SchemeConfig,
    radius: float,
    rng: np.random.Generator,
    user_radius: float | None = None,
    with_users: bool = True,
) -> ScenarioSnapshot:
    """BSs as a PPP in the disc of ``radius``; users as a PPP in the disc of
    ``user_radius`` (defaults to ``radius``) each with T i.i.d. requests."""
    user_radius = radius if user_radius is None else user_radius
    n_bs = rng.poisson(net.lambda_b * math.pi * radius**2)
    bs_xy = _uniform_disc(rng, n_bs, radius)
    bs_tier = rng.integers(1, scheme.period_t + 1, size=n_bs)
    bs_combo = rng.choice(len(design.p), size=n_bs, p=design.p)
    if with_users:
        n_users = rng.poisson(net.lambda_u * math.pi * user_radius**2)
        user_xy = _uniform_disc(rng, n_users, user_radius)
        requests = rng.choice(pop.n_files, size=(n_users, scheme.period_t), p=pop.a) + 1
    else:
        user_xy = np.empty((0, 2))
        requests = np.empty((0, scheme.period_t), dtype=int)
    return ScenarioSnapshot(
        radius, user_radius, bs_xy, bs_tier, bs_combo, user_xy, requests, design.combos.membership
    )


def serving_bs(snapshot: ScenarioSnapshot, position, n: int) -> int | None:
    """Nearest BS storing file n, or None if no BS in the snapshot stores it."""
    candidates = np.flatnonzero(snapshot.stores(n))
    if candidates.size == 0:
        return None
    d2 = np.sum((snapshot.bs_xy[candidates] - np.asarray(position)) ** 2, axis=1)
    return int(candidates[np.argmin(d2)])


def nearest_bs(snapshot: ScenarioSnapshot, position) -> int | None:
    if snapshot.n_bs == 0:
        return None
    d2 = np.sum((snapshot.bs_xy - np.asarray(position)) ** 2, axis=1)
    return int(np.argmin(d2))


def serving_slot(t0: int, tau0: int, t_period: int) -> int:
    """First slot >= t0 in which tier tau0 is on (tier T is on at multiples of T)."""
    return t_period * math.ceil((t0 - tau0) / t_period) + tau0


CELL_PREFILTER = 12


def _in_cell(points: np.ndarray, sites: np.ndarray, b: int) -> np.ndarray:
    """Mask of ``points`` whose nearest site is ``sites[b]`` (lowest index on ties).

    Half-planes against the closest few sites give a cheap superset of the
    cell; survivors are checked against every site.
    """
    if points.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    rel_sites = sites - sites[b]
    d2_sites = np.einsum("ij,ij->i", rel_sites, rel_sites)
    d2_sites[b] = np.inf
    near = np.argpartition(d2_sites, min(CELL_PREFILTER, len(sites) - 1))[:CELL_PREFILTER]
    near = near[np.isfinite(d2_sites[near])]
    rel_points = points - sites[b]
    inside = np.all(rel_points @ rel_sites[near].T <= 0.5 * d2_sites[near], axis=1)
    cand = np.flatnonzero(inside)
    if cand.size:
        diff = points[cand, None, :] - sites[None, :, :]
        owner = np.argmin(np.einsum("ijk,ijk->ij", diff, diff), axis=1)
        inside[cand] = owner == b
    return inside


def window_load(snapshot: ScenarioSnapshot, b: int, n: int) -> int:
    """Distinct files BS ``b`` multicasts: the typical request's file n plus
    every other cached file some user requested from ``b`` in the window."""
    load = 1
    if snapshot.user_xy.shape[0] == 0:
        return load
    for m in snapshot.files_at(b):
        if m == n:
            continue
        asking = np.any(snapshot.requests == m, axis=1)
        if not asking.any():
            continue
        holders = np.flatnonzero(snapshot.stores(m))
        local = int(np.searchsorted(holders, b))
        if _in_cell(snapshot.user_xy[asking], snapshot.bs_xy[holders], local).any():
            load += 1
    return load


def _window_load_nearest(snapshot: ScenarioSnapshot, b: int, n: int, cached_only: bool) -> int:
    # Cache-unaware association: users attach to their geographically nearest
    # BS. Uncached files are fetched over the backhaul and multicast too,
    # unless ``cached_only``.
    if snapshot.user_xy.shape[0] == 0:
        return 1
    attached = snapshot.requests[_in_cell(snapshot.user_xy, snapshot.bs_xy, b)]
    asked = set(np.unique(attached).tolist()) | {n}
    if cached_only:
        asked &= set(snapshot.files_at(b))
    return len(asked)


def _loaded_bs(snapshot: ScenarioSnapshot) -> np.ndarray:
    """BSs that received at least one request in the window. BSs outside the
    user region are kept as loaded."""
    loaded = np.linalg.norm(snapshot.bs_xy, axis=1) > snapshot.user_radius
    if snapshot.user_xy.shape[0] == 0:
        return loaded
    for m in np.unique(snapshot.requests):
        holders = np.flatnonzero(snapshot.stores(int(m)))
        if holders.size == 0:
            continue
        asking = np.any(snapshot.requests == m, axis=1)
        _, idx = cKDTree(snapshot.bs_xy[holders]).query(snapshot.user_xy[asking])
        loaded[holders[idx]] = True
    return loaded


def sinr_sample(
    snapshot: ScenarioSnapshot,
    b: int,
    tau0: int,
    net: NetworkConfig,
    rng: np.random.Generator,
    interferers: np.ndarray | None = None,
) -> float:
    """SINR at the origin from BS ``b`` with every other tier-``tau0`` BS
    (or the subset flagged in ``interferers``) interfering."""
    active = snapshot.bs_tier == tau0
    if interferers is not None:
        active &= interferers
    active[b] = False
    gain = rng.exponential(size=1 + int(active.sum()))
    d2 = np.sum(snapshot.bs_xy[active] ** 2, axis=1)
    signal = gain[0] * np.sum(snapshot.bs_xy[b] ** 2) ** (-net.alpha / 2)
    interference = float(np.sum(gain[1:] * d2 ** (-net.alpha / 2)))
    return float(signal / (interference + 1.0 / net.snr_ratio))


def decodes(load: int, sinr: float, theta: float, bandwidth_w: float) -> bool:
    return bandwidth_w / load * math.log2(1.0 + sinr) >= theta


@dataclass(frozen=True)
class TrialOutcome:
    file: int
    distance: float  # nan when no serving BS
    tier: int  # 0 when no serving BS
    load: int  # 0 when no serving BS
    sinr: float
    success: bool
    no_serving_bs: bool = False


def trial_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def _trial_scenario(bundle: ModelBundle, rng, radius, variant, interference_radius_factor):
    net, pop, design, scheme = bundle.net, bundle.pop, bundle.design, bundle.scheme
    if variant == BASELINE_CONTINUOUS:
        scheme = SchemeConfig(1, scheme.rate_theta)
    elif variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    user_radius = default_radius(net, design) if radius is None else radius
    n = int(rng.choice(pop.n_files, p=pop.a)) + 1
    snap = sample_scenario(
        net,
        pop,
        design,
        scheme,
        user_radius * interference_radius_factor,
        rng,
        user_radius=user_radius,
        # loads are identically 1 when K = 1, except under cache-unaware association
        with_users=design.cache_size > 1 or variant == BASELINE_TEMPORAL,
    )
    return n, snap, scheme


def run_trial(
    bundle: ModelBundle,
    rng: np.random.Generator,
    radius: float | None = None,
    variant: str = PROPOSED,
    interference_radius_factor: float = 5.0,
    loaded_interferers_only: bool = False,
    baseline_backhaul: bool = False,
) -> TrialOutcome:
    """One typical request. Variants:

    * ``proposed``: the request goes to the nearest BS storing its file.
    * ``baseline-temporal``: every request goes to the geographically nearest
      BS, which multicasts each distinct cached file requested in its cell
      during the window; a request for a file it does not store fails. With
      ``baseline_backhaul`` uncached files are fetched over the backhaul and
      multicast as well, so misses cost bandwidth instead of failing.
    * ``baseline-continuous``: the proposed scheme with T = 1.
    """
    net = bundle.net
    n, snap, scheme = _trial_scenario(bundle, rng, radius, variant, interference_radius_factor)
    if variant == BASELINE_TEMPORAL:
        b = nearest_bs(snap, (0.0, 0.0))
        if b is not None and not baseline_backhaul and not snap.stores(n)[b]:
            return TrialOutcome(n, math.sqrt(np.sum(snap.bs_xy[b] ** 2)), int(snap.bs_tier[b]), 0, 0.0, False)
    else:
        b = serving_bs(snap, (0.0, 0.0), n)
    if b is None:
        return TrialOutcome(n, math.nan, 0, 0, 0.0, False, no_serving_bs=True)

    tau0 = int(snap.bs_tier[b])
    if variant == BASELINE_TEMPORAL:
        load = _window_load_nearest(snap, b, n, cached_only=not baseline_backhaul)
    else:
        load = window_load(snap, b, n)
    mask = _loaded_bs(snap) if loaded_interferers_only else None
    sinr = sinr_sample(snap, b, tau0, net, rng, mask)
    return TrialOutcome(
        n,
        math.sqrt(float(np.sum(snap.bs_xy[b] ** 2))),
        tau0,
        load,
        sinr,
        decodes(load, sinr, scheme.rate_theta, net.bandwidth_w),
    )


@dataclass(frozen=True, eq=False)
class TrialBatch:
    """Per-trial outcomes, indexed by trial number. ``load == 0`` marks a
    trial whose request cannot be served (no BS, or a cache miss under the
    temporal baseline)."""

    file: np.ndarray
    distance: np.ndarray
    load: np.ndarray
    sinr: np.ndarray
    no_serving: np.ndarray
    user_radius: float

    def __len__(self):
        return len(self.file)

    def success(self, theta: float, bandwidth_w: float) -> np.ndarray:
        served = self.load > 0
        k = np.where(served, self.load, 1)
        return served & (bandwidth_w / k * np.log2(1.0 + self.sinr) >= theta)


def simulate(bundle: ModelBundle, settings: SimulationSettings) -> TrialBatch:
    """Run ``settings.trials`` independent trials."""
    radius = default_radius(bundle.net, bundle.design) if settings.radius is None else settings.radius
    count = settings.trials
    file = np.zeros(count, dtype=np.int64)
    distance = np.full(count, np.nan)
    load = np.zeros(count, dtype=np.int64)
    sinr = np.zeros(count)
    no_serving = np.zeros(count, dtype=bool)

    def work(indices: range):
        for i in indices:
            out = run_trial(
                bundle,
                trial_rng(settings.seed, i),
                radius,
                settings.variant,
                settings.interference_radius_factor,
                settings.loaded_interferers_only,
                settings.baseline_backhaul,
            )
            file[i], distance[i], load[i], sinr[i] = out.file, out.distance, out.load, out.sinr
            no_serving[i] = out.no_serving_bs

    threads = max(1, int(settings.threads))
    if threads == 1:
        work(range(count))
    else:
        bounds = np.linspace(0, count, threads + 1).astype(int)
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(work, [range(lo, hi) for lo, hi in zip(bounds, bounds[1:])]))
    return TrialBatch(file, distance, load, sinr, no_serving, radius)


@dataclass(frozen=True)
class EstimateResult:
    trials: int
    q_hat: float
    q_hat_per_file: tuple[float, ...]  # nan for files never requested
    trials_per_file: tuple[int, ...]
    ci95: float
    seed: int
    variant: str
    no_serving_freq: float
    edge_freq: float  # serving BS beyond half the user radius

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "q_hat": self.q_hat,
            "q_hat_per_file": list(self.q_hat_per_file),
            "trials_per_file": list(self.trials_per_file),
            "ci95": self.ci95,
            "seed": self.seed,
            "variant": self.variant,
            "no_serving_freq": self.no_serving_freq,
            "edge_freq": self.edge_freq,
        }


def summarize(
    batch: TrialBatch, theta: float, net: NetworkConfig, n_files: int, seed: int, variant: str
) -> EstimateResult:
    ok = batch.success(theta, net.bandwidth_w)
    trials = len(batch)
    per_count = np.bincount(batch.file, minlength=n_files + 1)[1:]
    per_success = np.bincount(batch.file, weights=ok, minlength=n_files + 1)[1:]
    with np.errstate(invalid="ignore", divide="ignore"):
        per_q = per_success / per_count
    q_hat = float(ok.sum() / trials)
    edge = np.nan_to_num(batch.distance, nan=0.0) > batch.user_radius / 2
    return EstimateResult(
        trials=trials,
        q_hat=q_hat,
        q_hat_per_file=tuple(float(v) for v in per_q),
        trials_per_file=tuple(int(c) for c in per_count),
        ci95=Z95 * math.sqrt(q_hat * (1 - q_hat) / trials),
        seed=seed,
        variant=variant,
        no_serving_freq=float(batch.no_serving.mean()),
        edge_freq=float(edge.mean()),
    )


def estimate(bundle: ModelBundle, settings: SimulationSettings) -> EstimateResult:
    batch = simulate(bundle, settings)
    return summarize(
        batch, bundle.scheme.rate_theta, bundle.net, bundle.pop.n_files, settings.seed, settings.variant
    )


def dump_scenarios(bundle: ModelBundle, settings: SimulationSettings, count: int, directory) -> list:
    """Write the snapshots of trials 0..count-1 as JSON files, one per trial."""
    from pathlib import Path

    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(min(count, settings.trials)):
        n, snap, _ = _trial_scenario(
            bundle, trial_rng(settings.seed, i), settings.radius, settings.variant,
            settings.interference_radius_factor,
        )
        doc = json.loads(snap.to_json())
        doc.update(trial=i, seed=settings.seed, requested_file=n)
        path = out / f"scenario_{i:06d}.json"
        path.write_text(json.dumps(doc))
        paths.append(path)
    return paths
