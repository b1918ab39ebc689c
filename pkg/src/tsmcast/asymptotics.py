"""Leading terms in the large-period, dense-user and sparse-user regimes, and
empirical convergence-order probes against the general evaluator."""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import asdict, dataclass

import numpy as np

from . import analysis
from .analysis import DEFAULT_QUAD, LoadPmf, QuadratureSettings
from .model import CacheDesign, NetworkConfig, Popularity, SchemeConfig

# Errors below this are indistinguishable from quadrature noise.
NOISE_FLOOR = 1e-11


def load_pmf_limit_t(n: int, pop: Popularity, design: CacheDesign, net: NetworkConfig) -> LoadPmf:
    """Load p.m.f. as T grows without bound: every other file in the
    serving combination is requested by any user in its cell."""
    return analysis.load_pmf(n, pop, design, net, math.inf)


def sinr_ccdf_no_interference(
    eta: float, t_n: float, net: NetworkConfig, quad: QuadratureSettings = DEFAULT_QUAD, full_output=False
):
    """SINR c.c.d.f. with the interference terms removed (their exponents
    shrink like 1/T)."""
    return analysis.sinr_ccdf(eta, t_n, net, math.inf, quad, full_output)


def q_limit_large_t(pop, design, net, theta: float, quad=DEFAULT_QUAD) -> float:
    total = 0.0
    for n in range(1, design.n_files + 1):
        pmf = load_pmf_limit_t(n, pop, design, net)
        total += pop.a[n - 1] * analysis._q_file(pmf, design.hit[n - 1], net, theta, math.inf, quad)
    return total


def _pinned_load(k: int, pop, design, net, scheme: SchemeConfig, quad) -> float:
    eta = analysis.sinr_threshold(k, scheme.rate_theta, net.bandwidth_w)
    return sum(
        pop.a[n - 1] * analysis.sinr_ccdf(eta, design.hit[n - 1], net, scheme.period_t, quad)
        for n in range(1, design.n_files + 1)
    )


def q_limit_dense(pop, design, net, scheme: SchemeConfig, quad=DEFAULT_QUAD) -> float:
    """Success probability when every BS multicasts all K cached files."""
    return _pinned_load(design.cache_size, pop, design, net, scheme, quad)


def q_limit_sparse(pop, design, net, scheme: SchemeConfig, quad=DEFAULT_QUAD) -> float:
    """Success probability when the serving BS carries only the typical request."""
    return _pinned_load(1, pop, design, net, scheme, quad)


@dataclass
class ConvergenceReport:
    parameter: str
    schedule: list[float]
    values: list[float]
    limit: float
    errors: list[float]
    ratios: list[float | None]
    order: float | None  # None when indeterminate

    @property
    def indeterminate(self) -> bool:
        return self.order is None

    def to_dict(self) -> dict:
        return asdict(self)

    def rows(self) -> list[dict]:
        out = []
        for i, (x, v, e) in enumerate(zip(self.schedule, self.values, self.errors)):
            out.append(
                {
                    "parameter": self.parameter,
                    "value": x,
                    "q": v,
                    "q_limit": self.limit,
                    "error": e,
                    "ratio": self.ratios[i - 1] if i else None,
                    "order": self.order,
                }
            )
        return out


def probe_convergence(
    quantity: Callable[[float], float],
    limit: float | Callable[[], float],
    schedule: Sequence[float],
    parameter: str = "x",
    noise_floor: float = NOISE_FLOOR,
) -> ConvergenceReport:
    """Evaluate ``quantity`` along ``schedule`` and fit |q - limit| ~ C x^s.

    The fitted order is reported as a positive number for convergence
    (1 for an O(1/T) law as T grows, 1 for an O(x) law as x shrinks).
    """
    xs = [float(x) for x in schedule]
    if len(xs) < 2:
        raise ValueError("schedule needs at least two points")
    steps = np.diff(xs)
    if not (np.all(steps > 0) or np.all(steps < 0)):
        raise ValueError("schedule must be strictly monotone")
    q_lim = float(limit() if callable(limit) else limit)
    values = [float(quantity(x)) for x in xs]
    errors = [abs(v - q_lim) for v in values]
    ratios = [
        e1 / e0 if e0 > noise_floor and e1 > noise_floor else None
        for e0, e1 in zip(errors, errors[1:])
    ]
    order = None
    usable = [(x, e) for x, e in zip(xs, errors) if e > noise_floor]
    if len(usable) == len(xs):
        slope = np.polyfit(np.log([x for x, _ in usable]), np.log([e for _, e in usable]), 1)[0]
        # growing schedules converge with negative slope, shrinking ones with positive
        order = float(-slope if steps[0] > 0 else slope)
    return ConvergenceReport(parameter, xs, values, q_lim, errors, ratios, order)


def probe_large_t(pop, design, net, theta, schedule=(8, 16, 32, 64), quad=DEFAULT_QUAD):
    return probe_convergence(
        lambda t: analysis.success_prob(pop, design, net, SchemeConfig(int(t), theta), quad),
        q_limit_large_t(pop, design, net, theta, quad),
        schedule,
        parameter="period_t",
    )


def probe_dense(pop, design, net, scheme, schedule=(1.0, 2.0, 4.0), quad=DEFAULT_QUAD):
    return probe_convergence(
        lambda lu: analysis.success_prob(pop, design, net.replace(lambda_u=lu), scheme, quad),
        q_limit_dense(pop, design, net, scheme, quad),
        schedule,
        parameter="lambda_u",
    )


def probe_sparse(pop, design, net, scheme, schedule=(4e-3, 2e-3, 1e-3), quad=DEFAULT_QUAD):
    return probe_convergence(
        lambda lu: analysis.success_prob(pop, design, net.replace(lambda_u=lu), scheme, quad),
        q_limit_sparse(pop, design, net, scheme, quad),
        schedule,
        parameter="lambda_u",
    )
