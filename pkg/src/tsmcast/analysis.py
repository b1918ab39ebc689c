"""Analytical evaluation of the successful transmission probability.

The file-load p.m.f. uses the Voronoi-cell load approximation (constants
3.5 and 4.5) and treats the load and the SINR as independent. The SINR
c.c.d.f. is exact for the PPP model and is evaluated by adaptive quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .model import CacheDesign, NetworkConfig, Popularity, SchemeConfig

# Voronoi-cell load approximation constants.
CELL_SHAPE = 3.5
CELL_EXPONENT = 4.5

PMF_TOL = 1e-9


class QuadratureError(ArithmeticError):
    def __init__(self, message: str, value: float, abserr: float):
        self.value = value
        self.abserr = abserr
        super().__init__(f"{message} (value={value:.6g}, error estimate={abserr:.3g})")


@dataclass(frozen=True)
class QuadratureSettings:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_subdivisions: int = 200
    tail_cutoff_mass: float = 1e-10

    def __post_init__(self):
        from .model import ValidationError

        bad = [
            f"{name} > 0"
            for name in ("rel_tol", "abs_tol", "tail_cutoff_mass")
            if not getattr(self, name) > 0
        ]
        if self.max_subdivisions < 10:
            bad.append("max_subdivisions >= 10")
        if not self.tail_cutoff_mass < 1:
            bad.append("tail_cutoff_mass < 1")
        if bad:
            raise ValidationError(bad)


DEFAULT_QUAD = QuadratureSettings()


@dataclass(frozen=True, eq=False)
class LoadPmf:
    """Distribution of the file load K_{n,0}; ``probs[k-1] = Pr[K = k]``."""

    probs: np.ndarray
    support: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        support = np.arange(1, probs.size + 1)
        support.setflags(write=False)
        object.__setattr__(self, "support", support)
        if np.any(probs < -PMF_TOL):
            raise ArithmeticError(f"negative load probability in {probs}")
        total = probs.sum()
        if abs(total - 1.0) > PMF_TOL:
            raise ArithmeticError(f"load p.m.f. sums to {total!r}, not 1")

    def mean(self) -> float:
        return float(self.support @ self.probs)

    def __getitem__(self, k: int) -> float:
        return float(self.probs[k - 1])


def beta_complete(x: float, y: float) -> float:
    """B(x, y) = integral of u**(x-1) (1-u)**(y-1) over [0, 1]."""
    if not (x > 0 and y > 0):
        raise ValueError(f"beta arguments must be positive (got x={x}, y={y})")
    return float(special.beta(x, y))


def beta_upper(x: float, y: float, z: float) -> float:
    """Upper incomplete Beta integral over [z, 1].

    Computed through the reflected regularized form I_{1-z}(y, x) so the
    tail near u = 1 keeps full relative precision.
    """
    if not (x > 0 and y > 0):
        raise ValueError(f"beta arguments must be positive (got x={x}, y={y})")
    if not 0 <= z <= 1:
        raise ValueError(f"lower limit z must lie in [0, 1] (got {z})")
    if z == 1:
        return 0.0
    return float(special.beta(x, y) * special.betainc(y, x, 1.0 - z))


def load_weight(m: int, pop: Popularity, design: CacheDesign, net: NetworkConfig, t_period) -> float:
    """W_m: one plus the scaled density of users requesting file m within the
    window, per BS that stores m. ``t_period`` may be ``math.inf``."""
    t_m = design.hit[m - 1]
    if not t_m > 0:
        raise ValueError(f"file {m} is never cached (T_{m} = 0)")
    return 1.0 + _window_density(pop.a[m - 1], net.lambda_u, t_period) / (CELL_SHAPE * t_m * net.lambda_b)


def _window_density(a_m: float, lambda_u: float, t_period) -> float:
    # lambda_u * (1 - (1 - a_m)^T), stable for small a_m
    if math.isinf(t_period):
        return lambda_u
    return -lambda_u * math.expm1(t_period * math.log1p(-a_m)) if a_m < 1 else lambda_u


def _idle_prob(w_minus_one: float) -> float:
    """W^-4.5 written in terms of W - 1."""
    return math.exp(-CELL_EXPONENT * math.log1p(w_minus_one))


def _busy_prob(w_minus_one: float) -> float:
    """1 - W^-4.5 without cancellation near W = 1."""
    return -math.expm1(-CELL_EXPONENT * math.log1p(w_minus_one))


def _load_pmf_from_weights(n: int, design: CacheDesign, w_minus_one: np.ndarray) -> LoadPmf:
    k_max = design.cache_size
    t_n = design.hit[n - 1]
    if not t_n > 0:
        raise ValueError(f"file {n} is never cached (T_{n} = 0)")
    acc = np.zeros(k_max)
    for i in design.combos.containing(n):
        p_i = design.p[i]
        if p_i == 0:
            continue
        # Poisson-binomial over the other K-1 files in the combination.
        poly = np.ones(1)
        for m in design.combos.combos[i]:
            if m == n:
                continue
            busy = _busy_prob(w_minus_one[m - 1])
            poly = np.convolve(poly, [_idle_prob(w_minus_one[m - 1]), busy])
        acc += (p_i / t_n) * poly
    return LoadPmf(acc)


def _weights_minus_one(pop: Popularity, design: CacheDesign, net: NetworkConfig, t_period) -> np.ndarray:
    out = np.full(design.n_files, np.nan)
    for m in range(1, design.n_files + 1):
        t_m = design.hit[m - 1]
        if t_m > 0:
            # may overflow to inf for vanishing T_m * lambda_b: the file is then always requested
            with np.errstate(over="ignore", divide="ignore"):
                out[m - 1] = _window_density(pop.a[m - 1], net.lambda_u, t_period) / (
                    CELL_SHAPE * t_m * net.lambda_b
                )
    return out


def load_pmf(n: int, pop: Popularity, design: CacheDesign, net: NetworkConfig, t_period) -> LoadPmf:
    """P.m.f. of the number of distinct files the serving BS of a file-n
    request multicasts in its active slot."""
    return _load_pmf_from_weights(n, design, _weights_minus_one(pop, design, net, t_period))


def expected_load(n: int, pop: Popularity, design: CacheDesign, net: NetworkConfig, t_period) -> float:
    return load_pmf(n, pop, design, net, t_period).mean()


def _interference_factor(eta: float, t_n: float, alpha: float, t_period) -> float:
    # Interference exponent per unit of pi * lambda_b * T_n * d^2.
    if eta == 0 or math.isinf(t_period):
        return 0.0
    x, y = 2.0 / alpha, 1.0 - 2.0 / alpha
    near = beta_upper(x, y, 1.0 / (1.0 + eta))
    far = (1.0 - t_n) / t_n * beta_complete(x, y) if t_n < 1 else 0.0
    return x / t_period * eta**x * (near + far)


def _coverage(eta, t_n, net, t_period, quad: QuadratureSettings):
    if eta < 0 or math.isnan(eta):
        raise ValueError(f"SINR threshold must be >= 0 (got {eta})")
    if not 0 < t_n <= 1:
        raise ValueError(f"hit probability must lie in (0, 1] (got {t_n})")
    if eta == 0:
        return 1.0, 0.0
    rho = _interference_factor(eta, t_n, net.alpha, t_period)
    scale = 1.0 / (1.0 + rho)
    # Substituting w = pi*lambda_b*T_n*(1+rho)*d^2 leaves
    #   scale * int_0^inf exp(-w - kappa * w^(alpha/2)) dw.
    kappa = eta / net.snr_ratio * (math.pi * net.lambda_b * t_n * (1.0 + rho)) ** (-net.alpha / 2)
    if kappa == 0:
        return scale, 0.0
    half_alpha = net.alpha / 2
    upper = -math.log(quad.tail_cutoff_mass)
    if kappa * upper**half_alpha > 745:
        # Integrand underflows well before the cutoff; stop where it does.
        upper = (745.0 / kappa) ** (1.0 / half_alpha)

    # Mild noise: integrate the deficit 1 - exp(-kappa w^(alpha/2)) instead, so
    # truncation cannot pull the value below its noise-free limit.
    deficit = kappa * math.gamma(1.0 + half_alpha) < 0.5

    def integrand(w):
        if deficit:
            return -math.exp(-w) * math.expm1(-kappa * w**half_alpha)
        return math.exp(-w - kappa * w**half_alpha)

    result = integrate.quad(
        integrand,
        0.0,
        upper,
        epsabs=quad.abs_tol,
        epsrel=quad.rel_tol,
        limit=quad.max_subdivisions,
        full_output=1,
    )
    value, abserr = result[0], result[1]
    if len(result) > 3:
        raise QuadratureError(f"SINR c.c.d.f. quadrature failed: {result[3].strip().splitlines()[0]}", value, abserr)
    abserr += quad.tail_cutoff_mass
    if deficit:
        value = 1.0 - value
    return min(1.0, scale * value), scale * abserr


def sinr_ccdf(
    eta: float,
    t_n: float,
    net: NetworkConfig,
    t_period,
    quad: QuadratureSettings = DEFAULT_QUAD,
    full_output: bool = False,
):
    """Pr[SINR >= eta] for a request served by the nearest BS storing a file
    with hit probability ``t_n`` under on/off period ``t_period``.

    With ``full_output`` returns ``(value, abserr)``.
    """
    value, abserr = _coverage(eta, t_n, net, t_period, quad)
    return (value, abserr) if full_output else value


def sinr_threshold(k: int, theta: float, bandwidth_w: float) -> float:
    """SINR needed to carry rate theta over bandwidth W/k."""
    return math.expm1(k * theta / bandwidth_w * math.log(2.0))


def _q_file(pmf: LoadPmf, t_n, net, theta, t_period, quad) -> float:
    total = 0.0
    for k, g in zip(pmf.support, pmf.probs):
        if g == 0:
            continue
        total += g * sinr_ccdf(sinr_threshold(int(k), theta, net.bandwidth_w), t_n, net, t_period, quad)
    # the p.m.f. sums to 1 only up to rounding
    return min(total, 1.0)


def success_prob_file(
    n: int,
    pop: Popularity,
    design: CacheDesign,
    net: NetworkConfig,
    scheme: SchemeConfig,
    quad: QuadratureSettings = DEFAULT_QUAD,
) -> float:
    """q_n: success probability of a request for file n."""
    pmf = load_pmf(n, pop, design, net, scheme.period_t)
    return _q_file(pmf, design.hit[n - 1], net, scheme.rate_theta, scheme.period_t, quad)


def success_prob_per_file(pop, design, net, scheme, quad=DEFAULT_QUAD) -> np.ndarray:
    return np.array(
        [success_prob_file(n, pop, design, net, scheme, quad) for n in range(1, design.n_files + 1)]
    )


def success_prob(pop, design, net, scheme, quad=DEFAULT_QUAD) -> float:
    """q = sum_n a_n q_n."""
    return float(pop.a @ success_prob_per_file(pop, design, net, scheme, quad))
