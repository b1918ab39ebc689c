"""Static model objects: network parameters, popularity, file combinations,
caching distributions and the on/off scheme.

Every object validates itself on construction and is immutable afterwards.
Array-valued fields are stored as read-only numpy arrays.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, fields

import numpy as np

SIMPLEX_TOL = 1e-12
DEFAULT_COMBINATION_CAP = 100_000


class ValidationError(ValueError):
    """Raised with the full list of violated invariants."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class NetworkConfig:
    lambda_b: float
    lambda_u: float
    alpha: float
    bandwidth_w: float
    snr_ratio: float  # P/N_0, linear

    def violations(self) -> list[str]:
        out = []
        if not self.alpha > 2:
            out.append(f"alpha > 2 (got alpha={self.alpha})")
        for name in ("lambda_b", "lambda_u", "bandwidth_w", "snr_ratio"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                out.append(f"{name} > 0 (got {name}={value})")
        return out

    def __post_init__(self):
        if bad := self.violations():
            raise ValidationError(bad)

    def replace(self, **changes) -> NetworkConfig:
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return NetworkConfig(**values)


@dataclass(frozen=True, eq=False)
class Popularity:
    """File request probabilities a_1 >= a_2 >= ... >= a_N."""

    a: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", _frozen_array(self.a))
        if bad := self.violations():
            raise ValidationError(bad)

    def violations(self) -> list[str]:
        a = self.a
        if a.ndim != 1 or a.size == 0:
            return ["popularity must be a non-empty vector"]
        out = []
        if np.any(~((a > 0) & (a < 1))) and not (a.size == 1 and a[0] == 1.0):
            out.append("popularity entries a_n in (0,1)")
        if abs(a.sum() - 1.0) > SIMPLEX_TOL:
            out.append(f"popularity sums to 1 (got {a.sum():.15g})")
        if np.any(np.diff(a) > 0):
            out.append("popularity non-increasing (a_1 >= a_2 >= ... >= a_N)")
        return out

    @property
    def n_files(self) -> int:
        return self.a.size

    def __eq__(self, other):
        return isinstance(other, Popularity) and np.array_equal(self.a, other.a)

    __hash__ = None


def zipf_popularity(n_files: int, gamma: float) -> Popularity:
    """Zipf-like popularity a_n proportional to n**-gamma."""
    if n_files < 1:
        raise ValidationError([f"n_files >= 1 (got {n_files})"])
    if gamma < 0:
        raise ValidationError([f"gamma >= 0 (got {gamma})"])
    w = np.arange(1, n_files + 1, dtype=float) ** -float(gamma)
    return Popularity(w / w.sum())


@dataclass(frozen=True)
class CombinationSet:
    """Ordered collection of K-subsets of {1..N} (1-based file labels)."""

    n_files: int
    cache_size: int
    combos: tuple[tuple[int, ...], ...]
    complete: bool = True

    def __post_init__(self):
        if bad := self.violations():
            raise ValidationError(bad)

    def violations(self) -> list[str]:
        n, k = self.n_files, self.cache_size
        if not 1 <= k <= n:
            return [f"1 <= cache_size <= n_files (got K={k}, N={n})"]
        out = []
        seen = set()
        for c in self.combos:
            if len(c) != k or len(set(c)) != k:
                out.append(f"combination {c} must hold {k} distinct files")
            elif any(not 1 <= m <= n for m in c):
                out.append(f"combination {c} has files outside 1..{n}")
            if c in seen:
                out.append(f"duplicate combination {c}")
            seen.add(c)
        if self.complete and len(self.combos) != math.comb(n, k):
            out.append(f"complete set needs C({n},{k}) = {math.comb(n, k)} combinations")
        if list(self.combos) != sorted(self.combos):
            out.append("combinations must be in lexicographic order")
        return out

    def __len__(self) -> int:
        return len(self.combos)

    @property
    def membership(self) -> np.ndarray:
        """Boolean matrix x[i, n-1] = file n is in combination i."""
        x = np.zeros((len(self.combos), self.n_files), dtype=bool)
        for i, c in enumerate(self.combos):
            x[i, [m - 1 for m in c]] = True
        return x

    def containing(self, n: int) -> list[int]:
        """Indices i of combinations that hold file n."""
        return [i for i, c in enumerate(self.combos) if n in c]


def enumerate_combinations(
    n_files: int, cache_size: int, cap: int = DEFAULT_COMBINATION_CAP
) -> CombinationSet:
    if not 1 <= cache_size <= n_files:
        raise ValidationError([f"1 <= cache_size <= n_files (got K={cache_size}, N={n_files})"])
    count = math.comb(n_files, cache_size)
    if count > cap:
        raise ValidationError(
            [
                f"C({n_files},{cache_size}) = {count} combinations exceeds the enumeration "
                f"cap of {cap}; supply a sparse caching distribution instead"
            ]
        )
    combos = tuple(itertools.combinations(range(1, n_files + 1), cache_size))
    return CombinationSet(n_files, cache_size, combos, complete=True)


@dataclass(frozen=True, eq=False)
class CacheDesign:
    """Random caching over file combinations.

    ``p[i]`` is the probability that a BS stores ``combos.combos[i]``.
    ``hit[n-1]`` is T_n, the probability that file n is stored at a BS.
    """

    combos: CombinationSet
    p: np.ndarray
    hit: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "p", _frozen_array(self.p))
        if bad := self.violations():
            raise ValidationError(bad)
        object.__setattr__(self, "hit", _frozen_array(self.combos.membership.T @ self.p))

    def violations(self) -> list[str]:
        p = self.p
        if p.ndim != 1 or p.size != len(self.combos):
            return [f"caching distribution needs {len(self.combos)} entries (got {p.size})"]
        out = []
        if np.any((p < 0) | (p > 1)):
            out.append("caching probabilities p_i in [0,1]")
        if abs(p.sum() - 1.0) > SIMPLEX_TOL:
            out.append(f"caching distribution sums to 1 (got {p.sum():.15g})")
        return out

    @classmethod
    def dense(cls, n_files: int, cache_size: int, p, cap: int = DEFAULT_COMBINATION_CAP):
        return cls(enumerate_combinations(n_files, cache_size, cap), p)

    @classmethod
    def sparse(cls, n_files: int, cache_size: int, entries):
        """Build from ``(members, probability)`` pairs; omitted combinations get p = 0."""
        pairs = sorted((tuple(sorted(int(m) for m in members)), float(prob)) for members, prob in entries)
        combos = CombinationSet(n_files, cache_size, tuple(c for c, _ in pairs), complete=False)
        return cls(combos, [prob for _, prob in pairs])

    @classmethod
    def uniform(cls, n_files: int, cache_size: int):
        combos = enumerate_combinations(n_files, cache_size)
        return cls(combos, np.full(len(combos), 1.0 / len(combos)))

    @property
    def n_files(self) -> int:
        return self.combos.n_files

    @property
    def cache_size(self) -> int:
        return self.combos.cache_size

    def __eq__(self, other):
        return (
            isinstance(other, CacheDesign)
            and self.combos == other.combos
            and np.array_equal(self.p, other.p)
        )

    __hash__ = None


def hit_probabilities(design: CacheDesign) -> np.ndarray:
    """T_n for n = 1..N (index n-1)."""
    return design.hit


@dataclass(frozen=True)
class SchemeConfig:
    period_t: int = 1
    rate_theta: float = 0.0

    def violations(self) -> list[str]:
        out = []
        if isinstance(self.period_t, bool) or int(self.period_t) != self.period_t or self.period_t < 1:
            out.append(f"period_t integer >= 1 (got {self.period_t})")
        if not self.rate_theta >= 0:
            out.append(f"rate_theta >= 0 (got {self.rate_theta})")
        return out

    def __post_init__(self):
        if bad := self.violations():
            raise ValidationError(bad)
        object.__setattr__(self, "period_t", int(self.period_t))


@dataclass(frozen=True)
class ModelBundle:
    net: NetworkConfig
    pop: Popularity
    design: CacheDesign
    scheme: SchemeConfig

    def with_scheme(self, **changes) -> ModelBundle:
        values = {"period_t": self.scheme.period_t, "rate_theta": self.scheme.rate_theta}
        values.update(changes)
        return ModelBundle(self.net, self.pop, self.design, SchemeConfig(**values))

    def with_net(self, **changes) -> ModelBundle:
        return ModelBundle(self.net.replace(**changes), self.pop, self.design, self.scheme)


def _build(cls, value, violations: list[str], label: str):
    if isinstance(value, cls):
        return value
    try:
        if isinstance(value, Mapping):
            return cls(**value)
        return cls(value)
    except ValidationError as exc:
        violations.extend(f"{label}: {v}" for v in exc.violations)
    except TypeError as exc:
        violations.append(f"{label}: {exc}")
    return None


def validate_inputs(net, pop, design, scheme) -> ModelBundle:
    """Check a full model bundle and report every violated invariant at once.

    Arguments may be constructed objects or mappings of their fields
    (``pop`` may also be a plain sequence). Raises ``ValidationError``
    listing all problems, otherwise returns a ``ModelBundle``.
    """
    violations: list[str] = []
    net = _build(NetworkConfig, net, violations, "network")
    pop = _build(Popularity, pop, violations, "popularity")
    scheme = _build(SchemeConfig, scheme, violations, "scheme")
    if not isinstance(design, CacheDesign):
        try:
            design = CacheDesign.dense(design["n_files"], design["cache_size"], design["p"])
        except ValidationError as exc:
            violations.extend(f"caching: {v}" for v in exc.violations)
            design = None
    if pop is not None and design is not None:
        if pop.n_files != design.n_files:
            violations.append(
                f"popularity has {pop.n_files} files but caching design has {design.n_files}"
            )
        uncached = [n + 1 for n in np.flatnonzero(design.hit <= 0)]
        if uncached:
            violations.append(f"every file needs T_n > 0; never cached: {uncached}")
    if violations:
        raise ValidationError(violations)
    return ModelBundle(net, pop, design, scheme)
