"""Shared domain types: parameters, datasets, schedules, random streams, traces."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

_MASK64 = (1 << 64) - 1


class DcabcError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(DcabcError, ValueError):
    """An argument lies outside the domain of an operation."""


class DegenerateStatisticError(DcabcError, ValueError):
    """A summary statistic has zero spread."""


class NumericalError(DcabcError, ArithmeticError):
    """A matrix factorisation or density evaluation failed."""


class ConfigError(DcabcError, ValueError):
    """An experiment or sampler configuration is invalid."""


@dataclass(frozen=True)
class ParameterVector:
    """A point in parameter space.

    ``log_scale[i]`` is true when coordinate ``i`` is the logarithm of a
    positive model parameter; samplers always work on these transformed
    coordinates.
    """

    values: np.ndarray
    names: tuple[str, ...]
    log_scale: tuple[bool, ...]

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "log_scale", tuple(bool(b) for b in self.log_scale))
        if not (len(values) == len(self.names) == len(self.log_scale)):
            raise DomainError("values, names and log_scale must have equal length")
        if not np.all(np.isfinite(values)):
            raise DomainError(f"parameter values must be finite, got {values}")

    def __len__(self):
        return len(self.values)

    def natural(self) -> np.ndarray:
        """Values on the natural scale (log-scale coordinates exponentiated)."""
        mask = np.array(self.log_scale, dtype=bool)
        out = self.values.copy()
        out[mask] = np.exp(out[mask])
        return out

    def replace(self, values) -> "ParameterVector":
        return ParameterVector(values, self.names, self.log_scale)

    def as_dict(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.names, self.values)}


@dataclass(frozen=True)
class Dataset:
    """Observations ``(n_obs, d_y)`` recorded at strictly increasing times."""

    times: np.ndarray
    observations: np.ndarray

    def __post_init__(self):
        times = np.array(self.times, dtype=float).reshape(-1)
        obs = np.array(self.observations, dtype=float)
        if obs.ndim == 1:
            obs = obs[:, None]
        if obs.ndim != 2:
            raise DomainError("observations must be a matrix")
        if obs.shape[0] != times.shape[0]:
            raise DomainError(
                f"{obs.shape[0]} observation rows but {times.shape[0]} times")
        if times.shape[0] > 1 and np.any(np.diff(times) <= 0):
            raise DomainError("times must be strictly increasing")
        times.setflags(write=False)
        obs.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "observations", obs)

    @property
    def n_obs(self) -> int:
        return self.observations.shape[0]

    @property
    def dim(self) -> int:
        return self.observations.shape[1]

    def to_csv(self, path) -> None:
        columns = ["t", "x", "y"][: 1 + self.dim] if self.dim <= 2 else (
            ["t"] + [f"x{i + 1}" for i in range(self.dim)])
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(columns)
            for t, row in zip(self.times, self.observations):
                writer.writerow([_fmt(t)] + [_fmt(v) for v in row])

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [[float(v) for v in row] for row in reader if row]
        if not header or header[0] != "t":
            raise DomainError(f"{path}: first column must be 't'")
        arr = np.array(rows, dtype=float).reshape(-1, len(header))
        return cls(arr[:, 0], arr[:, 1:])


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


# -- schedules ---------------------------------------------------------------

@dataclass(frozen=True)
class DeltaSchedule:
    """Piecewise-constant ABC threshold, as ``(start_iteration, delta)`` pairs."""

    breakpoints: tuple[tuple[int, float], ...]

    def __post_init__(self):
        bps = tuple((int(s), float(d)) for s, d in self.breakpoints)
        if not bps:
            raise ConfigError("delta schedule needs at least one breakpoint")
        starts = [s for s, _ in bps]
        deltas = [d for _, d in bps]
        if starts[0] != 1:
            raise ConfigError("delta schedule must start at iteration 1")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ConfigError("delta schedule start iterations must increase")
        if any(d <= 0 or not np.isfinite(d) for d in deltas):
            raise ConfigError("deltas must be finite and positive")
        if any(b > a for a, b in zip(deltas, deltas[1:])):
            raise ConfigError("deltas must be non-increasing")
        object.__setattr__(self, "breakpoints", bps)

    @classmethod
    def constant(cls, delta: float) -> "DeltaSchedule":
        return cls(((1, delta),))

    @classmethod
    def every(cls, deltas: Sequence[float], length: int) -> "DeltaSchedule":
        """Change delta every ``length`` iterations; the last value persists."""
        return cls(tuple((1 + i * length, d) for i, d in enumerate(deltas)))

    @property
    def final(self) -> float:
        return self.breakpoints[-1][1]

    @property
    def final_start(self) -> int:
        return self.breakpoints[-1][0]


@dataclass(frozen=True)
class CloneSchedule:
    """Piecewise-constant number of clones, as ``(start_iteration, K)`` pairs."""

    breakpoints: tuple[tuple[int, int], ...]

    def __post_init__(self):
        bps = tuple((int(s), int(k)) for s, k in self.breakpoints)
        if not bps:
            raise ConfigError("clone schedule needs at least one breakpoint")
        starts = [s for s, _ in bps]
        ks = [k for _, k in bps]
        if starts[0] != 1:
            raise ConfigError("clone schedule must start at iteration 1")
        if ks[0] != 1:
            raise ConfigError("clone schedule must start with K=1")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ConfigError("clone schedule start iterations must increase")
        if any(b <= a for a, b in zip(ks, ks[1:])):
            raise ConfigError("clone counts must strictly increase")
        object.__setattr__(self, "breakpoints", bps)

    @property
    def final(self) -> int:
        return self.breakpoints[-1][1]

    @property
    def cloning_start(self) -> int | None:
        """First iteration with K > 1, or None."""
        for start, k in self.breakpoints:
            if k > 1:
                return start
        return None


def _lookup(breakpoints, iteration):
    if iteration < 1:
        raise DomainError(f"iteration must be >= 1, got {iteration}")
    value = breakpoints[0][1]
    for start, v in breakpoints:
        if start > iteration:
            break
        value = v
    return value


def active_delta(schedule: DeltaSchedule, iteration: int) -> float:
    """Threshold in force at ``iteration`` (1-based)."""
    return _lookup(schedule.breakpoints, iteration)


def active_clones(schedule: CloneSchedule, iteration: int) -> int:
    """Number of clones in force at ``iteration`` (1-based)."""
    return _lookup(schedule.breakpoints, iteration)


# -- random streams ----------------------------------------------------------

def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def _hash_path(path: tuple[int, ...]) -> int:
    h = 0x6A09E667F3BCC908
    for p in path:
        h = _splitmix64(h ^ (int(p) & _MASK64))
    return _splitmix64(h ^ len(path))


class RandomSource:
    """Deterministic random stream addressed by ``(master_seed, stream_id)``.

    ``stream_id`` is a path of integers, e.g. ``(phase, iteration, clone)``.
    Each path keys its own Philox generator, so child streams can be built in
    any order or on any thread and still produce the same draws.
    """

    __slots__ = ("master_seed", "stream_id", "_gen")

    def __init__(self, master_seed: int, stream_id: int | Sequence[int] = ()):
        self.master_seed = int(master_seed) & _MASK64
        if isinstance(stream_id, (int, np.integer)):
            stream_id = (int(stream_id),)
        self.stream_id = tuple(int(s) for s in stream_id)
        self._gen = None

    def child(self, *ids: int) -> "RandomSource":
        return RandomSource(self.master_seed, self.stream_id + tuple(ids))

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            key = np.array([self.master_seed, _hash_path(self.stream_id)], dtype=np.uint64)
            self._gen = np.random.Generator(np.random.Philox(key=key))
        return self._gen

    def standard_normal(self, size=None) -> np.ndarray:
        return self.generator.standard_normal(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def __repr__(self):
        return f"RandomSource(master_seed={self.master_seed}, stream_id={self.stream_id})"


def as_random_source(rng) -> RandomSource:
    if isinstance(rng, RandomSource):
        return rng
    if rng is None:
        return RandomSource(0)
    return RandomSource(int(rng))


# -- chain trace -------------------------------------------------------------

@dataclass
class Regime:
    """A maximal run of iterations sharing one ``(delta, K)`` pair."""

    start: int
    end: int  # inclusive
    delta: float
    clones: int

    @property
    def length(self) -> int:
        return self.end - self.start + 1


@dataclass
class ChainTrace:
    """Per-iteration record of a sampler run (iterations are 1-based).

    ``log_kernel`` is the log of q* for the state held after each iteration;
    ``qstar_clones`` records how many clones produced that value, which lets
    callers audit the q* re-evaluation performed when K increases.
    """

    param_names: tuple[str, ...]
    delta: np.ndarray
    clones: np.ndarray
    theta: np.ndarray
    log_kernel: np.ndarray
    accepted: np.ndarray
    qstar_clones: np.ndarray = None
    summaries: np.ndarray | None = None
    regimes: list[Regime] = field(default_factory=list)

    def __post_init__(self):
        if self.qstar_clones is None:
            self.qstar_clones = np.asarray(self.clones).copy()
        if not self.regimes:
            self.regimes = _find_regimes(self.delta, self.clones)

    @classmethod
    def allocate(cls, n: int, param_names: Sequence[str], d_s: int | None = None):
        d = len(param_names)
        return cls(
            param_names=tuple(param_names),
            delta=np.zeros(n),
            clones=np.zeros(n, dtype=np.int64),
            theta=np.zeros((n, d)),
            log_kernel=np.zeros(n),
            accepted=np.zeros(n, dtype=bool),
            qstar_clones=np.zeros(n, dtype=np.int64),
            summaries=None if d_s is None else np.full((n, d_s), np.nan),
            regimes=[Regime(1, n, 0.0, 0)],
        )

    def finalize(self) -> "ChainTrace":
        self.regimes = _find_regimes(self.delta, self.clones)
        return self

    def __len__(self):
        return self.theta.shape[0]

    @property
    def iterations(self) -> np.ndarray:
        return np.arange(1, len(self) + 1)

    @property
    def final_regime(self) -> Regime:
        return self.regimes[-1]

    def regime_slice(self, regime: Regime, burnin_fraction: float = 0.0) -> slice:
        skip = int(np.floor(burnin_fraction * regime.length))
        return slice(regime.start - 1 + skip, regime.end)

    def acceptance_rates(self) -> list[dict]:
        out = []
        for r in self.regimes:
            acc = self.accepted[r.start - 1:r.end]
            out.append({"start": r.start, "end": r.end, "delta": r.delta,
                        "K": r.clones, "acceptance_rate": float(acc.mean())})
        return out

    def to_csv(self, path, thin: int = 1) -> None:
        """Write ``iter,delta,K,accepted,theta_1..theta_d,log_kernel``."""
        thin = max(1, int(thin))
        d = self.theta.shape[1]
        header = ["iter", "delta", "K", "accepted"] + [
            f"theta_{i + 1}" for i in range(d)] + ["log_kernel"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for i in range(0, len(self), thin):
                writer.writerow(
                    [i + 1, _fmt(self.delta[i]), int(self.clones[i]), int(self.accepted[i])]
                    + [_fmt(v) for v in self.theta[i]]
                    + [_fmt(self.log_kernel[i])])

    @classmethod
    def from_csv(cls, path, param_names: Sequence[str] | None = None) -> "ChainTrace":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [row for row in reader if row]
        d = len(header) - 5
        arr = np.array([[float(v) for v in row] for row in rows]).reshape(-1, len(header))
        names = tuple(param_names) if param_names else tuple(header[4:4 + d])
        return cls(
            param_names=names,
            delta=arr[:, 1],
            clones=arr[:, 2].astype(np.int64),
            theta=arr[:, 4:4 + d],
            log_kernel=arr[:, -1],
            accepted=arr[:, 3].astype(bool),
        )


def _find_regimes(delta: np.ndarray, clones: np.ndarray) -> list[Regime]:
    n = len(delta)
    if n == 0:
        return []
    regimes = []
    start = 0
    for i in range(1, n + 1):
        if i == n or delta[i] != delta[start] or clones[i] != clones[start]:
            regimes.append(Regime(start + 1, i, float(delta[start]), int(clones[start])))
            start = i
    return regimes


def stream_slice_moments(path, regime_start: int, regime_end: int,
                         burnin_fraction: float) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of a trace slice, read row by row from CSV.

    Uses Welford updates so it never holds the trace in memory; it exists as
    an independent check on the in-memory summaries.
    """
    length = regime_end - regime_start + 1
    first = regime_start + int(np.floor(burnin_fraction * length))
    mean = None
    m2 = None
    count = 0
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        d = len(header) - 5
        for row in reader:
            it = int(row[0])
            if it < first or it > regime_end:
                continue
            x = np.array([float(v) for v in row[4:4 + d]])
            if mean is None:
                mean = np.zeros(d)
                m2 = np.zeros((d, d))
            count += 1
            dx = x - mean
            mean += dx / count
            m2 += np.outer(dx, x - mean)
    if count < 2:
        raise DomainError("slice has fewer than two rows")
    return mean, m2 / (count - 1)
