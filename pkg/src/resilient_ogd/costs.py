"""Online scalar cost streams.

Every cost emitted here has the form

    f(w) = a/2 (w - m)^2 + b |w - m| + c

with curvature ``a > 0``, minimiser ``m`` and kink ``b >= 0``.  The sensor
model is the special case ``a = H^2``, ``m = z/H``, ``b = c = 0``.  Keeping one
parametric family lets the regret code evaluate whole rounds with numpy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.stats import norm

# purpose tags for SeedSequence spawn keys
NOISE_STREAM = 4
SENSOR_STREAM = 5
SYNTHETIC_STREAM = 8

NOISE_QUANTILE = 0.999


class StreamConfigError(ValueError):
    pass


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


@dataclass(frozen=True)
class CostFunction:
    curvature: float
    center: float
    kink: float = 0.0
    offset: float = 0.0
    owner: int = -1
    round: int = -1

    @property
    def rho_local(self) -> float:
        return self.curvature

    def evaluate(self, w: float) -> float:
        d = w - self.center
        return 0.5 * self.curvature * d * d + self.kink * abs(d) + self.offset

    def gradient(self, w: float) -> float:
        """A subgradient; zero at the kink."""
        d = w - self.center
        return self.curvature * d + self.kink * float(np.sign(d))

    @property
    def argmin(self) -> float:
        return self.center


def evaluate(a, m, b, c, w):
    """Vectorised cost evaluation with numpy broadcasting."""
    d = w - m
    return 0.5 * a * d * d + b * np.abs(d) + c


def gradient(a, m, b, w):
    d = w - m
    return a * d + b * np.sign(d)


@dataclass(frozen=True)
class CostTable:
    """Cost parameters for rounds ``1..T`` (rows) and agents (columns)."""

    a: np.ndarray
    m: np.ndarray
    b: np.ndarray
    c: np.ndarray

    @property
    def T(self) -> int:
        return self.a.shape[0]

    @property
    def quadratic(self) -> bool:
        return not np.any(self.b)

    def head(self, T: int) -> "CostTable":
        return CostTable(self.a[:T], self.m[:T], self.b[:T], self.c[:T])

    def values(self, w) -> np.ndarray:
        """``f_t^i(w[t, i])``; ``w`` broadcasts against ``(T, R)``."""
        return evaluate(self.a, self.m, self.b, self.c, w)

    def cost(self, t: int, i: int) -> CostFunction:
        """Cost of column ``i`` in round ``t`` (1-based, matching the table rows)."""
        k = t - 1
        return CostFunction(
            float(self.a[k, i]), float(self.m[k, i]), float(self.b[k, i]),
            float(self.c[k, i]), i, t,
        )


# --------------------------------------------------------------------------
# sensor model


@dataclass
class SensorModel:
    """Linear sensors ``z_i(t) = H_i x + v_i(t)`` with Gaussian noise."""

    true_x: float
    H: np.ndarray
    noise_sigma: float
    seed: int
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def sample(
        cls,
        n: int,
        true_x: float,
        noise_sigma: float,
        seed: int,
        h_min: float = 0.1,
        resample: bool = True,
    ) -> "SensorModel":
        """Draw gains from uniform(0, 2); gains below ``h_min`` are redrawn.

        With ``resample=False`` small gains are kept as drawn.
        """
        rng = _rng(seed, SENSOR_STREAM)
        H = rng.uniform(0.0, 2.0, size=n)
        if resample:
            if not 0 <= h_min < 2:
                raise StreamConfigError("h_min must lie in [0, 2)")
            for i in range(n):
                while H[i] < h_min:
                    H[i] = rng.uniform(0.0, 2.0)
        return cls(float(true_x), H, float(noise_sigma), int(seed))

    @property
    def n(self) -> int:
        return len(self.H)

    def noise(self, t: int) -> np.ndarray:
        if t not in self._cache:
            v = _rng(self.seed, NOISE_STREAM, t).standard_normal(self.n)
            self._cache[t] = self.noise_sigma * v
        return self._cache[t]

    def measurements(self, t: int) -> np.ndarray:
        return self.H * self.true_x + self.noise(t)

    def params(self, t: int):
        z = self.measurements(t)
        zeros = np.zeros(self.n)
        return self.H**2, z / self.H, zeros, zeros


def sensor_cost(model: SensorModel, i: int, t: int) -> CostFunction:
    """``f(w) = (z_i(t) - H_i w)^2 / 2`` for sensor ``i`` at round ``t``."""
    h = float(model.H[i])
    if h == 0:
        raise StreamConfigError(f"sensor {i} has zero gain")
    z = float(model.measurements(t)[i])
    return CostFunction(h * h, z / h, 0.0, 0.0, i, t)


def stream_constants(
    model: SensorModel, regular, K1: float, rho_floor: float = 1e-8
) -> tuple[float, float]:
    """Return ``(L, rho)`` for the sensor stream on the ball ``|w| <= K1``.

    ``rho`` is the smallest curvature ``H_i^2`` among regular agents. ``L``
    bounds ``|H_i (z - H_i w)|`` using a two-sided 99.9% noise quantile.
    """
    H = np.abs(model.H[list(regular)])
    rho = float(np.min(H**2))
    if rho < rho_floor:
        raise StreamConfigError(f"strong convexity modulus {rho:g} below floor")
    zq = H * abs(model.true_x) + model.noise_sigma * norm.ppf(0.5 + NOISE_QUANTILE / 2)
    L = float(np.max(H * (H * K1 + zq)))
    return L, rho


def step_size(t: int, rho: float) -> float:
    """``0`` at ``t = 0``, ``1/(rho t)`` afterwards."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    if t < 0:
        raise ValueError("t must be non-negative")
    return 0.0 if t == 0 else 1.0 / (rho * t)


# --------------------------------------------------------------------------
# synthetic streams


@dataclass(frozen=True)
class StreamConfig:
    kind: str = "synthetic-quadratic"
    K1: float = 100.0
    K2: float = 10.0
    rho: float = 1.0
    L: float | None = None
    seed: int = 0
    kink: float = 1.0  # largest |w - m| coefficient for synthetic-piecewise

    def __post_init__(self):
        if self.kind not in ("sensor", "synthetic-quadratic", "synthetic-piecewise"):
            raise StreamConfigError(f"unknown stream kind {self.kind!r}")
        if self.K2 > self.K1:
            raise StreamConfigError("K2 must not exceed K1")
        if self.rho <= 0:
            raise StreamConfigError("rho must be positive")
        if self.L is not None and self.L < self.rho * (self.K1 + self.K2):
            raise StreamConfigError("L < rho (K1 + K2) is inconsistent")
        if self.kind != "sensor" and self.L is not None and self.L < self.synthetic_lipschitz:
            raise StreamConfigError(
                f"L={self.L} below the synthetic gradient bound {self.synthetic_lipschitz}"
            )

    @property
    def max_kink(self) -> float:
        return self.kink if self.kind == "synthetic-piecewise" else 0.0

    @property
    def synthetic_lipschitz(self) -> float:
        # curvatures lie in [rho, 2 rho]
        return 2 * self.rho * (self.K1 + self.K2) + self.max_kink


@lru_cache(maxsize=4096)
def _agent_draws(seed: int, agent: int) -> tuple[float, float, float]:
    u = _rng(seed, SYNTHETIC_STREAM, agent).uniform(size=3)
    return float(u[0]), float(u[1]) * 2 * np.pi, float(u[2])


def synthetic_stream(config: StreamConfig, agent: int, t: int) -> CostFunction:
    """Quadratic (optionally plus ``|w - m|``) with minimiser ``K2 sin(t/10 + phase)``.

    Curvature lies in ``[rho, 2 rho]`` and is fixed per agent.
    """
    cu, phase, ku = _agent_draws(config.seed, agent)
    a = config.rho * (1.0 + cu)
    m = config.K2 * np.sin(t / 10.0 + phase)
    return CostFunction(a, float(m), config.max_kink * ku, 0.0, agent, t)


class SyntheticStream:
    def __init__(self, config: StreamConfig, n: int):
        self.config = config
        self.n = n
        draws = [_agent_draws(config.seed, i) for i in range(n)]
        self._a = np.array([config.rho * (1.0 + d[0]) for d in draws])
        self._phase = np.array([d[1] for d in draws])
        self._b = np.array([config.max_kink * d[2] for d in draws])

    def params(self, t: int):
        m = self.config.K2 * np.sin(t / 10.0 + self._phase)
        return self._a, m, self._b, np.zeros(self.n)

    def cost(self, i: int, t: int) -> CostFunction:
        return synthetic_stream(self.config, i, t)


class SensorStream:
    def __init__(self, model: SensorModel):
        self.model = model
        self.n = model.n

    def params(self, t: int):
        return self.model.params(t)

    def cost(self, i: int, t: int) -> CostFunction:
        return sensor_cost(self.model, i, t)


def cost_table(stream, agents, T: int) -> CostTable:
    """Stack parameters of rounds ``1..T`` for the given agents."""
    idx = np.asarray(list(agents), dtype=int)
    rows = [stream.params(t) for t in range(1, T + 1)]
    return CostTable(*(np.array([r[k][idx] for r in rows]) for k in range(4)))
