"""Multi-cell layouts on a wrap-around torus and their large-scale fading.

Cells are equal squares arranged in a ``rows x cols`` grid (square when ``L``
is a perfect square, otherwise the most square factorization of ``L``).  Each
BS sits at the centre of its cell; the edges of the coverage area wrap around
so every BS sees the same interference geometry.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

# -96 dBm expressed in mW
DEFAULT_NOISE_MW = 10.0 ** (-96.0 / 10.0)


class ConfigError(ValueError):
    """Raised when a system or experiment configuration is inconsistent."""


@dataclass
class SystemConfig:
    """System constants for one multi-cell network.

    Powers and noise variances are in mW, lengths in km, areas in km².
    ``tau_p`` defaults to ``K``, ``p_max_dl`` to ``K * p_max_ul`` and the pilot
    symbol power ``pilot_power`` to ``p_max_ul``.
    The per-user weights default to one in both directions.
    """

    L: int = 4
    K: int = 4
    M: int = 32
    tau_c: int = 200
    tau_p: int | None = None
    gamma_ul: float = 0.5
    gamma_dl: float = 0.5
    sigma2_ul: float = DEFAULT_NOISE_MW
    sigma2_dl: float = DEFAULT_NOISE_MW
    p_max_ul: float = 200.0
    p_max_dl: float | None = None
    mu: float = 0.5
    pilot_power: float | None = None
    area_km2: float = 0.5
    min_dist_km: float = 0.035
    shadow_std_db: float = 7.0
    w_ul: list | None = None
    w_dl: list | None = None

    def __post_init__(self):
        if self.tau_p is None:
            self.tau_p = self.K
        if self.p_max_dl is None:
            self.p_max_dl = self.K * self.p_max_ul
        if self.pilot_power is None:
            self.pilot_power = self.p_max_ul
        if self.w_ul is None:
            self.w_ul = [[1.0] * self.K for _ in range(self.L)]
        if self.w_dl is None:
            self.w_dl = [[1.0] * self.K for _ in range(self.L)]
        self.w_ul = np.asarray(self.w_ul, dtype=float).tolist()
        self.w_dl = np.asarray(self.w_dl, dtype=float).tolist()
        self.validate()

    @property
    def weights_ul(self) -> np.ndarray:
        return np.asarray(self.w_ul, dtype=float)

    @property
    def weights_dl(self) -> np.ndarray:
        return np.asarray(self.w_dl, dtype=float)

    @property
    def prelog(self) -> float:
        """Fraction of the coherence block left for data."""
        return 1.0 - self.tau_p / self.tau_c

    @property
    def grid(self) -> tuple[int, int]:
        return grid_shape(self.L)

    @property
    def cell_side_km(self) -> float:
        return math.sqrt(self.area_km2 / self.L)

    @property
    def torus_km(self) -> tuple[float, float]:
        """Width and height of the wrap-around area."""
        rows, cols = self.grid
        return cols * self.cell_side_km, rows * self.cell_side_km

    def validate(self):
        L, K = self.L, self.K
        if min(L, K, self.M) < 1:
            raise ConfigError("L, K and M must be positive")
        if not K <= self.tau_p <= K * L:
            raise ConfigError(f"need K <= tau_p <= K*L, got tau_p={self.tau_p}")
        if not self.tau_p < self.tau_c:
            raise ConfigError("tau_p must be shorter than tau_c")
        if self.gamma_ul < 0 or self.gamma_dl < 0:
            raise ConfigError("data fractions must be nonnegative")
        if not math.isclose(self.gamma_ul + self.gamma_dl, 1.0, abs_tol=1e-12):
            raise ConfigError("gamma_ul + gamma_dl must equal 1")
        if not 0.0 <= self.mu < 1.0:
            raise ConfigError(f"mu must lie in [0, 1), got {self.mu}")
        for name in ("sigma2_ul", "sigma2_dl", "p_max_ul", "p_max_dl", "pilot_power", "area_km2"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.min_dist_km < 0 or self.shadow_std_db < 0:
            raise ConfigError("min_dist_km and shadow_std_db must be nonnegative")
        if self.min_dist_km >= self.cell_side_km / 2:
            raise ConfigError("min_dist_km leaves no room for users in a cell")
        for name in ("w_ul", "w_dl"):
            w = np.asarray(getattr(self, name))
            if w.shape != (L, K):
                raise ConfigError(f"{name} must have shape ({L}, {K})")
            if np.any(w < 0):
                raise ConfigError(f"{name} must be nonnegative")
        if np.any((self.weights_ul == 0) & (self.weights_dl == 0)):
            raise ConfigError("every user needs a positive UL or DL weight")

    def replace(self, **changes) -> "SystemConfig":
        """Copy with some fields changed; derived defaults are recomputed."""
        data = asdict(self)
        if "K" in changes or "L" in changes:
            derived = ["tau_p", "w_ul", "w_dl"]
            if self.p_max_dl == self.K * self.p_max_ul:
                derived.append("p_max_dl")
            for name in derived:
                data[name] = None
        data.update(changes)
        return SystemConfig(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SystemConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown system fields: {sorted(unknown)}")
        return cls(**data)


def grid_shape(L: int) -> tuple[int, int]:
    """Most square ``(rows, cols)`` factorization of ``L`` with rows <= cols."""
    rows = int(math.isqrt(L))
    while L % rows:
        rows -= 1
    return rows, L // rows


@dataclass
class NetworkScenario:
    """One drop of users with every link's large-scale statistics.

    ``beta[l, k, j]`` and ``theta[l, k, j]`` describe the link from user ``k``
    of cell ``l`` to BS ``j``.
    """

    config: SystemConfig
    bs_pos: np.ndarray
    user_pos: np.ndarray
    beta: np.ndarray
    theta: np.ndarray
    seed: int
    distance: np.ndarray = field(repr=False, default=None)

    def to_json(self) -> str:
        return json.dumps(scenario_to_dict(self))

    @classmethod
    def from_json(cls, text: str) -> "NetworkScenario":
        return scenario_from_dict(json.loads(text))


def torus_displacement(a, b, size) -> np.ndarray:
    """Shortest displacement vector from ``a`` to ``b`` on a torus.

    ``size`` is either the side of a square torus or a ``(width, height)``
    pair.  Broadcasts over leading dimensions of ``a`` and ``b``.
    """
    size = np.broadcast_to(np.asarray(size, dtype=float), (2,))
    d = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    return d - size * np.round(d / size)


def torus_distance(a, b, side_km) -> np.ndarray | float:
    """Euclidean distance between ``a`` and ``b`` on the wrap-around torus."""
    d = np.linalg.norm(torus_displacement(a, b, side_km), axis=-1)
    return float(d) if np.ndim(d) == 0 else d


def pathloss_db(d_km, z_db=0.0):
    """Large-scale fading in dB: ``-148.1 - 37.6 log10(d) + z``."""
    d_km = np.asarray(d_km, dtype=float)
    if np.any(d_km <= 0):
        raise ValueError("distance must be positive")
    out = -148.1 - 37.6 * np.log10(d_km) + z_db
    return float(out) if np.ndim(out) == 0 else out


def db_to_linear(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def generate_scenario(config: SystemConfig, seed: int) -> NetworkScenario:
    """Drop ``K`` users uniformly in every cell and compute all link statistics.

    Users closer than ``min_dist_km`` to their serving BS are redrawn.
    Shadowing is drawn independently for every user-BS link, and the
    incidence angle is measured from the +x axis (the array boresight of
    every BS) along the shortest torus displacement from the BS to the user.
    """
    config.validate()
    rng = np.random.default_rng(seed)
    L, K = config.L, config.K
    rows, cols = config.grid
    side = config.cell_side_km
    size = config.torus_km

    cell_rc = np.array([(l // cols, l % cols) for l in range(L)], dtype=float)
    corners = cell_rc[:, ::-1] * side  # (x, y) of the lower-left corner
    bs_pos = corners + side / 2

    user_pos = np.empty((L, K, 2))
    for l in range(L):
        for k in range(K):
            while True:
                p = corners[l] + rng.uniform(0.0, side, size=2)
                if torus_distance(bs_pos[l], p, size) >= config.min_dist_km:
                    break
            user_pos[l, k] = p

    # displacement from BS j to user (l, k)
    disp = torus_displacement(bs_pos[None, None, :, :], user_pos[:, :, None, :], size)
    dist = np.linalg.norm(disp, axis=-1)
    shadow = rng.normal(0.0, config.shadow_std_db, size=(L, K, L))
    beta = db_to_linear(pathloss_db(dist, shadow))
    theta = np.arctan2(disp[..., 1], disp[..., 0])
    theta = np.where(theta >= np.pi, theta - 2 * np.pi, theta)

    return NetworkScenario(config=config, bs_pos=bs_pos, user_pos=user_pos,
                           beta=beta, theta=theta, seed=int(seed), distance=dist)


def scenario_to_dict(scenario: NetworkScenario) -> dict:
    return {
        "config": scenario.config.to_dict(),
        "bs_pos": scenario.bs_pos.tolist(),
        "user_pos": scenario.user_pos.tolist(),
        "beta": scenario.beta.tolist(),
        "theta": scenario.theta.tolist(),
        "seed": scenario.seed,
    }


def scenario_from_dict(data: dict) -> NetworkScenario:
    config = SystemConfig.from_dict(data["config"])
    bs_pos = np.asarray(data["bs_pos"], dtype=float)
    user_pos = np.asarray(data["user_pos"], dtype=float)
    dist = torus_distance(bs_pos[None, None, :, :], user_pos[:, :, None, :], config.torus_km)
    return NetworkScenario(
        config=config,
        bs_pos=bs_pos,
        user_pos=user_pos,
        beta=np.asarray(data["beta"], dtype=float),
        theta=np.asarray(data["theta"], dtype=float),
        seed=int(data["seed"]),
        distance=dist,
    )
