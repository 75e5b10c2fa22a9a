"""Static system configuration, topology and channel generation."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .hermitian import AntennaBlocks, block_diag, is_hermitian


class ConfigError(ValueError):
    pass


def db_to_linear(db: float) -> float:
    return float(10.0 ** (db / 10.0))


def _as_tuple(value, n: int, cast, name: str) -> tuple:
    if np.ndim(value) == 0:
        return tuple(cast(value) for _ in range(n))
    out = tuple(cast(v) for v in value)
    if len(out) != n:
        raise ConfigError(f"{name}: expected {n} entries, got {len(out)}")
    return out


@dataclass(frozen=True, eq=False)
class SystemConfig:
    """C-RAN downlink parameters.

    Scalars passed for per-RU or per-UE fields are broadcast. ``noise_cov``
    may be given as a scalar variance, a per-UE list of variances, or a
    per-UE list of Hermitian PD matrices. Powers are linear, normalised to
    the thermal noise.
    """

    num_rus: int
    num_ues: int
    ru_antennas: Sequence[int] | int = 1
    ue_antennas: Sequence[int] | int = 1
    fronthaul_capacity: Sequence[float] | float = 1.0
    power_limit: Sequence[float] | float = 100.0
    noise_cov: object = 1.0
    weights: Sequence[float] | float = 1.0
    streams: Sequence[int] | int | None = None
    pathloss_exponent: float = 3.0
    reference_distance: float = 50.0
    area_side: float = 500.0
    blocks: AntennaBlocks = field(init=False, repr=False)

    def __post_init__(self):
        nr, nu = int(self.num_rus), int(self.num_ues)
        if nr < 1 or nu < 1:
            raise ConfigError(f"num_rus and num_ues must be positive, got {nr}, {nu}")
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("num_rus", nr)
        set_("num_ues", nu)
        set_("ru_antennas", _as_tuple(self.ru_antennas, nr, int, "ru_antennas"))
        set_("ue_antennas", _as_tuple(self.ue_antennas, nu, int, "ue_antennas"))
        set_("fronthaul_capacity", _as_tuple(self.fronthaul_capacity, nr, float, "fronthaul_capacity"))
        set_("power_limit", _as_tuple(self.power_limit, nr, float, "power_limit"))
        set_("weights", _as_tuple(self.weights, nu, float, "weights"))
        n_r_total = sum(self.ru_antennas)
        if self.streams is None:
            # as many streams as the bound d_k <= min(n_R, n_U,k) allows
            set_("streams", tuple(min(n_r_total, m) for m in self.ue_antennas))
        else:
            set_("streams", _as_tuple(self.streams, nu, int, "streams"))
        set_("pathloss_exponent", float(self.pathloss_exponent))
        set_("reference_distance", float(self.reference_distance))
        set_("area_side", float(self.area_side))

        if any(n < 1 for n in self.ru_antennas) or any(n < 1 for n in self.ue_antennas):
            raise ConfigError("antenna counts must be positive")
        set_("blocks", AntennaBlocks(self.ru_antennas))
        n_r = self.blocks.total

        noise = self.noise_cov
        if np.ndim(noise) == 0 or (np.ndim(noise) == 1 and len(noise) == nu):
            var = _as_tuple(noise, nu, float, "noise_cov")
            covs = tuple(v * np.eye(m, dtype=complex) for v, m in zip(var, self.ue_antennas))
        else:
            if len(noise) != nu:
                raise ConfigError(f"noise_cov: expected {nu} matrices")
            covs = tuple(np.array(c, dtype=complex) for c in noise)
        for k, (c, m) in enumerate(zip(covs, self.ue_antennas)):
            if c.shape != (m, m) or not is_hermitian(c):
                raise ConfigError(f"noise_cov[{k}] must be a Hermitian {m}x{m} matrix")
            if np.linalg.eigvalsh(c)[0] <= 0:
                raise ConfigError(f"noise_cov[{k}] must be positive definite")
            c.setflags(write=False)
        set_("noise_cov", covs)

        for k, (d, m) in enumerate(zip(self.streams, self.ue_antennas)):
            if d < 1 or d > min(n_r, m):
                raise ConfigError(
                    f"streams[{k}]={d} violates the bound 1 <= d_k <= min(n_R={n_r}, n_U,k={m})"
                )
        if any(c <= 0 for c in self.fronthaul_capacity):
            raise ConfigError("fronthaul_capacity must be > 0 for every RU")
        if any(p <= 0 for p in self.power_limit):
            raise ConfigError("power_limit must be > 0 for every RU")
        if any(w < 0 for w in self.weights):
            raise ConfigError("weights must be >= 0")
        if self.area_side <= 0:
            raise ConfigError(f"area_side must be > 0, got {self.area_side}")
        if self.reference_distance <= 0:
            raise ConfigError("reference_distance must be > 0")

    @property
    def n_r(self) -> int:
        return self.blocks.total

    def with_power_db(self, power_db: float) -> "SystemConfig":
        return self.replace(power_limit=db_to_linear(power_db))

    def with_num_ues(self, num_ues: int) -> "SystemConfig":
        """Resize the UE population by replicating UE 0."""
        return self.replace(
            num_ues=num_ues,
            ue_antennas=self.ue_antennas[0],
            weights=self.weights[0],
            streams=self.streams[0],
            noise_cov=[self.noise_cov[0]] * num_ues,
        )

    def replace(self, **changes) -> "SystemConfig":
        kw = {
            name: getattr(self, name)
            for name in (
                "num_rus", "num_ues", "ru_antennas", "ue_antennas", "fronthaul_capacity",
                "power_limit", "noise_cov", "weights", "streams", "pathloss_exponent",
                "reference_distance", "area_side",
            )
        }
        kw.update(changes)
        return SystemConfig(**kw)

    def __eq__(self, other):
        if not isinstance(other, SystemConfig):
            return NotImplemented
        scalars = (
            "num_rus", "num_ues", "ru_antennas", "ue_antennas", "fronthaul_capacity",
            "power_limit", "weights", "streams", "pathloss_exponent",
            "reference_distance", "area_side",
        )
        if any(getattr(self, s) != getattr(other, s) for s in scalars):
            return False
        return all(np.array_equal(a, b) for a, b in zip(self.noise_cov, other.noise_cov))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """One topology and its channels.

    ``H[k]`` is UE k's stacked channel ``[H_k1 ... H_kN]`` of shape
    ``(n_U,k, n_R)``.
    """

    ru_positions: np.ndarray
    ue_positions: np.ndarray
    H: tuple[np.ndarray, ...]
    blocks: AntennaBlocks
    seed: int | None = None

    def channel(self, k: int, i: int) -> np.ndarray:
        off = self.blocks.offsets
        return self.H[k][:, off[i]:off[i + 1]]

    def eavesdropper_stack(self, k: int) -> np.ndarray:
        """Rows of every ``H_l``, ``l != k``, stacked in UE order."""
        others = [self.H[l] for l in range(len(self.H)) if l != k]
        if not others:
            return np.zeros((0, self.blocks.total), dtype=complex)
        return np.vstack(others)

    def eavesdropper_noise(self, config: SystemConfig, k: int) -> np.ndarray:
        others = [config.noise_cov[l] for l in range(config.num_ues) if l != k]
        if not others:
            return np.zeros((0, 0), dtype=complex)
        return block_diag(others)

    def digest(self) -> str:
        h = hashlib.sha256()
        for a in (self.ru_positions, self.ue_positions, *self.H):
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()[:16]


def sample_topology(config: SystemConfig, rng: np.random.Generator):
    """Uniform RU and UE positions in ``[0, area_side]^2``."""
    ru = rng.uniform(0.0, config.area_side, size=(config.num_rus, 2))
    ue = rng.uniform(0.0, config.area_side, size=(config.num_ues, 2))
    return ru, ue


def path_loss(d, config: SystemConfig | None = None, *, exponent: float | None = None,
              reference_distance: float | None = None):
    """Linear gain ``1 / (1 + (d / d0)^alpha)``."""
    alpha = exponent if exponent is not None else config.pathloss_exponent
    d0 = reference_distance if reference_distance is not None else config.reference_distance
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("distance must be >= 0")
    out = 1.0 / (1.0 + (d / d0) ** alpha)
    return float(out) if out.ndim == 0 else out


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """CN(0, 1) samples: real and imaginary parts i.i.d. N(0, 1/2)."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def sample_channels(config: SystemConfig, positions, rng: np.random.Generator,
                    seed: int | None = None) -> ChannelRealization:
    ru, ue = (np.asarray(p, dtype=float) for p in positions)
    if ru.shape != (config.num_rus, 2) or ue.shape != (config.num_ues, 2):
        raise ConfigError("positions do not match the configured RU/UE counts")
    dist = np.linalg.norm(ue[:, None, :] - ru[None, :, :], axis=-1)
    gain = path_loss(dist, config)
    gain = np.atleast_2d(gain)
    H = []
    for k in range(config.num_ues):
        blocks = [
            np.sqrt(gain[k, i]) * complex_gaussian(rng, (config.ue_antennas[k], config.ru_antennas[i]))
            for i in range(config.num_rus)
        ]
        H.append(np.hstack(blocks))
    return ChannelRealization(ru, ue, tuple(H), config.blocks, seed)


def draw_realization(config: SystemConfig, seed) -> ChannelRealization:
    """Topology plus channels from a single seed (int or SeedSequence)."""
    rng = np.random.default_rng(seed)
    positions = sample_topology(config, rng)
    return sample_channels(config, positions, rng, seed=seed if isinstance(seed, int) else None)


def fixed_channels(config: SystemConfig, H: Sequence[np.ndarray]) -> ChannelRealization:
    """Wrap user-supplied stacked channels (no geometry)."""
    H = tuple(np.atleast_2d(np.asarray(h, dtype=complex)) for h in H)
    for k, h in enumerate(H):
        if h.shape != (config.ue_antennas[k], config.n_r):
            raise ConfigError(f"H[{k}] has shape {h.shape}, expected {(config.ue_antennas[k], config.n_r)}")
    zeros = lambda n: np.zeros((n, 2))  # noqa: E731
    return ChannelRealization(zeros(config.num_rus), zeros(config.num_ues), H, config.blocks)


__all__ = [
    "ConfigError", "SystemConfig", "ChannelRealization", "sample_topology", "path_loss",
    "sample_channels", "draw_realization", "fixed_channels", "db_to_linear", "complex_gaussian",
]
