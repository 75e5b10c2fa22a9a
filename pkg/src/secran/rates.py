"""Secrecy/non-secrecy rates, fronthaul usage, power and CCCP surrogates.

All rates are in bits/s/Hz and are computed from the transmit covariances
``R_k = A_k A_k^H``; precoders only appear after rank reduction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .hermitian import (
    AntennaBlocks,
    DimensionMismatch,
    block_diag,
    block_submatrix,
    hermitize,
    is_psd,
    logdet2,
    phi,
    varphi,
)
from .system import ChannelRealization, SystemConfig


@dataclass(eq=False)
class DesignVariables:
    """Transmit covariances ``R`` (shape ``(N_U, n_R, n_R)``), quantization
    noise covariance ``Omega`` and per-RU artificial-noise blocks."""

    R: np.ndarray
    Omega: np.ndarray
    phi_blocks: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        self.R = np.asarray(self.R, dtype=complex)
        self.Omega = np.asarray(self.Omega, dtype=complex)
        if self.R.ndim != 3 or self.R.shape[1:] != self.Omega.shape:
            raise DimensionMismatch(f"R {self.R.shape} incompatible with Omega {self.Omega.shape}")
        if self.phi_blocks is not None:
            self.phi_blocks = tuple(np.asarray(b, dtype=complex) for b in self.phi_blocks)
            if sum(b.shape[0] for b in self.phi_blocks) != self.n_r:
                raise DimensionMismatch("artificial-noise blocks do not tile n_R")

    @property
    def n_r(self) -> int:
        return self.Omega.shape[0]

    @property
    def num_ues(self) -> int:
        return self.R.shape[0]

    @property
    def Phi(self) -> np.ndarray:
        if self.phi_blocks is None:
            return np.zeros_like(self.Omega)
        return block_diag(self.phi_blocks)

    @property
    def R_sum(self) -> np.ndarray:
        return self.R.sum(axis=0)

    @classmethod
    def zeros(cls, config: SystemConfig) -> "DesignVariables":
        n = config.n_r
        return cls(np.zeros((config.num_ues, n, n), dtype=complex), np.zeros((n, n), dtype=complex))

    def copy(self) -> "DesignVariables":
        blocks = None if self.phi_blocks is None else tuple(b.copy() for b in self.phi_blocks)
        return DesignVariables(self.R.copy(), self.Omega.copy(), blocks)

    def is_valid(self, blocks: AntennaBlocks | None = None, atol: float = 1e-9) -> bool:
        mats = [*self.R, self.Omega]
        if self.phi_blocks is not None:
            mats.extend(self.phi_blocks)
            if blocks is not None and tuple(b.shape[0] for b in self.phi_blocks) != blocks.block_sizes:
                return False
        return all(is_psd(M, atol=atol) for M in mats)


@dataclass
class RateReport:
    f: np.ndarray
    secrecy_rate: np.ndarray
    nonsecrecy_rate: np.ndarray
    fronthaul_usage: dict[tuple[int, ...], float]
    per_ru_power: np.ndarray
    weighted_objective: float
    weighted_nonsecrecy: float = 0.0
    extras: dict = field(default_factory=dict)

    @property
    def secrecy_sum_rate(self) -> float:
        return float(np.sum(self.secrecy_rate))

    @property
    def nonsecrecy_sum_rate(self) -> float:
        return float(np.sum(self.nonsecrecy_rate))


def all_subsets(num_rus: int) -> list[tuple[int, ...]]:
    """Every non-empty RU subset, by size then lexicographically."""
    return [s for r in range(1, num_rus + 1) for s in combinations(range(num_rus), r)]


def _sandwich(H: np.ndarray, X: np.ndarray) -> np.ndarray:
    return hermitize(H @ X @ H.conj().T)


def received_noise_cov(vars: DesignVariables, H: np.ndarray, noise: np.ndarray,
                       exclude_ue: int | None = None) -> np.ndarray:
    """Interference-plus-noise covariance seen through channel ``H``."""
    R = vars.R
    others = [l for l in range(R.shape[0]) if l != exclude_ue]
    X = vars.Omega + vars.Phi
    if others:
        X = X + R[others].sum(axis=0)
    return _sandwich(H, X) + noise


def effective_noise_cov(vars: DesignVariables, config: SystemConfig, channels: ChannelRealization,
                        k: int, exclude_ue: int | None = None) -> np.ndarray:
    if vars.n_r != config.n_r:
        raise DimensionMismatch(f"variables have n_R={vars.n_r}, config has {config.n_r}")
    return received_noise_cov(vars, channels.H[k], config.noise_cov[k], exclude_ue)


def eavesdropper_rate(vars: DesignVariables, config: SystemConfig, channels: ChannelRealization,
                      k: int) -> float:
    """``I(s_k; y_kbar)`` for the cooperating stack of all other UEs."""
    Hb = channels.eavesdropper_stack(k)
    if Hb.shape[0] == 0:
        return 0.0
    Nb = channels.eavesdropper_noise(config, k)
    return phi(_sandwich(Hb, vars.R[k]), received_noise_cov(vars, Hb, Nb, exclude_ue=k))


def nonsecrecy_rate(vars: DesignVariables, config: SystemConfig, channels: ChannelRealization,
                    k: int) -> float:
    Hk = channels.H[k]
    return phi(_sandwich(Hk, vars.R[k]), effective_noise_cov(vars, config, channels, k, exclude_ue=k))


def secrecy_rate_fk(vars: DesignVariables, config: SystemConfig, channels: ChannelRealization,
                    k: int) -> float:
    """Unclipped secrecy rate; with a single UE the eavesdropper term is empty."""
    return nonsecrecy_rate(vars, config, channels, k) - eavesdropper_rate(vars, config, channels, k)


def fronthaul_usage_gS(vars: DesignVariables, blocks: AntennaBlocks, S: Iterable[int]) -> float:
    S = tuple(S)
    total = vars.R_sum + vars.Omega
    usage = sum(logdet2(block_submatrix(total, blocks, (i,))) for i in S)
    return usage - logdet2(block_submatrix(vars.Omega, blocks, S))


def per_ru_power(vars: DesignVariables, blocks: AntennaBlocks, i: int) -> float:
    total = vars.R_sum + vars.Omega + vars.Phi
    return float(np.trace(block_submatrix(total, blocks, (i,))).real)


def weighted_secrecy_objective(vars: DesignVariables, config: SystemConfig,
                               channels: ChannelRealization, clipped: bool = True) -> float:
    f = np.array([secrecy_rate_fk(vars, config, channels, k) for k in range(config.num_ues)])
    if clipped:
        f = np.maximum(f, 0.0)
    return float(np.dot(config.weights, f))


def weighted_nonsecrecy_objective(vars: DesignVariables, config: SystemConfig,
                                  channels: ChannelRealization) -> float:
    r = [nonsecrecy_rate(vars, config, channels, k) for k in range(config.num_ues)]
    return float(np.dot(config.weights, r))


def smooth_objective(vars: DesignVariables, config: SystemConfig, channels: ChannelRealization,
                     secure: bool = True) -> float:
    """Objective tracked by CCCP: unclipped weighted secrecy rate, or the
    weighted non-secrecy rate for the non-secure design."""
    if secure:
        return weighted_secrecy_objective(vars, config, channels, clipped=False)
    return weighted_nonsecrecy_objective(vars, config, channels)


def _covariances(vars: DesignVariables, H: np.ndarray, noise: np.ndarray, k: int):
    """(total, interference) covariances at a receiver with channel ``H``."""
    interference = received_noise_cov(vars, H, noise, exclude_ue=k)
    return interference + _sandwich(H, vars.R[k]), interference


def surrogate_fk_tilde(new: DesignVariables, old: DesignVariables, config: SystemConfig,
                       channels: ChannelRealization, k: int, secure: bool = True) -> float:
    """Concave minorizer of ``f_k`` at ``old``.

    The concave log-det terms are kept exact and the convex ones are
    replaced by their tangent expansion around ``old``. With
    ``secure=False`` the eavesdropper terms are dropped.
    """
    Hk, Nk = channels.H[k], config.noise_cov[k]
    T_new, I_new = _covariances(new, Hk, Nk, k)
    _, I_old = _covariances(old, Hk, Nk, k)
    value = logdet2(T_new) - varphi(I_new, I_old)
    Hb = channels.eavesdropper_stack(k)
    if secure and Hb.shape[0]:
        Nb = channels.eavesdropper_noise(config, k)
        Tb_new, Ib_new = _covariances(new, Hb, Nb, k)
        Tb_old, _ = _covariances(old, Hb, Nb, k)
        value += logdet2(Ib_new) - varphi(Tb_new, Tb_old)
    return float(value)


def surrogate_gS_tilde(new: DesignVariables, old: DesignVariables, blocks: AntennaBlocks,
                       S: Iterable[int]) -> float:
    """Convex majorizer of ``g_S`` at ``old``."""
    S = tuple(S)
    tot_new = new.R_sum + new.Omega
    tot_old = old.R_sum + old.Omega
    lin = sum(
        varphi(block_submatrix(tot_new, blocks, (i,)), block_submatrix(tot_old, blocks, (i,)))
        for i in S
    )
    return float(lin - logdet2(block_submatrix(new.Omega, blocks, S)))


def evaluate_all(vars: DesignVariables, config: SystemConfig, channels: ChannelRealization,
                 subsets: Sequence[tuple[int, ...]] | None = None) -> RateReport:
    """Fill a :class:`RateReport`. Fronthaul usage is reported for every
    non-empty subset unless ``subsets`` is given; it is inf where Omega is
    singular on the subset."""
    K = config.num_ues
    nonsec = np.array([nonsecrecy_rate(vars, config, channels, k) for k in range(K)])
    eaves = np.array([eavesdropper_rate(vars, config, channels, k) for k in range(K)])
    f = nonsec - eaves
    secrecy = np.maximum(f, 0.0)
    usage = {}
    for S in subsets if subsets is not None else all_subsets(config.num_rus):
        try:
            usage[S] = fronthaul_usage_gS(vars, config.blocks, S)
        except ValueError:
            usage[S] = float("inf") if np.any(vars.R_sum) else 0.0
    power = np.array([per_ru_power(vars, config.blocks, i) for i in range(config.num_rus)])
    w = np.asarray(config.weights)
    return RateReport(
        f=f,
        secrecy_rate=secrecy,
        nonsecrecy_rate=nonsec,
        fronthaul_usage=usage,
        per_ru_power=power,
        weighted_objective=float(w @ secrecy),
        weighted_nonsecrecy=float(w @ nonsec),
    )
