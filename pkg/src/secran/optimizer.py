"""Difference-of-convex (CCCP) design of precoding and fronthaul quantization.

Each outer iteration linearizes the convex log-det terms of the secrecy
rates and the concave terms of the fronthaul usage around the current
point, then solves the resulting convex problem with a log-barrier
method (damped Newton in real Hermitian coordinates).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import _kernels
from .hermitian import LN2, hermitian_basis, hermitize, leading_eigenpairs
from .rates import DesignVariables, all_subsets
from .system import ChannelRealization, SystemConfig

log = logging.getLogger(__name__)

EPS_FLOOR = 1e-9
INIT_SLACK = 0.95
# largest signal-to-quantization ratio rho/omega used at initialization
INIT_MAX_RATIO = 1e6
VIOLATION_TOL = 1e-6
STATIONARITY_TOL = 1e-6
# barrier duality gap (nats) at which warm-started subproblems begin
WARM_START_GAP = 1e-2


class InfeasibleConfig(ValueError):
    pass


class SolverStalled(RuntimeError):
    pass


@dataclass(frozen=True)
class StrategyFlags:
    """``secure``: penalise eavesdroppers in the objective.
    ``multivariate``: full (correlated) quantization noise covariance."""

    secure: bool = True
    multivariate: bool = True

    @property
    def label(self) -> str:
        return f"{'secure' if self.secure else 'nonsecure'}-{'multivariate' if self.multivariate else 'p2p'}"

    @classmethod
    def from_label(cls, label: str) -> "StrategyFlags":
        try:
            sec, comp = label.strip().lower().split("-", 1)
        except ValueError:
            raise ValueError(f"bad strategy label {label!r}") from None
        if sec not in ("secure", "nonsecure") or comp not in ("multivariate", "p2p"):
            raise ValueError(f"bad strategy label {label!r}; expected (secure|nonsecure)-(multivariate|p2p)")
        return cls(secure=sec == "secure", multivariate=comp == "multivariate")


ALL_STRATEGIES = (
    StrategyFlags(True, True),
    StrategyFlags(True, False),
    StrategyFlags(False, True),
    StrategyFlags(False, False),
)


@dataclass
class SubproblemSolution:
    new_vars: DesignVariables
    objective: float
    inner_iterations: int
    stationarity_residual: float
    feasibility_residual: float
    stalled: bool = False
    kept_old: bool = False


@dataclass
class CcCpTrace:
    objective: list[float] = field(default_factory=list)
    max_violation: list[float] = field(default_factory=list)
    step_norm: list[float] = field(default_factory=list)
    inner_iterations: list[int] = field(default_factory=list)
    converged: bool = False
    stalled: bool = False

    @property
    def iterations(self) -> int:
        return len(self.step_norm)


@dataclass
class FeasibilityReport:
    fronthaul_slack: dict[tuple[int, ...], float]
    power_slack: np.ndarray
    tol: float = VIOLATION_TOL

    @property
    def max_violation(self) -> float:
        worst = [-s for s in self.fronthaul_slack.values()] + list(-self.power_slack)
        return max(0.0, max(worst))

    @property
    def violations(self) -> list[str]:
        out = [f"fronthaul {S}: {-s:.3e}" for S, s in self.fronthaul_slack.items() if s < -self.tol]
        out += [f"power RU {i}: {-s:.3e}" for i, s in enumerate(self.power_slack) if s < -self.tol]
        return out

    @property
    def feasible(self) -> bool:
        return not self.violations


class _TermSet:
    """Collects log-det terms ``log det(M0 + H X_mask H^H)`` and pads them
    into the arrays the kernels expect."""

    def __init__(self, n: int, n_groups: int):
        self.n = n
        self.n_groups = n_groups
        self._items = []

    def add(self, H, M0, mask) -> int:
        self._items.append((np.asarray(H, complex), np.asarray(M0, complex), np.asarray(mask, float)))
        return len(self._items) - 1

    def __len__(self):
        return len(self._items)

    def freeze(self):
        Q = len(self._items)
        m = max((H.shape[0] for H, _, _ in self._items), default=1)
        m = max(m, 1)
        Hs = np.zeros((Q, m, self.n), dtype=complex)
        M0 = np.zeros((Q, m, m), dtype=complex)
        masks = np.zeros((Q, self.n_groups))
        for q, (H, C, mask) in enumerate(self._items):
            r = H.shape[0]
            Hs[q, :r] = H
            M0[q, :r, :r] = C
            M0[q, r:, r:] = np.eye(m - r)
            masks[q] = mask
        self.Hs, self.M0, self.masks = Hs, M0, masks
        return self


class CccpProblem:
    """Precomputed structure of the design problem for one channel draw
    and one strategy. Variables are packed as ``x[g, j]``: group ``g`` is
    ``R_g`` for ``g < N_U`` and ``Omega`` for ``g = N_U``; ``j`` indexes
    the Hermitian basis."""

    def __init__(self, config: SystemConfig, channels: ChannelRealization, flags: StrategyFlags = StrategyFlags(),
                 *, gap_tol: float = 1e-8, newton_tol: float = 1e-10, max_newton: int = 400,
                 mu: float = 16.0):
        self.config = config
        self.mu = mu
        self.channels = channels
        self.flags = flags
        self.gap_tol = gap_tol
        self.newton_tol = newton_tol
        self.max_newton = max_newton

        K, n = config.num_ues, config.n_r
        blocks = config.blocks
        self.K, self.n = K, n
        self.G = K + 1
        self.basis, self.dual = hermitian_basis(n)
        self.J = self.basis.shape[0]
        ones = np.ones(self.G)
        omega_only = np.zeros(self.G)
        omega_only[K] = 1.0

        def without(k):
            m = ones.copy()
            m[k] = 0.0
            return m

        self.subsets = all_subsets(config.num_rus) if flags.multivariate else [(i,) for i in range(config.num_rus)]
        w = np.asarray(config.weights)

        # exact (concave) objective terms, Omega_S terms, PSD barriers on R_k
        ex = _TermSet(n, self.G)
        obj_idx, obj_coef = [], []
        # terms linearized at the previous iterate
        li = _TermSet(n, self.G)
        lin_idx, lin_coef = [], []
        # exact evaluation of f_k: (T_k, I_k, Tbar_k, Ibar_k)
        ev = _TermSet(n, self.G)
        self._ev_rate = []

        for k in range(K):
            Hk, Nk = channels.H[k], config.noise_cov[k]
            Hb = channels.eavesdropper_stack(k)
            Nb = channels.eavesdropper_noise(config, k)
            has_eve = Hb.shape[0] > 0
            row = [ev.add(Hk, Nk, ones), ev.add(Hk, Nk, without(k))]
            row += [ev.add(Hb, Nb, ones), ev.add(Hb, Nb, without(k))] if has_eve else [-1, -1]
            self._ev_rate.append(row)
            if w[k] == 0.0:
                continue
            obj_idx.append(ex.add(Hk, Nk, ones))
            obj_coef.append(w[k])
            lin_idx.append(li.add(Hk, Nk, without(k)))
            lin_coef.append(-w[k])
            if flags.secure and has_eve:
                obj_idx.append(ex.add(Hb, Nb, without(k)))
                obj_coef.append(w[k])
                lin_idx.append(li.add(Hb, Nb, ones))
                lin_coef.append(-w[k])

        self._blk_idx = [li.add(blocks.selector((i,)), np.zeros((blocks.block_sizes[i],) * 2), ones)
                         for i in range(config.num_rus)]
        self._ev_blk = [ev.add(blocks.selector((i,)), np.zeros((blocks.block_sizes[i],) * 2), ones)
                        for i in range(config.num_rus)]
        self._omega_idx = []
        for S in self.subsets:
            E = blocks.selector(S)
            self._omega_idx.append(ex.add(E, np.zeros((E.shape[0],) * 2), omega_only))
        self._ev_omega = {}
        for S in all_subsets(config.num_rus):
            E = blocks.selector(S)
            self._ev_omega[S] = ev.add(E, np.zeros((E.shape[0],) * 2), omega_only)
        self._bar_idx = []
        for k in range(K):
            e = np.zeros(self.G)
            e[k] = 1.0
            self._bar_idx.append(ex.add(np.eye(n), np.zeros((n, n)), e))

        self.ex, self.li, self.ev = ex.freeze(), li.freeze(), ev.freeze()
        self.obj_idx = np.array(obj_idx, dtype=int)
        self.obj_coef = np.array(obj_coef, dtype=float)
        self.lin_idx = np.array(lin_idx, dtype=int)
        self.lin_coef = np.array(lin_coef, dtype=float)
        self.omega_idx = np.array(self._omega_idx, dtype=int)
        self.bar_idx = np.array(self._bar_idx, dtype=int)
        self.cap = np.array([sum(config.fronthaul_capacity[i] for i in S) for S in self.subsets]) * LN2

        # power: tr(block_i(sum_k R_k + Omega)) is linear in the diagonal coordinates
        off = blocks.offsets
        self.power_coef = np.zeros((config.num_rus, self.G, self.J))
        for i in range(config.num_rus):
            for a in range(off[i], off[i + 1]):
                self.power_coef[i, :, a] = 1.0
        self.power_coef = self.power_coef.reshape(config.num_rus, -1)
        self.power_cap = np.asarray(config.power_limit, dtype=float)

        free = np.ones((self.G, self.J), dtype=bool)
        if not flags.multivariate:
            same_block = np.zeros((n, n), dtype=bool)
            for i in range(config.num_rus):
                same_block[off[i]:off[i + 1], off[i]:off[i + 1]] = True
            for j in range(self.J):
                nz = np.abs(self.basis[j]) > 0
                if np.any(nz & ~same_block):
                    free[K, j] = False
        self.free = free.reshape(-1)

        # barrier parameter: sum of the barrier degrees
        self.degree = len(self.subsets) + config.num_rus + K * n

    # ---------------------------------------------------------------- packing
    def encode(self, vars: DesignVariables) -> np.ndarray:
        mats = np.concatenate([vars.R, vars.Omega[None]], axis=0)
        x = np.einsum("jab,gab->gj", self.dual.conj(), mats).real
        return x.reshape(-1) * self.free

    def matrices(self, x: np.ndarray) -> np.ndarray:
        X = np.einsum("gj,jab->gab", x.reshape(self.G, self.J), self.basis)
        return 0.5 * (X + np.conj(np.swapaxes(X, 1, 2)))

    def decode(self, x: np.ndarray) -> DesignVariables:
        X = self.matrices(x)
        return DesignVariables(X[: self.K].copy(), X[self.K].copy())

    def _expand(self, masks, grads):
        """Per-term gradients in full coordinates, ``(Q, G*J)``."""
        return (masks[:, :, None] * grads[:, None, :]).reshape(masks.shape[0], -1)

    # ---------------------------------------------------------- linearization
    def linearize(self, x_old: np.ndarray) -> dict:
        X = self.matrices(x_old)
        ld, g, _, ok = _kernels.logdet_derivs(X, self.li.masks, self.li.Hs, self.li.M0, self.basis)
        if not ok:
            raise ValueError("linearization point is not strictly feasible")
        c = self._expand(self.li.masks, g)
        const = ld - c @ x_old
        lin_obj = self.lin_coef @ c[self.lin_idx] if self.lin_idx.size else np.zeros_like(x_old)
        const_obj = float(self.lin_coef @ const[self.lin_idx]) if self.lin_idx.size else 0.0
        blk = np.array(self._blk_idx)
        sub_lin = np.zeros((len(self.subsets), x_old.size))
        sub_const = np.zeros(len(self.subsets))
        for s, S in enumerate(self.subsets):
            sub_lin[s] = c[blk[list(S)]].sum(axis=0)
            sub_const[s] = const[blk[list(S)]].sum()
        return dict(lin_obj=lin_obj, const_obj=const_obj, sub_lin=sub_lin, sub_const=sub_const)

    # ------------------------------------------------------------ evaluation
    def surrogate_objective(self, x: np.ndarray, lin: dict) -> float:
        """Weighted surrogate objective in nats (``-inf`` outside the domain)."""
        ld, ok = _kernels.logdet_values(self.matrices(x), self.ex.masks, self.ex.Hs, self.ex.M0)
        if not ok:
            return -np.inf
        return float(self.obj_coef @ ld[self.obj_idx] + lin["lin_obj"] @ x + lin["const_obj"])

    def _slacks(self, x, ld, lin):
        s = self.cap - lin["sub_const"] - lin["sub_lin"] @ x + ld[self.omega_idx]
        p = self.power_cap - self.power_coef @ x
        return s, p

    def barrier_value(self, x: np.ndarray, t: float, lin: dict) -> float:
        ld, ok = _kernels.logdet_values(self.matrices(x), self.ex.masks, self.ex.Hs, self.ex.M0)
        if not ok:
            return np.inf
        s, p = self._slacks(x, ld, lin)
        if np.any(s <= 0) or np.any(p <= 0):
            return np.inf
        F = self.obj_coef @ ld[self.obj_idx] + lin["lin_obj"] @ x + lin["const_obj"]
        return float(-t * F - np.log(s).sum() - np.log(p).sum() - ld[self.bar_idx].sum())

    def barrier_derivs(self, x: np.ndarray, t: float, lin: dict):
        ex = self.ex
        ld, g, K, ok = _kernels.logdet_derivs(self.matrices(x), ex.masks, ex.Hs, ex.M0, self.basis)
        if not ok:
            return np.inf, None, None
        s, p = self._slacks(x, ld, lin)
        if np.any(s <= 0) or np.any(p <= 0):
            return np.inf, None, None
        G, J = self.G, self.J
        F = self.obj_coef @ ld[self.obj_idx] + lin["lin_obj"] @ x + lin["const_obj"]
        value = -t * F - np.log(s).sum() - np.log(p).sum() - ld[self.bar_idx].sum()

        # objective and R_k barriers: coefficient-weighted log-det terms
        idx = np.concatenate([self.obj_idx, self.bar_idx])
        coef = np.concatenate([-t * self.obj_coef, -np.ones(self.bar_idx.size)])
        m = ex.masks[idx]
        grad = np.einsum("q,qg,qj->gj", coef, m, g[idx]).reshape(-1) - t * lin["lin_obj"]
        hess = np.einsum("q,qg,qh,qjl->gjhl", coef, m, m, K[idx]).reshape(G * J, G * J)

        # fronthaul constraints: -log(s_S)
        ds = -lin["sub_lin"] + self._expand(ex.masks[self.omega_idx], g[self.omega_idx])
        grad -= ds.T @ (1.0 / s)
        hess += (ds.T / s**2) @ ds
        om = slice(self.K * J, (self.K + 1) * J)
        hess[om, om] -= np.tensordot(1.0 / s, K[self.omega_idx], axes=1)

        # power constraints: -log(p_i)
        grad += self.power_coef.T @ (1.0 / p)
        hess += (self.power_coef.T / p**2) @ self.power_coef
        return float(value), grad, hess

    # ------------------------------------------------------------ inner solve
    def _newton_step(self, grad, hess):
        f = self.free
        gf = grad[f]
        Hf = hess[np.ix_(f, f)]
        d = np.sqrt(np.maximum(np.diag(Hf), 1e-300))
        Hs = Hf / d[:, None] / d[None, :]
        try:
            cf = scipy.linalg.cho_factor(Hs, check_finite=False)
            y = -scipy.linalg.cho_solve(cf, gf / d, check_finite=False)
        except (np.linalg.LinAlgError, ValueError):
            y = -np.linalg.lstsq(Hs, gf / d, rcond=None)[0]
        dxf = y / d
        dx = np.zeros_like(grad)
        dx[f] = dxf
        return dx, float(-gf @ dxf)

    def _center(self, x, t, lin, budget):
        """Damped Newton centering. Returns ``(x, lambda^2, steps, failed)``."""
        lam2 = np.inf
        steps = 0
        while True:
            if steps >= budget:
                return x, lam2, steps, True
            val, grad, hess = self.barrier_derivs(x, t, lin)
            if not np.isfinite(val):
                raise SolverStalled("centering started outside the barrier domain")
            dx, lam2 = self._newton_step(grad, hess)
            steps += 1
            # below this the barrier value cannot resolve the decrease
            if lam2 / 2.0 <= max(self.newton_tol, 1e-14 * abs(val)) or not np.isfinite(lam2):
                return x, lam2, steps, False
            step = 1.0
            while True:
                cand = x + step * dx
                vc = self.barrier_value(cand, t, lin)
                if vc <= val - 0.01 * step * lam2:
                    break
                step *= 0.5
                if step < 1e-9:
                    return x, lam2, steps, lam2 / (2.0 * t) > STATIONARITY_TOL
            x = cand

    def _solve_numpy(self, x_old, lin, t):
        x = x_old.copy()
        total = 0
        stalled = False
        residual = np.inf
        while True:
            try:
                x, lam2, steps, bad = self._center(x, t, lin, self.max_newton - total)
            except SolverStalled:
                return x, total, residual, True
            total += steps
            residual = lam2 / (2.0 * t)
            if bad:
                stalled = True
                log.debug("centering did not converge at t=%.3e (residual %.3e)", t, residual)
                if total >= self.max_newton:
                    break
            if self.degree / t <= self.gap_tol:
                break
            t *= self.mu
        return x, total, residual, stalled

    def _solve_numba(self, x_old, lin, t):
        ex = self.ex
        x, total, residual, stalled = _kernels.barrier_solve_numba(
            x_old, np.flatnonzero(self.free), float(t), float(self.mu), self.gap_tol,
            self.newton_tol, STATIONARITY_TOL, self.max_newton, float(self.degree),
            self.basis, self.G, ex.masks, ex.Hs, ex.M0, self.obj_idx, self.obj_coef,
            lin["lin_obj"], float(lin["const_obj"]), self.omega_idx, self.bar_idx, self.cap,
            lin["sub_const"], lin["sub_lin"], self.power_coef, self.power_cap,
        )
        return x, int(total), float(residual), bool(stalled)

    def solve_from(self, x_old: np.ndarray, *, t0: float | None = None) -> tuple:
        """Solve the convex subproblem linearized at ``x_old``.

        Returns ``(x_new, objective_nats, newton_steps, residual, stalled, kept_old)``
        where ``residual`` is the last centering error ``lambda^2 / (2 t)``
        in objective units.
        """
        lin = self.linearize(x_old)
        F_old = self.surrogate_objective(x_old, lin)
        t = t0 if t0 is not None else self.degree / max(1.0, abs(F_old))
        solve = self._solve_numba if _kernels.USE_NUMBA else self._solve_numpy
        x, total, residual, stalled = solve(x_old, lin, t)
        F_new = self.surrogate_objective(x, lin)
        kept_old = not (F_new >= F_old)
        if kept_old:
            x, F_new = x_old.copy(), F_old
        return x, F_new, total, residual, stalled, kept_old

    # ---------------------------------------------------------- exact metrics
    def exact_metrics(self, x: np.ndarray):
        """Smooth objective (bits), max violation of the exact constraints and
        per-UE unclipped secrecy / non-secrecy rates."""
        ld, ok = _kernels.logdet_values(self.matrices(x), self.ev.masks, self.ev.Hs, self.ev.M0)
        if not ok:
            return -np.inf, np.inf, None, None
        ld = ld / LN2
        nonsec = np.array([ld[r[0]] - ld[r[1]] for r in self._ev_rate])
        eve = np.array([ld[r[2]] - ld[r[3]] if r[2] >= 0 else 0.0 for r in self._ev_rate])
        f = nonsec - eve
        w = np.asarray(self.config.weights)
        obj = float(w @ (f if self.flags.secure else nonsec))
        viol = 0.0
        for S, q in self._ev_omega.items():
            gS = sum(ld[self._ev_blk[i]] for i in S) - ld[q]
            viol = max(viol, gS - sum(self.config.fronthaul_capacity[i] for i in S))
        power = self.power_coef @ x
        viol = max(viol, float(np.max(power - self.power_cap)))
        return obj, viol, f, nonsec


def absorb_artificial_noise(vars: DesignVariables) -> DesignVariables:
    """Move RU artificial noise into the quantization noise: ``(R, Omega + Phi, 0)``."""
    return DesignVariables(vars.R.copy(), hermitize(vars.Omega + vars.Phi), None)


def _singleton_ratio(Q_ii: np.ndarray, target_bits: float) -> float:
    """Largest ``r`` with ``log2 det(I + r Q_ii) <= target_bits`` (bisection)."""
    w = np.clip(np.linalg.eigvalsh(hermitize(Q_ii)), 0.0, None)
    f = lambda r: float(np.sum(np.log2(1.0 + r * w)))  # noqa: E731
    if f(1e12) <= target_bits:
        return 1e12
    lo, hi = 0.0, 1.0
    while f(hi) <= target_bits:
        lo, hi = hi, hi * 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) <= target_bits:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * hi:
            break
    return lo


def initialize_feasible(config: SystemConfig, channels: ChannelRealization | None,
                        rng: np.random.Generator) -> DesignVariables:
    """Strictly feasible start ``R_k = rho Q_k``, ``Omega = omega I``.

    ``Q_k`` are random unit-trace PD matrices. With ``Omega = omega I`` the
    fronthaul usage depends only on ``r = rho / omega`` and reduces to
    per-RU terms, so ``r`` is chosen to use 95% of every capacity and
    ``omega`` to use 95% of the tightest power budget.
    """
    from .hermitian import random_psd

    K, n = config.num_ues, config.n_r
    Q = np.stack([random_psd(rng, n) for _ in range(K)])
    Q /= np.trace(Q, axis1=1, axis2=2).real[:, None, None]
    Qsum = Q.sum(axis=0)
    off = config.blocks.offsets
    ratios = [
        _singleton_ratio(Qsum[off[i]:off[i + 1], off[i]:off[i + 1]], INIT_SLACK * config.fronthaul_capacity[i])
        for i in range(config.num_rus)
    ]
    # with generous fronthaul the power budget binds instead; the cap keeps
    # omega well above the floor
    r = min(min(ratios), INIT_MAX_RATIO)
    q_tr = [float(np.trace(Qsum[off[i]:off[i + 1], off[i]:off[i + 1]]).real) for i in range(config.num_rus)]
    omega = INIT_SLACK * min(
        P / (r * q + nb) for P, q, nb in zip(config.power_limit, q_tr, config.ru_antennas)
    )
    if omega < EPS_FLOOR:
        raise InfeasibleConfig(f"no feasible initialization (omega={omega:.3e} below floor)")
    return DesignVariables(r * omega * Q, omega * np.eye(n, dtype=complex))


def validate_feasibility(vars: DesignVariables, config: SystemConfig,
                         channels: ChannelRealization | None = None,
                         tol: float = VIOLATION_TOL) -> FeasibilityReport:
    """Exact fronthaul and power slacks for every subset / RU."""
    from .rates import fronthaul_usage_gS, per_ru_power

    slack = {}
    for S in all_subsets(config.num_rus):
        cap = sum(config.fronthaul_capacity[i] for i in S)
        try:
            slack[S] = cap - fronthaul_usage_gS(vars, config.blocks, S)
        except ValueError:
            slack[S] = -np.inf
    power = np.array([config.power_limit[i] - per_ru_power(vars, config.blocks, i)
                      for i in range(config.num_rus)])
    return FeasibilityReport(slack, power, tol)


def solve_subproblem(old: DesignVariables, config: SystemConfig, channels: ChannelRealization,
                     flags: StrategyFlags = StrategyFlags(), problem: CccpProblem | None = None
                     ) -> SubproblemSolution:
    """One convex step of the CCCP from ``old`` (artificial noise is absorbed first)."""
    prob = problem or CccpProblem(config, channels, flags)
    x_old = prob.encode(absorb_artificial_noise(old))
    x, F, steps, residual, stalled, kept = prob.solve_from(x_old)
    lin = prob.linearize(x_old)
    ld, _ = _kernels.logdet_values(prob.matrices(x), prob.ex.masks, prob.ex.Hs, prob.ex.M0)
    s, p = prob._slacks(x, ld, lin)
    feas = float(max(0.0, -np.min(s) / LN2, -np.min(p)))
    return SubproblemSolution(prob.decode(x), F / LN2, steps, residual, feas, stalled, kept)


def _floor_omega(prob: CccpProblem, x: np.ndarray) -> np.ndarray:
    """Keep Omega strictly PD before it becomes the next linearization point."""
    Om = prob.matrices(x)[prob.K]
    if np.linalg.eigvalsh(Om)[0] >= EPS_FLOOR:
        return x
    n = prob.n
    bump = np.zeros((prob.G, prob.J))
    bump[prob.K, :n] = EPS_FLOOR
    return x + bump.reshape(-1)


def run_cccp(config: SystemConfig, channels: ChannelRealization, flags: StrategyFlags = StrategyFlags(),
             *, rng: np.random.Generator | int | None = 0, init: DesignVariables | None = None,
             max_iter: int = 100, rtol: float = 1e-4, abs_floor: float = 1e-2,
             problem: CccpProblem | None = None, callback=None):
    """Run the CCCP iterations.

    Stops when the smooth objective improves by less than
    ``rtol * max(|objective|, abs_floor)`` in one iteration, or after
    ``max_iter`` iterations. Returns ``(vars, trace)`` with ``Phi = 0``.
    ``callback``, if given, receives every iterate (starting point included)
    as :class:`DesignVariables`.
    """
    prob = problem or CccpProblem(config, channels, flags)
    if init is None:
        init = initialize_feasible(config, channels, np.random.default_rng(rng))
    x = prob.encode(absorb_artificial_noise(init))
    if not flags.multivariate:
        # block-diagonal projection is exact for a feasible p2p start
        x = x * prob.free
    obj, viol, _, _ = prob.exact_metrics(x)
    trace = CcCpTrace()
    trace.objective.append(obj)
    trace.max_violation.append(viol)
    if callback is not None:
        callback(prob.decode(x))
    for it in range(max_iter):
        # after the first step the old point is close to optimal, so skip
        # the early barrier stages
        t0 = None if it == 0 else prob.degree / WARM_START_GAP
        x_new, _, steps, _, stalled, _ = prob.solve_from(x, t0=t0)
        x_new = _floor_omega(prob, x_new)
        new_obj, viol, _, _ = prob.exact_metrics(x_new)
        trace.step_norm.append(float(np.linalg.norm(x_new - x)))
        trace.objective.append(new_obj)
        trace.max_violation.append(viol)
        trace.inner_iterations.append(steps)
        trace.stalled |= stalled
        if callback is not None:
            callback(prob.decode(x_new))
        delta = new_obj - obj
        x, obj = x_new, new_obj
        if delta < rtol * max(abs(new_obj), abs_floor):
            trace.converged = True
            break
    return prob.decode(x), trace


def rank_reduce(R: np.ndarray, d: int) -> np.ndarray:
    """Precoder ``V D^(1/2)`` from the ``d`` leading eigenpairs of ``R``."""
    vals, vecs = leading_eigenpairs(R, d)
    return vecs * np.sqrt(vals)[None, :]


def rank_reduced_vars(vars: DesignVariables, streams) -> tuple[DesignVariables, list[np.ndarray]]:
    precoders = [rank_reduce(R, d) for R, d in zip(vars.R, streams)]
    R = np.stack([hermitize(A @ A.conj().T) for A in precoders])
    return DesignVariables(R, vars.Omega.copy(), vars.phi_blocks), precoders
