"""Log-det value/gradient/Hessian kernels used by the barrier solver.

Every term has the form ``log det(M0_q + H_q X_q H_q^H)`` with
``X_q = sum_g mask[q, g] X_g``, where ``X_g`` are the variable groups
(the ``R_k`` and ``Omega``) written in a common Hermitian basis ``G_j``.
Derivatives are taken w.r.t. the basis coordinates of ``X_q``:

    grad_j  =  Re tr(W G_j)
    hess_jl = -Re tr(W G_j W G_l),   W = H^H M^-1 H

Terms are padded to a common row count ``m``: zero rows in ``H`` and an
identity block in ``M0`` leave the value and ``W`` unchanged.

Set ``SECRAN_NUMBA=0`` to force the pure-numpy path.
"""

from __future__ import annotations

import os

import numpy as np

try:  # pragma: no cover - exercised implicitly
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False


def numba_requested() -> bool:
    return os.environ.get("SECRAN_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


USE_NUMBA = HAVE_NUMBA and numba_requested()


# --------------------------------------------------------------------------
# numpy path
# --------------------------------------------------------------------------

def _assemble(X, masks, Hs, M0):
    Xq = np.einsum("qg,gab->qab", masks, X)
    M = M0 + Hs @ Xq @ np.conj(np.swapaxes(Hs, 1, 2))
    return 0.5 * (M + np.conj(np.swapaxes(M, 1, 2)))


def logdet_values_numpy(X, masks, Hs, M0):
    M = _assemble(X, masks, Hs, M0)
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return np.full(masks.shape[0], -np.inf), False
    d = np.real(np.diagonal(L, axis1=1, axis2=2))
    if not np.all(d > 0) or not np.all(np.isfinite(d)):
        return np.full(masks.shape[0], -np.inf), False
    return 2.0 * np.log(d).sum(axis=1), True


def logdet_derivs_numpy(X, masks, Hs, M0, basis):
    Q = masks.shape[0]
    J = basis.shape[0]
    M = _assemble(X, masks, Hs, M0)
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return np.full(Q, -np.inf), np.zeros((Q, J)), np.zeros((Q, J, J)), False
    d = np.real(np.diagonal(L, axis1=1, axis2=2))
    if not np.all(d > 0) or not np.all(np.isfinite(d)):
        return np.full(Q, -np.inf), np.zeros((Q, J)), np.zeros((Q, J, J)), False
    ld = 2.0 * np.log(d).sum(axis=1)
    Z = np.linalg.solve(L, Hs)
    W = np.conj(np.swapaxes(Z, 1, 2)) @ Z
    grad = np.einsum("qab,jba->qj", W, basis).real
    WG = W[:, None, :, :] @ basis[None, :, :, :]
    n = basis.shape[1]
    A = WG.reshape(Q, J, n * n)
    B = np.swapaxes(WG, 2, 3).reshape(Q, J, n * n)
    hess = -np.real(A @ np.swapaxes(B, 1, 2))
    return ld, grad, hess, True


# --------------------------------------------------------------------------
# numba path
# --------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _build_M(X, masks, Hs, M0, q, M, Xq):
        G, n = X.shape[0], X.shape[1]
        m = Hs.shape[1]
        for a in range(n):
            for b in range(n):
                s = 0j
                for g in range(G):
                    w = masks[q, g]
                    if w != 0.0:
                        s += w * X[g, a, b]
                Xq[a, b] = s
        # T = H Xq, M = M0 + T H^H
        for i in range(m):
            for j in range(m):
                s = M0[q, i, j]
                for a in range(n):
                    hia = Hs[q, i, a]
                    if hia == 0j:
                        continue
                    t = 0j
                    for b in range(n):
                        t += Xq[a, b] * Hs[q, j, b].conjugate()
                    s += hia * t
                M[i, j] = s

    @njit(cache=True)
    def _cholesky(M, L):
        m = M.shape[0]
        for i in range(m):
            for j in range(m):
                L[i, j] = 0j
        for j in range(m):
            s = M[j, j].real
            for k in range(j):
                s -= L[j, k].real * L[j, k].real + L[j, k].imag * L[j, k].imag
            if not (s > 0.0) or not np.isfinite(s):
                return False
            djj = np.sqrt(s)
            L[j, j] = djj
            for i in range(j + 1, m):
                z = 0.5 * (M[i, j] + M[j, i].conjugate())
                for k in range(j):
                    z -= L[i, k] * L[j, k].conjugate()
                L[i, j] = z / djj
        return True

    @njit(cache=True)
    def logdet_values_numba(X, masks, Hs, M0):
        Q, m = Hs.shape[0], Hs.shape[1]
        n = X.shape[1]
        out = np.empty(Q)
        M = np.empty((m, m), dtype=np.complex128)
        L = np.empty((m, m), dtype=np.complex128)
        Xq = np.empty((n, n), dtype=np.complex128)
        for q in range(Q):
            _build_M(X, masks, Hs, M0, q, M, Xq)
            if not _cholesky(M, L):
                for r in range(Q):
                    out[r] = -np.inf
                return out, False
            s = 0.0
            for i in range(m):
                s += np.log(L[i, i].real)
            out[q] = 2.0 * s
        return out, True

    @njit(cache=True)
    def logdet_derivs_numba(X, masks, Hs, M0, basis):
        Q, m = Hs.shape[0], Hs.shape[1]
        n = X.shape[1]
        J = basis.shape[0]
        ld = np.empty(Q)
        grad = np.zeros((Q, J))
        hess = np.zeros((Q, J, J))
        M = np.empty((m, m), dtype=np.complex128)
        L = np.empty((m, m), dtype=np.complex128)
        Xq = np.empty((n, n), dtype=np.complex128)
        Z = np.empty((m, n), dtype=np.complex128)
        W = np.empty((n, n), dtype=np.complex128)
        # every basis matrix has at most two nonzero entries
        nnz = np.zeros(J, dtype=np.int64)
        ea = np.zeros((J, 2), dtype=np.int64)
        eb = np.zeros((J, 2), dtype=np.int64)
        ec = np.zeros((J, 2), dtype=np.complex128)
        for j in range(J):
            for a in range(n):
                for b in range(n):
                    if basis[j, a, b] != 0j:
                        e = nnz[j]
                        ea[j, e] = a
                        eb[j, e] = b
                        ec[j, e] = basis[j, a, b]
                        nnz[j] = e + 1
        for q in range(Q):
            _build_M(X, masks, Hs, M0, q, M, Xq)
            if not _cholesky(M, L):
                for r in range(Q):
                    ld[r] = -np.inf
                return ld, grad, hess, False
            s = 0.0
            for i in range(m):
                s += np.log(L[i, i].real)
            ld[q] = 2.0 * s
            # Z = L^-1 H by forward substitution
            for c in range(n):
                for i in range(m):
                    z = Hs[q, i, c]
                    for k in range(i):
                        z -= L[i, k] * Z[k, c]
                    Z[i, c] = z / L[i, i].real
            for a in range(n):
                for b in range(n):
                    s2 = 0j
                    for i in range(m):
                        s2 += Z[i, a].conjugate() * Z[i, b]
                    W[a, b] = s2
            # tr(W E_ab) = W_ba,  tr(W E_ab W E_cd) = W_da W_bc
            for j in range(J):
                tr = 0j
                for e in range(nnz[j]):
                    tr += ec[j, e] * W[eb[j, e], ea[j, e]]
                grad[q, j] = tr.real
                for l in range(j, J):
                    s4 = 0j
                    for e in range(nnz[j]):
                        a, b = ea[j, e], eb[j, e]
                        for f in range(nnz[l]):
                            s4 += ec[j, e] * ec[l, f] * W[eb[l, f], a] * W[b, ea[l, f]]
                    hess[q, j, l] = -s4.real
                    hess[q, l, j] = -s4.real
        return ld, grad, hess, True


def logdet_values(X, masks, Hs, M0):
    """Natural log-determinants of all terms; ``ok`` is False if any term
    is not positive definite."""
    if USE_NUMBA:
        return logdet_values_numba(X, masks, Hs, M0)
    return logdet_values_numpy(X, masks, Hs, M0)


def logdet_derivs(X, masks, Hs, M0, basis):
    if USE_NUMBA:
        return logdet_derivs_numba(X, masks, Hs, M0, basis)
    return logdet_derivs_numpy(X, masks, Hs, M0, basis)


def set_backend(use_numba: bool) -> None:
    """Switch the kernel backend at runtime (benchmarks and tests)."""
    global USE_NUMBA
    if use_numba and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    USE_NUMBA = bool(use_numba)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


# --------------------------------------------------------------------------
# full barrier solve (numba only; the numpy path lives in optimizer.py)
# --------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _group_matrices(x, basis, G, out):
        J, n = basis.shape[0], basis.shape[1]
        for g in range(G):
            for a in range(n):
                for b in range(n):
                    out[g, a, b] = 0j
            for j in range(J):
                v = x[g * J + j]
                if v == 0.0:
                    continue
                for a in range(n):
                    for b in range(n):
                        bab = basis[j, a, b]
                        if bab != 0j:
                            out[g, a, b] += v * bab

    @njit(cache=True)
    def _slacks_nb(x, ld, omega_idx, cap, sub_const, sub_lin, power_coef, power_cap, s, p):
        ok = True
        for r in range(cap.shape[0]):
            v = cap[r] - sub_const[r] + ld[omega_idx[r]]
            for i in range(x.shape[0]):
                v -= sub_lin[r, i] * x[i]
            s[r] = v
            if not (v > 0.0):
                ok = False
        for r in range(power_cap.shape[0]):
            v = power_cap[r]
            for i in range(x.shape[0]):
                v -= power_coef[r, i] * x[i]
            p[r] = v
            if not (v > 0.0):
                ok = False
        return ok

    @njit(cache=True)
    def _objective_nb(x, ld, obj_idx, obj_coef, lin_obj, const_obj):
        F = const_obj
        for r in range(obj_idx.shape[0]):
            F += obj_coef[r] * ld[obj_idx[r]]
        for i in range(x.shape[0]):
            F += lin_obj[i] * x[i]
        return F

    @njit(cache=True)
    def barrier_value_numba(x, t, basis, G, masks, Hs, M0, obj_idx, obj_coef, lin_obj, const_obj,
                            omega_idx, bar_idx, cap, sub_const, sub_lin, power_coef, power_cap):
        n = basis.shape[1]
        X = np.empty((G, n, n), dtype=np.complex128)
        _group_matrices(x, basis, G, X)
        ld, ok = logdet_values_numba(X, masks, Hs, M0)
        if not ok:
            return np.inf
        s = np.empty(cap.shape[0])
        p = np.empty(power_cap.shape[0])
        if not _slacks_nb(x, ld, omega_idx, cap, sub_const, sub_lin, power_coef, power_cap, s, p):
            return np.inf
        val = -t * _objective_nb(x, ld, obj_idx, obj_coef, lin_obj, const_obj)
        for r in range(s.shape[0]):
            val -= np.log(s[r])
        for r in range(p.shape[0]):
            val -= np.log(p[r])
        for r in range(bar_idx.shape[0]):
            val -= ld[bar_idx[r]]
        return val

    @njit(cache=True)
    def _add_term(grad, hess, coef, mask, g, K, J):
        G = mask.shape[0]
        for a in range(G):
            if mask[a] == 0.0:
                continue
            ca = coef * mask[a]
            for j in range(J):
                grad[a * J + j] += ca * g[j]
            for b in range(G):
                if mask[b] == 0.0:
                    continue
                cab = ca * mask[b]
                for j in range(J):
                    for l in range(J):
                        hess[a * J + j, b * J + l] += cab * K[j, l]

    @njit(cache=True)
    def barrier_derivs_numba(x, t, basis, G, masks, Hs, M0, obj_idx, obj_coef, lin_obj, const_obj,
                             omega_idx, bar_idx, cap, sub_const, sub_lin, power_coef, power_cap):
        n = basis.shape[1]
        J = basis.shape[0]
        P = x.shape[0]
        grad = np.zeros(P)
        hess = np.zeros((P, P))
        X = np.empty((G, n, n), dtype=np.complex128)
        _group_matrices(x, basis, G, X)
        ld, g, K, ok = logdet_derivs_numba(X, masks, Hs, M0, basis)
        if not ok:
            return np.inf, grad, hess
        s = np.empty(cap.shape[0])
        p = np.empty(power_cap.shape[0])
        if not _slacks_nb(x, ld, omega_idx, cap, sub_const, sub_lin, power_coef, power_cap, s, p):
            return np.inf, grad, hess
        val = -t * _objective_nb(x, ld, obj_idx, obj_coef, lin_obj, const_obj)
        for r in range(obj_idx.shape[0]):
            q = obj_idx[r]
            _add_term(grad, hess, -t * obj_coef[r], masks[q], g[q], K[q], J)
        for i in range(P):
            grad[i] -= t * lin_obj[i]
        for r in range(bar_idx.shape[0]):
            q = bar_idx[r]
            val -= ld[q]
            _add_term(grad, hess, -1.0, masks[q], g[q], K[q], J)
        ds = np.empty(P)
        for r in range(s.shape[0]):
            q = omega_idx[r]
            val -= np.log(s[r])
            for i in range(P):
                ds[i] = -sub_lin[r, i]
            mask = masks[q]
            for a in range(G):
                if mask[a] != 0.0:
                    for j in range(J):
                        ds[a * J + j] += mask[a] * g[q, j]
            inv = 1.0 / s[r]
            for i in range(P):
                grad[i] -= ds[i] * inv
            inv2 = inv * inv
            for i in range(P):
                if ds[i] == 0.0:
                    continue
                di = ds[i] * inv2
                for k in range(P):
                    hess[i, k] += di * ds[k]
            # -K/s on the Omega block
            for a in range(G):
                if mask[a] == 0.0:
                    continue
                for b in range(G):
                    if mask[b] == 0.0:
                        continue
                    for j in range(J):
                        for l in range(J):
                            hess[a * J + j, b * J + l] -= inv * mask[a] * mask[b] * K[q, j, l]
        for r in range(p.shape[0]):
            val -= np.log(p[r])
            inv = 1.0 / p[r]
            for i in range(P):
                c = power_coef[r, i]
                if c == 0.0:
                    continue
                grad[i] += c * inv
                for k in range(P):
                    hess[i, k] += c * power_coef[r, k] * inv * inv
        return val, grad, hess

    @njit(cache=True)
    def _chol_real(A, L):
        m = A.shape[0]
        for i in range(m):
            for j in range(m):
                L[i, j] = 0.0
        for j in range(m):
            s = A[j, j]
            for k in range(j):
                s -= L[j, k] * L[j, k]
            if not (s > 0.0) or not np.isfinite(s):
                return False
            d = np.sqrt(s)
            L[j, j] = d
            for i in range(j + 1, m):
                z = A[i, j]
                for k in range(j):
                    z -= L[i, k] * L[j, k]
                L[i, j] = z / d
        return True

    @njit(cache=True)
    def newton_direction_numba(grad, hess, fidx):
        """Jacobi-scaled Cholesky solve of ``hess dx = -grad`` on the free
        coordinates, with a growing ridge if the factorization fails."""
        f = fidx.shape[0]
        Hs = np.empty((f, f))
        d = np.empty(f)
        for i in range(f):
            d[i] = np.sqrt(max(hess[fidx[i], fidx[i]], 1e-300))
        for i in range(f):
            for k in range(f):
                Hs[i, k] = hess[fidx[i], fidx[k]] / (d[i] * d[k])
        L = np.empty((f, f))
        ridge = 0.0
        while not _chol_real(Hs, L):
            ridge = 1e-12 if ridge == 0.0 else ridge * 100.0
            for i in range(f):
                Hs[i, i] = hess[fidx[i], fidx[i]] / (d[i] * d[i]) + ridge
            if ridge > 1e6:
                break
        rhs = np.empty(f)
        for i in range(f):
            rhs[i] = -grad[fidx[i]] / d[i]
        y = np.empty(f)
        for i in range(f):
            v = rhs[i]
            for k in range(i):
                v -= L[i, k] * y[k]
            y[i] = v / L[i, i]
        for i in range(f - 1, -1, -1):
            v = y[i]
            for k in range(i + 1, f):
                v -= L[k, i] * y[k]
            y[i] = v / L[i, i]
        dx = np.zeros(grad.shape[0])
        lam2 = 0.0
        for i in range(f):
            dx[fidx[i]] = y[i] / d[i]
            lam2 -= grad[fidx[i]] * dx[fidx[i]]
        return dx, lam2

    @njit(cache=True)
    def barrier_solve_numba(x0, fidx, t0, mu, gap_tol, newton_tol, stat_tol, max_newton, degree,
                            basis, G, masks, Hs, M0, obj_idx, obj_coef, lin_obj, const_obj,
                            omega_idx, bar_idx, cap, sub_const, sub_lin, power_coef, power_cap):
        x = x0.copy()
        t = t0
        total = 0
        stalled = False
        residual = np.inf
        while True:
            lam2 = np.inf
            failed = False
            while True:
                if total >= max_newton:
                    failed = True
                    break
                val, grad, hess = barrier_derivs_numba(
                    x, t, basis, G, masks, Hs, M0, obj_idx, obj_coef, lin_obj, const_obj,
                    omega_idx, bar_idx, cap, sub_const, sub_lin, power_coef, power_cap)
                if not np.isfinite(val):
                    return x, total, residual, True
                dx, lam2 = newton_direction_numba(grad, hess, fidx)
                total += 1
                if lam2 / 2.0 <= max(newton_tol, 1e-14 * abs(val)) or not np.isfinite(lam2):
                    break
                step = 1.0
                ls_ok = True
                while True:
                    cand = x + step * dx
                    vc = barrier_value_numba(
                        cand, t, basis, G, masks, Hs, M0, obj_idx, obj_coef, lin_obj, const_obj,
                        omega_idx, bar_idx, cap, sub_const, sub_lin, power_coef, power_cap)
                    if vc <= val - 0.01 * step * lam2:
                        break
                    step *= 0.5
                    if step < 1e-9:
                        ls_ok = False
                        break
                if not ls_ok:
                    failed = lam2 / (2.0 * t) > stat_tol
                    break
                x = cand
            residual = lam2 / (2.0 * t)
            if failed:
                stalled = True
                if total >= max_newton:
                    break
            if degree / t <= gap_tol:
                break
            t *= mu
        return x, total, residual, stalled
