"""Dense complex Hermitian matrix helpers.

Covariances are plain ``complex128`` numpy arrays. Rates are in bits, so
every log-determinant here is base 2 unless the name says otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

LN2 = np.log(2.0)

# smallest eigenvalue must exceed PD_RTOL * largest
PD_RTOL = 1e-12
HERMITIAN_ATOL = 1e-10


class NotPositiveDefinite(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class EmptySubset(ValueError):
    pass


class IndexOutOfRange(IndexError):
    pass


def is_hermitian(M: np.ndarray, atol: float = HERMITIAN_ATOL) -> bool:
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        return False
    return bool(np.allclose(M, M.conj().T, rtol=0.0, atol=atol))


def hermitize(M: np.ndarray) -> np.ndarray:
    """Return ``(M + M^H) / 2``, removing round-off asymmetry."""
    M = np.asarray(M, dtype=complex)
    return 0.5 * (M + M.conj().T)


def is_psd(M: np.ndarray, atol: float = 1e-9) -> bool:
    if not is_hermitian(M, atol=max(atol, HERMITIAN_ATOL)):
        return False
    if M.shape[0] == 0:
        return True
    return bool(np.linalg.eigvalsh(hermitize(M))[0] >= -atol)


def _square(M: np.ndarray, name: str = "matrix") -> np.ndarray:
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {M.shape}")
    return M


def _checked_eigvalsh(M: np.ndarray, name: str) -> np.ndarray:
    w = np.linalg.eigvalsh(hermitize(M))
    if w.size and (w[0] <= PD_RTOL * max(w[-1], 0.0) or w[-1] <= 0.0):
        raise NotPositiveDefinite(
            f"{name} is not positive definite (eigenvalues in [{w[0]:.3e}, {w[-1]:.3e}])"
        )
    return w


def logdet2(M: np.ndarray) -> float:
    """log2 det(M) of a Hermitian positive definite matrix."""
    M = _square(M)
    if M.shape[0] == 0:
        return 0.0
    return float(np.sum(np.log2(_checked_eigvalsh(M, "matrix"))))


def phi(A: np.ndarray, B: np.ndarray) -> float:
    """Mutual information ``log2 det(A + B) - log2 det(B)`` in bits.

    ``B`` must be positive definite and ``A`` positive semidefinite.
    """
    A = _square(A, "A")
    B = _square(B, "B")
    if A.shape != B.shape:
        raise DimensionMismatch(f"shape mismatch {A.shape} vs {B.shape}")
    if A.shape[0] == 0:
        return 0.0
    _checked_eigvalsh(B, "B")
    # log det(A + B) - log det(B) = log det(I + L^-1 A L^-H), stable when A is small
    L = np.linalg.cholesky(hermitize(B))
    Li_A = np.linalg.solve(L, A)
    S = np.linalg.solve(L, Li_A.conj().T).conj().T
    ws = np.linalg.eigvalsh(hermitize(S))
    return float(np.sum(np.log2(np.maximum(1.0 + ws, np.finfo(float).tiny))))


def varphi(X: np.ndarray, Y: np.ndarray) -> float:
    """First-order expansion of ``log2 det`` around ``Y``, evaluated at ``X``.

    ``log2 det(Y) + tr(Y^-1 (X - Y)) / ln 2``. Because log-det is concave
    this is an upper bound on ``log2 det(X)``, tight at ``X = Y``.
    """
    X = _square(X, "X")
    Y = _square(Y, "Y")
    if X.shape != Y.shape:
        raise DimensionMismatch(f"shape mismatch {X.shape} vs {Y.shape}")
    if X.shape[0] == 0:
        return 0.0
    w = _checked_eigvalsh(Y, "Y")
    tr = np.trace(np.linalg.solve(hermitize(Y), X - Y)).real
    return float(np.sum(np.log2(w)) + tr / LN2)


@dataclass(frozen=True)
class AntennaBlocks:
    """Partition of the stacked RU antenna index into per-RU ranges."""

    block_sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(b) for b in self.block_sizes)
        if not sizes or any(b <= 0 for b in sizes):
            raise ValueError(f"block sizes must be positive, got {self.block_sizes}")
        object.__setattr__(self, "block_sizes", sizes)

    @property
    def num_blocks(self) -> int:
        return len(self.block_sizes)

    @property
    def total(self) -> int:
        return sum(self.block_sizes)

    @property
    def offsets(self) -> tuple[int, ...]:
        return tuple(int(v) for v in np.concatenate([[0], np.cumsum(self.block_sizes)]))

    def indices(self, subset: Iterable[int]) -> np.ndarray:
        """Stacked antenna indices of the RUs in ``subset`` (0-based RU ids),
        in RU order."""
        subset = sorted(set(int(i) for i in subset))
        if not subset:
            raise EmptySubset("RU subset must be non-empty")
        if subset[0] < 0 or subset[-1] >= self.num_blocks:
            raise IndexOutOfRange(f"RU index out of range 0..{self.num_blocks - 1}: {subset}")
        off = self.offsets
        return np.concatenate([np.arange(off[i], off[i + 1]) for i in subset])

    def selector(self, subset: Iterable[int]) -> np.ndarray:
        """0/1 matrix ``E_S^H`` (rows pick the subset's antennas)."""
        idx = self.indices(subset)
        E = np.zeros((idx.size, self.total), dtype=complex)
        E[np.arange(idx.size), idx] = 1.0
        return E


def block_submatrix(M: np.ndarray, blocks: AntennaBlocks, subset: Iterable[int]) -> np.ndarray:
    """Principal submatrix of ``M`` on the antennas of the RUs in ``subset``."""
    M = _square(M)
    if M.shape[0] != blocks.total:
        raise DimensionMismatch(f"matrix dim {M.shape[0]} != total antennas {blocks.total}")
    idx = blocks.indices(subset)
    return M[np.ix_(idx, idx)]


def _canonical_phase(v: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    nz = np.flatnonzero(np.abs(v) > tol)
    if nz.size == 0:
        return v
    a = v[nz[0]]
    return v * (np.conj(a) / abs(a))


def _tie_key(v: np.ndarray, tol: float = 1e-12) -> tuple:
    nz = np.flatnonzero(np.abs(v) > tol)
    if nz.size == 0:
        return (0, 0.0, 0.0)
    return (int(nz[0]), float(v[nz[0]].real), float(v[nz[0]].imag))


def leading_eigenpairs(M: np.ndarray, d: int, tie_tol: float = 1e-10):
    """Return the ``d`` largest eigenvalues (descending, clamped at 0) and
    the matching orthonormal eigenvectors as columns of an ``(n, d)`` array.

    Eigenvectors are phase-normalised so that their first nonzero entry is
    real positive. Within a cluster of equal eigenvalues the vectors are
    ordered by the position, then (real, imag) of that entry.
    """
    M = _square(M)
    n = M.shape[0]
    d = int(d)
    if d < 0 or d > n:
        raise DimensionMismatch(f"d={d} must lie in [0, {n}]")
    w, V = np.linalg.eigh(hermitize(M))
    w = w[::-1]
    V = V[:, ::-1]
    scale = max(abs(w[0]), 1.0) if n else 1.0
    cols = [_canonical_phase(V[:, j]) for j in range(n)]
    order = []
    j = 0
    while j < n:
        k = j + 1
        while k < n and abs(w[k] - w[j]) <= tie_tol * scale:
            k += 1
        group = list(range(j, k))
        group.sort(key=lambda c: _tie_key(cols[c]))
        order.extend(group)
        j = k
    order = order[:d]
    # within a tie cluster only the vectors move; values stay sorted
    vals = np.maximum(w[:d], 0.0)
    vecs = np.stack([cols[c] for c in order], axis=1) if d else np.zeros((n, 0), dtype=complex)
    return vals, vecs


def hermitian_basis(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Real coordinate basis of n x n Hermitian matrices.

    Returns ``(G, D)``, both ``(n*n, n, n)``: ``X = sum_j x_j G[j]`` and
    ``x_j = Re tr(D[j]^H X)``. Ordering: diagonal entries, then the real
    parts of the strict upper triangle, then its imaginary parts.
    """
    G = np.zeros((n * n, n, n), dtype=complex)
    D = np.zeros_like(G)
    j = 0
    for a in range(n):
        G[j, a, a] = 1.0
        D[j, a, a] = 1.0
        j += 1
    upper = [(a, b) for a in range(n) for b in range(a + 1, n)]
    for a, b in upper:
        G[j, a, b] = G[j, b, a] = 1.0
        D[j, a, b] = 1.0
        j += 1
    for a, b in upper:
        G[j, a, b] = 1j
        G[j, b, a] = -1j
        D[j, a, b] = 1j
        j += 1
    return G, D


def random_psd(rng: np.random.Generator, n: int, rank: int | None = None, scale: float = 1.0) -> np.ndarray:
    """Random Hermitian PSD matrix ``scale * G G^H / n`` with complex Gaussian ``G``."""
    rank = n if rank is None else rank
    G = (rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))) / np.sqrt(2.0)
    return hermitize(scale * (G @ G.conj().T) / max(n, 1))


def block_diag(blocks: Sequence[np.ndarray]) -> np.ndarray:
    sizes = [b.shape[0] for b in blocks]
    out = np.zeros((sum(sizes), sum(sizes)), dtype=complex)
    o = 0
    for b, s in zip(blocks, sizes):
        out[o:o + s, o:o + s] = b
        o += s
    return out
