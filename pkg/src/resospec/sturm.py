"""Quasi-periodic matrix Sturm-Liouville operator in Fourier space.

``-|delta|^2 Y'' + P(s) Y = mu Y`` with ``Y(s + 2 pi) = exp(2 pi i v) Y`` is
represented in the basis ``exp(i (l + n_k + v) s)``, ``n_k = 0, -1, 1, -2, 2, ...``.
The diagonal block for ``n_k`` is ``|delta|^2 (l + n_k + v)^2 I`` and the
coupling between ``n_k`` and ``n_tau`` is the Fourier block ``P(n_k - n_tau)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .blocks import LineDecomposition
from .lattice import norm_sq
from .oracle import SpectralDecomposition, sym_eigensolve
from .potential import MatrixPotential

CLUSTER_TOL = 1e-12


def enumeration(K: int) -> np.ndarray:
    """``n_k`` for ``k = 1..K``: ``-k/2`` for even ``k``, ``(k-1)/2`` for odd ``k``."""
    k = np.arange(1, K + 1)
    return np.where(k % 2 == 0, -(k // 2), (k - 1) // 2)


@dataclass(frozen=True)
class SturmLiouvilleSpec:
    deltaNormSq: float
    v: float
    l: int
    m: int
    K: int
    P_coeffs: Mapping[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if not self.deltaNormSq > 0:
            raise ValueError("|delta|^2 must be positive")
        if not 0 <= self.v < 1:
            raise ValueError("quasimomentum must lie in [0, 1)")
        if self.K < 1:
            raise ValueError("truncation K must be at least 1")
        clean = {}
        for n, mat in self.P_coeffs.items():
            mat = np.asarray(mat, dtype=complex)
            if mat.shape != (self.m, self.m):
                raise ValueError(f"P({n}) has shape {mat.shape}")
            clean[int(n)] = mat
        for n, mat in clean.items():
            partner = clean.get(-n, np.zeros_like(mat))
            if not np.allclose(partner, mat.conj().T, atol=1e-14):
                raise ValueError(f"P({-n}) must be the adjoint of P({n})")
        object.__setattr__(self, "P_coeffs", clean)

    def with_K(self, K: int) -> "SturmLiouvilleSpec":
        return SturmLiouvilleSpec(self.deltaNormSq, self.v, self.l, self.m, K, self.P_coeffs)


def spec_from_potential(V: MatrixPotential, delta: Sequence[int], dec: LineDecomposition,
                        K: int) -> SturmLiouvilleSpec:
    """``P`` built from the potential's line coefficients at ``n delta`` (``n != 0``)."""
    P = {}
    for n in range(-K, K + 1):
        if n == 0:
            continue
        blk = V.lattice_coeff(tuple(n * x for x in delta))
        if blk.any():
            P[n] = blk
    return SturmLiouvilleSpec(norm_sq(delta, V.box), dec.v, dec.l, V.m, K, P)


def default_truncation(a1: int) -> int:
    return 2 * a1 + 8


def assemble_T(spec: SturmLiouvilleSpec) -> np.ndarray:
    """The ``mK x mK`` Hermitian matrix of the truncated operator."""
    m, K = spec.m, spec.K
    n = enumeration(K)
    T = np.zeros((m * K, m * K), dtype=complex)
    for a in range(K):
        T[a * m:(a + 1) * m, a * m:(a + 1) * m] = (
            spec.deltaNormSq * (spec.l + n[a] + spec.v) ** 2 * np.eye(m)
        )
        for b in range(a + 1, K):
            blk = spec.P_coeffs.get(int(n[a] - n[b]))
            if blk is not None:
                T[a * m:(a + 1) * m, b * m:(b + 1) * m] = blk
                T[b * m:(b + 1) * m, a * m:(a + 1) * m] = blk.conj().T
    return T


def real_embedding(H: np.ndarray) -> np.ndarray:
    """``[[Re H, -Im H], [Im H, Re H]]``, real symmetric when ``H`` is Hermitian."""
    R, I = H.real, H.imag
    return np.block([[R, -I], [I, R]])


def hermitian_eigensolve(H: np.ndarray, tol: float = 1e-10) -> SpectralDecomposition:
    """Eigen-decomposition of a Hermitian matrix through the real embedding.

    Each eigenvalue of ``H`` appears twice in the embedding; the pairs are
    merged and an orthonormal complex basis is extracted per cluster.
    """
    n = H.shape[0]
    emb = sym_eigensolve(real_embedding(H), tol=tol)
    vals2 = emb.values
    Z = emb.vectors[:n] + 1j * emb.vectors[n:]
    vectors = np.zeros((n, n), dtype=complex)
    values = np.zeros(n)
    scale = max(1.0, float(np.abs(vals2).max(initial=0.0)))
    start = 0
    out = 0
    while start < 2 * n:
        stop = start + 1
        while stop < 2 * n and vals2[stop] - vals2[stop - 1] <= CLUSTER_TOL * scale:
            stop += 1
        size = (stop - start) // 2
        U, _, _ = np.linalg.svd(Z[:, start:stop], full_matrices=False)
        U = U[:, :size]
        values[out:out + size] = vals2[start:stop].reshape(size, 2).mean(axis=1)
        vectors[:, out:out + size] = U
        out += size
        start = stop
    res = np.linalg.norm(H @ vectors - vectors * values, axis=0)
    bound = float(res.max(initial=0.0))
    if bound > tol * max(np.linalg.norm(H), 1.0):
        raise np.linalg.LinAlgError(f"Hermitian residual {bound:.3e} exceeds tolerance")
    return SpectralDecomposition(values, vectors, bound)


def sl_eigenvalues(spec: SturmLiouvilleSpec, tol: float = 1e-10) -> SpectralDecomposition:
    return hermitian_eigensolve(assemble_T(spec), tol=tol)


@dataclass(frozen=True)
class MatchedGaps:
    reference: np.ndarray
    matched: np.ndarray
    gaps: np.ndarray

    @property
    def max_gap(self) -> float:
        return float(self.gaps.max(initial=0.0))


def nearest_gaps(values: np.ndarray, targets: np.ndarray) -> MatchedGaps:
    """For every entry of ``values`` the nearest entry of ``targets`` and the distance."""
    values = np.sort(np.asarray(values, dtype=float))
    targets = np.sort(np.asarray(targets, dtype=float))
    if len(targets) == 0:
        raise ValueError("no target eigenvalues to match against")
    pos = np.searchsorted(targets, values)
    lo = np.clip(pos - 1, 0, len(targets) - 1)
    hi = np.clip(pos, 0, len(targets) - 1)
    pick = np.where(np.abs(targets[lo] - values) <= np.abs(targets[hi] - values), lo, hi)
    return MatchedGaps(values, targets[pick], np.abs(targets[pick] - values))


def compare_T_vs_E(spec: SturmLiouvilleSpec, E: np.ndarray, a1: int | None = None) -> MatchedGaps:
    """Match the ``a1`` lowest eigenvalues of ``E`` to the nearest eigenvalues of ``T``.

    ``a1`` defaults to the number of line members, ``E.shape[0] // m``.
    """
    E = np.asarray(E)
    if E.shape[0] != E.shape[1] or E.shape[0] % spec.m:
        raise ValueError("E must be square with a multiple of m rows")
    a1 = E.shape[0] // spec.m if a1 is None else a1
    if spec.K < a1:
        raise ValueError(f"truncation K={spec.K} is smaller than a1={a1}")
    eta_E = np.linalg.eigvalsh(E)
    eta_T = sl_eigenvalues(spec).values
    return nearest_gaps(eta_E[:a1], eta_T)
