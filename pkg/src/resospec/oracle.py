"""Galerkin truncation of ``-Laplace + V`` in the normalized Neumann cosine basis.

This is the reference the asymptotic formulas are checked against.  The
coupling is computed from the product rule

    u_a u_b = 2^{-d} sum_{eps in {+-1}^d} u_{|a + eps * b|}

so every matrix entry is an exact finite sum; no quadrature is involved.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .lattice import BoxDomain, FrequencyVector, basis_norm_sq, enumerate_ball, norm_sq
from .potential import MatrixPotential

SYMMETRY_TOL = 1e-12
TRUST_FACTOR = 0.8


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class SpectralDecomposition:
    values: np.ndarray
    vectors: np.ndarray
    residual_bound: float


def sym_eigensolve(A: np.ndarray, tol: float = 1e-10) -> SpectralDecomposition:
    """Full eigen-decomposition of a real symmetric matrix (LAPACK ``syevd``).

    Raises :class:`OracleError` when ``A`` is not symmetric to ``1e-12``
    relative, and :class:`numpy.linalg.LinAlgError` when the residual exceeds
    ``tol * ||A||_F``.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise OracleError("matrix must be square")
    if A.size == 0:
        return SpectralDecomposition(np.zeros(0), np.zeros((0, 0)), 0.0)
    scale = max(1.0, float(np.abs(A).max()))
    if float(np.abs(A - A.T).max()) > SYMMETRY_TOL * scale:
        raise OracleError("matrix is not symmetric")
    values, vectors = scipy.linalg.eigh(A, driver="evd")
    res = np.linalg.norm(A @ vectors - vectors * values, axis=0)
    ortho = float(np.abs(vectors.T @ vectors - np.eye(len(values))).max())
    bound = max(float(res.max()), ortho)
    if bound > tol * max(np.linalg.norm(A), 1.0):
        raise np.linalg.LinAlgError(f"eigen residual {bound:.3e} exceeds tolerance")
    return SpectralDecomposition(values, vectors, bound)


@dataclass(frozen=True)
class GalerkinBasis:
    """Pairs ``(gamma, j)`` with ``|gamma| < R_cut`` sorted by (|gamma|^2, gamma, j).

    Channels ``j`` are 0-based here.
    """

    box: BoxDomain
    m: int
    R_cut: float
    freqs: tuple[FrequencyVector, ...]

    @classmethod
    def build(cls, box: BoxDomain, m: int, R_cut: float) -> "GalerkinBasis":
        freqs = enumerate_ball(box, R_cut, include_zero=True)
        freqs.sort(key=lambda k: (norm_sq(k, box), k))
        return cls(box, m, float(R_cut), tuple(freqs))

    def __len__(self) -> int:
        return self.m * len(self.freqs)

    @property
    def entries(self) -> list[tuple[FrequencyVector, int]]:
        return [(k, j) for k in self.freqs for j in range(self.m)]

    @property
    def trusted_limit(self) -> float:
        return (TRUST_FACTOR * self.R_cut) ** 2

    def freq_index(self) -> dict[FrequencyVector, int]:
        return {k: i for i, k in enumerate(self.freqs)}

    def row(self, gamma: Sequence[int], j: int) -> int:
        key = tuple(abs(int(x)) for x in gamma)
        pos = self.freq_index().get(key)
        if pos is None or not 0 <= j < self.m:
            raise OracleError(f"({key}, {j}) is not in the basis")
        return pos * self.m + j

    def laplacian_values(self) -> np.ndarray:
        return np.repeat([norm_sq(k, self.box) for k in self.freqs], self.m)


def coupling_terms(V: MatrixPotential, basis: GalerkinBasis):
    """Yield ``(row_freq, col_freq, weight, k)`` for the potential part.

    ``weight`` multiplies ``V_k`` in the block coupling the normalized basis
    functions at ``row_freq`` and ``col_freq``.
    """
    box = basis.box
    index = basis.freq_index()
    norms = np.array([basis_norm_sq(k, box) for k in basis.freqs])
    signs = list(itertools.product((1, -1), repeat=box.d))
    w0 = 2.0 ** (-box.d)
    for k in V.support:
        kk = np.array(k)
        for col, g in enumerate(basis.freqs):
            counts: dict[int, int] = {}
            gg = np.array(g)
            for eps in signs:
                target = tuple(int(x) for x in np.abs(kk + np.array(eps) * gg))
                row = index.get(target)
                if row is not None:
                    counts[row] = counts.get(row, 0) + 1
            for row, c in counts.items():
                yield row, col, w0 * c * np.sqrt(norms[row] / norms[col]), k


def assemble_L(V: MatrixPotential, basis: GalerkinBasis) -> np.ndarray:
    if V.box != basis.box or V.m != basis.m:
        raise OracleError("potential does not match the basis")
    m = basis.m
    n = len(basis)
    L = np.diag(basis.laplacian_values())
    for row, col, w, k in coupling_terms(V, basis):
        L[row * m:(row + 1) * m, col * m:(col + 1) * m] += w * V.coeffs[k]
    # the exact product rule gives a symmetric matrix; enforce bitwise symmetry
    upper = np.triu(L, 1)
    L = upper + upper.T + np.diag(np.diag(L))
    assert L.shape == (n, n)
    return L


@dataclass(frozen=True)
class OracleResult:
    basis: GalerkinBasis
    L: np.ndarray
    decomposition: SpectralDecomposition

    @property
    def values(self) -> np.ndarray:
        return self.decomposition.values

    @property
    def trusted(self) -> np.ndarray:
        return self.values <= self.basis.trusted_limit

    @property
    def trusted_values(self) -> np.ndarray:
        return self.values[self.trusted]

    def window(self, lo: float, hi: float) -> np.ndarray:
        """Indices of trusted eigenvalues in the open interval ``(lo, hi)``."""
        v = self.values
        return np.flatnonzero(self.trusted & (v > lo) & (v < hi))


def oracle_eigenvalues(V: MatrixPotential, R_cut: float, tol: float = 1e-10) -> OracleResult:
    basis = GalerkinBasis.build(V.box, V.m, R_cut)
    if len(basis) == 0:
        raise OracleError("empty basis")
    L = assemble_L(V, basis)
    return OracleResult(basis, L, sym_eigensolve(L, tol=tol))


def is_interior(V: MatrixPotential, basis: GalerkinBasis, h: Sequence[int]) -> bool:
    """Row of ``h`` is complete: every coupled frequency lies inside the basis."""
    return np.sqrt(norm_sq(h, basis.box)) + V.support_radius() < basis.R_cut


def binding_residual(V: MatrixPotential, result: OracleResult, h: Sequence[int], j: int) -> float:
    """Max over trusted ``N`` of the binding-identity defect at the row ``(h, j)``.

    ``(Lambda_N - |h|^2) <Psi_N, Phi_hj> - <Psi_N, V Phi_hj>`` with the second
    term read off the off-Laplacian part of the Galerkin row.
    """
    r = result.basis.row(h, j)
    hsq = norm_sq(h, V.box)
    Vrow = result.L[r].copy()
    Vrow[r] -= hsq
    psi = result.decomposition.vectors[:, result.trusted]
    lam = result.values[result.trusted]
    lhs = (lam - hsq) * psi[r]
    rhs = Vrow @ psi
    return float(np.abs(lhs - rhs).max(initial=0.0))


def interior_binding_residual(V: MatrixPotential, result: OracleResult) -> float:
    """:func:`binding_residual` maximized over every interior row at once.

    Stacking the identity over all rows gives ``Psi diag(Lambda) - L Psi``
    restricted to trusted columns and interior rows.
    """
    basis = result.basis
    rows = [i * basis.m + j for i, k in enumerate(basis.freqs) if is_interior(V, basis, k)
            for j in range(basis.m)]
    if not rows:
        return 0.0
    psi = result.decomposition.vectors[:, result.trusted]
    lam = result.values[result.trusted]
    res = psi[rows] * lam - result.L[rows] @ psi
    return float(np.abs(res).max(initial=0.0))
