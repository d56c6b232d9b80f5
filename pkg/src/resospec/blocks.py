"""Index sets around a resonant frequency and the block matrices built on them.

Members ``h`` of an index set are signed lattice vectors.  The block of the
matrix ``C`` at ``(tau, xi)`` is ``|h_tau|^2 I`` on the diagonal and the
signed-lattice coefficient of the potential at ``h_tau - h_xi`` elsewhere
(see :meth:`MatrixPotential.lattice_coeff`).  The mean ``V_0`` never enters
``C``; it is accounted for separately through its eigenvalues.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .lattice import (
    BoxDomain,
    FrequencyVector,
    enumerate_signed_ball,
    norm_sq,
    norm_sq_many,
    parallel,
    to_real,
)
from .potential import MatrixPotential
from .resonance import ParameterSchedule, single_resonance_check


class IndexSetError(ValueError):
    pass


@dataclass(frozen=True)
class IndexSet:
    gamma: FrequencyVector
    directions: tuple[FrequencyVector, ...]
    members: tuple[FrequencyVector, ...]
    a1: int
    box: BoxDomain

    @property
    def b(self) -> int:
        return len(self.members)

    @property
    def line_members(self) -> tuple[FrequencyVector, ...]:
        return self.members[: self.a1]

    def norms_sq(self) -> np.ndarray:
        return norm_sq_many(np.array(self.members), self.box)

    def line_offsets(self) -> list[int]:
        """Integer ``n`` with ``h_s = gamma + n delta`` for the line members."""
        if len(self.directions) != 1:
            raise IndexSetError("line offsets need exactly one direction")
        return [_line_coordinate(h, self.gamma, self.directions[0]) for h in self.line_members]


@dataclass(frozen=True)
class LineDecomposition:
    """``gamma = beta + (l + v) delta`` with ``beta`` orthogonal to ``delta``."""

    beta: np.ndarray
    l: int
    v: float

    @property
    def t(self) -> float:
        return self.l + self.v

    @property
    def beta_norm_sq(self) -> float:
        return float(self.beta @ self.beta)


@dataclass
class BlockSystem:
    index: IndexSet
    m: int
    C: np.ndarray
    A: np.ndarray
    B: np.ndarray
    D: np.ndarray | None = None
    Dprime: np.ndarray | None = None
    E: np.ndarray | None = None
    decomposition: LineDecomposition | None = None


def interleave_key(n: int) -> int:
    """Position of ``gamma + n delta`` in the order gamma, gamma-delta, gamma+delta, ..."""
    return 2 * (-n) if n < 0 else 2 * n + 1


def _line_coordinate(h, gamma, delta) -> int:
    diff = [x - y for x, y in zip(h, gamma)]
    j = next(i for i, x in enumerate(delta) if x != 0)
    n = diff[j] // delta[j]
    if any(x != n * dl for x, dl in zip(diff, delta)):
        raise IndexSetError(f"{h} is not on the line through {gamma} along {delta}")
    return n


def _combination_offsets(directions: Sequence[Sequence[int]], radius: float,
                         box: BoxDomain) -> list[FrequencyVector]:
    """All ``sum n_i gamma_i`` with norm below ``radius`` (zero included)."""
    G = np.array([to_real(g, box) for g in directions])
    gram = G @ G.T
    inv = np.linalg.inv(gram)
    bounds = [int(math.floor(radius * math.sqrt(inv[i, i]))) + 1 for i in range(len(G))]
    out = []
    Gi = np.array(directions, dtype=np.int64)
    for ns in itertools.product(*(range(-b, b + 1) for b in bounds)):
        vec = np.array(ns, dtype=np.int64) @ Gi
        if norm_sq(vec, box) < radius * radius:
            out.append(tuple(int(x) for x in vec))
    return out


def _assemble_members(gamma, core_offsets, translate_radius, box):
    gamma = np.asarray(gamma, dtype=np.int64)
    core = gamma + np.array(core_offsets, dtype=np.int64).reshape(-1, box.d)
    trans = enumerate_signed_ball(box, translate_radius, include_zero=True)
    allpts = (core[:, None, :] + trans[None, :, :]).reshape(-1, box.d)
    return np.unique(allpts, axis=0)


def _check_independent(directions) -> None:
    if len(directions) == 0:
        return
    arr = np.array(directions, dtype=float)
    if np.linalg.matrix_rank(arr) < len(arr):
        raise IndexSetError("directions are linearly dependent")


def build_Bk(gamma: Sequence[int], directions: Sequence[Sequence[int]],
             sched: ParameterSchedule, box: BoxDomain) -> IndexSet:
    """``B_k(gamma, p1)`` for ``k`` independent directions.

    The core radius is ``(1/2) rho^{alpha_{k+1}/2}``.  With one direction the
    line members come first in interleaved order; everything else is in
    lexicographic order of the signed coordinates.
    """
    gamma = tuple(int(x) for x in gamma)
    directions = tuple(tuple(int(x) for x in g) for g in directions)
    k = len(directions)
    if k >= box.d:
        raise IndexSetError("at most d-1 directions are allowed")
    _check_independent(directions)
    if k == 0:
        core = [(0,) * box.d]
    else:
        radius = 0.5 * sched.rho ** (sched.alpha_k(k + 1) / 2)
        core = _combination_offsets(directions, radius, box)
    pts = _assemble_members(gamma, core, sched.translate_radius, box)
    members = [tuple(int(x) for x in row) for row in pts]
    if k == 1:
        delta = directions[0]
        diff = np.array(members) - np.array(gamma)
        on_line = [h for h, df in zip(members, diff) if parallel(df, delta)]
        on_line.sort(key=lambda h: interleave_key(_line_coordinate(h, gamma, delta)))
        line_set = set(on_line)
        rest = [h for h in members if h not in line_set]
        return IndexSet(gamma, directions, tuple(on_line + rest), len(on_line), box)
    return IndexSet(gamma, directions, tuple(members), 0, box)


def build_B1(gamma: Sequence[int], delta: Sequence[int], sched: ParameterSchedule,
             box: BoxDomain, check: bool = True) -> IndexSet:
    """``B_1(gamma, p1) = gamma + B_1(delta) + Gamma(p1 rho^alpha)`` with ``B_1(gamma)`` kept.

    The first ``a1`` members are the points of the set on the line
    ``gamma + Z delta``.
    """
    if check and not single_resonance_check(gamma, delta, sched, box):
        raise IndexSetError(f"{tuple(gamma)} is not a single-resonance frequency for {tuple(delta)}")
    return build_Bk(gamma, [delta], sched, box)


def decompose_on_line(gamma: Sequence[int], delta: Sequence[int], box: BoxDomain) -> LineDecomposition:
    if not any(delta):
        raise ValueError("delta must be nonzero")
    g = to_real(gamma, box)
    dl = to_real(delta, box)
    t = float(g @ dl / (dl @ dl))
    if abs(t - round(t)) < 1e-12:
        t = float(round(t))
    l = math.floor(t)
    return LineDecomposition(beta=g - t * dl, l=int(l), v=t - l)


def line_separation(idx: IndexSet) -> float:
    """Smallest ``| |h_tau|^2 - |h_s|^2 |`` between line members and the rest."""
    h = idx.norms_sq()
    line, off = h[: idx.a1], h[idx.a1:]
    if len(line) == 0 or len(off) == 0:
        return math.inf
    return float(np.abs(line[:, None] - off[None, :]).min())


def _coupling_matrix(V: MatrixPotential, members) -> np.ndarray:
    """Off-diagonal part, built from the support rather than all pairs."""
    m = V.m
    b = len(members)
    out = np.zeros((m * b, m * b))
    pos = {h: i for i, h in enumerate(members)}
    signed = set()
    for k in V.support:
        if not any(k):
            continue
        for signs in itertools.product((1, -1), repeat=len(k)):
            signed.add(tuple(s * x for s, x in zip(signs, k)))
    for q in sorted(signed):
        blk = V.lattice_coeff(q)
        for tau, h in enumerate(members):
            xi = pos.get(tuple(x - y for x, y in zip(h, q)))
            if xi is not None:
                out[tau * m:(tau + 1) * m, xi * m:(xi + 1) * m] = blk
    return out


def assemble_C(V: MatrixPotential, idx: IndexSet) -> BlockSystem:
    if V.box != idx.box:
        raise ValueError("potential and index set live on different boxes")
    diag = idx.norms_sq()
    A = np.diag(np.repeat(diag, V.m))
    B = _coupling_matrix(V, idx.members)
    # mirror so that symmetry is exact bit for bit
    B = np.triu(B, 1) + np.triu(B, 1).T
    C = A + B
    D = C[: V.m * idx.a1, : V.m * idx.a1].copy()
    return BlockSystem(index=idx, m=V.m, C=C, A=A, B=B, D=D)


def assemble_E(V: MatrixPotential, idx: IndexSet, dec: LineDecomposition) -> np.ndarray:
    if idx.a1 < 1:
        raise IndexSetError("index set has no line members")
    system = assemble_C(V, idx)
    return system.D - dec.beta_norm_sq * np.eye(system.D.shape[0])


def assemble_Dprime(V: MatrixPotential, idx: IndexSet) -> np.ndarray:
    system = assemble_C(V, idx)
    return dprime_from(system)


def dprime_from(system: BlockSystem) -> np.ndarray:
    n = system.m * system.index.a1
    out = system.A.copy()
    out[:n, :n] = system.D
    return out


def build_block_system(V: MatrixPotential, gamma, delta, sched: ParameterSchedule,
                       check: bool = True) -> BlockSystem:
    """Index set, ``C``, ``D``, ``D'`` and ``E`` for one single-resonance frequency."""
    idx = build_B1(gamma, delta, sched, V.box, check=check)
    system = assemble_C(V, idx)
    dec = decompose_on_line(gamma, delta, V.box)
    system.decomposition = dec
    system.Dprime = dprime_from(system)
    system.E = system.D - dec.beta_norm_sq * np.eye(system.D.shape[0])
    return system


def dump_matrix(X: np.ndarray, path) -> None:
    """Write a matrix as whitespace-separated rows, one per line."""
    X = np.atleast_2d(np.asarray(X))
    with open(Path(path), "w") as fh:
        for row in X:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")
