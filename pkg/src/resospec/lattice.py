"""Box geometry and the half-lattice of Neumann frequencies.

A frequency vector is stored as a tuple of signed integers ``k``; the
frequency it stands for is ``(k_1 pi/a_1, ..., k_d pi/a_d)``.  Keeping the
integer coordinates makes differences, membership tests and direction tests
exact; floats only enter through :func:`norm_sq` and :func:`to_real`.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

FrequencyVector = tuple[int, ...]


@dataclass(frozen=True)
class BoxDomain:
    """The rectangle ``[0, a_1] x ... x [0, a_d]``."""

    a: tuple[float, ...]

    def __post_init__(self):
        a = tuple(float(x) for x in self.a)
        if len(a) < 2:
            raise ValueError("box dimension must be at least 2")
        if any(not x > 0 for x in a):
            raise ValueError(f"side lengths must be positive, got {a}")
        object.__setattr__(self, "a", a)

    @property
    def d(self) -> int:
        return len(self.a)

    @property
    def scale(self) -> np.ndarray:
        """Frequency of a unit step in each coordinate, ``pi / a_i``."""
        return np.pi / np.asarray(self.a)

    @classmethod
    def square(cls, d: int = 2, side: float = math.pi) -> "BoxDomain":
        return cls((side,) * d)


def as_vector(k: Iterable[int]) -> FrequencyVector:
    return tuple(int(x) for x in k)


def to_real(k: Sequence[int], box: BoxDomain) -> np.ndarray:
    return np.asarray(k, dtype=float) * box.scale


def norm_sq(k: Sequence[int], box: BoxDomain) -> float:
    """``|gamma|^2`` for the frequency with integer coordinates ``k``."""
    if len(k) != box.d:
        raise ValueError(f"vector {tuple(k)} does not match box dimension {box.d}")
    return float(sum((ki * si) ** 2 for ki, si in zip(k, box.scale)))


def norm_sq_many(ks: np.ndarray, box: BoxDomain) -> np.ndarray:
    """Row-wise :func:`norm_sq` for an ``(n, d)`` integer array."""
    ks = np.asarray(ks).reshape(-1, box.d)
    return ((ks * box.scale) ** 2).sum(axis=1)


def inner(k: Sequence[int], q: Sequence[int], box: BoxDomain) -> float:
    return float(sum(x * y * s * s for x, y, s in zip(k, q, box.scale)))


def canonicalize(k: Sequence[int]) -> FrequencyVector:
    return tuple(abs(int(x)) for x in k)


def unit_frequency(i: int, box: BoxDomain) -> FrequencyVector:
    """``e_i`` for a 1-based coordinate index ``i``."""
    if not 1 <= i <= box.d:
        raise ValueError(f"coordinate index {i} outside 1..{box.d}")
    return tuple(1 if j == i - 1 else 0 for j in range(box.d))


def _ball_candidates(box: BoxDomain, r: float, signed: bool) -> np.ndarray:
    bounds = [int(math.ceil(r * a / math.pi)) for a in box.a]
    ranges = [range(-b if signed else 0, b + 1) for b in bounds]
    pts = np.array(list(itertools.product(*ranges)), dtype=np.int64)
    return pts.reshape(-1, box.d)


def enumerate_ball(box: BoxDomain, r: float, include_zero: bool = False) -> list[FrequencyVector]:
    """Canonical vectors with ``0 < |gamma| < r`` (``0 <= |gamma|`` with ``include_zero``).

    The output is in lexicographic order of the integer coordinates.
    """
    if not r > 0:
        raise ValueError("radius must be positive")
    pts = _ball_candidates(box, r, signed=False)
    nsq = norm_sq_many(pts, box)
    keep = nsq < r * r
    if not include_zero:
        keep &= nsq > 0
    return [tuple(int(x) for x in row) for row in pts[keep]]


def enumerate_signed_ball(box: BoxDomain, r: float, include_zero: bool = False) -> np.ndarray:
    """All signed lattice vectors with ``|b| < r``, as an ``(n, d)`` array in lex order.

    This is the set written ``Gamma(r)`` (or ``Gamma^{+0}(r)`` with the zero vector).
    """
    if not r > 0:
        raise ValueError("radius must be positive")
    pts = _ball_candidates(box, r, signed=True)
    nsq = norm_sq_many(pts, box)
    keep = nsq < r * r
    if not include_zero:
        keep &= nsq > 0
    return pts[keep]


def is_minimal_in_direction(k: Sequence[int]) -> bool:
    """True iff no shorter lattice vector points the same way (gcd of coordinates is 1)."""
    if not any(k):
        raise ValueError("the zero vector has no direction")
    return reduce(math.gcd, (abs(int(x)) for x in k)) == 1


def minimal_mask(ks: np.ndarray) -> np.ndarray:
    ks = np.abs(np.asarray(ks))
    g = np.gcd.reduce(ks, axis=1)
    return g == 1


def parallel(k: Sequence[int], q: Sequence[int]) -> bool:
    """Exact test for linear dependence of two integer vectors."""
    k = np.asarray(k, dtype=object)
    q = np.asarray(q, dtype=object)
    n = len(k)
    return all(k[i] * q[j] == k[j] * q[i] for i in range(n) for j in range(i + 1, n))


def parallel_mask(ks: np.ndarray, q: Sequence[int]) -> np.ndarray:
    ks = np.asarray(ks, dtype=np.int64)
    q = np.asarray(q, dtype=np.int64)
    d = ks.shape[1]
    mask = np.ones(len(ks), dtype=bool)
    for i in range(d):
        for j in range(i + 1, d):
            mask &= ks[:, i] * q[j] == ks[:, j] * q[i]
    return mask


def basis_norm_sq(k: Sequence[int], box: BoxDomain) -> float:
    """``||u_gamma||^2`` over the box for the unnormalized cosine product."""
    return float(np.prod([a if ki == 0 else a / 2 for ki, a in zip(k, box.a)]))


def eval_basis(k: Sequence[int], x: Sequence[float], box: BoxDomain) -> float:
    """``u_gamma(x) = prod_i cos(k_i pi x_i / a_i)``."""
    x = np.asarray(x, dtype=float)
    return float(np.prod(np.cos(np.asarray(k) * box.scale * x)))
