"""Parameter schedules and the resonance classification of frequency vectors.

A slab ``V_b(t)`` is the set of ``x`` with ``| |x|^2 - |x+b|^2 | < t``, which
is evaluated as ``|2<x, b> + |b|^2| < t``.  Directions ``b`` range over the
signed vectors of ``Gamma(p rho^alpha)`` that are minimal in their direction.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .lattice import (
    BoxDomain,
    FrequencyVector,
    enumerate_signed_ball,
    is_minimal_in_direction,
    minimal_mask,
    norm_sq_many,
    to_real,
)

log = logging.getLogger(__name__)

MODES = ("section2", "intro")


class ScheduleError(ValueError):
    pass


def admissible_p_threshold(d: int) -> float:
    """Smallest p (exclusive) compatible with the smoothness assumption."""
    return (d + 20) * (d - 1) / 2 + 3


@dataclass(frozen=True)
class ParameterSchedule:
    """Exponents derived from ``(d, p, rho)``.

    ``mode="section2"`` uses ``alpha = 1/(d+p)``, ``alpha1 = p2/(d+p)`` and
    ``alpha2 = (2 p2 + 1)/(d+p)`` with ``p2 = floor((p-5)/3) - 1``.
    ``mode="intro"`` uses the geometric ladder ``alpha_k = 3^k alpha``.

    Schedules with ``p`` below :func:`admissible_p_threshold` must be built with
    ``desk=True``; the flag is carried into every report.
    """

    d: int
    p: int
    rho: float
    mode: str = "section2"
    p1: int | None = None
    desk: bool = False
    alpha: float = field(init=False)
    alpha1: float = field(init=False)
    alpha2: float = field(init=False)
    p2: int = field(init=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ScheduleError(f"unknown schedule mode {self.mode!r}")
        if self.d < 2:
            raise ScheduleError("dimension must be at least 2")
        if int(self.p) != self.p or self.p <= 5:
            raise ScheduleError("p must be an integer greater than 5")
        if not self.rho > 1:
            raise ScheduleError("rho must exceed 1")
        d, p = self.d, int(self.p)
        if p <= admissible_p_threshold(d) and not self.desk:
            raise ScheduleError(
                f"p={p} is below the admissible range for d={d}; pass desk=True to relax"
            )
        alpha = 1.0 / (d + p)
        p2 = (p - 5) // 3 - 1
        if self.mode == "section2":
            if p2 < 0:
                raise ScheduleError(f"p={p} gives a negative alpha1; use p >= 8")
            a1, a2 = p2 / (d + p), (2 * p2 + 1) / (d + p)
        else:
            a1, a2 = 3 * alpha, 9 * alpha
            if not alpha < 1.0 / (d + 20) and not self.desk:
                raise ScheduleError("intro mode requires alpha < 1/(d+20)")
        p1 = p // 2 + 1 if self.p1 is None else int(self.p1)
        if 2 * p1 <= p:
            raise ScheduleError(f"p1={p1} violates 2*p1 > p")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "rho", float(self.rho))
        object.__setattr__(self, "p1", p1)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "alpha1", a1)
        object.__setattr__(self, "alpha2", a2)
        object.__setattr__(self, "p2", p2)
        if not 2 * a2 - a1 + (d + 3) * alpha < 1:
            raise ScheduleError("2*alpha2 - alpha1 + (d+3)*alpha < 1 fails")
        if not a2 > 2 * a1:
            raise ScheduleError("alpha2 > 2*alpha1 fails")

    def alpha_k(self, k: int) -> float:
        """Exponent of the k-th resonance level (``k >= 1``)."""
        if k < 1:
            raise ValueError("level starts at 1")
        if k == 1:
            return self.alpha1
        if k == 2:
            return self.alpha2
        return 3**k * self.alpha

    @property
    def alpha_list(self) -> list[float]:
        return [self.alpha_k(k) for k in range(1, self.d)]

    def level(self, k: int) -> float:
        """``rho^{alpha_k}``."""
        return self.rho ** self.alpha_k(k)

    @property
    def direction_radius(self) -> float:
        """``p rho^alpha``, the radius of the direction set."""
        return self.p * self.rho**self.alpha

    @property
    def translate_radius(self) -> float:
        """``p1 rho^alpha``, the radius of the translates in ``B(gamma, p1)``."""
        return self.p1 * self.rho**self.alpha

    def with_rho(self, rho: float) -> "ParameterSchedule":
        return ParameterSchedule(self.d, self.p, rho, self.mode, self.p1, self.desk)

    @classmethod
    def from_dict(cls, data: dict) -> "ParameterSchedule":
        try:
            return cls(
                d=int(data["d"]),
                p=data["p"],
                rho=float(data["rho"]),
                mode=data.get("mode", "section2"),
                p1=data.get("p1"),
                desk=bool(data.get("desk", False)),
            )
        except KeyError as exc:
            raise ScheduleError(f"schedule is missing {exc}") from exc

    def to_dict(self) -> dict:
        return {"mode": self.mode, "d": self.d, "p": self.p, "rho": self.rho,
                "p1": self.p1, "desk": self.desk}


@dataclass(frozen=True)
class DomainClass:
    """Resonance order of a frequency and a witness set of directions."""

    directions: tuple[FrequencyVector, ...] = ()

    @property
    def order(self) -> int:
        return len(self.directions)

    @property
    def tag(self) -> str:
        return "Resonance" if self.directions else "NonResonance"


def slab_value(x, b, box: BoxDomain) -> float:
    """``|x|^2 - |x+b|^2`` up to sign, as ``2<x,b> + |b|^2``."""
    bx = to_real(b, box)
    return float(2 * np.dot(np.asarray(x, dtype=float), bx) + bx @ bx)


def in_Vb(x, b: Sequence[int], threshold: float, box: BoxDomain) -> bool:
    """Membership of the real vector ``x`` in the slab ``V_b(threshold)``."""
    if not any(b):
        raise ValueError("slab direction must be nonzero")
    return abs(slab_value(x, b, box)) < threshold


def direction_set(sched: ParameterSchedule, box: BoxDomain) -> np.ndarray:
    """Signed minimal directions of ``Gamma(p rho^alpha)`` sorted by (|b|, lex)."""
    bs = enumerate_signed_ball(box, sched.direction_radius)
    bs = bs[minimal_mask(bs)]
    nsq = norm_sq_many(bs, box)
    order = np.lexsort(tuple(bs[:, j] for j in range(box.d - 1, -1, -1)) + (nsq,))
    return bs[order]


def _slab_values(gammas: np.ndarray, bs: np.ndarray, box: BoxDomain) -> np.ndarray:
    g = np.asarray(gammas, dtype=float).reshape(-1, box.d) * box.scale
    b = np.asarray(bs, dtype=float) * box.scale
    return np.abs(2 * g @ b.T + (b * b).sum(axis=1))


def _greedy_independent(bs: np.ndarray, limit: int) -> list[FrequencyVector]:
    chosen: list[np.ndarray] = []
    for b in bs:
        trial = np.array(chosen + [b], dtype=float)
        if np.linalg.matrix_rank(trial) == len(trial):
            chosen.append(b)
            if len(chosen) == limit:
                break
    return [tuple(int(x) for x in c) for c in chosen]


def classify(gamma: Sequence[int], sched: ParameterSchedule, box: BoxDomain,
             directions: np.ndarray | None = None) -> DomainClass:
    """Largest ``k`` with ``gamma`` in ``E_k`` and ``k`` witness directions.

    ``gamma`` lies in ``E_k`` when at least ``k`` linearly independent
    directions have ``gamma`` inside their slab at level ``rho^{alpha_k}``.
    The levels grow with ``k``, so ``E_2`` is not contained in ``E_1`` and
    every level is tested.  Witnesses are taken greedily in (|b|, lex) order.
    """
    bs = direction_set(sched, box) if directions is None else directions
    vals = _slab_values(np.asarray(gamma), bs, box)[0]
    witnesses: list[FrequencyVector] = []
    for k in range(1, box.d + 1):
        hits = bs[vals < sched.level(k)]
        cand = _greedy_independent(hits, k)
        if len(cand) == k:
            witnesses = cand
    return DomainClass(tuple(witnesses))


def in_E2(gamma: Sequence[int], sched: ParameterSchedule, box: BoxDomain,
          directions: np.ndarray | None = None) -> bool:
    bs = direction_set(sched, box) if directions is None else directions
    vals = _slab_values(np.asarray(gamma), bs, box)[0]
    hits = bs[vals < sched.level(2)]
    return len(hits) > 0 and np.linalg.matrix_rank(hits.astype(float)) >= 2


def _check_delta(delta: Sequence[int]) -> FrequencyVector:
    delta = tuple(int(x) for x in delta)
    if not any(delta):
        raise ValueError("delta must be nonzero")
    if not is_minimal_in_direction(delta):
        raise ValueError(f"delta {delta} is not minimal in its direction")
    if sum(1 for x in delta if x != 0) == 1:
        raise ValueError("coordinate directions e_i are not supported")
    return delta


def _single_resonance_mask(gammas: np.ndarray, delta, sched, box, bs) -> np.ndarray:
    gammas = np.asarray(gammas, dtype=np.int64).reshape(-1, box.d)
    t1 = sched.level(1)
    mask = _slab_values(gammas, np.array([delta]), box)[:, 0] < t1
    units = np.vstack([np.eye(box.d, dtype=np.int64), -np.eye(box.d, dtype=np.int64)])
    mask &= (_slab_values(gammas, units, box) >= t1).all(axis=1)
    idx = np.flatnonzero(mask)
    t2 = sched.level(2)
    for i in idx:
        hits = bs[_slab_values(gammas[i], bs, box)[0] < t2]
        if len(hits) and np.linalg.matrix_rank(hits.astype(float)) >= 2:
            mask[i] = False
    return mask


def single_resonance_check(gamma: Sequence[int], delta: Sequence[int],
                           sched: ParameterSchedule, box: BoxDomain) -> bool:
    """``gamma`` in ``V_delta(rho^alpha1)``, outside ``E_2`` and every ``V_{+-e_k}``."""
    delta = _check_delta(delta)
    bs = direction_set(sched, box)
    return bool(_single_resonance_mask(np.array([gamma]), delta, sched, box, bs)[0])


def window_vectors(box: BoxDomain, rho: float, width: float = 1.1) -> np.ndarray:
    """Signed lattice vectors with ``rho <= |gamma| <= width * rho``."""
    pts = enumerate_signed_ball(box, width * rho * (1 + 1e-12), include_zero=False)
    nsq = norm_sq_many(pts, box)
    return pts[(nsq >= rho * rho) & (nsq <= (width * rho) ** 2)]


def sample_single_resonance(delta: Sequence[int], sched: ParameterSchedule, box: BoxDomain,
                            count: int, seed: int) -> list[FrequencyVector]:
    """Seeded draw of single-resonance frequencies in the window ``[rho, 1.1 rho]``.

    The vectors are signed: a frequency near the plane ``2<x,delta> = -|delta|^2``
    generally has coordinates of both signs.  Its canonical form is the
    basis index.  Returned in lexicographic order.
    """
    delta = _check_delta(delta)
    if count <= 0:
        return []
    cand = window_vectors(box, sched.rho)
    bs = direction_set(sched, box)
    cand = cand[_single_resonance_mask(cand, delta, sched, box, bs)]
    if len(cand) == 0:
        log.warning("no single-resonance frequencies for delta=%s at rho=%g", delta, sched.rho)
        return []
    rng = np.random.default_rng(seed)
    pick = rng.choice(len(cand), size=min(count, len(cand)), replace=False)
    out = sorted(tuple(int(x) for x in cand[i]) for i in pick)
    return out
