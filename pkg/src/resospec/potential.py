"""Finitely supported trigonometric matrix potentials.

``V(x) = sum_gamma V_gamma u_gamma(x)`` over canonical frequency vectors
``gamma`` (all coordinates >= 0), with ``u_gamma`` the unnormalized cosine
product.  Every ``V_gamma`` is a real symmetric ``m x m`` matrix.

Two coefficient views are exposed:

* :meth:`MatrixPotential.coeff` is the cosine coefficient looked up at the
  canonical form of a (possibly signed) vector;
* :meth:`MatrixPotential.lattice_coeff` is the coefficient of the same
  function written as a sum over *signed* lattice vectors,
  ``V(x) = sum_{b signed} W_b u_b(x)``, so ``W_b = V_|b| / 2^{nnz(b)}``.
  This is the convention under which ``V u_h = sum_b W_b u_{h+b}`` holds
  term by term, which is what the block matrices need.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .lattice import BoxDomain, FrequencyVector, canonicalize, eval_basis, norm_sq

SYMMETRY_TOL = 1e-12


class PotentialError(ValueError):
    pass


@dataclass(frozen=True)
class MeanEigensystem:
    lambdas: np.ndarray
    omegas: np.ndarray  # columns are eigenvectors


@dataclass(frozen=True)
class Majorants:
    M_ij: np.ndarray
    M: float


@dataclass(frozen=True)
class MatrixPotential:
    m: int
    box: BoxDomain
    coeffs: Mapping[FrequencyVector, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.m < 1:
            raise PotentialError("block size m must be positive")
        clean = {}
        for k, mat in self.coeffs.items():
            k = tuple(int(x) for x in k)
            if len(k) != self.box.d:
                raise PotentialError(f"frequency {k} does not match dimension {self.box.d}")
            if any(x < 0 for x in k):
                raise PotentialError(f"frequency {k} is not canonical")
            mat = np.array(mat, dtype=float)
            if mat.shape != (self.m, self.m):
                raise PotentialError(f"coefficient at {k} has shape {mat.shape}, expected {(self.m, self.m)}")
            if np.max(np.abs(mat - mat.T), initial=0.0) > SYMMETRY_TOL:
                raise PotentialError(f"coefficient at {k} is not symmetric")
            mat.setflags(write=False)
            clean[k] = mat
        object.__setattr__(self, "coeffs", dict(sorted(clean.items())))

    @property
    def d(self) -> int:
        return self.box.d

    @property
    def support(self) -> list[FrequencyVector]:
        return [k for k, v in self.coeffs.items() if np.any(v)]

    @property
    def V0(self) -> np.ndarray:
        return self.coeff((0,) * self.d)

    def coeff(self, k: Sequence[int]) -> np.ndarray:
        mat = self.coeffs.get(canonicalize(k))
        if mat is None:
            return np.zeros((self.m, self.m))
        return mat.copy()

    def lattice_coeff(self, k: Sequence[int]) -> np.ndarray:
        nnz = sum(1 for x in k if x != 0)
        return self.coeff(k) / 2.0**nnz

    def support_radius(self) -> float:
        return max((norm_sq(k, self.box) ** 0.5 for k in self.support), default=0.0)

    def max_index(self) -> int:
        return max((max(k) for k in self.support), default=0)

    def is_constant(self) -> bool:
        return all(not any(k) for k in self.support)

    def __eq__(self, other):
        if not isinstance(other, MatrixPotential):
            return NotImplemented
        return (
            self.m == other.m
            and self.box == other.box
            and self.coeffs.keys() == other.coeffs.keys()
            and all(np.array_equal(self.coeffs[k], other.coeffs[k]) for k in self.coeffs)
        )

    __hash__ = None


def zero_potential(m: int, box: BoxDomain) -> MatrixPotential:
    return MatrixPotential(m, box, {})


def constant_potential(V0, box: BoxDomain) -> MatrixPotential:
    V0 = np.asarray(V0, dtype=float)
    return MatrixPotential(V0.shape[0], box, {(0,) * box.d: V0})


def mean_eigensystem(V: MatrixPotential) -> MeanEigensystem:
    lam, om = np.linalg.eigh(V.V0)
    return MeanEigensystem(lam, om)


def majorants(V: MatrixPotential) -> Majorants:
    """Absolute coefficient sums ``M_ij`` and the scalar bound ``M``.

    ``M^2 = max_i M_i * max_j M_j`` with row sums ``M_i`` and column sums
    ``M_j`` of ``M_ij``.
    """
    Mij = np.zeros((V.m, V.m))
    for mat in V.coeffs.values():
        Mij += np.abs(mat)
    row = Mij.sum(axis=1)
    col = Mij.sum(axis=0)
    return Majorants(Mij, float(np.sqrt(row.max() * col.max())))


def smoothness_functional(V: MatrixPotential, l: float) -> np.ndarray:
    """``sum_gamma |v_ij,gamma|^2 (1 + |gamma|^(2l))`` per entry."""
    if not l > 0:
        raise ValueError("smoothness order must be positive")
    out = np.zeros((V.m, V.m))
    for k, mat in V.coeffs.items():
        out += mat**2 * (1.0 + norm_sq(k, V.box) ** l)
    return out


def required_smoothness(d: int) -> float:
    """Lower bound on the smoothness order assumed for the coefficients."""
    return (d + 20) * (d - 1) / 2 + d + 3


def eval_potential(V: MatrixPotential, x: Sequence[float]) -> np.ndarray:
    out = np.zeros((V.m, V.m))
    for k, mat in V.coeffs.items():
        out += mat * eval_basis(k, x, V.box)
    return out


def potential_from_dict(data: dict) -> MatrixPotential:
    try:
        m = int(data["m"])
        box = BoxDomain(tuple(data["a"]))
        entries = data.get("coeffs", [])
    except (KeyError, TypeError) as exc:
        raise PotentialError(f"malformed potential description: {exc}") from exc
    coeffs = {}
    for entry in entries:
        k = tuple(int(x) for x in entry["k"])
        if k in coeffs:
            raise PotentialError(f"duplicate frequency {k}")
        coeffs[k] = entry["matrix"]
    return MatrixPotential(m, box, coeffs)


def potential_to_dict(V: MatrixPotential) -> dict:
    return {
        "m": V.m,
        "a": list(V.box.a),
        "coeffs": [{"k": list(k), "matrix": mat.tolist()} for k, mat in V.coeffs.items()],
    }


def load_potential(path) -> MatrixPotential:
    with open(path) as fh:
        return potential_from_dict(json.load(fh))


def save_potential(V: MatrixPotential, path) -> None:
    Path(path).write_text(json.dumps(potential_to_dict(V), indent=2) + "\n")
