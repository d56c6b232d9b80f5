"""Built-in potentials and run configurations.

The exactness entries (zero and constant potentials) have closed-form spectra,
so every check must come out at solver precision.  The generic entry is the
sweep used for the decay slopes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lattice import BoxDomain, enumerate_ball, norm_sq
from .oracle import oracle_eigenvalues
from .potential import (
    MatrixPotential,
    constant_potential,
    mean_eigensystem,
    potential_to_dict,
    zero_potential,
)
from .resonance import ParameterSchedule, sample_single_resonance
from .sturm import SturmLiouvilleSpec, enumeration, sl_eigenvalues
from .blocks import build_block_system
from .verify import (
    CheckSettings,
    RunConfig,
    check_main_asymptotics,
    check_matrix_chain,
    check_thm1_thm2,
    config_from_dict,
)

EXACT_TOL = 1e-8

GENERIC_V0 = [[0.3, 0.1], [0.1, -0.2]]

# on the resonance line only the (1,1) coefficient acts; a multiple of the
# identity keeps each channel's line operator identical
GENERIC_COEFFS = {
    (1, 1): [[0.4, 0.0], [0.0, 0.4]],
    (2, 0): [[0.5, 0.2], [0.2, -0.3]],
    (0, 1): [[-0.4, 0.3], [0.3, 0.2]],
}


def generic_box() -> BoxDomain:
    return BoxDomain((math.pi / 2, math.pi / 2))


def generic_potential(box: BoxDomain | None = None) -> MatrixPotential:
    box = generic_box() if box is None else box
    coeffs = {(0, 0): GENERIC_V0, **GENERIC_COEFFS}
    return MatrixPotential(2, box, coeffs)


def random_potential(box: BoxDomain, seed: int, support=((1, 1), (2, 0), (0, 1)),
                     scale: float = 0.5) -> MatrixPotential:
    """Generic V0 plus random symmetric blocks with entries in ``[-scale, scale]``."""
    rng = np.random.default_rng(seed)
    coeffs = {(0, 0): np.array(GENERIC_V0)}
    for k in support:
        A = rng.uniform(-scale, scale, (2, 2))
        coeffs[k] = (A + A.T) / 2
    return MatrixPotential(2, box, coeffs)


def generic_config(rho_list=(20.0, 40.0, 80.0), seed: int = 1,
                   slope_threshold: float = -0.05) -> RunConfig:
    """Slope sweep for the generic potential along ``delta = (1, 1)``.

    ``p = 8`` is below the admissible range for ``d = 2`` and runs with
    ``desk=True``.  ``p1 = 8`` makes the line length ``a1`` grow inside the
    sweep, which is what drives the Sturm-Liouville truncation error down.
    """
    data = {
        "potential": potential_to_dict(generic_potential()),
        "schedule": {"mode": "section2", "p": 8, "p1": 8, "desk": True},
        "delta": [1, 1],
        "rho_list": list(rho_list),
        "samples_per_rho": 4,
        "seed": seed,
        "r_cut": {"factor_of_rho": 1.4},
        "settings": {"slope_threshold": slope_threshold},
    }
    return config_from_dict(data)


def separation_box() -> BoxDomain:
    return BoxDomain((math.pi / 3, math.pi / 3))


def separation_instances(n_potentials: int = 10, rho_list=(30.0, 60.0), seed: int = 0,
                         delta=(1, 1)):
    """Yield ``(V, gamma, sched)`` for seeded random potentials at each rho."""
    box = separation_box()
    for j in range(n_potentials):
        V = random_potential(box, seed + j)
        for rho in rho_list:
            sched = ParameterSchedule(2, 26, rho)
            for g in sample_single_resonance(delta, sched, box, 1, seed + j):
                yield V, g, sched


# ---------------------------------------------------------------- exactness


@dataclass(frozen=True)
class ExactnessReport:
    name: str
    max_error: float
    n_checks: int

    @property
    def passed(self) -> bool:
        return self.n_checks > 0 and self.max_error <= EXACT_TOL


def oracle_exactness(V: MatrixPotential, R_cut: float) -> float:
    """Max distance of trusted oracle values to ``|gamma|^2 + lambda_i``."""
    res = oracle_eigenvalues(V, R_cut)
    lam = mean_eigensystem(V).lambdas
    free = np.array([norm_sq(k, V.box) for k in enumerate_ball(V.box, R_cut, include_zero=True)])
    exact = np.sort((free[:, None] + lam[None, :]).ravel())
    vals = res.trusted_values
    pos = np.clip(np.searchsorted(exact, vals), 1, len(exact) - 1)
    gap = np.minimum(np.abs(exact[pos] - vals), np.abs(exact[pos - 1] - vals))
    return float(gap.max(initial=0.0))


def sturm_exactness(K: int = 41, dnorm: float = 2.0, v: float = 0.3, l: int = 0, m: int = 2) -> float:
    spec = SturmLiouvilleSpec(dnorm, v, l, m, K)
    mu = sl_eigenvalues(spec).values
    exact = np.sort(np.repeat(dnorm * (l + enumeration(K) + v) ** 2, m))
    return float(np.abs(mu - exact).max())


def pipeline_exactness(V: MatrixPotential, rho: float = 20.0, delta=(1, 1), seed: int = 0) -> tuple[float, int]:
    """Largest error over the chain and oracle checks at one rho."""
    sched = ParameterSchedule(V.d, 8, rho, desk=True)
    gammas = sample_single_resonance(delta, sched, V.box, 2, seed)
    oracle = oracle_eigenvalues(V, 1.4 * rho)
    worst, count = 0.0, 0
    for g in gammas:
        system = build_block_system(V, g, delta, sched)
        recs, _ = check_matrix_chain(V, g, delta, sched, system)
        recs = [r for r in recs if r.check_id != "lem21"]
        recs += check_main_asymptotics(V, g, delta, sched, oracle, system)
        recs += check_thm1_thm2(V, g, sched, oracle, CheckSettings(), delta)
        for r in recs:
            worst = max(worst, r.error)
            count += 1
    return worst, count


def exactness_corpus() -> list[ExactnessReport]:
    out = []
    box = BoxDomain((math.pi, math.pi))
    zero = zero_potential(2, box)
    const = constant_potential([[1.0, 0.0], [0.0, 2.0]], box)
    out.append(ExactnessReport("zero/oracle", oracle_exactness(zero, 12.0), 1))
    out.append(ExactnessReport("constant/oracle", oracle_exactness(const, 12.0), 1))
    out.append(ExactnessReport("sturm/free", sturm_exactness(), 1))
    gbox = generic_box()
    for name, V in (("zero/pipeline", zero_potential(2, gbox)),
                    ("constant/pipeline", constant_potential([[1.0, 0.0], [0.0, 2.0]], gbox))):
        err, n = pipeline_exactness(V)
        out.append(ExactnessReport(name, err, n))
    return out
