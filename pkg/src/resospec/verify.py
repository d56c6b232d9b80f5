"""Experiment runner: sweep rho, build every object, compare spectra, fit slopes.

Check ids
---------
thm1   oracle eigenvalue near |gamma|^2 with a large overlap on Phi_gamma
       versus the nearest lambda_i + eta_s(C(gamma, gamma_1..gamma_k)).
thm2   lambda_i + eta_s for every eta_s within (3/8) rho^alpha1 of |gamma|^2
       versus the nearest oracle value.
lem21  separation of the line eigenvalues of C from the off-line |h_tau|^2
       (a hard invariant, not a rate).
thm22  eigenvalues of C attached to the line versus the nearest eigenvalue of D.
thm23  eigenvalues of D versus the nearest eigenvalue of C.
thm24  eigenvalues of E versus the nearest eigenvalue of the Sturm-Liouville matrix T.
main   |beta|^2 + eta_s(T) + lambda_i versus the nearest oracle value.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .blocks import BlockSystem, assemble_C, build_Bk, build_block_system
from .lattice import canonicalize, norm_sq
from .oracle import OracleResult, oracle_eigenvalues
from .potential import MatrixPotential, majorants, mean_eigensystem, potential_from_dict
from .resonance import ParameterSchedule, ScheduleError, classify, sample_single_resonance
from .sturm import default_truncation, enumeration, nearest_gaps, sl_eigenvalues, spec_from_potential

log = logging.getLogger(__name__)

CHECK_IDS = ("thm1", "thm2", "lem21", "thm22", "thm23", "thm24", "main")
RATE_CHECKS = ("thm1", "thm2", "thm22", "thm23", "thm24", "main")
CSV_HEADER = ["check_id", "rho", "gamma_k", "delta_k", "error", "N", "i", "s", "desk"]
ERROR_FLOOR = 1e-15


class ConfigError(ValueError):
    pass


class InvariantError(RuntimeError):
    pass


@dataclass(frozen=True)
class ErrorRecord:
    check_id: str
    rho: float
    gamma: tuple[int, ...]
    delta: tuple[int, ...]
    error: float
    N: int = -1
    i: int = -1
    s: int = -1
    desk: bool = False

    def sort_key(self):
        return (CHECK_IDS.index(self.check_id), self.rho, self.gamma, self.N, self.i, self.s)

    def row(self) -> list[str]:
        return [
            self.check_id,
            repr(float(self.rho)),
            ";".join(str(x) for x in self.gamma),
            ";".join(str(x) for x in self.delta),
            repr(float(self.error)),
            str(self.N),
            str(self.i),
            str(self.s),
            "true" if self.desk else "false",
        ]


@dataclass(frozen=True)
class SlopeReport:
    check_id: str
    slope: float
    predicted_exponent: float | None
    passed: bool

    def to_dict(self) -> dict:
        return {"check_id": self.check_id, "slope": self.slope,
                "predicted_exponent": self.predicted_exponent, "pass": self.passed}


@dataclass(frozen=True)
class CheckSettings:
    """Fitted constants and thresholds that the asymptotic statements leave open."""

    overlap_c17: float = 0.1
    overlap_c: float = 1.0
    slope_threshold: float = -0.1
    jitter: float = 3.0
    trusted_margin: float = 0.0


@dataclass
class RunConfig:
    potential: MatrixPotential
    schedule: dict
    delta: tuple[int, ...]
    rho_list: list[float]
    samples_per_rho: int = 4
    seed: int = 0
    r_cut: dict = field(default_factory=lambda: {"factor_of_max_rho": 1.4})
    settings: CheckSettings = field(default_factory=CheckSettings)
    checks: tuple[str, ...] = CHECK_IDS
    out: str | None = None

    def __post_init__(self):
        if len(self.rho_list) < 3:
            raise ConfigError("rho_list needs at least three values")
        if any(b <= a for a, b in zip(self.rho_list, self.rho_list[1:])):
            raise ConfigError("rho_list must be strictly ascending")
        unknown = set(self.checks) - set(CHECK_IDS)
        if unknown:
            raise ConfigError(f"unknown check ids {sorted(unknown)}")
        for rho in self.rho_list:
            self.schedule_for(rho)

    def schedule_for(self, rho: float) -> ParameterSchedule:
        data = dict(self.schedule)
        data["rho"] = rho
        data.setdefault("d", self.potential.d)
        try:
            return ParameterSchedule.from_dict(data)
        except ScheduleError as exc:
            raise ConfigError(str(exc)) from exc

    def r_cut_for(self, rho: float) -> float:
        rule = self.r_cut
        if "absolute" in rule:
            return float(rule["absolute"])
        if "factor_of_rho" in rule:
            return float(rule["factor_of_rho"]) * rho
        return float(rule.get("factor_of_max_rho", 1.4)) * max(self.rho_list)


def load_config(path, seed: int | None = None, out: str | None = None) -> RunConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(data, base=path.parent, seed=seed, out=out)


def config_from_dict(data: dict, base=Path("."), seed: int | None = None,
                     out: str | None = None) -> RunConfig:
    try:
        pot = data["potential"]
        if isinstance(pot, str):
            pot = json.loads((Path(base) / pot).read_text())
        V = potential_from_dict(pot)
        settings = CheckSettings(**data.get("settings", {}))
        return RunConfig(
            potential=V,
            schedule=dict(data["schedule"]),
            delta=tuple(int(x) for x in data["delta"]),
            rho_list=[float(r) for r in data["rho_list"]],
            samples_per_rho=int(data.get("samples_per_rho", 4)),
            seed=int(data.get("seed", 0)) if seed is None else int(seed),
            r_cut=dict(data.get("r_cut", {"factor_of_max_rho": 1.4})),
            settings=settings,
            checks=tuple(data.get("checks", CHECK_IDS)),
            out=out if out is not None else data.get("out"),
        )
    except (KeyError, TypeError, ValueError, OSError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid configuration: {exc}") from exc


# ---------------------------------------------------------------- checks


def _record(check, sched, gamma, delta, error, N=-1, i=-1, s=-1):
    return ErrorRecord(check, sched.rho, tuple(gamma), tuple(delta), float(error),
                       int(N), int(i), int(s), sched.desk)


def line_attached(eta: np.ndarray, system: BlockSystem, M: float) -> np.ndarray:
    """Mask of eigenvalues within ``M`` of some line value ``|h_s|^2``, ``s <= a1``."""
    hs = system.index.norms_sq()[: system.index.a1]
    if len(hs) == 0:
        return np.zeros(len(eta), dtype=bool)
    return np.abs(eta[:, None] - hs[None, :]).min(axis=1) <= M


def separation_margin(system: BlockSystem, M: float, eta: np.ndarray | None = None) -> float:
    """Smallest distance from a line-attached eigenvalue of C to an off-line ``|h_tau|^2``."""
    eta = np.linalg.eigvalsh(system.C) if eta is None else eta
    hs = system.index.norms_sq()
    off = hs[system.index.a1:]
    near = eta[line_attached(eta, system, M)]
    if len(off) == 0 or len(near) == 0:
        return math.inf
    return float(np.abs(near[:, None] - off[None, :]).min())


def check_matrix_chain(V: MatrixPotential, gamma, delta, sched: ParameterSchedule,
                       system: BlockSystem | None = None, K: int | None = None):
    """Records for lem21, thm22, thm23 and thm24.

    Returns ``(records, margin_ok)``; ``margin_ok`` is False when the
    separation invariant is violated.
    """
    if system is None:
        system = build_block_system(V, gamma, delta, sched)
    M = majorants(V).M
    eta_C = np.linalg.eigvalsh(system.C)
    eta_D = np.linalg.eigvalsh(system.D)
    records = []

    margin = separation_margin(system, M, eta_C)
    need = 0.25 * sched.rho**sched.alpha2
    records.append(_record("lem21", sched, gamma, delta, margin))
    margin_ok = margin > need

    attached = np.flatnonzero(line_attached(eta_C, system, M))
    if len(attached) and len(eta_D):
        g = nearest_gaps(eta_C[attached], eta_D)
        worst = int(np.argmax(g.gaps))
        records.append(_record("thm22", sched, gamma, delta, g.gaps[worst], s=attached[worst]))
    if len(eta_D):
        g = nearest_gaps(eta_D, eta_C)
        worst = int(np.argmax(g.gaps))
        records.append(_record("thm23", sched, gamma, delta, g.gaps[worst], s=worst))

    dec = system.decomposition
    K = default_truncation(system.index.a1) if K is None else K
    spec = spec_from_potential(V, delta, dec, K)
    eta_T = sl_eigenvalues(spec).values
    eta_E = np.linalg.eigvalsh(system.E)
    inner = np.flatnonzero(inner_attached(eta_T, spec, system.index.a1, M))
    if len(inner) and len(eta_E):
        g = nearest_gaps(eta_T[inner], eta_E)
        worst = int(np.argmax(g.gaps))
        records.append(_record("thm24", sched, gamma, delta, g.gaps[worst], s=inner[worst]))
    return records, margin_ok


def inner_attached(eta_T: np.ndarray, spec, a1: int, bound: float) -> np.ndarray:
    """Mask of T-eigenvalues within ``bound`` of a diagonal value of the inner half of the line.

    The inner half is ``k = 1..ceil(a1/2)`` in the interleaved enumeration.
    """
    half = max(1, (a1 + 1) // 2)
    n = enumeration(half)
    diag = spec.deltaNormSq * (spec.l + n + spec.v) ** 2
    return np.abs(eta_T[:, None] - diag[None, :]).min(axis=1) <= bound


def _oracle_window(oracle: OracleResult, centre: float, half: float) -> np.ndarray:
    return oracle.window(centre - half, centre + half)


def _nearest_trusted(oracle: OracleResult, value: float) -> tuple[int, float]:
    idx = np.flatnonzero(oracle.trusted)
    if len(idx) == 0:
        raise ValueError("oracle has no trusted eigenvalues")
    d = np.abs(oracle.values[idx] - value)
    k = int(np.argmin(d))
    return int(idx[k]), float(d[k])


def check_main_asymptotics(V: MatrixPotential, gamma, delta, sched: ParameterSchedule,
                       oracle: OracleResult, system: BlockSystem | None = None,
                       K: int | None = None) -> list[ErrorRecord]:
    """``|beta|^2 + eta_s + lambda_i`` against the oracle.

    Sturm-Liouville eigenvalues are used when ``|eta_s + |beta|^2 - |gamma|^2|``
    is below ``(3/8) rho^alpha1``.
    """
    if system is None:
        system = build_block_system(V, gamma, delta, sched)
    dec = system.decomposition
    K = default_truncation(system.index.a1) if K is None else K
    eta = sl_eigenvalues(spec_from_potential(V, delta, dec, K)).values
    lam = mean_eigensystem(V).lambdas
    gsq = norm_sq(gamma, V.box)
    half = 0.375 * sched.level(1)
    records = []
    for s in np.flatnonzero(np.abs(eta + dec.beta_norm_sq - gsq) < half):
        for i, li in enumerate(lam):
            target = dec.beta_norm_sq + eta[s] + li
            if target > oracle.basis.trusted_limit:
                log.warning("main: target %.6g for %s lies outside the trusted region", target, gamma)
                continue
            N, err = _nearest_trusted(oracle, target)
            records.append(_record("main", sched, gamma, delta, err, N, i, s))
    if not records:
        log.warning("main: empty window for gamma=%s at rho=%g", gamma, sched.rho)
    return records


def check_thm1_thm2(V: MatrixPotential, gamma, sched: ParameterSchedule, oracle: OracleResult,
                    settings: CheckSettings = CheckSettings(), delta=None) -> list[ErrorRecord]:
    """Oracle eigenvalues near ``|gamma|^2`` versus ``lambda_i + eta_s(C)``."""
    dclass = classify(gamma, sched, V.box)
    idx = build_Bk(gamma, dclass.directions, sched, V.box)
    eta = np.linalg.eigvalsh(assemble_C(V, idx).C)
    lam = mean_eigensystem(V).lambdas
    cand = (lam[:, None] + eta[None, :])  # (i, s)
    gsq = norm_sq(gamma, V.box)
    half = 0.5 * sched.level(1)
    rep = tuple(delta) if delta is not None else (dclass.directions[0] if dclass.directions else ())
    records = []

    basis = oracle.basis
    m = basis.m
    # the mean V0 shifts every level by some lambda_i, so the window follows it
    win = np.unique(np.concatenate([_oracle_window(oracle, gsq + li, half) for li in lam]))
    if len(win):
        r0 = basis.row(canonicalize(gamma), 0)
        overlaps = np.abs(oracle.decomposition.vectors[r0:r0 + m, win]).max(axis=0)
        thresh = settings.overlap_c17 * sched.rho ** (-settings.overlap_c * sched.alpha)
        for N, ov in zip(win, overlaps):
            if ov <= thresh:
                continue
            d = np.abs(cand - oracle.values[N])
            i, s = np.unravel_index(int(np.argmin(d)), d.shape)
            records.append(_record("thm1", sched, gamma, rep, d[i, s], N, i, s))
    else:
        log.warning("thm1: empty oracle window for gamma=%s at rho=%g", gamma, sched.rho)

    near = np.abs(eta - gsq) < 0.375 * sched.level(1)
    for i, s in zip(*np.nonzero(np.broadcast_to(near, cand.shape))):
        if cand[i, s] > basis.trusted_limit:
            continue
        N, err = _nearest_trusted(oracle, cand[i, s])
        records.append(_record("thm2", sched, gamma, rep, err, N, i, s))
    return records


# ---------------------------------------------------------------- slopes


def fit_slope(rhos: Sequence[float], errors: Sequence[float]) -> float:
    x = np.log(np.asarray(rhos, dtype=float))
    y = np.log(np.maximum(np.asarray(errors, dtype=float), ERROR_FLOOR))
    if len(np.unique(x)) < 3:
        raise ValueError("slope fitting needs at least three distinct rho values")
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(coef[0])


def envelope(records: Sequence[ErrorRecord], check_id: str) -> tuple[list[float], list[float]]:
    """Largest error per rho for one check."""
    per: dict[float, float] = {}
    for r in records:
        if r.check_id == check_id:
            per[r.rho] = max(per.get(r.rho, 0.0), r.error)
    rhos = sorted(per)
    return rhos, [per[r] for r in rhos]


def predicted_exponent(check_id: str, sched: ParameterSchedule) -> float | None:
    d, a, a2 = sched.d, sched.alpha, sched.alpha2
    if check_id == "thm2":
        return -sched.p * a + d / 4 * 3**d * a + (d - 1) / 2
    if check_id in ("thm22", "thm24"):
        return -0.75 * a2
    if check_id in ("thm23", "main"):
        return -0.5 * a2
    return None


def nonincreasing(errors: Sequence[float], jitter: float) -> bool:
    e = np.maximum(np.asarray(errors, dtype=float), ERROR_FLOOR)
    return bool(np.all(e[1:] <= jitter * e[:-1]))


def fit_slopes(records: Sequence[ErrorRecord], sched: ParameterSchedule | None = None,
               settings: CheckSettings = CheckSettings()) -> list[SlopeReport]:
    out = []
    for cid in RATE_CHECKS:
        rhos, errs = envelope(records, cid)
        if not rhos:
            continue
        if len(rhos) < 3:
            raise ValueError(f"check {cid} has fewer than three rho values")
        slope = fit_slope(rhos, errs)
        pred = predicted_exponent(cid, sched) if sched is not None else None
        ok = slope <= settings.slope_threshold and nonincreasing(errs, settings.jitter)
        out.append(SlopeReport(cid, slope, pred, ok))
    return out


# ---------------------------------------------------------------- runner


def _work_item(args):
    cfg, rho = args
    return run_rho(cfg, rho)


def run_rho(cfg: RunConfig, rho: float) -> tuple[list[ErrorRecord], list[tuple]]:
    """All records for one rho, plus the list of separation violations."""
    V = cfg.potential
    sched = cfg.schedule_for(rho)
    gammas = sample_single_resonance(cfg.delta, sched, V.box, cfg.samples_per_rho,
                                     cfg.seed + int(round(rho * 1000)))
    records: list[ErrorRecord] = []
    violations = []
    if not gammas:
        return records, violations
    need_oracle = {"thm1", "thm2", "main"} & set(cfg.checks)
    oracle = oracle_eigenvalues(V, cfg.r_cut_for(rho)) if need_oracle else None
    for g in gammas:
        system = build_block_system(V, g, cfg.delta, sched)
        chain, ok = check_matrix_chain(V, g, cfg.delta, sched, system)
        if not ok:
            violations.append((rho, g))
        records += chain
        if oracle is not None:
            records += check_main_asymptotics(V, g, cfg.delta, sched, oracle, system)
            records += check_thm1_thm2(V, g, sched, oracle, cfg.settings, cfg.delta)
    records = [r for r in records if r.check_id in cfg.checks]
    return records, violations


@dataclass
class RunResult:
    records: list[ErrorRecord]
    slopes: list[SlopeReport]
    violations: list[tuple]

    @property
    def exit_code(self) -> int:
        if self.violations:
            return 3
        return 0 if all(s.passed for s in self.slopes) else 1


def run(cfg: RunConfig, jobs: int = 1) -> RunResult:
    items = [(cfg, rho) for rho in cfg.rho_list]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_work_item, items))
    else:
        results = [_work_item(it) for it in items]
    records = sorted((r for rec, _ in results for r in rec), key=ErrorRecord.sort_key)
    violations = [v for _, viol in results for v in viol]
    sched = cfg.schedule_for(cfg.rho_list[-1])
    slopes = fit_slopes(records, sched, cfg.settings) if records else []
    return RunResult(records, slopes, violations)


def records_to_csv(records: Sequence[ErrorRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def records_from_csv(text: str) -> list[ErrorRecord]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != CSV_HEADER:
        raise ValueError("records file has an unexpected header")
    out = []
    for row in rows[1:]:
        if not row:
            continue
        cid, rho, g, dl, err, N, i, s, desk = row
        out.append(ErrorRecord(
            cid, float(rho),
            tuple(int(x) for x in g.split(";")) if g else (),
            tuple(int(x) for x in dl.split(";")) if dl else (),
            float(err), int(N), int(i), int(s), desk == "true",
        ))
    return out


def write_outputs(result: RunResult, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "records.csv").write_text(records_to_csv(result.records))
    (out / "slopes.json").write_text(
        json.dumps([s.to_dict() for s in result.slopes], indent=2) + "\n"
    )
