"""Command line entry point ``verify``."""
from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from .blocks import build_block_system, dump_matrix
from .sturm import assemble_T, default_truncation, spec_from_potential
from .verify import (
    ConfigError,
    CheckSettings,
    fit_slopes,
    load_config,
    records_from_csv,
    run,
    write_outputs,
)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose):
    """Asymptotic eigenvalue checks against a Galerkin reference."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False))
@click.option("--out", default=None, help="Output directory (overrides the config).")
@click.option("--jobs", default=1, show_default=True, type=int)
@click.option("--seed", default=None, type=int, help="Override the config seed.")
def run_cmd(config_path, out, jobs, seed):
    """Sweep rho, write records.csv and slopes.json."""
    try:
        cfg = load_config(config_path, seed=seed, out=out)
    except ConfigError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(2)
    result = run(cfg, jobs=max(1, jobs))
    out_dir = cfg.out or "."
    write_outputs(result, out_dir)
    for rep in result.slopes:
        flag = "PASS" if rep.passed else "FAIL"
        click.echo(f"{rep.check_id:6s} slope={rep.slope:+.4f} {flag}")
    for rho, g in result.violations:
        click.echo(f"separation violated at rho={rho:g} gamma={g}", err=True)
    sys.exit(result.exit_code)


@main.command("corpus")
def corpus_cmd():
    """Run the built-in exactness corpus (zero and constant potentials)."""
    from .corpus import EXACT_TOL, exactness_corpus

    reports = exactness_corpus()
    for r in reports:
        flag = "PASS" if r.passed else "FAIL"
        click.echo(f"{r.name:20s} max_error={r.max_error:.3e} checks={r.n_checks} {flag}")
    click.echo(f"tolerance {EXACT_TOL:g}")
    sys.exit(0 if all(r.passed for r in reports) else 1)


@main.command("slopes")
@click.option("--in", "records_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--threshold", default=CheckSettings.slope_threshold, show_default=True, type=float)
def slopes_cmd(records_path, threshold):
    """Refit slopes from an existing records.csv."""
    try:
        records = records_from_csv(Path(records_path).read_text())
        reports = fit_slopes(records, settings=CheckSettings(slope_threshold=threshold))
    except ValueError as exc:
        click.echo(f"cannot fit slopes: {exc}", err=True)
        sys.exit(2)
    click.echo(json.dumps([r.to_dict() for r in reports], indent=2))
    sys.exit(0 if all(r.passed for r in reports) else 1)


@main.command("dump")
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False))
@click.option("--rho", required=True, type=float)
@click.option("--gamma", required=True, help="Comma separated integers, e.g. -8,7")
@click.option("--out", required=True, type=click.Path(file_okay=False))
def dump_cmd(config_path, rho, gamma, out):
    """Write C, D, D', E and T for one frequency as plain text matrices."""
    try:
        cfg = load_config(config_path)
        sched = cfg.schedule_for(rho)
        g = tuple(int(x) for x in gamma.split(","))
        system = build_block_system(cfg.potential, g, cfg.delta, sched)
    except ValueError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(2)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = spec_from_potential(cfg.potential, cfg.delta, system.decomposition,
                               default_truncation(system.index.a1))
    T = assemble_T(spec)
    dump_matrix(system.C, out_dir / "C.txt")
    dump_matrix(system.D, out_dir / "D.txt")
    dump_matrix(system.Dprime, out_dir / "Dprime.txt")
    dump_matrix(system.E, out_dir / "E.txt")
    dump_matrix(T.real, out_dir / "T_real.txt")
    dump_matrix(T.imag, out_dir / "T_imag.txt")
    click.echo(f"a1={system.index.a1} b1={system.index.b} written to {out_dir}")


if __name__ == "__main__":
    main()
