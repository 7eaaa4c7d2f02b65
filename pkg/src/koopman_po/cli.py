"""Command-line entry point: ``koopman-po <command> [--config F] [--set k=v ...]``."""
from __future__ import annotations

import argparse
import os
import shutil
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import io
from .config import COMMANDS, ConfigError, RunConfig, parse_config
from .dictionary import delay_dictionary, monomial_dictionary
from .edmd import EdmdOptions, fit_koopman
from .experiments import (ExperimentSetup, fit_sweep, run_degree_sweep, run_exponent_table,
                          run_partial_observation_trial, run_sigma_sweep)
from .generator import build_generator, expm_times_vector, reference_koopman, validate_against_rk4
from .mori_zwanzig import integrate_gle, split_generator
from .simulate import make_delay_pairs, make_fullstate_pairs, simulate_dataset


class StageError(RuntimeError):
    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"stage '{stage}' failed: {type(exc).__name__}: {exc}")
        self.stage = stage


@contextmanager
def stage(name: str):
    try:
        yield
    except StageError:
        raise
    except Exception as exc:  # surfaced with the stage name
        raise StageError(name, exc) from exc


def experiment_setup(cfg: RunConfig) -> ExperimentSetup:
    e = cfg.experiment
    return ExperimentSetup(cfg.sim_config(), cfg.dict.ref_degree, e.n_test, cfg.dict.ridge,
                           e.test_points_per_traj)


def run_dir_for(cfg: RunConfig) -> Path:
    return Path(cfg.io.out) / f"{cfg.command}-{cfg.config_hash()}"


def prepare_run_dir(cfg: RunConfig) -> Path:
    path = run_dir_for(cfg)
    if path.exists():
        if not cfg.io.force:
            raise FileExistsError(f"{path} exists; pass --force to overwrite")
        shutil.rmtree(path)
    path.mkdir(parents=True)
    h = cfg.config_hash()
    (path / "manifest.toml").write_text(f"# config_hash={h}\n" + cfg.to_toml())
    return path


# subcommands; each returns the list of files written

def cmd_simulate(cfg: RunConfig, out: Path) -> list[Path]:
    h = cfg.config_hash()
    with stage("simulate"):
        ds = simulate_dataset(cfg.build_system(), cfg.sim_config())
    with stage("write"):
        return [io.save_dataset(ds, out / "dataset.csv", h)]


def cmd_fit_edmd(cfg: RunConfig, out: Path) -> list[Path]:
    h = cfg.config_hash()
    d = cfg.dict
    with stage("simulate"):
        ds = simulate_dataset(cfg.build_system(), cfg.sim_config())
    with stage("pairs"):
        if d.kind == "delay":
            pairs = make_delay_pairs(ds, cfg.experiment.observed_dims[0], d.M)
            dictionary = delay_dictionary(d.M, d.degree)
        else:
            pairs = make_fullstate_pairs(ds)
            dictionary = monomial_dictionary(ds.dim, d.degree)
    with stage("fit"):
        km = fit_koopman(pairs, dictionary, EdmdOptions(ridge=d.ridge))
    with stage("write"):
        return [*io.save_pairs(pairs, out / "pairs", h), *io.save_matrix(km, out / "koopman", h)]


def cmd_reference(cfg: RunConfig, out: Path) -> list[Path]:
    h = cfg.config_hash()
    system = cfg.build_system()
    sim = cfg.sim_config()
    with stage("reference"):
        ref = reference_koopman(system, monomial_dictionary(system.dim, cfg.dict.ref_degree),
                                sim.dt, sim.dt_obs, cfg.dict.ref_method)
        gen = build_generator(system, ref.dictionary)
    files = [*io.save_matrix(ref, out / "reference", h), *io.save_matrix(gen, out / "generator", h)]
    if system.sigma == 0:
        with stage("validate"):
            rng = np.random.default_rng(sim.seed)
            lo, hi = np.array(sim.init_box).T
            pts = rng.uniform(lo, hi, size=(cfg.experiment.n_test, system.dim))
            mae = validate_against_rk4(ref, system, pts, sim.dt)
        rows = [[f"x_{i + 1}", m] for i, m in enumerate(mae)]
        files.append(io.write_csv(out / "validation.csv", ["coordinate", "mae_vs_rk4"], rows,
                                  {"n_points": len(pts), "rk4_dt": sim.dt}, h))
    return files


def cmd_mz(cfg: RunConfig, out: Path) -> list[Path]:
    h = cfg.config_hash()
    mz = cfg.mz
    system = cfg.build_system()
    with stage("generator"):
        gen = build_generator(system, monomial_dictionary(system.dim, mz.degree))
        labels = gen.dictionary.labels()
        missing = [lab for lab in mz.observed if lab not in labels]
        if missing:
            raise ValueError(f"observed labels not in dictionary: {', '.join(missing)}")
        observed = sorted(labels.index(lab) for lab in mz.observed)
        split = split_generator(gen, observed)
    with stage("integrate"):
        # coefficients of the target observable itself: one-hot, no unobserved part
        c0 = np.zeros(len(labels))
        c0[labels.index(mz.target)] = 1.0
        obs = list(split.observed)
        sol = integrate_gle(split, c0[obs], c0[list(split.unobserved)], mz.t_end, mz.dt, mz.growth_bound)
        direct = expm_times_vector(gen, mz.t_end, c0)[obs]
        rel = float(np.linalg.norm(sol.c_O[-1] - direct) / max(np.linalg.norm(direct), 1e-300))
    files = [io.save_gle(sol, out / "gle.csv", [labels[i] for i in obs], h)]
    files.append(io.write_csv(out / "mz_check.csv", ["label", "gle", "direct"],
                              [[labels[i], a, b] for i, a, b in zip(obs, sol.c_O[-1], direct)],
                              {"t_end": mz.t_end, "dt": mz.dt, "relative_error": rel}, h))
    return files


def cmd_trial(cfg: RunConfig, out: Path) -> list[Path]:
    e = cfg.experiment
    system = cfg.build_system()
    setup = experiment_setup(cfg)
    records = []
    with stage("trial"):
        for od in e.observed_dims:
            if cfg.dict.kind == "delay":
                records += run_partial_observation_trial(system, od, e.M_values, cfg.dict.degree, e.seeds,
                                                         setup, e.powers)
            else:
                records += run_degree_sweep(system, od, e.degrees, e.seeds, setup, e.powers)
    return [io.save_records(records, out / "records.csv", cfg.config_hash())]


def cmd_sweep(cfg: RunConfig, out: Path) -> list[Path]:
    h = cfg.config_hash()
    e = cfg.experiment
    with stage("sweep"):
        records = run_sigma_sweep(cfg.build_system(), e.observed_dims, cfg.dict.M, e.sigma_grid, e.seeds,
                                  experiment_setup(cfg), cfg.dict.degree, e.powers, jobs=e.jobs)
    with stage("fit"):
        fits = fit_sweep(records)
    return [io.save_records(records, out / "records.csv", h), io.save_fits(fits, out / "fits.csv", h),
            io.save_plot_data(records, fits, out / "plot.csv", config_hash=h)]


def cmd_table(cfg: RunConfig, out: Path) -> list[Path]:
    h = cfg.config_hash()
    e = cfg.experiment
    setup = experiment_setup(cfg)
    with stage("table"):
        rows, records = run_exponent_table(e.table, e.seeds, e.sigma_grid, cfg.dict.M, setup,
                                           jobs=e.jobs, return_records=True)
    fits = fit_sweep(records)
    return [io.save_summary(rows, out / "summary.csv", h), io.save_records(records, out / "records.csv", h),
            io.save_fits(fits, out / "fits.csv", h), io.save_plot_data(records, fits, out / "plot.csv",
                                                                       config_hash=h)]


HANDLERS = {"simulate": cmd_simulate, "fit-edmd": cmd_fit_edmd, "reference": cmd_reference, "mz": cmd_mz,
            "trial": cmd_trial, "sweep": cmd_sweep, "table": cmd_table}


def run(cfg: RunConfig) -> tuple[Path, list[Path]]:
    out = prepare_run_dir(cfg)
    return out, HANDLERS[cfg.command](cfg, out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="koopman-po", description="Partial-observation Koopman experiments")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, help="TOML config file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config value, e.g. system.sigma=0.5 (repeatable)")
    p.add_argument("--seed", type=int, help="single seed for simulation and experiments")
    p.add_argument("--jobs", type=int, help="parallel workers (default: $KOOPMAN_PO_JOBS or 1)")
    p.add_argument("--out", help="output root directory")
    p.add_argument("--force", action="store_true", help="overwrite an existing run directory")
    return p


def config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides += [f"sim.seed={args.seed}", f"experiment.seeds=[{args.seed}]"]
    jobs = args.jobs if args.jobs is not None else os.environ.get("KOOPMAN_PO_JOBS")
    if jobs is not None:
        overrides.append(f"experiment.jobs={int(jobs)}")
    if args.out is not None:
        overrides.append(f"io.out={args.out!r}".replace("'", '"'))
    if args.force:
        overrides.append("io.force=true")
    return parse_config(args.config, overrides, command=args.command)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        out, files = run(cfg)
    except (StageError, FileExistsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"run directory: {out}")
    for f in files:
        print(f"  {f.name}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
