"""Command-line surface.

Commands: ``zero-modes``, ``braid``, ``sweep``, ``chiral``,
``check-passage``.  Flags override config-file keys; every run writes its
CSV artifacts plus a JSON manifest carrying the config digest, package
versions, wall time and the per-criterion acceptance summary.

Exit status: 0 on success, 2 when a built-in acceptance threshold fails,
1 on any error (with the machine-readable code on stderr).
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import artifacts, uqc
from .config import RunConfig, config_digest, parse_config, serialize_config
from .errors import IOArtifactError, MzBraidError
from .experiments import (ErrorSpec, run_braiding, run_chiral, run_error_sweep,
                          verify_braid_algebra)
from .kitaev import ChainParams, build_majorana_coupling, find_zero_modes
from .synthesis import braid_schedule, chiral_schedule, linear_braid_profile


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mzbraid",
                                description="Defect-mediated braiding and chiral "
                                            "transfer of Majorana zero modes")
    sub = p.add_subparsers(dest="experiment", required=True)

    def common(sp):
        sp.add_argument("--config", type=Path, help="key = value config file")
        sp.add_argument("--out", type=Path, default=Path("."),
                        help="output directory (must exist)")
        sp.add_argument("--tol", type=float, help="integrator fidelity tolerance")
        sp.add_argument("--no-counter-rotating", action="store_true",
                        help="drop the counter-rotating drive components")
        sp.add_argument("--allow-strong-drive", action="store_true",
                        help="waive the Omega1/Delta0 <= 0.05 budget")
        sp.add_argument("--omega", type=float, help="defect splitting (Delta0 units)")
        sp.add_argument("--lambda", dest="lam", type=float,
                        help="global-phase slope of the schedule family")

    for name in ("zero-modes", "braid", "sweep", "chiral", "check-passage"):
        sp = sub.add_parser(name)
        common(sp)
        if name == "sweep":
            sp.add_argument("--kind", choices=("omega", "rabi"))
            sp.add_argument("--lambdas", type=str,
                            help="comma-separated schedule slopes")
        if name == "chiral":
            sp.add_argument("--direction",
                            choices=("clockwise", "counterclockwise"))
            sp.add_argument("--loops", type=int, dest="n_loops")
        if name == "zero-modes":
            sp.add_argument("--mu", type=float)
            sp.add_argument("--hopping", type=float, dest="zm_J")
            sp.add_argument("--pairing", type=float, dest="zm_g")
            sp.add_argument("--sites", type=int, dest="zm_N")
    return p


def _config_from_args(args) -> RunConfig:
    document = ""
    if args.config:
        document = Path(args.config).read_text(encoding="utf-8")
    overrides = {"experiment": args.experiment}
    if args.tol is not None:
        overrides["tol"] = args.tol
    if args.no_counter_rotating:
        overrides["counter_rotating"] = False
        overrides["sweep_counter_rotating"] = False
    if args.allow_strong_drive:
        overrides["allow_strong_drive"] = True
    if args.omega is not None:
        overrides["omega"] = args.omega
        overrides["sweep_omega"] = args.omega
    if getattr(args, "lam", None) is not None:
        overrides["lam"] = args.lam
    if getattr(args, "kind", None):
        overrides["sweep_kind"] = args.kind
    if getattr(args, "lambdas", None):
        overrides["lambdas"] = tuple(float(x) for x in args.lambdas.split(","))
    if getattr(args, "direction", None):
        overrides["direction"] = args.direction
    if getattr(args, "n_loops", None):
        overrides["n_loops"] = args.n_loops
    if getattr(args, "mu", None) is not None:
        overrides["zm_mu"] = args.mu
    for name in ("zm_J", "zm_g", "zm_N"):
        if getattr(args, name, None) is not None:
            overrides[name] = getattr(args, name)
    return parse_config(document, overrides)


# ---------------------------------------------------------------------------
# experiment dispatch
# ---------------------------------------------------------------------------

def _run_zero_modes(config, out, digest):
    params = ChainParams(mu=config.zm_mu, J=config.zm_J, g=config.zm_g,
                         N=config.zm_N)
    modes = find_zero_modes(build_majorana_coupling(params), tol=config.zm_tol)
    files = [artifacts.write_zero_modes_csv(out / "zero_modes.csv", modes, digest,
                                            config.precision)]
    acc = {}
    if params.sweet_spot():
        acc["two_modes"] = len(modes) == 2
        acc["edge_energies"] = all(abs(m.energy) <= 1e-12 * abs(params.g)
                                   for m in modes)
        acc["edge_localized"] = all(m.localization_length == "exact-edge"
                                    for m in modes)
    else:
        acc["modes_within_tolerance"] = all(abs(m.energy) <= config.zm_tol
                                            for m in modes)
    return acc, files


def _run_braid(config, out, digest):
    traj, report = run_braiding(config)
    files = list(artifacts.write_braid_report(out / "braid_report.txt",
                                              out / "braid_operator.csv",
                                              report, digest, config.precision))
    files.append(artifacts.write_trajectory_csv(out / "trajectory.csv", traj,
                                                digest, config.precision))
    from .experiments import braid_pulses
    files.append(artifacts.write_schedule_csv(out / "braid_schedule.csv",
                                              braid_pulses(config),
                                              config.braid_T, digest,
                                              precision=config.precision))
    j, k = config.pair
    mid = int(np.argmin(np.abs(traj.grid - config.braid_T / 2)))
    acc = {
        "target_transfer": traj.final_fidelity(f"gamma{k}") >= 0.999,
        "midpoint_balance": abs(traj.fidelities[mid, j - 1] - 0.5) <= 0.01
        and abs(traj.fidelities[mid, k - 1] - 0.5) <= 0.01,
        "leakage_budget": report.max_leakage <= 1e-2,
        "exchange_algebra": report.square_distance <= 1e-3,
    }
    return acc, files


def _run_sweep(config, out, digest):
    kind = "omega_fluctuation" if config.sweep_kind == "omega" else "rabi_fluctuation"
    result = run_error_sweep(config, ErrorSpec(kind=kind))
    files = [artifacts.write_sweep_csv(out / "sweep.csv", result, digest,
                                       config.precision)]
    F = result.fidelities
    lams = result.lambdas
    order_ok = True
    for a in range(len(lams) - 1):
        hi, lo = F[a + 1], F[a]
        if lams[a + 1] >= lams[a]:
            order_ok &= bool(np.all(hi >= lo - 1e-3))
    acc = {"no_missing_points": len(result.missing) == 0,
           "lambda_ordering": order_ok}
    if np.any(np.isclose(result.axis, 0.0)):
        i0 = int(np.argmin(np.abs(result.axis)))
        acc["zero_error_fidelity"] = bool(np.all(F[:, i0] >= 0.999))
    return acc, files


def _run_chiral(config, out, digest):
    traj, params = run_chiral(config)
    files = [artifacts.write_trajectory_csv(out / "chiral_trajectory.csv", traj,
                                            digest, config.precision)]
    _, pulses = chiral_schedule(config.direction, T=config.T_stage)
    files.append(artifacts.write_schedule_csv(out / "chiral_schedule.csv", pulses,
                                              3 * config.T_stage, digest,
                                              n=1200, precision=config.precision))
    T = config.T_stage
    targets = params.stage_targets()
    worst = 1.0
    for m in range(1, 3 * config.n_loops + 1):
        i = int(np.argmin(np.abs(traj.grid - m * T)))
        worst = min(worst, float(traj.fidelities[i, targets[(m - 1) % 3]]))
    acc = {"boundary_transfer": worst >= 0.999}
    return acc, files


def _run_check_passage(config, out, digest):
    rows = []
    profile = linear_braid_profile(config.braid_T, config.lam)
    schedule = braid_schedule(profile, pair=tuple(config.pair))
    frame = schedule.frame()
    grid = np.linspace(0.0, schedule.T, 321)[1:-1]
    for k, name in ((0, "braid_mu1"), (1, "braid_mu2")):
        fine = uqc.check_passage(schedule.hamiltonian,
                                 lambda t, k=k: frame.projector(t, k), grid)
        coarse = uqc.check_passage(schedule.hamiltonian,
                                   lambda t, k=k: frame.projector(t, k), grid[::4])
        rows.append((name, fine, coarse, fine <= 1e-6))
    params, pulses = chiral_schedule(config.direction, T=config.T_stage)
    cframe = params.frame()
    from .dynamics import control_model
    cmodel = control_model(pulses)
    for stage in range(3):
        sgrid = np.linspace(stage * config.T_stage, (stage + 1) * config.T_stage,
                            161)[2:-2]
        fine = uqc.check_passage(cmodel.matrix,
                                 lambda t: cframe.projector(t, 3), sgrid)
        coarse = uqc.check_passage(cmodel.matrix,
                                   lambda t: cframe.projector(t, 3), sgrid[::4])
        rows.append((f"chiral_mu4_stage{stage+1}", fine, coarse, fine <= 1e-6))
    files = [artifacts.write_residuals_csv(out / "passage_residuals.csv", rows,
                                           digest, config.precision)]
    acc = {"all_passages_valid": all(r[3] for r in rows)}
    return acc, files


def dispatch(config: RunConfig, out_dir) -> int:
    """Run the configured experiment, write artifacts + manifest.

    Returns the process exit status (0 ok, 2 on acceptance-threshold
    failure); errors raise and are mapped to status 1 by ``main``.
    """
    out = Path(out_dir)
    if not out.is_dir():
        raise IOArtifactError(f"output directory {out} does not exist")
    digest = config_digest(config)
    started = time.perf_counter()
    runner = {"zero-modes": _run_zero_modes, "braid": _run_braid,
              "sweep": _run_sweep, "chiral": _run_chiral,
              "check-passage": _run_check_passage}[config.experiment]
    acceptance, files = runner(config, out, digest)
    (out / "config.resolved.ini").write_text(serialize_config(config),
                                             encoding="utf-8")
    files.append(out / "config.resolved.ini")
    artifacts.write_manifest(out / "manifest.json", digest,
                             time.perf_counter() - started, acceptance,
                             [str(Path(f).name) for f in files])
    for name, ok in acceptance.items():
        print(f"[{'PASS' if ok else 'FAIL'}] {config.experiment}: {name}")
    return 0 if all(acceptance.values()) else 2


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = _config_from_args(args)
        return dispatch(config, args.out)
    except MzBraidError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:                      # pragma: no cover
        print(f"error [E_INTERNAL]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
