"""Deterministic artifact emission: CSVs and the run manifest.

Every file starts with the line ``# digest=<hash>`` tying it to the exact
configuration that produced it.  Numeric payloads are written at 12
significant digits, comma-delimited, LF line endings, no quoting.  The
manifest is indented JSON so its volatile fields (timestamp, wall time)
sit isolated on their own lines and diff cleanly.
"""

from __future__ import annotations

import json
import platform
import time
from pathlib import Path

import numpy as np

from .errors import IOArtifactError


def _fmt(x, precision: int = 12) -> str:
    return f"{float(x):.{precision}g}"


def _open_out(path: Path):
    if not path.parent.is_dir():
        raise IOArtifactError(f"output directory {path.parent} does not exist")
    return open(path, "w", encoding="utf-8", newline="\n")


def trajectory_columns(labels) -> list[str]:
    cols = []
    for lab in labels:
        cols.append("F_e" if lab == "e" else f"F_gamma1{lab.removeprefix('gamma')}")
    return cols


def write_trajectory_csv(path, traj, digest: str, precision: int = 12) -> Path:
    path = Path(path)
    cols = trajectory_columns(traj.labels)
    with _open_out(path) as fh:
        fh.write(f"# digest={digest}\n")
        fh.write("t," + ",".join(cols) + ",norm\n")
        norms = traj.fidelities.sum(axis=1)
        for i, t in enumerate(traj.grid):
            row = [_fmt(t, precision)]
            row += [_fmt(v, precision) for v in traj.fidelities[i]]
            row.append(_fmt(norms[i], precision))
            fh.write(",".join(row) + "\n")
    return path


def write_sweep_csv(path, result, digest: str, precision: int = 12) -> Path:
    path = Path(path)
    with _open_out(path) as fh:
        fh.write(f"# digest={digest}\n")
        fh.write("epsilon,lambda,fidelity\n")
        for il, lam in enumerate(result.lambdas):
            for ie, eps in enumerate(result.axis):
                fh.write(f"{_fmt(eps, precision)},{_fmt(lam, precision)},"
                         f"{_fmt(result.fidelities[il, ie], precision)}\n")
    return path


def write_schedule_csv(path, pulses, T: float, digest: str,
                       n: int = 800, precision: int = 12) -> Path:
    """Sample the drive schedule on interval midpoints (keeps clear of the
    stage-boundary envelope divergence of chiral schedules)."""
    path = Path(path)
    ts = (np.arange(n) + 0.5) * (T / n)
    amps = pulses.amplitudes(ts)
    dets = pulses.detunings(ts)
    M = pulses.n_drives
    with _open_out(path) as fh:
        fh.write(f"# digest={digest}\n")
        head = ["t"] + [f"Omega_{k+1}" for k in range(M)] \
            + [f"Delta_{k+1}" for k in range(M)] + ["Delta_e"]
        fh.write(",".join(head) + "\n")
        for i, t in enumerate(ts):
            row = [_fmt(t, precision)]
            row += [_fmt(v, precision) for v in np.abs(amps[i])]
            row += [_fmt(v, precision) for v in dets[i]]
            row.append(_fmt(0.0, precision))
            fh.write(",".join(row) + "\n")
    return path


def write_braid_report(path_txt, path_csv, report, digest: str,
                       precision: int = 12) -> tuple[Path, Path]:
    path_txt, path_csv = Path(path_txt), Path(path_csv)
    with _open_out(path_txt) as fh:
        fh.write(f"# digest={digest}\n")
        fh.write(f"pair = {report.pair[0]},{report.pair[1]}\n")
        fh.write(f"plane_distance_to_exchange = {_fmt(report.distance, precision)}\n")
        fh.write(f"square_distance_to_minus_identity = "
                 f"{_fmt(report.square_distance, precision)}\n")
        fh.write(f"unitarity_defect = {_fmt(report.unitarity_defect, precision)}\n")
        fh.write(f"max_leakage = {_fmt(report.max_leakage, precision)}\n")
        fh.write(f"leakage_flag = {str(report.leakage_flag).lower()}\n")
        fh.write(f"global_phase = {_fmt(report.global_phase, precision)}\n")
        for lab, f in report.final_fidelities.items():
            fh.write(f"final_fidelity_{lab} = {_fmt(f, precision)}\n")
    with _open_out(path_csv) as fh:
        fh.write(f"# digest={digest}\n")
        fh.write("row,col,real,imag\n")
        U = report.realized_full
        for r in range(U.shape[0]):
            for c in range(U.shape[1]):
                fh.write(f"{r},{c},{_fmt(U[r, c].real, precision)},"
                         f"{_fmt(U[r, c].imag, precision)}\n")
    return path_txt, path_csv


def write_zero_modes_csv(path, modes, digest: str, precision: int = 12) -> Path:
    path = Path(path)
    with _open_out(path) as fh:
        fh.write(f"# digest={digest}\n")
        fh.write("mode,energy,weight_first,weight_last,localization_length\n")
        for i, m in enumerate(modes):
            loc = m.localization_length
            loc_s = loc if isinstance(loc, str) else _fmt(loc, precision)
            fh.write(f"{i},{_fmt(m.energy, precision)},"
                     f"{_fmt(m.amplitudes[0] ** 2, precision)},"
                     f"{_fmt(m.amplitudes[-1] ** 2, precision)},{loc_s}\n")
    return path


def write_residuals_csv(path, rows, digest: str, precision: int = 12) -> Path:
    path = Path(path)
    with _open_out(path) as fh:
        fh.write(f"# digest={digest}\n")
        fh.write("passage,residual,residual_coarse,converged\n")
        for name, fine, coarse, conv in rows:
            fh.write(f"{name},{_fmt(fine, precision)},{_fmt(coarse, precision)},"
                     f"{str(conv).lower()}\n")
    return path


def write_manifest(path, digest: str, wall_time: float, acceptance: dict,
                   artifacts: list[str]) -> Path:
    import numpy
    import scipy

    from . import __version__
    path = Path(path)
    doc = {
        "digest": digest,
        "versions": {
            "mzbraid": __version__,
            "numpy": numpy.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "acceptance": {k: bool(v) for k, v in acceptance.items()},
        "artifacts": sorted(artifacts),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "wall_time_s": round(wall_time, 3),
    }
    with _open_out(path) as fh:
        json.dump(doc, fh, indent=2, sort_keys=False)
        fh.write("\n")
    return path
