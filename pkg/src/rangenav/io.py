"""Plain-text writers: CSV logs with 17 significant digits and key=value summaries."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from numpy.typing import NDArray

from .lifted import BCAL, build_c_family, assemble_ltv
from .observability import CrossCheckReport
from .riccati import RiccatiRun
from .scenario import SensorLog, TruthRun

FLOAT_FORMAT = "%.17g"

_XYZ = ("x", "y", "z")
SIMULATION_HEADER = (
    ["t"]
    + [f"p_I_{a}" for a in _XYZ]
    + [f"v_I_{a}" for a in _XYZ]
    + [f"R_{i}{j}" for i in range(3) for j in range(3)]
    + [f"a_B_{a}" for a in _XYZ]
    + [f"omega_{a}" for a in _XYZ]
    + ["d_y"]
    + [f"omega_y_{a}" for a in _XYZ]
    + [f"a_y_{a}" for a in _XYZ]
    + [f"m_y_{a}" for a in _XYZ]
)
RICCATI_HEADER = ["t"] + [f"x_hat_{i}" for i in range(13)] + ["trace_P", "min_eig_P", "innovation"]
ATTITUDE_HEADER = ["t"] + [f"R_hat_{i}{j}" for i in range(3) for j in range(3)] + ["attitude_error_rad"]
AUDIT_HEADER = ["window_start", "delta", "level", "min_eig"]


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return FLOAT_FORMAT % float(value)


def write_table(path: Path, header: Sequence[str], rows: NDArray | Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def read_table(path: Path) -> tuple[list[str], NDArray]:
    """Read a numeric CSV written by :func:`write_table`."""
    with open(path, newline="") as fh:
        header = next(csv.reader(fh))
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def simulation_rows(truth: TruthRun, sensors: SensorLog) -> NDArray:
    n = len(truth)
    return np.hstack(
        [
            truth.t[:, None],
            truth.p_I,
            truth.v_I,
            truth.R.reshape(n, 9),
            truth.a_B,
            truth.omega,
            sensors.d_y[:, None],
            sensors.omega_y,
            sensors.a_y_B,
            sensors.m_y_B,
        ]
    )


def write_simulation(path: Path, truth: TruthRun, sensors: SensorLog) -> None:
    write_table(path, SIMULATION_HEADER, simulation_rows(truth, sensors))


def write_riccati(path: Path, run: RiccatiRun) -> None:
    rows = np.hstack([run.t[:, None], run.x_hat, run.P_trace[:, None], run.P_min_eig[:, None], run.innovation[:, None]])
    write_table(path, RICCATI_HEADER, rows)


def write_attitude(path: Path, t: NDArray, R_hat: NDArray, error: NDArray) -> None:
    rows = np.hstack([t[:, None], R_hat.reshape(len(t), 9), np.asarray(error)[:, None]])
    write_table(path, ATTITUDE_HEADER, rows)


def write_audit(path: Path, report: CrossCheckReport) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(AUDIT_HEADER)
        for row in report.rows():
            writer.writerow([_fmt(v) for v in row])
        margins = report.margins()
        summary = " ".join(f"{k}={_fmt(v)}" for k, v in margins.items())
        fh.write(f"# overall {summary}\n")


def write_summary(path: Path, summary: Mapping[str, object]) -> None:
    with open(path, "w") as fh:
        for k, v in summary.items():
            fh.write(f"{k}={_fmt(v)}\n")


def read_summary(path: Path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if line.strip():
            k, v = line.split("=", 1)
            out[k] = v
    return out


def write_model_dump(out: Path, omega: NDArray, a_B: NDArray, g_norm_sq: float) -> None:
    """Dump the C family, T, the system matrix and the input matrix at one sample."""
    fam = build_c_family()
    for name, M in zip(("C1", "C2", "C3", "C4", "C5_sym"), (*fam, fam.C5_sym)):
        np.savetxt(out / f"{name}.csv", M, fmt=FLOAT_FORMAT, delimiter=",")
    ltv = assemble_ltv(omega, a_B, g_norm_sq)
    np.savetxt(out / "T.csv", ltv.T, fmt=FLOAT_FORMAT, delimiter=",")
    np.savetxt(out / "Acal.csv", ltv.Acal, fmt=FLOAT_FORMAT, delimiter=",")
    np.savetxt(out / "Bcal.csv", BCAL, fmt=FLOAT_FORMAT, delimiter=",")
