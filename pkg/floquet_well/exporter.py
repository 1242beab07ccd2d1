"""
Tables and JSON sidecars written by the CLI runs.
"""

from __future__ import annotations

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Sequence

import numpy as np
import pandas as pd

from .continuation import Trajectory
from .matching import FloquetSolution, GridCell, ScatteringRecord
from .observables import EmissionDensity
from .spectrum import DegeneracyScan, SpectrumRow

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
PARTIAL_MARKER = "PARTIAL"

GRID_COLUMNS = [
    "F2",
    "omega",
    "Re_S00",
    "Im_S00",
    "abs_S00_sq",
    "arg_S00",
    "abs_S21_sq",
    "sigma_e0",
    "sigma_r0",
    "sigma_t0",
]


class ComplexEncoder(json.JSONEncoder):
    """Complex numbers as [re, im]; numpy scalars and arrays as lists."""

    def default(self, o):
        if isinstance(o, complex):
            return [o.real, o.imag]
        if isinstance(o, (np.ndarray, np.generic)):
            return o.tolist()
        if isinstance(o, Path):
            return str(o)
        return super().default(o)


def write_json(path: Path, data: Any) -> Path:
    """
    Write data as indented JSON; complex numbers become [re, im].

    Args:
        path: Target file, parent directories are created
        data: JSON-compatible structure, numpy values allowed

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(data, cls=ComplexEncoder, indent=2, sort_keys=True),
        encoding="utf-8",
    )
    return path


def read_json(path: Path) -> Any:
    """Parse a JSON file; complex pairs stay as lists."""
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_table(frame: pd.DataFrame, path: Path) -> Path:
    """CSV with 17 significant digits so values re-import bit-exactly."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info("Wrote %d rows to %s", len(frame), path)
    return path


def read_table(path: Path) -> pd.DataFrame:
    """Read a table written by write_table without losing digits."""
    return pd.read_csv(path, float_precision="round_trip")


def trajectory_table(trajectory: Trajectory) -> pd.DataFrame:
    """
    F2, Re_omega, Im_omega, Re_k_<j>/Im_k_<j> per channel, then
    sigma_min and iterations.
    """
    rows = []
    for solution in trajectory:
        row = {
            "F2": solution.F2,
            "Re_omega": solution.omega.real,
            "Im_omega": solution.omega.imag,
        }
        for j, k in sorted(solution.momenta.exterior.items()):
            row[f"Re_k_{j}"] = k.real
            row[f"Im_k_{j}"] = k.imag
        row["sigma_min"] = solution.diagnostics.sigma_min
        row["iterations"] = solution.diagnostics.iterations
        rows.append(row)
    return pd.DataFrame(rows)


def grid_table(cells: Sequence[GridCell]) -> pd.DataFrame:
    """Grid rows in cell order; failed cells keep F2, omega and NaNs."""
    rows = []
    for cell in cells:
        if cell.record is not None:
            rows.append(cell.record.to_row())
        else:
            row = {name: math.nan for name in GRID_COLUMNS}
            row["F2"], row["omega"] = cell.F2, cell.omega
            rows.append(row)
    return pd.DataFrame(rows, columns=GRID_COLUMNS)


def scatter_table(records: Iterable[ScatteringRecord]) -> pd.DataFrame:
    """One row per scattering record, in the grid column order."""
    return pd.DataFrame(
        [record.to_row() for record in records], columns=GRID_COLUMNS
    )


def scattering_sidecar(record: ScatteringRecord) -> Dict[str, Any]:
    return {
        "F2": record.F2,
        "omega": record.omega,
        "input_channel": list(record.input_channel),
        "condition": record.condition,
        "unitarity_sum": record.unitarity_sum,
        "S": [
            {"j": j, "l1": l1, "value": complex(s), "open": bool(is_open)}
            for (j, l1), s, is_open in zip(
                record.lattice, record.S_column, record.open_mask
            )
        ],
    }


def spectrum_table(rows: Sequence[SpectrumRow]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "parameter": row.parameter,
                "V0": row.V0,
                "d": row.d,
                "A_over_pi": row.A_over_pi,
                "l": row.l,
                "index": row.index,
                "omega": row.energy,
            }
            for row in rows
        ],
        columns=["parameter", "V0", "d", "A_over_pi", "l", "index", "omega"],
    )


def degeneracy_table(scan: DegeneracyScan) -> pd.DataFrame:
    (l1, n1), (l2, n2) = scan.levels
    return pd.DataFrame(
        scan.rows,
        columns=[
            "V0",
            f"omega_l{l1}_n{n1}",
            f"omega_l{l2}_n{n2}",
            "delta_mod_quantum",
        ],
    )


def emission_table(
    density: Optional[EmissionDensity],
    F2: float,
    theta_points: int = 19,
) -> pd.DataFrame:
    """
    One row per open channel: F2, j, Re_k, weight, weight_l1_<l1>, then
    f(k, theta) on an even theta grid from 0 to pi.
    """
    if density is None:
        return pd.DataFrame()
    theta = np.linspace(0.0, np.pi, theta_points)
    rows = []
    for channel in density.channels:
        row = {
            "F2": F2,
            "j": channel.j,
            "Re_k": channel.k,
            "weight": channel.weight,
        }
        power = np.abs(channel.coefficients) ** 2 / density.normalization
        for l1, value in enumerate(power):
            row[f"weight_l1_{l1}"] = value
        for index, value in enumerate(
            density.angular_profile(channel.j, theta)
        ):
            row[f"f_theta_{index}"] = value
        rows.append(row)
    return pd.DataFrame(rows)


def save_solution(solution: FloquetSolution, path: Path) -> Path:
    return write_json(path, solution.to_dict())


def load_solution(path: Path) -> FloquetSolution:
    return FloquetSolution.from_dict(read_json(path))


def save_trajectory(trajectory: Trajectory, path: Path) -> Path:
    return write_json(
        path, {"points": [solution.to_dict() for solution in trajectory]}
    )


def load_trajectory(path: Path) -> Trajectory:
    data = read_json(path)
    return Trajectory(
        [FloquetSolution.from_dict(point) for point in data["points"]]
    )


def mark_partial(out_dir: Path, reason: str) -> Path:
    """Flag an output directory whose tables stop early."""
    path = Path(out_dir) / PARTIAL_MARKER
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(reason + "\n", encoding="utf-8")
    return path


def write_metadata(
    out_dir: Path,
    config: Dict[str, Any],
    version: str,
    diagnostics: Optional[Dict[str, Any]] = None,
    timestamp: Optional[str] = None,
) -> Path:
    return write_json(
        Path(out_dir) / "metadata.json",
        {
            "config": config,
            "version": version,
            "diagnostics": diagnostics or {},
            "timestamp": timestamp,
        },
    )

