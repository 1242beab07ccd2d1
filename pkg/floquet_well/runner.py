"""
Run-mode orchestration: turns a RunConfig into solves, tables and sidecars
on disk.
"""

from __future__ import annotations

import contextlib
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, List

import numpy as np
import pandas as pd
from rich.progress import (
    BarColumn,
    Progress,
    SpinnerColumn,
    TextColumn,
    TimeElapsedColumn,
)

from . import __version__
from .config import RunConfig, expand_range
from .continuation import (
    Trajectory,
    continue_in_F2,
    critical_point,
)
from .errors import ConfigError, ContinuationStuckError, FloquetWellError
from .exporter import (
    degeneracy_table,
    emission_table,
    grid_table,
    load_solution,
    load_trajectory,
    mark_partial,
    save_solution,
    save_trajectory,
    scatter_table,
    scattering_sidecar,
    spectrum_table,
    trajectory_table,
    write_json,
    write_metadata,
    write_table,
)
from .matching import (
    FloquetSolution,
    MatchingProblem,
    pole_solve,
    radiating_solution,
    scattering_grid,
    scattering_solve,
    truncation_check,
)
from .observables import emission_density, flux_balance, residual_verify
from .spectrum import bound_states, degeneracy_scan, static_spectrum

logger = logging.getLogger(__name__)


@dataclass
class RunResult:
    mode: str
    out_dir: Path
    success: bool = True
    artifacts: List[Path] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)
    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)


def seed_guess(config: RunConfig, problem: MatchingProblem) -> complex:
    """
    Starting omega: the configured value, else the shallowest (or the
    requested) static bound state of the seed angular momentum.
    """
    seed = config.seed
    if seed.omega is not None:
        if isinstance(seed.omega, (int, float)):
            return complex(seed.omega)
        return complex(*seed.omega)
    parity = problem.truncation.parity
    l = seed.l if seed.l is not None else (0 if parity in (1, None) else 1)
    if parity is not None and (-1) ** l != parity:
        raise ConfigError(
            f"seed l={l} is outside the parity sector {parity}", key="seed.l"
        )
    well = problem.well
    states = [s for s in bound_states(well.V0, well.d, l) if s.l == l]
    if not states:
        raise ConfigError(f"no static bound state with l={l}", key="seed.l")
    index = seed.index if seed.index is not None else len(states) - 1
    if not 0 <= index < len(states):
        raise ConfigError(
            f"only {len(states)} bound state(s) with l={l}", key="seed.index"
        )
    return complex(states[index].energy)


class Runner:
    """Execute one configured run and persist its artifacts."""

    def __init__(self, config: RunConfig, show_progress: bool = True):
        self.config = config
        self.show_progress = show_progress
        self.out_dir = Path(config.out)
        self.result = RunResult(config.mode, self.out_dir)

    def run(self) -> RunResult:
        handlers: Dict[str, Callable[[], None]] = {
            "static-spectrum": self._static_spectrum,
            "ep-scan": self._ep_scan,
            "pole-trace": self._pole_trace,
            "critical-point": self._critical_point,
            "scatter": self._scatter,
            "scatter-grid": self._scatter_grid,
            "emission": self._emission,
            "verify": self._verify,
        }
        self.out_dir.mkdir(parents=True, exist_ok=True)
        try:
            handlers[self.config.mode]()
        except FloquetWellError as e:
            self.result.success = False
            self.result.summary["error"] = f"{type(e).__name__}: {e}"
            if self.result.artifacts:
                self.result.artifacts.append(
                    mark_partial(self.out_dir, self.result.summary["error"])
                )
            raise
        finally:
            self._write_metadata()
        return self.result

    def _write_metadata(self) -> None:
        path = write_metadata(
            self.out_dir,
            self.config.resolved(),
            __version__,
            self.result.summary,
            datetime.now(timezone.utc).isoformat(),
        )
        self.result.artifacts.append(path)

    def _table(self, name: str, frame: pd.DataFrame) -> None:
        self.result.tables[name] = frame
        self.result.artifacts.append(
            write_table(frame, self.out_dir / f"{name}.csv")
        )

    def _json(self, name: str, data: Any) -> None:
        self.result.artifacts.append(
            write_json(self.out_dir / f"{name}.json", data)
        )

    @contextlib.contextmanager
    def _progress(self, description: str, total: float):
        if not self.show_progress:
            yield lambda advance: None
            return
        with Progress(
            SpinnerColumn(),
            TextColumn("[progress.description]{task.description}"),
            BarColumn(),
            TimeElapsedColumn(),
            transient=True,
        ) as progress:
            task = progress.add_task(description, total=total)
            yield lambda advance: progress.advance(task, advance)

    def _static_spectrum(self) -> None:
        section = self.config.spectrum
        well = self.config.well_model()
        values = expand_range(section.values, "spectrum.values")
        rows = static_spectrum(
            values,
            section.sweep,
            d=section.d if section.d is not None else well.d,
            A_over_pi=(
                section.A_over_pi
                if section.A_over_pi is not None
                else well.A_over_pi
            ),
            l_max=section.l_max,
        )
        frame = spectrum_table(rows)
        self._table("spectrum", frame)
        self.result.summary["bound_states"] = len(frame)
        self.result.summary["parameters"] = len(values)

    def _ep_scan(self) -> None:
        section = self.config.spectrum
        A_over_pi = (
            section.A_over_pi
            if section.A_over_pi is not None
            else self.config.well_model().A_over_pi
        )
        scan = degeneracy_scan(
            expand_range(section.values, "spectrum.values"),
            A_over_pi,
            tuple(section.l_pair),
            levels=section.levels,
        )
        self._table("ep_scan", degeneracy_table(scan))
        self.result.summary["levels"] = [list(level) for level in scan.levels]
        self.result.summary["crossings"] = [
            {
                "V0": c.V0,
                "omega": list(c.energies),
                "residual": c.residual,
            }
            for c in scan.crossings
        ]

    def _seed(self, problem: MatchingProblem) -> FloquetSolution:
        if self.config.seed.solution_file:
            return load_solution(Path(self.config.seed.solution_file))
        solution = pole_solve(seed_guess(self.config, problem), problem)
        self.result.summary["seed_omega"] = solution.omega
        return solution

    def _trace(self) -> Trajectory:
        config = self.config
        earlier: List[FloquetSolution] = []
        previous = None
        if config.seed.resume:
            earlier = load_trajectory(Path(config.seed.resume)).points
            seed = earlier[-1]
            previous = earlier[-2] if len(earlier) > 1 else None
            earlier = earlier[:-1]
        else:
            seed = self._seed(config.problem())
        target = config.drive.F2_target
        if target is None:
            target = seed.F2

        try:
            with self._progress(
                "Continuing in F2", abs(target - seed.F2) or 1.0
            ) as advance:
                state = {"F2": seed.F2}

                def on_step(solution):
                    advance(abs(solution.F2 - state["F2"]))
                    state["F2"] = solution.F2

                trajectory = continue_in_F2(
                    seed, target, config.continuation, previous, on_step
                )
        except ContinuationStuckError as e:
            partial = Trajectory(earlier + list(e.trajectory or []))
            self._write_trajectory(partial)
            raise
        trajectory = Trajectory(earlier + trajectory.points)
        self._write_trajectory(trajectory)
        self._truncation_checks(trajectory)
        return trajectory

    def _write_trajectory(self, trajectory: Trajectory) -> None:
        if not len(trajectory):
            return
        self._table("trajectory", trajectory_table(trajectory))
        self.result.artifacts.append(
            save_trajectory(trajectory, self.out_dir / "trajectory.json")
        )
        self.result.artifacts.append(
            save_solution(trajectory.last, self.out_dir / "last_solution.json")
        )
        self.result.summary["points"] = len(trajectory)
        self.result.summary["final_F2"] = trajectory.last.F2
        self.result.summary["final_omega"] = trajectory.last.omega
        self.result.summary["degenerate_points"] = sum(
            1 for p in trajectory if p.diagnostics.degenerate
        )

    def _truncation_checks(self, trajectory: Trajectory) -> None:
        checks = self.config.checks
        if checks.truncation_points <= 0:
            return
        count = min(checks.truncation_points, len(trajectory))
        picks = np.unique(
            np.linspace(0, len(trajectory) - 1, count).astype(int)
        )
        reports = []
        for index in picks:
            report = truncation_check(
                trajectory.points[index],
                threshold=checks.truncation_threshold,
            )
            reports.append(
                {
                    "F2": trajectory.points[index].F2,
                    "delta": report.delta,
                    "flagged": report.flagged,
                }
            )
        self.result.summary["truncation_checks"] = reports
        self.result.summary["truncation_flagged"] = any(
            r["flagged"] for r in reports
        )

    def _pole_trace(self) -> None:
        self._trace()

    def _critical_point(self) -> None:
        trajectory = self._trace()
        found = critical_point(trajectory)
        if found is None:
            self.result.summary["critical_point"] = None
            return
        self.result.summary["critical_point"] = {
            "F2": found.F2,
            "omega": found.omega,
            "Im_omega": found.solution.omega.imag,
        }
        self.result.artifacts.append(
            save_solution(
                found.solution, self.out_dir / "critical_solution.json"
            )
        )

    def _emission(self) -> None:
        trajectory = self._trace()
        frames = []
        for solution in trajectory:
            try:
                radiating = radiating_solution(solution)
            except FloquetWellError as e:
                logger.warning(
                    "No radiating partner at F2=%g: %s", solution.F2, e
                )
                continue
            density = emission_density(radiating)
            frame = emission_table(
                density, solution.F2, self.config.emission.theta_points
            )
            if not frame.empty:
                frame.insert(4, "rate", density.rate)
                frame["time_reversed"] = radiating is not solution
                frames.append(frame)
        frame = pd.DataFrame()
        if frames:
            frame = pd.concat(frames, ignore_index=True)
        self._table("emission", frame)
        if not frame.empty:
            dominant = frame.loc[frame.groupby("F2")["weight"].idxmax()]
            self.result.summary["dominant_channels"] = [
                {"F2": float(row.F2), "j": int(row.j)}
                for row in dominant.itertuples()
            ]

    def _scatter(self) -> None:
        problem = self.config.problem()
        records = []
        for omega in expand_range(self.config.scatter.omega, "scatter.omega"):
            records.append(
                scattering_solve(
                    omega, problem, tuple(self.config.scatter.input_channel)
                )
            )
        self._table("scatter", scatter_table(records))
        self._json(
            "scatter", {"records": [scattering_sidecar(r) for r in records]}
        )
        if records:
            self.result.summary["max_flux_imbalance"] = max(
                flux_balance(r).imbalance for r in records
            )

    def _scatter_grid(self) -> None:
        config = self.config
        F2_values = expand_range(config.drive.F2_values, "drive.F2_values")
        omegas = expand_range(config.scatter.omega, "scatter.omega")
        total = len(F2_values) * len(omegas)
        with self._progress("Scattering grid", max(total, 1)) as advance:
            cells = scattering_grid(
                F2_values,
                omegas,
                config.problem(),
                tuple(config.scatter.input_channel),
                config.workers,
                on_cell=lambda cell: advance(1),
            )
        self._table("grid", grid_table(cells))
        failures = [
            {"F2": c.F2, "omega": c.omega, "error": c.error}
            for c in cells
            if c.error
        ]
        self.result.summary["cells"] = len(cells)
        self.result.summary["failures"] = failures

    def _verify(self) -> None:
        config = self.config
        if config.seed.solution_file:
            solution = load_solution(Path(config.seed.solution_file))
        else:
            solution = self._seed(config.problem())
        section = config.verify
        rng = np.random.default_rng(section.rng_seed)
        d = solution.well.d
        points = []
        while len(points) < section.points:
            r = rng.uniform(0.05 * d, section.r_max_factor * d)
            if abs(r - d) < 0.05 * d:
                continue
            points.append(
                (r, rng.uniform(0.0, math.pi), rng.uniform(0.0, math.pi))
            )
        residual = residual_verify(solution, points)
        passed = residual < section.threshold
        self.result.success = passed
        self.result.summary.update(
            {
                "omega": solution.omega,
                "max_residual": residual,
                "threshold": section.threshold,
                "passed": passed,
            }
        )
        self._json("verify", self.result.summary)


def run(config: RunConfig, show_progress: bool = True) -> RunResult:
    """Execute the configured mode."""
    return Runner(config, show_progress).run()

