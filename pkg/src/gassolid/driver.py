"""Run orchestration: march a pellet model and collect a result series."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .analysis import conversion, conversion_by_gas_a
from .core import ModelKind, ModelParams, PelletState, SolverError, SpatialGrid
from .kernels import SeriesControl
from .steppers import DEFAULT_DECREMENT_CAP, StepStatus, make_stepper


@dataclass
class ProfileSnapshot:
    """Radial profiles captured at one sample time."""

    theta: float
    y: np.ndarray
    gas: np.ndarray
    solid: np.ndarray
    gas_c: np.ndarray | None = None
    solid_a: np.ndarray | None = None


@dataclass
class RunResult:
    """Conversion history of one run plus optional profile snapshots."""

    kind: ModelKind
    theta: np.ndarray
    x: np.ndarray
    x_a: np.ndarray | None = None
    theta_c: float | None = None
    snapshots: list[ProfileSnapshot] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    label: str = "qm"
    diagnostics: dict | None = None

    @property
    def selectivity_series(self) -> np.ndarray | None:
        if self.x_a is None:
            return None
        denom = self.x - self.x_a
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(denom > 0.0, self.x_a / np.where(denom > 0.0, denom, 1.0), np.nan)


def sample_schedule(theta_end: float, samples: int,
                    extra: tuple[float, ...] = ()) -> np.ndarray:
    if theta_end == 0.0:
        return np.zeros(1)  # degenerate run: the initial state only
    if theta_end < 0.0:
        raise SolverError("theta_end must be nonnegative")
    if samples < 2:
        raise SolverError("need at least two samples")
    base = np.linspace(0.0, theta_end, samples)
    if extra:
        pts = [t for t in extra if 0.0 <= t <= theta_end]
        base = np.unique(np.concatenate([base, np.asarray(pts, dtype=float)]))
    return base


def run_qm(params: ModelParams, grid: SpatialGrid, theta_end: float,
           samples: int = 201, snapshot_thetas: tuple[float, ...] = (),
           decrement_cap: float = DEFAULT_DECREMENT_CAP,
           series: SeriesControl | None = None) -> RunResult:
    """March the incremental analytical solver and record X(theta)."""
    stepper = make_stepper(params, grid, series, decrement_cap)
    schedule = sample_schedule(theta_end, samples, snapshot_thetas)
    snap_set = {round(float(t), 12) for t in snapshot_thetas}
    state = stepper.initial_state()
    xs = [conversion(state, params)]
    x_as = [conversion_by_gas_a(state, params)] if params.kind is ModelKind.SIMULTANEOUS else None
    snapshots: list[ProfileSnapshot] = []
    warnings: list[str] = []
    series_warn_count = 0
    series_warn_first = None
    theta_c = None
    if snap_set and 0.0 in snap_set:
        snapshots.append(_snapshot(state, stepper, grid))
    for prev, nxt in zip(schedule[:-1], schedule[1:]):
        state, _, report = stepper.step(state, float(nxt - prev))
        if report.stage_switched:
            theta_c = state.theta_c
        if report.status is StepStatus.SERIES_WARNING:
            series_warn_count += 1
            if series_warn_first is None:
                series_warn_first = state.theta
        xs.append(conversion(state, params))
        if x_as is not None:
            x_as.append(conversion_by_gas_a(state, params))
        if round(float(nxt), 12) in snap_set:
            snapshots.append(_snapshot(state, stepper, grid))
    if series_warn_count:
        warnings.append(
            f"eigen-series truncated before term_tol at {series_warn_count} sample step(s), "
            f"first near theta={series_warn_first:.6g}"
        )
    return RunResult(
        kind=params.kind,
        theta=schedule,
        x=np.asarray(xs),
        x_a=None if x_as is None else np.asarray(x_as),
        theta_c=theta_c,
        snapshots=snapshots,
        warnings=warnings,
        label="qm",
    )


def _snapshot(state: PelletState, stepper, grid: SpatialGrid) -> ProfileSnapshot:
    prof = stepper.current_profile(state)
    if isinstance(prof, tuple):
        return ProfileSnapshot(
            theta=state.theta,
            y=grid.y.copy(),
            gas=prof[0].values.copy(),
            gas_c=prof[1].values.copy(),
            solid=state.solid.copy(),
            solid_a=None if state.solid_aux is None else state.solid_aux.copy(),
        )
    return ProfileSnapshot(
        theta=state.theta,
        y=grid.y.copy(),
        gas=prof.values.copy(),
        solid=state.solid.copy(),
    )
