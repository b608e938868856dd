"""DEM fidelity metrics and linear time-domain simulation.

Two frequency-domain errors quantify how well a reduced model represents the
detailed one: the worst relative distance from each concern mode to its
cluster centre, and the worst relative distance to the nearest mode of the
aggregated model.  Time-domain adequacy is checked by propagating both models
through the same grid-voltage sag and comparing normalized RMS errors.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import expm

from .aggregation import DemModel
from .assembly import FarmStateSpace, assemble_farm
from .clustering import ModeClusters
from .farm import (FarmDescription, GridThevenin, PerUnitBases, WtParams,
                   build_network_matrices)
from .modal import ConcernSet
from .powerflow import SLACK_E0, solve_powerflow, wt_operating_point
from .wt import SagSpec, linearize_wt, simulate_wt_nonlinear, stiff_equilibrium


# ---------------------------------------------------------------------------
# frequency-domain errors


def _centre_by_mode(clusters: ModeClusters) -> dict[int, complex]:
    out: dict[int, complex] = {}
    for c, group in enumerate(clusters.members):
        for m in group:
            out[m] = complex(clusters.centres[c])
    return out


def centre_errors(concern: ConcernSet, clusters: ModeClusters) -> np.ndarray:
    """Relative distance of each concern mode to its cluster centre."""
    centres = _centre_by_mode(clusters)
    missing = [i for i in concern.mode_indices if i not in centres]
    if missing:
        raise ValueError(f"clusters do not cover concern modes {missing}")
    errs = np.empty(len(concern))
    for k, (idx, lam) in enumerate(zip(concern.mode_indices,
                                       concern.eigenvalues)):
        if abs(lam) == 0:
            raise ZeroDivisionError("zero-magnitude mode has no relative error")
        errs[k] = abs(lam - centres[idx]) / abs(lam)
    return errs


def error_E(concern: ConcernSet, clusters: ModeClusters) -> float:
    """Max relative error of representing each mode by its cluster centre."""
    return float(np.max(centre_errors(concern, clusters)))


def nearest_errors(concern: ConcernSet, dem_concern: ConcernSet) -> np.ndarray:
    """Relative distance of each concern mode to the nearest DEM mode."""
    if len(dem_concern) == 0:
        raise ValueError("DEM concern set is empty")
    errs = np.empty(len(concern))
    for k, lam in enumerate(concern.eigenvalues):
        if abs(lam) == 0:
            raise ZeroDivisionError("zero-magnitude mode has no relative error")
        errs[k] = min(abs(lam - mu) for mu in dem_concern.eigenvalues) / abs(lam)
    return errs


def error_Eprime(concern: ConcernSet, dem_concern: ConcernSet) -> float:
    """Max relative error of representing each mode by the nearest DEM mode."""
    return float(np.max(nearest_errors(concern, dem_concern)))


# ---------------------------------------------------------------------------
# linear simulation


@dataclass
class LinearResponse:
    """Deviation trajectories of one assembled farm under a source sag."""

    t: np.ndarray
    u_dc: dict[str, np.ndarray]      # per machine, machine p.u.
    poi_p: np.ndarray                # active-power deviation at the POI
    poi_i: np.ndarray                # (2, nt) current deviation at the POI
    unstable: bool


def simulate_linear(fss: FarmStateSpace, sag: SagSpec, horizon: float,
                    dt: float) -> LinearResponse:
    """Propagate the sag step with exact per-step discretization.

    The augmented matrix [[A_s, B_s de], [0, 0]] is exponentiated once; each
    step is then a single matrix-vector product, so the trajectory is exact
    for the piecewise-constant input.  A non-Hurwitz state matrix is flagged,
    never silently returned.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    n = fss.n_states
    e0 = np.array([SLACK_E0.real, SLACK_E0.imag])
    de = -sag.fraction * e0

    n_steps = int(round(horizon / dt))
    t = np.arange(n_steps + 1) * dt

    aug = np.zeros((n + 1, n + 1))
    aug[:n, :n] = fss.a_s
    aug[:n, n] = fss.b_s @ de
    phi = expm(aug * dt)

    xs = np.zeros((n, n_steps + 1))
    x_aug = np.zeros(n + 1)
    for k in range(n_steps):
        # the sag input switches on for every step starting at/after t_start
        if x_aug[n] == 0.0 and t[k] >= sag.t_start:
            x_aug[n] = 1.0
        x_aug = phi @ x_aug
        xs[:, k + 1] = x_aug[:n]

    abscissa = float(np.max(np.linalg.eigvals(fss.a_s).real))
    unstable = abscissa > 1e-9

    active = (t >= sag.t_start).astype(float)
    de_t = np.outer(de, active)
    u_dc = {wt_id: xs[fss.state_index(wt_id, "u_dc")]
            for wt_id in fss.wt_order}
    poi_i = fss.poi_current(xs)
    du_poi = fss.z_poi @ fss.wt_currents(xs) + fss.k_poi @ de_t
    poi_p = fss.u_poi0 @ poi_i + fss.i_poi0 @ du_poi
    return LinearResponse(t=t, u_dc=u_dc, poi_p=poi_p, poi_i=poi_i,
                          unstable=unstable)


# ---------------------------------------------------------------------------
# trajectory comparison


def nrmse(y_ref: np.ndarray, y_hat: np.ndarray) -> tuple[float, bool]:
    """RMS error normalized by the reference range.

    Returns (value, is_absolute); a flat reference has no range, so the
    un-normalized RMS error is returned with the flag set.
    """
    if y_ref.shape != y_hat.shape:
        raise ValueError("trajectories must share a common time grid")
    rmse = float(np.sqrt(np.mean((y_ref - y_hat) ** 2)))
    span = float(np.max(y_ref) - np.min(y_ref))
    if span == 0.0:
        return rmse, True
    return rmse / span, False


def compare_responses(detailed: LinearResponse, dem: LinearResponse,
                      mapping: dict[int, tuple[tuple[str, float], ...]],
                      ) -> dict[str, float]:
    """NRMSE per monitored signal.

    `mapping` gives, per group id, the member WT ids with their capacity
    weights; the detailed side of each group signal is the capacity-weighted
    mean DC-voltage deviation, compared against the aggregate machine's.
    """
    if len(detailed.t) != len(dem.t) or not np.allclose(detailed.t, dem.t):
        raise ValueError("trajectories must share a common time grid")
    out: dict[str, float] = {}
    out["poi_p"], _ = nrmse(detailed.poi_p, dem.poi_p)
    for g, members in mapping.items():
        weights = np.array([w for _, w in members])
        weights = weights / weights.sum()
        mean_udc = sum(w * detailed.u_dc[wt]
                       for (wt, _), w in zip(members, weights))
        out[f"group{g}_u_dc"], _ = nrmse(mean_udc, dem.u_dc[f"group{g}"])
    return out


# ---------------------------------------------------------------------------
# single-WT linearization check


@dataclass(frozen=True)
class LinearizationCheck:
    nrmse_u_dc: float
    in_regime: bool      # sag within the small-signal band (<= 0.5%)


def linearization_check(wt: WtParams, bases: PerUnitBases,
                        grid: GridThevenin, sag_fraction: float = 0.001,
                        horizon: float = 2.0, dt: float = 1e-3,
                        e_mag: float = 1.0) -> LinearizationCheck:
    """Nonlinear vs linear single-WT response under the same source sag."""
    sag = SagSpec(fraction=sag_fraction, t_start=0.1)
    traj = simulate_wt_nonlinear(wt, bases, grid, sag, horizon, dt,
                                 e_mag=e_mag)
    x0, _ = stiff_equilibrium(wt, bases, grid, e_mag)
    du_dc_nl = traj.u_dc - x0[0]

    farm = FarmDescription(
        bases=bases,
        buses=("poi",),
        poi="poi",
        branches=(),
        wts=((wt, "poi"),),
        grid=grid,
    )
    farm.validate()
    sol = solve_powerflow(farm)
    block = linearize_wt(wt, wt_operating_point(sol, wt), bases)
    fss = assemble_farm([block], build_network_matrices(farm))
    lin = simulate_linear(fss, sag, horizon, dt)

    value, _ = nrmse(du_dc_nl, lin.u_dc[wt.id])
    return LinearizationCheck(nrmse_u_dc=value,
                              in_regime=sag_fraction <= 0.005)


# ---------------------------------------------------------------------------
# report


@dataclass
class ValidationReport:
    e: float
    e_prime: float
    mode_errors: list[dict]                # per detailed concern mode
    nrmse: dict[str, float]
    detailed_unstable: bool
    dem_unstable: bool
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "e": self.e,
            "e_prime": self.e_prime,
            "mode_errors": self.mode_errors,
            "nrmse": self.nrmse,
            "detailed_unstable": self.detailed_unstable,
            "dem_unstable": self.dem_unstable,
            "metadata": self.metadata,
        }


def build_report(concern: ConcernSet, clusters: ModeClusters, dem: DemModel,
                 nrmse_by_signal: dict[str, float],
                 detailed_unstable: bool, dem_unstable: bool,
                 metadata: dict) -> ValidationReport:
    cen = centre_errors(concern, clusters)
    near = nearest_errors(concern, dem.concern)
    cluster_of = {m: c for c, group in enumerate(clusters.members)
                  for m in group}
    breakdown = [
        {
            "re": lam.real,
            "im": lam.imag,
            "cluster": cluster_of[idx],
            "centre_error": float(ce),
            "nearest_dem_error": float(ne),
        }
        for idx, lam, ce, ne in zip(concern.mode_indices, concern.eigenvalues,
                                    cen, near)
    ]
    return ValidationReport(
        e=float(np.max(cen)),
        e_prime=float(np.max(near)),
        mode_errors=breakdown,
        nrmse=nrmse_by_signal,
        detailed_unstable=detailed_unstable,
        dem_unstable=dem_unstable,
        metadata=metadata,
    )


def write_report_json(report: ValidationReport, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")


def write_responses_csv(detailed: LinearResponse, dem: LinearResponse,
                        path: str | Path) -> None:
    """Time grid plus every monitored signal, detailed and DEM side by side."""
    cols: list[tuple[str, np.ndarray]] = [("t", detailed.t)]
    cols.append(("detailed_poi_p", detailed.poi_p))
    cols.append(("dem_poi_p", dem.poi_p))
    for wt_id in sorted(detailed.u_dc):
        cols.append((f"detailed_u_dc_{wt_id}", detailed.u_dc[wt_id]))
    for wt_id in sorted(dem.u_dc):
        cols.append((f"dem_u_dc_{wt_id}", dem.u_dc[wt_id]))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([name for name, _ in cols])
        for k in range(len(detailed.t)):
            writer.writerow([f"{arr[k]:.12g}" for _, arr in cols])
