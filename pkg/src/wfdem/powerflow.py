"""Newton-Raphson steady state of the farm and per-WT linearization points.

Every WT bus is a PQ node injecting its mechanical power at unity power
factor; the infinite bus is the sole slack, held at SLACK_E0.  Per-unit is
the farm's system base (bases.s_wt_mva, bases.v_coll_kv) throughout, except
where noted machine-base.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .farm import FarmDescription, WtParams, nodal_network

SLACK_E0 = 1.0 + 0.0j   # infinite-bus voltage, p.u.


class PowerflowError(RuntimeError):
    """Newton iteration failed to converge."""


@dataclass(frozen=True)
class BusSolution:
    """Converged farm steady state.

    `wt_terminal` maps each WT id to (terminal voltage, injected current on
    the machine's own base).  Branch flows follow branch orientation
    (from_bus -> to_bus); flows through zero-impedance branches are reported
    as 0 (they carry no drop and are individually indeterminate when zero
    paths are paralleled).
    """

    bus_ids: tuple[str, ...]
    v: np.ndarray                       # complex, per bus
    branch_flows: np.ndarray            # complex, per farm branch
    grid_flow: complex                  # current exported into the Thevenin branch
    slack_power: complex                # S absorbed by the infinite bus
    wt_terminal: dict[str, tuple[complex, complex]]
    mismatch: float
    iterations: int
    mismatch_history: tuple[float, ...]

    def voltage(self, bus: str) -> complex:
        return self.v[self.bus_ids.index(bus)]


def _newton(y_red: np.ndarray, y_src: np.ndarray, s_spec: np.ndarray,
            tol: float, max_iter: int) -> tuple[np.ndarray, int, list[float]]:
    """Polar NR on the source-grounded nodal system.  Returns node voltages."""
    n = len(s_spec)
    vm = np.ones(n)
    va = np.zeros(n)
    history: list[float] = []
    for it in range(max_iter + 1):
        v = vm * np.exp(1j * va)
        # node injections; the slack tie enters with opposite sign because
        # y_src stores the positive branch admittance
        i_bus = y_red @ v - y_src * SLACK_E0
        mis = v * np.conj(i_bus) - s_spec
        err = float(np.max(np.abs(np.r_[mis.real, mis.imag])))
        history.append(err)
        if err < tol:
            return v, it, history
        if it == max_iter:
            break
        diag_v = np.diag(v)
        diag_i = np.diag(i_bus)
        diag_vn = np.diag(v / vm)
        ds_dva = 1j * diag_v @ np.conj(diag_i - y_red @ diag_v)
        ds_dvm = diag_v @ np.conj(y_red @ diag_vn) + np.conj(diag_i) @ diag_vn
        jac = np.block([[ds_dva.real, ds_dvm.real],
                        [ds_dva.imag, ds_dvm.imag]])
        try:
            dx = np.linalg.solve(jac, -np.r_[mis.real, mis.imag])
        except np.linalg.LinAlgError as exc:
            raise PowerflowError(f"singular Jacobian at iteration {it}") from exc
        va += dx[:n]
        vm += dx[n:]
    raise PowerflowError(
        f"no convergence after {max_iter} iterations, "
        f"max |P,Q| mismatch = {history[-1]:.3e} p.u.")


def solve_powerflow(farm: FarmDescription, tol: float = 1e-8,
                    max_iter: int = 50) -> BusSolution:
    """Solve the farm power flow from a flat start."""
    net = nodal_network(farm)
    n = net.n_nodes

    s_spec = np.zeros(n, dtype=complex)
    for wt, bus in farm.wts:
        node = net.node_of[bus]
        p_sys = wt.p_m0 * farm.capacity_ratio(wt)
        if node >= 0:
            s_spec[node] += p_sys

    if n:
        v_nodes, iters, history = _newton(net.y_red, net.y_src, s_spec,
                                          tol, max_iter)
        mismatch = history[-1]
    else:
        # whole farm merged with the infinite bus
        v_nodes = np.zeros(0, dtype=complex)
        iters, history, mismatch = 0, [0.0], 0.0

    v = np.array([v_nodes[net.node_of[bus]] if net.node_of[bus] >= 0
                  else SLACK_E0 for bus in farm.buses])
    bus_index = {bus: k for k, bus in enumerate(farm.buses)}

    flows = np.zeros(len(farm.branches), dtype=complex)
    for k, (br, z) in enumerate(zip(farm.branches, net.branch_z)):
        if z != 0:
            flows[k] = (v[bus_index[br.from_bus]]
                        - v[bus_index[br.to_bus]]) / z

    wt_terminal: dict[str, tuple[complex, complex]] = {}
    grid_flow = 0.0 + 0.0j
    for wt, bus in farm.wts:
        u = v[bus_index[bus]]
        if abs(u) == 0:
            raise PowerflowError(f"zero terminal voltage at WT {wt.id!r}")
        i_machine = np.conj(wt.p_m0 / u)
        wt_terminal[wt.id] = (u, i_machine)
        grid_flow += i_machine * farm.capacity_ratio(wt)

    slack_power = SLACK_E0 * np.conj(grid_flow)

    return BusSolution(
        bus_ids=farm.buses,
        v=v,
        branch_flows=flows,
        grid_flow=grid_flow,
        slack_power=slack_power,
        wt_terminal=wt_terminal,
        mismatch=mismatch,
        iterations=iters,
        mismatch_history=tuple(history),
    )


def network_losses(farm: FarmDescription, sol: BusSolution) -> complex:
    """Total series I^2 Z losses, Thevenin branch included."""
    net = nodal_network(farm)
    loss = 0.0 + 0.0j
    for flow, z in zip(sol.branch_flows, net.branch_z):
        loss += abs(flow) ** 2 * z
    loss += abs(sol.grid_flow) ** 2 * net.grid_z
    return loss


# ---------------------------------------------------------------------------
# linearization point


@dataclass(frozen=True)
class WtOperatingPoint:
    """Steady state of one WT in its own per-unit base.

    The PLL locks the d axis onto the terminal voltage, so u_q0 = 0 and
    delta0 is the terminal-voltage angle; unity power factor forces i_q0 = 0.
    """

    u_xy0: np.ndarray    # (2,)
    i_xy0: np.ndarray    # (2,) machine-base injection
    delta0: float
    u_d0: float
    i_d0: float
    i_q0: float = 0.0


def wt_operating_point(sol: BusSolution, wt: WtParams) -> WtOperatingPoint:
    if wt.id not in sol.wt_terminal:
        raise KeyError(f"no terminal solution for WT {wt.id!r}")
    u, _ = sol.wt_terminal[wt.id]
    u_d0 = abs(u)
    if u_d0 == 0:
        raise PowerflowError(f"zero terminal voltage at WT {wt.id!r}")
    delta0 = float(np.angle(u))
    i_d0 = wt.p_m0 / u_d0
    return WtOperatingPoint(
        u_xy0=np.array([u.real, u.imag]),
        i_xy0=i_d0 * np.array([np.cos(delta0), np.sin(delta0)]),
        delta0=delta0,
        u_d0=u_d0,
        i_d0=i_d0,
    )


def write_bus_csv(farm: FarmDescription, sol: BusSolution,
                  path: str | Path) -> None:
    """Dump the bus solution (`bus_id, vx, vy, p, q`), injections in system p.u."""
    s_inj: dict[str, complex] = {bus: 0.0 + 0.0j for bus in farm.buses}
    for wt, bus in farm.wts:
        s_inj[bus] += wt.p_m0 * farm.capacity_ratio(wt)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bus_id", "vx", "vy", "p", "q"])
        for bus, v in zip(sol.bus_ids, sol.v):
            writer.writerow([bus, f"{v.real:.12g}", f"{v.imag:.12g}",
                             f"{s_inj[bus].real:.12g}", f"{s_inj[bus].imag:.12g}"])
