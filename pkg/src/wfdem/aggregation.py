"""Per-unit machine aggregation and collector-network equivalencing.

Each WT group collapses to one machine whose capacity base is the member
total and whose per-unit parameters are capacity-weighted means, so a group
of identical machines aggregates without any parameter change.  The collector
reduces per group to a single series impedance chosen by the equal-loss
criterion: under uniform-voltage injections proportional to member powers,
the equivalent dissipates exactly the losses of the branches it replaces.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .assembly import FarmStateSpace, assemble_farm
from .clustering import GroupAssignment, ModeClusters
from .farm import (Branch, FarmDescription, NetworkMatrices, WtParams,
                   build_network_matrices, farm_to_dict, nodal_network)
from .modal import ConcernSet, ModalSolution, eig_biorthogonal, select_concern_modes
from .powerflow import BusSolution, solve_powerflow, wt_operating_point
from .wt import dc_link_seconds, linearize_wt


class AggregationError(ValueError):
    pass


def _group_members(farm: FarmDescription,
                   groups: GroupAssignment) -> dict[int, list[tuple[WtParams, str]]]:
    by_id = {wt.id: (wt, bus) for wt, bus in farm.wts}
    members: dict[int, list[tuple[WtParams, str]]] = {}
    for wt_id, g in groups.group_of.items():
        if wt_id not in by_id:
            raise AggregationError(f"assignment references unknown WT {wt_id!r}")
        members.setdefault(g, []).append(by_id[wt_id])
    return members


def aggregate_wts(farm: FarmDescription,
                  groups: GroupAssignment) -> list[WtParams]:
    """One equivalent machine per group, ordered by group id."""
    members = _group_members(farm, groups)
    out: list[WtParams] = []
    for g in sorted(members):
        wts = [wt for wt, _ in members[g]]
        if not wts:
            raise AggregationError(f"group {g} is empty")
        caps = np.array([farm.wt_capacity_mva(wt) for wt in wts])
        s_agg = float(caps.sum())
        weight = caps / s_agg

        def wmean(values: list[float]) -> float:
            return float(np.dot(weight, values))

        # the capacitance aggregates through its per-unit time constant so
        # homogeneous groups keep identical per-unit dynamics
        c_pu = wmean([dc_link_seconds(wt, farm.bases) for wt in wts])
        c_dc = c_pu * (s_agg * 1e6) / (farm.bases.u_dc_base_kv * 1e3) ** 2
        p_mw = float(np.dot(caps, [wt.p_m0 for wt in wts]))
        out.append(WtParams(
            id=f"group{g}",
            p_m0=p_mw / s_agg,
            c_dc=c_dc,
            u_dc0=wmean([wt.u_dc0 for wt in wts]),
            kp_dvc=wmean([wt.kp_dvc for wt in wts]),
            ki_dvc=wmean([wt.ki_dvc for wt in wts]),
            kp_pll=wmean([wt.kp_pll for wt in wts]),
            ki_pll=wmean([wt.ki_pll for wt in wts]),
            s_mva=s_agg,
        ))
    return out


def equivalent_network(farm: FarmDescription, groups: GroupAssignment,
                       flows: BusSolution) -> list[Branch]:
    """Equal-loss equivalent branch POI -> aggregate bus, one per group.

    Member injections are taken proportional to their active powers at the
    operating point (uniform-voltage approximation); the resulting branch
    currents weight each collector impedance by the squared group power it
    carries.  The shared Thevenin branch stays out of the equivalent.
    """
    net = nodal_network(farm)
    members = _group_members(farm, groups)
    bus_index = {bus: k for k, bus in enumerate(farm.buses)}
    branches: list[Branch] = []
    z_base = farm.bases.z_base_ohm
    omega = farm.bases.omega_grid

    for g in sorted(members):
        inj = np.zeros(net.n_nodes, dtype=complex)
        p_total = 0.0
        for wt, bus in members[g]:
            p_sys = wt.p_m0 * farm.capacity_ratio(wt)
            p_total += p_sys
            node = net.node_of[bus]
            if node >= 0:
                inj[node] += p_sys
        if p_total <= 0:
            z_eq = 0.0 + 0.0j
            warnings.warn(f"group {g} carries no power; zero-impedance tie",
                          stacklevel=2)
        else:
            v = (np.linalg.solve(net.y_red, inj)
                 if net.n_nodes else np.zeros(0, dtype=complex))
            v_of = {bus: (v[net.node_of[bus]] if net.node_of[bus] >= 0 else 0.0)
                    for bus in farm.buses}
            z_eq = 0.0 + 0.0j
            for br, z in zip(farm.branches, net.branch_z):
                if z == 0:
                    continue
                i_b = (v_of[br.from_bus] - v_of[br.to_bus]) / z
                z_eq += z * abs(i_b) ** 2
            z_eq /= p_total ** 2
        branches.append(Branch(
            from_bus=farm.poi,
            to_bus=f"group{g}_bus",
            length_km=1.0,
            r_ohm_per_km=z_eq.real * z_base,
            l_h_per_km=z_eq.imag * z_base / omega,
        ))
    return branches


@dataclass(frozen=True)
class DemModel:
    """Aggregated farm with its own solved pipeline stages."""

    farm: FarmDescription
    provenance: dict[int, tuple[str, ...]]
    bus_solution: BusSolution
    network: NetworkMatrices
    state_space: FarmStateSpace
    modal: ModalSolution
    concern: ConcernSet

    @property
    def n_machines(self) -> int:
        return self.farm.n_wt

    def group_capacity_mva(self, group: int) -> float:
        wt = self.farm.wts[group][0]
        return self.farm.wt_capacity_mva(wt)


def build_dem(farm: FarmDescription, groups: GroupAssignment,
              clusters: ModeClusters | None = None) -> DemModel:
    """Assemble the aggregated farm and solve it end to end."""
    if clusters is not None and clusters.n_clusters != groups.n_groups:
        warnings.warn(
            f"{clusters.n_clusters} mode clusters vs {groups.n_groups} WT "
            "groups after merging", stacklevel=2)

    aggregates = aggregate_wts(farm, groups)
    sol = solve_powerflow(farm)
    eq_branches = equivalent_network(farm, groups, sol)

    buses = (farm.poi,) + tuple(br.to_bus for br in eq_branches)
    dem_farm = FarmDescription(
        bases=farm.bases,
        buses=buses,
        poi=farm.poi,
        branches=tuple(eq_branches),
        wts=tuple((wt, br.to_bus)
                  for wt, br in zip(aggregates, eq_branches)),
        grid=farm.grid,
    )
    dem_farm.validate()

    dem_sol = solve_powerflow(dem_farm)
    blocks = [linearize_wt(wt, wt_operating_point(dem_sol, wt), dem_farm.bases)
              for wt, _ in dem_farm.wts]
    net = build_network_matrices(dem_farm)
    fss = assemble_farm(blocks, net)
    modal = eig_biorthogonal(fss.a_s, fss.labels)
    concern = select_concern_modes(modal, n_expected=dem_farm.n_wt)

    members = _group_members(farm, groups)
    provenance = {g: tuple(wt.id for wt, _ in members[g])
                  for g in sorted(members)}
    return DemModel(farm=dem_farm, provenance=provenance,
                    bus_solution=dem_sol, network=net, state_space=fss,
                    modal=modal, concern=concern)


def write_dem_json(dem: DemModel, path: str | Path) -> None:
    provenance = {
        "groups": {str(g): list(ids) for g, ids in dem.provenance.items()},
        "group_capacity_mva": {
            str(g): dem.group_capacity_mva(g) for g in dem.provenance},
    }
    doc = farm_to_dict(dem.farm, provenance=provenance)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
