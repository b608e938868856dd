"""Pipeline driver: load -> flow -> modes -> cluster -> aggregate -> validate.

Each subcommand runs the pipeline prefix it names and writes that prefix's
artifacts under --out with fixed file names, so every intermediate product
is inspectable and two runs with the same farm, config, and seed produce
byte-identical outputs.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import aggregation, clustering, modal, validation
from .assembly import FarmStateSpace, assemble_farm
from .farm import FarmDescription, build_network_matrices, load_farm
from .powerflow import (BusSolution, solve_powerflow, wt_operating_point,
                        write_bus_csv)
from .svgplot import PALETTE, bars_svg, lines_svg, scatter_svg
from .wt import SagSpec, linearize_wt

STAGES = ("load", "flow", "modes", "cluster", "aggregate", "validate")

ARTIFACTS = {
    "flow": ("bus_solution.csv",),
    "modes": ("modes.csv", "mpf.csv"),
    "cluster": ("features.csv", "groups.json", "modescatter.svg"),
    "aggregate": ("dem.json",),
    "validate": ("report.json", "responses.csv", "responses.svg"),
}


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class RunConfig:
    farm_path: Path
    out_dir: Path
    clusters: int | None = None      # None selects the count automatically
    e_target: float = 0.02
    seed: int = 42
    state_filter: tuple[str, ...] = ("u_dc",)
    group_tau: float = 0.1
    sag: float = 0.05
    horizon: float = 2.0
    dt: float = 1e-3


@dataclass
class PipelineState:
    """Everything computed so far; filled stage by stage."""

    cfg: RunConfig
    farm: FarmDescription | None = None
    farm_hash: str = ""
    sol: BusSolution | None = None
    fss: FarmStateSpace | None = None
    modal_sol: modal.ModalSolution | None = None
    concern: modal.ConcernSet | None = None
    clusters: clustering.ModeClusters | None = None
    features: clustering.FeatureTable | None = None
    groups: clustering.GroupAssignment | None = None
    dem: aggregation.DemModel | None = None
    report: validation.ValidationReport | None = None
    chosen_c: int = 0


def _run_stage(stage: str, fn, *args):
    try:
        return fn(*args)
    except Exception as exc:
        raise StageError(stage, exc) from exc


def _stage_load(state: PipelineState) -> None:
    path = state.cfg.farm_path
    state.farm = load_farm(path)
    state.farm_hash = hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _stage_flow(state: PipelineState) -> None:
    state.sol = solve_powerflow(state.farm)
    write_bus_csv(state.farm, state.sol,
                  state.cfg.out_dir / "bus_solution.csv")


def _stage_modes(state: PipelineState) -> None:
    farm, sol = state.farm, state.sol
    blocks = [linearize_wt(wt, wt_operating_point(sol, wt), farm.bases)
              for wt, _ in farm.wts]
    net = build_network_matrices(farm)
    state.fss = assemble_farm(blocks, net)
    state.modal_sol = modal.eig_biorthogonal(state.fss.a_s, state.fss.labels)
    state.concern = modal.select_concern_modes(
        state.modal_sol, n_expected=farm.n_wt, kinds=state.cfg.state_filter)
    modal.write_modes_csv(state.modal_sol, state.concern,
                          state.cfg.out_dir / "modes.csv")
    modal.write_mpf_csv(state.modal_sol, state.cfg.out_dir / "mpf.csv")


def _pick_cluster_count(state: PipelineState) -> int:
    """Smallest C whose centre error meets the target."""
    concern = state.concern
    for c in range(1, len(concern) + 1):
        cl = clustering.cluster_modes(concern, c, state.cfg.seed)
        if validation.error_E(concern, cl) <= state.cfg.e_target:
            return c
    return len(concern)


def _stage_cluster(state: PipelineState) -> None:
    cfg = state.cfg
    state.chosen_c = cfg.clusters if cfg.clusters else _pick_cluster_count(state)
    state.clusters = clustering.cluster_modes(state.concern, state.chosen_c,
                                              cfg.seed)
    rep_rows = {wt_id: state.fss.state_index(wt_id, cfg.state_filter[0])
                for wt_id in state.fss.wt_order}
    state.features = clustering.superimpose_mpf(state.modal_sol.mpf,
                                                state.clusters, rep_rows)
    state.groups = clustering.group_wts(state.features, tau=cfg.group_tau)
    clustering.write_features_csv(state.features,
                                  cfg.out_dir / "features.csv")
    clustering.write_groups_json(state.groups, cfg.out_dir / "groups.json")
    _write_scatter(state)


def _stage_aggregate(state: PipelineState) -> None:
    state.dem = aggregation.build_dem(state.farm, state.groups,
                                      state.clusters)
    aggregation.write_dem_json(state.dem, state.cfg.out_dir / "dem.json")
    _write_scatter(state)          # refresh with the DEM modes overlaid


def _stage_validate(state: PipelineState) -> None:
    cfg = state.cfg
    sag = SagSpec(fraction=cfg.sag, t_start=0.1)
    detailed = validation.simulate_linear(state.fss, sag, cfg.horizon, cfg.dt)
    dem_resp = validation.simulate_linear(state.dem.state_space, sag,
                                          cfg.horizon, cfg.dt)
    mapping = {
        g: tuple((wt_id, _capacity(state.farm, wt_id)) for wt_id in ids)
        for g, ids in state.dem.provenance.items()
    }
    nrmse_by_signal = validation.compare_responses(detailed, dem_resp,
                                                   mapping)
    metadata = {
        "farm": str(cfg.farm_path.name),
        "farm_sha256": state.farm_hash,
        "clusters": state.chosen_c,
        "clusters_requested": cfg.clusters if cfg.clusters else "auto",
        "seed": cfg.seed,
        "state_filter": list(cfg.state_filter),
        "sag": cfg.sag,
        "horizon": cfg.horizon,
        "dt": cfg.dt,
        "groups": state.groups.group_of,
        "group_capacity_mva": {
            str(g): state.dem.group_capacity_mva(g)
            for g in state.dem.provenance},
        "cluster_centres": [[c.real, c.imag] for c in state.clusters.centres],
        "dem_modes": [[lam.real, lam.imag]
                      for lam in state.dem.concern.eigenvalues],
    }
    state.report = validation.build_report(
        state.concern, state.clusters, state.dem, nrmse_by_signal,
        detailed.unstable, dem_resp.unstable, metadata)
    validation.write_report_json(state.report, cfg.out_dir / "report.json")
    validation.write_responses_csv(detailed, dem_resp,
                                   cfg.out_dir / "responses.csv")
    _write_responses_svg(state.cfg.out_dir)


def _capacity(farm: FarmDescription, wt_id: str) -> float:
    for wt, _ in farm.wts:
        if wt.id == wt_id:
            return farm.wt_capacity_mva(wt)
    raise KeyError(wt_id)


_STAGE_FN = {
    "load": _stage_load,
    "flow": _stage_flow,
    "modes": _stage_modes,
    "cluster": _stage_cluster,
    "aggregate": _stage_aggregate,
    "validate": _stage_validate,
}


def run_pipeline(cfg: RunConfig, upto: str = "validate") -> PipelineState:
    """Run the pipeline through stage `upto`, writing artifacts as it goes."""
    if upto not in STAGES:
        raise ValueError(f"unknown stage {upto!r}")
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    state = PipelineState(cfg=cfg)
    for stage in STAGES[:STAGES.index(upto) + 1]:
        _run_stage(stage, _STAGE_FN[stage], state)
    return state


# ---------------------------------------------------------------------------
# plots


def _write_scatter(state: PipelineState) -> None:
    concern = state.concern
    clusters = state.clusters
    idx_of = {m: k for k, m in enumerate(concern.mode_indices)}
    dots = []
    for c, group in enumerate(clusters.members):
        pts = [(concern.eigenvalues[idx_of[m]].real,
                concern.eigenvalues[idx_of[m]].imag) for m in group]
        dots.append((f"cluster {c}", pts, PALETTE[c % len(PALETTE)]))
    crosses = [("centres",
                [(c.real, c.imag) for c in clusters.centres], "#000000")]
    if state.dem is not None:
        crosses.append(("DEM modes",
                        [(lam.real, lam.imag)
                         for lam in state.dem.concern.eigenvalues],
                        "#d62728"))
    scatter_svg(state.cfg.out_dir / "modescatter.svg",
                "Concern modes and cluster centres",
                "Re (rad/s)", "Im (rad/s)", dots, crosses)


def _write_features_svg(out_dir: Path) -> None:
    rows = list(csv.reader((out_dir / "features.csv").open()))
    header, body = rows[0], rows[1:]
    n_c = (len(header) - 1) // 3
    cats = [r[0] for r in body]
    series = [(f"cluster {c}", [float(r[1 + 3 * c]) for r in body])
              for c in range(n_c)]
    bars_svg(out_dir / "features.svg", "Feature vectors per WT",
             "WT", "|superimposed MPF|", cats, series)


def _write_responses_svg(out_dir: Path) -> None:
    rows = list(csv.reader((out_dir / "responses.csv").open()))
    header, body = rows[0], rows[1:]
    col = {name: k for k, name in enumerate(header)}
    t = [float(r[col["t"]]) for r in body]
    series = [
        ("detailed POI P", t,
         [float(r[col["detailed_poi_p"]]) for r in body], PALETTE[0], False),
        ("DEM POI P", t,
         [float(r[col["dem_poi_p"]]) for r in body], PALETTE[1], True),
    ]
    lines_svg(out_dir / "responses.svg",
              "POI active-power deviation under the sag",
              "t (s)", "dP (p.u.)", series)


def emit_plot(out_dir: str | Path, kind: str) -> Path:
    """Regenerate one SVG from the artifacts already on disk."""
    out_dir = Path(out_dir)
    if kind == "scatter":
        path = out_dir / "modescatter.svg"
        _scatter_from_artifacts(out_dir)
    elif kind == "features":
        path = out_dir / "features.svg"
        _write_features_svg(out_dir)
    elif kind == "responses":
        path = out_dir / "responses.svg"
        _write_responses_svg(out_dir)
    else:
        raise ValueError(f"unknown plot kind {kind!r}")
    return path


def _scatter_from_artifacts(out_dir: Path) -> None:
    rows = list(csv.reader((out_dir / "modes.csv").open()))
    body = rows[1:]
    selected = [(float(r[0]), float(r[1])) for r in body if r[5] == "1"]
    report = json.loads((out_dir / "report.json").read_text()) \
        if (out_dir / "report.json").exists() else {}
    meta = report.get("metadata", {})
    dots = [("selected modes", selected, PALETTE[0])]
    crosses = []
    if "cluster_centres" in meta:
        crosses.append(("centres",
                        [tuple(p) for p in meta["cluster_centres"]],
                        "#000000"))
    if "dem_modes" in meta:
        crosses.append(("DEM modes",
                        [tuple(p) for p in meta["dem_modes"]], "#d62728"))
    scatter_svg(out_dir / "modescatter.svg",
                "Concern modes and cluster centres",
                "Re (rad/s)", "Im (rad/s)", dots, crosses)


# ---------------------------------------------------------------------------
# report


def emit_report(out_dir: str | Path) -> str:
    """One-page text summary of a finished run."""
    out_dir = Path(out_dir)
    report_path = out_dir / "report.json"
    if not report_path.exists():
        raise FileNotFoundError(f"no report.json under {out_dir}")
    report = json.loads(report_path.read_text())
    meta = report["metadata"]

    lines = []
    lines.append(f"farm: {meta['farm']}  (sha256 {meta['farm_sha256'][:12]})")
    lines.append(f"clusters: {meta['clusters']}  seed: {meta['seed']}  "
                 f"sag: {meta['sag']:g}  horizon: {meta['horizon']:g} s")
    lines.append("")
    lines.append("concern modes (detailed model):")
    lines.append("      re (rad/s)     im (rad/s)  cluster  centre err  "
                 "nearest DEM err")
    for m in report["mode_errors"]:
        lines.append(f"  {m['re']:12.4f}  {m['im']:13.4f}  {m['cluster']:7d}"
                     f"  {m['centre_error']:10.4%}  {m['nearest_dem_error']:14.4%}")
    lines.append("")
    lines.append("WT groups:")
    groups: dict[str, int] = meta["groups"]
    for g in sorted(set(groups.values())):
        members = sorted(wt for wt, gg in groups.items() if gg == g)
        cap = meta["group_capacity_mva"][str(g)]
        lines.append(f"  group {g} ({cap:g} MVA): {', '.join(members)}")
    lines.append("")
    lines.append(f"E  (cluster-centre error)   : {report['e']:.4%}")
    lines.append(f"E' (nearest-DEM-mode error) : {report['e_prime']:.4%}")
    for name in sorted(report["nrmse"]):
        lines.append(f"NRMSE {name:<16s}: {report['nrmse'][name]:.4%}")
    if report["detailed_unstable"] or report["dem_unstable"]:
        lines.append("WARNING: unstable state matrix flagged")
    text = "\n".join(lines)
    print(text)
    return text


# ---------------------------------------------------------------------------
# entry point


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wfdem",
        description="Dynamic equivalent models of wind farms by mode "
                    "clustering")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_command(name: str, help_text: str):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--farm", required=True, type=Path)
        p.add_argument("--out", required=True, type=Path)
        p.add_argument("--clusters", type=int, default=None)
        p.add_argument("--auto-clusters", action="store_true")
        p.add_argument("--e-target", type=float, default=0.02)
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--sag", type=float, default=0.05)
        p.add_argument("--horizon", type=float, default=2.0)
        p.add_argument("--dt", type=float, default=1e-3)
        return p

    for name, help_text in (
            ("flow", "solve the power flow"),
            ("modes", "assemble the farm model and decompose it"),
            ("cluster", "cluster the concern modes and group the WTs"),
            ("aggregate", "build the aggregated DEM"),
            ("validate", "run the full pipeline and the validation stage"),
            ("all", "full pipeline plus the text summary")):
        add_run_command(name, help_text)

    p = sub.add_parser("report", help="print the summary of a finished run")
    p.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("plot", help="regenerate one SVG from artifacts")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--kind", required=True,
                   choices=["scatter", "features", "responses"])
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    if args.clusters is not None and args.clusters < 1:
        raise ValueError("--clusters must be >= 1")
    clusters = None if args.auto_clusters else args.clusters
    if clusters is None and not args.auto_clusters:
        clusters = 1     # single-machine DEM unless told otherwise
    return RunConfig(
        farm_path=args.farm,
        out_dir=args.out,
        clusters=clusters,
        e_target=args.e_target,
        seed=args.seed,
        sag=args.sag,
        horizon=args.horizon,
        dt=args.dt,
    )


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "report":
            emit_report(args.out)
        elif args.command == "plot":
            emit_plot(args.out, args.kind)
        else:
            upto = "validate" if args.command == "all" else args.command
            cfg = _config_from_args(args)
            run_pipeline(cfg, upto=upto)
            if args.command == "all":
                emit_plot(cfg.out_dir, "features")
                emit_report(cfg.out_dir)
    except StageError as exc:
        print(f"error in stage {exc.stage}: {exc.cause}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
