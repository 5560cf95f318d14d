"""Command line interface.

Stages chain through a working directory of JSON artifacts::

    diecam ingest part.stl -d work/
    diecam map -d work/
    diecam continuity -d work/
    diecam segment -d work/
    diecam associate -d work/
    diecam plan -d work/
    diecam serve --port 8000

Each stage requires its upstream artifact and refuses to run against a
mesh other than the one that produced it. Downstream stages inherit the
configuration embedded in the upstream artifact, so a parameter chosen at
``segment`` time does not silently change at ``plan`` time. Domain errors
print a JSON report to stderr and exit with status 2.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .association import (
    MachiningData,
    MachiningStrategy,
    make_machining_feature,
    technological_data_from_dict,
    tool_library_from_json,
)
from .colors import OUT_OF_RANGE, feature_color, scalar_to_rgb
from .errors import ArtifactError, DiecamError, OverrideError
from .indicators import ContinuityClass
from .mesh import load_stl, mesh_to_ply, write_stl
from .pipeline import (
    AnalysisStages,
    FeatureOp,
    PipelineConfig,
    association_document,
    canonical_json,
    contact_document,
    continuity_document,
    default_compatibility,
    default_technological_data,
    default_tool_library,
    plan_document,
    run_association,
    segmentation_document,
    verify_mesh_sha,
)
from .segmentation import (
    ContainmentNote,
    GeometricFeature,
    SegmentationResult,
    TopologicalRelation,
)

logger = logging.getLogger(__name__)

MESH_ARTIFACT = "mesh.stl"


# -- shared helpers ----------------------------------------------------------

def _workdir(args) -> Path:
    wd = Path(args.workdir)
    wd.mkdir(parents=True, exist_ok=True)
    return wd


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(canonical_json(doc), encoding="utf-8")
    print(f"wrote {path}")


def _read_artifact(wd: Path, name: str, hint: str) -> dict:
    path = wd / name
    if not path.exists():
        raise ArtifactError(f"missing {name}: run '{hint}' first",
                            artifact=name)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise ArtifactError(f"{name} is not valid JSON: {exc}",
                            artifact=name) from exc


def _load_workdir_mesh(wd: Path):
    path = wd / MESH_ARTIFACT
    if not path.exists():
        raise ArtifactError(
            f"missing {MESH_ARTIFACT}: run 'diecam ingest' first",
            artifact=MESH_ARTIFACT)
    return load_stl(path)


def _add_config_flags(sub: argparse.ArgumentParser) -> None:
    g = sub.add_argument_group("analysis configuration")
    g.add_argument("--axis", help="tool axis as X,Y,Z (default 0,0,1)")
    g.add_argument("--tau-draft", type=float, dest="tau_draft",
                   help="orientation bound below which steep regions count "
                        "as draft (default 0.15)")
    g.add_argument("--tau-flat", type=float, dest="tau_flat",
                   help="orientation bound above which regions count as "
                        "flat (default 0.8)")
    g.add_argument("--directions",
                   help="feed direction grid start:stop:step in degrees "
                        "(default 0:90:10)")
    g.add_argument("--epsilon-pp", type=float, dest="epsilon_pp")
    g.add_argument("--coverage-min", type=float, dest="coverage_min")
    g.add_argument("--epsilon-z", type=float, dest="epsilon_z")
    g.add_argument("--tau-zmin", type=float, dest="tau_zmin")
    g.add_argument("--min-region-area-frac", type=float,
                   dest="min_region_area_frac",
                   help="regions below this fraction of total area are "
                        "absorbed into a neighbor (default 0.01)")
    g.add_argument("--proximity-distance", type=float,
                   dest="proximity_distance",
                   help="distance bound for proximity relations; default is "
                        "the largest tool diameter")
    g.add_argument("--config", dest="config_file",
                   help="JSON file with a full configuration; flags override "
                        "individual fields")


def _config_from_args(args, base: dict | None = None) -> PipelineConfig:
    doc = dict(base) if base else {}
    config_file = getattr(args, "config_file", None)
    if config_file:
        with open(config_file, encoding="utf-8") as fh:
            doc.update(json.load(fh))
    for key in ("tau_draft", "tau_flat", "directions", "epsilon_pp",
                "coverage_min", "epsilon_z", "tau_zmin",
                "min_region_area_frac", "proximity_distance",
                "clearance_mm", "junction_factor", "parking_margin_mm",
                "order_by", "single_tool"):
        value = getattr(args, key, None)
        if value is not None:
            doc[key] = value
    axis = getattr(args, "axis", None)
    if axis is not None:
        parts = [p for p in axis.replace(",", " ").split() if p]
        if len(parts) != 3:
            raise OverrideError(f"--axis expects X,Y,Z, got {axis!r}")
        doc["axis"] = [float(p) for p in parts]
    for spec in getattr(args, "merge", None) or []:
        pair = [int(p) for p in spec.split(",")]
        doc.setdefault("feature_ops", [])
        doc["feature_ops"] = list(doc["feature_ops"]) + [
            FeatureOp("merge", tuple(pair)).to_dict()]
    for spec in getattr(args, "split", None) or []:
        head, _, rings = spec.partition(":")
        op = FeatureOp("split", (int(head),),
                       int(rings) if rings else 3)
        doc.setdefault("feature_ops", [])
        doc["feature_ops"] = list(doc["feature_ops"]) + [op.to_dict()]
    for spec in getattr(args, "tool_override", None) or []:
        fid, _, tool_id = spec.partition("=")
        if not tool_id:
            raise OverrideError(
                f"--tool-override expects FEATURE=TOOL_ID, got {spec!r}")
        doc.setdefault("tool_overrides", {})
        doc["tool_overrides"] = {**doc["tool_overrides"],
                                 str(int(fid)): tool_id}
    for spec in getattr(args, "strategy_override", None) or []:
        fid, _, rest = spec.partition("=")
        if not rest:
            raise OverrideError(
                "--strategy-override expects FEATURE=KIND[:ANGLE], got "
                f"{spec!r}")
        kind, _, angle = rest.partition(":")
        doc.setdefault("strategy_overrides", {})
        doc["strategy_overrides"] = {
            **doc["strategy_overrides"],
            str(int(fid)): {"feed_kind": kind,
                            "direction_deg": float(angle) if angle else None}}
    return PipelineConfig.from_dict(doc)


def _load_context(args):
    """Tool library, technological data and compatibility from files."""
    tools = default_tool_library()
    if getattr(args, "tools_file", None):
        with open(args.tools_file, encoding="utf-8") as fh:
            tools = tool_library_from_json(json.load(fh))
    tech = default_technological_data()
    if getattr(args, "tech_file", None):
        with open(args.tech_file, encoding="utf-8") as fh:
            tech = technological_data_from_dict(json.load(fh))
    compatibility = default_compatibility()
    if getattr(args, "compat_file", None):
        with open(args.compat_file, encoding="utf-8") as fh:
            compatibility = json.load(fh)
    return tools, tech, compatibility


def _add_context_flags(sub: argparse.ArgumentParser) -> None:
    g = sub.add_argument_group("machining context")
    g.add_argument("--tools", dest="tools_file",
                   help="JSON tool library (default: stock library)")
    g.add_argument("--tech", dest="tech_file",
                   help="JSON technological data (material, roughness_Rt_um,"
                        " form_tolerance_mm)")
    g.add_argument("--compat", dest="compat_file",
                   help="JSON material compatibility table")


# -- feature reconstruction from artifacts -----------------------------------

def _feature_from_dict(doc: dict) -> GeometricFeature:
    cont = doc["continuity"]
    return GeometricFeature(
        id=int(doc["id"]),
        facet_ids=tuple(int(i) for i in doc["facet_ids"]),
        contact_class=str(doc["class"]),
        continuity=ContinuityClass(
            kind=str(cont["kind"]),
            direction_deg=cont.get("direction_deg"),
            band_deg=tuple(cont.get("band_deg") or ())),
        area=float(doc["area"]),
        z_range=tuple(float(z) for z in doc["z_range"]),
        depth_from_top=float(doc["depth_from_top"]),
        principal_direction=float(doc["principal_direction"]),
        mean_z=float(doc["mean_z"]),
        centroid=tuple(float(c) for c in doc["centroid"]),
        elementary_ids=(),
    )


def _segmentation_from_doc(doc: dict) -> SegmentationResult:
    features = [_feature_from_dict(f) for f in doc["features"]]
    relations = [TopologicalRelation(
        feature_a=int(r["feature_a"]), feature_b=int(r["feature_b"]),
        kind=str(r["kind"]),
        shared_edge_length=float(r["shared_edge_length"]),
        min_distance=float(r["min_distance"])) for r in doc["relations"]]
    waivers = [ContainmentNote(
        container_id=int(w["container_id"]),
        contained_id=int(w["contained_id"]),
        note=str(w["note"])) for w in doc["waivers"]]
    return SegmentationResult(
        features=features, relations=relations, waivers=waivers,
        facet_feature=np.asarray(doc["facet_feature"], dtype=np.int64),
        elementary_regions=[])


# -- subcommands -------------------------------------------------------------

def cmd_ingest(args) -> int:
    wd = _workdir(args)
    mesh = load_stl(args.stl)
    write_stl(mesh, wd / MESH_ARTIFACT)
    diag = mesh.diagnostics.to_dict()
    _write_json(wd / "mesh_diagnostics.json", {"schema": 1, **diag})
    print(f"ingested {args.stl}: {diag['facet_count']} facets, "
          f"{diag['vertex_count']} vertices, "
          f"{diag['degenerate_removed']} degenerate removed, "
          f"{diag['flipped_facets']} flipped")
    return 0


def cmd_map(args) -> int:
    wd = _workdir(args)
    mesh = _load_workdir_mesh(wd)
    config = _config_from_args(args)
    stages = AnalysisStages(mesh=mesh, config=config)
    doc = contact_document(mesh, stages.config, stages.indicators())
    _write_json(wd / "contact_map.json", doc)

    ind = stages.indicators()
    if args.color_by == "omega":
        values = np.clip(ind.omega, 0.0, 1.0)
    else:
        values = ind.kappa.copy()
    values = np.where(ind.undercut_mask, np.nan, values)
    ply = mesh_to_ply(mesh, scalar_to_rgb(values))
    (wd / "contact_map.ply").write_text(ply, encoding="utf-8")
    print(f"wrote {wd / 'contact_map.ply'} (colored by {args.color_by})")

    hist = doc["histogram"]
    for name in ("flat", "transition", "draft", "undercut"):
        h = hist[name]
        print(f"  {name:<10} {h['count']:>7} facets  {h['area_mm2']:.1f} mm^2")
    return 0


def cmd_continuity(args) -> int:
    wd = _workdir(args)
    mesh = _load_workdir_mesh(wd)
    config = _config_from_args(args)
    stages = AnalysisStages(mesh=mesh, config=config)
    doc = continuity_document(mesh, stages.config, stages.profile())
    _write_json(wd / "continuity.json", doc)
    print(f"  directions: {doc['directions_deg']}")
    return 0


def cmd_segment(args) -> int:
    wd = _workdir(args)
    mesh = _load_workdir_mesh(wd)
    config = _config_from_args(args)
    tools, tech, compatibility = _load_context(args)
    stages = AnalysisStages(mesh=mesh, config=config, tools=tools, tech=tech,
                            compatibility=compatibility)
    seg = stages.segmentation()
    doc = segmentation_document(mesh, stages.config, seg)
    _write_json(wd / "segmentation.json", doc)

    colors = np.empty((len(mesh.facets), 3), dtype=np.uint8)
    colors[:] = OUT_OF_RANGE
    for feat in seg.features:
        colors[list(feat.facet_ids)] = feature_color(feat.id)
    (wd / "segmentation.ply").write_text(mesh_to_ply(mesh, colors),
                                         encoding="utf-8")
    print(f"wrote {wd / 'segmentation.ply'}")
    for feat in seg.features:
        cont = feat.continuity
        extra = f" @ {cont.direction_deg:g} deg" \
            if cont.direction_deg is not None else ""
        print(f"  feature {feat.id}: {feat.contact_class:<10} "
              f"{cont.kind}{extra}  area {feat.area:.1f} mm^2")
    print(f"  {len(seg.relations)} relations, {len(seg.waivers)} waivers")
    return 0


def cmd_associate(args) -> int:
    wd = _workdir(args)
    mesh = _load_workdir_mesh(wd)
    seg_doc = _read_artifact(wd, "segmentation.json", "diecam segment")
    verify_mesh_sha(seg_doc, mesh, "segmentation.json")
    config = _config_from_args(args, base=seg_doc["config"])
    tools, tech, compatibility = _load_context(args)
    seg = _segmentation_from_doc(seg_doc)

    bindings, junctions, warnings = run_association(
        mesh, seg, config, tools, tech, compatibility)
    doc = association_document(mesh, config, bindings, junctions, warnings,
                               tools, tech, compatibility)
    _write_json(wd / "associations.json", doc)
    for b in doc["bindings"]:
        strat = b["strategy"]
        direction = f" @ {strat['direction_deg']:g} deg" \
            if strat["direction_deg"] is not None else ""
        print(f"  feature {b['feature_id']}: tool {b['tool_id']}, "
              f"{strat['feed_kind']}{direction}, "
              f"pitch {strat['pitch_mm']:.5g} mm")
    for w in warnings:
        print(f"  warning: {w}")
    return 0


def cmd_plan(args) -> int:
    wd = _workdir(args)
    mesh = _load_workdir_mesh(wd)
    seg_doc = _read_artifact(wd, "segmentation.json", "diecam segment")
    assoc_doc = _read_artifact(wd, "associations.json", "diecam associate")
    verify_mesh_sha(seg_doc, mesh, "segmentation.json")
    verify_mesh_sha(assoc_doc, mesh, "associations.json")

    config = _config_from_args(args, base=assoc_doc["config"])
    tools = tool_library_from_json(assoc_doc["tool_library"])
    tech = technological_data_from_dict(assoc_doc["technological_data"])
    compatibility = assoc_doc.get("compatibility")
    seg = _segmentation_from_doc(seg_doc)

    tool_by_id = {t.id: t for t in tools}
    feature_by_id = {f.id: f for f in seg.features}
    bindings = []
    for b in assoc_doc["bindings"]:
        fid = int(b["feature_id"])
        if fid not in feature_by_id:
            raise ArtifactError(
                f"associations.json binds unknown feature {fid}; re-run "
                "'diecam associate'", artifact="associations.json")
        mf = make_machining_feature(feature_by_id[fid], tech, seg.relations,
                                    seg.waivers)
        # keep the recorded machining targets rather than re-deriving them
        mf.machining = MachiningData(
            scallop_height_um=float(b["machining"]["scallop_height_um"]),
            machining_tolerance_mm=float(
                b["machining"]["machining_tolerance_mm"]))
        strat = b["strategy"]
        strategy = MachiningStrategy(
            feed_kind=str(strat["feed_kind"]),
            direction_deg=strat["direction_deg"],
            sweeping_mode=str(strat["sweeping_mode"]),
            cutting_mode=str(strat["cutting_mode"]),
            pitch_mm=float(strat["pitch_mm"]),
            machining_tolerance_mm=float(strat["machining_tolerance_mm"]))
        tool_id = str(b["tool_id"])
        if tool_id not in tool_by_id:
            raise ArtifactError(
                f"associations.json references tool {tool_id!r} missing "
                "from its own library", artifact="associations.json")
        bindings.append((mf, tool_by_id[tool_id], strategy))

    doc = plan_document(mesh, config, seg, bindings,
                        assoc_doc["junction_checks"],
                        assoc_doc["warnings"], tools, tech, compatibility)
    out = Path(args.output) if args.output else wd / "plan.json"
    _write_json(out, doc)
    process = doc["process"]
    print(f"  order: {process['order']}")
    print(f"  tool changes: {process['tool_change_count']}")
    print(f"  total machining length: "
          f"{process['total_machining_length_mm']:.1f} mm")
    return 0


def cmd_serve(args) -> int:
    from .service import run_server

    tools, tech, compatibility = _load_context(args)
    run_server(host=args.host, port=args.port, persist_dir=args.persist,
               tools=tools, tech=tech, compatibility=compatibility)
    return 0


# -- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diecam",
        description="Facet-based machining analysis for forging die "
                    "surface models.")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="-v for info, -vv for debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="clean an STL file into a working "
                                      "directory")
    p.add_argument("stl")
    p.add_argument("-d", "--workdir", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("map", help="per-facet contact classification")
    p.add_argument("-d", "--workdir", required=True)
    p.add_argument("--color-by", choices=("kappa", "omega"),
                   default="kappa", dest="color_by")
    _add_config_flags(p)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("continuity", help="feed-direction residual profile")
    p.add_argument("-d", "--workdir", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_continuity)

    p = sub.add_parser("segment", help="grow and group machinable features")
    p.add_argument("-d", "--workdir", required=True)
    p.add_argument("--merge", action="append", metavar="A,B",
                   help="force-merge two features (repeatable; ids refer to "
                        "the state after the previous edit)")
    p.add_argument("--split", action="append", metavar="FEATURE[:RINGS]",
                   help="split a feature into contact-area rings")
    _add_config_flags(p)
    _add_context_flags(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("associate",
                       help="bind tools and strategies to features")
    p.add_argument("-d", "--workdir", required=True)
    p.add_argument("--single-tool", dest="single_tool",
                   help="restrict the library to one tip type and force "
                        "z-level strategies (e.g. corner_end)")
    p.add_argument("--tool-override", action="append",
                   metavar="FEATURE=TOOL_ID")
    p.add_argument("--strategy-override", action="append",
                   metavar="FEATURE=KIND[:ANGLE]")
    p.add_argument("--clearance", type=float, dest="clearance_mm")
    p.add_argument("--junction-factor", type=float, dest="junction_factor")
    _add_context_flags(p)
    p.set_defaults(func=cmd_associate)

    p = sub.add_parser("plan", help="assemble the ordered process plan")
    p.add_argument("-d", "--workdir", required=True)
    p.add_argument("-o", "--output", help="plan path (default "
                                          "WORKDIR/plan.json)")
    p.add_argument("--order-by", choices=("tool", "z"), dest="order_by")
    p.add_argument("--parking-margin", type=float, dest="parking_margin_mm")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("serve", help="run the HTTP analysis service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--persist", help="directory for session bundles")
    _add_context_flags(p)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = (logging.WARNING, logging.INFO,
             logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except DiecamError as exc:
        json.dump({"error": exc.to_dict()}, sys.stderr, indent=2,
                  sort_keys=True)
        sys.stderr.write("\n")
        return 2
    except OSError as exc:
        json.dump({"error": {"code": "io", "message": str(exc)}},
                  sys.stderr, indent=2, sort_keys=True)
        sys.stderr.write("\n")
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
