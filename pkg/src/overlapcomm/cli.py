"""Command-line entry point: ``overlapcomm <subcommand> [flags]``.

Every subcommand writes into ``--output-dir`` through a staging directory, so
either all of its files appear or none do.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from overlapcomm import __version__
from overlapcomm import cover as cov_mod
from overlapcomm import fcore, metrics, synth
from overlapcomm.detect import DetectParams, run_detection
from overlapcomm.graph import EdgeListError, load_graph, save_cache, stats, write_edge_list
from overlapcomm.reports import Staging

log = logging.getLogger("overlapcomm")

GRAPH_CACHE = "graph.ovc"
COVER_FILE = "cover.txt"


class UsageError(Exception):
    pass


def _existing(path: str | None, what: str) -> Path:
    if path is None:
        raise UsageError(f"{what} is required")
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {path}")
    return p


def _graph(args):
    return load_graph(_existing(args.input, "--input"), mutual_only=args.mutual_only)


def _detect_params(args) -> DetectParams:
    p = DetectParams()
    if args.config:
        p = DetectParams.from_config(_existing(args.config, "--config").read_text(), p)
    overrides = {k: v for k, v in (("l_strict", args.l_strict), ("l_soft_low", args.l_soft_low),
                                   ("g_coeff", args.g_coeff), ("b_min", args.b_min)) if v is not None}
    return replace(p, **overrides)


def _read_cover(path: str | None, g, what="--cover"):
    return cov_mod.read_cover(_existing(path, what), g)


# -- subcommands --------------------------------------------------------------


def cmd_ingest(args, out: Staging) -> None:
    g = _graph(args)
    save_cache(g, out.path(GRAPH_CACHE))
    st = stats(g)
    out.json("graph_stats", {**st.to_dict(), "mutual_only": bool(args.mutual_only)})
    log.info("ingested %d vertices, %d edges", g.n, g.m)


def cmd_detect(args, out: Staging) -> None:
    g = _graph(args)
    p = _detect_params(args)
    res = run_detection(g, p, workers=args.workers)
    out.write_text(COVER_FILE, cov_mod.format_cover(res.cover, g.labels))
    out.json("detect_summary", {**res.summary(), "params": p.__dict__})
    log.info("detected %d communities", len(res.cover))


def _analysis_payload(g, cv, profiles, tally, ostats) -> dict:
    md = metrics.membership_distributions(cv) if len(cv) else None
    live = [p for p in profiles if not p.zero_kout]
    return {
        "communities": len(cv),
        "edge_types": tally.to_dict(),
        "membership": None if md is None else {
            "P_1": md.P.get(1, 0.0), "mean_m": float(md.mean_m), "mean_m_C": float(md.mean_m_C),
            "p_m": {str(k): v for k, v in md.p.items()},
            "P_m": {str(k): v for k, v in md.P.items()},
        },
        "overlaps": {
            "total": ostats.total, "size_shares": ostats.size_shares,
            "e2_shares": ostats.e2_shares, "mean_e2": ostats.mean_e2,
        },
        "outbound": {
            "communities_kout_gt_kint": sum(p.k_out > p.k_int for p in profiles),
            "share_kout_gt_kint": (sum(p.k_out > p.k_int for p in profiles) / len(profiles)
                                   if profiles else 0.0),
            "zero_kout": len(profiles) - len(live),
            "mean_e1": float(np.mean([p.e1 for p in live])) if live else None,
            "mean_e2": float(np.mean([p.e2 for p in live])) if live else None,
            "mean_e3": float(np.mean([p.e3 for p in live])) if live else None,
        },
    }


def cmd_analyze(args, out: Staging) -> None:
    g = _graph(args)
    cv = _read_cover(args.cover, g)
    profiles = metrics.community_profiles(g, cv, alpha=args.alpha, workers=args.workers)
    out.csv("profiles", metrics.PROFILE_COLUMNS, metrics.profile_rows(profiles))
    for name, table in metrics.histograms(g, cv, profiles, args.alpha, args.workers).items():
        out.csv(table.name, table.columns, table.rows, filename=f"{name}.csv")
    tally = metrics.classify_network_edges(g, cv)
    ostats = metrics.overlap_stats(cov_mod.overlaps(cv, g))
    out.json("analysis", _analysis_payload(g, cv, profiles, tally, ostats))


def cmd_edges(args, out: Staging) -> None:
    g = _graph(args)
    cv = _read_cover(args.cover, g)
    tally = metrics.classify_network_edges(g, cv)
    out.json("edge_types", {**tally.to_dict(), "edges": g.m})
    out.csv("overlaps", cov_mod.OVERLAP_COLUMNS, cov_mod.overlap_rows(cov_mod.overlaps(cv, g)))


def _labels(g, ids: np.ndarray) -> str:
    return " ".join(map(str, g.labels[ids].tolist()))


def cmd_fcore(args, out: Staging) -> None:
    g = _graph(args)
    cv = _read_cover(args.cover, g)
    f = fcore.FCoreParams(args.f).f
    rows = []
    for c in cv.communities:
        if c.n_C < 2:
            rows.append((c.id, c.n_C, "na", 0, "", ""))
            continue
        ok = fcore.verify(g, c.members, f)
        kept = fcore.peel(g, c.members, f)
        edge = fcore.boundary_vertices(g, kept, f) if len(kept) else np.zeros(0, np.int64)
        rows.append((c.id, c.n_C, int(ok), len(kept), _labels(g, kept), _labels(g, edge)))
    out.csv("fcore", ("community_id", "n_C", "feasible", "peeled_size", "peeled_members",
                      "boundary_vertices"), rows)
    out.json("fcore_summary", {"f": f, "communities": len(rows),
                               "feasible": sum(r[2] == 1 for r in rows),
                               "nonempty_after_peel": sum(r[3] > 0 for r in rows)})


def cmd_synth(args, out: Staging) -> None:
    spec = synth.PlantedSpec()
    if args.spec:
        spec = synth.PlantedSpec.from_json(_existing(args.spec, "--spec").read_text())
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    bench = synth.generate(spec)
    write_edge_list(bench.graph, out.path("graph.txt"),
                    header=f"overlapcomm {__version__} planted benchmark, seed {spec.seed}")
    out.write_text("truth.cover", cov_mod.format_cover(bench.truth, bench.graph.labels))
    out.csv("truth_overlaps", cov_mod.OVERLAP_COLUMNS, cov_mod.overlap_rows(bench.overlaps))
    out.json("spec", {"spec": spec.to_dict(), "vertices": bench.graph.n, "edges": bench.graph.m,
                      "communities": len(bench.truth), "target_P_1": spec.target_P1(),
                      "target_overlap_shares": spec.target_overlap_shares()})


def cmd_score(args, out: Staging) -> None:
    det = cov_mod.parse_cover_records(_existing(args.cover, "--cover").read_text())
    tru = cov_mod.parse_cover_records(_existing(args.truth, "--truth").read_text())
    report = synth.score([m for *_, m in det], [m for *_, m in tru], args.jaccard)
    out.json("score", report.to_dict())


COMMANDS = {
    "ingest": (cmd_ingest, "read an edge list, write a binary graph cache and graph statistics"),
    "detect": (cmd_detect, "detect overlapping communities and write a cover file"),
    "analyze": (cmd_analyze, "write per-community metrics, histograms and a summary"),
    "edges": (cmd_edges, "classify every edge into the five types and list overlaps"),
    "fcore": (cmd_fcore, "verify and peel every community of a cover as an f-core"),
    "synth": (cmd_synth, "generate a planted benchmark graph with its ground truth"),
    "score": (cmd_score, "score a detected cover against a ground-truth cover"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="overlapcomm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"overlapcomm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output-dir", required=True, help="directory receiving the output files")
    common.add_argument("--workers", type=int, default=1, help="worker threads (output does not depend on it)")
    common.add_argument("-v", "--verbose", action="store_true")

    graph_in = argparse.ArgumentParser(add_help=False)
    graph_in.add_argument("--input", required=True, help="edge list or binary graph cache")
    graph_in.add_argument("--mutual-only", action="store_true",
                          help="keep only reciprocated arcs when reading an edge list")

    cover_in = argparse.ArgumentParser(add_help=False)
    cover_in.add_argument("--cover", required=True, help="cover file")

    parents = {
        "ingest": [common, graph_in],
        "detect": [common, graph_in],
        "analyze": [common, graph_in, cover_in],
        "edges": [common, graph_in, cover_in],
        "fcore": [common, graph_in, cover_in],
        "synth": [common],
        "score": [common, cover_in],
    }
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=parents[name], help=help_text, description=help_text)
        if name == "detect":
            p.add_argument("--config", help="key=value file of detection parameters")
            p.add_argument("--l-strict", type=int)
            p.add_argument("--l-soft-low", type=int)
            p.add_argument("--g-coeff", type=float)
            p.add_argument("--b-min", type=float)
        elif name == "analyze":
            p.add_argument("--alpha", type=float, default=1.0, help="fitness exponent")
        elif name == "fcore":
            p.add_argument("--f", type=float, default=0.5, help="belongingness threshold in (0, 1]")
        elif name == "synth":
            p.add_argument("--spec", help="JSON file of planted-benchmark parameters")
            p.add_argument("--seed", type=int, help="overrides the seed in --spec")
        elif name == "score":
            p.add_argument("--truth", required=True, help="ground-truth cover file")
            p.add_argument("--jaccard", type=float, default=0.8, help="match threshold")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    if args.workers < 1:
        parser.error("--workers must be at least 1")
    func, _ = COMMANDS[args.command]
    try:
        with Staging(args.output_dir) as out:
            func(args, out)
    except (UsageError, OSError, ValueError, KeyError, IndexError, EdgeListError,
            json.JSONDecodeError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"overlapcomm {args.command}: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
