"""Pipeline stages. Each stage reads earlier artifacts from the output
directory, writes its own, and records a manifest next to them."""
from __future__ import annotations

import contextlib
import csv
import hashlib
import json
import logging
import os
import platform

import numpy as np
import scipy

from . import __version__
from . import bigraph, centrality, community, project as proj_mod, stats, synth
from .config import ConfigError, RunConfig
from .ingest import (join_dataset, load_dataset, parse_items, parse_shares, write_items,
                     write_rejections, write_shares)

log = logging.getLogger(__name__)

SUBDIRS = ("graphs", "projections", "communities", "centrality", "stats", "report")


class PipelineError(RuntimeError):
    pass


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def dump_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False,
                  default=_jsonable)
        fh.write("\n")


def _jsonable(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _clean(x):
    """NaN and inf become None so that JSON stays strict."""
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (float, np.floating)) and not np.isfinite(x):
        return None
    return x


def write_manifest(cfg: RunConfig, subcommand: str, subdir: str, inputs: dict[str, str],
                   outputs: list[str]) -> None:
    root = os.path.join(cfg.outdir, subdir)
    manifest = {
        "subcommand": subcommand,
        "config_hash": cfg.hash(),
        "inputs": {name: _sha256(p) for name, p in sorted(inputs.items())},
        "outputs": {os.path.relpath(p, root): _sha256(p) for p in sorted(outputs)},
        "versions": {
            "copetition": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": ".".join(platform.python_version_tuple()[:2]),
        },
    }
    dump_json(manifest, os.path.join(root, "manifest.json"))


@contextlib.contextmanager
def locked(outdir: str):
    """One run per output directory."""
    os.makedirs(outdir, exist_ok=True)
    lock = os.path.join(outdir, ".copetition.lock")
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise PipelineError(f"output directory {outdir} is locked by another run ({lock})") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        with contextlib.suppress(FileNotFoundError):
            os.remove(lock)


def _dir(cfg: RunConfig, name: str) -> str:
    d = os.path.join(cfg.outdir, name)
    os.makedirs(d, exist_ok=True)
    return d


def _need(path: str) -> str:
    if not os.path.exists(path):
        raise PipelineError(f"missing artifact: {path}")
    return path


# --- stages -----------------------------------------------------------------

def run_synth(cfg: RunConfig) -> None:
    ds, truth = synth.generate(cfg.synth)
    paths = synth.write_synth(ds, truth, cfg.synth_out)
    log.info("synth: %d shares, %d items -> %s", len(ds.shares), len(ds.items), cfg.synth_out)
    os.makedirs(cfg.outdir, exist_ok=True)
    # manifest lives beside the synthetic files
    manifest = {
        "subcommand": "synth",
        "config_hash": cfg.hash(),
        "outputs": {os.path.basename(p): _sha256(p) for p in sorted(paths.values())},
        "versions": {"copetition": __version__, "numpy": np.__version__},
    }
    dump_json(manifest, os.path.join(cfg.synth_out, "manifest.json"))


def load_normalized(cfg: RunConfig):
    g = _dir(cfg, "graphs")
    shares, _ = parse_shares(_need(os.path.join(g, "shares.jsonl")))
    items, _ = parse_items(_need(os.path.join(g, "items.csv")))
    return join_dataset(shares, items)


def run_ingest(cfg: RunConfig) -> None:
    for key, p in (("inputs.shares", cfg.shares_path), ("inputs.items", cfg.items_path)):
        if not os.path.exists(p):
            raise ConfigError(key, f"file not found: {p}")
    ds, share_rej, item_rej = load_dataset(cfg.shares_path, cfg.items_path)
    g = _dir(cfg, "graphs")
    out = {name: os.path.join(g, name) for name in
           ("shares.jsonl", "items.csv", "share_rejections.csv", "item_rejections.csv",
            "bigraph.cpb", "ingest.json")}
    with open(out["shares.jsonl"], "w", encoding="utf-8", newline="\n") as fh:
        write_shares(ds.shares, fh)
    with open(out["items.csv"], "w", encoding="utf-8", newline="") as fh:
        write_items(ds.items, fh)
    with open(out["share_rejections.csv"], "w", encoding="utf-8", newline="") as fh:
        write_rejections(share_rej, fh)
    with open(out["item_rejections.csv"], "w", encoding="utf-8", newline="") as fh:
        write_rejections(item_rej, fh)
    graph = bigraph.build(ds)
    bigraph.save_cache(graph, out["bigraph.cpb"])
    dump_json(_clean({
        "shares": len(ds.shares), "items": len(ds.items),
        "share_rejections": len(share_rej), "item_rejections": len(item_rej),
        "matched_shares": ds.n_matched, "unmatched_shares": ds.n_unmatched,
        "unmatched_items": len(ds.unmatched_item_ids),
        "actors": graph.n_actors, "items_tweeted": graph.n_items,
        "incidences": graph.n_incidences,
        "degree_profile": bigraph.degree_profile(graph, ds),
    }), out["ingest.json"])
    write_manifest(cfg, "ingest", "graphs",
                   {"shares": cfg.shares_path, "items": cfg.items_path}, list(out.values()))


def _graph(cfg: RunConfig) -> bigraph.BipartiteGraph:
    return bigraph.load_cache(_need(os.path.join(cfg.outdir, "graphs", "bigraph.cpb")))


def build_projection(graph, side: str, cfg: RunConfig):
    """project -> weigh -> filter; returns (filtered, raw_sizes). Unweighted if there are no edges."""
    p = proj_mod.project(graph, side, cfg.max_degree_warning)
    raw = {"nodes": p.n_nodes, "edges": p.n_edges, "total_co_mass": p.total_co_mass}
    if p.total_co_mass == 0:
        return p, raw
    p = proj_mod.weigh(p)
    f = cfg.filters[side]
    return proj_mod.filter_edges(p, proj_mod.FilterSpec(f.quantile, f.drop_isolated)), raw


def run_project(cfg: RunConfig) -> None:
    graph = _graph(cfg)
    d = _dir(cfg, "projections")
    outputs = []
    for side in cfg.sides:
        p, raw = build_projection(graph, side, cfg)
        paths = [os.path.join(d, f"{side}.{ext}") for ext in ("cpp", "csv", "json")]
        proj_mod.save_cache(p, paths[0])
        proj_mod.write_csv(p, paths[1])
        w = p.weight
        dump_json(_clean({
            "side": side, "unfiltered": raw,
            "filtered": {"nodes": p.n_nodes, "edges": p.n_edges},
            "quantile": cfg.filters[side].quantile,
            "drop_isolated": cfg.filters[side].drop_isolated,
            "weighted": w is not None,
            "weight_min": float(w.min()) if w is not None and w.size else None,
            "weight_max": float(w.max()) if w is not None and w.size else None,
            "negative_weight_edges": int((w <= 0).sum()) if w is not None else 0,
        }), paths[2])
        outputs += paths
    write_manifest(cfg, "project", "projections",
                   {"bigraph": os.path.join(cfg.outdir, "graphs", "bigraph.cpb")}, outputs)


def _projection(cfg: RunConfig, side: str):
    return proj_mod.load_cache(_need(os.path.join(cfg.outdir, "projections", f"{side}.cpp")))


def _louvain_summary(p, cfg: RunConfig):
    try:
        a = community.louvain(p, cfg.resolution, cfg.louvain_seed)
    except community.NoEdgesError:
        return None, {"modularity": None, "clusters": None, "nodes": p.n_nodes}
    sizes = a.sizes
    return a, {
        "modularity": a.modularity, "clusters": a.n_clusters, "nodes": p.n_nodes,
        "levels": a.n_levels, "passes": a.n_passes, "dropped_nonpositive_edges": a.dropped_edges,
        "clusters_over_1000": int((sizes > 1000).sum()),
        "largest_sizes": sorted(sizes.tolist(), reverse=True)[:10],
    }


def run_communities(cfg: RunConfig) -> None:
    graph = _graph(cfg)
    ds = load_normalized(cfg)
    d = _dir(cfg, "communities")
    outputs, inputs = [], {}
    for side in cfg.sides:
        p = _projection(cfg, side)
        inputs[f"projection_{side}"] = os.path.join(cfg.outdir, "projections", f"{side}.cpp")
        a, summary = _louvain_summary(p, cfg)
        paths = [os.path.join(d, f"{side}{suffix}") for suffix in ("_assignment.csv", "_profile.json", ".json")]
        if a is not None:
            community.write_assignment_csv(a, p.labels, paths[0])
            profile = community.cluster_profile(a, graph, ds, cfg.profile_top_k, side=side)
        else:
            with open(paths[0], "w", encoding="utf-8") as fh:
                fh.write("node_id,cluster_id\n")
            profile = []
        community.write_profile_json(profile, paths[1])
        dump_json(_clean(summary), paths[2])
        outputs += paths
    # item-side community structure per creation-time window
    splits = []
    for k, sub in enumerate(stats.temporal_split(ds, cfg.boundaries)):
        g = bigraph.build(sub)
        p, _ = build_projection(g, "item", cfg)
        _, summary = _louvain_summary(p, cfg)
        splits.append({"window": k, "items": len(sub.items), "shares": len(sub.shares),
                       "edges": p.n_edges, **summary})
    tpath = os.path.join(d, "temporal.json")
    dump_json(_clean({"boundaries": list(cfg.boundaries), "windows": splits}), tpath)
    outputs.append(tpath)
    write_manifest(cfg, "communities", "communities", inputs, outputs)


def run_pagerank(cfg: RunConfig) -> None:
    graph = _graph(cfg)
    ds = load_normalized(cfg)
    d = _dir(cfg, "centrality")
    outputs, inputs = [], {}
    for side in cfg.sides:
        p = _projection(cfg, side)
        inputs[f"projection_{side}"] = os.path.join(cfg.outdir, "projections", f"{side}.cpp")
        spath = os.path.join(d, f"{side}_scores.csv")
        jpath = os.path.join(d, f"{side}.json")
        if p.n_nodes:
            sc = centrality.pagerank(p, cfg.damping, cfg.tol, cfg.max_iter)
            centrality.write_scores_csv(sc, p.labels, spath)
            summary = {"nodes": p.n_nodes, "iterations": sc.iterations, "residual": sc.residual,
                       "converged": sc.converged, "damping": sc.damping,
                       "dropped_nonpositive_edges": sc.dropped_edges}
            top = centrality.top_nodes(sc, cfg.top_k, graph, ds if side == "actor" else None, side)
        else:
            with open(spath, "w", encoding="utf-8") as fh:
                fh.write("node_id,score\n")
            summary = {"nodes": 0, "iterations": None, "residual": None, "converged": None,
                       "damping": cfg.damping, "dropped_nonpositive_edges": 0}
            top = []
        summary["top"] = top
        dump_json(_clean(summary), jpath)
        outputs += [spath, jpath]
        if side == "actor":
            tpath = os.path.join(d, "top_actors.csv")
            with open(tpath, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(centrality.TOP_ACTOR_COLUMNS)
                for row in top:
                    w.writerow([row.get(c, "") for c in centrality.TOP_ACTOR_COLUMNS])
            outputs.append(tpath)
    write_manifest(cfg, "pagerank", "centrality", inputs, outputs)


def _read_scores(path: str, labels) -> centrality.CentralityScores | None:
    if not os.path.exists(path):
        return None
    pos = {lab: k for k, lab in enumerate(labels)}
    nodes, vals = [], []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            nodes.append(pos[row["node_id"]])
            vals.append(float(row["score"]))
    if not nodes:
        return None
    return centrality.CentralityScores(np.array(nodes), np.array(vals), float("nan"), 0, 0.0, True)


def _tsv(hist, path, label):
    stats.write_histogram(hist, path, label)
    return path


def run_stats(cfg: RunConfig) -> None:
    graph = _graph(cfg)
    ds = load_normalized(cfg)
    d = _dir(cfg, "stats")
    st = stats.petition_stats(graph, ds)
    outputs = [os.path.join(d, "petition_stats.csv")]
    stats.write_petition_stats(st, outputs[0])

    item_proj = None
    ipath = os.path.join(cfg.outdir, "projections", "item.cpp")
    if os.path.exists(ipath):
        item_proj = proj_mod.load_cache(ipath)
    scores = _read_scores(os.path.join(cfg.outdir, "centrality", "item_scores.csv"), graph.item_ids)
    bins = cfg.bins_per_decade
    delays = stats.delay_histogram(ds, bins)
    thr = stats.threshold_profile(ds, bins)
    corr = stats.scalar_correlates(st, scores, item_proj, delays)
    for name, entry in corr.items():
        entry["reference"] = stats.REFERENCE.get(name)
    outputs.append(os.path.join(d, "correlations.json"))
    dump_json(_clean(corr), outputs[-1])

    smoothed = stats.smooth3(delays.histogram.counts)
    modes = stats.local_maxima(smoothed)
    outputs.append(os.path.join(d, "delay.json"))
    dump_json(_clean({
        "tweets": delays.histogram.total, "excluded": delays.histogram.excluded,
        "median_delay_seconds": float(np.median(delays.delays)) if delays.delays.size else None,
        "modes_bin_left_seconds": [float(delays.histogram.edges[m]) for m in modes],
        "n_modes": len(modes),
        "delay_vs_tweets": corr["delay_vs_tweets"]["value"],
    }), outputs[-1])
    outputs.append(os.path.join(d, "threshold.json"))
    dump_json(_clean({
        "tweets": thr.histogram.total, "median_signatures": thr.median,
        "markers": list(thr.markers),
        "fraction_at_or_above_response": thr.fraction_between(stats.RESPONSE_THRESHOLD, float("inf")),
        "fraction_at_or_above_debate": thr.fraction_between(stats.DEBATE_THRESHOLD, float("inf")),
        "reference_median": stats.REFERENCE["median_signatures_per_tweet"],
    }), outputs[-1])
    outputs.append(_tsv(delays.histogram, os.path.join(d, "delay_hist.tsv"), "delay_seconds"))
    outputs.append(_tsv(thr.histogram, os.path.join(d, "threshold_hist.tsv"), "signatures"))
    outputs.append(_tsv(stats.log_histogram(st.signatures, bins), os.path.join(d, "signatures_hist.tsv"),
                        "signatures"))
    outputs.append(_tsv(stats.log_histogram(st.tweets, bins), os.path.join(d, "tweets_hist.tsv"), "tweets"))

    big_titles = [ds.item(i).title for i, s in zip(st.item_ids, st.signatures)
                  if s >= stats.RESPONSE_THRESHOLD]
    bios: dict[str, str] = {}
    for s in ds.matched_shares():
        bios.setdefault(s.actor_id, s.bio)
    for name, texts in (("title_words.csv", big_titles), ("bio_words.csv", list(bios.values()))):
        path = os.path.join(d, name)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("token", "count", "weight"))
            for tok, (c, wt) in stats.word_freq(texts).items():
                w.writerow((tok, c, repr(wt)))
        outputs.append(path)

    outputs.append(os.path.join(d, "degree_profile.json"))
    dump_json(_clean(bigraph.degree_profile(graph, ds)), outputs[-1])
    inputs = {"bigraph": os.path.join(cfg.outdir, "graphs", "bigraph.cpb")}
    if item_proj is not None:
        inputs["projection_item"] = ipath
    write_manifest(cfg, "stats", "stats", inputs, outputs)


def regressions(graph, ds) -> dict:
    st = stats.petition_stats(graph, ds)
    try:
        res = stats.signature_regressions(st)
    except ValueError as exc:
        return {"error": str(exc)}
    out = {}
    key_coef = {"R1": "ln_tweets", "R2": "ln_users", "R3": "ln_unique_audience",
                "R4": "ln_total_exposure", "R5": "ln_users"}
    for name, r in res.items():
        d = r.to_dict()
        d["response_pct_to_10pct"] = stats.elasticity_response(r[key_coef[name]])
        d["response_predictor"] = key_coef[name]
        out[name] = d
    return out


def run_regress(cfg: RunConfig) -> None:
    graph = _graph(cfg)
    ds = load_normalized(cfg)
    d = _dir(cfg, "stats")
    path = os.path.join(d, "regressions.json")
    dump_json(_clean(regressions(graph, ds)), path)
    # regress shares the stats directory, so it keeps a manifest of its own
    manifest = {
        "subcommand": "regress", "config_hash": cfg.hash(),
        "inputs": {"bigraph": _sha256(os.path.join(cfg.outdir, "graphs", "bigraph.cpb"))},
        "outputs": {"regressions.json": _sha256(path)},
        "versions": {"copetition": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
    }
    dump_json(manifest, os.path.join(d, "manifest_regress.json"))


def run_report(cfg: RunConfig) -> None:
    from .report import build_report
    build_report(cfg.outdir)
    d = os.path.join(cfg.outdir, "report")
    outs = [os.path.join(d, f) for f in sorted(os.listdir(d)) if f != "manifest.json"]
    write_manifest(cfg, "report", "report", {}, outs)


STAGES = {
    "synth": run_synth,
    "ingest": run_ingest,
    "project": run_project,
    "communities": run_communities,
    "pagerank": run_pagerank,
    "stats": run_stats,
    "regress": run_regress,
    "report": run_report,
}
PIPELINE = ("ingest", "project", "communities", "pagerank", "stats", "regress", "report")


def run(subcommand: str, cfg: RunConfig) -> None:
    with locked(cfg.outdir):
        if subcommand == "pipeline":
            for name in PIPELINE:
                log.info("stage %s", name)
                STAGES[name](cfg)
        else:
            STAGES[subcommand](cfg)
