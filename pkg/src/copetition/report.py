"""Human-readable summary of a pipeline output directory."""
from __future__ import annotations

import json
import os
import shutil
from datetime import datetime, timezone

from .pipeline import PipelineError, dump_json


def _load(outdir: str, rel: str, required: bool = True):
    path = os.path.join(outdir, rel)
    if not os.path.exists(path):
        if required:
            raise PipelineError(f"missing artifact: {rel}")
        return None
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def fmt(x) -> str:
    if x is None:
        return "undefined"
    if isinstance(x, bool):
        return "yes" if x else "no"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def _day(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%d")


def collect(outdir: str) -> dict:
    """Gather the key scalars from the artifacts into one dictionary."""
    ingest = _load(outdir, "graphs/ingest.json")
    sides = [s for s in ("item", "actor") if os.path.exists(os.path.join(outdir, f"projections/{s}.json"))]
    data = {
        "ingest": ingest,
        "projections": {s: _load(outdir, f"projections/{s}.json") for s in sides},
        "communities": {s: _load(outdir, f"communities/{s}.json") for s in sides},
        "temporal": _load(outdir, "communities/temporal.json"),
        "centrality": {s: _load(outdir, f"centrality/{s}.json") for s in sides},
        "correlations": _load(outdir, "stats/correlations.json"),
        "delay": _load(outdir, "stats/delay.json"),
        "threshold": _load(outdir, "stats/threshold.json"),
        "degree_profile": _load(outdir, "stats/degree_profile.json"),
        "regressions": _load(outdir, "stats/regressions.json"),
    }
    return data


def render(data: dict) -> str:
    L = []
    add = L.append
    ing = data["ingest"]
    add("copetition analysis report")
    add("==========================")
    add("")
    add("Dataset")
    add(f"  shares: {ing['shares']} (matched {ing['matched_shares']}, unmatched {ing['unmatched_shares']}, "
        f"rejected lines {ing['share_rejections']})")
    add(f"  items: {ing['items']} (tweeted {ing['items_tweeted']}, rejected lines {ing['item_rejections']})")
    add(f"  actors: {ing['actors']}   actor-item incidences: {ing['incidences']}")
    add("")
    add("Per-item summary            median      max")
    for key in ("signatures", "tweets", "users"):
        row = data["degree_profile"].get(key, {"median": None, "max": None})
        add(f"  {key:<22}{fmt(row['median']):>10} {fmt(row['max']):>10}")
    add("")
    add("Projections (unfiltered -> filtered)")
    for side, p in data["projections"].items():
        add(f"  {side:<6} nodes {p['unfiltered']['nodes']} -> {p['filtered']['nodes']}, "
            f"edges {p['unfiltered']['edges']} -> {p['filtered']['edges']} (keep fraction {fmt(p['quantile'])})")
    add("")
    add("Communities (Louvain)")
    for side, c in data["communities"].items():
        extra = ""
        if c.get("clusters") is not None:
            extra = f", clusters over 1000 nodes {c['clusters_over_1000']}, largest {c['largest_sizes'][:3]}"
        add(f"  {side:<6} modularity {fmt(c['modularity'])}, clusters {fmt(c['clusters'])}{extra}")
    t = data["temporal"]
    if t is not None:
        bounds = [_day(b) for b in t["boundaries"]]
        for w in t["windows"]:
            k = w["window"]
            lo = bounds[k - 1] if k > 0 else "-inf"
            hi = bounds[k] if k < len(bounds) else "+inf"
            add(f"  item window [{lo}, {hi}): items {w['items']}, edges {w['edges']}, "
                f"modularity {fmt(w['modularity'])}")
    add("")
    add("Log-log correlations                      value        n  reference")
    for name, e in data["correlations"].items():
        add(f"  {name:<36}{fmt(e['value']):>11}{e['n']:>9}  {fmt(e.get('reference'))}")
    add("")
    add("Regressions (ln(1+signatures))")
    reg = data["regressions"]
    if "error" in reg:
        add(f"  undefined: {reg['error']}")
    else:
        for name, r in reg.items():
            pred = r["response_predictor"]
            add(f"  {name}: {pred} {fmt(r['coefficients'][pred])} (se {fmt(r['stderr'][pred])}), "
                f"R^2 {fmt(r['r_squared'])}, n {r['n']}, +10% -> {fmt(r['response_pct_to_10pct'])}%")
    add("")
    d = data["delay"]
    add("Delay from item creation to tweet")
    add(f"  tweets {d['tweets']}, excluded {json.dumps(d['excluded'], sort_keys=True)}")
    add(f"  median delay (s) {fmt(d['median_delay_seconds'])}, modes {d['n_modes']} at "
        f"{[fmt(x) for x in d['modes_bin_left_seconds']]}")
    th = data["threshold"]
    add("Signatures of shared items")
    add(f"  median {fmt(th['median_signatures'])} (reference {fmt(th['reference_median'])}), "
        f"share >= 10k {fmt(th['fraction_at_or_above_response'])}, "
        f">= 100k {fmt(th['fraction_at_or_above_debate'])}")
    add("")
    cent = data["centrality"].get("actor")
    add("Most central actors")
    if not cent or not cent.get("top"):
        add("  undefined")
    else:
        add("  rank  pagerank    followers following verified tweets unique_items favorites retweets  bio | top item")
        for r in cent["top"]:
            add(f"  {r['rank']:>4}  {fmt(r['pagerank']):<11} {r.get('followers', ''):>9} {r.get('following', ''):>9} "
                f"{fmt(r.get('verified')):>8} {r.get('tweets', ''):>6} {r.get('unique_items', ''):>12} "
                f"{r.get('favorites_received', ''):>9} {r.get('retweets_received', ''):>8}  "
                f"{r.get('bio', '')} | {r.get('top_item_title', '')}")
    add("")
    return "\n".join(L)


def build_report(outdir: str) -> dict:
    """Write ``report/summary.txt``, ``report/report.json`` and plot-ready histograms."""
    data = collect(outdir)
    d = os.path.join(outdir, "report")
    os.makedirs(d, exist_ok=True)
    with open(os.path.join(d, "summary.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render(data))
    dump_json(data, os.path.join(d, "report.json"))
    for name in ("delay_hist.tsv", "threshold_hist.tsv", "signatures_hist.tsv", "tweets_hist.tsv"):
        src = os.path.join(outdir, "stats", name)
        if not os.path.exists(src):
            raise PipelineError(f"missing artifact: stats/{name}")
        shutil.copyfile(src, os.path.join(d, name))
    return data
