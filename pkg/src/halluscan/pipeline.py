"""End-to-end orchestration for one video.

Stage order: ingest, features, distances, d_c, density stats, keyframes,
detail frames, clusters; then the gateway stages: per-cluster static KGs,
one summary-and-consistency call, per-cluster static detection, dynamic
KG, and local dynamic detection, and finally one combined group call for
the whole keyframe set. The summary call runs before the detection calls
because detection prompts embed the working summary. Per-cluster gateway
stages may run on a worker pool; everything is merged by cluster id so
the report is identical for any worker count.
"""

import concurrent.futures
import contextlib
import dataclasses
import os
from typing import Any, Dict, List, Optional, Tuple

from . import detect, kg, report, scoring
from .config import Config
from .errors import ContractError, HalluscanError
from .frames import FrameSet, extract_features, ingest
from .gateway import Gateway
from .keyframes import (
    ClusterSet,
    KeyframeSet,
    auto_m,
    build_clusters,
    build_index_set,
    choose_dc,
    density_stats,
    extract_detail_frames,
    pairwise_distances,
    select_keyframes,
)


@contextlib.contextmanager
def _stage(name: str):
    try:
        yield
    except HalluscanError as exc:
        exc.args = ("stage %s: %s" % (name, exc),)
        raise


def select_clusters(fs: FrameSet, cfg: Config) -> Tuple[KeyframeSet, ClusterSet]:
    """The frame-math half of the pipeline: keyframes plus detail frames."""
    n = len(fs.frames)
    if n == 1:
        kset = KeyframeSet(indices=(0,), m=1)
    else:
        distances = pairwise_distances(fs, cfg.metric)
        d_c = choose_dc(distances, cfg.dc_fraction)
        stats = density_stats(distances, d_c, cfg.kernel)
        m = auto_m(stats) if cfg.m_auto else min(cfg.m, n)
        kset = select_keyframes(stats, m)
    H = build_index_set(kset, n)
    details = extract_detail_frames(fs, H, cfg.tau_d, cfg.metric)
    clusters = build_clusters(kset, details, H)
    return kset, clusters


def _map_clusters(clusters: ClusterSet, workers: int, fn) -> Dict[int, Any]:
    """Run fn per cluster, keyed by cluster id; pool size never changes
    the result."""
    items = list(clusters.clusters)
    if workers <= 1 or len(items) <= 1:
        return {c.cluster_id: fn(c) for c in items}
    out: Dict[int, Any] = {}
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(fn, c): c.cluster_id for c in items}
        for fut in concurrent.futures.as_completed(futures):
            out[futures[fut]] = fut.result()
    return out


def run_detect(
    source: str,
    prompt: str,
    cfg: Config,
    gw: Optional[Gateway] = None,
    video_id: Optional[str] = None,
    out_dir: Optional[str] = None,
) -> Tuple[Dict[str, Any], Dict[str, str]]:
    """Analyze one video and return (report document, written paths)."""
    if not prompt:
        raise ContractError("prompt must be non-empty")
    if video_id is None:
        base = os.path.basename(os.path.normpath(source))
        video_id = os.path.splitext(base)[0] or "video"

    with _stage("ingest"):
        fs = ingest(source, cfg.stride, cfg.synthetic_fps, cfg.decoder_cmd)
    with _stage("features"):
        fs = extract_features(fs, cfg.extractor, workers=cfg.workers)
    with _stage("keyframes"):
        kset, clusters = select_clusters(fs, cfg)

    if gw is None:
        gw = Gateway.from_config(cfg)
    ablation = cfg.ablation
    skip_static = ablation in ("no_static_kg", "no_kg")
    skip_dynamic = ablation in ("no_dynamic_kg", "no_kg")

    premise = None
    if cfg.check_premise:
        with _stage("premise"):
            premise = detect.check_premise(prompt, gw)

    with _stage("static_kg"):
        if skip_static:
            graphs_by_cluster: Dict[int, List[kg.StaticKG]] = {
                c.cluster_id: [] for c in clusters.clusters
            }
        else:

            def build_graphs(cluster):
                indices = cluster.frame_indices()
                refs = [fs.frames[i].image_ref for i in indices]
                by_index = kg.build_static_kgs(indices, refs, gw)
                return [by_index[i] for i in indices]

            graphs_by_cluster = _map_clusters(clusters, cfg.workers, build_graphs)

    all_graphs = sorted(
        (g for graphs in graphs_by_cluster.values() for g in graphs),
        key=lambda g: g.frame_index,
    )

    with _stage("consistency"):
        consistency = detect.summarize_and_check_consistency(
            prompt, kset, fs, all_graphs, gw, cfg.tau_c, ablation
        )
    consistency_f = detect.consistency_finding(consistency)
    if premise is not None and not premise.valid and consistency_f is not None:
        # an impossible premise makes prompt-video divergence expected;
        # keep the flag but strip its score contribution
        consistency = dataclasses.replace(consistency, consistency_severity=0.0)
        consistency_f = dataclasses.replace(
            consistency_f,
            severity=0.0,
            description="informational (invalid premise): " + consistency_f.description,
        )
    summary = consistency.working_summary

    with _stage("cluster_detection"):

        def analyze(cluster):
            graphs = graphs_by_cluster[cluster.cluster_id]
            static_f = detect.detect_static_cluster(
                cluster, fs, graphs, summary, gw, ablation
            )
            warnings: List[str] = []
            if skip_dynamic:
                dkg = None
            else:
                dkg, warnings = kg.build_dynamic_kg(cluster, fs, graphs, gw, ablation)
            local_f = detect.detect_dynamic_local(
                cluster, fs, dkg, summary, gw, ablation, static_f
            )
            return static_f, dkg, local_f, warnings

        per_cluster = _map_clusters(clusters, cfg.workers, analyze)

    static_f = {cid: r[0] for cid, r in per_cluster.items()}
    dynamic_kgs = {cid: r[1] for cid, r in per_cluster.items()}
    local_f = {cid: r[2] for cid, r in per_cluster.items()}
    warnings: List[str] = []
    for cid in sorted(per_cluster):
        warnings.extend(per_cluster[cid][3])

    with _stage("global_dynamic"):
        kf_graphs = []
        if not skip_static:
            by_index = {g.frame_index: g for g in all_graphs}
            kf_graphs = [by_index[i] for i in kset.indices]
        group_dkg, global_f, gwarnings = detect.detect_dynamic_global(
            kset, fs, kf_graphs, summary, gw, ablation
        )
    warnings.extend(gwarnings)

    with _stage("report"):
        doc = report.build_report(
            video_id=video_id,
            prompt=prompt,
            premise=premise,
            consistency=consistency,
            consistency_f=consistency_f,
            cluster_set=clusters,
            keyframes=kset,
            fs=fs,
            static_graphs=graphs_by_cluster,
            dynamic_kgs=dynamic_kgs,
            static_f=static_f,
            local_f=local_f,
            group_dkg=group_dkg,
            global_f=global_f,
            warnings=warnings,
            ledger_digest=gw.ledger.digest(),
            cfg=cfg,
        )
        paths = report.render(doc, out_dir) if out_dir is not None else {}
    return doc, paths
