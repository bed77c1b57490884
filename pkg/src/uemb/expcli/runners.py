"""Experiment runners: desk-scale simulation reproductions and sweeps.

Every runner is bit-reproducible from (config, seed): randomness flows
through per-cell derived RandomStates and CSV cells are written with
shortest round-trip float formatting, so a rerun yields identical bytes.
Scatter outputs always carry the theory column computed at the same
parameters.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from ..embedder import (
    build_operator,
    build_universal_operator,
    embed_batch,
    embedding_distance,
    replace_map,
    universal_scale,
)
from ..maps import make_sawtooth, make_square_wave, quantize_map
from ..randproj import ProjectionSpec, RandomState
from ..theory import (
    DistanceMapModel,
    binary_decay_threshold,
    discontinuous_extension_bound,
    p2_bound,
    p2_meaningful_radius,
    pointcloud_bound,
    universal_binary_map,
    universal_binary_map_l1,
)
from .config import ConfigError, emit_csv, parse_map


class DatasetError(RuntimeError):
    """Synthetic dataset failed its separation-margin validation."""


def _require_kind(cfg, kind):
    if cfg.kind != kind:
        raise ConfigError("config kind %r does not match runner %r" % (cfg.kind, kind))


def _map_cells(fn, items):
    """Run independent sweep cells, optionally across UEMB_THREADS workers.

    Results come back in cell order and each cell derives its own
    RandomState, so the worker count cannot change any output byte.
    """
    try:
        workers = max(1, int(os.environ.get("UEMB_THREADS", "1")))
    except ValueError:
        workers = 1
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def _pair_block(rs, stream, N, dvals, metric):
    """Signal pairs x' = x + d u at controlled distances.

    u is uniform on the unit sphere for the l2 metric and scaled to unit
    l1 norm for the l1 metric.  Returns a (2n, N) matrix with pair i in
    rows 2i, 2i+1.
    """
    n = len(dvals)
    g = rs.gaussian(stream, 2 * n * N).reshape(n, 2, N)
    x = g[:, 0, :]
    u = g[:, 1, :]
    if metric == "l2":
        norms = np.linalg.norm(u, axis=1, keepdims=True)
    else:
        norms = np.sum(np.abs(u), axis=1, keepdims=True)
    X = np.empty((2 * n, N))
    X[0::2] = x
    X[1::2] = x + np.asarray(dvals)[:, None] * u / norms
    return X


def _pair_metric(vecs, metric):
    return np.array(
        [embedding_distance(vecs[2 * i], vecs[2 * i + 1], metric)
         for i in range(len(vecs) // 2)]
    )


def _fmt(v):
    return repr(float(v))


def run_design_sim(cfg, out_dir):
    """Unquantized designed-map scatter vs theory (two projection scales)."""
    _require_kind(cfg, "design_sim")
    map_ = parse_map(cfg["map"])
    rs = RandomState(cfg.seed)
    dvals = np.linspace(cfg["d_min"], cfg["d_max"], cfg["pairs"])
    summary_rows = []
    files = []
    for j, sigma in enumerate(cfg["sigma_list"]):
        spec = ProjectionSpec(cfg["family"], sigma)
        cell = rs.child("design:%d" % j)
        op = build_operator(spec, map_, cfg["M"], cfg["N"], cell)
        X = _pair_block(cell, "signals", cfg["N"], dvals, spec.signal_metric)
        emb = _pair_metric(embed_batch(op, X), "sq_l2_mean")
        model = DistanceMapModel(map_, spec)
        theory = model.curve(dvals)
        path = os.path.join(out_dir, "design_scatter_sigma=%s.csv" % _fmt(sigma))
        emit_csv(path, ["d_true", "emb_sq_l2_mean", "g_theory"],
                 list(zip(dvals, emb, theory)))
        files.append(path)
        resid = emb - theory
        hbar = map_.hbar
        within = float(np.mean(np.abs(resid) <= 0.1))
        viol15 = float(np.mean(np.abs(resid) > 0.15))
        hoeff15 = 2.0 * math.exp(-2.0 * cfg["M"] * 0.15 ** 2 / hbar ** 4)
        summary_rows.append((sigma, cfg["pairs"], within, viol15, hoeff15, hbar))
    spath = os.path.join(out_dir, "design_summary.csv")
    emit_csv(
        spath,
        ["sigma", "pairs", "frac_within_0.1", "violation_rate_0.15",
         "hoeffding_bound_0.15", "hbar"],
        summary_rows,
    )
    files.append(spath)
    return {"files": files, "summary": summary_rows}


def run_quantization_sim(cfg, out_dir):
    """Scatter of quantized embeddings against the unquantized theory curve.

    variant "mixture": h = Q_B(design mixture); variant "universal": the
    B-bit universal (quantized-sawtooth) embedding at (sigma, Delta).
    Each cell also embeds the unquantized twin with the same (A, w) and
    checks the quantized deviations against the eps + 2 E_Q inflation on
    the metric (sqrt) scale.
    """
    _require_kind(cfg, "quantization_sim")
    variant = cfg["variant"]
    if variant not in ("mixture", "universal"):
        raise ConfigError("variant must be 'mixture' or 'universal'")
    rs = RandomState(cfg.seed)
    dvals = np.linspace(cfg["d_min"], cfg["d_max"], cfg["pairs"])
    base_mixture = parse_map(cfg["map"]) if variant == "mixture" else None
    saw = make_sawtooth()
    summary_rows = []
    files = []
    for bits in cfg["b_list"]:
        cell = rs.child("quant:%s:%d" % (variant, bits))
        if variant == "mixture":
            spec = ProjectionSpec(cfg["family"], cfg["sigma"])
            base_map = base_mixture
            qmap = quantize_map(base_mixture, bits)
        else:
            spec = ProjectionSpec(
                cfg["family"], universal_scale(cfg["sigma"], cfg["delta"], bits)
            )
            base_map = saw
            qmap = quantize_map(saw, bits)
        op_u = build_operator(spec, base_map, cfg["M"], cfg["N"], cell)
        op_q = replace_map(op_u, qmap)
        X = _pair_block(cell, "signals", cfg["N"], dvals, spec.signal_metric)
        emb_u = _pair_metric(embed_batch(op_u, X), "sq_l2_mean")
        emb_q = _pair_metric(embed_batch(op_q, X), "sq_l2_mean")
        theory = DistanceMapModel(base_map, spec).curve(dvals)
        path = os.path.join(out_dir, "quant_scatter_B=%d.csv" % bits)
        emit_csv(path, ["d_true", "emb_sq_l2_mean", "g_theory_unquantized"],
                 list(zip(dvals, emb_q, theory)))
        files.append(path)
        mean_dev = float(np.mean(np.abs(emb_q - theory)))
        # quantized-embedding inflation check on the metric scale
        e_q = base_map.hbar * 2.0 ** (-bits - 1)
        eps_run = float(np.max(np.abs(np.sqrt(emb_u) - np.sqrt(theory))))
        dev_q = float(np.max(np.abs(np.sqrt(emb_q) - np.sqrt(theory))))
        bound_ok = dev_q <= eps_run + 2.0 * e_q + 1e-12
        summary_rows.append((bits, mean_dev, eps_run, e_q, dev_q, bound_ok))
    spath = os.path.join(out_dir, "quant_summary.csv")
    emit_csv(
        spath,
        ["B", "mean_abs_dev", "eps_unquantized", "E_Q", "max_sqrt_dev", "within_inflation"],
        summary_rows,
    )
    files.append(spath)
    return {"files": files, "summary": summary_rows}


def run_universal_scatter(cfg, out_dir):
    """Binary universal Hamming-vs-distance scatter over a Delta x M grid."""
    _require_kind(cfg, "universal_scatter")
    rs = RandomState(cfg.seed)
    dvals = np.linspace(cfg["d_min"], cfg["d_max"], cfg["pairs"])
    family = cfg["family"]
    sigma = cfg["sigma"]
    cells = [(delta, M) for delta in cfg["delta_list"] for M in cfg["m_list"]]

    def one_cell(cell_params):
        delta, M = cell_params
        cell = rs.child("scatter:%s:%d" % (_fmt(delta), M))
        op = build_universal_operator(family, sigma, delta, 1, M, cfg["N"], cell)
        X = _pair_block(cell, "signals", cfg["N"], dvals, op.spec.signal_metric)
        ham = _pair_metric(embed_batch(op, X), "hamming_mean")
        if family == "gaussian":
            theory = np.array([universal_binary_map(d, sigma, delta)[0] for d in dvals])
        else:
            theory = np.array([universal_binary_map_l1(d, sigma, delta) for d in dvals])
        resid = ham - theory
        lo_h, hi_h = np.percentile(resid, [2.5, 97.5])
        d0 = DistanceMapModel(make_square_wave(), op.spec).D0
        return ham, theory, (delta, M, float(hi_h - lo_h), float(d0))

    results = _map_cells(one_cell, cells)
    summary_rows = []
    files = []
    for (delta, M), (ham, theory, summary) in zip(cells, results):
        path = os.path.join(out_dir, "scatter_delta=%s_M=%d.csv" % (_fmt(delta), M))
        emit_csv(path, ["d_true", "hamming_mean", "g_theory"],
                 list(zip(dvals, ham, theory)))
        files.append(path)
        summary_rows.append(summary)
    spath = os.path.join(out_dir, "scatter_summary.csv")
    emit_csv(spath, ["delta", "M", "spread95", "d0_theory"], summary_rows)
    files.append(spath)
    return {"files": files, "summary": summary_rows}


@dataclass(frozen=True)
class RetrievalDataset:
    """Synthetic clustered point cloud with one held-out query per cluster.

    By construction every query's nearest database point belongs to its own
    cluster: the minimum inter-center distance exceeds margin_factor times
    the largest point offset.
    """

    centers: np.ndarray        # L x N cluster centers
    points_per_cluster: int
    cluster_radius: float
    db: np.ndarray             # L (per-1) x N database points
    db_labels: np.ndarray
    queries: np.ndarray        # L x N, query i belongs to cluster i
    query_labels: np.ndarray

    def __post_init__(self):
        L = self.centers.shape[0]
        if not (np.all(self.db_labels >= 0) and np.all(self.db_labels < L)):
            raise ValueError("database labels out of range")
        if self.queries.shape[0] != L:
            raise ValueError("exactly one query per cluster")


def _build_retrieval_dataset(cfg, rs):
    L = cfg["clusters"]
    per = cfg["points_per_cluster"]
    if per < 2:
        raise ConfigError("points_per_cluster must be at least 2")
    N = cfg["N"]
    centers = rs.gaussian("centers", L * N).reshape(L, N)
    centers *= cfg["center_scale"] / np.linalg.norm(centers, axis=1, keepdims=True)
    scale = cfg["cluster_radius"] / math.sqrt(N)
    offsets = scale * rs.gaussian("points", L * per * N).reshape(L, per, N)
    points = centers[:, None, :] + offsets

    inter = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=2)
    min_inter = float(np.min(inter[np.triu_indices(L, k=1)]))
    max_off = float(np.max(np.linalg.norm(offsets, axis=2)))
    if min_inter <= cfg["margin_factor"] * max_off:
        raise DatasetError(
            "clusters overlap beyond margin: min center distance %.4g <= "
            "%.3g * max offset %.4g; shrink cluster_radius or grow "
            "center_scale" % (min_inter, cfg["margin_factor"], max_off)
        )
    return RetrievalDataset(
        centers=centers,
        points_per_cluster=per,
        cluster_radius=cfg["cluster_radius"],
        db=points[:, 1:, :].reshape(L * (per - 1), N),
        db_labels=np.repeat(np.arange(L), per - 1),
        queries=points[:, 0, :],
        query_labels=np.arange(L),
    )


def _majority_vote(dist, db_labels, n_labels, J):
    """Label votes over the J nearest candidates; stable, deterministic."""
    order = np.argsort(dist, axis=1, kind="stable")[:, :J]
    votes = db_labels[order]
    out = np.empty(votes.shape[0], dtype=np.int64)
    for i in range(votes.shape[0]):
        out[i] = np.bincount(votes[i], minlength=n_labels).argmax()
    return out


def run_retrieval(cfg, out_dir):
    """Nearest-neighbor retrieval accuracy over a Delta x rate sweep."""
    _require_kind(cfg, "retrieval")
    rs = RandomState(cfg.seed)
    L = cfg["clusters"]
    reps = cfg["reps"]
    cells = [(delta, rate) for delta in cfg["delta_list"] for rate in cfg["rate_list"]]
    acc = np.zeros(len(cells))
    baseline = 0.0
    for rep in range(reps):
        rep_rs = rs.child("rep:%d" % rep)
        ds = _build_retrieval_dataset(cfg, rep_rs)
        J = min(cfg["candidates"], ds.db.shape[0])
        # infinite-rate proxy: plain l2 nearest neighbor on the signals
        d2 = np.linalg.norm(ds.queries[:, None, :] - ds.db[None, :, :], axis=2)
        base_votes = _majority_vote(d2, ds.db_labels, L, 1)
        baseline += float(np.mean(base_votes == ds.query_labels))

        def one_cell(cell_params):
            delta, rate = cell_params
            cell = rep_rs.child("cell:%s:%d" % (_fmt(delta), rate))
            op = build_universal_operator(
                cfg["family"], cfg["sigma"], delta, 1, rate, cfg["N"], cell
            )
            Ydb = np.stack([v.values for v in embed_batch(op, ds.db)])
            Yq = np.stack([v.values for v in embed_batch(op, ds.queries)])
            ham = np.mean(Yq[:, None, :] != Ydb[None, :, :], axis=2)
            votes = _majority_vote(ham, ds.db_labels, L, J)
            return float(np.mean(votes == ds.query_labels))

        acc += np.array(_map_cells(one_cell, cells))
    acc /= reps
    baseline /= reps
    rows = [(delta, rate, a) for (delta, rate), a in zip(cells, acc)]
    path = os.path.join(out_dir, "retrieval_accuracy.csv")
    emit_csv(path, ["delta", "rate", "accuracy"], rows)
    return {
        "files": [path],
        "summary": rows,
        "baseline_l2_accuracy": baseline,
        "chance": 1.0 / L,
    }


def run_bounds_sweep(cfg, out_dir):
    """Tabulate bound calculators over parameter grids, flagging vacuity."""
    _require_kind(cfg, "bounds_sweep")
    calc = cfg["calculator"]
    files = []
    if calc == "pointcloud":
        rows = []
        for M in cfg["m_list"]:
            for eps in cfg["eps_list"]:
                rep = pointcloud_bound(cfg["q"], M, eps, cfg["hbar"], cfg["flavor"])
                rows.append((cfg["flavor"], cfg["q"], M, eps,
                             rep.exponent, rep.probability, rep.vacuous))
        path = os.path.join(out_dir, "bounds_pointcloud.csv")
        emit_csv(path, ["flavor", "Q", "M", "eps", "exponent", "probability", "vacuous"], rows)
        files.append(path)
        summary = {"rows": rows}
    elif calc == "binary_infinite":
        rows = []
        for eps in cfg["eps_list"]:
            for M in cfg["m_list"]:
                w = 2.0 * eps * eps
                rep = discontinuous_extension_bound(
                    cfg["e_r_half"], M, w, cfg["c"], [1.0], 2, 0.0, cfg["c0"]
                )
                rows.append((eps, M, rep.extras["c1"], w,
                             rep.extras["no_decay"], rep.exponent, rep.probability))
        path = os.path.join(out_dir, "bounds_binary_infinite.csv")
        emit_csv(path, ["eps", "M", "c1", "w", "no_decay", "exponent", "probability"], rows)
        files.append(path)
        summary = {"rows": rows, "threshold": binary_decay_threshold(cfg["c0"])}
    elif calc == "ball_crossing":
        rows = []
        for N in cfg["n_list"]:
            for r in cfg["r_list"]:
                b = p2_bound(N, cfg["sigma"], r, cfg["delta"])
                meaningful = r < p2_meaningful_radius(N, cfg["sigma"], cfg["delta"])
                rows.append((N, r, b, meaningful))
        path = os.path.join(out_dir, "bounds_ball_crossing.csv")
        emit_csv(path, ["N", "r", "bound", "meaningful"], rows)
        files.append(path)
        summary = {"rows": rows}
    else:
        raise ConfigError("unknown calculator %r" % calc)
    summary["files"] = files
    return summary


def run_map_eval(cfg, out_dir):
    """Distance/kernel curves of one map, with bounds for binary universal."""
    _require_kind(cfg, "map_eval")
    map_ = parse_map(cfg["map"])
    is_binary_universal = map_.kind == "square" and cfg["scale"] == 0.0
    if cfg["scale"] > 0:
        scale = cfg["scale"]
    elif map_.kind == "square":
        scale = universal_scale(cfg["sigma"], cfg["delta"], 1)
    else:
        scale = cfg["sigma"]
    spec = ProjectionSpec(cfg["family"], scale)
    if cfg["log_grid"]:
        if cfg["d_min"] <= 0:
            raise ConfigError("log grid requires d_min > 0")
        ds = np.geomspace(cfg["d_min"], cfg["d_max"], cfg["d_count"])
    else:
        ds = np.linspace(cfg["d_min"], cfg["d_max"], cfg["d_count"])
    model = DistanceMapModel(map_, spec)
    header = ["d", "g", "g_sqrt", "K"]
    with_bounds = is_binary_universal and cfg["family"] == "gaussian"
    if with_bounds:
        header += ["lower5", "upper6", "upper7"]
    rows = []
    for d in ds:
        g = model.g(float(d))
        row = [float(d), g, math.sqrt(g), model.kernel(float(d))]
        if with_bounds:
            _, b = universal_binary_map(float(d), cfg["sigma"], cfg["delta"])
            row += [b.lower, b.upper_exp, b.upper_lin]
        rows.append(tuple(row))
    path = os.path.join(out_dir, "map_curve.csv")
    emit_csv(path, header, rows)
    return {"files": [path], "rows": len(rows)}


RUNNERS = {
    "design_sim": run_design_sim,
    "quantization_sim": run_quantization_sim,
    "universal_scatter": run_universal_scatter,
    "retrieval": run_retrieval,
    "bounds_sweep": run_bounds_sweep,
    "map_eval": run_map_eval,
}
