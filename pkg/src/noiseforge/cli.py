"""``noiseforge`` command line: ingestion, noise synthesis, detection, analytics.

Exit codes: 0 success, 2 input error, 3 external-service error,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import analytics, classifier, corruption, detection, llm, matio, noise, plotting
from .errors import DatasetError, LLMAuthError, LLMServiceError, NumericError
from .graph import DatasetManifest, Graph, LabelSet, load_dataset, node_homophily, split_nodes
from .ppr import PPRConfig

NOISE_TYPES = ("uniform", "pairwise", "topology", "feature", "confidence",
               "llm-refined-from-files")


def _config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]


def _write_report(out: Path, name: str, cfg: dict, extra: dict):
    report = {
        "config": cfg,
        "config_hash": _config_hash(cfg),
        "timestamp": time.time(),
        **extra,
    }
    (out / name).write_text(json.dumps(report, indent=2, default=str) + "\n")
    return report


def _load_graph(manifest_path: str) -> Graph:
    return load_dataset(DatasetManifest.from_json(manifest_path))


def cmd_stats(args) -> int:
    g = _load_graph(args.manifest)
    stats = {
        "name": g.name,
        "num_nodes": g.num_nodes,
        "num_edges": g.num_edges,
        "num_classes": g.num_classes,
        "avg_degree": round(float(g.degrees().mean()), 3),
        "node_homophily": round(node_homophily(g), 4),
    }
    width = max(len(k) for k in stats)
    for k, v in stats.items():
        print(f"{k:<{width}}  {v}")
    print(json.dumps(stats))
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "stats.json").write_text(json.dumps(stats, indent=2) + "\n")
    return 0


def _build_transition(args, g: Graph, labels: LabelSet):
    kind = args.noise
    if kind == "uniform":
        return noise.build_uniform(labels, g.num_classes)
    if kind == "pairwise":
        if args.rate > 0.5:
            print("warning: pairwise noise is practical only when the noise rate "
                  "does not exceed 0.5", file=sys.stderr)
        return noise.build_pairwise(labels, g.num_classes)
    if kind == "topology":
        return noise.build_topology(g, labels, PPRConfig(alpha=args.alpha))
    if kind == "feature":
        return noise.build_feature(g, labels)
    if kind == "confidence":
        if args.predictions:
            pred = noise.PredictionMatrix(matio.load_matrix(args.predictions),
                                          source="external-file")
        else:
            cfg = classifier.ClassifierConfig(seed=args.seed, max_epochs=args.epochs)
            pred = classifier.confidence_protocol(g, labels, runs=args.runs, config=cfg)
        return noise.build_confidence(pred, g.num_nodes)
    raise DatasetError(f"unknown noise type: {kind}")


def _write_realization(path: Path, clean: LabelSet, result):
    with open(path, "w") as f:
        f.write("node_id,clean_label,noisy_label,corrupted\n")
        for i, (yc, yn, m) in enumerate(zip(clean.values, result.noisy.values, result.mask)):
            f.write(f"{i + 1},{yc + 1},{yn + 1},{int(m)}\n")


def cmd_corrupt(args) -> int:
    g = _load_graph(args.manifest)
    clean = LabelSet(g.labels, "clean")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = {
        "manifest": str(args.manifest), "noise": args.noise, "rate": args.rate,
        "realizations": args.realizations, "seed": args.seed, "alpha": args.alpha,
    }
    warnings: list[str] = []

    if args.noise == "llm-refined-from-files":
        naive = matio.read_labels_csv(args.naive_labels)
        reasoned = matio.read_labels_csv(args.reasoned_labels)
        refined = llm.refine(naive, reasoned, clean)
        mask = refined.values != clean.values
        result = corruption.CorruptionResult(refined, mask, float(mask.mean()), args.seed)
        results, counts = [result], mask.astype(np.int64)
        tm = noise.class_transition_matrix(clean, refined, g.num_classes)
        pooled_counts = tm.counts
        realizations = 1
    else:
        t_d = _build_transition(args, g, clean)
        spec = corruption.NoiseSpec(args.noise, args.rate, args.seed, args.realizations)
        results, freq = corruption.corrupt_many(t_d, spec, clean)
        counts = freq.counts
        realizations = spec.realizations
        pooled_counts = np.zeros((g.num_classes, g.num_classes), dtype=np.int64)
        for res in results:
            pooled_counts += noise.class_transition_matrix(clean, res.noisy, g.num_classes).counts
            warnings.extend(res.warnings)

    for r, res in enumerate(results):
        _write_realization(out / f"realization_{r:03d}.csv", clean, res)
    with open(out / "frequency.csv", "w") as f:
        f.write("node_id,count\n")
        for i, c in enumerate(counts):
            f.write(f"{i + 1},{int(c)}\n")
    totals = np.maximum(pooled_counts.sum(axis=1, keepdims=True), 1)
    tm_probs = pooled_counts / totals
    matio.write_matrix_csv(out / "transition_matrix.csv", tm_probs)
    _write_report(out, "report.json", cfg, {
        "achieved_rate": results[0].achieved_rate,
        "seed_chain": [res.seed for res in results],
        "warnings": warnings[:50],
    })
    if args.plot:
        plotting.plot_corruption_frequency(counts, realizations, out / "frequency.svg")
        plotting.plot_transition_matrix(tm_probs, out / "transition_matrix.svg",
                                        g.class_names)
    print(f"wrote {len(results)} realization(s) to {out}")
    return 0


def cmd_classify(args) -> int:
    g = _load_graph(args.manifest)
    labels = matio.read_labels_csv(args.labels) if args.labels else LabelSet(g.labels, "clean")
    cfg = classifier.ClassifierConfig(seed=args.seed, max_epochs=args.epochs,
                                      propagation_depth=args.k)
    x = classifier.propagate(g, args.k)
    split = split_nodes(g, tuple(args.ratios), args.seed)
    result = classifier.train(x, labels, split, cfg, num_classes=g.num_classes)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pred = classifier.predict_proba(result.params, x)
    matio.write_matrix_csv(out / "predictions.csv", pred.matrix)
    matio.write_trajectory_csv(out / "trajectory.csv", result.trajectory.losses)
    _write_report(out, "report.json", vars(args) | {"func": None}, {
        "epochs_run": result.trajectory.num_epochs,
        "best_epoch": result.best_epoch,
        "best_val_accuracy": max(result.val_accuracy),
    })
    print(f"trained for {result.trajectory.num_epochs} epochs; outputs in {out}")
    return 0


def cmd_detect(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    truth_mask = None
    if args.clean_labels and args.noisy_labels:
        clean = matio.read_labels_csv(args.clean_labels)
        noisy = matio.read_labels_csv(args.noisy_labels)
        truth_mask = clean.values != noisy.values

    if args.trajectory:
        losses = matio.read_trajectory_csv(args.trajectory)
    elif args.classifier and args.manifest and args.noisy_labels:
        g = _load_graph(args.manifest)
        noisy = matio.read_labels_csv(args.noisy_labels)
        cfg = classifier.ClassifierConfig(seed=args.seed, max_epochs=args.epochs)
        x = classifier.propagate(g, cfg.propagation_depth)
        split = split_nodes(g, (0.8, 0.1, 0.1), args.seed)
        result = classifier.train(x, noisy, split, cfg, num_classes=g.num_classes)
        losses = result.trajectory.losses
        matio.write_trajectory_csv(out / "trajectory.csv", losses)
    else:
        raise DatasetError("detect needs --trajectory or (--classifier with "
                           "--manifest and --noisy-labels)")
    traj = classifier.LossTrajectory(losses)

    report: dict = {}
    scores, gmm = detection.detect_average(traj)
    with open(out / "scores.csv", "w") as f:
        f.write("node_id,score\n")
        for i, s in enumerate(scores.scores):
            f.write(f"{i + 1},{s:.17g}\n")
    report["average"] = {
        "gmm_means": gmm.means.tolist(),
        "gmm_weights": gmm.weights.tolist(),
    }
    if truth_mask is not None:
        report["average"]["auc"] = detection.roc_auc(scores.scores, truth_mask)
        if args.protocol in ("maximum", "both"):
            best_epoch, best_auc, series = detection.detect_maximum(traj, truth_mask)
            report["maximum"] = {"best_epoch": best_epoch, "best_auc": best_auc,
                                 "series": series}
            if args.plot:
                plotting.plot_auc_series(series, out / "auc_series.svg", best_epoch)
        if args.supervised and args.manifest:
            g = _load_graph(args.manifest)
            clean = matio.read_labels_csv(args.clean_labels)
            noisy = matio.read_labels_csv(args.noisy_labels)
            cfg = classifier.ClassifierConfig(seed=args.seed, max_epochs=args.epochs)
            _, auc, _ = classifier.supervised_detector(g, clean, noisy, cfg)
            report["supervised_detector"] = {"test_auc": auc}
    _write_report(out, "report.json", {k: str(v) for k, v in vars(args).items()
                                       if k != "func"}, report)
    print(json.dumps(report, indent=2, default=str))
    return 0


def cmd_llm(args) -> int:
    g = _load_graph(args.manifest)
    truth = LabelSet(g.labels, "clean")
    cfg = llm.LLMConfig(base_url=args.llm_endpoint, model=args.llm_model,
                        cache_dir=args.cache_dir, max_retries=args.retries)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    naive_recs = llm.annotate(g, cfg, "naive")
    reasoned_recs = llm.annotate(g, cfg, "reasoned")
    naive = llm.records_to_labelset(naive_recs, truth, "llm-naive")
    reasoned = llm.records_to_labelset(reasoned_recs, truth, "llm-reasoned")
    refined = llm.refine(naive, reasoned, truth)
    for name, ls in (("naive", naive), ("reasoned", reasoned), ("refined", refined)):
        matio.write_labels_csv(out / f"labels_{name}.csv", ls)
    rates = llm.noise_rate_report(
        {"llm-naive": naive, "llm-reasoned": reasoned, "llm-refined": refined}, truth)
    unparsed = sum(1 for r in naive_recs + reasoned_recs if r.parse_status == "unparsed")
    _write_report(out, "rates.json",
                  {"manifest": str(args.manifest), "model": args.llm_model},
                  {"noise_rates": rates, "unparsed_annotations": unparsed})
    print(json.dumps(rates, indent=2))
    return 0


def cmd_analyze(args) -> int:
    g = _load_graph(args.manifest)
    clean = LabelSet(g.labels, "clean")
    noisy = matio.read_labels_csv(args.noisy_labels)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report: dict = {"node_homophily": node_homophily(g)}
    tm = noise.class_transition_matrix(clean, noisy, g.num_classes)
    matio.write_matrix_csv(out / "transition_matrix.csv", tm.matrix)
    ent = analytics.offdiag_entropy(tm)
    report["offdiag_entropy"] = {"mean": ent.aggregate,
                                 "excluded_rows": list(ent.excluded)}
    ks = args.hops
    consistency = analytics.consistency_scores(g, clean, ks)
    clean_mask = clean.values == noisy.values
    if clean_mask.any() and not clean_mask.all():
        gaps = analytics.consistency_gap(consistency, clean_mask)
        report["consistency_gap"] = {str(k): v for k, v in gaps.items()}
        if args.plot:
            plotting.plot_consistency_gaps(gaps, out / "consistency_gap.svg")
        if g.node_features is not None:
            _, _, summary = analytics.feature_similarity_split(g, clean, clean_mask)
            with open(out / "similarity_hist.csv", "w") as f:
                f.write("bin_left,bin_right,clean_count,corrupted_count\n")
                e = summary["bin_edges"]
                for i in range(len(e) - 1):
                    f.write(f"{e[i]:.6g},{e[i + 1]:.6g},"
                            f"{summary['clean_hist'][i]},{summary['corrupted_hist'][i]}\n")
            report["feature_similarity"] = {
                "clean_mean": summary["clean_mean"],
                "corrupted_mean": summary["corrupted_mean"],
            }
            if args.plot:
                plotting.plot_similarity_histograms(summary, out / "similarity.svg")
    if args.predictions:
        pred = noise.PredictionMatrix(matio.load_matrix(args.predictions),
                                      source="external-file")
        ent_report = analytics.prediction_entropy(pred)
        report["prediction_entropy_mean"] = ent_report.aggregate
        with open(out / "prediction_entropy.csv", "w") as f:
            f.write("node_id,entropy\n")
            for i, h in enumerate(ent_report.per_unit):
                f.write(f"{i + 1},{h:.17g}\n")
    if args.plot:
        plotting.plot_transition_matrix(tm.matrix, out / "transition_matrix.svg",
                                        g.class_names)
    _write_report(out, "report.json", {"manifest": str(args.manifest),
                                       "noisy_labels": str(args.noisy_labels)}, report)
    print(json.dumps(report, indent=2, default=str))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="noiseforge",
                                description="Graph label-noise synthesis and detection")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("stats", help="dataset statistics")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("corrupt", help="synthesize noisy label realizations")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--noise", required=True, choices=NOISE_TYPES)
    sp.add_argument("--rate", type=float, default=0.3)
    sp.add_argument("--realizations", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--alpha", type=float, default=0.9)
    sp.add_argument("--out", required=True)
    sp.add_argument("--predictions", help="prediction matrix for confidence noise")
    sp.add_argument("--naive-labels", help="for llm-refined-from-files")
    sp.add_argument("--reasoned-labels", help="for llm-refined-from-files")
    sp.add_argument("--runs", type=int, default=10)
    sp.add_argument("--epochs", type=int, default=200)
    sp.add_argument("--plot", action="store_true")
    sp.set_defaults(func=cmd_corrupt)

    sp = sub.add_parser("classify", help="train the built-in classifier")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--labels", help="labels CSV to train on (default: clean labels)")
    sp.add_argument("--ratios", type=float, nargs=3, default=[0.8, 0.1, 0.1])
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--epochs", type=int, default=200)
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("detect", help="loss-trajectory noisy-label detection")
    sp.add_argument("--manifest")
    sp.add_argument("--trajectory", help="loss trajectory CSV")
    sp.add_argument("--classifier", action="store_true",
                    help="train the built-in classifier to produce trajectories")
    sp.add_argument("--noisy-labels")
    sp.add_argument("--clean-labels")
    sp.add_argument("--protocol", choices=("average", "maximum", "both"), default="both")
    sp.add_argument("--supervised", action="store_true")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--epochs", type=int, default=200)
    sp.add_argument("--out", required=True)
    sp.add_argument("--plot", action="store_true")
    sp.set_defaults(func=cmd_detect)

    sp = sub.add_parser("llm", help="LLM annotation pipeline (naive/reasoned/refined)")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--llm-endpoint", default="https://api.openai.com/v1")
    sp.add_argument("--llm-model", default="gpt-4o-mini")
    sp.add_argument("--cache-dir")
    sp.add_argument("--retries", type=int, default=3)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_llm)

    sp = sub.add_parser("analyze", help="noise diagnostics and figures")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--noisy-labels", required=True)
    sp.add_argument("--predictions")
    sp.add_argument("--hops", type=int, nargs="+", default=[1, 2])
    sp.add_argument("--out", required=True)
    sp.add_argument("--plot", action="store_true")
    sp.set_defaults(func=cmd_analyze)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DatasetError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except LLMAuthError as e:
        print(f"authentication error: {e}", file=sys.stderr)
        return 3
    except LLMServiceError as e:
        print(f"LLM service error: {e}", file=sys.stderr)
        return 3
    except NumericError as e:
        print(f"numeric error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
