"""Command-line surface: generate | corrupt | analyze | compare | report.

Every command is deterministic given its seed; rerunning an invocation
produces byte-identical outputs.  Exit codes: 0 success, 2 configuration
error, 3 I/O error, 4 analysis failure.
"""

import argparse
import os
import shutil
import sys

import numpy as np

from scmkit import scm_alphabet, scm_flag, scm_voronoi
from scmkit.config import AnalysisConfig, ConfigError
from scmkit.core import (
    ContextReport,
    EnsembleError,
    EnsembleManifest,
    Record,
    load_ensemble,
    load_image,
    load_image_dir,
    parallel_map,
    read_json,
    save_image,
    split_rng,
    write_json,
)
from scmkit.ensemble_eval import TissueConfig, compare_ensembles
from scmkit.imgproc import ImageError, skeleton_statistics
from scmkit.scm_voronoi import GenerationError
from scmkit.stats import StatsError
from scmkit import svg

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_ANALYSIS = 4

GENERATE_MODELS = ("alphabet", "voronoi", "flag")
ERROR_SPECS = {
    "pair-break": "alphabet",
    "region-count": "voronoi",
    "tile-move": "flag",
    "forbidden-tile": "flag",
}
# ensemble-level draws (class mix, corruption pick) use a stream id far
# outside the per-image range so they can never collide with image streams
ENSEMBLE_STREAM = 2**63


def parse_class_mix(text, model):
    """'uniform' or 'label:weight,label:weight,...' over the model's classes."""
    if model == "alphabet":
        if text not in (None, "uniform"):
            raise ConfigError("alphabet is single-class; --class-mix does not apply")
        return None, None
    classes = list(scm_voronoi.CLASSES) if model == "voronoi" else list(range(scm_flag.N_CLASSES))
    if text in (None, "uniform"):
        weights = [1.0] * len(classes)
        return classes, np.array(weights) / sum(weights)
    mix = {}
    try:
        for part in text.split(","):
            label, weight = part.split(":")
            mix[int(label)] = float(weight)
    except ValueError as exc:
        raise ConfigError(f"malformed --class-mix {text!r}") from exc
    bad = set(mix) - set(classes)
    if bad:
        raise ConfigError(f"classes {sorted(bad)} not valid for model {model}")
    if any(w < 0 for w in mix.values()) or sum(mix.values()) <= 0:
        raise ConfigError("class-mix weights must be nonnegative with a positive sum")
    weights = np.array([mix.get(c, 0.0) for c in classes], dtype=float)
    keep = weights > 0
    classes = [c for c, k in zip(classes, keep) if k]
    weights = weights[keep]
    return classes, weights / weights.sum()


def _truth_for(model, truth_obj, class_label):
    if model == "voronoi":
        return {
            "n_regions": truth_obj.class_label,
            "areas": truth_obj.areas.tolist(),
            "intensities": truth_obj.intensities.tolist(),
        }
    return {}


def _generate_one(args):
    model, seed, index, class_label = args
    rng = split_rng(seed, index)
    if model == "alphabet":
        image, _ = scm_alphabet.generate_alphabet(rng)
        truth = {}
    elif model == "voronoi":
        image, t = scm_voronoi.generate_voronoi(rng, class_label)
        truth = _truth_for(model, t, class_label)
    else:
        image, _ = scm_flag.generate_flag(rng, class_label)
        truth = {}
    return index, image, truth


def cmd_generate(model, count, seed, class_mix, out_dir, jobs=1):
    """Produce `count` realizations plus a manifest under out_dir."""
    if model not in GENERATE_MODELS:
        raise ConfigError(f"--model must be one of {GENERATE_MODELS}")
    if count < 0:
        raise ConfigError("--count must be >= 0")
    classes, probs = parse_class_mix(class_mix, model)
    if classes is None:
        labels = [None] * count
    else:
        ens_gen = split_rng(seed, ENSEMBLE_STREAM).gen
        labels = [int(c) for c in ens_gen.choice(classes, size=count, p=probs)] if count else []
    tasks = [(model, seed, i, labels[i]) for i in range(count)]
    os.makedirs(out_dir, exist_ok=True)
    records = []
    for index, image, truth in parallel_map(_generate_one, tasks, jobs):
        name = f"img_{index:06d}.png"
        save_image(image, os.path.join(out_dir, name))
        records.append(Record(name, index, labels[index], truth))
    manifest = EnsembleManifest(model, seed, records)
    manifest.validate()
    write_json(manifest.to_dict(), os.path.join(out_dir, "manifest.json"))
    write_json(
        {"command": "generate", "model": model, "count": count, "seed": seed,
         "class_mix": class_mix or "uniform"},
        os.path.join(out_dir, "run_config.json"),
    )
    return manifest


def _corrupt_one(args):
    error_spec, record_seed, class_label, source_seed, corrupt_seed = args
    crng = split_rng(corrupt_seed, record_seed)
    if error_spec == "pair-break":
        grid_rng = split_rng(source_seed, record_seed)
        grid = scm_alphabet.random_grid(grid_rng)
        broken = scm_alphabet.corrupt_pair_break(crng, grid)
        return record_seed, scm_alphabet.render_grid(broken)
    if error_spec == "region-count":
        image, _ = scm_voronoi.generate_with_region_count(crng, int(class_label) + 8)
        return record_seed, image
    mask = scm_flag.default_patterns().masks[int(class_label)]
    if error_spec == "tile-move":
        corrupted = scm_flag.corrupt_tile_move(crng, mask)
    else:
        corrupted = scm_flag.corrupt_forbidden_tile(crng, mask)
    return record_seed, scm_flag.render_flag(crng, corrupted)


def cmd_corrupt(in_dir, error_spec, rate, seed, out_dir, jobs=1):
    """Re-render an exact fraction of a generated ensemble with one injected error."""
    if error_spec not in ERROR_SPECS:
        raise ConfigError(f"--error-spec must be one of {sorted(ERROR_SPECS)}")
    if not 0.0 <= rate <= 1.0:
        raise ConfigError("--rate must be in [0, 1]")
    manifest, _ = load_ensemble(in_dir)
    model = ERROR_SPECS[error_spec]
    if manifest.model_id != model:
        raise ConfigError(
            f"error-spec {error_spec!r} needs a {model} ensemble, got {manifest.model_id}"
        )
    n = manifest.image_count
    n_corrupt = int(round(rate * n))
    pick_gen = split_rng(seed, ENSEMBLE_STREAM).gen
    corrupted_idx = set(int(i) for i in pick_gen.permutation(n)[:n_corrupt])
    os.makedirs(out_dir, exist_ok=True)
    tasks = [
        (error_spec, manifest.records[i].seed, manifest.records[i].class_label,
         manifest.global_seed, seed)
        for i in sorted(corrupted_idx)
    ]
    rendered = dict(parallel_map(_corrupt_one, tasks, jobs))
    records = []
    for i, record in enumerate(manifest.records):
        truth = dict(record.truth)
        truth["corrupted"] = 1 if i in corrupted_idx else 0
        if i in corrupted_idx:
            save_image(rendered[record.seed], os.path.join(out_dir, record.file))
        else:
            shutil.copyfile(os.path.join(in_dir, record.file), os.path.join(out_dir, record.file))
        records.append(Record(record.file, record.seed, record.class_label, truth))
    out_manifest = EnsembleManifest(model, seed, records)
    write_json(out_manifest.to_dict(), os.path.join(out_dir, "manifest.json"))
    write_json(
        {"command": "corrupt", "in_dir": os.path.abspath(in_dir), "error_spec": error_spec,
         "rate": rate, "seed": seed, "n_corrupted": n_corrupt},
        os.path.join(out_dir, "run_config.json"),
    )
    return out_manifest


def _alphabet_checks(image, cfg):
    labels, _ = scm_alphabet.classify_tiles(image, threshold=cfg.template_threshold)
    n_unrec = int(np.count_nonzero(labels == scm_alphabet.UNRECOGNIZED))
    checks = {
        "recognized": {"statistic": 1.0 - n_unrec / labels.size, "pass": n_unrec == 0}
    }
    if n_unrec:
        # unrecognizable realizations are counted but excluded from prevalence checks
        return checks, {}
    gof, exact = scm_alphabet.check_letter_prevalence(labels, cfg.gof_alpha)
    checks["letter_chi2"] = {"statistic": gof.statistic, "pass": gof.passed}
    checks["letter_exact"] = {"statistic": 1.0 if exact else 0.0, "pass": exact}
    pairs = scm_alphabet.check_pair_prevalence(labels)
    for name in scm_alphabet.PAIR_NAMES:
        checks[f"pair_{name}"] = {
            "statistic": float(pairs.counts[name]),
            "pass": pairs.counts[name] == scm_alphabet.PAIR_COUNTS[name],
        }
    checks["pair_violations"] = {"statistic": float(len(pairs.violations)), "pass": not pairs.violations}
    return checks, {}


def _voronoi_checks(image, cfg):
    ext = scm_voronoi.extract_regions(
        image, window=cfg.sauvola_window, k=cfg.sauvola_k, r=cfg.sauvola_r,
        min_region_area=cfg.min_region_area,
    )
    cls = scm_voronoi.classify_region_count(ext.n_regions, cfg.region_tolerance)
    rho = scm_voronoi.check_rank_correlation(ext) if ext.n_regions >= 2 else float("nan")
    checks = {
        "region_count": {"statistic": float(ext.n_regions), "pass": cls is not None},
        "rank_rho": {"statistic": rho, "pass": bool(rho >= cfg.rank_rho_threshold)},
    }
    skel = skeleton_statistics(ext.edge_skeleton)
    stats = {
        "class": cls if cls is not None else "off",
        "n_regions": float(ext.n_regions),
        "n_junctions": skel["n_junctions"],
        "junction_density": skel["junction_density"],
        "edge_length_mean": skel["branch_length_mean"],
        "edge_length_std": skel["branch_length_std"],
        "region_area_mean": float(ext.areas.mean()),
        "region_area_std": float(ext.areas.std()),
    }
    return checks, stats


def _flag_checks(image, cfg):
    fmap = scm_flag.infer_foreground(image, cfg.fg_boundary)
    match = scm_flag.classify_pattern(fmap)
    tex = scm_flag.check_tile_texture(image, cfg.moran_alpha, cfg.tile_pass_fraction)
    fg_gof, bg_gof = scm_flag.check_intensity_gof(image, fmap, cfg.intensity_bins, cfg.gof_alpha)
    checks = {
        "pattern_rmae": {"statistic": match.rmae, "pass": match.rmae <= cfg.rmae_threshold},
        "forbidden_fg": {"statistic": float(len(match.forbidden_violations)),
                         "pass": not match.forbidden_violations},
        "texture_moran": {"statistic": tex.pass_fraction, "pass": tex.image_pass},
        "fg_intensity_chi2": {"statistic": fg_gof.statistic, "pass": fg_gof.passed},
        "bg_intensity_chi2": {"statistic": bg_gof.statistic, "pass": bg_gof.passed},
    }
    return checks, {"class": match.class_label}


_CHECKERS = {"alphabet": _alphabet_checks, "voronoi": _voronoi_checks, "flag": _flag_checks}


def _analyze_worker(args):
    path, name, model, cfg = args
    image = load_image(path)
    checks, stats = _CHECKERS[model](image, cfg)
    return {"file": name, "checks": checks, "stats": stats}


def _aggregate(model, per_image, cfg):
    agg = {"n_images": float(len(per_image))}
    names = set()
    for entry in per_image:
        names.update(entry["checks"])
    for name in sorted(names):
        flags = [e["checks"][name]["pass"] for e in per_image if name in e["checks"]]
        agg[f"{name}_pass_rate"] = float(np.mean(flags)) if flags else 0.0
    if model == "alphabet":
        agg["n_unrecognized_images"] = float(
            sum(1 for e in per_image if not e["checks"]["recognized"]["pass"])
        )
        for name in scm_alphabet.PAIR_NAMES:
            values = [e["checks"][f"pair_{name}"]["statistic"] for e in per_image
                      if f"pair_{name}" in e["checks"]]
            for v, c in zip(*np.unique(np.array(values, dtype=int), return_counts=True)) if values else []:
                agg[f"hist_pair_{name}/{int(v)}"] = float(c)
    elif model == "voronoi":
        counts = [int(e["checks"]["region_count"]["statistic"]) for e in per_image]
        for v, c in zip(*np.unique(counts, return_counts=True)) if counts else []:
            agg[f"hist_region_count/{int(v)}"] = float(c)
        classes = [str(e["stats"]["class"]) for e in per_image]
        for v in sorted(set(classes)):
            agg[f"hist_region_class/{v}"] = float(classes.count(v))
        for stat in scm_voronoi.IMPLICIT_STAT_NAMES:
            agg[f"mean_{stat}"] = float(np.mean([e["stats"][stat] for e in per_image])) if per_image else 0.0
    elif model == "flag":
        classes = [str(e["stats"]["class"]) for e in per_image]
        for v in sorted(set(classes)):
            agg[f"hist_class/{v}"] = float(classes.count(v))
    return agg


def cmd_analyze(model, in_dir, report_path, config_path=None, jobs=1):
    """Run the model's full per-image audit chain and write a context report."""
    if model not in GENERATE_MODELS:
        raise ConfigError(f"--model must be one of {GENERATE_MODELS}")
    cfg = AnalysisConfig.load(config_path)
    manifest, _ = load_ensemble(in_dir)
    if manifest.model_id != model:
        raise ConfigError(f"ensemble was generated by {manifest.model_id!r}, not {model!r}")
    tasks = [(os.path.join(in_dir, r.file), r.file, model, cfg) for r in manifest.records]
    per_image = parallel_map(_analyze_worker, tasks, jobs)
    aggregates = _aggregate(model, per_image, cfg)
    report = ContextReport(
        model, per_image, aggregates,
        config={"command": "analyze", "model": model, "in_dir": os.path.abspath(in_dir),
                "analysis": cfg.to_dict()},
    )
    report.validate()
    write_json(report.to_dict(), report_path)
    return report


def cmd_compare(train_dir, gen_dir, report_path, config_path=None, seed=0, jobs=1):
    """Compare two image ensembles and write a comparison report."""
    cfg = AnalysisConfig.load(config_path)
    tissue = TissueConfig(intervals={k: tuple(v) for k, v in cfg.tissues.items()}).validate()
    _, train_labels, train_images = load_image_dir(train_dir)
    _, _, gen_images = load_image_dir(gen_dir)
    body = compare_ensembles(
        train_images, gen_images, config=tissue, pairs=cfg.similarity_pairs,
        k=cfg.pca_components, k_neighbors=cfg.knn_k, rng=split_rng(seed, 0),
        train_labels=train_labels, jobs=jobs,
    )
    cap = 2000  # keep reports bounded for plotting
    report = {
        "schema_version": 1,
        "kind": "comparison",
        "config": {"command": "compare", "train_dir": os.path.abspath(train_dir),
                   "gen_dir": os.path.abspath(gen_dir), "seed": seed, "analysis": cfg.to_dict()},
        "n_train": body["n_train"],
        "n_gen": body["n_gen"],
        "n_train_excluded": body["n_train_excluded"],
        "n_gen_excluded": body["n_gen_excluded"],
        "family_ks": body["family_ks"],
        "overall_ks": body["overall_ks"],
        "train_projected": np.asarray(body["train_projected"])[:cap].tolist(),
        "gen_projected": np.asarray(body["gen_projected"])[:cap].tolist(),
    }
    if "class_metrics" in body:
        report["class_metrics"] = body["class_metrics"]
    write_json(report, report_path)
    return report


def _report_context_plots(report, out_dir):
    model = report["model_id"]
    agg = report["aggregates"]
    plots = {}
    if not report["per_image"]:
        plots["placeholder.svg"] = svg.placeholder(f"{model}: empty report")
    elif model == "alphabet":
        labels, values, highlight = [], [], set()
        for name in scm_alphabet.PAIR_NAMES:
            prefix = f"hist_pair_{name}/"
            keys = sorted((k for k in agg if k.startswith(prefix)), key=lambda k: int(k.split("/")[1]))
            for key in keys:
                count = int(key.split("/")[1])
                label = f"{name}:{count}"
                labels.append(label)
                values.append(agg[key])
                if count == scm_alphabet.PAIR_COUNTS[name]:
                    highlight.add(label)
        plots["pair_prevalence.svg"] = svg.bar_chart(
            labels, values, "per-image letter-pair prevalence", highlight)
    elif model == "voronoi":
        keys = sorted((k for k in agg if k.startswith("hist_region_count/")),
                      key=lambda k: int(k.split("/")[1]))
        labels = [k.split("/")[1] for k in keys]
        values = [agg[k] for k in keys]
        plots["region_count_histogram.svg"] = svg.bar_chart(
            labels, values, "recovered region counts (class = 16/32/48/64)",
            highlight={str(c) for c in scm_voronoi.CLASSES})
    elif model == "flag":
        keys = sorted(k for k in agg if k.startswith("hist_class/"))
        labels = [k.split("/")[1] for k in keys]
        values = [agg[k] for k in keys]
        plots["class_prevalence.svg"] = svg.bar_chart(labels, values, "inferred class prevalence")
    return plots


def _report_comparison_plots(report):
    plots = {}
    families = list(report["family_ks"].items()) + [("overall", report["overall_ks"])]
    plots["family_ks.svg"] = svg.bar_chart(
        [name for name, _ in families], [v for _, v in families],
        "KS statistic per feature family")
    train = np.asarray(report["train_projected"])
    gen = np.asarray(report["gen_projected"])
    if train.size and gen.size:
        plots["pc_scatter.svg"] = svg.scatter(
            {"train": (train[:, 0], train[:, 1]), "generated": (gen[:, 0], gen[:, 1])},
            "top principal components")
    else:
        plots["pc_scatter.svg"] = svg.placeholder("top principal components")
    return plots


def cmd_report(report_path, out_dir):
    """Render deterministic SVG plots for a context or comparison report."""
    data = read_json(report_path)
    if not isinstance(data, dict) or "kind" not in data:
        raise EnsembleError(f"malformed report: {report_path}")
    os.makedirs(out_dir, exist_ok=True)
    if data["kind"] == "comparison":
        plots = _report_comparison_plots(data)
    else:
        report = ContextReport.from_dict(data)
        plots = _report_context_plots(report.to_dict(), out_dir)
    for name, content in plots.items():
        with open(os.path.join(out_dir, name), "w", encoding="utf-8") as fh:
            fh.write(content)
    return sorted(plots)


def build_parser():
    parser = argparse.ArgumentParser(prog="scmkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate an SCM ensemble")
    p.add_argument("--model", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--class-mix", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("corrupt", help="inject context errors into an ensemble")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--error-spec", required=True)
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("analyze", help="audit an ensemble against its model's constraints")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--config", default=None)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("compare", help="compare two ensembles feature-wise")
    p.add_argument("--train", required=True)
    p.add_argument("--gen", required=True)
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("report", help="render plots from a report")
    p.add_argument("--in", dest="in_dir", required=True, help="report JSON path")
    p.add_argument("--out", required=True, help="plot directory")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "generate":
            cmd_generate(args.model, args.count, args.seed, args.class_mix, args.out, args.jobs)
        elif args.command == "corrupt":
            cmd_corrupt(args.in_dir, args.error_spec, args.rate, args.seed, args.out, args.jobs)
        elif args.command == "analyze":
            cmd_analyze(args.model, args.in_dir, args.out, args.config, args.jobs)
        elif args.command == "compare":
            cmd_compare(args.train, args.gen, args.out, args.config, args.seed, args.jobs)
        elif args.command == "report":
            cmd_report(args.in_dir, args.out)
    except (ConfigError, scm_flag.PatternError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EnsembleError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (StatsError, ImageError, GenerationError, ValueError) as exc:
        print(f"analysis error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
