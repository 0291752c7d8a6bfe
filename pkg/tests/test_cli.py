import filecmp
import json
import os

import numpy as np
import pytest

from scmkit.cli import (
    EXIT_ANALYSIS,
    EXIT_CONFIG,
    EXIT_IO,
    EXIT_OK,
    cmd_analyze,
    cmd_compare,
    cmd_corrupt,
    cmd_generate,
    cmd_report,
    main,
    parse_class_mix,
)
from scmkit.config import AnalysisConfig, ConfigError
from scmkit.core import load_ensemble, read_json, save_image, write_json
from synth import synth_tissue_ensemble


def _dir_digest(path):
    out = {}
    for name in sorted(os.listdir(path)):
        with open(os.path.join(path, name), "rb") as fh:
            out[name] = fh.read()
    return out


class TestClassMix:
    def test_uniform_default(self):
        classes, probs = parse_class_mix(None, "voronoi")
        assert classes == [16, 32, 48, 64]
        assert np.allclose(probs, 0.25)

    def test_explicit_weights(self):
        classes, probs = parse_class_mix("16:1,64:3", "voronoi")
        assert classes == [16, 64]
        assert np.allclose(probs, [0.25, 0.75])

    def test_alphabet_rejects_mix(self):
        with pytest.raises(ConfigError):
            parse_class_mix("16:1", "alphabet")

    def test_invalid_class(self):
        with pytest.raises(ConfigError):
            parse_class_mix("99:1", "voronoi")

    def test_malformed(self):
        with pytest.raises(ConfigError):
            parse_class_mix("16=1", "voronoi")


class TestGenerate:
    def test_alphabet_manifest(self, tmp_path):
        out = tmp_path / "ens"
        manifest = cmd_generate("alphabet", 5, 7, None, out)
        assert manifest.image_count == 5
        loaded, stream = load_ensemble(out)
        assert loaded.model_id == "alphabet"
        assert len(list(stream)) == 5
        assert (out / "run_config.json").exists()

    def test_deterministic_rerun(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        cmd_generate("flag", 4, 3, None, a)
        cmd_generate("flag", 4, 3, None, b)
        assert _dir_digest(a) == _dir_digest(b)

    def test_jobs_equivalent(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        cmd_generate("voronoi", 4, 5, None, a, jobs=1)
        cmd_generate("voronoi", 4, 5, None, b, jobs=2)
        assert _dir_digest(a) == _dir_digest(b)

    def test_count_zero(self, tmp_path):
        manifest = cmd_generate("voronoi", 0, 1, None, tmp_path / "empty")
        assert manifest.image_count == 0
        loaded, _ = load_ensemble(tmp_path / "empty")
        assert loaded.image_count == 0

    def test_voronoi_truth_recorded(self, tmp_path):
        cmd_generate("voronoi", 2, 11, None, tmp_path / "v")
        manifest, _ = load_ensemble(tmp_path / "v")
        rec = manifest.records[0]
        assert rec.class_label in (16, 32, 48, 64)
        assert len(rec.truth["areas"]) == rec.class_label
        assert len(rec.truth["intensities"]) == rec.class_label

    def test_invalid_model(self, tmp_path):
        with pytest.raises(ConfigError):
            cmd_generate("bogus", 1, 0, None, tmp_path / "x")

    def test_manifest_regenerates_images_bit_exactly(self, tmp_path):
        from scmkit.core import split_rng
        from scmkit.scm_voronoi import generate_voronoi

        out = tmp_path / "v"
        cmd_generate("voronoi", 4, 77, None, out)
        manifest, stream = load_ensemble(out)
        for record, stored in zip(manifest.records, stream):
            regenerated, _ = generate_voronoi(
                split_rng(manifest.global_seed, record.seed), record.class_label
            )
            assert np.array_equal(regenerated, stored)


class TestCorrupt:
    def test_rate_zero_identity(self, tmp_path):
        src = tmp_path / "src"
        dst = tmp_path / "dst"
        cmd_generate("alphabet", 4, 2, None, src)
        cmd_corrupt(src, "pair-break", 0.0, 9, dst)
        for name in sorted(os.listdir(src)):
            if name.endswith(".png"):
                assert filecmp.cmp(src / name, dst / name, shallow=False)
        manifest, _ = load_ensemble(dst)
        assert all(r.truth["corrupted"] == 0 for r in manifest.records)

    def test_exact_corruption_count(self, tmp_path):
        src = tmp_path / "src"
        dst = tmp_path / "dst"
        cmd_generate("alphabet", 10, 2, None, src)
        manifest = cmd_corrupt(src, "pair-break", 0.3, 9, dst)
        assert sum(r.truth["corrupted"] for r in manifest.records) == 3

    def test_flag_forbidden_detected_exactly(self, tmp_path):
        src = tmp_path / "src"
        dst = tmp_path / "dst"
        cmd_generate("flag", 8, 4, None, src)
        manifest = cmd_corrupt(src, "forbidden-tile", 0.25, 1, dst)
        report = cmd_analyze("flag", dst, tmp_path / "rep.json")
        flagged = {
            e["file"] for e in report.per_image if not e["checks"]["forbidden_fg"]["pass"]
        }
        truth = {r.file for r in manifest.records if r.truth["corrupted"] == 1}
        assert flagged == truth

    def test_incompatible_spec(self, tmp_path):
        src = tmp_path / "src"
        cmd_generate("alphabet", 2, 2, None, src)
        with pytest.raises(ConfigError):
            cmd_corrupt(src, "region-count", 0.5, 0, tmp_path / "dst")

    def test_deterministic(self, tmp_path):
        src = tmp_path / "src"
        cmd_generate("flag", 6, 4, None, src)
        cmd_corrupt(src, "tile-move", 0.5, 3, tmp_path / "a")
        cmd_corrupt(src, "tile-move", 0.5, 3, tmp_path / "b")
        assert _dir_digest(tmp_path / "a") == _dir_digest(tmp_path / "b")

    def test_jobs_equivalent(self, tmp_path):
        src = tmp_path / "src"
        cmd_generate("flag", 6, 4, None, src)
        cmd_corrupt(src, "tile-move", 0.5, 3, tmp_path / "a", jobs=1)
        cmd_corrupt(src, "tile-move", 0.5, 3, tmp_path / "b", jobs=3)
        assert _dir_digest(tmp_path / "a") == _dir_digest(tmp_path / "b")


class TestAnalyze:
    def test_alphabet_clean(self, tmp_path):
        src = tmp_path / "src"
        cmd_generate("alphabet", 5, 1, None, src)
        report = cmd_analyze("alphabet", src, tmp_path / "rep.json")
        agg = report.aggregates
        assert agg["pair_violations_pass_rate"] == 1.0
        assert agg["letter_exact_pass_rate"] == 1.0
        assert agg["hist_pair_XY/8"] == 5.0
        assert (tmp_path / "rep.json").exists()

    def test_report_embeds_config(self, tmp_path):
        src = tmp_path / "src"
        cmd_generate("alphabet", 2, 1, None, src)
        cmd_analyze("alphabet", src, tmp_path / "rep.json")
        data = read_json(tmp_path / "rep.json")
        assert data["config"]["analysis"]["template_threshold"] == 0.8

    def test_custom_config(self, tmp_path):
        src = tmp_path / "src"
        cmd_generate("alphabet", 2, 1, None, src)
        cfg_path = tmp_path / "cfg.json"
        write_json(AnalysisConfig(template_threshold=0.5).to_dict(), cfg_path)
        cmd_analyze("alphabet", src, tmp_path / "rep.json", config_path=cfg_path)
        data = read_json(tmp_path / "rep.json")
        assert data["config"]["analysis"]["template_threshold"] == 0.5

    def test_unknown_config_key_rejected(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        write_json({"who_knows": 1}, cfg_path)
        with pytest.raises(ConfigError, match="who_knows"):
            AnalysisConfig.load(cfg_path)

    def test_model_mismatch(self, tmp_path):
        src = tmp_path / "src"
        cmd_generate("alphabet", 2, 1, None, src)
        with pytest.raises(ConfigError, match="alphabet"):
            cmd_analyze("voronoi", src, tmp_path / "rep.json")

    def test_deterministic_report(self, tmp_path):
        src = tmp_path / "src"
        cmd_generate("voronoi", 3, 6, None, src)
        cmd_analyze("voronoi", src, tmp_path / "a.json")
        cmd_analyze("voronoi", src, tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_jobs_equivalent(self, tmp_path):
        src = tmp_path / "src"
        cmd_generate("flag", 4, 6, None, src)
        cmd_analyze("flag", src, tmp_path / "a.json", jobs=1)
        cmd_analyze("flag", src, tmp_path / "b.json", jobs=2)
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def _make_external_dir(path, seed, count, with_labels):
    os.makedirs(path, exist_ok=True)
    images, labels = synth_tissue_ensemble(seed, count)
    mapping = {}
    for i, image in enumerate(images):
        name = f"img_{i:04d}.png"
        save_image(image, os.path.join(path, name))
        mapping[name] = labels[i]
    if with_labels:
        write_json(mapping, os.path.join(path, "labels.json"))


class TestCompare:
    def test_null_comparison(self, tmp_path):
        train = tmp_path / "train"
        gen = tmp_path / "gen"
        _make_external_dir(train, 42, 24, with_labels=True)
        _make_external_dir(gen, 43, 24, with_labels=False)
        report = cmd_compare(train, gen, tmp_path / "cmp.json", seed=5)
        assert set(report["family_ks"]) == {"texture", "morphology", "skeleton", "fg_ratio"}
        assert "overall_ks" in report
        assert "class_metrics" in report
        assert report["n_train"] == 24

    def test_deterministic(self, tmp_path):
        train = tmp_path / "train"
        gen = tmp_path / "gen"
        _make_external_dir(train, 42, 12, with_labels=False)
        _make_external_dir(gen, 43, 12, with_labels=False)
        cmd_compare(train, gen, tmp_path / "a.json", seed=5)
        cmd_compare(train, gen, tmp_path / "b.json", seed=5)
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_jobs_equivalent(self, tmp_path):
        train = tmp_path / "train"
        _make_external_dir(train, 42, 10, with_labels=False)
        cmd_compare(train, train, tmp_path / "a.json", seed=5, jobs=1)
        cmd_compare(train, train, tmp_path / "b.json", seed=5, jobs=2)
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_insufficient_images(self, tmp_path):
        train = tmp_path / "train"
        gen = tmp_path / "gen"
        _make_external_dir(train, 42, 1, with_labels=False)
        _make_external_dir(gen, 43, 1, with_labels=False)
        from scmkit.stats import StatsError

        with pytest.raises(StatsError):
            cmd_compare(train, gen, tmp_path / "cmp.json", seed=5)


class TestReportPlots:
    def test_alphabet_plots(self, tmp_path):
        src = tmp_path / "src"
        cmd_generate("alphabet", 3, 1, None, src)
        cmd_analyze("alphabet", src, tmp_path / "rep.json")
        names = cmd_report(tmp_path / "rep.json", tmp_path / "plots")
        assert names == ["pair_prevalence.svg"]
        content = (tmp_path / "plots" / "pair_prevalence.svg").read_text()
        assert content.startswith("<svg")

    def test_voronoi_histogram_includes_offclass(self, tmp_path):
        src = tmp_path / "src"
        cmd_generate("voronoi", 4, 6, None, src)
        bad = tmp_path / "bad"
        cmd_corrupt(src, "region-count", 0.5, 8, bad)
        report = cmd_analyze("voronoi", bad, tmp_path / "rep.json")
        names = cmd_report(tmp_path / "rep.json", tmp_path / "plots")
        assert names == ["region_count_histogram.svg"]
        near_class = {c + d for c in (16, 32, 48, 64) for d in (-1, 0, 1)}
        off = [
            int(k.split("/")[1])
            for k in report.aggregates
            if k.startswith("hist_region_count/") and int(k.split("/")[1]) not in near_class
        ]
        assert off  # corrupted images landed off-class
        svg_text = (tmp_path / "plots" / "region_count_histogram.svg").read_text()
        assert f">{off[0]}<" in svg_text

    def test_empty_report_placeholder(self, tmp_path):
        src = tmp_path / "empty"
        cmd_generate("flag", 0, 1, None, src)
        cmd_analyze("flag", src, tmp_path / "rep.json")
        names = cmd_report(tmp_path / "rep.json", tmp_path / "plots")
        assert names == ["placeholder.svg"]

    def test_comparison_plots(self, tmp_path):
        train = tmp_path / "train"
        gen = tmp_path / "gen"
        _make_external_dir(train, 42, 12, with_labels=False)
        _make_external_dir(gen, 43, 12, with_labels=False)
        cmd_compare(train, gen, tmp_path / "cmp.json", seed=5)
        names = cmd_report(tmp_path / "cmp.json", tmp_path / "plots")
        assert names == ["family_ks.svg", "pc_scatter.svg"]

    def test_plots_deterministic(self, tmp_path):
        src = tmp_path / "src"
        cmd_generate("alphabet", 3, 1, None, src)
        cmd_analyze("alphabet", src, tmp_path / "rep.json")
        cmd_report(tmp_path / "rep.json", tmp_path / "p1")
        cmd_report(tmp_path / "rep.json", tmp_path / "p2")
        assert _dir_digest(tmp_path / "p1") == _dir_digest(tmp_path / "p2")

    def test_malformed_report(self, tmp_path):
        write_json({"not": "a report"}, tmp_path / "bad.json")
        from scmkit.core import EnsembleError

        with pytest.raises(EnsembleError):
            cmd_report(tmp_path / "bad.json", tmp_path / "plots")


class TestMainExitCodes:
    def test_ok(self, tmp_path):
        code = main(["generate", "--model", "alphabet", "--count", "1",
                     "--seed", "1", "--out", str(tmp_path / "e")])
        assert code == EXIT_OK

    def test_config_error(self, tmp_path):
        code = main(["generate", "--model", "bogus", "--count", "1", "--out", str(tmp_path / "e")])
        assert code == EXIT_CONFIG

    def test_io_error(self, tmp_path):
        code = main(["analyze", "--model", "alphabet", "--in", str(tmp_path / "missing"),
                     "--out", str(tmp_path / "r.json")])
        assert code == EXIT_IO

    def test_analysis_error(self, tmp_path):
        # an ensemble of constant images cannot be region-extracted
        os.makedirs(tmp_path / "weird")
        img = np.zeros((256, 256), dtype=np.uint8)
        from scmkit.core import EnsembleManifest, Record, save_ensemble

        manifest = EnsembleManifest("voronoi", 0, [Record("a.png", 0, 16, {})])
        save_ensemble(manifest, [img], tmp_path / "weird")
        code = main(["analyze", "--model", "voronoi", "--in", str(tmp_path / "weird"),
                     "--out", str(tmp_path / "r.json")])
        assert code == EXIT_ANALYSIS
