"""Runs the full CLI pipeline in a directory; shared by CLI and acceptance tests."""

from pathlib import Path

from exmoves.cli import main
from exmoves.config import PipelineConfig
from exmoves.synthetic import SyntheticSpec


def small_config(seed=0, workers=1, **synthetic):
    spec = dict(videos_per_class=10, test_per_class=5, exemplars_per_class=1, seed=seed)
    spec.update(synthetic)
    return PipelineConfig(seed=seed, workers=workers, synthetic=SyntheticSpec(**spec))


def run(*argv):
    code = main([str(a) for a in argv])
    assert code == 0, f"exmoves {' '.join(map(str, argv))} exited {code}"


def run_chain(work: Path, cfg: PipelineConfig) -> dict:
    work.mkdir(parents=True, exist_ok=True)
    conf = work / "config.json"
    cfg.save(conf)
    data, models = work / "data", work / "models"
    run("gen-synthetic", "--config", conf, "--out-dir", data)
    manifest = data / "manifest.json"
    run("train-exmove", "--config", conf, "--manifest", manifest, "--out-dir", models)
    run("calibrate", "--config", conf, "--manifest", manifest, "--models-dir", models, "--out", work / "bank.txt")
    for split in ("train", "test"):
        run("extract", "--config", conf, "--bank", work / "bank.txt", "--manifest", manifest,
            "--split", split, "--out", work / f"{split}.desc")
    run("train-classifier", "--config", conf, "--descriptors", work / "train.desc",
        "--manifest", manifest, "--out", work / "clf.txt")
    run("predict", "--config", conf, "--classifier", work / "clf.txt", "--descriptors", work / "test.desc",
        "--manifest", manifest, "--out", work / "pred.txt")
    return {
        "models": sorted(models.glob("*.model")),
        "bank": work / "bank.txt",
        "descriptors": [work / "train.desc", work / "test.desc"],
        "predictions": work / "pred.txt",
        "manifest": manifest,
    }
