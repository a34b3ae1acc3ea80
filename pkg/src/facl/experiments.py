"""Workspace-level flows behind the CLI: resolve ids, run, persist.

Every flow writes into a fresh run directory containing the resolved config,
a metrics CSV where applicable, ``record.json`` / ``records.jsonl`` and the
checkpoint paths it used or produced.
"""

import logging
from dataclasses import replace
from pathlib import Path

from .config import AblationConfig, TrainConfig, dump_config
from .data import Workspace, load_split
from .errors import ConfigurationError, FaclError
from .evaluation import classify_setting, evaluate_attack, summarize
from .generator import PerturbationBudget, load_generator
from .models import SurrogateTrainConfig, save_classifier, train_classifier
from .runs import append_jsonl, create_run_dir, write_json
from .training import make_ablation_config, train

logger = logging.getLogger(__name__)


def train_surrogate(workspace, dataset_id, arch, model_id=None, config=SurrogateTrainConfig(), **model_kwargs):
    """Train a zoo classifier on a workspace dataset and register it."""
    workspace = workspace if isinstance(workspace, Workspace) else Workspace(workspace)
    manifest = workspace.dataset(dataset_id)
    model_id = model_id or f"{arch}_{dataset_id}"
    x_tr, y_tr = load_split(manifest, "train")
    x_te, y_te = load_split(manifest, "test")
    model, acc = train_classifier(arch, x_tr, y_tr, x_te, y_te, manifest.num_classes, config, **model_kwargs)
    workspace.models_dir.mkdir(parents=True, exist_ok=True)
    payload = save_classifier(workspace.model_path(model_id), model, model_id, dataset_id, acc,
                              {"train_config": config.__dict__, "dataset_checksum": manifest.checksum})
    workspace.register_model(model_id, payload)
    logger.info("%s: test accuracy %.2f%%", model_id, acc)
    return model, acc


def _resolve_training(workspace, config):
    manifest = workspace.dataset(config.dataset)
    surrogate, meta = workspace.model(config.surrogate)
    if meta["resolution"] != manifest.resolution:
        raise ConfigurationError(f"surrogate {config.surrogate} expects {meta['resolution']}px, "
                                 f"dataset {config.dataset} is {manifest.resolution}px")
    return manifest, surrogate


def run_training(workspace, config, out_dir, kind="train"):
    """Train one generator; returns the run directory."""
    workspace = workspace if isinstance(workspace, Workspace) else Workspace(workspace)
    manifest, surrogate = _resolve_training(workspace, config)
    images, _ = load_split(manifest, "train")
    run_dir = create_run_dir(out_dir, kind, config.hash())
    dump_config(config, run_dir / "config.yaml")
    _, summary = train(config, images, surrogate, run_dir)
    write_json(run_dir / "record.json", {
        "kind": kind, "config_hash": config.hash(), "dataset": config.dataset,
        "dataset_checksum": manifest.checksum, "surrogate": config.surrogate,
        "surrogate_checkpoint": str(workspace.model_path(config.surrogate)),
        "generator_checkpoint": str(run_dir / "generator.pt"), "summary": summary,
    })
    return run_dir


def evaluate_generator(workspace, generator_path, victim_id, dataset_id=None, epsilon=None, limit=None):
    """Evaluate a generator checkpoint against one registered victim."""
    workspace = workspace if isinstance(workspace, Workspace) else Workspace(workspace)
    generator, payload = load_generator(generator_path)
    victim, vmeta = workspace.model(victim_id)
    dataset_id = dataset_id or vmeta["dataset"]
    manifest = workspace.dataset(dataset_id)
    images, labels = load_split(manifest, "test")
    if epsilon is None:
        epsilon = payload.get("extra", {}).get("epsilon", 10.0)
    return evaluate_attack(generator, victim, images, labels, PerturbationBudget(epsilon), limit=limit,
                           generator_id=str(generator_path), victim_id=victim_id, dataset_id=dataset_id,
                           config_hash=payload.get("train_config_hash") or "")


def run_ablation(workspace, config, out_dir):
    """Train every (variant, seed) and evaluate it on every victim.

    A failed training run marks its rows failed and the suite moves on.
    Returns ``(run_dir, records)``.
    """
    workspace = workspace if isinstance(workspace, Workspace) else Workspace(workspace)
    base = config.train
    manifest, surrogate = _resolve_training(workspace, base)
    train_images, _ = load_split(manifest, "train")
    victims = {}
    for vid in config.victims:
        model, meta = workspace.model(vid)
        vmanifest = workspace.dataset(meta["dataset"])
        victims[vid] = (model, *load_split(vmanifest, "test"), meta["dataset"])
    run_dir = create_run_dir(out_dir, "ablate", config.hash())
    dump_config(config, run_dir / "config.yaml")
    records = run_ablation_suite(config, train_images, surrogate, victims, run_dir,
                                 surrogate_id=base.surrogate, train_dataset=base.dataset)
    return run_dir, records


def run_ablation_suite(config, train_images, surrogate, victims, run_dir=None, surrogate_id="", train_dataset=""):
    """Core of the ablation suite on in-memory data.

    ``victims`` maps victim id to ``(model, images, labels, dataset_id)``.
    Produces one record per (variant, seed, victim); with ``run_dir`` each
    variant's resolved config, metrics and checkpoint go to
    ``run_dir/<variant>-seed<k>/`` and records to ``run_dir/records.jsonl``.
    """
    records = []
    for variant in config.variants:
        for seed in config.seeds:
            cfg = make_ablation_config(config.train, variant).replace(seed=seed)
            sub = None
            if run_dir is not None:
                sub = Path(run_dir) / f"{variant}-seed{seed}"
                sub.mkdir()
                dump_config(cfg, sub / "config.yaml")
            try:
                generator, _ = train(cfg, train_images, surrogate, sub)
                error = None
            except FaclError as exc:
                logger.error("variant %s seed %s failed: %s", variant, seed, exc)
                generator, error = None, str(exc)
            for vid, (victim, images, labels, vdataset) in victims.items():
                setting = classify_setting(vid, vdataset, surrogate_id, train_dataset)
                if generator is None:
                    rec = {"generator_id": f"{variant}-seed{seed}", "victim_id": vid, "dataset_id": vdataset,
                           "variant": variant, "seed": seed, "setting": setting, "status": "failed",
                           "config_hash": cfg.hash(), "notes": [error]}
                else:
                    r = evaluate_attack(generator, victim, images, labels, cfg.budget, limit=config.eval_limit,
                                        generator_id=f"{variant}-seed{seed}", victim_id=vid,
                                        dataset_id=vdataset, config_hash=cfg.hash())
                    r.variant, r.seed, r.setting = variant, seed, setting
                    rec = r.to_dict()
                records.append(rec)
                if run_dir is not None:
                    append_jsonl(Path(run_dir) / "records.jsonl", rec)
    if run_dir is not None:
        write_json(Path(run_dir) / "summary.json", summarize(records))
    return records


DESK_ZOO = (
    # (model id, dataset id, arch, model kwargs)
    ("vgg_shapes", "shapes", "vgg", {}),
    ("resnet_shapes", "shapes", "resnet", {"width": 16}),
    ("densenet_shapes", "shapes", "densenet", {}),
    ("resnet_glyphs", "glyphs", "resnet", {"width": 16}),
    ("densenet_glyphs", "glyphs", "densenet", {}),
)

# images per class (train, test); shapes is the generator training set, so one
# epoch over it is 1250 steps at batch 16
DESK_SIZES = {"shapes": (2000, 100), "glyphs": (400, 100)}
# classifier epochs per dataset, roughly equal optimizer work for both
DESK_CLASSIFIER_EPOCHS = {"shapes": 2, "glyphs": 6}


def prepare_desk_workspace(workspace, sizes=DESK_SIZES, seed=0, zoo=DESK_ZOO,
                           classifier_config=SurrogateTrainConfig(learning_rate=3e-3),
                           classifier_epochs=DESK_CLASSIFIER_EPOCHS):
    """Render, ingest and train everything a desk-scale experiment needs.

    Both synthetic datasets are written under ``<root>/raw`` and ingested;
    then the surrogate and victim zoo is trained.  Steps whose output is
    already registered are skipped, so reruns are cheap.  Returns
    ``{model id: test accuracy}``.
    """
    from .synthetic import write_image_folder

    workspace = workspace if isinstance(workspace, Workspace) else Workspace(workspace)
    for kind in sorted({d for _, d, _, _ in zoo}):
        if not workspace.manifest_path(kind).exists():
            n_train, n_test = sizes[kind]
            raw = write_image_folder(workspace.root / "raw" / kind, kind, n_train, n_test, seed=seed)
            workspace.ingest(raw, kind, resolution=32)
    registry = workspace.registry()
    accuracies = {}
    for model_id, dataset_id, arch, kwargs in zoo:
        if model_id in registry:
            accuracies[model_id] = registry[model_id]["test_accuracy"]
            continue
        cfg = replace(classifier_config, seed=seed,
                      epochs=classifier_epochs.get(dataset_id, classifier_config.epochs))
        _, accuracies[model_id] = train_surrogate(workspace, dataset_id, arch, model_id, cfg, **kwargs)
    return accuracies
