"""
End to end at desk scale
========================

Build a workspace with two procedural datasets and a small classifier zoo,
train a baseline and a full (FADR + FACL) generator against the VGG
surrogate, and compare their post-attack accuracy on victims the generator
never saw.  Takes roughly 30 minutes on one CPU core (13 for the
workspace, 8 per generator).  Set FACL_DATA_ROOT to reuse a workspace
between runs.
"""

import os

import torch

from facl.config import AblationConfig, TrainConfig
from facl.experiments import prepare_desk_workspace, run_ablation
from facl.report import format_summary, write_report

torch.set_num_threads(max(1, os.cpu_count() or 1))
root = os.environ.get("FACL_DATA_ROOT", "facl_data")

# datasets + zoo; skipped when already present
for model_id, acc in prepare_desk_workspace(root).items():
    print(f"{model_id:<16} clean test accuracy {acc:6.2f}%")

# one seed of the two headline variants, evaluated on all five models
config = AblationConfig(
    train=TrainConfig(generator_base_width=32),
    variants=("baseline", "full"),
    victims=("vgg_shapes", "resnet_shapes", "densenet_shapes", "resnet_glyphs", "densenet_glyphs"),
    seeds=(0,),
)
run_dir, records = run_ablation(root, config, "runs")
for r in records:
    print(f"{r['variant']:<9} {r['victim_id']:<16} {r['setting']:<13} "
          f"clean {r['clean_top1']:6.2f}  attacked {r['adv_top1']:6.2f}  psnr {r['psnr']:.2f}")

# per-setting summary plus plots in the run directory
print(format_summary(write_report(run_dir)))
print("artifacts in", run_dir)
