"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Criteria 7-9 train a desk-scale workspace (two procedural datasets, a VGG
surrogate and four black-box victims) once per session.  Set
FACL_ACCEPTANCE_ROOT to keep and reuse that workspace between sessions.
"""

import json
import math
import os

import numpy as np
import pytest
import torch
import yaml

from facl import spectral
from facl.config import AblationConfig, TrainConfig, load_config
from facl.evaluation import difference_map, psnr
from facl.generator import Generator, GeneratorConfig, PerturbationBudget, project
from facl.losses import FeaturePairSet, cosine_similarity, loss_facl, loss_orig
from facl.spectral import BandThresholds, RandomizationParams
from facl.training import VARIANTS, baseline_step, init_state, make_ablation_config, train_step

from helpers import check_generator_gradient, tiny_surrogate, verdict
from oracles import naive_dct2

SURROGATE = "vgg_shapes"
BLACK_BOX = ("resnet_shapes", "densenet_shapes", "resnet_glyphs", "densenet_glyphs")
SEEDS = (0, 1, 2)
DESK_TRAIN = TrainConfig(generator_base_width=32)


# ---- fast property criteria ------------------------------------------------

def test_criterion_1_dct_matches_oracle_and_round_trips():
    rng = np.random.default_rng(0)
    worst_oracle = 0.0
    for h in range(2, 17):
        for w in range(2, 17):
            x = rng.normal(0, 100, (1, h, w))
            worst_oracle = max(worst_oracle, np.abs(spectral.dct2(x) - naive_dct2(x)).max())
    x = rng.uniform(0, 255, (1000, 3, 32, 32))
    worst_trip = np.abs(spectral.idct2(spectral.dct2(x)) - x).max()
    verdict(1, worst_oracle <= 1e-6 and worst_trip <= 1e-5,
            f"225 shapes 2x2..16x16 max |fast - naive| = {worst_oracle:.2e} (tol 1e-6); "
            f"1000-image round trip max error = {worst_trip:.2e} (tol 1e-5)")


def test_criterion_2_decomposition_identity():
    rng = np.random.default_rng(1)
    worst, mask_ok, cases = 0.0, True, 0
    for _ in range(600):
        h, w = rng.integers(2, 33, 2)
        res = int(max(h, w))
        f_low = int(rng.integers(0, res))
        f_high = int(rng.integers(f_low + 1, res + 1))
        t = BandThresholds(f_low, f_high, res)
        bp = spectral.build_band_mask(t, (h, w), "band_pass").values
        br = spectral.build_band_mask(t, (h, w), "band_reject").values
        mask_ok &= bool(torch.equal(bp + br, torch.ones_like(bp)))
        x = rng.uniform(0, 255, (3, h, w))
        mid, lh = spectral.band_decompose(x, t)
        worst = max(worst, np.abs(mid + lh - x).max())
        cases += 1
    verdict(2, worst <= 1e-5 and mask_ok and cases >= 500,
            f"{cases} random (thresholds, shape) cases: max |mid + lowhigh - x| = {worst:.2e} (tol 1e-5), "
            f"band_pass + band_reject == 1 exactly: {mask_ok}")


def test_criterion_3_fadr_mid_band_preserved():
    rng = np.random.default_rng(2)
    worst_mid, worst_id = 0.0, 0.0
    for k in range(200):
        size = int(rng.integers(8, 65))
        x = rng.uniform(0, 255, (3, size, size))
        t = BandThresholds()
        rho = float(rng.uniform(0, 0.99))
        out = spectral.fadr_transform(x, t, RandomizationParams(rho, 0.0, seed=k))
        mid = spectral.band_labels(t, (size, size)).numpy() == 1
        worst_mid = max(worst_mid, np.abs(spectral.dct2(out)[:, mid] - spectral.dct2(x)[:, mid]).max())
        ident = spectral.fadr_transform(x, t, RandomizationParams(0.0, 0.0, seed=k))
        worst_id = max(worst_id, np.abs(ident - x).max())
    verdict(3, worst_mid <= 1e-5 and worst_id <= 1e-5,
            f"200 images, rho in [0, 0.99), sigma = 0: max mid-band change = {worst_mid:.2e}; "
            f"(rho, sigma) = (0, 0) max identity error = {worst_id:.2e} (tol 1e-5)")


def test_criterion_4_budget_exactness():
    g = torch.Generator().manual_seed(3)
    torch.manual_seed(3)
    gen = Generator(GeneratorConfig(3, 8, 1, 32)).eval()
    n_total, n_ok, min_psnr = 0, 0, math.inf
    budget = PerturbationBudget(10)
    for _ in range(20):
        x = torch.randint(0, 256, (50, 3, 32, 32), generator=g).float()
        with torch.no_grad():
            candidates = [gen(x), x + torch.randn(x.shape, generator=g) * 40,
                          x + 10 * torch.sign(torch.randn(x.shape, generator=g))]
        for y in candidates:
            adv = project(y, x, budget)
            ok = ((adv - x).abs().flatten(1).max(1).values <= 10) & (adv.flatten(1).min(1).values >= 0) \
                & (adv.flatten(1).max(1).values <= 255)
            n_ok += int(ok.sum())
            n_total += len(x)
            min_psnr = min(min_psnr, float(psnr(x, adv).min()))
    floor = 10 * math.log10(255 ** 2 / 10 ** 2)
    verdict(4, n_ok == n_total and min_psnr >= floor - 1e-9,
            f"{n_ok}/{n_total} projected images within eps = 10 bit-exactly and in [0, 255]; "
            f"min PSNR = {min_psnr:.4f} dB (floor {floor:.4f})")


def test_criterion_5_loss_identities_bounds_and_gradient():
    rng = np.random.default_rng(5)
    worst_identity = 0.0
    in_bounds = True
    for _ in range(1000):
        n, d = int(rng.integers(1, 9)), int(rng.integers(1, 65))
        a, b, c, e = (torch.from_numpy(rng.normal(0, rng.uniform(0.1, 100), (n, d))) for _ in range(4))
        worst_identity = max(worst_identity, abs(float(loss_facl(FeaturePairSet(a, a, c, c)))))
        lo, lf = float(loss_orig(a, b)), float(loss_facl(FeaturePairSet(a, b, c, e)))
        in_bounds &= -1 - 1e-12 <= lo <= 1 + 1e-12 and -2 - 1e-12 <= lf <= 2 + 1e-12
    rel = max(check_generator_gradient(seed) for seed in range(3))
    verdict(5, worst_identity <= 1e-5 and in_bounds and rel <= 1e-3,
            f"max |loss_facl(x, x)| = {worst_identity:.2e}; bounds hold on 1000 random batches: {in_bounds}; "
            f"autograd vs central differences relative error = {rel:.2e} (tol 1e-3)")


def test_criterion_6_baseline_equivalence():
    sur = tiny_surrogate(16, dtype=torch.float32)
    cfg = make_ablation_config(TrainConfig(batch_size=8, generator_base_width=8, generator_residual_blocks=2,
                                           orig_tap="maxpool2", facl_tap="maxpool3", seed=11), "baseline")
    a, b = init_state(cfg, sur, 16), init_state(cfg, sur, 16)
    rng = np.random.default_rng(6)
    equal = 0
    for _ in range(20):
        batch = torch.from_numpy(rng.integers(0, 256, (8, 3, 16, 16), dtype=np.uint8))
        equal += train_step(a, batch)["loss_orig"] == baseline_step(b, batch)["loss_orig"]
    params_equal = all(torch.equal(p, q) for p, q in zip(a.generator.state_dict().values(),
                                                         b.generator.state_dict().values()))
    verdict(6, equal == 20 and params_equal,
            f"{equal}/20 per-step losses bit-equal to the plain feature-separation path; "
            f"final generator weights identical: {params_equal}")


def test_criterion_10_difference_map():
    torch.manual_seed(10)
    a = Generator(GeneratorConfig(3, 8, 2, 32))
    torch.manual_seed(11)
    b = Generator(GeneratorConfig(3, 8, 2, 32))
    x = torch.rand(6, 3, 32, 32) * 255
    same = difference_map(a, a, x)
    diff = difference_map(a, b, x)
    expected = tuple(a.downsample_features(x).shape[-2:])
    binary = set(diff.unique().tolist()) <= {0, 1} and set(same.unique().tolist()) <= {0, 1}
    ok = int(same.sum()) == 0 and binary and tuple(diff.shape[-2:]) == expected and len(diff) == 6
    verdict(10, ok, f"identical checkpoints -> {int(same.sum())} set cells; binary: {binary}; "
                    f"shape {tuple(diff.shape)} vs down-sampling map {expected}")


# ---- desk-scale criteria ---------------------------------------------------

@pytest.fixture(scope="session")
def desk_root(tmp_path_factory):
    from facl.experiments import prepare_desk_workspace

    root = os.environ.get("FACL_ACCEPTANCE_ROOT") or tmp_path_factory.mktemp("desk")
    accuracies = prepare_desk_workspace(root)
    print("desk zoo clean accuracy:", accuracies)
    return root


@pytest.fixture(scope="session")
def transfer_records(desk_root, tmp_path_factory):
    from facl.experiments import run_ablation

    config = AblationConfig(DESK_TRAIN, ("baseline", "full"), (SURROGATE, *BLACK_BOX), SEEDS)
    _, records = run_ablation(desk_root, config, tmp_path_factory.mktemp("transfer"))
    return records


@pytest.mark.slow
def test_criterion_7_white_box_collapse(transfer_records):
    rows = [r for r in transfer_records if r["victim_id"] == SURROGATE and r["variant"] == "full"]
    ok = len(rows) == len(SEEDS) and all(r["status"] == "ok" for r in rows) \
        and all(r["adv_top1"] <= 0.5 * r["clean_top1"] for r in rows)
    detail = "; ".join(f"seed {r['seed']}: clean {r['clean_top1']:.2f}% -> attacked {r['adv_top1']:.2f}%"
                       for r in rows)
    verdict(7, ok, f"1 epoch on 32x32 shapes, surrogate {SURROGATE} ({detail}); needs attacked <= 50% of clean")


@pytest.mark.slow
def test_criterion_8_transfer_directionality(transfer_records):
    def seed_means(variant):
        return np.array([np.mean([r["adv_top1"] for r in transfer_records
                                  if r["variant"] == variant and r["seed"] == s and r["victim_id"] in BLACK_BOX])
                         for s in SEEDS])

    base, full = seed_means("baseline"), seed_means("full")
    for vid in BLACK_BOX:
        per = {v: [r["adv_top1"] for r in transfer_records if r["victim_id"] == vid and r["variant"] == v]
               for v in ("baseline", "full")}
        print(f"{vid:<16} baseline {np.mean(per['baseline']):6.2f}  full {np.mean(per['full']):6.2f}")
    ok = full.mean() <= base.mean() - 1.0
    verdict(8, ok,
            f"black-box post-attack top-1 over {len(SEEDS)} seeds: baseline {base.mean():.2f} +/- {base.std(ddof=1):.2f}, "
            f"full {full.mean():.2f} +/- {full.std(ddof=1):.2f}; needs full <= baseline - 1 point")


@pytest.mark.slow
def test_criterion_9_ablation_completeness(desk_root, tmp_path):
    from facl.cli import main

    train = DESK_TRAIN.replace(max_steps=6).to_dict()
    cfg = {"train": train, "victims": list(BLACK_BOX), "seeds": [0], "eval_limit": 200}
    (tmp_path / "ablate.yaml").write_text(yaml.safe_dump(cfg))
    code = main(["ablate", "--config", str(tmp_path / "ablate.yaml"), "--data-root", str(desk_root),
                 "--out-dir", str(tmp_path / "runs")])
    (run_dir,) = (tmp_path / "runs").iterdir()
    records = [json.loads(l) for l in (run_dir / "records.jsonl").read_text().splitlines()]
    pairs = {(r["variant"], r["victim_id"]) for r in records}
    expected = {(v, vid) for v in VARIANTS for vid in BLACK_BOX}
    base = load_config(run_dir / "config.yaml", kind="ablation").train
    configs_ok = all(
        load_config(run_dir / f"{v}-seed0" / "config.yaml") == make_ablation_config(base, v).replace(seed=0)
        for v in VARIANTS)
    ok = code == 0 and len(records) == len(expected) and pairs == expected and configs_ok \
        and all(r["status"] == "ok" for r in records)
    verdict(9, ok, f"`facl ablate` wrote {len(records)} records for {len(VARIANTS)} variants x {len(BLACK_BOX)} "
                   f"victims (expected {len(expected)}, one per pair: {pairs == expected}); "
                   f"resolved configs persisted and re-load equal: {configs_ok}")
