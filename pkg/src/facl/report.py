"""Tables and plots from a finished run directory."""

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .evaluation import summarize  # noqa: E402
from .runs import read_jsonl  # noqa: E402


def load_records(run_dir):
    run_dir = Path(run_dir)
    if (run_dir / "records.jsonl").exists():
        return read_jsonl(run_dir / "records.jsonl")
    if (run_dir / "record.json").exists():
        rec = json.loads((run_dir / "record.json").read_text())
        return rec if isinstance(rec, list) else [rec]
    raise FileNotFoundError(f"{run_dir} has no records.jsonl or record.json")


def _write_csv(path, rows):
    if not rows:
        path.write_text("")
        return
    keys = list(rows[0])
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: r.get(k) for k in keys})


def format_summary(rows):
    lines = [f"{'variant':<12} {'setting':<13} {'clean':>7} {'adv mean':>9} {'std':>6} {'seeds':>5} {'ssim':>6} {'psnr':>6}"]
    for r in rows:
        lines.append(f"{r['variant'] or '-':<12} {r['setting'] or '-':<13} {r['clean_top1']:7.2f} "
                     f"{r['adv_top1_mean']:9.2f} {r['adv_top1_std']:6.2f} {r['n_seeds']:5d} "
                     f"{r['ssim']:6.3f} {r['psnr']:6.2f}")
    return "\n".join(lines)


def write_report(run_dir):
    """Write records.csv, summary.csv, accuracy_bars.png and quality_scatter.png.

    Returns the summary rows.
    """
    run_dir = Path(run_dir)
    records = load_records(run_dir)
    flat = [{k: v for k, v in r.items() if k != "notes"} for r in records]
    _write_csv(run_dir / "records.csv", flat)
    rows = summarize(records)
    _write_csv(run_dir / "summary.csv", rows)

    fig, ax = plt.subplots(figsize=(max(5, 0.9 * len(rows)), 3.5))
    labels = [f"{r['variant'] or 'run'}\n{r['setting']}" for r in rows]
    ax.bar(range(len(rows)), [r["adv_top1_mean"] for r in rows],
           yerr=[r["adv_top1_std"] for r in rows], color="tab:red", alpha=0.8, label="after attack")
    ax.plot(range(len(rows)), [r["clean_top1"] for r in rows], "k_", markersize=18, label="clean")
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(labels, fontsize=7)
    ax.set_ylabel("top-1 accuracy (%)")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(run_dir / "accuracy_bars.png", dpi=120)
    plt.close(fig)

    ok = [r for r in records if r.get("status", "ok") == "ok"]
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.scatter([r["psnr"] for r in ok], [r["adv_top1"] for r in ok], c=[r["ssim"] for r in ok], cmap="viridis")
    ax.set_xlabel("PSNR (dB)")
    ax.set_ylabel("top-1 after attack (%)")
    fig.tight_layout()
    fig.savefig(run_dir / "quality_scatter.png", dpi=120)
    plt.close(fig)
    return rows
