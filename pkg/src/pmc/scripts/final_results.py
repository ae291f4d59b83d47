"""Gather per-seed run summaries into mean / sample-std tables and compare experiments."""
import argparse
import glob
import json
import logging
import os
import warnings
from typing import List, Sequence, Tuple

import pandas as pd
from tabulate import tabulate

from pmc.errors import ReportError
from pmc.synthdata import FUSED
from pmc.utils import PathLike, atomic_path

logger = logging.getLogger(__name__)

META_COLUMNS = ["run", "baseline", "alpha", "seed"]


# Load all individual results:
def get_all_subresults(in_root_dir: str) -> List[pd.DataFrame]:
    files = sorted(glob.glob(os.path.join(in_root_dir, "seed_*", "summary.json"))
                   + glob.glob(os.path.join(in_root_dir, "alpha_*", "seed_*", "summary.json")))
    dfs = []
    for f in files:
        logger.debug("reading %s", f)
        with open(f, "r") as in_IO:
            summary = json.load(in_IO)
        df = pd.DataFrame([summary])
        df["run"] = os.path.basename(os.path.normpath(in_root_dir))
        dfs.append(df)
    return dfs


def accuracy_columns(df: pd.DataFrame) -> List[str]:
    return [c for c in df.columns if c.startswith(("src_", "tgt_"))]


def extract_final_results(df_app: pd.DataFrame) -> pd.DataFrame:
    """Mean and sample standard deviation of every accuracy column per (run, baseline, alpha)."""
    columns = accuracy_columns(df_app)
    ds = []
    for (run, baseline, alpha), tmp_df in df_app.groupby(["run", "baseline", "alpha"], sort=False):
        d = {"run": run, "baseline": baseline, "alpha": alpha, "nseeds": tmp_df.shape[0]}
        for c in columns:
            d[f"{c}_mean"] = tmp_df[c].mean()
            d[f"{c}_std"] = tmp_df[c].std(ddof=1)
        ds.append(d)
    if any(d["nseeds"] < 2 for d in ds):
        warnings.warn("some runs hold a single seed; their standard deviation is undefined")
    return pd.DataFrame(ds)


def _write_tsv(df: pd.DataFrame, path: PathLike):
    with atomic_path(path) as tmp_path:
        df.to_csv(tmp_path, sep="\t", index=False, na_rep="-")


def get_final_results(in_root_dir: str, out_dir: str) -> Tuple[str, str]:
    if not os.path.exists(in_root_dir):
        raise ReportError(f"Could not find the input directory: < {in_root_dir} >")

    dfs = get_all_subresults(in_root_dir=in_root_dir)
    if len(dfs) == 0:
        raise ReportError(f"no results were found in directory: {in_root_dir}")
    df_app = pd.concat(dfs, ignore_index=True)
    df_final = extract_final_results(df_app=df_app)

    out_df_final_results = os.path.join(out_dir, "pmc_results.tsv")
    out_df_single_detailed_results = os.path.join(out_dir, "pmc_single_detailed_results.tsv")
    _write_tsv(df_final, out_df_final_results)
    _write_tsv(df_app, out_df_single_detailed_results)
    return out_df_final_results, out_df_single_detailed_results


def _modalities(df: pd.DataFrame) -> Tuple[str, ...]:
    return tuple(sorted(c[len("tgt_"):-len("_mean")] for c in df.columns
                        if c.startswith("tgt_") and c.endswith("_mean") and c != f"tgt_{FUSED}_mean"))


def compare_runs(run_dirs: Sequence[str]) -> pd.DataFrame:
    """One row per (run, alpha) with fused and per-modality target accuracy.

    Every run after the first gets a ``delta_fused`` column against the first run.
    Runs trained on different modality sets cannot be compared.
    """
    frames, schema, reference = [], None, None
    for run_dir in run_dirs:
        dfs = get_all_subresults(run_dir)
        if not dfs:
            raise ReportError(f"no completed seeds in {run_dir}")
        df = extract_final_results(pd.concat(dfs, ignore_index=True))
        modalities = _modalities(df)
        if schema is None:
            schema, reference = modalities, run_dir
        elif modalities != schema:
            raise ReportError(f"run {run_dir} reports modalities {list(modalities)}, "
                              f"incompatible with {list(schema)} of {reference}")
        frames.append(df)
    table = pd.concat(frames, ignore_index=True)
    if f"tgt_{FUSED}_mean" not in table.columns:
        raise ReportError(f"run {reference} has no target accuracies (dataset without hidden labels?)")
    keep = ["run", "baseline", "alpha", "nseeds", f"tgt_{FUSED}_mean", f"tgt_{FUSED}_std"]
    keep += [f"tgt_{m}_{stat}" for m in schema for stat in ("mean", "std")]
    table = table[keep].copy()
    if len(table) > 1:
        table["delta_fused"] = table[f"tgt_{FUSED}_mean"] - table[f"tgt_{FUSED}_mean"].iloc[0]
    return table


def render_table(table: pd.DataFrame) -> str:
    return tabulate(table, headers="keys", tablefmt="simple", showindex=False, floatfmt=".4f", missingval="-")


def plot_curves(run_dirs: Sequence[str], out_path: PathLike) -> PathLike:
    """Mean per-epoch fused target accuracy and fused proportion of every run."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (ax_acc, ax_r) = plt.subplots(1, 2, figsize=(10, 4))
    for run_dir in run_dirs:
        paths = sorted(glob.glob(os.path.join(run_dir, "seed_*", "metrics.tsv"))
                       + glob.glob(os.path.join(run_dir, "alpha_*", "seed_*", "metrics.tsv")))
        if not paths:
            continue
        curves = pd.concat([pd.read_csv(p, sep="\t") for p in paths]).groupby("epoch").mean(numeric_only=True)
        label = os.path.basename(os.path.normpath(run_dir))
        ax_acc.plot(curves.index, curves[f"tgt_{FUSED}"], label=label)
        ax_r.plot(curves.index, curves[f"r_{FUSED}"], label=label)
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("fused target accuracy")
    ax_r.set_xlabel("epoch")
    ax_r.set_ylabel("fused selection proportion")
    ax_acc.legend()
    fig.tight_layout()
    with atomic_path(out_path) as tmp_path:
        fig.savefig(tmp_path, format="png")
    plt.close(fig)
    return out_path


def report(run_dirs: Sequence[str], out_dir: str, plot: bool = False) -> Tuple[str, str]:
    """Write ``report.tsv`` (and ``report.png``); returns the rendered table and the tsv path."""
    table = compare_runs(run_dirs)
    os.makedirs(out_dir, exist_ok=True)
    out_path = os.path.join(out_dir, "report.tsv")
    _write_tsv(table, out_path)
    if plot:
        plot_curves(run_dirs, os.path.join(out_dir, "report.png"))
    return render_table(table), out_path


if (__name__ == "__main__"):
    parser = argparse.ArgumentParser()
    parser.add_argument('-i', '--in_root_dir', required=True, help='experiment directory holding the seed_* folders')
    parser.add_argument('-o', '--out_dir', required=False, default='.', help='where to output the result files')
    args = parser.parse_args()

    out_df_final_results, out_df_single_detailed_results = get_final_results(
        out_dir=os.path.abspath(args.out_dir), in_root_dir=os.path.abspath(args.in_root_dir))
    print("writing out: ", out_df_final_results, "\n\t", out_df_single_detailed_results)
