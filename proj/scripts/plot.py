"""Plots price and ETT traces for every run directory under the given root."""

import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def plot_run(run: Path) -> None:
    slots = pd.read_csv(run / "slots.csv")
    ett = slots.groupby(["slot", "link"])["ett"].first().unstack()
    prices = pd.read_csv(run / "prices.csv")

    fig, (ax_p, ax_e) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    if not prices.empty:
        for (link, channel), g in prices.groupby(["link", "channel"]):
            ax_p.plot(g["slot"], g["price"], lw=0.8, label=f"{link}, ch {channel}")
        ax_p.legend(fontsize=7, ncol=2)
    ax_p.set_ylabel("price")
    for link in ett.columns:
        ax_e.plot(ett.index, ett[link], lw=0.8, label=str(link))
    ax_e.set_yscale("log")
    ax_e.set_ylabel("ETT (s)")
    ax_e.set_xlabel("slot")
    ax_e.legend(fontsize=7)
    fig.suptitle(run.name)
    fig.tight_layout()
    fig.savefig(run / "traces.png", dpi=120)
    plt.close(fig)


def main() -> None:
    root = Path(sys.argv[1] if len(sys.argv) > 1 else "results")
    for run in sorted(p.parent for p in root.glob("*/slots.csv")):
        plot_run(run)
        print(f"wrote {run / 'traces.png'}")


if __name__ == "__main__":
    main()
