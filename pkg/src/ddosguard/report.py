"""PNG figures for a finished run.

Three views of one VM: offered load against the agent's prediction,
the police rate with the firewall clamp, and the attacker share of the
traffic that reached the VM.  Figures are written next to the CSV.
"""

from __future__ import annotations

from pathlib import Path
from typing import List, Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .sim.metrics import MetricsSeries  # noqa: E402


def _ticks(series: MetricsSeries, vm: int) -> List[int]:
    return series.column("tick", vm)


def plot_bandwidth(series: MetricsSeries, vm: int, path) -> None:
    t = _ticks(series, vm)
    fig, ax = plt.subplots(figsize=(8, 3.5))
    ax.plot(t, series.column("offered_pct", vm), lw=0.8, label="offered")
    ax.plot(t, series.column("admitted_pct", vm), lw=0.8, label="admitted")
    ax.plot(t, series.column("alpha", vm), lw=1.2, label="predicted (alpha)")
    ax.set_xlabel("tick (s)")
    ax.set_ylabel("bandwidth (% of capacity)")
    ax.set_ylim(0, 105)
    ax.legend(loc="upper left", fontsize=8)
    ax.set_title(f"VM {vm}: bandwidth usage")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_policing(series: MetricsSeries, vm: int, path) -> None:
    rows = series.for_vm(vm)
    t = [r.tick for r in rows]
    fig, ax = plt.subplots(figsize=(8, 3.5))
    ax.plot(t, [r.police_rate_pct for r in rows], lw=0.8, label="policed bytes (%)")
    ax.set_xlabel("tick (s)")
    ax.set_ylabel("police rate (%)")
    ax.set_ylim(0, 100)
    ax2 = ax.twinx()
    ax2.step(t, [r.clamp for r in rows], where="post", color="tab:red", lw=1.0, label="clamp")
    ax2.set_ylabel("clamp fraction")
    ax2.set_ylim(-0.05, 1.05)
    lines = ax.get_lines() + ax2.get_lines()
    ax.legend(lines, [ln.get_label() for ln in lines], loc="upper left", fontsize=8)
    ax.set_title(f"VM {vm}: policing")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_attacker_share(series: MetricsSeries, vm: int, path) -> None:
    t = _ticks(series, vm)
    fig, ax = plt.subplots(figsize=(8, 3.5))
    ax.plot(t, series.column("attacker_share_pct", vm), lw=0.8)
    ax.set_xlabel("tick (s)")
    ax.set_ylabel("attacker packets (% of admitted)")
    ax.set_ylim(0, 100)
    ax.set_title(f"VM {vm}: attacker share")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_figures(series: MetricsSeries, csv_path, vm: Optional[int] = None) -> List[Path]:
    """Render all three figures beside ``csv_path`` and return their paths.

    Without ``vm`` the VM with the highest peak offered load is drawn.
    """
    if not series.rows:
        return []
    if vm is None:
        vm = max(series.rows, key=lambda r: (r.offered_pct, -r.vm)).vm
    base = Path(csv_path)
    stem = base.with_suffix("")
    out = []
    for suffix, fn in (("bandwidth", plot_bandwidth), ("policing", plot_policing),
                       ("attackers", plot_attacker_share)):
        p = Path(f"{stem}_vm{vm}_{suffix}.png")
        fn(series, vm, p)
        out.append(p)
    return out
