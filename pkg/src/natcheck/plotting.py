"""Figure rendering for simulation traces and verification reports.

Figures are written next to the delimited output: per-slot price
trajectories on top, per-agent bids below, with the cycle start marked.
matplotlib is imported lazily so the CLI stays fast when no figure is
requested.
"""

from __future__ import annotations

from typing import Optional

from .gsp import SimTrace


def render_trace_figure(trace: SimTrace, path: str, title: Optional[str] = None) -> str:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    spec = trace.spec
    rounds = list(range(len(trace.states)))

    fig, (ax_price, ax_bid) = plt.subplots(2, 1, sharex=True, figsize=(7, 5))
    for s in range(1, spec.slots + 1):
        ys = [float(st.prices[s - 1]) for st in trace.states]
        ax_price.step(rounds, ys, where="post", label=f"slot {s}")
    ax_price.set_ylabel("price per click")
    ax_price.legend(loc="best", fontsize=8)

    for i, a in enumerate(spec.agents):
        ys = [float(b[i]) for b in trace.bids]
        ax_bid.step(rounds, ys, where="post", label=f"agent {a}")
    ax_bid.set_ylabel("bid")
    ax_bid.set_xlabel("round")
    ax_bid.legend(loc="best", fontsize=8)

    if 0 <= trace.cycle_start < len(rounds):
        for ax in (ax_price, ax_bid):
            ax.axvline(trace.cycle_start, color="gray", linestyle=":", linewidth=1)
        ax_price.annotate(
            f"cycle (len {trace.cycle_length})",
            xy=(trace.cycle_start, ax_price.get_ylim()[1]),
            fontsize=8, color="gray",
            verticalalignment="top",
        )

    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
