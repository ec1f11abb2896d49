"""Static figures for sweep, locality and node-count reports (PNG, Agg backend)."""

from __future__ import annotations

from typing import Mapping, Sequence

# PNG metadata carries no version or timestamp, so identical data gives identical bytes
_META = {"Software": None}


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, format="png", dpi=100, metadata=_META)
    fig.clf()
    _pyplot().close(fig)


def plot_sweep(rows: Sequence[Mapping], path) -> None:
    """Energy and EDP gain against the locality threshold, one line per policy."""
    plt = _pyplot()
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    policies = list(dict.fromkeys(r["policy"] for r in rows))
    for ax, key, title in ((axes[0], "energy_gain_pct", "energy gain"),
                           (axes[1], "edp_gain_pct", "EDP gain")):
        for pol in policies:
            pts = [(float(r["theta"]), float(r[key])) for r in rows if r["policy"] == pol]
            ax.plot([p[0] * 100 for p in pts], [p[1] for p in pts], marker="o", label=pol)
        ax.set_xlabel("locality threshold (%)")
        ax.set_ylabel("gain (%)")
        ax.set_title(title)
        ax.axhline(0, color="grey", linewidth=0.5)
    axes[0].legend(fontsize=8)
    _save(fig, path)


def plot_locality(static, dynamic, path) -> None:
    """Side-by-side static and dynamic shares per locality bin."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 3.5))
    labels = [f"{lo * 100:g}" if lo == hi else f"{lo * 100:g}-{hi * 100:g}" for lo, hi in static.bins]
    xs = range(len(labels))
    ax.bar([x - 0.2 for x in xs], static.shares, width=0.4, label="static")
    ax.bar([x + 0.2 for x in xs], dynamic.shares, width=0.4, label="dynamic")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels, rotation=45, fontsize=7)
    ax.set_xlabel("value locality (%)")
    ax.set_ylabel("share of instructions (%)")
    ax.set_title(f"{static.role} instructions")
    ax.legend(fontsize=8)
    _save(fig, path)


def plot_node_counts(hists: Mapping[str, Mapping[int, int]], path) -> None:
    """Slice node-count distribution per threshold ("none" is unpruned)."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 3.5))
    counts = sorted({n for h in hists.values() for n in h})
    width = 0.8 / max(len(hists), 1)
    for j, (label, h) in enumerate(hists.items()):
        xs = [i + j * width for i in range(len(counts))]
        ax.bar(xs, [h.get(n, 0) for n in counts], width=width, label=label)
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(counts))])
    ax.set_xticklabels([str(n) for n in counts])
    ax.set_xlabel("slice node count")
    ax.set_ylabel("slices")
    ax.legend(title="threshold", fontsize=7)
    _save(fig, path)
