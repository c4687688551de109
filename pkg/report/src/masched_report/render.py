"""Chart and summary rendering.

One loads chart per observability mode: a vertical rectangle per
(instance, policy) spanning the estimated minimum to the estimated
maximum, over a gray horizontal reference bar at the uniform baseline.
Inverted pairs (minimum estimated above maximum, which learning runs can
produce) are drawn as empty rectangles with dashed outlines. A scatter
chart relates extracted strategy-table sizes to learned decision-tree
sizes. All outputs are byte-deterministic for a given CSV: file names are
fixed, SVG ids are salted with a constant, and no timestamps are embedded.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

from .frame import OverlapEntry, ResultsFrame, overlap_report  # noqa: E402

plt.rcParams["svg.hashsalt"] = "masched-report"

_RECT_WIDTH = 0.22
_COLORS = ("#2a7fb8", "#e06b2d", "#4daf4a", "#986ab8", "#b8a232", "#6b8290")


@dataclass
class RenderResult:
    files: list[str] = field(default_factory=list)
    chart_of_row: dict = field(default_factory=dict)  # row -> chart file name
    dashed_groups: list[tuple] = field(default_factory=list)
    overlap: list[OverlapEntry] = field(default_factory=list)


def render(frame: ResultsFrame, out_dir: str) -> RenderResult:
    os.makedirs(out_dir, exist_ok=True)
    result = RenderResult(overlap=overlap_report(frame))
    for mode in frame.modes:
        name = f"loads_{mode}.svg"
        _render_loads(frame, mode, os.path.join(out_dir, name), result, name)
        result.files.append(name)
    _render_scatter(frame, os.path.join(out_dir, "strategy_vs_tree.svg"))
    result.files.append("strategy_vs_tree.svg")
    summary = _render_summary(frame, result.overlap)
    summary_path = os.path.join(out_dir, "summary.md")
    with open(summary_path, "w") as handle:
        handle.write(summary)
    result.files.append("summary.md")
    return result


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _render_loads(frame: ResultsFrame, mode: str, path: str,
                  result: RenderResult, chart_name: str):
    instances = frame.instances(mode)
    policies = frame.policies(mode)
    fig, ax = plt.subplots(figsize=(1.8 + 1.3 * len(instances), 3.6))
    centers = {inst: i for i, inst in enumerate(instances)}
    half_span = max(0.3, _RECT_WIDTH * max(1, len(policies)) / 2 + 0.08)
    for instance in instances:
        uniform = frame.uniform(instance, mode)
        if uniform is not None:
            x = centers[instance]
            ax.fill_between(
                [x - half_span, x + half_span],
                uniform.low, uniform.high,
                color="0.82", zorder=1,
            )
            ax.hlines(uniform.mean, x - half_span, x + half_span,
                      color="0.45", linewidth=1.4, zorder=2)
            result.chart_of_row[id(uniform)] = chart_name
    for p_idx, policy in enumerate(policies):
        color = _COLORS[p_idx % len(_COLORS)]
        offset = (p_idx - (len(policies) - 1) / 2) * _RECT_WIDTH
        for instance in instances:
            group = frame.group(instance, mode, policy)
            if not group:
                continue
            for row in group.values():
                result.chart_of_row[id(row)] = chart_name
            top = group.get("max")
            bottom = group.get("min")
            if top is not None and bottom is not None:
                lo, hi = bottom.mean, top.mean
            else:
                only = top or bottom or next(iter(group.values()))
                lo, hi = only.low, only.high
            inverted = lo > hi
            x = centers[instance] + offset - _RECT_WIDTH / 2
            y0, y1 = min(lo, hi), max(lo, hi)
            if inverted:
                patch = Rectangle(
                    (x, y0), _RECT_WIDTH, y1 - y0,
                    facecolor="none", edgecolor=color,
                    linestyle="--", linewidth=1.3, zorder=3,
                )
                result.dashed_groups.append((instance, mode, policy))
            else:
                patch = Rectangle(
                    (x, y0), _RECT_WIDTH, max(y1 - y0, 1e-9),
                    facecolor=color, edgecolor=color, alpha=0.85, zorder=3,
                )
            ax.add_patch(patch)
    handles = [
        Rectangle((0, 0), 1, 1, facecolor=_COLORS[i % len(_COLORS)])
        for i in range(len(policies))
    ]
    labels = list(policies)
    handles.append(Rectangle((0, 0), 1, 1, facecolor="0.82"))
    labels.append("uniform")
    ax.set_xticks(range(len(instances)))
    ax.set_xticklabels(instances)
    ax.set_xlabel("instance")
    ax.set_ylabel("expected accumulated load")
    ax.set_title(f"minimum / maximum loads ({mode})")
    ax.legend(handles, labels, fontsize=8, loc="best")
    ax.margins(x=0.08)
    ax.autoscale_view()
    _save(fig, path)


def _render_scatter(frame: ResultsFrame, path: str):
    fig, ax = plt.subplots(figsize=(4.6, 3.6))
    seen_policy = []
    for row in frame.rows:
        if row.table_rows is None or row.tree_nodes is None:
            continue
        if row.policy not in seen_policy:
            seen_policy.append(row.policy)
        color = _COLORS[seen_policy.index(row.policy) % len(_COLORS)]
        marker = "o" if row.mode == "po" else "s"
        ax.scatter(row.table_rows, row.tree_nodes, s=26, marker=marker,
                   facecolor=color, edgecolor="none", alpha=0.8,
                   label=f"{row.policy}/{row.mode}")
    handles, labels = ax.get_legend_handles_labels()
    unique = dict(zip(labels, handles))
    if unique:
        ax.legend(unique.values(), unique.keys(), fontsize=7, loc="best")
    lims = ax.get_xlim()
    ax.plot(lims, lims, color="0.8", linewidth=0.8, zorder=0)
    ax.set_xlabel("strategy choices (table rows)")
    ax.set_ylabel("decision tree nodes")
    ax.set_title("strategy size vs. tree size")
    _save(fig, path)


def _flag(value) -> str:
    if value is None:
        return "-"
    return "yes" if value else "no"


def _interval(row) -> str:
    if row is None:
        return "-"
    return f"{row.mean:.4g} ± {row.halfwidth:.2g}"


def _render_summary(frame: ResultsFrame, overlap: list[OverlapEntry]) -> str:
    lines = [
        "# Results summary",
        "",
        "| instance | mode | policy | max | min | uniform | "
        "max CI above uniform | min CI below uniform | inverted |",
        "|---|---|---|---|---|---|---|---|---|",
    ]
    for entry in overlap:
        group = frame.group(entry.instance, entry.mode, entry.policy)
        uniform = frame.uniform(entry.instance, entry.mode)
        lines.append(
            f"| {entry.instance} | {entry.mode} | {entry.policy} "
            f"| {_interval(group.get('max'))} | {_interval(group.get('min'))} "
            f"| {_interval(uniform)} | {_flag(entry.max_above_uniform)} "
            f"| {_flag(entry.min_below_uniform)} "
            f"| {'yes' if entry.inverted else 'no'} |"
        )
    lines.append("")
    return "\n".join(lines)
