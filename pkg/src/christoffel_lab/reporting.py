"""Rendering of experiment outputs: a text summary plus figures.

The compute commands write delimited node fields (CSV) and a JSON
report; this module turns a result directory into sphere maps, margin
charts and a coefficient spectrum, saved as PNG files next to the data.
"""

from __future__ import annotations

import csv
import json
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _load_field_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = np.array([[float(x) for x in row] for row in reader])
    return header, rows


def _sphere_map(ax, theta, phi, values, title):
    # nodes come on a structured colatitude x longitude grid
    th_u = np.unique(theta)
    ph_u = np.unique(phi)
    if th_u.size * ph_u.size == values.size:
        grid = values.reshape(th_u.size, ph_u.size)
        mesh = ax.pcolormesh(np.rad2deg(ph_u), np.rad2deg(th_u), grid,
                             shading="nearest", cmap="viridis")
    else:
        mesh = ax.scatter(np.rad2deg(phi), np.rad2deg(theta), c=values,
                          s=12, cmap="viridis")
    ax.set_xlabel("longitude [deg]")
    ax.set_ylabel("colatitude [deg]")
    ax.set_title(title)
    return mesh


def render_field_figure(csv_path, out_path):
    """One map per value column of a node-field CSV."""
    header, rows = _load_field_csv(csv_path)
    theta, phi = rows[:, 1], rows[:, 2]
    n_val = rows.shape[1] - 3
    fig, axes = plt.subplots(1, n_val, figsize=(5.2 * n_val, 4.0), squeeze=False)
    for j in range(n_val):
        mesh = _sphere_map(axes[0, j], theta, phi, rows[:, 3 + j], header[3 + j])
        fig.colorbar(mesh, ax=axes[0, j], shrink=0.85)
    fig.tight_layout()
    fig.savefig(out_path, dpi=140)
    plt.close(fig)


def render_margins_figure(verdicts, out_path):
    """Horizontal bar chart of condition margins, pass in blue, fail in red."""
    names = sorted(verdicts)
    margins = [verdicts[n]["margin"] for n in names]
    colors = ["tab:blue" if verdicts[n]["passed"] else "tab:red" for n in names]
    fig, ax = plt.subplots(figsize=(6.4, 0.7 * len(names) + 1.6))
    ax.barh(range(len(names)), margins, color=colors)
    ax.set_yticks(range(len(names)), names)
    ax.axvline(0.0, color="k", lw=0.8)
    ax.set_xlabel("worst margin")
    ax.set_title("condition margins")
    fig.tight_layout()
    fig.savefig(out_path, dpi=140)
    plt.close(fig)


def render_spectrum_figure(u_coeffs, out_path):
    """Largest coefficient magnitude per harmonic degree, log scale."""
    coeffs = np.asarray(u_coeffs, dtype=float)
    l_max = int(np.sqrt(coeffs.size)) - 1
    degree_max = [max(np.abs(coeffs[l * l:(l + 1) * (l + 1)]).max(), 1e-300)
                  for l in range(l_max + 1)]
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.semilogy(range(l_max + 1), degree_max, marker="o", ms=4)
    ax.set_xlabel("degree")
    ax.set_ylabel("max |coefficient|")
    ax.set_title("solution spectrum")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=140)
    plt.close(fig)


def summarize(report):
    """Human-readable lines for a report dictionary."""
    lines = [f"command: {report.get('command', '?')}", f"exit_code: {report.get('exit_code', '?')}"]
    if "error" in report:
        lines.append(f"error: {report['error']['type']}: {report['error']['message']}")
    solve = report.get("solve")
    if solve:
        lines.append(f"l_max: {solve['l_max']}  unknowns: {solve['n_unknowns']}"
                     f"  rank: {solve['system_rank']}")
        lines.append(f"residual_l2: {solve['residual_l2']:.3e}"
                     f"  (relative {solve['relative_residual']:.3e})")
        lines.append(f"ellipticity_margin: {solve['ellipticity_margin']:.6f}")
        lines.append(f"w_min_eig: {solve['w_min_eig']:.6f}"
                     f"  rank histogram: {solve['rank_histogram']}")
        moments = ", ".join(f"{m:.3e}" for m in solve["compat_moments"])
        lines.append(f"compat_moments: [{moments}]")
    for name, v in sorted(report.get("condition_verdicts", {}).items()):
        state = "pass" if v["passed"] else "FAIL"
        lines.append(f"check {name}: {state}  margin {v['margin']:.6g}"
                     f"  samples {v['samples']}")
    for key in ("moments", "pairing", "roundtrip"):
        if key in report:
            lines.append(f"{key}: {json.dumps(report[key], sort_keys=True)}")
    return lines


def render_report(result_dir, out_dir=None):
    """Render summary.txt and figures for every artifact in result_dir."""
    out_dir = out_dir or result_dir
    os.makedirs(out_dir, exist_ok=True)
    report_path = os.path.join(result_dir, "report.json")
    written = []
    report = {}
    if os.path.exists(report_path):
        with open(report_path) as fh:
            report = json.load(fh)
        summary = os.path.join(out_dir, "summary.txt")
        with open(summary, "w") as fh:
            fh.write("\n".join(summarize(report)) + "\n")
        written.append(summary)
        verdicts = report.get("condition_verdicts", {})
        if verdicts:
            path = os.path.join(out_dir, "fig_margins.png")
            render_margins_figure(verdicts, path)
            written.append(path)
        if report.get("solve", {}).get("u_coeffs"):
            path = os.path.join(out_dir, "fig_spectrum.png")
            render_spectrum_figure(report["solve"]["u_coeffs"], path)
            written.append(path)
    for name in sorted(os.listdir(result_dir)):
        if name.endswith(".csv"):
            path = os.path.join(out_dir, f"fig_{name[:-4]}.png")
            render_field_figure(os.path.join(result_dir, name), path)
            written.append(path)
    return written
