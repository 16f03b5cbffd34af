"""Figure rendering for experiment results.

Perturbation sweeps plot the measured distance and each bound against the
perturbation size on log-log axes, one panel per instance parameter; the
per-iterate error-bound runs plot the same quantities against the SCF
iterate on a semilog axis.  Files land next to the CSV.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["render_figure"]

_SERIES = (
    ("chi", "o-", "measured distance"),
    ("xi_star", "s--", "closed-form bound"),
    ("tau_star", "^--", "root bound"),
    ("gamma_star", "v:", "first-order bound"),
)


def _panels(rows):
    """Group rows by the instance parameter (h or beta), preserving order."""
    keys = []
    groups = {}
    for row in rows:
        key = row.h if row.h is not None else row.beta
        if key not in groups:
            keys.append(key)
            groups[key] = []
        groups[key].append(row)
    return keys, groups


def _collect(rows, x_attr, y_attr):
    xs, ys = [], []
    for row in rows:
        x, y = getattr(row, x_attr), getattr(row, y_attr)
        if x is not None and y is not None and y > 0:
            xs.append(x)
            ys.append(y)
    return np.asarray(xs), np.asarray(ys)


def render_figure(spec, rows, csv_path) -> str:
    """Render the figure for one experiment run; returns the PNG path."""
    keys, groups = _panels(rows)
    label = "h" if rows and rows[0].h is not None else "beta"
    sweep_like = spec.kind.endswith("perturb")
    x_attr = "delta" if sweep_like else "l"

    ncols = len(keys)
    fig, axes = plt.subplots(
        1, ncols, figsize=(4.2 * ncols, 3.6), squeeze=False, sharey=False
    )
    for ax, key in zip(axes[0], keys):
        panel = groups[key]
        for attr, style, name in _SERIES:
            xs, ys = _collect(panel, x_attr, attr)
            if xs.size == 0:
                continue
            if sweep_like:
                ax.loglog(xs, ys, style, label=name, markersize=4)
            else:
                ax.semilogy(xs, ys, style, label=name, markersize=4)
        if sweep_like:
            ax.set_xlabel("perturbation size")
        else:
            ax.set_xlabel("SCF iterate")
        ax.set_ylabel("subspace distance")
        ax.set_title(spec.kind if key is None else f"{label} = {key:g}")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(fontsize=8)
    fig.tight_layout()
    out = str(csv_path)
    out = out[: -len(".csv")] + ".png" if out.endswith(".csv") else out + ".png"
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out
