"""Static figures for magnitude reports and the phase-correction line."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .model import wavelength_mm

# fixed salt keeps svg element ids identical between runs
plt.rcParams["svg.hashsalt"] = "thz-reflection"

MEASURED_STYLE = dict(marker="o", linestyle="none", markersize=5, color="C3")
FLOATING_STYLE = dict(linestyle="--", linewidth=1.2, color="0.4")
COMBINED_STYLE = dict(linestyle="-", linewidth=1.5, color="C0")


def _finish(fig, path) -> None:
    fig.tight_layout()
    fmt = str(path).rsplit(".", 1)[-1].lower()
    # svg output stays byte-stable across runs without the date stamp
    metadata = {"Date": None} if fmt == "svg" else None
    fig.savefig(path, format=fmt if fmt in ("svg", "png", "pdf") else "svg", metadata=metadata)
    plt.close(fig)


def plot_magnitude_report(path, distances, measured, floating, combined, title: str = "") -> None:
    """Measured path loss with the line-only and standing-wave model curves."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(distances, measured, label="measured", **MEASURED_STYLE)
    ax.plot(distances, floating, label="floating intercept", **FLOATING_STYLE)
    ax.plot(distances, combined, label="with standing wave", **COMBINED_STYLE)
    ax.set_xlabel("distance (cm)")
    ax.set_ylabel("path loss (dB)")
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(frameon=False)
    _finish(fig, path)


def plot_delta_d_line(path, samples, pcm) -> None:
    """delta_d * lambda per sample, per-frequency means, and the fitted line."""
    f = np.array([s.frequency for s in samples])
    product = np.array([s.delta_d for s in samples]) * 10.0 * wavelength_mm(f)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(f, product, "o", color="C1", alpha=0.6, label="per distance")
    centers = np.unique(f)
    means = [product[f == c].mean() for c in centers]
    ax.plot(centers, means, "o", color="k", label="mean")
    span = np.linspace(centers.min() - 10.0, centers.max() + 10.0, 50)
    ax.plot(span, pcm.product_mm2(span), "-", color="C0",
            label=f"{pcm.slope:.3f} f + {pcm.intercept:.2f}")
    ax.set_xlabel("frequency (GHz)")
    ax.set_ylabel(r"$\Delta d \cdot \lambda$ (mm$^2$)")
    ax.grid(True, alpha=0.3)
    ax.legend(frameon=False)
    _finish(fig, path)
