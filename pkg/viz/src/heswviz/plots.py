"""The standard figure set, one function per figure kind.

Everything takes file paths in and writes an image out; no solver state
is ever recomputed here beyond plotting transforms.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  backend must be set first

from . import formats  # noqa: E402

KINDS = ("surface", "drift", "spectrum", "strichartz")


@dataclass
class PlotJob:
    """One figure request: where to read, what to draw, where to write."""

    inputs: tuple
    kind: str
    out_image: str
    options: dict = field(default_factory=dict)

    def run(self) -> Path:
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}")
        fn = {"surface": plot_surface, "drift": plot_diagnostics,
              "spectrum": plot_spectrum, "strichartz": plot_strichartz}
        return fn[self.kind](*self.inputs, self.out_image, **self.options)


def _save(fig, out_image, dpi):
    out = Path(out_image)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=dpi)
    plt.close(fig)
    return out


def plot_surface(snapshot_dir, out_image, *, cmap="RdBu_r", dpi=150,
                 title="surface elevation"):
    """Waterfall heatmap of the elevation over (t, x)."""
    times, etas, _ = formats.load_run(snapshot_dir)
    n = etas.shape[1]
    x = np.arange(n) / n  # period-normalized axis; length isn't in the files
    fig, ax = plt.subplots(figsize=(7, 4))
    if times.size == 1:
        ax.plot(x, etas[0])
        ax.set_ylabel("elevation")
    else:
        span = np.max(np.abs(etas))
        kw = {"vmin": -span, "vmax": span} if span > 0 else {}
        mesh = ax.pcolormesh(x, times, etas, cmap=cmap, shading="nearest", **kw)
        fig.colorbar(mesh, ax=ax, label="elevation")
        ax.set_ylabel("t")
    ax.set_xlabel("x / L")
    ax.set_title(title)
    return _save(fig, out_image, dpi)


def plot_diagnostics(csv_path, out_image, *, dpi=150,
                     title="energy conservation"):
    """Relative energy drift on a log axis (energy itself if it starts at 0)."""
    table = formats.read_diagnostics(csv_path)
    t, energy = table["t"], table["energy"]
    fig, ax = plt.subplots(figsize=(7, 4))
    if energy[0] > 0:
        drift = np.abs(energy - energy[0]) / energy[0]
        ax.semilogy(t, np.maximum(drift, 1e-18), marker=".")
        ax.set_ylabel("|E(t) - E(0)| / E(0)")
    else:
        ax.plot(t, energy, marker=".")
        ax.set_ylabel("E(t)")
    ax.set_xlabel("t")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, out_image, dpi)


def plot_spectrum(snapshot_dir, out_image, *, cmap="viridis", dpi=150,
                  floor=1e-18, title="elevation spectrum"):
    """log10 magnitude of the elevation modes over time."""
    times, etas, _ = formats.load_run(snapshot_dir)
    n = etas.shape[1]
    mags = np.abs(np.fft.rfft(etas, axis=1)) / n
    data = np.log10(np.maximum(mags, floor))
    k = np.arange(mags.shape[1])
    fig, ax = plt.subplots(figsize=(7, 4))
    if times.size == 1:
        ax.plot(k, data[0], marker=".")
        ax.set_ylabel("log10 |mode|")
    else:
        mesh = ax.pcolormesh(k, times, data, cmap=cmap, shading="nearest")
        fig.colorbar(mesh, ax=ax, label="log10 |mode|")
        ax.set_ylabel("t")
    ax.set_xlabel("wavenumber index")
    ax.set_title(title)
    return _save(fig, out_image, dpi)


def plot_strichartz(csv_path, out_image, *, dpi=150,
                    title="dispersive norm growth"):
    """Running (int_0^t y0^4)^(1/4) from the diagnostics series."""
    table = formats.read_diagnostics(csv_path)
    t, y0 = table["t"], table["y0_U"]
    fourth = y0 ** 4
    cum = np.concatenate(
        [[0.0], np.cumsum(0.5 * (fourth[1:] + fourth[:-1]) * np.diff(t))])
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(t, cum ** 0.25, marker=".")
    ax.set_xlabel("t")
    ax.set_ylabel("(int y0^4 ds)^(1/4)")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    return _save(fig, out_image, dpi)
