"""Report figures for a finished run, written next to the CSV outputs."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .postprocess import PolishReport  # noqa: E402
from .vqa import RunHistory  # noqa: E402

STYLE = {
    "figure.figsize": (9.0, 3.6),
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 120,
}
# PNG metadata defaults include the matplotlib version; drop it so reruns are byte-identical
_METADATA = {"Software": None}


def _gap(values, optimum):
    """Relative distance above the optimum, or raw values when it is unknown."""
    values = np.asarray(values, dtype=float)
    if optimum is None:
        return values
    return (values - optimum) / max(abs(optimum), 1e-12)


def _moving_average(values: np.ndarray, window: int) -> np.ndarray:
    window = max(1, min(window, values.size))
    kernel = np.ones(window) / window
    padded = np.concatenate([np.full(window - 1, values[0]), values])
    return np.convolve(padded, kernel, mode="valid")


def plot_convergence(history: RunHistory, path, optimum: float | None = None) -> Path:
    """CVaR per iteration (left) and best sampled cost per iteration (right), epochs dotted."""
    it = np.array([r.iteration for r in history.records])
    cvar = _gap([r.cvar for r in history.records], optimum)
    best = _gap([r.best_cost for r in history.records], optimum)
    ends = history.epoch_ends()
    ylabel = "relative gap" if optimum is not None else "cost"
    linthresh = 1e-4 if optimum is not None else 1.0

    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, constrained_layout=True)
        ax1.plot(it, cvar, lw=0.8, color="C0")
        ax1.plot(ends, cvar[ends], "o", ms=3, color="C3", label="epoch end")
        ax1.set_ylabel(f"CVaR ({ylabel})")

        smooth = _moving_average(best, max(1, history.n_params // 2))
        ax2.plot(it, best, lw=0.5, color="C0", alpha=0.4, label="best in iteration")
        ax2.plot(it, smooth, lw=1.2, color="C1", label="moving average")
        ax2.plot(ends, smooth[ends], "o", ms=3, color="C3", label="epoch end")
        ax2.set_ylabel(f"best sampled ({ylabel})")
        for ax in (ax1, ax2):
            ax.set_yscale("symlog", linthresh=linthresh)
            ax.set_xlabel("iteration")
            ax.legend(frameon=False)
        fig.savefig(path, metadata=_METADATA)
        plt.close(fig)
    return Path(path)


def plot_distributions(history: RunHistory, polished: PolishReport, path,
                       optimum: float | None = None, last_k: int | None = 20) -> Path:
    """Sampled cost distribution at iteration 0 vs the last iterations, plus polished costs."""
    first = history.records[0].samples
    recent = [s for _, s in history.samples(last_k)]
    series = []
    if first is not None and first.indices.size:
        series.append(("initial", first.costs, first.counts))
    if recent:
        series.append(("trained (raw)", np.concatenate([s.costs for s in recent]),
                       np.concatenate([s.counts for s in recent])))
    if polished.results:
        costs = np.array([r.output_cost for r in polished.results])
        series.append(("trained + local search", costs, np.ones(costs.size)))

    linthresh = 1e-4 if optimum is not None else 1.0
    values = np.concatenate([_gap(c, optimum) for _, c, _ in series]) if series else np.zeros(1)
    top = max(float(values.max()), linthresh * 10)
    # one linear bin at the optimum, log-spaced bins above it
    bins = np.concatenate([[0.0], np.geomspace(linthresh, top * 1.0001, 60)])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(constrained_layout=True)
        for label, costs, weights in series:
            weights = np.asarray(weights, dtype=float)
            ax.hist(np.clip(_gap(costs, optimum), 0.0, None), bins=bins,
                    weights=weights / weights.sum(), histtype="step", lw=1.2, label=label)
        if optimum is not None:
            ax.axvline(0.0, color="r", ls="--", lw=0.8, label="optimum")
        ax.set_xscale("symlog", linthresh=linthresh)
        ax.set_yscale("log")
        ax.set_xlabel("relative gap" if optimum is not None else "cost")
        ax.set_ylabel("probability")
        ax.legend(frameon=False)
        fig.savefig(path, metadata=_METADATA)
        plt.close(fig)
    return Path(path)
