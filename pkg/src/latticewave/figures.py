"""Optional PNG rendering of experiment plot series (headless backend)."""
from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_STYLE = {
    "final_gaps": dict(xlabel="x", ylabel="gap u", logx=False, logy=False, marker=None),
    "H1_error": dict(xlabel="N", ylabel="H1 error", logx=True, logy=True, marker="o"),
    "cone": dict(xlabel="N", ylabel="log10 N sup gap difference", logx=True, logy=False, marker="o"),
    "blowup": dict(xlabel="N", ylabel="value", logx=True, logy=True, marker="o"),
}


def render(plots: dict, outdir: str) -> list[str]:
    """Write one PNG per plot; returns the file names."""
    written = []
    for name in sorted(plots):
        st = _STYLE.get(name, dict(xlabel="", ylabel="", logx=False, logy=False, marker=None))
        fig, ax = plt.subplots(figsize=(7, 4))
        for label, x, y in plots[name]:
            ax.plot(x, y, label=label, marker=st["marker"], lw=1)
        if st["logx"]:
            ax.set_xscale("log")
        if st["logy"]:
            ax.set_yscale("log")
        ax.set_xlabel(st["xlabel"])
        ax.set_ylabel(st["ylabel"])
        ax.set_title(name.replace("_", " "))
        ax.legend(fontsize=8)
        fig.tight_layout()
        fn = f"{name}.png"
        fig.savefig(os.path.join(outdir, fn), dpi=110)
        plt.close(fig)
        written.append(fn)
    return written
