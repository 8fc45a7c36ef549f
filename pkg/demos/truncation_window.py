"""Quantify what dropping a mid-trajectory guidance term costs.

A contracting flow is integrated backward from t=1 with an extra alignment
field switched on inside a time window. The merged shortcut replaces that
window with a single midpoint correction; its gap against the full reference
solution scales linearly in both the field's fluctuation amplitude and the
window width, and vanishes when the field is silent.
"""

import numpy as np

from clvr import OdeSetup, truncation_gap, variation_sweep, width_sweep

BASE = dict(
    contraction_rate=1e-6,
    x1=(1.0, 0.5),
    direction=(0.0, 1.0),
    window=(0.4, 0.6),
    level=0.0,
    steps=20_000,
)
AMPLITUDES = (0.5, 0.25, 0.125, 0.0625, 0.05)
WIDTHS = (0.2, 0.1, 0.05)


def main():
    silent = OdeSetup(variation=0.0, **BASE)
    print(f"silent field: gap = {truncation_gap(silent):.3e}\n")

    setup = OdeSetup(variation=0.5, **BASE)
    gaps = variation_sweep(setup, AMPLITUDES)
    print(f"{'amplitude':>10} {'gap':>12}")
    for eps, gap in zip(AMPLITUDES, gaps):
        print(f"{eps:>10.4f} {gap:>12.4e}")
    slope, _ = np.polyfit(np.log(AMPLITUDES), np.log(gaps), 1)
    print(f"amplitude slope: {slope:.4f}\n")

    gaps = width_sweep(setup, WIDTHS)
    print(f"{'width':>10} {'gap':>12}")
    for width, gap in zip(WIDTHS, gaps):
        print(f"{width:>10.4f} {gap:>12.4e}")
    slope, _ = np.polyfit(np.log(WIDTHS), np.log(gaps), 1)
    print(f"width slope: {slope:.4f}")


if __name__ == "__main__":
    main()
