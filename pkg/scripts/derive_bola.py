"""Derive the default BOLA control weight and show where each rung takes over.

Usage: python scripts/derive_bola.py [buffer_top_s] [gamma_p]
"""

import sys

import numpy as np

from satabr.abr import AbrInputs, bola_select, bola_v_for_top
from satabr.player import DEFAULT_LADDER_KBPS


def main() -> None:
    top = float(sys.argv[1]) if len(sys.argv) > 1 else 2.4999
    gamma_p = float(sys.argv[2]) if len(sys.argv) > 2 else 1.4
    V = bola_v_for_top(top, gamma_p)
    print(f"V = {V!r} (top rung from {top} s of buffer, gamma_p = {gamma_p})")
    prev = None
    for buf in np.arange(0.0, 6.0, 0.01):
        x = AbrInputs(float(buf), 1.0, (1.0,), DEFAULT_LADDER_KBPS[0])
        b = bola_select(x, V, gamma_p)
        if b != prev:
            print(f"  buffer >= {buf:.2f} s -> {b:g} kbps")
            prev = b
    q_cut = V * (np.log(DEFAULT_LADDER_KBPS[-1] / DEFAULT_LADDER_KBPS[0]) + gamma_p * 0.5)
    print(f"no download pressure above {q_cut * 0.5:.3f} s of buffer")


if __name__ == "__main__":
    main()
