"""Fit the default outage-duration law and print it as a ``NigParams`` literal.

Usage: python scripts/calibrate_nig.py [targets.csv]

Without an argument the built-in quantile anchors are used.
"""

import sys

from satabr.outage_model import DURATION_QUANTILE_TARGETS, calibrate_nig, nig_cdf, read_targets_csv


def main() -> None:
    targets = read_targets_csv(sys.argv[1]) if len(sys.argv) > 1 else list(DURATION_QUANTILE_TARGETS)
    params, residual = calibrate_nig(targets)
    print("DEFAULT_NIG = NigParams(")
    for name in ("tail", "asym", "loc", "scale"):
        print(f"    {name}={getattr(params, name)!r},")
    print(")")
    print(f"# residual {residual:.2e}")
    for x, p in targets:
        print(f"# P(d < {x:g}) target {p:.4f} fitted {nig_cdf(x, params, positive=True):.6f}")


if __name__ == "__main__":
    main()
