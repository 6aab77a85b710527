"""Tune the noisy predictor's false-alarm rate to the target window accuracy.

Usage: python scripts/calibrate_predictor.py [hours] [seed]
"""

import sys

from satabr.predictor import NoisyPredictorParams, calibrate_false_alarm_rate


def main() -> None:
    hours = float(sys.argv[1]) if len(sys.argv) > 1 else 10_000.0
    seed = int(sys.argv[2]) if len(sys.argv) > 2 else 0
    params = NoisyPredictorParams()
    rate, acc = calibrate_false_alarm_rate(params, hours=hours, seed=seed)
    print(f"recall {params.recall}, target accuracy {params.window_accuracy_target}")
    print(f"false_alarm_rate_per_s = {rate:.4g}  (accuracy {acc:.5f} over {hours:g} h, seed {seed})")


if __name__ == "__main__":
    main()
