"""Survey of the free calibration knobs of the microscopic tier.

Prints the minimum noise (dB) at B_x = 100 mG, 6 mW, over a grid of analysis
frequency and model detuning (from the F=2 -> F'=2 line) for a few optical
depths. This is the table the defaults (3 MHz analysis frequency, Doppler
resonant fraction at 74 C) were chosen from.

    python3 scripts/calibration_survey.py [--slices N]
"""

import argparse

import numpy as np

from psrlab.atoms import DOPPLER_FRACTION_74C, TWO_PI, DriveField, EnsembleConfig, MagneticField
from psrlab.errors import PsrLabError
from psrlab.propagation import MediumConfig, propagate_cell


def min_db(frac, det_mhz, f_mhz, n):
    cfg = MediumConfig.default(
        ensemble=EnsembleConfig(resonant_fraction=frac),
        drive=DriveField(power=6e-3, detuning=TWO_PI * det_mhz * 1e6),
        b=MagneticField(0.1, 0.0),
        omega=TWO_PI * f_mhz * 1e6,
    )
    try:
        return 10 * np.log10(propagate_cell(None, cfg, n).min_snu)
    except PsrLabError:
        return float("nan")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--slices", type=int, default=20)
    args = ap.parse_args()
    freqs = [0.3, 1, 3, 10]
    print("OD      det_MHz " + " ".join(f"{f:>7g}MHz" for f in freqs))
    for frac in (0.2 * DOPPLER_FRACTION_74C, DOPPLER_FRACTION_74C, 5 * DOPPLER_FRACTION_74C):
        od = EnsembleConfig(resonant_fraction=frac).optical_depth
        for det in (-14.5, -30, -100, -300):
            row = [min_db(frac, det, f, args.slices) for f in freqs]
            print(f"{od:6.0f} {det:8g} " + " ".join(f"{v:10.3f}" for v in row), flush=True)


if __name__ == "__main__":
    main()
