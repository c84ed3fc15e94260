"""Turn a directory of masked frames into a smoothed ΔE trajectory and its fit.

    python3 scripts/frames_to_trajectory.py IMAGES MASKS [--interval 60] [--cutoff 15]

Prints ``time,raw,smoothed,fit`` CSV rows and the fitted coefficients.
"""

import argparse
import sys

from colortraj import basis, colorspace, signal


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("images", help="directory of .ppm frames")
    ap.add_argument("masks", help="directory of .pgm masks with matching stems")
    ap.add_argument("--interval", type=float, help="seconds between frames")
    ap.add_argument("--cutoff", type=int, default=signal.DEFAULT_CUTOFF)
    args = ap.parse_args()
    frames = colorspace.load_frames(args.images, args.masks, args.interval)
    raw = colorspace.trajectory_delta_e(frames)
    smoothed = raw.with_values(signal.smooth_lowpass(raw.values, args.cutoff))
    beta = basis.fit_least_squares(smoothed)
    fit = basis.reconstruct(beta, smoothed.times)
    out = sys.stdout
    out.write("time,raw,smoothed,fit\n")
    for row in zip(raw.times, raw.values, smoothed.values, fit.values):
        out.write(",".join(f"{v:.6g}" for v in row) + "\n")
    print("beta:", " ".join(f"{b:.6g}" for b in beta), file=sys.stderr)


if __name__ == "__main__":
    main()
