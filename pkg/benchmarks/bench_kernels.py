"""Compare the compiled kernels with the pure-Python fallback and time a forward pass.

    python benchmarks/bench_kernels.py [--repeat 5] [--size 320 256] [--tile 32]
"""

import argparse
import json

from ffd import kernels
from ffd.backbone import BackboneConfig
from ffd.bench import forward_timing, kernel_timings
from ffd.head import LORConfig
from ffd.model import Detector, ModelConfig


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--size", type=int, nargs=2, default=(320, 256), metavar=("W", "H"))
    p.add_argument("--tile", type=int, default=32, choices=(16, 32, 64))
    p.add_argument("--json", action="store_true", help="print raw numbers as JSON")
    args = p.parse_args(argv)

    timings = kernel_timings(args.repeat)
    w, h = args.size
    cfg = ModelConfig(BackboneConfig(tile=args.tile, input_size=(h, w)),
                      LORConfig.for_tile(args.tile))
    fwd = forward_timing(Detector.build(cfg, 0), (h, w), args.repeat)
    if args.json:
        print(json.dumps({"kernels": timings, "forward_seconds": fwd,
                          "active_backend": kernels.BACKEND}, indent=2))
        return 0
    print(f"active backend: {kernels.BACKEND}")
    print(f"{'kernel':<20}{'python (ms)':>14}{'cython (ms)':>14}{'speedup':>10}")
    for name, row in timings.items():
        py = row["python"] * 1e3
        cy = row.get("cython")
        if cy is None:
            print(f"{name:<20}{py:>14.3f}{'n/a':>14}{'':>10}")
        else:
            print(f"{name:<20}{py:>14.3f}{cy * 1e3:>14.3f}{py / (cy * 1e3):>9.1f}x")
    print(f"forward {w}x{h} tile {args.tile}: {fwd * 1e3:.1f} ms ({1 / fwd:.1f} img/s)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
