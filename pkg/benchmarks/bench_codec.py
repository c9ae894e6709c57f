#!/usr/bin/env python3
"""Head-to-head benchmark of the compiled codec kernels vs the fallback.

Three workloads, each timed per backend (best of --repeats):

  crc        CRC-16 over one large contiguous buffer
  scan/clean frame scanning over a well-formed stream
  scan/dirty frame scanning over a stream salted with garbage and bit rot

Run after installing the package:  python3 benchmarks/bench_codec.py
"""

import argparse
import random
import time

from gripstream.core import Side
from gripstream.protocol import FRAME_SIZE, Frame, encode_frame
from gripstream.protocol import _codec_py


def load_backends():
    backends = []
    try:
        from gripstream.protocol import _codec

        backends.append(("compiled", _codec))
    except ImportError:
        print("note: compiled kernel unavailable, benchmarking the fallback alone")
    backends.append(("pure-python", _codec_py))
    return backends


def random_frames(rng: random.Random, count: int) -> bytes:
    out = bytearray()
    for k in range(count):
        frame = Frame(
            glove=Side.RIGHT,
            seq=k & 0xFFFF,
            timestamp_ms=20 * k,
            battery_mv=4200,
            voltages_mv=tuple(rng.randrange(0, 3300) for _ in range(12)),
        )
        out += encode_frame(frame)
    return bytes(out)


def salt_stream(clean: bytes, rng: random.Random) -> bytes:
    """Interleave garbage runs and flip bytes so resync paths stay hot."""
    out = bytearray()
    for i in range(0, len(clean), FRAME_SIZE * 8):
        out += clean[i : i + FRAME_SIZE * 8]
        out += bytes(rng.randrange(0, 256) for _ in range(rng.randrange(3, 40)))
    for _ in range(len(out) // 400):
        out[rng.randrange(0, len(out))] ^= 0xFF
    return bytes(out)


def best_time(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--frames", type=int, default=50_000,
                        help="frames per scanning workload (default 50000)")
    parser.add_argument("--crc-mib", type=float, default=8.0,
                        help="CRC buffer size in MiB (default 8)")
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    rng = random.Random(2024)
    crc_buf = bytes(rng.randrange(0, 256) for _ in range(int(args.crc_mib * 2**20)))
    clean = random_frames(rng, args.frames)
    dirty = salt_stream(clean, rng)
    print(f"workloads: crc {len(crc_buf) / 2**20:.1f} MiB, "
          f"clean {len(clean) / 2**20:.2f} MiB ({args.frames} frames), "
          f"dirty {len(dirty) / 2**20:.2f} MiB")

    results: dict[str, dict[str, float]] = {}
    for name, kernel in load_backends():
        crc_s = best_time(lambda: kernel.crc16(crc_buf), args.repeats)
        clean_s = best_time(lambda: kernel.scan_indices(clean), args.repeats)
        dirty_s = best_time(lambda: kernel.scan_indices(dirty), args.repeats)
        items, _ = kernel.scan_indices(clean)
        assert len(items) == args.frames, "scan disagrees with the workload"
        results[name] = {
            "crc MB/s": len(crc_buf) / 2**20 / crc_s,
            "clean kframes/s": args.frames / 1e3 / clean_s,
            "dirty MB/s": len(dirty) / 2**20 / dirty_s,
        }

    columns = ["crc MB/s", "clean kframes/s", "dirty MB/s"]
    print(f"\n{'backend':<14}" + "".join(f"{c:>18}" for c in columns))
    for name, row in results.items():
        print(f"{name:<14}" + "".join(f"{row[c]:>18.1f}" for c in columns))
    if len(results) == 2:
        fast, slow = results["compiled"], results["pure-python"]
        print(f"{'speedup':<14}"
              + "".join(f"{fast[c] / slow[c]:>17.1f}x" for c in columns))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
