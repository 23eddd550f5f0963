"""Compare the compiled and numpy kernel backends on a synthetic scene.

    python3 benchmarks/compare_backends.py [--frames N] [--repeat R] [--scene NAME]

Prints one line per (method, backend) pair plus the per-method speedup, and
checks that both backends give identical verdicts on every frame.
"""
import argparse
import sys
import tempfile

from mistguard import kernels
from mistguard.bench import bench
from mistguard.detect import DetectorConfig
from mistguard.evaluate import Mode, Pipeline, load_dataset, load_frames
from mistguard.synth import generate_sequence, get_scene


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scene", default="walkthrough-42")
    ap.add_argument("--frames", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    names = sorted(kernels.BACKENDS)
    print(f"backends available: {', '.join(names)}")
    with tempfile.TemporaryDirectory() as tmp:
        seq = generate_sequence(get_scene(args.scene), args.frames, args.seed, tmp)
        dataset = load_dataset(seq.manifest_path)
        frames = load_frames(dataset)

    config = DetectorConfig()
    for mode in Mode:
        verdicts = {}
        results = {}
        for name in names:
            with kernels.use_backend(name):
                pipe = Pipeline(config, mode)
                verdicts[name] = [pipe(f) for f in frames]
            results[name] = bench(frames, mode, args.repeat, config, name)
            print(results[name].line())
        if any(v != verdicts[names[0]] for v in verdicts.values()):
            print(f"{mode.value}: backends disagree", file=sys.stderr)
            return 1
        if len(results) == 2:
            fast, slow = results["cython"].stats, results["python"].stats
            print(f"{mode.value:<7} speedup mean {slow.mean_ms / fast.mean_ms:.2f}x "
                  f"p99 {slow.p99_ms / fast.p99_ms:.2f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
