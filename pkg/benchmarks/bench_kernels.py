"""Compare the compiled and numpy minibatch kernels.

    python3 benchmarks/bench_kernels.py [--repeats 200] [--epochs 20]

Part 1 times a single ``ncod_batch`` call (NCOD+ path: soft labels, jitter
view, both regularizers) for a few network and batch sizes. Part 2 times a
complete NCOD+ training run on the 4-class synthetic benchmark. Timings are
the best of several repeats.
"""

import argparse
import timeit

import numpy as np

from ncodlab import kernels
from ncodlab.data import SynthSpec, split, standardize, synth_clusters
from ncodlab.model import Gradients, init_model
from ncodlab.noise import inject_symmetric
from ncodlab.numerics import Rng, l2_normalize
from ncodlab.trainer import TrainConfig, train

SHAPES = [
    ((16, 64, 64, 4), 32),
    ((16, 64, 64, 4), 128),
    ((32, 128, 128, 10), 64),
    ((8, 16, 3), 16),
]


def batch_inputs(dims, batch, seed=0):
    r = Rng(seed, "bench")
    model = init_model(dims, r)
    x = r.normal(size=(batch, dims[0]))
    return dict(
        params=model.flat, dims=np.array(dims, dtype=np.intp), x=x,
        labels=r.integers(0, dims[-1], size=batch), u=r.uniform(batch) * 0.1,
        centroids=np.array([l2_normalize(v) for v in r.normal(size=(dims[-1], dims[-2]))]),
        x_aug=x + 0.1 * r.normal(size=x.shape), lambda_c=0.9, lambda_b=0.1, soft_labels=True,
        grad=Gradients(dims).flat,
    )


def bench_kernel(repeats):
    names = kernels.available()
    print(f"{'dims':<22}{'batch':>6}" + "".join(f"{n + ' us':>14}" for n in names) + f"{'speedup':>10}")
    for dims, batch in SHAPES:
        args = batch_inputs(dims, batch)
        times = {}
        for name in names:
            k = kernels.get_backend(name)
            t = timeit.repeat(lambda: k.ncod_batch(**args), number=repeats, repeat=5)
            times[name] = min(t) / repeats * 1e6
        speed = times["python"] / times["compiled"] if "compiled" in times else float("nan")
        print(f"{str(dims):<22}{batch:>6}" + "".join(f"{times[n]:>14.1f}" for n in names) + f"{speed:>9.2f}x")


def bench_training(epochs):
    ds = synth_clusters(SynthSpec(4, 250, 16, 6.0, 1.0, 1))
    tr, te = split(ds, 0.2, Rng(1, "split"))
    noisy, _ = inject_symmetric(tr.clean_labels, 0.4, Rng(1, "noise"), 4)
    tr, te = standardize(tr.with_noisy_labels(noisy), te)
    print(f"\nncod_plus training, n={len(tr)}, {epochs} epochs, batch 32")
    results = {}
    for name in kernels.available():
        cfg = TrainConfig(mode="ncod_plus", epochs=epochs, seed=1, backend=name)
        t = min(timeit.repeat(lambda: train(tr, te, cfg), number=1, repeat=3))
        acc = train(tr, te, cfg)[2].final.test_accuracy
        results[name] = t
        print(f"  {name:<10}{t:8.3f} s   test_accuracy={acc:.4f}")
    if "compiled" in results:
        print(f"  speedup   {results['python'] / results['compiled']:8.2f}x")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=200, help="kernel calls per timing sample")
    ap.add_argument("--epochs", type=int, default=20)
    args = ap.parse_args()
    if "compiled" not in kernels.available():
        print("compiled backend not built; timing the numpy kernel only")
    bench_kernel(args.repeats)
    bench_training(args.epochs)


if __name__ == "__main__":
    main()
