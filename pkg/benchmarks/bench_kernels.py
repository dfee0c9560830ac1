"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--catalog 20000]

Prints one line per kernel with the best-of-N wall time of each backend and
the speedup. Inputs are seeded, so runs are comparable across machines.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from cherryrec import kernels
from cherryrec.core import NewsItem, UserProfile
from cherryrec.knrs import CatalogIndex, load_credibility, user_tokens

WORDS = [f"w{i}" for i in range(400)]
SOURCES = ["ap", "reuters", "blog", "tabloid", "msn", "unknown"]


def score_rows_case(rng: np.random.Generator, n: int):
    now = 10**7
    catalog = {}
    for i in range(n):
        nid = f"n{i:06d}"
        title = " ".join(rng.choice(WORDS, size=int(rng.integers(4, 12))))
        catalog[nid] = NewsItem(nid, title, str(rng.choice(WORDS[:20])), source=str(rng.choice(SOURCES)),
                                publish_time=now - int(rng.integers(0, 7 * 86400)),
                                subcategory=str(rng.choice(WORDS[:60])))
    index = CatalogIndex(catalog, load_credibility())
    history = [catalog[nid] for nid in index.ids[:20]]
    query, qsize = index.query(user_tokens(UserProfile("u", domain_focus=("w1", "w2")), history))
    hist_rows = index.rows_of(h.id for h in history)
    clicks = rng.integers(0, 50, size=n).astype(np.float64)
    imps = clicks + rng.integers(0, 500, size=n)
    rows = np.arange(n, dtype=np.int64)
    feats, values = np.zeros((n, 5)), np.zeros(n)
    weights = np.full(5, 0.2)

    def run(mod):
        mod.score_rows(rows, index.rel_indptr, index.rel_indices, index.title_indptr, index.title_indices,
                       query, qsize, hist_rows, index.credibility, index.publish_time,
                       clicks, imps, float(now), 86400.0, 10.0, weights, feats, values)
    return run


def poly_case(rng: np.random.Generator, m: int):
    phi = rng.normal(size=(m, 22))
    beta, y, grad = rng.normal(size=22), rng.normal(size=m), np.empty(22)
    return lambda mod: mod.poly_loss_grad(phi, beta, y, 0.01, grad)


def svr_case(rng: np.random.Generator, m: int):
    x, w, y, gw = rng.normal(size=(m, 6)), rng.normal(size=6), rng.normal(size=m), np.empty(6)
    return lambda mod: mod.svr_loss_grad(x, w, 0.1, y, 0.1, 0.01, gw)


def split_case(rng: np.random.Generator, m: int):
    x = np.round(rng.normal(size=(m, 6)), 2)
    y = (x[:, 0] > 0).astype(float) + rng.normal(scale=0.1, size=m)
    rows, feats = np.arange(m, dtype=np.int64), np.array([0, 2, 4], dtype=np.int64)
    return lambda mod: mod.best_split(x, y, rows, feats, 1e-12)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--catalog", type=int, default=20_000, help="items scanned by score_rows")
    parser.add_argument("--rows", type=int, default=20_000, help="training rows for the learner kernels")
    args = parser.parse_args()

    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled kernels not built; only the python backend is timed")
    rng = np.random.default_rng(0)
    cases = {
        f"score_rows (n={args.catalog})": score_rows_case(rng, args.catalog),
        f"poly_loss_grad (m={args.rows})": poly_case(rng, args.rows),
        f"svr_loss_grad (m={args.rows})": svr_case(rng, args.rows),
        f"best_split (m={args.rows})": split_case(rng, args.rows),
    }
    print(f"{'kernel':<28}" + "".join(f"{b:>12}" for b in backends) + ("   speedup" if len(backends) > 1 else ""))
    for name, run in cases.items():
        times = {}
        for b in backends:
            mod = kernels.get_backend(b)
            times[b] = min(timeit.repeat(lambda: run(mod), number=1, repeat=args.repeat))
        line = f"{name:<28}" + "".join(f"{times[b] * 1e3:>10.2f}ms" for b in backends)
        if len(backends) > 1:
            line += f"{times['python'] / times['compiled']:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
