#!/usr/bin/env python3
"""Smoke test for the arsviz extension module.

Build the module first, then run this script:

    cargo build -p ars-python --release
    python3 python/smoke_test.py
"""
import math
import random
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def import_arsviz():
    candidates = [
        REPO / "target" / "release" / "libarsviz.so",
        REPO / "target" / "debug" / "libarsviz.so",
    ]
    built = [p for p in candidates if p.exists()]
    if not built:
        sys.exit("libarsviz.so not found; run `cargo build -p ars-python` first")
    newest = max(built, key=lambda p: p.stat().st_mtime)
    stage = Path(tempfile.mkdtemp(prefix="arsviz_"))
    shutil.copy(newest, stage / "arsviz.so")
    sys.path.insert(0, str(stage))
    import arsviz

    return arsviz


def make_blobs(n_per_class, centers, spread, seed):
    rng = random.Random(seed)
    data, labels = [], []
    for label, center in enumerate(centers):
        for _ in range(n_per_class):
            data.append([c + rng.gauss(0.0, spread) for c in center])
            labels.append(label)
    return data, labels


def main():
    arsviz = import_arsviz()
    print(f"arsviz {arsviz.__version__}")

    centers = [[0.0] * 10, [8.0] + [0.0] * 9, [0.0, 8.0] + [0.0] * 8]
    data, labels = make_blobs(60, centers, spread=0.8, seed=4)

    common = dict(perplexity=12.0, iters=300, ee_iters=50, alpha=5.0, seed=11)
    embedding = arsviz.embed(data, engine="exact", **common)
    assert len(embedding) == len(data)
    assert len(embedding[0]) == 2
    assert all(math.isfinite(v) for row in embedding for v in row)

    # Same seed, same parameters: bit-identical result.
    again = arsviz.embed(data, engine="exact", **common)
    assert embedding == again, "identical runs diverged"

    # The Barnes-Hut engine with an open traversal matches the exact engine.
    bh = arsviz.embed(data, engine="bh", bh_theta=0.0, **common)
    worst = max(
        abs(a - b) for ra, rb in zip(embedding, bh) for a, b in zip(ra, rb)
    )
    assert worst < 1e-9, f"bh(theta=0) deviates from exact by {worst}"

    score = arsviz.neighbor_preservation(data, embedding, 10)
    shuffled = embedding[:]
    random.Random(0).shuffle(shuffled)
    shuffled_score = arsviz.neighbor_preservation(data, shuffled, 10)
    print(f"neighbor preservation: embedded={score:.3f}, shuffled={shuffled_score:.3f}")
    assert score > 0.35, f"embedding lost local structure (score {score:.3f})"
    assert score > shuffled_score + 0.2

    kl = arsviz.kl_divergence(data, embedding, perplexity=12.0)
    kl_shuffled = arsviz.kl_divergence(data, shuffled, perplexity=12.0)
    print(f"kl: embedded={kl:.3f}, shuffled={kl_shuffled:.3f}")
    assert kl < kl_shuffled

    d = arsviz.diameter(embedding)
    assert d > 0.0
    print(f"diameter: {d:.3f}")

    # Three-dimensional embeddings work too.
    emb3 = arsviz.embed(data, dim=3, engine="exact", **common)
    assert len(emb3[0]) == 3

    print("smoke test passed")


if __name__ == "__main__":
    main()
