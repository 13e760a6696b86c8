#!/usr/bin/env python3
"""Convert a HyperGCN-style benchmark directory into the text dataset layout.

Input (as distributed with HyperGCN, e.g. data/coauthorship/cora/):
    features.pickle    n x d feature matrix (scipy sparse or dense array)
    hypergraph.pickle  dict mapping an edge key to a list of node ids
    labels.pickle      list of n integer labels
    splits/<k>.pickle  dict with 'train' and 'test' node-id lists, k = 1..10

Output directory:
    hypergraph.txt     "n m" header, then one line of node ids per hyperedge
    features.csv       n rows of comma-separated values
    labels.txt         one label per line
    splits.txt         split 1 (train/test/none per line)
    splits_<j>.txt     split j+1 for j = 0..9, read by the acceptance suite

Loading the pickles needs numpy, and scipy when the features are sparse.

Usage: convert_hypergcn.py <hypergcn-dataset-dir> <output-dir> [--val-fraction F]

With --val-fraction, that fraction of each split's train nodes (chosen with
a fixed seed) is moved to the validation split so that best-validation
model selection has something to select on.
"""

import argparse
import pickle
import random
from pathlib import Path


def load(path):
    with open(path, "rb") as f:
        return pickle.load(f)


def dense_rows(features):
    if hasattr(features, "toarray"):
        features = features.toarray()
    return [list(map(float, row)) for row in features]


def write_split(path, n, split, val_fraction, seed):
    train = sorted(set(int(i) for i in split["train"]))
    test = set(int(i) for i in split["test"])
    val = set()
    if val_fraction > 0:
        rng = random.Random(seed)
        val = set(rng.sample(train, int(round(val_fraction * len(train)))))
    with open(path, "w") as f:
        for i in range(n):
            if i in val:
                f.write("val\n")
            elif i in test:
                f.write("test\n")
            elif i in train:
                f.write("train\n")
            else:
                f.write("none\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("source", type=Path)
    ap.add_argument("out", type=Path)
    ap.add_argument("--val-fraction", type=float, default=0.0)
    args = ap.parse_args()

    rows = dense_rows(load(args.source / "features.pickle"))
    labels = [int(x) for x in load(args.source / "labels.pickle")]
    edges = [sorted(set(int(i) for i in members)) for members in load(args.source / "hypergraph.pickle").values()]
    edges = [e for e in edges if e]
    n = len(rows)
    if len(labels) != n:
        raise SystemExit(f"labels have {len(labels)} entries, features have {n} rows")

    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "hypergraph.txt", "w") as f:
        f.write(f"{n} {len(edges)}\n")
        for e in edges:
            f.write(" ".join(map(str, e)) + "\n")
    with open(args.out / "features.csv", "w") as f:
        for row in rows:
            f.write(",".join(repr(v) for v in row) + "\n")
    with open(args.out / "labels.txt", "w") as f:
        f.write("\n".join(map(str, labels)) + "\n")

    for j in range(10):
        split_path = args.source / "splits" / f"{j + 1}.pickle"
        if not split_path.exists():
            break
        split = load(split_path)
        write_split(args.out / f"splits_{j}.txt", n, split, args.val_fraction, seed=j)
        if j == 0:
            write_split(args.out / "splits.txt", n, split, args.val_fraction, seed=j)
    print(f"wrote n={n}, m={len(edges)}, classes={max(labels) + 1} to {args.out}")


if __name__ == "__main__":
    main()
