#!/usr/bin/env python3
"""Write iris.csv and ionosphere.csv into a data directory.

Iris comes from scikit-learn. Ionosphere is read from a UCI-format file
(34 features plus a g/b class column) given with --ionosphere, or else from
the copy bundled with the keel-ds package, whose version drops the constant
second attribute; that column is restored as zeros.
"""
import argparse
import csv
import os
import sys


def write_iris(out_dir):
    from sklearn.datasets import load_iris

    iris = load_iris()
    path = os.path.join(out_dir, "iris.csv")
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["sepal_length", "sepal_width", "petal_length", "petal_width", "species"])
        for row, target in zip(iris.data, iris.target):
            w.writerow([repr(float(v)) for v in row] + [iris.target_names[target]])
    return path


def read_uci_ionosphere(path):
    rows = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("@"):
                continue
            rows.append([c.strip() for c in line.split(",")])
    return rows


def keel_ionosphere():
    import keel_ds

    path = os.path.join(os.path.dirname(keel_ds.__file__), "data", "balanced", "raw", "ionosphere.dat")
    rows = read_uci_ionosphere(path)
    # 33 features: attribute 2 (always 0 in the UCI file) is missing.
    return [[r[0], "0"] + r[1:] for r in rows]


def write_ionosphere(out_dir, source):
    rows = read_uci_ionosphere(source) if source else keel_ionosphere()
    if len(rows) != 351 or any(len(r) != 35 for r in rows):
        sys.exit("ionosphere: expected 351 rows of 34 features plus a class column")
    path = os.path.join(out_dir, "ionosphere.csv")
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow([f"a{i:02d}" for i in range(1, 35)] + ["class"])
        w.writerows(rows)
    return path


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="data", help="output directory (default: data)")
    parser.add_argument("--ionosphere", help="UCI ionosphere.data file")
    args = parser.parse_args()
    os.makedirs(args.out, exist_ok=True)
    print(write_iris(args.out))
    try:
        print(write_ionosphere(args.out, args.ionosphere))
    except ImportError:
        print("ionosphere skipped: pass --ionosphere or install keel-ds", file=sys.stderr)


if __name__ == "__main__":
    main()
