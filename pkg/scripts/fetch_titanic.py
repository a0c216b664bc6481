"""Fetch the Titanic passenger CSV used by the logistic regression example.

    python3 scripts/fetch_titanic.py data/titanic.csv
    python3 scripts/fetch_titanic.py --synthetic data/titanic.csv

The download is the standard 891-row ``train.csv``.  ``--synthetic`` writes a
stand-in file with the same columns and missingness pattern for machines
without network access; results on it are not comparable to the real data.
"""

import argparse
import sys
import urllib.request
from pathlib import Path

from lugsail.samplers.titanic import load_titanic, write_synthetic_titanic

URLS = (
    "https://raw.githubusercontent.com/datasciencedojo/datasets/master/titanic.csv",
    "https://raw.githubusercontent.com/datasets/titanic/main/data/titanic.csv",
)


def download(dest):
    last = None
    for url in URLS:
        try:
            with urllib.request.urlopen(url, timeout=30) as resp:
                data = resp.read()
            dest.write_bytes(data)
            load_titanic(dest)  # schema check
            return url
        except Exception as exc:  # try the next mirror
            last = exc
    raise SystemExit(f"download failed: {last}")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("dest", type=Path)
    ap.add_argument("--synthetic", action="store_true", help="write a synthetic file instead of downloading")
    args = ap.parse_args(argv)
    args.dest.parent.mkdir(parents=True, exist_ok=True)
    if args.synthetic:
        write_synthetic_titanic(args.dest)
        source = "synthetic"
    else:
        source = download(args.dest)
    X, _ = load_titanic(args.dest)
    print(f"{args.dest}: {X.shape[0]} complete records ({source})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
