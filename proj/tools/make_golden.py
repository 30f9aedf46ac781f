#!/usr/bin/env python3
"""Writes golden cooccurrence files for the CLI tests by brute-force pair
enumeration over every (position, position) pair of the corpus.

usage: make_golden.py CORPUS OUT WINDOW [flat|harmonic]
"""
import struct
import sys
from collections import Counter, defaultdict


def main() -> None:
    corpus, out, window = sys.argv[1], sys.argv[2], int(sys.argv[3])
    weighting = sys.argv[4] if len(sys.argv) > 4 else "flat"
    with open(corpus, encoding="utf-8") as f:
        tokens = [t.lower() for t in f.read().split()]

    freq = Counter(tokens)
    order = sorted(freq, key=lambda t: (-freq[t], t))
    ids = {t: i for i, t in enumerate(order)}

    counts = defaultdict(float)
    for p, focal in enumerate(tokens):
        for q, ctx in enumerate(tokens):
            dist = abs(p - q)
            if dist == 0 or dist > window:
                continue
            w = 1.0 if weighting == "flat" else 1.0 / dist
            counts[(ids[ctx], ids[focal])] += w

    with open(out, "wb") as f:
        f.write(b"LRE1")
        f.write(struct.pack("<I", len(order)))
        for (i, j) in sorted(counts):
            f.write(struct.pack("<IId", i, j, counts[(i, j)]))
    with open(out + ".vocab", "w", encoding="utf-8") as f:
        for t in order:
            f.write(f"{t} {freq[t]}\n")


if __name__ == "__main__":
    main()
