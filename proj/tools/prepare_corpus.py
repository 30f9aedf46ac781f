#!/usr/bin/env python3
"""Normalize a directory of plain-text documents into one corpus file.

Lowercases, maps every run of characters outside [a-z0-9] to a single space,
and writes one document per line in sorted filename order.

    tools/prepare_corpus.py <input_dir> <output.txt>

The bundled data/sotu.tar.gz was produced from the State of the Union
addresses shipped in the npm package @stdlib/datasets-sotu (PDDL-1.0/CC0):

    npm pack @stdlib/datasets-sotu && tar xzf stdlib-datasets-sotu-*.tgz
    tools/prepare_corpus.py package/data sotu.txt
    tar czf data/sotu.tar.gz sotu.txt
"""
import pathlib
import re
import sys

NON_WORD = re.compile(r"[^a-z0-9]+")


def main() -> int:
    if len(sys.argv) != 3:
        print(__doc__, file=sys.stderr)
        return 2
    src = pathlib.Path(sys.argv[1])
    files = sorted(p for p in src.iterdir() if p.suffix == ".txt")
    if not files:
        print(f"no .txt files under {src}", file=sys.stderr)
        return 2
    with open(sys.argv[2], "w", encoding="utf-8") as out:
        for path in files:
            text = path.read_text(encoding="utf-8", errors="replace").lower()
            line = NON_WORD.sub(" ", text).strip()
            if line:
                out.write(line + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
