#!/usr/bin/env python3
"""Convert raw citation-network files into the TSV dataset layout.

Input format (the widely mirrored .content/.cites layout):

* ``<name>.content`` -- one line per node:
  ``<paper_id> <w_1> ... <w_d> <class_label>`` (whitespace separated,
  binary or real-valued word features, string class labels)
* ``<name>.cites``   -- one line per directed citation:
  ``<target_paper_id> <source_paper_id>``

Output: a directory with meta.json, edges.tsv, features.tsv, labels.tsv as
read by graphflow.datasets.load_dataset. Paper ids are remapped to dense
0-based node indices (order of first appearance in the .content file) and
class labels to 0-based class indices (sorted lexicographically). Citations
whose endpoints are missing from the .content file are skipped with a
warning, matching common preprocessing of these files.

Usage:
    python3 convert_citation_data.py CONTENT_FILE CITES_FILE OUT_DIR
"""

import argparse
import json
import sys
from pathlib import Path


def convert(content_path, cites_path, out_dir):
    content_path, cites_path = Path(content_path), Path(cites_path)
    out_dir = Path(out_dir)

    node_of = {}
    feature_rows = []  # (node, dim, value)
    raw_labels = []
    d = None
    with open(content_path) as f:
        for lineno, line in enumerate(f, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 3:
                raise ValueError(f"{content_path.name}:{lineno}: too few fields")
            paper_id, feats, label = parts[0], parts[1:-1], parts[-1]
            if d is None:
                d = len(feats)
            elif len(feats) != d:
                raise ValueError(
                    f"{content_path.name}:{lineno}: expected {d} features, "
                    f"got {len(feats)}")
            if paper_id in node_of:
                raise ValueError(
                    f"{content_path.name}:{lineno}: duplicate id {paper_id}")
            node = len(node_of)
            node_of[paper_id] = node
            for dim, value in enumerate(feats):
                v = float(value)
                if v != 0.0:
                    feature_rows.append((node, dim, v))
            raw_labels.append(label)

    classes = sorted(set(raw_labels))
    class_of = {c: i for i, c in enumerate(classes)}
    labels = [class_of[l] for l in raw_labels]

    edges = []
    skipped = 0
    with open(cites_path) as f:
        for lineno, line in enumerate(f, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise ValueError(f"{cites_path.name}:{lineno}: expected 2 fields")
            a, b = parts
            if a not in node_of or b not in node_of:
                skipped += 1
                continue
            edges.append((node_of[a], node_of[b]))
    if skipped:
        print(f"warning: skipped {skipped} citation(s) with unknown endpoints",
              file=sys.stderr)

    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "meta.json", "w") as f:
        json.dump({"n": len(node_of), "d": d, "c": len(classes)}, f)
        f.write("\n")
    with open(out_dir / "edges.tsv", "w") as f:
        f.writelines(f"{u}\t{v}\n" for u, v in edges)
    with open(out_dir / "features.tsv", "w") as f:
        f.writelines(f"{i}\t{j}\t{v!r}\n" for i, j, v in feature_rows)
    with open(out_dir / "labels.tsv", "w") as f:
        f.writelines(f"{i}\t{y}\n" for i, y in enumerate(labels))
    with open(out_dir / "classes.json", "w") as f:
        json.dump(classes, f)
        f.write("\n")
    return len(node_of), len(edges), len(classes)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("content", help="<name>.content file")
    parser.add_argument("cites", help="<name>.cites file")
    parser.add_argument("out", help="output dataset directory")
    args = parser.parse_args(argv)
    n, m, c = convert(args.content, args.cites, args.out)
    print(f"wrote {args.out}: {n} nodes, {m} edges, {c} classes")
    return 0


if __name__ == "__main__":
    sys.exit(main())
