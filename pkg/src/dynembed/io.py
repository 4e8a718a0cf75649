"""CSV and JSON writers shared by the command-line interface.

All floats are written with shortest round-trip ``repr`` so reruns with the
same seed produce byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np


def _fmt(x) -> str:
    return repr(float(x))


def write_matrix_csv(path: Path, values: np.ndarray, labels: Sequence[str]) -> None:
    """Write a square matrix as CSV with a header row of node labels."""
    values = np.asarray(values)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(labels) + "\n")
        for row in values:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def read_matrix_csv(path: Path) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        labels = fh.readline().rstrip("\n").split(",")
        rows = [[float(x) for x in line.split(",")] for line in fh if line.strip()]
    values = np.array(rows)
    if values.shape != (len(labels), len(labels)):
        raise ValueError(f"matrix shape {values.shape} does not match {len(labels)} labels")
    return labels, values


def write_table_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) if isinstance(x, float) else str(x) for x in row) + "\n")


def read_partition_csv(path: Path) -> dict[str, int]:
    out: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith("node_id"):
            raise ValueError("partition CSV must start with a node_id header")
        for line in fh:
            if not line.strip():
                continue
            node, community = line.rstrip("\n").split(",")[:2]
            out[node] = int(community)
    return out


def read_ranking_csv(path: Path) -> list[str]:
    """Read a reference ranking: node ids in rank order (first column, best first)."""
    ids = []
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        cols = first.split(",")
        if cols and cols[0] not in ("node_id", "node", "name"):
            ids.append(cols[0])
        for line in fh:
            if line.strip():
                ids.append(line.rstrip("\n").split(",")[0])
    return ids


def write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
