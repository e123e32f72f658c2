"""
Matrix Market - Coordinate pattern files for biadjacency matrices and
one-label-per-line files for label vectors
"""
from typing import List

import numpy as np

from core.bsbm_model import Biadjacency, LabelVector
from core.exceptions import MalformedInput

MM_HEADER = '%%MatrixMarket matrix coordinate pattern general'

LABEL_TOKENS = {'+1': 1, '1': 1, '-1': -1}


def write_biadjacency(a: Biadjacency, path: str):
    """1-based (row, column) pairs in row-major order"""
    rows, cols = a.coordinates()
    with open(path, 'w', encoding='utf-8', newline='\n') as fh:
        fh.write(MM_HEADER + '\n')
        fh.write(f"{a.n1} {a.n2} {a.nnz}\n")
        if a.nnz:
            np.savetxt(fh, np.column_stack([rows + 1, cols + 1]), fmt='%d')


def _ints(tokens: List[str], count: int, line: int, what: str) -> List[int]:
    if len(tokens) != count:
        raise MalformedInput(f"expected {count} integers for {what}, got {len(tokens)}", line=line)
    try:
        return [int(tok) for tok in tokens]
    except ValueError:
        raise MalformedInput(f"non-integer value in {what}: {' '.join(tokens)}", line=line)


def read_biadjacency(path: str) -> Biadjacency:
    with open(path, 'r', encoding='utf-8') as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise MalformedInput("empty file, missing Matrix Market header", line=1)

    header = lines[0].split()
    if len(header) != 5 or header[0] != '%%MatrixMarket':
        raise MalformedInput("missing '%%MatrixMarket' banner", line=1)
    if [tok.lower() for tok in header[1:]] != ['matrix', 'coordinate', 'pattern', 'general']:
        raise MalformedInput(f"unsupported format '{' '.join(header[1:])}', expected "
                             f"'matrix coordinate pattern general'", line=1)

    size = None
    rows, cols = [], []
    seen = set()
    for number, raw in enumerate(lines[1:], start=2):
        text = raw.strip()
        if not text or text.startswith('%'):
            continue
        if size is None:
            size = _ints(text.split(), 3, number, 'the size line')
            n1, n2, nnz = size
            if n1 < 1 or n2 < 1 or nnz < 0:
                raise MalformedInput(f"invalid size line '{text}'", line=number)
            continue
        i, j = _ints(text.split(), 2, number, 'an entry')
        if not (1 <= i <= n1 and 1 <= j <= n2):
            raise MalformedInput(f"entry ({i}, {j}) outside a {n1}x{n2} matrix", line=number)
        if (i, j) in seen:
            raise MalformedInput(f"duplicate entry ({i}, {j})", line=number)
        seen.add((i, j))
        rows.append(i - 1)
        cols.append(j - 1)

    if size is None:
        raise MalformedInput("missing size line", line=len(lines))
    if len(rows) != nnz:
        raise MalformedInput(f"size line declares {nnz} entries, found {len(rows)}", line=len(lines))
    return Biadjacency.from_coordinates(n1, n2, rows, cols)


def write_labels(eta: LabelVector, path: str):
    with open(path, 'w', encoding='utf-8', newline='\n') as fh:
        fh.writelines('+1\n' if value == 1 else '-1\n' for value in eta.labels)


def read_labels(path: str) -> LabelVector:
    values = []
    with open(path, 'r', encoding='utf-8') as fh:
        for number, raw in enumerate(fh, start=1):
            token = raw.strip()
            if not token:
                continue
            if token not in LABEL_TOKENS:
                raise MalformedInput(f"label must be +1 or -1, got '{token}'", line=number)
            values.append(LABEL_TOKENS[token])
    if not values:
        raise MalformedInput("label file holds no labels")
    return LabelVector(np.array(values, dtype=np.int8))
