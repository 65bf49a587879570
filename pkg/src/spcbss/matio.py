"""Plain-text matrix files.

Format used everywhere in this package: first line "rows cols", then one
whitespace-separated row per line, every value with 17 significant
digits so doubles round-trip exactly.
"""

import numpy as np


def save_matrix(path, M):
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    with open(path, "w") as fh:
        fh.write("%d %d\n" % M.shape)
        for row in M:
            fh.write(" ".join(format(v, ".17g") for v in row) + "\n")


def load_matrix(path):
    with open(path) as fh:
        first = fh.readline().split()
        if len(first) != 2:
            raise ValueError("%s: malformed header, expected 'rows cols'" % path)
        rows, cols = int(first[0]), int(first[1])
        M = np.loadtxt(fh, dtype=np.float64, ndmin=2)
    if M.shape != (rows, cols):
        raise ValueError(
            "%s: header says %dx%d, body is %dx%d"
            % (path, rows, cols, M.shape[0], M.shape[1])
        )
    return M
