"""Published example designs, stored plot-major: row ``j`` holds plot ``j`` of
every block, so each column is one block."""

import hashlib

import numpy as np

from .exact import ExactDesign

# k=4, t=4, n=10: efficient but not universally optimal
D1_COLUMNS = (
    (2, 1, 4, 3, 1, 1, 3, 2, 4, 3),
    (2, 1, 4, 3, 2, 4, 4, 3, 2, 2),
    (1, 3, 3, 1, 4, 3, 2, 1, 1, 4),
    (1, 4, 2, 2, 4, 3, 2, 4, 3, 1),
)

# k=5, t=4, n=24: universally optimal; the first 12 blocks relabel (1 1 2 3 4)
# and the last 12 relabel (1 2 3 4 4)
D2_COLUMNS = (
    (1, 1, 1, 2, 2, 2, 3, 3, 3, 4, 4, 4, 3, 4, 2, 3, 1, 4, 4, 2, 1, 2, 3, 1),
    (1, 1, 1, 2, 2, 2, 3, 3, 3, 4, 4, 4, 2, 3, 4, 4, 3, 1, 2, 1, 4, 3, 1, 2),
    (4, 2, 3, 1, 4, 3, 1, 4, 2, 1, 2, 3, 4, 2, 3, 1, 4, 3, 1, 4, 2, 1, 2, 3),
    (2, 3, 4, 4, 3, 1, 2, 1, 4, 3, 1, 2, 1, 1, 1, 2, 2, 2, 3, 3, 3, 4, 4, 4),
    (3, 4, 2, 3, 1, 4, 4, 2, 1, 2, 3, 1, 1, 1, 1, 2, 2, 2, 3, 3, 3, 4, 4, 4),
)

# SHA-256 of the row-major block list, guarding the transcription above
D1_SHA256 = "ec31edf954acf150429034d937f9a0f0173749a6212e5a7c186315cddf8d665c"
D2_SHA256 = "aa2b45d759bf522fcf8def5bd078577f7a8a6aa2359763e012513f2411f8b134"


def design_digest(design):
    return hashlib.sha256(np.ascontiguousarray(design.rows, dtype=np.int64).tobytes()).hexdigest()


def d1():
    return ExactDesign.from_columns(D1_COLUMNS, t=4)


def d2():
    return ExactDesign.from_columns(D2_COLUMNS, t=4)


def oa_i(k, t=None):
    """Single block of the all-distinct sequence (1 2 ... k)."""
    t = k if t is None else t
    return ExactDesign(k, t, np.arange(1, k + 1)[None, :])
