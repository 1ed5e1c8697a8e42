"""CSV-of-complex file format for channel ensembles and precoders.

Layout::

    # rsmasat complex-matrix v1
    # kind=ensemble n_rows=7 n_cols=14 count=101 s=100 error_variance=0.0225
    matrix,row,re_0,im_0,re_1,im_1,...
    0,0,<floats>
    ...

One line per matrix row (row-major), real and imaginary parts interleaved.
For an ensemble, matrix 0 is the estimate and matrices ``1..S`` are the
realizations.  A precoder file holds one ``n_feeds x (M + 1)`` matrix whose
column 0 is the common precoder.
"""
import csv

import numpy as np

from .ratecore import PrecoderMatrix
from .sysmodel import ChannelEnsemble

MAGIC = "# rsmasat complex-matrix v1"


def write_complex_matrices(path, matrices, kind, **meta):
    matrices = np.asarray(matrices, dtype=complex)
    count, n_rows, n_cols = matrices.shape
    header = {"kind": kind, "n_rows": n_rows, "n_cols": n_cols, "count": count, **meta}
    with open(path, "w", newline="") as fh:
        fh.write(MAGIC + "\n")
        fh.write("# " + " ".join(f"{k}={v}" for k, v in header.items()) + "\n")
        writer = csv.writer(fh)
        writer.writerow(["matrix", "row"] + [f"{p}_{j}" for j in range(n_cols) for p in ("re", "im")])
        for i, mat in enumerate(matrices):
            for r, row in enumerate(mat):
                pairs = np.column_stack([row.real, row.imag]).ravel()
                writer.writerow([i, r] + [repr(float(x)) for x in pairs])


def read_complex_matrices(path):
    """Return ``(meta, array)`` with ``array.shape == (count, n_rows, n_cols)``."""
    with open(path, newline="") as fh:
        if fh.readline().rstrip("\n") != MAGIC:
            raise ValueError(f"{path}: not an rsmasat complex-matrix file")
        meta_line = fh.readline().strip()
        meta = dict(item.split("=", 1) for item in meta_line.lstrip("# ").split())
        reader = csv.reader(fh)
        next(reader)
        count, n_rows, n_cols = (int(meta[k]) for k in ("count", "n_rows", "n_cols"))
        out = np.zeros((count, n_rows, n_cols), dtype=complex)
        seen = 0
        for rec in reader:
            i, r = int(rec[0]), int(rec[1])
            vals = np.array(rec[2:], dtype=float)
            out[i, r] = vals[0::2] + 1j * vals[1::2]
            seen += 1
    if seen != count * n_rows:
        raise ValueError(f"{path}: expected {count * n_rows} rows, found {seen}")
    return meta, out


def dump_ensemble(path, ensemble):
    mats = np.concatenate([ensemble.estimate[None], ensemble.realizations])
    n_t, k = ensemble.shape
    write_complex_matrices(path, mats, "ensemble", n_t=n_t, k=k, s=ensemble.sample_size,
                           error_variance=repr(float(ensemble.error_variance)))


def load_ensemble(path):
    meta, mats = read_complex_matrices(path)
    if meta.get("kind") != "ensemble":
        raise ValueError(f"{path}: not an ensemble file")
    return ChannelEnsemble(mats[0], mats[1:], float(meta["error_variance"]))


def dump_precoder(path, prec):
    write_complex_matrices(path, prec.columns[None], "precoder", mode=prec.mode.value)


def load_precoder(path):
    meta, mats = read_complex_matrices(path)
    if meta.get("kind") != "precoder":
        raise ValueError(f"{path}: not a precoder file")
    return PrecoderMatrix(mats[0], meta["mode"])
