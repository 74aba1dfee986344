"""Matrix Market coordinate I/O.

Reading expands ``symmetric`` storage to full storage; ``pattern`` files
get unit values.  Indices are 1-based on disk and 0-based in memory.
"""

from __future__ import annotations

import os

import numpy as np
import scipy.io
import scipy.sparse as sps

from .csr import FormatError, SparseCsr

__all__ = ["read_matrix_market", "write_matrix_market"]


def read_matrix_market(path: str | os.PathLike) -> SparseCsr:
    """Read a real or integer Matrix Market file; symmetric storage is expanded."""
    if not os.path.isfile(path):
        raise FileNotFoundError(f"{path}: no such file")
    try:
        m = scipy.io.mmread(os.fspath(path))
    except (ValueError, IndexError) as exc:
        raise FormatError(f"{path}: not a readable Matrix Market file ({exc})") from exc
    if np.iscomplexobj(m):
        raise FormatError(f"{path}: complex matrices are not supported")
    if not sps.issparse(m):
        m = sps.coo_matrix(np.asarray(m))
    return SparseCsr.from_scipy(m.astype(np.float64))


def write_matrix_market(path: str | os.PathLike, a: SparseCsr, symmetric: bool = False,
                        comment: str = "") -> None:
    """Write ``a`` in coordinate format.

    With ``symmetric=True`` only the lower triangle is written; the caller
    is responsible for ``a`` actually being symmetric.
    """
    m = a.to_scipy()
    scipy.io.mmwrite(os.fspath(path), m, comment=comment,
                     field="real", symmetry="symmetric" if symmetric else "general")
