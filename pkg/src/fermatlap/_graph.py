from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


@dataclass
class SparseWeightedGraph:
    """Symmetric nonnegative sparse weights with cached row sums.

    Built from the strict upper triangle plus the diagonal, then mirrored, so
    w_ij and w_ji are the same stored float.
    """

    weights: sp.csr_matrix
    includes_self_loops: bool = False
    meta: dict = field(default_factory=dict)
    degrees: np.ndarray = field(init=False)

    def __post_init__(self):
        W = sp.csr_matrix(self.weights, dtype=float)
        W.sort_indices()
        self.weights = W
        self.degrees = np.asarray(W.sum(axis=1)).ravel()

    @staticmethod
    def from_upper(n, rows, cols, vals, diag=None, **kw) -> "SparseWeightedGraph":
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=float)
        r = [rows, cols]
        c = [cols, rows]
        v = [vals, vals]
        if diag is not None:
            idx = np.arange(n)
            r.append(idx)
            c.append(idx)
            v.append(np.broadcast_to(np.asarray(diag, dtype=float), (n,)))
        W = sp.csr_matrix((np.concatenate(v), (np.concatenate(r), np.concatenate(c))), shape=(n, n))
        return SparseWeightedGraph(W, includes_self_loops=diag is not None, **kw)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    def off_diagonal(self) -> sp.csr_matrix:
        W = self.weights.tolil(copy=True)
        W.setdiag(0.0)
        W = W.tocsr()
        W.eliminate_zeros()
        return W

    def to_triplet_csv(self, path, mode: str = "") -> None:
        U = sp.triu(self.weights).tocoo()
        meta = {"n": self.n, "h": self.meta.get("h"), "m": self.meta.get("m"), "mode": mode or self.meta.get("mode", "")}
        with open(path, "w") as f:
            f.write("# " + json.dumps(meta) + "\n")
            f.write("i,j,w\n")
            order = np.lexsort((U.col, U.row))
            for a in order:
                f.write(f"{U.row[a]},{U.col[a]},{U.data[a]:.17g}\n")

    @staticmethod
    def from_triplet_csv(path) -> "SparseWeightedGraph":
        with open(path) as f:
            meta = json.loads(f.readline()[1:])
            f.readline()
            rows = [line.split(",") for line in f if line.strip()]
        i = np.array([int(r[0]) for r in rows], dtype=np.int64)
        j = np.array([int(r[1]) for r in rows], dtype=np.int64)
        w = np.array([float(r[2]) for r in rows])
        n = int(meta["n"])
        d = i == j
        diag = np.zeros(n)
        diag[i[d]] = w[d]
        g = SparseWeightedGraph.from_upper(n, i[~d], j[~d], w[~d], diag if d.any() else None)
        g.meta.update(meta)
        return g
