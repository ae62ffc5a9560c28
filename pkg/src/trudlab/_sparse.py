"""Sparse assembly of weighted Dirichlet Laplacians on the interior unknowns."""
import numpy as np
import scipy.sparse as sp


def face_touch_masks(d):
    """Per axis, the faces (in kernel layout) touching at least one interior node."""
    inn = d.interior_mask
    if d.dim == 1:
        return [inn[:-1] | inn[1:]]
    return [inn[:-1, 1:-1] | inn[1:, 1:-1], inn[1:-1, :-1] | inn[1:-1, 1:]]


class WeightedLaplacian:
    """``-div(c grad .)`` with zero Dirichlet data, face weights ``c`` in kernel layout."""

    def __init__(self, d):
        self.d = d
        nidx = np.arange(int(np.prod(d.shape))).reshape(d.shape)
        if d.dim == 1:
            pairs = [(nidx[:-1], nidx[1:])]
        else:
            pairs = [(nidx[:-1, 1:-1], nidx[1:, 1:-1]), (nidx[1:-1, :-1], nidx[1:-1, 1:])]
        self.touch = face_touch_masks(d)
        flat = d.interior_mask.ravel()
        unknown = -np.ones(flat.size, dtype=int)
        unknown[flat] = np.arange(int(flat.sum()))
        self.n = int(flat.sum())
        self.pairs = [(unknown[lo[m]], unknown[hi[m]]) for (lo, hi), m in zip(pairs, self.touch)]

    def restrict(self, face_arrays):
        return [a[m] for a, m in zip(face_arrays, self.touch)]

    def matrix(self, coefs):
        """CSC matrix of ``-div(c grad .)``; ``coefs`` are restricted face weights."""
        rows, cols, vals = [], [], []
        diag = np.zeros(self.n)
        h2 = self.d.h ** 2
        for (ilo, ihi), c in zip(self.pairs, coefs):
            w = np.asarray(c, dtype=float) / h2
            np.add.at(diag, ilo[ilo >= 0], w[ilo >= 0])
            np.add.at(diag, ihi[ihi >= 0], w[ihi >= 0])
            both = (ilo >= 0) & (ihi >= 0)
            rows += [ilo[both], ihi[both]]
            cols += [ihi[both], ilo[both]]
            vals += [-w[both], -w[both]]
        rows.append(np.arange(self.n))
        cols.append(np.arange(self.n))
        vals.append(diag)
        return sp.csc_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(self.n, self.n)
        )
