"""Row-, column-, and doubly-stochastic weight matrices for a given graph."""

import numpy as np

ROW = "row"
COLUMN = "column"
DOUBLY = "doubly"

STOCHASTIC_TOL = 1e-12


class WeightError(Exception):
    pass


class WeightMatrix:
    """Nonnegative n x n matrix tagged with its stochasticity kind.

    pi_r is the left Perron vector (rows sum to one; present for row/doubly
    stochastic matrices), normalized pi_r^T 1 = 1. pi_c is the right Perron
    vector (columns sum to one; present for column/doubly stochastic
    matrices), normalized 1^T pi_c = 1. Both are computed at construction
    by power iteration and cached. Immutable after construction.
    """

    def __init__(self, entries, kind, tol=1e-12, max_iter=None):
        entries = np.asarray(entries, dtype=float)
        n = entries.shape[0]
        if entries.shape != (n, n):
            raise WeightError("entries must be square")
        if np.any(entries < 0):
            raise WeightError("entries must be nonnegative")
        if np.any(np.diag(entries) <= 0):
            raise WeightError("diagonal must be strictly positive")
        if kind in (ROW, DOUBLY):
            resid = np.max(np.abs(entries.sum(axis=1) - 1.0))
            if resid > STOCHASTIC_TOL:
                raise WeightError(f"row sums off by {resid:.2e}")
        if kind in (COLUMN, DOUBLY):
            resid = np.max(np.abs(entries.sum(axis=0) - 1.0))
            if resid > STOCHASTIC_TOL:
                raise WeightError(f"column sums off by {resid:.2e}")
        if kind not in (ROW, COLUMN, DOUBLY):
            raise WeightError(f"unknown kind {kind!r}")
        self.n = n
        self.entries = entries
        self.entries.setflags(write=False)
        self.kind = kind
        self.pi_r, self.pi_c = perron_vectors(self, tol=tol, max_iter=max_iter)

    def infinite_power(self):
        """Power limit: 1 pi_r^T (row), pi_c 1^T (column), (1/n) 1 1^T (doubly)."""
        ones = np.ones(self.n)
        if self.kind == DOUBLY:
            return np.full((self.n, self.n), 1.0 / self.n)
        if self.kind == ROW:
            return np.outer(ones, self.pi_r)
        return np.outer(self.pi_c, ones)

    def to_csv(self, path):
        """Row-major dump at shortest round-trip precision."""
        with open(path, "w") as f:
            for row in self.entries:
                f.write(",".join(repr(float(v)) for v in row) + "\n")


def _power_iterate(m, tol, max_iter):
    n = m.shape[0]
    v = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        v_next = m @ v
        v_next /= np.sum(np.abs(v_next))
        if np.max(np.abs(v_next - v)) < tol:
            return v_next
        v = v_next
    raise WeightError(f"power iteration did not converge in {max_iter} steps")


def perron_vectors(w, tol=1e-12, max_iter=None):
    """Perron vectors of a primitive stochastic matrix by power iteration.

    Returns (pi_r, pi_c); the entry not defined for the matrix kind is None.
    pi_r solves pi_r^T W = pi_r^T with pi_r^T 1 = 1 and is obtained by
    iterating W^T; pi_c solves W pi_c = pi_c with 1^T pi_c = 1.
    """
    tol = float(tol)
    if max_iter is None:
        max_iter = 100 * w.n if hasattr(w, "n") else 100 * len(w)
    entries = w.entries if hasattr(w, "entries") else np.asarray(w)
    kind = w.kind if hasattr(w, "kind") else None
    pi_r = pi_c = None
    if kind in (ROW, DOUBLY, None):
        pi_r = _power_iterate(entries.T, tol, max_iter)
        pi_r = pi_r / pi_r.sum()
        if np.any(pi_r <= 0):
            raise WeightError("left Perron vector not strictly positive")
    if kind in (COLUMN, DOUBLY, None):
        pi_c = _power_iterate(entries, tol, max_iter)
        pi_c = pi_c / pi_c.sum()
        if np.any(pi_c <= 0):
            raise WeightError("right Perron vector not strictly positive")
    return pi_r, pi_c


def uniform_row_stochastic(g):
    """a_ij = 1 / |in-neighbors of i| for each in-neighbor j of i."""
    n = g.n
    a = np.zeros((n, n))
    for i in range(n):
        nbrs = g.in_neighbors[i]
        for j in nbrs:
            a[i, j] = 1.0 / len(nbrs)
    return WeightMatrix(a, ROW)


def uniform_column_stochastic(g):
    """b_ij = 1 / |out-neighbors of j| for each out-neighbor i of j."""
    n = g.n
    b = np.zeros((n, n))
    for j in range(n):
        nbrs = g.out_neighbors[j]
        for i in nbrs:
            b[i, j] = 1.0 / len(nbrs)
    return WeightMatrix(b, COLUMN)


def laplacian_doubly_stochastic(g):
    """W = I - L / (max degree + 1) for an undirected graph.

    L is the combinatorial Laplacian over the non-self-loop edges. The
    shift by max degree + 1 keeps the diagonal strictly positive.
    """
    if not g.is_undirected():
        raise WeightError("doubly-stochastic construction requires an undirected graph")
    n = g.n
    adj = g.adjacency() - np.eye(n)  # drop self-loops
    deg = adj.sum(axis=1)
    lap = np.diag(deg) - adj
    w = np.eye(n) - lap / (deg.max() + 1.0)
    return WeightMatrix(w, DOUBLY)
