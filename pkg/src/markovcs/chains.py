"""Reversible Markov kernels on the k-space grid and trajectory simulation.

Sites are flat k-space indices in FFT order, but adjacency is defined on
signed frequencies: ``(kr, kc)`` and ``(kr + 1, kc)`` are neighbours, and
there is no wrap-around between the highest positive and the most negative
frequency, because those lie on opposite edges of k-space.

The mixed kernel ``(1 - alpha) P + alpha * 1 pi^T`` is never materialized
for simulation: each step draws a Bernoulli(alpha) jump, and otherwise
takes one Metropolis step (uniform neighbour proposal, degree-corrected
acceptance). Every random decision of step ``l`` reads index ``l`` of a
dedicated Philox stream, so a trajectory is a pure function of
``(kernel, seed)`` and shorter runs are prefixes of longer ones.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from ._errors import CapacityError, NumericalError, UnsupportedError, ValidationError
from ._validation import (
    check_grid_shape,
    check_positive_int,
    check_probability_vector,
    check_unit_interval,
)
from .density import inverse_cdf
from .rng import (
    STREAM_ACCEPT,
    STREAM_IID,
    STREAM_JUMP,
    STREAM_PERSIST,
    STREAM_PROPOSE,
    RandomStream,
)

__all__ = [
    "GridGraph",
    "TransitionKernel",
    "Trajectory",
    "build_metropolis",
    "iid_kernel",
    "mix_kernel",
    "spectral_gap",
    "stationary_residual",
    "simulate",
    "simulate_second_order",
    "ChainWalker",
    "save_trajectory",
    "load_trajectory",
    "DENSE_EIGEN_LIMIT",
]

DENSE_EIGEN_LIMIT = 4096

_DIRECTIONS = {
    4: [(-1, 0), (1, 0), (0, -1), (0, 1)],
    8: [(-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)],
}

# index of the opposite move for each entry of _DIRECTIONS
_REVERSE = {4: [1, 0, 3, 2], 8: [1, 0, 3, 2, 7, 6, 5, 4]}


class GridGraph:
    """Neighbourhood structure of a k-space grid.

    Parameters
    ----------
    shape : tuple of int
    connectivity : {4, 8}

    Attributes
    ----------
    direction_neighbor : ndarray, shape (n, n_directions)
        Site reached from each site by each unit move, ``-1`` off-grid.
    neighbors, neighbor_direction : ndarray, shape (n, max_degree)
        Compact neighbour lists in direction order, padded with ``-1``.
    degree : ndarray, shape (n,)
    """

    def __init__(self, shape, connectivity=4):
        self.shape = check_grid_shape(shape)
        if connectivity not in _DIRECTIONS:
            raise ValidationError(f"connectivity must be 4 or 8, got {connectivity!r}")
        self.connectivity = connectivity
        self.directions = np.array(_DIRECTIONS[connectivity])
        rows, cols = self.shape
        cr = self.centered_coordinates()
        n = rows * cols
        dn = np.full((n, len(self.directions)), -1, dtype=np.int64)
        for d, (dr, dc) in enumerate(self.directions):
            pr, pc = cr[:, 0] + dr, cr[:, 1] + dc
            ok = (pr >= 0) & (pr < rows) & (pc >= 0) & (pc < cols)
            r = (pr - rows // 2) % rows
            c = (pc - cols // 2) % cols
            dn[ok, d] = (r * cols + c)[ok]
        self.direction_neighbor = dn
        self.degree = (dn >= 0).sum(axis=1)
        maxdeg = int(self.degree.max()) if n else 0
        self.neighbors = np.full((n, maxdeg), -1, dtype=np.int64)
        self.neighbor_direction = np.full((n, maxdeg), -1, dtype=np.int64)
        for i in range(n):
            ds = np.flatnonzero(dn[i] >= 0)
            self.neighbors[i, :ds.size] = dn[i, ds]
            self.neighbor_direction[i, :ds.size] = ds
        if n > 1:
            ncomp, _ = connected_components(self.adjacency(), directed=False)
            if ncomp != 1:
                raise ValidationError("grid graph is not connected")

    @property
    def n(self):
        return self.shape[0] * self.shape[1]

    def __repr__(self):
        return f"GridGraph(shape={self.shape}, connectivity={self.connectivity})"

    def centered_coordinates(self, sites=None):
        """``(row, col)`` with DC moved to ``(rows // 2, cols // 2)``."""
        rows, cols = self.shape
        sites = np.arange(rows * cols) if sites is None else np.asarray(sites)
        r, c = np.divmod(sites, cols)
        return np.stack([(r + rows // 2) % rows, (c + cols // 2) % cols], axis=-1)

    def adjacency(self):
        src, k = np.nonzero(self.neighbors >= 0)
        dst = self.neighbors[src, k]
        return sp.csr_matrix((np.ones(src.size), (src, dst)), shape=(self.n, self.n))

    def are_adjacent(self, a, b):
        """Elementwise test that ``b`` is a neighbour of ``a``."""
        a, b = np.asarray(a), np.asarray(b)
        return np.any(self.neighbors[a] == b[..., None], axis=-1)


@dataclass(eq=False)
class TransitionKernel:
    """Row-stochastic kernel ``(1 - alpha) * base + alpha * 1 pi^T``.

    ``base`` is a sparse matrix (the Metropolis walk, or any kernel given
    explicitly) or ``None`` when the kernel is the independent kernel alone.
    Simulation needs ``graph`` and ``acceptance``, which only
    :func:`build_metropolis` provides.
    """

    pi: np.ndarray
    base: sp.csr_matrix = None
    alpha: float = 0.0
    reversible: bool = True
    graph: GridGraph = None
    acceptance: np.ndarray = field(default=None, repr=False)

    @property
    def n(self):
        return self.pi.size

    @classmethod
    def from_matrix(cls, P, pi, atol=1e-12):
        """Wrap an explicit kernel; reversibility is detected, not assumed."""
        P = sp.csr_matrix(np.asarray(P, dtype=np.float64) if not sp.issparse(P) else P,
                          dtype=np.float64)
        pi = check_probability_vector(pi)
        if P.shape != (pi.size, pi.size):
            raise ValidationError(f"kernel shape {P.shape} does not match pi of size {pi.size}")
        if P.nnz and P.data.min() < 0:
            raise ValidationError("kernel has negative entries")
        if np.abs(np.asarray(P.sum(axis=1)).ravel() - 1).max() > atol:
            raise ValidationError("kernel rows do not sum to one")
        flow = sp.diags(pi) @ P
        reversible = bool(abs(flow - flow.T).max() <= atol) if P.nnz else True
        return cls(pi, P, 0.0, reversible)

    def dense(self):
        if self.n > DENSE_EIGEN_LIMIT:
            raise CapacityError(f"dense kernel of size {self.n} exceeds {DENSE_EIGEN_LIMIT}")
        out = self.alpha * np.tile(self.pi, (self.n, 1))
        if self.base is not None and self.alpha < 1:
            out += (1 - self.alpha) * self.base.toarray()
        return out

    def left_apply(self, x):
        """Row vector product ``x P``."""
        x = np.asarray(x, dtype=np.float64)
        out = self.alpha * x.sum() * self.pi
        if self.base is not None and self.alpha < 1:
            out = out + (1 - self.alpha) * (self.base.T @ x)
        return out

    def right_apply(self, x):
        """Column vector product ``P x``."""
        x = np.asarray(x, dtype=np.float64)
        out = np.full(self.n, self.alpha * float(self.pi @ x))
        if self.base is not None and self.alpha < 1:
            out = out + (1 - self.alpha) * (self.base @ x)
        return out

    def row_sums(self):
        return self.right_apply(np.ones(self.n))

    def detailed_balance_error(self):
        """``max |pi_i P_ij - pi_j P_ji|``; the independent part is symmetric."""
        if self.base is None or self.alpha >= 1:
            return 0.0
        flow = sp.diags(self.pi) @ self.base
        diff = abs(flow - flow.T)
        return (1 - self.alpha) * (float(diff.max()) if diff.nnz else 0.0)

    @property
    def descriptor(self):
        return f"markov(alpha={self.alpha!r})"


def iid_kernel(density):
    """The independent kernel: every row equals ``pi``."""
    return TransitionKernel(check_probability_vector(density.pi).copy(), None, 1.0, True)


def build_metropolis(graph, density):
    """Metropolis kernel on ``graph`` with stationary law ``density.pi``.

    Proposals are uniform over the neighbours of the current site; a move
    ``i -> j`` is accepted with probability
    ``min(1, pi_j deg_i / (pi_i deg_j))`` and rejected mass stays on ``i``.
    The result is reversible with respect to ``pi`` on any grid.
    """
    pi = check_probability_vector(density.pi)
    if pi.size != graph.n:
        raise ValidationError(f"density has {pi.size} sites, graph has {graph.n}")
    if np.any(pi <= 0):
        raise ValidationError("Metropolis construction needs pi > 0 everywhere")
    deg = graph.degree.astype(np.float64)
    dn = graph.direction_neighbor
    acc = np.zeros(dn.shape)
    ok = dn >= 0
    src = np.nonzero(ok)[0]
    dst = dn[ok]
    acc[ok] = np.minimum(1.0, (pi[dst] * deg[src]) / (pi[src] * deg[dst]))
    vals = acc[ok] / deg[src]
    off = sp.csr_matrix((vals, (src, dst)), shape=(graph.n, graph.n))
    stay = 1.0 - np.asarray(off.sum(axis=1)).ravel()
    P = (off + sp.diags(np.clip(stay, 0.0, None))).tocsr()
    P.sort_indices()
    return TransitionKernel(pi.copy(), P, 0.0, True, graph, acc)


def mix_kernel(kernel, alpha):
    """Convex combination ``(1 - alpha) P + alpha * 1 pi^T``.

    Mixing an already mixed kernel composes the weights, so
    ``mix_kernel(mix_kernel(P, a), b)`` has weight ``1 - (1-a)(1-b)``.
    """
    alpha = check_unit_interval(alpha, "alpha")
    total = 1.0 - (1.0 - kernel.alpha) * (1.0 - alpha)
    return TransitionKernel(kernel.pi, kernel.base, total, kernel.reversible,
                            kernel.graph, kernel.acceptance)


def stationary_residual(kernel):
    """``||pi P - pi||_1``."""
    return float(np.abs(kernel.left_apply(kernel.pi) - kernel.pi).sum())


def spectral_gap(kernel, method="auto", tol=1e-10, max_iter=200_000, seed=0):
    """Spectral gap ``1 - beta_1`` of a reversible kernel.

    ``beta_1`` is the second largest eigenvalue of the symmetrized kernel
    ``D^(1/2) P D^(-1/2)`` with ``D = diag(pi)``.

    Parameters
    ----------
    method : {"auto", "dense", "power"}
        ``"auto"`` uses a dense symmetric eigensolve up to
        ``DENSE_EIGEN_LIMIT`` sites and power iteration above.
    tol : float
        Power iteration stops when the Rayleigh quotient moves less than this.

    Raises
    ------
    UnsupportedError
        For non-reversible kernels.
    NumericalError
        If power iteration does not settle within ``max_iter`` steps.
    """
    if not kernel.reversible:
        raise UnsupportedError("spectral gap is only defined here for reversible kernels")
    pi = kernel.pi
    if np.any(pi <= 0):
        raise ValidationError("spectral gap needs pi > 0 everywhere")
    if kernel.n == 1:
        return 1.0
    if method == "auto":
        method = "dense" if kernel.n <= DENSE_EIGEN_LIMIT else "power"
    root = np.sqrt(pi)
    if method == "dense":
        S = kernel.dense() * root[:, None] / root[None, :]
        evals = np.linalg.eigvalsh(0.5 * (S + S.T))
        return float(1.0 - evals[-2])
    if method != "power":
        raise ValidationError(f"unknown spectral gap method {method!r}")

    # On the complement of sqrt(pi) the independent part vanishes, so only
    # the base kernel contributes; shift by I to make the spectrum positive.
    scale = 1.0 - kernel.alpha
    if kernel.base is None or scale == 0.0:
        return 1.0
    Sb = sp.diags(root) @ kernel.base @ sp.diags(1.0 / root)
    Sb = 0.5 * (Sb + Sb.T)
    x = RandomStream(seed, STREAM_IID).normal(0, kernel.n)
    x -= root * (root @ x)
    x /= np.linalg.norm(x)
    rho_old = np.inf
    for _ in range(max_iter):
        y = scale * (Sb @ x) + x
        y -= root * (root @ y)
        rho = float(x @ y) - 1.0
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 1.0
        x = y / norm
        if abs(rho - rho_old) < tol:
            return 1.0 - rho
        rho_old = rho
    raise NumericalError(f"power iteration did not converge in {max_iter} iterations")


@dataclass(eq=False)
class Trajectory:
    """Ordered k-space sites visited by a sampler.

    ``jumps[l]`` is true when step ``l`` was an independent draw from ``pi``
    (always true for the first step, which is drawn from ``pi``).
    """

    sites: np.ndarray
    jumps: np.ndarray
    shape: tuple
    seed: int = 0
    descriptor: str = "iid"
    alpha: float = 1.0
    persistence: float = 0.0

    @property
    def m(self):
        return self.sites.size

    def __len__(self):
        return self.sites.size

    def coordinates(self):
        return np.stack(np.divmod(self.sites, self.shape[1]), axis=-1)

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (self.shape == other.shape and self.seed == other.seed
                and self.descriptor == other.descriptor and self.alpha == other.alpha
                and self.persistence == other.persistence
                and np.array_equal(self.sites, other.sites)
                and np.array_equal(self.jumps, other.jumps))


def _walk(sites, jumps, start_site, start_dir, u_jump, u_iid, u_prop, u_acc, u_pers, u_dir,
          alpha, persistence, cdf, nbrs, nbr_dir, deg, dir_nbr, acc, dir_acc, reverse):
    """Fill ``sites``/``jumps`` step by step; returns the final (site, direction)."""
    count = sites.size
    iid_draws = inverse_cdf(cdf, u_iid)
    jump_mask = u_jump < alpha
    # Lists are markedly faster than ndarray scalars inside a Python loop.
    nb = nbrs.tolist()
    nd = nbr_dir.tolist()
    dg = deg.tolist()
    dnl = dir_nbr.tolist()
    ac = acc.tolist()
    draws = iid_draws.tolist()
    jm = jump_mask.tolist()
    up = u_prop.tolist()
    ua = u_acc.tolist()
    lifted = persistence > 0
    if lifted:
        us = u_pers.tolist()
        ndir = dir_nbr.shape[1]
        fresh = [int(u * ndir) for u in u_dir.tolist()]
        da = dir_acc.tolist()
        rev = list(reverse)
    cur, d = start_site, start_dir
    out = [0] * count
    for l in range(count):
        if cur < 0 or jm[l]:
            cur = draws[l]
            jm[l] = True
            if lifted:
                d = fresh[l]
        elif lifted and us[l] < persistence:
            # directed move: accepted keeps the direction, rejected reverses it
            if ua[l] < da[cur][d]:
                cur = dnl[cur][d]
            else:
                d = rev[d]
        else:
            k = dg[cur]
            if k:
                j = int(up[l] * k)
                if ua[l] < ac[cur][nd[cur][j]]:
                    cur = nb[cur][j]
            if lifted:
                d = fresh[l]
        out[l] = cur
    sites[:] = out
    jumps[:] = jm
    return cur, d


class ChainWalker:
    """Incremental simulator for first- and second-order chains.

    Calling :meth:`advance` repeatedly yields consecutive blocks of one
    trajectory; the concatenation equals a single call of the same total
    length.
    """

    def __init__(self, kernel, seed, persistence=0.0):
        if kernel.graph is None and kernel.alpha < 1:
            raise ValidationError("simulation needs a kernel built by build_metropolis")
        self.kernel = kernel
        self.seed = int(seed)
        self.persistence = float(persistence)
        self._streams = {s: RandomStream(seed, s) for s in
                         (STREAM_IID, STREAM_JUMP, STREAM_PROPOSE, STREAM_ACCEPT, STREAM_PERSIST)}
        self._cdf = np.cumsum(kernel.pi)
        self.position = 0
        self._state = (-1, -1)
        g = kernel.graph
        if g is not None:
            dn = g.direction_neighbor
            dir_acc = np.zeros(dn.shape)
            ok = dn >= 0
            src = np.nonzero(ok)[0]
            dir_acc[ok] = np.minimum(1.0, kernel.pi[dn[ok]] / kernel.pi[src])
            self._tables = (g.neighbors, g.neighbor_direction, g.degree, dn,
                            kernel.acceptance, dir_acc, _REVERSE[g.connectivity])
        else:
            empty = np.zeros((kernel.n, 0), dtype=np.int64)
            self._tables = (empty, empty, np.zeros(kernel.n, dtype=np.int64), empty,
                            np.zeros((kernel.n, 0)), np.zeros((kernel.n, 0)), [])

    def advance(self, count):
        """Simulate the next ``count`` steps; returns ``(sites, jumps)``."""
        s, start = self._streams, self.position
        sites = np.empty(count, dtype=np.int64)
        jumps = np.empty(count, dtype=bool)
        alpha = self.kernel.alpha
        u_jump = s[STREAM_JUMP].uniform(start, count)
        u_iid = s[STREAM_IID].uniform(start, count)
        if alpha >= 1:
            sites[:] = inverse_cdf(self._cdf, u_iid)
            jumps[:] = True
            self._state = (int(sites[-1]), -1)
        else:
            u_prop = s[STREAM_PROPOSE].uniform(start, count)
            u_acc = s[STREAM_ACCEPT].uniform(start, count)
            if self.persistence > 0:
                u_pers = s[STREAM_PERSIST].uniform(start, count)
                u_dir = s[STREAM_PERSIST].uniform(start, count, word=1)
            else:
                u_pers = u_dir = np.zeros(0)
            self._state = _walk(sites, jumps, *self._state, u_jump, u_iid, u_prop, u_acc,
                                u_pers, u_dir, alpha, self.persistence, self._cdf, *self._tables)
        self.position += count
        return sites, jumps


def simulate(kernel, m, seed, start=0):
    """Trajectory of length ``m`` of the (mixed) kernel, started from ``pi``.

    With probability ``alpha`` a step is an independent draw from ``pi``;
    otherwise it is one Metropolis step. For ``alpha = 1`` the sites equal
    ``sample_iid(density, m, seed)``.
    """
    m = check_positive_int(m, "m")
    walker = ChainWalker(kernel, seed)
    if start:
        walker.advance(start)
    sites, jumps = walker.advance(m)
    shape = kernel.graph.shape if kernel.graph is not None else (1, kernel.n)
    desc = "iid" if kernel.alpha >= 1 else kernel.descriptor
    return Trajectory(sites, jumps, shape, int(seed), desc, float(kernel.alpha), 0.0)


def simulate_second_order(graph, density, alpha, persistence, m, seed):
    """Persistent (second-order) walk mixed with independent jumps.

    The state is the current site plus a heading. With probability
    ``persistence`` the walk proposes one step along the heading and accepts
    it with probability ``min(1, pi_j / pi_i)`` (off-grid targets count as
    rejected); an accepted step keeps the heading and a rejected one stays
    put and reverses it. Otherwise the step is an ordinary Metropolis step
    and the heading is redrawn uniformly, as it is after a jump.

    Both moves leave ``pi`` times the uniform law on headings invariant (the
    directed move is a Metropolis step on the involution
    ``(i, d) -> (i + d, -d)`` followed by a heading flip), so the site
    marginal is exactly ``pi``. With ``persistence = 0`` the walk reproduces
    :func:`simulate` step for step.
    """
    alpha = check_unit_interval(alpha, "alpha")
    persistence = check_unit_interval(persistence, "persistence", closed_right=False)
    m = check_positive_int(m, "m")
    kernel = mix_kernel(build_metropolis(graph, density), alpha)
    walker = ChainWalker(kernel, seed, persistence)
    sites, jumps = walker.advance(m)
    desc = ("iid" if alpha >= 1 else
            f"second-order(alpha={alpha!r}, persistence={persistence!r})")
    return Trajectory(sites, jumps, graph.shape, int(seed), desc, alpha, persistence)


def save_trajectory(trajectory, path):
    """CSV with header ``step,row,col,jump`` (FFT-order indices)."""
    rc = trajectory.coordinates()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "row", "col", "jump"])
        for l in range(trajectory.m):
            w.writerow([l, int(rc[l, 0]), int(rc[l, 1]), int(trajectory.jumps[l])])


def load_trajectory(path, shape, **meta):
    """Read a trajectory CSV written by :func:`save_trajectory`."""
    rows, cols = check_grid_shape(shape)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["step", "row", "col", "jump"]:
            raise ValidationError(f"{path}: unexpected trajectory header {header}")
        data = np.array([[int(v) for v in row] for row in reader], dtype=np.int64)
    if data.size == 0:
        raise ValidationError(f"{path}: empty trajectory")
    if not np.array_equal(data[:, 0], np.arange(len(data))):
        raise ValidationError(f"{path}: steps are not consecutive from 0")
    r, c = data[:, 1], data[:, 2]
    if np.any((r < 0) | (r >= rows) | (c < 0) | (c >= cols)):
        raise ValidationError(f"{path}: index outside the {rows}x{cols} grid")
    if not np.all(np.isin(data[:, 3], (0, 1))):
        raise ValidationError(f"{path}: jump flags must be 0 or 1")
    return Trajectory(r * cols + c, data[:, 3].astype(bool), (rows, cols), **meta)
