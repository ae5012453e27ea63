"""Sampling schemes: deduplicated masks built from trajectories.

A scheme keeps the full ordered trajectory (for the acquisition order and
its statistics) and the set of distinct visited sites, which is what the
reconstruction uses: a repeated k-space location adds no information for
orthonormal rows.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._errors import GridIndexError, NumericalError, ValidationError
from ._validation import check_grid_shape, check_seed
from .chains import ChainWalker, TransitionKernel, Trajectory, iid_kernel, load_trajectory, save_trajectory
from .density import Density
from .io import read_keyvalue, write_keyvalue, write_pgm

__all__ = [
    "SamplingScheme",
    "scheme_from_trajectory",
    "generate_until",
    "save_scheme",
    "load_scheme",
    "mask_image",
    "MAX_STEPS",
]

MAX_STEPS = 10**9


@dataclass(eq=False)
class SamplingScheme:
    """Trajectory plus its deduplicated mask.

    Attributes
    ----------
    trajectory : Trajectory
    mask : ndarray
        Sorted distinct flat k-space indices.
    """

    trajectory: Trajectory
    mask: np.ndarray

    @property
    def shape(self):
        return self.trajectory.shape

    @property
    def n(self):
        return self.shape[0] * self.shape[1]

    @property
    def m(self):
        """Number of trajectory steps."""
        return self.trajectory.m

    @property
    def m_distinct(self):
        return self.mask.size

    @property
    def acceleration(self):
        return self.n / self.m_distinct

    @property
    def coverage(self):
        return self.m_distinct / self.n

    @property
    def jump_count(self):
        return int(np.count_nonzero(self.trajectory.jumps))

    @property
    def mean_run_length(self):
        return self.m / (self.jump_count + 1)

    @property
    def seed(self):
        return self.trajectory.seed

    @property
    def descriptor(self):
        return self.trajectory.descriptor

    def boolean_mask(self):
        out = np.zeros(self.n, dtype=bool)
        out[self.mask] = True
        return out.reshape(self.shape)

    def metadata(self):
        t = self.trajectory
        return {
            "n": self.n,
            "rows": self.shape[0],
            "cols": self.shape[1],
            "generator": t.descriptor,
            "alpha": float(t.alpha),
            "persistence": float(t.persistence),
            "seed": t.seed,
            "m": self.m,
            "m_distinct": self.m_distinct,
            "r": float(self.acceleration),
            "coverage": float(self.coverage),
            "jumps": self.jump_count,
            "mean_run_length": float(self.mean_run_length),
        }

    def __eq__(self, other):
        if not isinstance(other, SamplingScheme):
            return NotImplemented
        return self.trajectory == other.trajectory and np.array_equal(self.mask, other.mask)


def scheme_from_trajectory(trajectory, shape=None):
    """Deduplicate a trajectory into a scheme.

    Raises
    ------
    GridIndexError
        If a site lies outside the grid.
    """
    if trajectory.m == 0:
        raise ValidationError("empty trajectory")
    shape = check_grid_shape(shape if shape is not None else trajectory.shape)
    n = shape[0] * shape[1]
    sites = np.asarray(trajectory.sites, dtype=np.int64)
    if sites.min() < 0 or sites.max() >= n:
        raise GridIndexError(f"trajectory visits a site outside the {shape} grid")
    if tuple(trajectory.shape) != shape:
        trajectory = Trajectory(sites, trajectory.jumps, shape, trajectory.seed,
                                trajectory.descriptor, trajectory.alpha, trajectory.persistence)
    return SamplingScheme(trajectory, np.unique(sites))


def _walker(generator, seed):
    """Return ``(walker, shape, descriptor, alpha, persistence)``."""
    if isinstance(generator, Density):
        kernel = iid_kernel(generator)
        return ChainWalker(kernel, seed), generator.shape, "iid", 1.0, 0.0
    if isinstance(generator, TransitionKernel):
        shape = generator.graph.shape if generator.graph is not None else (1, generator.n)
        desc = "iid" if generator.alpha >= 1 else generator.descriptor
        return ChainWalker(generator, seed), shape, desc, float(generator.alpha), 0.0
    if hasattr(generator, "make_walker"):
        return generator.make_walker(seed)
    raise ValidationError(f"cannot generate a trajectory from {type(generator).__name__}")


def generate_until(generator, target_coverage, seed, max_steps=MAX_STEPS):
    """Extend a trajectory until its distinct sites first cover the target.

    Parameters
    ----------
    generator : Density, TransitionKernel or fitted sampler
        A :class:`Density` means iid sampling.
    target_coverage : float in (0, 1]
        Fraction of the grid that must be visited; the trajectory stops at
        the step that visits the ``ceil(target * n)``-th distinct site.
    seed : int

    Raises
    ------
    NumericalError
        If ``max_steps`` steps do not reach the target.
    """
    target = float(target_coverage)
    if not 0.0 < target <= 1.0:
        raise ValidationError(f"target coverage must lie in (0, 1], got {target_coverage!r}")
    seed = check_seed(seed)
    walker, shape, desc, alpha, persistence = _walker(generator, seed)
    n = shape[0] * shape[1]
    need = max(1, math.ceil(round(target * n, 9)))
    seen = np.zeros(n, dtype=bool)
    count = 0
    sites_parts, jump_parts = [], []
    block = max(1024, 2 * need)
    total = 0
    while True:
        if total >= max_steps:
            raise NumericalError(
                f"coverage {target} not reached after {max_steps} steps ({count}/{n} sites)")
        block = min(block, max_steps - total)
        sites, jumps = walker.advance(block)
        uniq, first = np.unique(sites, return_index=True)
        fresh = ~seen[uniq]
        new_first = np.sort(first[fresh])
        if count + new_first.size >= need:
            stop = int(new_first[need - count - 1]) + 1
            sites_parts.append(sites[:stop])
            jump_parts.append(jumps[:stop])
            break
        seen[uniq] = True
        count += new_first.size
        sites_parts.append(sites)
        jump_parts.append(jumps)
        total += block
        block = min(2 * block, 1 << 20)
    traj = Trajectory(np.concatenate(sites_parts), np.concatenate(jump_parts), tuple(shape),
                      seed, desc, alpha, persistence)
    return scheme_from_trajectory(traj)


def mask_image(scheme):
    """Boolean mask with DC moved to the centre, for display."""
    return np.fft.fftshift(scheme.boolean_mask())


def save_scheme(scheme, base):
    """Write ``base.csv`` (trajectory), ``base.meta`` and ``base_mask.pgm``."""
    base = str(base)
    save_trajectory(scheme.trajectory, base + ".csv")
    write_keyvalue(base + ".meta", scheme.metadata())
    write_pgm(base + "_mask.pgm", mask_image(scheme).astype(np.float64))


def load_scheme(base):
    """Read a scheme written by :func:`save_scheme` and check its metadata."""
    base = str(base)
    meta = read_keyvalue(base + ".meta")
    try:
        shape = (int(meta["rows"]), int(meta["cols"]))
        traj = load_trajectory(base + ".csv", shape, seed=int(meta["seed"]),
                               descriptor=meta["generator"], alpha=float(meta["alpha"]),
                               persistence=float(meta.get("persistence", "0.0")))
    except KeyError as exc:
        raise ValidationError(f"{base}.meta: missing key {exc}") from None
    scheme = scheme_from_trajectory(traj)
    for key in ("m", "m_distinct", "jumps"):
        if key in meta and int(meta[key]) != scheme.metadata()[key]:
            raise ValidationError(f"{base}.meta: {key}={meta[key]} disagrees with trajectory")
    return scheme
