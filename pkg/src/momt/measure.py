"""Discrete measures, couplings, marginalization, disintegration, gluing.

Axes are 0-based everywhere in the library; the CLI translates from the
1-based convention used in instance files.  All types are immutable after
construction and every operation is a pure function.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptySubset,
    IndexOutOfRange,
    InvariantViolation,
    MapDomainGap,
    MarginalMismatch,
)
from .tolerances import GLUE_MARGINAL_TOL, MASS_FLOOR, STORAGE_TOL


@dataclass(frozen=True)
class Space:
    """A finite point cloud in R^d; each point is one atom location."""

    name: str
    points: np.ndarray  # (n, d)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise InvariantViolation(f"space {self.name!r}: need a nonempty (n, d) array")
        object.__setattr__(self, "points", pts)
        if pts.shape[0] > 1:
            diff = pts[:, None, :] - pts[None, :, :]
            dist = np.sqrt((diff**2).sum(-1))
            np.fill_diagonal(dist, np.inf)
            if dist.min() <= STORAGE_TOL:
                i, j = np.unravel_index(np.argmin(dist), dist.shape)
                raise InvariantViolation(
                    f"space {self.name!r}: atoms {i} and {j} coincide within {STORAGE_TOL}"
                )

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class DiscreteMeasure:
    """Probability weights over the atoms of a space."""

    space: Space
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if w.ndim != 1 or w.shape[0] != self.space.size:
            raise InvariantViolation("weight vector length must equal the atom count")
        if (w < -STORAGE_TOL).any():
            raise InvariantViolation("weights must be nonnegative")
        if abs(w.sum() - 1.0) > STORAGE_TOL:
            raise InvariantViolation(f"weights sum to {w.sum()!r}, expected 1")

    @property
    def size(self) -> int:
        return self.space.size


def product_space(spaces: list[Space], name: str | None = None) -> Space:
    """Space whose atoms are all concatenated coordinate tuples, in C order."""
    if len(spaces) == 1:
        return spaces[0]
    shape = tuple(s.size for s in spaces)
    rows = []
    for combo in np.ndindex(shape):
        rows.append(np.concatenate([s.points[i] for s, i in zip(spaces, combo)]))
    return Space(name or "x".join(s.name for s in spaces), np.array(rows))


@dataclass(frozen=True)
class Coupling:
    """Sparse nonnegative mass assignment over multi-indices, total mass 1."""

    arities: tuple[int, ...]
    entries: dict[tuple[int, ...], float]

    def __post_init__(self):
        clean = {}
        total = 0.0
        for idx, mass in self.entries.items():
            idx = tuple(int(i) for i in idx)
            if len(idx) != len(self.arities):
                raise InvariantViolation(f"index {idx} has wrong length")
            for ax, (i, n) in enumerate(zip(idx, self.arities)):
                if not 0 <= i < n:
                    raise IndexOutOfRange(f"index {idx} out of bounds on axis {ax}")
            if mass <= MASS_FLOOR:
                continue
            clean[idx] = clean.get(idx, 0.0) + float(mass)
            total += mass
        if abs(total - 1.0) > STORAGE_TOL:
            raise InvariantViolation(f"total mass {total!r} differs from 1")
        object.__setattr__(self, "entries", clean)
        object.__setattr__(self, "arities", tuple(int(n) for n in self.arities))

    # -- constructors ------------------------------------------------------

    @staticmethod
    def from_dense(array: np.ndarray) -> "Coupling":
        array = np.asarray(array, dtype=float)
        entries = {
            tuple(int(i) for i in idx): float(array[idx])
            for idx in np.ndindex(array.shape)
            if array[idx] > MASS_FLOOR
        }
        return Coupling(array.shape, entries)

    @staticmethod
    def from_map(mu: DiscreteMeasure, images: dict[int, tuple[int, ...]],
                 arities: tuple[int, ...]) -> "Coupling":
        """Graph coupling (id x T)#mu: all of atom i's mass sits at (i, T(i))."""
        entries = {}
        for i, w in enumerate(mu.weights):
            if w <= MASS_FLOOR:
                continue
            if i not in images:
                raise MapDomainGap(i)
            entries[(i, *images[i])] = float(w)
        return Coupling(arities, entries)

    # -- views -------------------------------------------------------------

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.arities)
        for idx, mass in self.entries.items():
            out[idx] = mass
        return out

    def axis_marginal(self, axis: int) -> np.ndarray:
        out = np.zeros(self.arities[axis])
        for idx, mass in self.entries.items():
            out[idx[axis]] += mass
        return out

    def marginal_on(self, axes: tuple[int, ...]) -> np.ndarray:
        """Dense restriction to a subset of axes (in the subset's own order)."""
        out = np.zeros(tuple(self.arities[a] for a in axes))
        for idx, mass in self.entries.items():
            out[tuple(idx[a] for a in axes)] += mass
        return out

    def support(self) -> list[tuple[int, ...]]:
        return sorted(self.entries)

    def mass_at(self, idx: tuple[int, ...]) -> float:
        return self.entries.get(tuple(idx), 0.0)

    def total_variation(self, other: "Coupling") -> float:
        if self.arities != other.arities:
            raise InvariantViolation("couplings live on different grids")
        keys = set(self.entries) | set(other.entries)
        return 0.5 * sum(abs(self.mass_at(k) - other.mass_at(k)) for k in keys)

    def fibers(self, axis: int) -> dict[int, dict[tuple[int, ...], float]]:
        """Per axis-atom conditional masses over the complementary multi-index."""
        out: dict[int, dict[tuple[int, ...], float]] = {}
        for idx, mass in self.entries.items():
            rest = idx[:axis] + idx[axis + 1:]
            out.setdefault(idx[axis], {})[rest] = mass
        return out

    def push_axis_map(self, axis: int, mapping: np.ndarray) -> "Coupling":
        """Push forward along an index map applied to one axis."""
        entries: dict[tuple[int, ...], float] = {}
        for idx, mass in self.entries.items():
            new = idx[:axis] + (int(mapping[idx[axis]]),) + idx[axis + 1:]
            entries[new] = entries.get(new, 0.0) + mass
        return Coupling(self.arities, entries)

    def mix(self, other: "Coupling", t: float) -> "Coupling":
        keys = set(self.entries) | set(other.entries)
        entries = {k: (1 - t) * self.mass_at(k) + t * other.mass_at(k) for k in keys}
        return Coupling(self.arities, entries)


@dataclass(frozen=True)
class Disintegration:
    """Base marginal on a conditioning block plus one conditional per base atom.

    Conditionals are measures over the complementary product space, indexed in
    C order of the complementary axes.  Recombining conditional weights against
    base masses reproduces the source coupling entrywise.
    """

    conditioning: tuple[int, ...]
    base: Coupling
    conditionals: dict[tuple[int, ...], DiscreteMeasure]
    complement: tuple[int, ...] = field(default=())

    def conditional_weights(self, base_atom: tuple[int, ...]) -> np.ndarray:
        return self.conditionals[base_atom].weights


def _check_subset(subset, n_axes, *, proper=False):
    subset = tuple(int(a) for a in subset)
    if not subset:
        raise EmptySubset("axis subset is empty")
    if any(subset[i] >= subset[i + 1] for i in range(len(subset) - 1)):
        raise InvariantViolation(f"axis subset {subset} must be strictly increasing")
    if subset[0] < 0 or subset[-1] >= n_axes:
        raise IndexOutOfRange(f"axis subset {subset} outside 0..{n_axes - 1}")
    if proper and len(subset) == n_axes:
        raise InvariantViolation("axis subset must be proper")
    return subset


def pushforward(plan: Coupling, subset: tuple[int, ...]) -> Coupling:
    """Marginalize a coupling onto a strictly increasing subset of axes."""
    subset = _check_subset(subset, len(plan.arities))
    entries: dict[tuple[int, ...], float] = {}
    for idx, mass in plan.entries.items():
        key = tuple(idx[a] for a in subset)
        entries[key] = entries.get(key, 0.0) + mass
    return Coupling(tuple(plan.arities[a] for a in subset), entries)


def disintegrate(plan: Coupling, conditioning: tuple[int, ...],
                 spaces: list[Space] | None = None) -> Disintegration:
    """Split a coupling into a base marginal and conditionals over its atoms.

    Conditionals exist exactly for base atoms of positive mass; their weights
    are entry(base, .) / base_mass, laid out in C order of the complementary
    axes.  When spaces are given the conditional measures carry the true
    product geometry, otherwise synthetic unit-grid spaces are used.
    """
    n = len(plan.arities)
    conditioning = _check_subset(conditioning, n, proper=True)
    complement = tuple(a for a in range(n) if a not in conditioning)
    base = pushforward(plan, conditioning)
    comp_shape = tuple(plan.arities[a] for a in complement)
    if spaces is not None:
        comp_space = product_space([spaces[a] for a in complement])
    else:
        grid = np.arange(int(np.prod(comp_shape)), dtype=float)[:, None]
        comp_space = Space("residual", grid)

    cond_tables: dict[tuple[int, ...], np.ndarray] = {}
    for idx, mass in plan.entries.items():
        b = tuple(idx[a] for a in conditioning)
        c = tuple(idx[a] for a in complement)
        table = cond_tables.setdefault(b, np.zeros(comp_shape))
        table[c] += mass
    conditionals = {
        b: DiscreteMeasure(comp_space, (table / base.mass_at(b)).reshape(-1))
        for b, table in cond_tables.items()
    }
    return Disintegration(conditioning, base, conditionals, complement)


def recombine(dis: Disintegration, arities: tuple[int, ...]) -> Coupling:
    """Multiply conditionals back against the base; inverse of disintegrate."""
    comp_shape = tuple(arities[a] for a in dis.complement)
    entries: dict[tuple[int, ...], float] = {}
    for b, mass in dis.base.entries.items():
        weights = dis.conditionals[b].weights.reshape(comp_shape)
        for c in np.ndindex(comp_shape):
            w = weights[c]
            if w <= MASS_FLOOR:
                continue
            idx = [0] * len(arities)
            for a, i in zip(dis.conditioning, b):
                idx[a] = i
            for a, i in zip(dis.complement, c):
                idx[a] = i
            entries[tuple(idx)] = mass * w
    return Coupling(arities, entries)


def glue(left: Coupling, right: Coupling) -> Coupling:
    """Glue two couplings sharing their first marginal into a triple coupling.

    left lives on X x Y, right on X x Z; the output conditional over each
    x atom is the product of the two input conditionals.
    """
    if left.arities[0] != right.arities[0]:
        raise MarginalMismatch(0, float("inf"), "first-axis atom counts differ")
    mu_left = left.axis_marginal(0)
    mu_right = right.axis_marginal(0)
    dev = np.abs(mu_left - mu_right).max()
    if dev > GLUE_MARGINAL_TOL:
        raise MarginalMismatch(0, dev)
    left_fib = left.fibers(0)
    right_fib = right.fibers(0)
    entries: dict[tuple[int, ...], float] = {}
    for x, mu_x in enumerate(mu_left):
        if mu_x <= MASS_FLOOR:
            continue
        for yrest, wy in left_fib.get(x, {}).items():
            for zrest, wz in right_fib.get(x, {}).items():
                entries[(x, *yrest, *zrest)] = wy * wz / mu_x
    return Coupling(left.arities + right.arities[1:], entries)


def assemble_product_conditional(
    base: Coupling,
    base_axes: tuple[int, ...],
    dirac_blocks: list[tuple[tuple[int, ...], dict[tuple[int, ...], tuple[int, ...]]]],
    residual: Disintegration | None,
    arities: tuple[int, ...],
) -> Coupling:
    """Assemble a full coupling whose conditional at each base atom is a
    product of Dirac blocks and one residual conditional.

    dirac_blocks is a list of (block_axes, mapping) with mapping defined on
    every positive-mass base atom; residual, when given, must be conditioned
    on the same base atoms and covers the remaining axes.
    """
    n = len(arities)
    base_axes = _check_subset(base_axes, n)
    covered = set(base_axes)
    for block_axes, mapping in dirac_blocks:
        covered |= set(block_axes)
    res_axes: tuple[int, ...] = ()
    if residual is not None:
        res_axes = residual.complement
        covered |= set(res_axes)
    if covered != set(range(n)):
        raise InvariantViolation("axis blocks do not cover the full grid")

    comp_shape = tuple(arities[a] for a in res_axes)
    entries: dict[tuple[int, ...], float] = {}
    for b, mass in base.entries.items():
        idx = [0] * n
        for a, i in zip(base_axes, b):
            idx[a] = i
        for block_axes, mapping in dirac_blocks:
            if b not in mapping:
                raise MapDomainGap(b)
            image = mapping[b]
            for a, i in zip(block_axes, image):
                idx[a] = int(i)
        if residual is None:
            entries[tuple(idx)] = entries.get(tuple(idx), 0.0) + mass
            continue
        if b not in residual.conditionals:
            raise MapDomainGap(b)
        weights = residual.conditional_weights(b).reshape(comp_shape)
        for c in np.ndindex(comp_shape):
            w = weights[c]
            if w <= MASS_FLOOR:
                continue
            for a, i in zip(res_axes, c):
                idx[a] = i
            key = tuple(idx)
            entries[key] = entries.get(key, 0.0) + mass * w
    out = Coupling(arities, entries)
    return out


def marginals_match(plan: Coupling, measures: list[DiscreteMeasure],
                    tol: float = 1e-8) -> float:
    """Largest deviation between the plan's axis marginals and the targets."""
    worst = 0.0
    for axis, m in enumerate(measures):
        dev = float(np.abs(plan.axis_marginal(axis) - m.weights).max())
        worst = max(worst, dev)
        if dev > tol:
            raise MarginalMismatch(axis, dev)
    return worst
