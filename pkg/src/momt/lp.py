"""Exact primal/dual solver for discrete Monge-Kantorovich linear programs.

The solver is a revised simplex over the dense column grid with Bland's rule
for anti-cycling: deterministic, returns basic (vertex) solutions and exact
dual multipliers.  Maximization instances are negated internally and the
sense is restored in all reported quantities.

A polytope is described by marginal-type equality constraints: each
constraint pins the plan's restriction to a block of axes.  The standard
problem uses one single-axis block per marginal; pair-constrained systems
(plans with prescribed two-axis restrictions) reuse the same machinery.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    InstanceTooLarge,
    InvariantViolation,
    MarginalMismatch,
    NonFiniteCost,
    SolverError,
)
from .instance import DiscreteInstance
from .measure import Coupling, DiscreteMeasure
from .tolerances import (
    ACTIVE_TOL,
    GAP_TOL,
    MASS_FLOOR,
    RATIO_TOL,
    REDUCED_COST_TOL,
    VERTEX_PIVOT_TOL,
    WITNESS_TV_TOL,
)

DEFAULT_GRID_CAP = 200_000
ORACLE_GRID_CAP = 81
ORACLE_ATOM_CAP = 12
_PROBE_SEED = 91217  # fixed: uniqueness probes must be reproducible


@dataclass(frozen=True)
class MarginalConstraint:
    """Pin the plan's restriction to `axes` to the dense `target` array."""

    axes: tuple[int, ...]
    target: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(int(a) for a in self.axes))
        object.__setattr__(self, "target", np.asarray(self.target, dtype=float))


class PolytopeModel:
    """Equality-form LP data A x = b, x >= 0 over a flattened multi-index grid.

    Rows are grouped by constraint block; linearly dependent rows are dropped
    deterministically so the kept system has full row rank.  For the standard
    chain of single-axis marginals the drop rule is structural: the last row
    of every marginal after the first (their block sums all equal the total
    mass).  General systems fall back to a greedy numeric selection.
    """

    def __init__(self, arities, constraints, extra_rows=(), grid_cap=DEFAULT_GRID_CAP):
        self.arities = tuple(int(n) for n in arities)
        self.n_cols = int(np.prod(self.arities))
        if self.n_cols > grid_cap:
            raise InstanceTooLarge(
                f"grid has {self.n_cols} cells, cap is {grid_cap}"
            )
        self.constraints = list(constraints)
        self.extra_rows = [(np.asarray(r, dtype=float), float(v)) for r, v in extra_rows]
        self._build()

    def _build(self):
        grid = np.indices(self.arities).reshape(len(self.arities), -1)
        rows, rhs, meta = [], [], []
        for ci, con in enumerate(self.constraints):
            shape = tuple(self.arities[a] for a in con.axes)
            if con.target.shape != shape:
                raise InvariantViolation(
                    f"constraint on axes {con.axes}: target shape {con.target.shape}, "
                    f"expected {shape}"
                )
            pos = np.ravel_multi_index([grid[a] for a in con.axes], shape)
            block = np.zeros((int(np.prod(shape)), self.n_cols))
            block[pos, np.arange(self.n_cols)] = 1.0
            rows.append(block)
            rhs.append(con.target.reshape(-1))
            meta.extend((ci, p) for p in range(block.shape[0]))
        A_full = np.vstack(rows) if rows else np.zeros((0, self.n_cols))
        b_full = np.concatenate(rhs) if rhs else np.zeros(0)
        self.row_meta = meta

        keep = self._independent_rows(A_full)
        self.kept = keep
        A = A_full[keep]
        b = b_full[keep]
        for row, val in self.extra_rows:
            if row.shape != (self.n_cols,):
                raise InvariantViolation("extra row has wrong length")
            if val < 0:
                row, val = -row, -val
            coeff, _res, *_ = np.linalg.lstsq(A.T, row, rcond=None)
            residual = row - A.T @ coeff
            if np.abs(residual).max() > 1e-9 * (1.0 + np.abs(row).max()):
                A = np.vstack([A, row])
                b = np.append(b, val)
            elif abs(coeff @ b - val) > 1e-7 * (1.0 + abs(val)):
                raise SolverError("extra equality row is inconsistent with the polytope")
        self.A = A
        self.b = b
        self.A_full = A_full
        self.b_full = b_full

    def _independent_rows(self, A_full):
        n_rows = A_full.shape[0]
        single_axis = all(len(c.axes) == 1 for c in self.constraints)
        covers = sorted(a for c in self.constraints for a in c.axes)
        if single_axis and covers == list(range(len(self.arities))):
            keep = []
            offset = 0
            for ci, con in enumerate(self.constraints):
                block_len = self.arities[con.axes[0]]
                last = offset + block_len - 1
                for r in range(offset, offset + block_len):
                    if ci > 0 and r == last:
                        continue
                    keep.append(r)
                offset += block_len
            return keep
        if self.n_cols > 20_000:
            raise InstanceTooLarge(
                "general constraint systems are limited to 20000 grid cells"
            )
        keep, basis = [], []
        for r in range(n_rows):
            v = A_full[r].astype(float)
            for u in basis:
                v = v - (u @ A_full[r]) * u
            norm = np.linalg.norm(v)
            if norm > 1e-9 * (1.0 + np.linalg.norm(A_full[r])):
                basis.append(v / norm)
                keep.append(r)
        return keep

    def check_feasible(self, plan: Coupling, tol: float = 1e-8):
        """Raise MarginalMismatch if the plan violates any constraint block."""
        for con in self.constraints:
            dev = float(np.abs(plan.marginal_on(con.axes) - con.target).max())
            if dev > tol:
                raise MarginalMismatch(con.axes, dev)

    def columns(self, cols) -> np.ndarray:
        return self.A[:, cols]


def standard_model(measures: list[DiscreteMeasure], grid_cap=DEFAULT_GRID_CAP,
                   extra_rows=()) -> PolytopeModel:
    arities = tuple(m.size for m in measures)
    cons = [MarginalConstraint((k,), m.weights) for k, m in enumerate(measures)]
    return PolytopeModel(arities, cons, extra_rows=extra_rows, grid_cap=grid_cap)


# ---------------------------------------------------------------------------
# revised simplex
# ---------------------------------------------------------------------------

@dataclass
class _SimplexState:
    basis: list[int]          # column ids; id >= n_cols means artificial e_{id-n_cols}
    iterations: int = 0


def _basis_matrix(A, m, basis):
    B = np.empty((m, m))
    for p, col in enumerate(basis):
        if col >= A.shape[1]:
            B[:, p] = 0.0
            B[col - A.shape[1], p] = 1.0
        else:
            B[:, p] = A[:, col]
    return B


def _pivot_loop(A, b, costs, state, allow_enter, max_iter):
    """Bland-rule pivoting until no entering column (min sense)."""
    m, n = A.shape
    while True:
        state.iterations += 1
        if state.iterations > max_iter:
            raise SolverError("simplex iteration cap exceeded")
        B = _basis_matrix(A, m, state.basis)
        try:
            cB = np.array([costs[c] for c in state.basis])
            y = np.linalg.solve(B.T, cB)
            xB = np.linalg.solve(B, b)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"singular basis: {exc}") from exc
        reduced = costs[:n] - A.T @ y
        candidates = np.flatnonzero(reduced < -REDUCED_COST_TOL)
        entering = -1
        for j in candidates:
            if allow_enter[j] and j not in state.basis:
                entering = int(j)
                break
        if entering < 0:
            return xB, y
        d = np.linalg.solve(B, A[:, entering])
        pos = d > RATIO_TOL
        if not pos.any():
            raise SolverError("unbounded direction on a mass polytope")
        ratios = np.full(m, np.inf)
        ratios[pos] = np.maximum(xB[pos], 0.0) / d[pos]
        rmin = ratios.min()
        tied = np.flatnonzero(ratios <= rmin + 1e-10 * (1.0 + rmin))
        leaving_pos = min(tied, key=lambda p: state.basis[p])
        state.basis[leaving_pos] = entering


def _drive_out_artificials(A, b, state):
    m, n = A.shape
    for p in range(m):
        if state.basis[p] < n:
            continue
        B = _basis_matrix(A, m, state.basis)
        w = np.linalg.solve(B.T, np.eye(m)[:, p])
        row = w @ A
        cand = np.flatnonzero(np.abs(row) > 1e-9)
        chosen = -1
        for j in cand:
            if j not in state.basis:
                chosen = int(j)
                break
        if chosen < 0:
            raise SolverError("could not pivot artificial out of a full-rank system")
        state.basis[p] = chosen


def _simplex(A, b, costs, max_iter=200_000):
    """Two-phase revised simplex; returns (x over columns, duals, iterations)."""
    m, n = A.shape
    A = A.copy()
    b = b.copy()
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0

    state = _SimplexState(basis=[n + i for i in range(m)])
    phase1 = np.concatenate([np.zeros(n), np.ones(m)])
    allow = np.ones(n, dtype=bool)
    xB, _ = _pivot_loop(A, b, phase1, state, allow, max_iter)
    infeas = sum(xB[p] for p in range(m) if state.basis[p] >= n)
    if infeas > 1e-9:
        raise SolverError(f"phase-1 infeasibility {infeas:.3e}")
    _drive_out_artificials(A, b, state)

    full_costs = np.concatenate([costs, np.zeros(m)])
    xB, y = _pivot_loop(A, b, full_costs, state, allow, max_iter)
    if (xB < -1e-9).any():
        raise SolverError("basic solution drifted negative")
    x = np.zeros(n)
    for p, col in enumerate(state.basis):
        if col < n:
            x[col] = max(xB[p], 0.0)
    y = y * np.where(neg, -1.0, 1.0)
    return x, y, state.iterations


# ---------------------------------------------------------------------------
# potentials and solve
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Potentials:
    """One dual vector per marginal, in the instance's own sense.

    Feasibility: sum_k phi_k <= c on the full grid for minimization (>= for
    maximization), up to 1e-9.  The gauge is canonical: every vector after
    the first has zero mean against its marginal, the constant sits in the
    first vector.
    """

    vectors: list[np.ndarray]
    sense: str = "min"

    def sum_grid(self, arities) -> np.ndarray:
        total = np.zeros(arities)
        for k, phi in enumerate(self.vectors):
            shape = [1] * len(arities)
            shape[k] = arities[k]
            total = total + phi.reshape(shape)
        return total

    def dual_value(self, measures: list[DiscreteMeasure]) -> float:
        return float(sum(phi @ m.weights for phi, m in zip(self.vectors, measures)))

    def feasibility_violation(self, cost_grid: np.ndarray) -> float:
        """Worst violation of the dual inequality over the full grid."""
        slack = cost_grid - self.sum_grid(cost_grid.shape)
        if self.sense == "min":
            return float(max(0.0, -slack.min()))
        return float(max(0.0, slack.max()))


def _canonical_gauge(vectors, measures):
    out = [v.copy() for v in vectors]
    shift = 0.0
    for k in range(1, len(out)):
        mean = float(out[k] @ measures[k].weights)
        out[k] -= mean
        shift += mean
    out[0] += shift
    return out


@dataclass(frozen=True)
class MinimizingSet:
    """Multi-indices where the dual inequality is active within tolerance."""

    indices: frozenset
    tolerance: float = ACTIVE_TOL

    def __contains__(self, idx):
        return tuple(idx) in self.indices


def minimizing_set(instance: DiscreteInstance, potentials: Potentials,
                   tolerance: float = ACTIVE_TOL) -> MinimizingSet:
    slack = np.abs(instance.cost_grid() - potentials.sum_grid(instance.arities))
    idx = frozenset(
        tuple(int(i) for i in t) for t in np.argwhere(slack <= tolerance)
    )
    return MinimizingSet(idx, tolerance)


@dataclass
class SolveResult:
    plan: Coupling
    potentials: Potentials
    value: float
    iterations: int = 0
    duality_gap: float = 0.0
    slack_residual: float = 0.0

    def __iter__(self):
        return iter((self.plan, self.potentials, self.value))


def _coupling_from_x(x: np.ndarray, arities: tuple[int, ...]) -> Coupling:
    """Prune simplex dust and renormalize the sub-1e-9 total-mass drift."""
    total = float(x.sum())
    if abs(total - 1.0) > 1e-9:
        raise SolverError(f"solution mass {total!r} is not a probability")
    entries = {}
    for col in np.flatnonzero(x > MASS_FLOOR):
        idx = tuple(int(i) for i in np.unravel_index(col, arities))
        entries[idx] = float(x[col]) / total
    return Coupling(arities, entries)


def solve(instance: DiscreteInstance, grid_cap: int = DEFAULT_GRID_CAP) -> SolveResult:
    """Solve the transport LP exactly.

    Returns a basic optimal plan (a polytope vertex), canonical-gauge dual
    potentials, and the optimal value; strong duality and complementary
    slackness residuals are carried along for auditing.
    """
    grid = instance.cost_grid()
    if not np.isfinite(grid).all():
        raise NonFiniteCost("cost grid contains non-finite values")
    model = standard_model(instance.measures, grid_cap=grid_cap)
    sign = -1.0 if instance.sense == "max" else 1.0
    c = sign * grid.reshape(-1)
    x, y, iters = _simplex(model.A, model.b, c)

    residual = np.abs(model.A_full @ x - model.b_full).max()
    if residual > 1e-8:
        raise SolverError(f"optimal basis violates marginals by {residual:.3e}")

    plan = _coupling_from_x(x, instance.arities)

    vectors = [np.zeros(n) for n in instance.arities]
    for r, kept_row in enumerate(model.kept):
        ci, pos = model.row_meta[kept_row]
        vectors[ci][pos] = sign * y[r]
    vectors = _canonical_gauge(vectors, instance.measures)
    potentials = Potentials(vectors, instance.sense)

    value = float(grid.reshape(-1) @ x)
    gap = abs(value - potentials.dual_value(instance.measures))
    slack_grid = grid - potentials.sum_grid(instance.arities)
    slack_res = float(
        sum(abs(slack_grid[idx]) * mass for idx, mass in plan.entries.items())
    )
    return SolveResult(plan, potentials, value, iters, gap, slack_res)


def solve_model(model: PolytopeModel, cost_vector: np.ndarray,
                sense: str = "min") -> tuple[np.ndarray, float, int]:
    """Optimize an arbitrary linear functional over a constraint polytope."""
    sign = -1.0 if sense == "max" else 1.0
    x, _, iters = _simplex(model.A, model.b, sign * np.asarray(cost_vector, float))
    return x, float(np.asarray(cost_vector, float) @ x), iters


# ---------------------------------------------------------------------------
# vertex test
# ---------------------------------------------------------------------------

def _as_model(constraints, arities=None) -> PolytopeModel:
    if isinstance(constraints, PolytopeModel):
        return constraints
    if constraints and isinstance(constraints[0], DiscreteMeasure):
        return standard_model(constraints)
    return PolytopeModel(arities, constraints)


def is_vertex(plan: Coupling, constraints, tol: float = VERTEX_PIVOT_TOL) -> bool:
    """True iff the constraint columns active on the support are independent."""
    model = _as_model(constraints, plan.arities)
    model.check_feasible(plan)
    support = plan.support()
    if not support:
        return True
    cols = [int(np.ravel_multi_index(idx, plan.arities)) for idx in support]
    sub = model.columns(cols)
    rank = np.linalg.matrix_rank(sub, tol=tol)
    return int(rank) == len(cols)


# ---------------------------------------------------------------------------
# exhaustive vertex enumeration (the ground-truth oracle)
# ---------------------------------------------------------------------------

def _vertex_key(x, tol_digits=11):
    return tuple(
        (int(c), round(float(x[c]), tol_digits)) for c in np.flatnonzero(x > 1e-10)
    )


def _initial_basis_for(A, b):
    m, n = A.shape
    state = _SimplexState(basis=[n + i for i in range(m)])
    phase1 = np.concatenate([np.zeros(n), np.ones(m)])
    xB, _ = _pivot_loop(A, b, phase1, state, np.ones(n, dtype=bool), 200_000)
    infeas = sum(xB[p] for p in range(m) if state.basis[p] >= n)
    if infeas > 1e-9:
        raise SolverError(f"phase-1 infeasibility {infeas:.3e}")
    _drive_out_artificials(A, b, state)
    return state.basis


def _presolve_zero_cells(A, b):
    """Drop columns forced to zero by zero-mass rows with one-signed support.

    Such columns can enter bases only at level zero, multiplying the
    degenerate basis graph without contributing vertices.  Row independence
    is re-established on the reduced column space.
    """
    n = A.shape[1]
    forced = np.zeros(n, dtype=bool)
    for r in range(A.shape[0]):
        if abs(b[r]) <= 1e-13 and (A[r] >= -1e-13).all():
            forced |= A[r] > 1e-9
    keep_cols = np.flatnonzero(~forced)
    A2 = A[:, keep_cols]
    keep_rows, basis = [], []
    for r in range(A2.shape[0]):
        v = A2[r].astype(float)
        for u in basis:
            v = v - (u @ A2[r]) * u
        norm = np.linalg.norm(v)
        if norm > 1e-9 * (1.0 + np.linalg.norm(A2[r])):
            basis.append(v / norm)
            keep_rows.append(r)
        elif abs(b[r]) > 1e-9:
            # a dropped row must be implied; a large rhs means infeasibility
            raise SolverError("zero-support row with positive mass requirement")
    return A2[keep_rows], b[keep_rows], keep_cols


def enumerate_vertices(model: PolytopeModel, max_bases: int = 200_000):
    """All basic feasible solutions, found by breadth-first pivoting.

    Degenerate vertices admit many bases; all of them are visited so no
    vertex hiding behind a degenerate pivot is missed.
    """
    A, b, keep_cols = _presolve_zero_cells(model.A, model.b)
    m, n = A.shape
    start = tuple(sorted(_initial_basis_for(A, b)))
    seen_bases = {start}
    queue = [start]
    vertices: dict[tuple, np.ndarray] = {}
    while queue:
        if len(seen_bases) > max_bases:
            raise InstanceTooLarge(
                f"basis graph exceeded {max_bases} bases during enumeration"
            )
        basis = list(queue.pop())
        B = _basis_matrix(A, m, basis)
        xB = np.linalg.solve(B, b)
        x = np.zeros(model.n_cols)
        for p, col in enumerate(basis):
            x[keep_cols[col]] = max(xB[p], 0.0)
        vertices.setdefault(_vertex_key(x), x)
        in_basis = set(basis)
        directions = np.linalg.solve(B, A)
        for e in range(n):
            if e in in_basis:
                continue
            d = directions[:, e]
            pos = d > RATIO_TOL
            if not pos.any():
                continue
            ratios = np.full(m, np.inf)
            ratios[pos] = np.maximum(xB[pos], 0.0) / d[pos]
            rmin = ratios.min()
            tied = np.flatnonzero(ratios <= rmin + 1e-10 * (1.0 + rmin))
            for p in tied:
                nb = basis.copy()
                nb[p] = e
                key = tuple(sorted(nb))
                if key not in seen_bases:
                    seen_bases.add(key)
                    queue.append(key)
    return [vertices[k] for k in sorted(vertices)]


def oracle_enumerate(instance: DiscreteInstance,
                     max_bases: int = 200_000) -> list[tuple[Coupling, float]]:
    """Exhaustively enumerate polytope vertices of a small instance.

    Hard caps keep this honest: at most 81 grid cells and 12 atoms in total.
    """
    arities = instance.arities
    if int(np.prod(arities)) > ORACLE_GRID_CAP or sum(arities) > ORACLE_ATOM_CAP:
        raise InstanceTooLarge(
            f"oracle caps are {ORACLE_GRID_CAP} cells / {ORACLE_ATOM_CAP} atoms, "
            f"got {arities}"
        )
    model = standard_model(instance.measures)
    grid = instance.cost_grid().reshape(-1)
    return [
        (_coupling_from_x(x, arities), float(grid @ x))
        for x in enumerate_vertices(model, max_bases=max_bases)
    ]


def support_enumerate(model: PolytopeModel) -> list[np.ndarray]:
    """Brute-force vertex enumeration over support patterns.

    Independent cross-check for the pivoting oracle; only viable on grids of
    a dozen cells or so.
    """
    from itertools import combinations

    A, b = model.A, model.b
    m, n = A.shape
    if n > 12:
        raise InstanceTooLarge("support enumeration is capped at 12 grid cells")
    rank = int(np.linalg.matrix_rank(A, tol=VERTEX_PIVOT_TOL))
    found: dict[tuple, np.ndarray] = {}
    for size in range(1, rank + 1):
        for cols in combinations(range(n), size):
            sub = A[:, cols]
            if np.linalg.matrix_rank(sub, tol=VERTEX_PIVOT_TOL) < size:
                continue
            sol, res, *_ = np.linalg.lstsq(sub, b, rcond=None)
            if (sol <= 1e-12).any():
                continue
            if np.abs(sub @ sol - b).max() > 1e-9:
                continue
            x = np.zeros(n)
            x[list(cols)] = sol
            found.setdefault(_vertex_key(x), x)
    return [found[k] for k in sorted(found)]


# ---------------------------------------------------------------------------
# uniqueness certificate
# ---------------------------------------------------------------------------

@dataclass
class UniquenessCertificate:
    status: str                       # unique | non-unique | inconclusive
    witness: Coupling | None = None
    face_probe_value_gap: float = 0.0
    max_tv_gap: float = 0.0


def uniqueness_certificate(instance: DiscreteInstance, primal: Coupling,
                           value: float) -> UniquenessCertificate:
    """Probe the optimal face with deterministic secondary objectives.

    The face {cost . x = value} is swept by two fixed random directions, each
    minimized and maximized; the solution is certified unique when every
    probe optimum coincides with the primal in total variation.
    """
    grid = instance.cost_grid().reshape(-1)
    model = standard_model(
        instance.measures, extra_rows=[(grid, float(value))]
    )
    rng = np.random.default_rng(_PROBE_SEED)
    n = model.n_cols
    max_tv = 0.0
    value_gap = 0.0
    witness = None
    for _ in range(2):
        probe = rng.standard_normal(n)
        lo_x, lo_val, _ = solve_model(model, probe, "min")
        hi_x, hi_val, _ = solve_model(model, probe, "max")
        value_gap = max(value_gap, hi_val - lo_val)
        for x in (lo_x, hi_x):
            cand = _coupling_from_x(x, instance.arities)
            tv = primal.total_variation(cand)
            if tv > max_tv:
                max_tv = tv
                witness = cand
    if max_tv <= GAP_TOL:
        return UniquenessCertificate("unique", None, value_gap, max_tv)
    if max_tv > WITNESS_TV_TOL:
        return UniquenessCertificate("non-unique", witness, value_gap, max_tv)
    return UniquenessCertificate("inconclusive", None, value_gap, max_tv)
