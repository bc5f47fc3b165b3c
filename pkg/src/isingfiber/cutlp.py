"""Cut-polytope LP relaxations over the suspension of the grid graph.

The suspension adds an apex vertex w joined to every cell. Apex edges (set E1)
carry the cell values of a table, grid edges (set E2) carry adjacent-pair
discordances, and the fiber becomes the lattice points of the cut polytope cut
by the two statistic hyperplanes. The polytope is approximated from the
outside by the triangle inequalities through w over every grid edge plus the
eight square inequalities per unit square, so LP feasibility and LP cell
bounds are sound: they never exclude a genuine completion, but may fail to
exclude an impossible one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .grid import GridTopology, SuffStats, topology
from .simplex import FEAS_TOL, solve_canonical

ROUND_TOL = 1e-6

Row = tuple[tuple[tuple[int, float], ...], str, float]


@dataclass(frozen=True)
class SuspensionIndex:
    """Variable numbering for the suspension of the m x n grid.

    Apex edges w--v(i,j) occupy [0, mn) in raster order; grid edges occupy
    [mn, 3mn-m-n) in the shared topology order (horizontals then verticals).
    """

    rows: int
    cols: int

    @property
    def e1_count(self) -> int:
        return self.rows * self.cols

    @property
    def e2_count(self) -> int:
        return 2 * self.rows * self.cols - self.rows - self.cols

    @property
    def n_vars(self) -> int:
        return self.e1_count + self.e2_count

    def cell_var(self, cell: int) -> int:
        return cell

    def edge_var_by_ordinal(self, ordinal: int) -> int:
        return self.e1_count + ordinal

    def edge_var(self, a: int, b: int) -> int:
        return self.e1_count + topology(self.rows, self.cols).edge_index[(a, b)]


@dataclass
class LPProblem:
    n_vars: int
    lower: np.ndarray
    upper: np.ndarray
    ineqs: list[Row]
    eqs: list[Row]
    objective: np.ndarray
    sense: str  # "min" | "max"

    def to_lp_format(self, name: str = "cutlp") -> str:
        """Serialize in CPLEX LP text format for external cross-checking."""

        def term(coeffs):
            return " ".join(f"{c:+g} x{v}" for v, c in coeffs)

        out = [f"\\ {name}", "Minimize" if self.sense == "min" else "Maximize"]
        out.append(" obj: " + (term(list(enumerate(self.objective))) or "0 x0"))
        out.append("Subject To")
        for i, (coeffs, rel, rhs) in enumerate(self.ineqs):
            op = {"<=": "<=", ">=": ">="}[rel]
            out.append(f" c{i}: {term(coeffs)} {op} {rhs:g}")
        for i, (coeffs, _, rhs) in enumerate(self.eqs):
            out.append(f" e{i}: {term(coeffs)} = {rhs:g}")
        out.append("Bounds")
        for v in range(self.n_vars):
            out.append(f" {self.lower[v]:g} <= x{v} <= {self.upper[v]:g}")
        out.append("End")
        return "\n".join(out) + "\n"


@dataclass(frozen=True)
class LPOutcome:
    status: str  # "optimal" | "infeasible" | "unbounded"
    value: float | None = None
    x: np.ndarray | None = None


@dataclass(frozen=True)
class CellBounds:
    status: str  # "bounded" | "infeasible"
    lo: int | None = None
    hi: int | None = None


def cut_semimetric(side, edges: Sequence[tuple]) -> list[int]:
    """Edge vector of a vertex bipartition: 1 iff the endpoints are separated.

    `side` maps each vertex to 0 or 1 (any Mapping, or a sequence when the
    vertices are integers).
    """
    lookup = side.__getitem__
    return [1 if lookup(a) != lookup(b) else 0 for a, b in edges]


def _triangle_rows(su: SuspensionIndex, topo: GridTopology) -> Iterator[Row]:
    for ordinal, (u, v) in enumerate(topo.edges):
        a, b, c = su.cell_var(u), su.cell_var(v), su.edge_var_by_ordinal(ordinal)
        yield (((a, 1.0), (b, 1.0), (c, 1.0)), "<=", 2.0)
        yield (((a, 1.0), (b, 1.0), (c, -1.0)), ">=", 0.0)
        yield (((a, 1.0), (b, -1.0), (c, 1.0)), ">=", 0.0)
        yield (((a, -1.0), (b, 1.0), (c, 1.0)), ">=", 0.0)


def _square_rows(su: SuspensionIndex, topo: GridTopology) -> Iterator[Row]:
    for square in topo.squares:
        evars = [su.edge_var_by_ordinal(e) for e in square]
        for minus in range(4):
            coeffs = tuple(
                (evars[i], -1.0 if i == minus else 1.0) for i in range(4)
            )
            yield (coeffs, "<=", 2.0)
            yield (coeffs, ">=", 0.0)


def build_lp(partial, stats: SuffStats, objective_cell: int, sense: str) -> LPProblem:
    """Full suspension LP for one cell objective over the relaxed fiber.

    `partial` provides rows/cols and the determined raster prefix. Determined
    cells pin their apex-edge variables, and grid edges with both endpoints
    determined are pinned to the induced discordance, since the triangle
    relaxation alone does not force that equality.
    """
    rows, cols = partial.rows, partial.cols
    su = SuspensionIndex(rows, cols)
    topo = topology(rows, cols)
    prefix = partial.prefix

    ineqs = list(_triangle_rows(su, topo)) + list(_square_rows(su, topo))
    eqs: list[Row] = [
        (tuple((su.cell_var(k), 1.0) for k in range(su.e1_count)), "==", float(stats.t1)),
        (
            tuple((su.edge_var_by_ordinal(e), 1.0) for e in range(su.e2_count)),
            "==",
            float(stats.t2),
        ),
    ]
    for k, val in enumerate(prefix):
        eqs.append((((su.cell_var(k), 1.0),), "==", float(val)))
    for ordinal, (u, v) in enumerate(topo.edges):
        if u < len(prefix) and v < len(prefix):
            eqs.append(
                (((su.edge_var_by_ordinal(ordinal), 1.0),), "==", float(abs(prefix[u] - prefix[v])))
            )

    objective = np.zeros(su.n_vars)
    objective[su.cell_var(objective_cell)] = 1.0
    return LPProblem(
        n_vars=su.n_vars,
        lower=np.zeros(su.n_vars),
        upper=np.ones(su.n_vars),
        ineqs=ineqs,
        eqs=eqs,
        objective=objective,
        sense=sense,
    )


def _presolve(problem: LPProblem):
    """Pin variables forced by single-variable equalities, iterating to a fixpoint.

    Returns (pinned value array masked by NaN for free vars, reduced eq rows)
    or None when a pin or constant row is inconsistent.
    """
    pinned = np.full(problem.n_vars, np.nan)
    fixed0 = problem.upper - problem.lower <= FEAS_TOL
    pinned[fixed0] = problem.lower[fixed0]

    eq_rows = [(list(coeffs), rhs) for coeffs, _, rhs in problem.eqs]
    changed = True
    while changed:
        changed = False
        remaining = []
        for coeffs, rhs in eq_rows:
            free = [(v, c) for v, c in coeffs if np.isnan(pinned[v])]
            rhs_red = rhs - sum(c * pinned[v] for v, c in coeffs if not np.isnan(pinned[v]))
            if not free:
                if abs(rhs_red) > FEAS_TOL:
                    return None
                continue
            if len(free) == 1:
                v, c = free[0]
                val = rhs_red / c
                if val < problem.lower[v] - FEAS_TOL or val > problem.upper[v] + FEAS_TOL:
                    return None
                pinned[v] = min(max(val, problem.lower[v]), problem.upper[v])
                changed = True
                continue
            remaining.append((free, rhs_red))
        eq_rows = remaining
    return pinned, eq_rows


def solve_lp(problem: LPProblem) -> LPOutcome:
    """Deterministic solve: presolve pins, then dense two-phase simplex."""
    if problem.n_vars < 1:
        raise ValueError("LP needs at least one variable")
    pre = _presolve(problem)
    if pre is None:
        return LPOutcome("infeasible")
    pinned, eq_rows = pre
    free = np.nonzero(np.isnan(pinned))[0]
    pos = {int(v): i for i, v in enumerate(free)}
    nf = free.size

    A_ub_rows, b_ub = [], []
    for coeffs, rel, rhs in problem.ineqs:
        row = np.zeros(nf)
        rhs_red = rhs
        for v, c in coeffs:
            if np.isnan(pinned[v]):
                row[pos[v]] += c
            else:
                rhs_red -= c * pinned[v]
        if rel == ">=":
            row, rhs_red = -row, -rhs_red
        if not row.any():
            if rhs_red < -FEAS_TOL:
                return LPOutcome("infeasible")
            continue
        A_ub_rows.append(row)
        b_ub.append(rhs_red)

    A_eq_rows, b_eq = [], []
    for coeffs, rhs_red in eq_rows:
        row = np.zeros(nf)
        for v, c in coeffs:
            row[pos[v]] += c
        A_eq_rows.append(row)
        b_eq.append(rhs_red)

    lb = problem.lower[free]
    ub = problem.upper[free]
    c_free = problem.objective[free].astype(float)
    sign = 1.0 if problem.sense == "min" else -1.0

    A_ub = np.array(A_ub_rows) if A_ub_rows else np.zeros((0, nf))
    b_ub_arr = np.array(b_ub) if b_ub else np.zeros(0)
    A_eq = np.array(A_eq_rows) if A_eq_rows else np.zeros((0, nf))
    b_eq_arr = np.array(b_eq) if b_eq else np.zeros(0)

    # shift to zero lower bounds
    if lb.any():
        b_ub_arr = b_ub_arr - A_ub @ lb
        b_eq_arr = b_eq_arr - A_eq @ lb

    res = solve_canonical(sign * c_free, A_ub, b_ub_arr, A_eq, b_eq_arr, ub - lb)
    if res.status != "optimal":
        return LPOutcome(res.status)

    x = pinned.copy()
    x[free] = res.x + lb
    value = float(problem.objective @ x)
    return LPOutcome("optimal", value, x)


def cell_bounds(partial, stats: SuffStats, cell: int) -> CellBounds:
    """Integerized LP bounds for one undetermined cell.

    Sound for the relaxation: every fiber completion of `partial` has its cell
    value inside [lo, hi]. When the rounded interval is empty the fiber itself
    must be empty, so that case also reports infeasible.
    """
    lo_out = solve_lp(build_lp(partial, stats, cell, "min"))
    if lo_out.status == "infeasible":
        return CellBounds("infeasible")
    hi_out = solve_lp(build_lp(partial, stats, cell, "max"))
    if hi_out.status == "infeasible":
        return CellBounds("infeasible")
    lo = max(0, int(np.ceil(lo_out.value - ROUND_TOL)))
    hi = min(1, int(np.floor(hi_out.value + ROUND_TOL)))
    if lo > hi:
        return CellBounds("infeasible")
    return CellBounds("bounded", lo, hi)


def violates_cut_inequalities(vector, rows: int, cols: int) -> bool:
    """True iff any box/triangle/square constraint of the relaxation fails by > FEAS_TOL."""
    su = SuspensionIndex(rows, cols)
    topo = topology(rows, cols)
    x = np.asarray(vector, dtype=float)
    if x.shape != (su.n_vars,):
        raise ValueError(f"expected vector of length {su.n_vars}, got shape {x.shape}")
    if (x < -FEAS_TOL).any() or (x > 1.0 + FEAS_TOL).any():
        return True
    for coeffs, rel, rhs in _triangle_rows(su, topo):
        lhs = sum(c * x[v] for v, c in coeffs)
        if rel == "<=" and lhs > rhs + FEAS_TOL:
            return True
        if rel == ">=" and lhs < rhs - FEAS_TOL:
            return True
    for coeffs, rel, rhs in _square_rows(su, topo):
        lhs = sum(c * x[v] for v, c in coeffs)
        if rel == "<=" and lhs > rhs + FEAS_TOL:
            return True
        if rel == ">=" and lhs < rhs - FEAS_TOL:
            return True
    return False


def suspension_semimetric(table) -> np.ndarray:
    """The cut vector induced by a table: apex coordinates are the cell values,
    grid-edge coordinates the discordances (w on the zero side)."""
    topo = topology(table.rows, table.cols)
    cells = table.cells
    e1 = np.array(cells, dtype=float)
    e2 = np.array([abs(cells[a] - cells[b]) for a, b in topo.edges], dtype=float)
    return np.concatenate([e1, e2])


def state_lp_feasible(
    rows: int,
    cols: int,
    prefix: Sequence[int],
    stats: SuffStats,
    pin: int | None = None,
) -> bool:
    """LP feasibility of a raster-prefix state, optionally extended by one value.

    Equivalent to solving the full build_lp problem, but assembles only the
    rows that touch an undetermined cell: constraints entirely inside the
    determined region hold automatically because the determined part induces a
    genuine cut semimetric. This keeps the check cheap late in a large table,
    which is the only regime where the sampler triggers it.
    """
    topo = topology(rows, cols)
    n = topo.n_cells
    values = list(prefix)
    if pin is not None:
        values.append(pin)
    k = len(values)
    if k > n:
        raise ValueError("prefix longer than grid")

    ones_det = sum(values)
    if k == n:
        discord = sum(values[a] != values[b] for a, b in topo.edges)
        return ones_det == stats.t1 and discord == stats.t2

    # variables: apex edges of free cells, then grid edges with a free endpoint
    free_cells = list(range(k, n))
    cell_pos = {c: i for i, c in enumerate(free_cells)}
    free_edges = []
    edge_pos = {}
    discord_det = 0
    for ordinal, (u, v) in enumerate(topo.edges):
        if u < k and v < k:
            discord_det += values[u] != values[v]
        else:
            edge_pos[ordinal] = len(free_cells) + len(free_edges)
            free_edges.append(ordinal)
    nf = len(free_cells) + len(free_edges)

    r1 = stats.t1 - ones_det
    r2 = stats.t2 - discord_det
    if r1 < 0 or r1 > len(free_cells) or r2 < 0 or r2 > len(free_edges):
        return False

    def cell_term(c):
        # (column, coefficient 1.0) for a free cell, or a constant for a determined one
        if c >= k:
            return cell_pos[c], None
        return None, float(values[c])

    A_ub_rows, b_ub = [], []

    def add(entries, rel, rhs):
        row = np.zeros(nf)
        for col, coef in entries:
            row[col] += coef
        if rel == ">=":
            row, rhs = -row, -rhs
        A_ub_rows.append(row)
        b_ub.append(rhs)

    for ordinal in free_edges:
        u, v = topo.edges[ordinal]
        ecol = edge_pos[ordinal]
        ucol, uval = cell_term(u)
        vcol, vval = cell_term(v)
        for su_, sv, se, rel, rhs in (
            (1, 1, 1, "<=", 2.0),
            (1, 1, -1, ">=", 0.0),
            (1, -1, 1, ">=", 0.0),
            (-1, 1, 1, ">=", 0.0),
        ):
            entries = [(ecol, float(se))]
            r = rhs
            if ucol is None:
                r -= su_ * uval
            else:
                entries.append((ucol, float(su_)))
            if vcol is None:
                r -= sv * vval
            else:
                entries.append((vcol, float(sv)))
            add(entries, rel, r)

    for square in topo.squares:
        if not any(e in edge_pos for e in square):
            continue
        consts = []
        for e in square:
            if e in edge_pos:
                consts.append(None)
            else:
                u, v = topo.edges[e]
                consts.append(float(abs(values[u] - values[v])))
        for minus in range(4):
            entries = []
            hi_rhs, lo_rhs = 2.0, 0.0
            for i, e in enumerate(square):
                sign = -1.0 if i == minus else 1.0
                if consts[i] is None:
                    entries.append((edge_pos[e], sign))
                else:
                    hi_rhs -= sign * consts[i]
                    lo_rhs -= sign * consts[i]
            add(entries, "<=", hi_rhs)
            add(entries, ">=", lo_rhs)

    A_eq = np.zeros((2, nf))
    A_eq[0, : len(free_cells)] = 1.0
    for ordinal in free_edges:
        A_eq[1, edge_pos[ordinal]] = 1.0
    b_eq = np.array([float(r1), float(r2)])

    A_ub = np.array(A_ub_rows) if A_ub_rows else np.zeros((0, nf))
    res = solve_canonical(
        np.zeros(nf),
        A_ub,
        np.array(b_ub) if b_ub else np.zeros(0),
        A_eq,
        b_eq,
        np.ones(nf),
    )
    return res.status == "optimal"
