"""Binary tables on the open m x n lattice and the test statistics computed on them.

Tables are stored row-major ("raster" order). Adjacency is 4-neighbor with no
wraparound, so the grid graph has 2*m*n - m - n edges.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache


class ParseError(ValueError):
    """Raised when a table text cannot be parsed."""


@dataclass(frozen=True)
class BinaryTable:
    """A fully observed 0-1 table; immutable after construction."""

    rows: int
    cols: int
    cells: tuple[int, ...]  # row-major, length rows*cols

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"table shape must be positive, got {self.rows}x{self.cols}")
        if len(self.cells) != self.rows * self.cols:
            raise ValueError(
                f"cell count {len(self.cells)} does not match shape {self.rows}x{self.cols}"
            )
        if any(v not in (0, 1) for v in self.cells):
            raise ValueError("cells must be 0 or 1")

    @classmethod
    def from_rows(cls, data) -> "BinaryTable":
        rows = len(data)
        cols = len(data[0]) if rows else 0
        cells = tuple(v for row in data for v in row)
        return cls(rows, cols, cells)

    def __getitem__(self, pos: tuple[int, int]) -> int:
        i, j = pos
        return self.cells[i * self.cols + j]

    def to_rows(self) -> list[list[int]]:
        n = self.cols
        return [list(self.cells[i * n : (i + 1) * n]) for i in range(self.rows)]

    def transpose(self) -> "BinaryTable":
        return BinaryTable(
            self.cols,
            self.rows,
            tuple(self.cells[i * self.cols + j] for j in range(self.cols) for i in range(self.rows)),
        )

    def complement(self) -> "BinaryTable":
        return BinaryTable(self.rows, self.cols, tuple(1 - v for v in self.cells))


@dataclass(frozen=True)
class SuffStats:
    """The conditioning pair (t1, t2): count of ones and of discordant adjacent pairs."""

    t1: int
    t2: int

    def __post_init__(self):
        if self.t1 < 0 or self.t2 < 0:
            raise ValueError(f"sufficient statistics must be nonnegative, got {self}")

    def validate_for(self, rows: int, cols: int) -> None:
        """Check the shape-dependent ranges; raises ValueError if violated."""
        n_cells = rows * cols
        n_edges = 2 * rows * cols - rows - cols
        if self.t1 > n_cells:
            raise ValueError(f"t1={self.t1} exceeds cell count {n_cells}")
        if self.t2 > n_edges:
            raise ValueError(f"t2={self.t2} exceeds edge count {n_edges}")
        if self.t1 in (0, n_cells) and self.t2 != 0:
            raise ValueError(f"constant table forces t2=0, got t2={self.t2}")

    @classmethod
    def of(cls, table: BinaryTable) -> "SuffStats":
        return cls(t1(table), t2(table))


class GridTopology:
    """Precomputed structure of the open m x n grid graph.

    Cells are indexed in raster order. Edges are enumerated horizontals first
    (row by row), then verticals (row by row); this order is shared by every
    module that vectorizes over edges.
    """

    def __init__(self, rows: int, cols: int):
        if rows < 1 or cols < 1:
            raise ValueError(f"grid shape must be positive, got {rows}x{cols}")
        self.rows = rows
        self.cols = cols
        self.n_cells = rows * cols
        self.edges: list[tuple[int, int]] = []
        for i in range(rows):
            for j in range(cols - 1):
                self.edges.append((i * cols + j, i * cols + j + 1))
        for i in range(rows - 1):
            for j in range(cols):
                self.edges.append((i * cols + j, (i + 1) * cols + j))
        self.n_edges = len(self.edges)

        self.edge_index: dict[tuple[int, int], int] = {}
        for e, (a, b) in enumerate(self.edges):
            self.edge_index[(a, b)] = e
            self.edge_index[(b, a)] = e

        # unit squares as (top, right, bottom, left) edge indices, a 4-cycle
        self.squares: list[tuple[int, int, int, int]] = []
        for i in range(rows - 1):
            for j in range(cols - 1):
                tl, tr = i * cols + j, i * cols + j + 1
                bl, br = (i + 1) * cols + j, (i + 1) * cols + j + 1
                self.squares.append(
                    (
                        self.edge_index[(tl, tr)],
                        self.edge_index[(tr, br)],
                        self.edge_index[(bl, br)],
                        self.edge_index[(tl, bl)],
                    )
                )

        # raster-order incremental structure: for cell k, the already-determined
        # neighbors are up/left and the not-yet-determined ones are right/down
        self.up: list[int] = []
        self.left: list[int] = []
        self.fwd_degree: list[int] = []  # number of right/down neighbors
        self.neighbors: list[tuple[int, ...]] = []
        for k in range(self.n_cells):
            i, j = divmod(k, cols)
            self.up.append(k - cols if i > 0 else -1)
            self.left.append(k - 1 if j > 0 else -1)
            self.fwd_degree.append((1 if j + 1 < cols else 0) + (1 if i + 1 < rows else 0))
            nbrs = []
            if i > 0:
                nbrs.append(k - cols)
            if j > 0:
                nbrs.append(k - 1)
            if j + 1 < cols:
                nbrs.append(k + 1)
            if i + 1 < rows:
                nbrs.append(k + cols)
            self.neighbors.append(tuple(nbrs))

        # suffix degree counts: _suffix_deg[d][i] = number of cells >= i with degree d,
        # used to bound how much discord the remaining ones can still create
        degs = [len(nb) for nb in self.neighbors]
        self._suffix_deg = [[0] * (self.n_cells + 1) for _ in range(5)]
        for i in range(self.n_cells - 1, -1, -1):
            for d in range(5):
                self._suffix_deg[d][i] = self._suffix_deg[d][i + 1]
            self._suffix_deg[degs[i]][i] += 1

        # edge counts by raster-prefix position k: free_free_edges[k] has both
        # endpoints >= k, determined_edges[k] has both < k; the rest straddle
        # the frontier
        n = self.n_cells
        ff = [0] * (n + 2)
        dd = [0] * (n + 2)
        for u, v in self.edges:
            lo, hi = (u, v) if u < v else (v, u)
            ff[0] += 1
            ff[lo + 1] -= 1
            dd[hi + 1] += 1
        self.free_free_edges = [0] * (n + 1)
        self.determined_edges = [0] * (n + 1)
        self.frontier_edges = [0] * (n + 1)
        acc_ff = acc_dd = 0
        for k in range(n + 1):
            acc_ff += ff[k]
            acc_dd += dd[k]
            self.free_free_edges[k] = acc_ff
            self.determined_edges[k] = acc_dd
            self.frontier_edges[k] = self.n_edges - acc_ff - acc_dd

    def toggle_capacity(self, start: int, k: int) -> int:
        """Max number of edge flips achievable by placing k ones among cells >= start
        (the sum of the k largest cell degrees in that suffix)."""
        cap = 0
        for d in (4, 3, 2, 1):
            take = min(k, self._suffix_deg[d][start])
            cap += d * take
            k -= take
            if k == 0:
                break
        return cap


@lru_cache(maxsize=None)
def topology(rows: int, cols: int) -> GridTopology:
    return GridTopology(rows, cols)


def t1(table: BinaryTable) -> int:
    """Number of ones in the table."""
    return sum(table.cells)


def t2(table: BinaryTable) -> int:
    """Number of 4-neighbor adjacent pairs with unequal values."""
    cells = table.cells
    return sum(cells[a] != cells[b] for a, b in topology(table.rows, table.cols).edges)


def u_stat(table: BinaryTable) -> int:
    """Number of 2x2 windows equal to [[1,0],[0,1]] or [[0,1],[1,0]]."""
    m, n, cells = table.rows, table.cols, table.cells
    count = 0
    for i in range(m - 1):
        base = i * n
        for j in range(n - 1):
            a, b = cells[base + j], cells[base + j + 1]
            c, d = cells[base + n + j], cells[base + n + j + 1]
            if a == d and b == c and a != b:
                count += 1
    return count


def u_prime_stat(table: BinaryTable) -> int:
    """Number of 2x2 windows equal to [[0,0],[1,1]].

    Only the literal orientation is counted; rotations of the window are not.
    """
    m, n, cells = table.rows, table.cols, table.cells
    count = 0
    for i in range(m - 1):
        base = i * n
        for j in range(n - 1):
            if (
                cells[base + j] == 0
                and cells[base + j + 1] == 0
                and cells[base + n + j] == 1
                and cells[base + n + j + 1] == 1
            ):
                count += 1
    return count


STATISTICS = {"u": u_stat, "uprime": u_prime_stat}


def parse_table(text: str) -> BinaryTable:
    """Parse lines of '0'/'1' characters into a table.

    Single spaces between characters are tolerated; rows must all have the
    same length. Raises ParseError naming the first offending line.
    """
    if not text.strip():
        raise ParseError("empty table text")
    lines = text.splitlines()
    rows: list[list[int]] = []
    width = None
    for lineno, line in enumerate(lines, start=1):
        line = line.rstrip("\r")
        if not line.strip():
            if lineno < len(lines):
                raise ParseError(f"blank line at line {lineno}")
            continue
        row = []
        for ch in line:
            if ch in "01":
                row.append(int(ch))
            elif ch == " ":
                continue
            else:
                raise ParseError(f"invalid character {ch!r} at line {lineno}")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ParseError(f"ragged row at line {lineno}")
        rows.append(row)
    return BinaryTable.from_rows(rows)


def format_table(table: BinaryTable) -> str:
    """Inverse of parse_table: rows of '0'/'1', newline-terminated, no spaces."""
    n = table.cols
    return "".join(
        "".join(str(v) for v in table.cells[i * n : (i + 1) * n]) + "\n" for i in range(table.rows)
    )
