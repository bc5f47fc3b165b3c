"""Gibbs samplers that generate observed tables.

Both samplers run full raster sweeps from the all-zero table, updating each
cell from its full conditional using the freshest neighbor values, and return
the state after `sweeps` sweeps (1001 by default, matching the burn-in
convention of taking the 1001st state as the sample).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import exp

import numpy as np

from .grid import BinaryTable, topology

DEFAULT_SWEEPS = 1001


@dataclass(frozen=True)
class IsingParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and np.isfinite(self.beta)):
            raise ValueError(f"parameters must be finite, got {self}")


@dataclass(frozen=True)
class AutologisticParams:
    beta0: float
    beta1: float
    beta2: float
    beta3: float
    beta4: float

    def __post_init__(self):
        if not all(np.isfinite(v) for v in self.as_tuple()):
            raise ValueError(f"parameters must be finite, got {self}")

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.beta0, self.beta1, self.beta2, self.beta3, self.beta4)


def bernoulli_p(logit: float) -> float:
    """P(cell = 1) from the conditional log-odds, computed overflow-safely."""
    if logit >= 0:
        return 1.0 / (1.0 + exp(-logit))
    e = exp(logit)
    return e / (1.0 + e)


def ising_logit(params: IsingParams, degree: int, neighbor_sum: int) -> float:
    """Conditional log-odds of a one: alpha + beta*degree - 2*beta*(neighbor ones).

    This is the conditional of exp(alpha*t1 + beta*t2): setting the cell to one
    adds alpha to the exponent and flips the concordance of each of `degree`
    edges, changing t2 by degree - 2*(neighbor ones).
    """
    return params.alpha + params.beta * degree - 2.0 * params.beta * neighbor_sum


def autologistic_logit(params: AutologisticParams, th, tv, td, ta) -> float:
    """Conditional log-odds from the pairwise horizontal/vertical/diagonal/
    antidiagonal neighbor sums; out-of-grid terms contribute zero."""
    return (
        params.beta0
        + params.beta1 * th
        + params.beta2 * tv
        + params.beta3 * td
        + params.beta4 * ta
    )


def gibbs_ising(
    params: IsingParams,
    rows: int,
    cols: int,
    sweeps: int = DEFAULT_SWEEPS,
    rng: np.random.Generator | None = None,
) -> BinaryTable:
    """Sample a table from the two-parameter model by single-site Gibbs sweeps."""
    if sweeps < 1:
        raise ValueError("need at least one sweep")
    rng = rng if rng is not None else np.random.default_rng()
    topo = topology(rows, cols)
    n = topo.n_cells
    nbrs = topo.neighbors
    alpha, beta = params.alpha, params.beta
    cells = [0] * n
    for _ in range(sweeps):
        uniforms = rng.random(n)
        for k in range(n):
            nb = nbrs[k]
            s = 0
            for j in nb:
                s += cells[j]
            logit = alpha + beta * len(nb) - 2.0 * beta * s
            cells[k] = 1 if uniforms[k] < bernoulli_p(logit) else 0
    return BinaryTable(rows, cols, tuple(cells))


def _autologistic_neighborhoods(rows: int, cols: int):
    horiz, vert, diag, anti = [], [], [], []
    for i in range(rows):
        for j in range(cols):
            horiz.append(tuple(i * cols + jj for jj in (j - 1, j + 1) if 0 <= jj < cols))
            vert.append(tuple(ii * cols + j for ii in (i - 1, i + 1) if 0 <= ii < rows))
            diag.append(
                tuple(
                    ii * cols + jj
                    for ii, jj in ((i - 1, j - 1), (i + 1, j + 1))
                    if 0 <= ii < rows and 0 <= jj < cols
                )
            )
            anti.append(
                tuple(
                    ii * cols + jj
                    for ii, jj in ((i - 1, j + 1), (i + 1, j - 1))
                    if 0 <= ii < rows and 0 <= jj < cols
                )
            )
    return horiz, vert, diag, anti


def gibbs_autologistic(
    params: AutologisticParams,
    rows: int,
    cols: int,
    sweeps: int = DEFAULT_SWEEPS,
    rng: np.random.Generator | None = None,
) -> BinaryTable:
    """Sample a table from the second-order autologistic regression model."""
    if sweeps < 1:
        raise ValueError("need at least one sweep")
    rng = rng if rng is not None else np.random.default_rng()
    n = rows * cols
    horiz, vert, diag, anti = _autologistic_neighborhoods(rows, cols)
    b0, b1, b2, b3, b4 = params.as_tuple()
    cells = [0] * n
    for _ in range(sweeps):
        uniforms = rng.random(n)
        for k in range(n):
            th = sum(cells[j] for j in horiz[k])
            tv = sum(cells[j] for j in vert[k])
            td = sum(cells[j] for j in diag[k])
            ta = sum(cells[j] for j in anti[k])
            logit = b0 + b1 * th + b2 * tv + b3 * td + b4 * ta
            cells[k] = 1 if uniforms[k] < bernoulli_p(logit) else 0
    return BinaryTable(rows, cols, tuple(cells))
