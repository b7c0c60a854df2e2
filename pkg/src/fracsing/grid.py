"""Uniform interval meshes with the boundary-distance vector."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Uniform mesh of the interval (a, b) restricted to its interior nodes.

    Endpoints are not degrees of freedom: the zero exterior condition is
    carried by the operator, so ``nodes`` holds x_1 .. x_{n_cells-1}.
    """

    a: float
    b: float
    n_cells: int
    h: float = field(init=False)
    nodes: np.ndarray = field(init=False, repr=False)
    delta: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.b > self.a:
            raise ValueError(f"need b > a, got a={self.a}, b={self.b}")
        if int(self.n_cells) != self.n_cells or self.n_cells < 4:
            raise ValueError(f"n_cells must be an integer >= 4, got {self.n_cells}")
        h = (self.b - self.a) / self.n_cells
        idx = np.arange(1, self.n_cells)
        nodes = self.a + idx * h
        # distance measured in cells first keeps delta exactly symmetric
        cells = np.minimum(idx, self.n_cells - idx)
        delta = cells * h
        nodes.setflags(write=False)
        delta.setflags(write=False)
        object.__setattr__(self, "n_cells", int(self.n_cells))
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "delta", delta)

    @property
    def size(self) -> int:
        return self.n_cells - 1

    @property
    def length(self) -> float:
        return self.b - self.a

    def boundary_cells(self) -> tuple[np.ndarray, np.ndarray]:
        """Node distance to the left and right endpoints, in units of h."""
        idx = np.arange(1, self.n_cells)
        return idx, self.n_cells - idx

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.a, self.b, self.n_cells * factor)

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return (self.a, self.b, self.n_cells) == (other.a, other.b, other.n_cells)

    def __hash__(self):
        return hash((self.a, self.b, self.n_cells))


@dataclass(frozen=True)
class CompactSubset:
    margin: float
    indices: np.ndarray


def build_grid(a: float, b: float, n_cells: int) -> Grid:
    return Grid(float(a), float(b), n_cells)


def compact_subset(grid: Grid, margin: float) -> CompactSubset:
    """Nodes at distance at least ``margin`` from the boundary."""
    if not 0 < margin < grid.length / 2:
        raise ValueError(f"margin must lie in (0, {grid.length / 2}), got {margin}")
    # tolerate round-off in delta = cells * h
    idx = np.flatnonzero(grid.delta >= margin * (1 - 1e-12))
    if idx.size == 0:
        raise ValueError(f"no node has delta >= {margin} on {grid}")
    idx.setflags(write=False)
    return CompactSubset(float(margin), idx)
