"""Rectangular space grids and space-time fields.

Cells are node-centred: along an axis of length ``L`` with ``n`` cells the
centres sit at ``i * L/(n-1)``, so the first and last cell of every axis lie
on the boundary of the rectangle and carry Dirichlet data.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .kernels import TimeGrid


@dataclass(frozen=True, eq=False)
class DomainGrid:
    extents: tuple[float, ...]
    cells: tuple[int, ...]
    spacing: tuple[float, ...] = field(init=False)
    boundary_mask: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        extents = tuple(float(e) for e in np.atleast_1d(self.extents))
        cells = tuple(int(c) for c in np.atleast_1d(self.cells))
        if len(extents) != len(cells) or len(cells) not in (1, 2):
            raise ValueError("dimension must be 1 or 2 with one extent per axis")
        if any(e <= 0 for e in extents) or any(c < 3 for c in cells):
            raise ValueError("extents must be positive and every axis needs >= 3 cells")
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "spacing", tuple(e / (c - 1) for e, c in zip(extents, cells)))
        mask = np.zeros(cells, dtype=bool)
        for ax in range(len(cells)):
            idx = [slice(None)] * len(cells)
            idx[ax] = 0
            mask[tuple(idx)] = True
            idx[ax] = -1
            mask[tuple(idx)] = True
        mask.setflags(write=False)
        object.__setattr__(self, "boundary_mask", mask)

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def interior(self) -> np.ndarray:
        return ~self.boundary_mask

    @property
    def measure(self) -> float:
        """``|Omega|`` = interior cell count times the cell volume."""
        return int(self.interior.sum()) * self.cell_volume

    def coordinates(self) -> tuple[np.ndarray, ...]:
        axes = [np.arange(c) * h for c, h in zip(self.cells, self.spacing)]
        return tuple(np.meshgrid(*axes, indexing="ij"))


def forward_gradient(v: np.ndarray, spacing: Sequence[float]) -> np.ndarray:
    """Forward differences along each spatial axis (the trailing ``len(spacing)`` axes).

    The component along an axis is zero on the last cell of that axis.
    Result has a new leading axis of length ``dim``.
    """
    dim = len(spacing)
    out = np.zeros((dim,) + v.shape)
    for ax, h in enumerate(spacing):
        a = v.ndim - dim + ax
        lo = [slice(None)] * v.ndim
        hi = [slice(None)] * v.ndim
        lo[a] = slice(0, -1)
        hi[a] = slice(1, None)
        out[ax][tuple(lo)] = (v[tuple(hi)] - v[tuple(lo)]) / h
    return out


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Space-time field ``values[m, ...]`` for ``m = 0..M`` (``m = 0`` is ``u_0``)."""

    domain: DomainGrid
    time: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        expect = (self.time.steps + 1,) + self.domain.shape
        if vals.shape != expect:
            raise ValueError(f"values must have shape {expect}, got {vals.shape}")
        object.__setattr__(self, "values", vals)

    @property
    def slices(self) -> np.ndarray:
        """Time levels ``1..M``, the ones integrated over ``(0, T)``."""
        return self.values[1:]

    @property
    def initial(self) -> np.ndarray:
        return self.values[0]

    def gradient(self) -> np.ndarray:
        """Forward-difference gradient of every slice, shape ``(dim, M+1, ...)``."""
        return forward_gradient(self.values, self.domain.spacing)

    def boundary_sup(self) -> float:
        return float(self.slices[:, self.domain.boundary_mask].max())

    def boundary_inf(self) -> float:
        return float(self.slices[:, self.domain.boundary_mask].min())

    def data_level(self) -> float:
        """``max{0, sup u_0, sup over the lateral boundary of u}``."""
        return max(0.0, float(self.initial.max()), self.boundary_sup())
