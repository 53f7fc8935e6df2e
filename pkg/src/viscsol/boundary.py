"""Boundary conditions on the faces of a box grid.

A face is identified by (axis, side) with side 0 at lo and side 1 at hi.
The exterior unit normal of face (a, 0) is -e_a and of face (a, 1) is +e_a.
Nodes lying on several faces (corners, edges) belong to the first face in
the order (0, 0), (0, 1), (1, 0), (1, 1), ...
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np

from .core import Grid

SENSES = ("strong", "viscosity")


def _as_field(f, dim=None, vector=False):
    if callable(f):
        return f
    c = np.asarray(f, dtype=float)

    def const(pts):
        m = pts.shape[0]
        if vector:
            return np.broadcast_to(c, (m, c.shape[-1])).copy()
        return np.full(m, float(c))

    return const


@dataclass(frozen=True)
class Dirichlet:
    """u = f on the face (strong) or min/max(F, u - f) (viscosity)."""

    f: Union[Callable, float] = 0.0
    sense: str = "strong"

    def __post_init__(self):
        if self.sense not in SENSES:
            raise ValueError(f"sense must be one of {SENSES}")

    def data(self, pts):
        vals = np.asarray(_as_field(self.f)(pts), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ValueError("Dirichlet data must be finite")
        return vals


@dataclass(frozen=True)
class Oblique:
    """<nu, Du> = f with <nu, n> >= nu0 > 0; nu = n gives Neumann."""

    f: Union[Callable, float] = 0.0
    nu: Optional[Union[Callable, np.ndarray]] = None
    sense: str = "strong"
    nu0: float = 1e-8

    def __post_init__(self):
        if self.sense not in SENSES:
            raise ValueError(f"sense must be one of {SENSES}")

    def data(self, pts):
        return np.asarray(_as_field(self.f)(pts), dtype=float)

    def direction(self, pts, normal):
        if self.nu is None:
            return np.broadcast_to(normal, pts.shape).astype(float).copy()
        return np.asarray(_as_field(self.nu, vector=True)(pts), dtype=float)


@dataclass(frozen=True)
class StateConstraint:
    """Supersolution property enforced up to the boundary, no data."""

    sense: str = "viscosity"


Condition = Union[Dirichlet, Oblique, StateConstraint]


@dataclass
class BoundarySpec:
    faces: Dict[Tuple[int, int], Condition] = field(default_factory=dict)

    @classmethod
    def uniform(cls, cond: Condition, dim: int):
        return cls({(a, s): cond for a in range(dim) for s in (0, 1)})

    def condition(self, axis, side):
        try:
            return self.faces[(axis, side)]
        except KeyError:
            raise KeyError(f"no boundary condition for face {(axis, side)}") from None

    def validate(self, grid: Grid):
        for a in range(grid.dim):
            for s in (0, 1):
                cond = self.condition(a, s)
                if isinstance(cond, Oblique):
                    idx = face_nodes(grid, a, s)
                    pts = grid.points()[idx]
                    n = exterior_normal(grid.dim, a, s)
                    nu = cond.direction(pts, n)
                    dot = nu @ n
                    if np.any(dot < cond.nu0):
                        k = int(np.argmin(dot))
                        raise ValueError(
                            f"oblique direction fails <nu,n> >= {cond.nu0} on face {(a, s)} "
                            f"at {pts[k].tolist()} (<nu,n> = {dot[k]:.3g})"
                        )
                elif isinstance(cond, Dirichlet):
                    idx = face_nodes(grid, a, s)
                    cond.data(grid.points()[idx])
        return self


def exterior_normal(dim, axis, side):
    n = np.zeros(dim)
    n[axis] = 1.0 if side == 1 else -1.0
    return n


def face_nodes(grid: Grid, axis, side):
    """Flat indices of all nodes on a face (corners included)."""
    idx = grid.index_array()
    target = 0 if side == 0 else grid.n[axis] - 1
    return np.nonzero(idx[:, axis] == target)[0]


def face_assignment(grid: Grid):
    """Per flat node: assigned face number 2*axis + side, or -1 for interior."""
    idx = grid.index_array()
    owner = np.full(grid.size, -1, dtype=int)
    for a in range(grid.dim):
        for s in (0, 1):
            target = 0 if s == 0 else grid.n[a] - 1
            on = (idx[:, a] == target) & (owner < 0)
            owner[on] = 2 * a + s
    return owner
