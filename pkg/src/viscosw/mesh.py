"""Uniform Cartesian meshes and ghost-cell boundary conditions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BadDimensions
from .riemann import rotate_primitive, unrotate_primitive
from .state import PrimitiveState, conserved_to_primitive, primitive_to_conserved

EDGES = ("west", "east", "south", "north")
# outward unit normals of the four edges
OUTWARD = {"west": (-1.0, 0.0), "east": (1.0, 0.0), "south": (0.0, -1.0), "north": (0.0, 1.0)}


@dataclass(frozen=True)
class Mesh:
    """Uniform grid on ``[0, Lx] x [0, Ly]`` with cells indexed ``[i, j]``.

    x-faces are indexed ``[i, j]`` for ``i = 0..nx`` (face ``i`` separates cells
    ``i-1`` and ``i``) with normal ``(1, 0)``; y-faces likewise with ``(0, 1)``.
    """

    nx: int
    ny: int
    Lx: float
    Ly: float

    @property
    def dx(self) -> float:
        return self.Lx / self.nx

    @property
    def dy(self) -> float:
        return self.Ly / self.ny

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def xc(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.dx

    @property
    def yc(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.dy

    def centers(self):
        """Cell-centre coordinate arrays of shape ``(nx, ny)``."""
        return np.meshgrid(self.xc, self.yc, indexing="ij")

    @property
    def inverse_capacity(self) -> float:
        """``sum_j |face_ij| / |cell_i|`` for every cell."""
        return 2.0 / self.dx + 2.0 / self.dy

    def faces(self) -> dict:
        """Flat face table.

        Returns:
            Dict of arrays: ``left`` and ``right`` cell indices as ``(i, j)``
            pairs (``-1`` marks the outside), ``normal``, ``length`` and
            ``boundary`` (edge name or ``""``).
        """
        left, right, normal, length, tag = [], [], [], [], []
        for i in range(self.nx + 1):
            for j in range(self.ny):
                left.append((i - 1, j) if i > 0 else (-1, -1))
                right.append((i, j) if i < self.nx else (-1, -1))
                normal.append((1.0, 0.0))
                length.append(self.dy)
                tag.append("west" if i == 0 else "east" if i == self.nx else "")
        for i in range(self.nx):
            for j in range(self.ny + 1):
                left.append((i, j - 1) if j > 0 else (-1, -1))
                right.append((i, j) if j < self.ny else (-1, -1))
                normal.append((0.0, 1.0))
                length.append(self.dx)
                tag.append("south" if j == 0 else "north" if j == self.ny else "")
        return {
            "left": np.array(left), "right": np.array(right), "normal": np.array(normal),
            "length": np.array(length), "boundary": np.array(tag),
        }


def build_cartesian_mesh(nx: int, ny: int, Lx: float = 1.0, Ly: float = 1.0) -> Mesh:
    """Uniform Cartesian mesh.

    Raises:
        BadDimensions: On non-positive counts or lengths.
    """
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise BadDimensions(f"cell counts must be positive integers, got {nx}x{ny}")
    if not (Lx > 0 and Ly > 0):
        raise BadDimensions(f"domain lengths must be positive, got {Lx}x{Ly}")
    return Mesh(int(nx), int(ny), float(Lx), float(Ly))


# ---------------------------------------------------------------------------
# Boundary conditions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Outflow:
    """Zero-gradient boundary: the ghost copies the adjacent cell."""


@dataclass(frozen=True)
class SlipWall:
    """Impermeable wall without friction."""


@dataclass(frozen=True)
class NoSlipWall:
    """Wall moving tangentially with speed ``u_lid``.

    The wall velocity points along the positive coordinate axis parallel to the
    edge. With ``regularized`` the speed is ``u_lid * 16 s^2 (1 - s)^2`` where
    ``s`` is the relative position along the edge.
    """

    u_lid: float = 0.0
    regularized: bool = False


@dataclass(frozen=True)
class TranslationInvariant:
    """Ghost copies the interior cell displaced along ``direction`` (lattice steps)."""

    direction: tuple[int, int] = (1, -1)


@dataclass(frozen=True)
class BoundarySpec:
    """One condition per edge."""

    west: object = field(default_factory=Outflow)
    east: object = field(default_factory=Outflow)
    south: object = field(default_factory=Outflow)
    north: object = field(default_factory=Outflow)

    @classmethod
    def uniform(cls, bc) -> "BoundarySpec":
        return cls(bc, bc, bc, bc)

    def edge(self, name: str):
        return getattr(self, name)


def _wall_tangent(n):
    # positive coordinate axis along the edge
    return (0.0, 1.0) if n[1] == 0.0 else (1.0, 0.0)


def ghost_state(interior, bc, n, s=None) -> np.ndarray:
    """Ghost conserved state(s) for an edge with outward normal ``n``.

    Args:
        interior: Conserved state(s) of the source cell(s).
        bc: Boundary condition of the edge.
        n: Outward unit normal.
        s: Relative position along the edge in ``[0, 1]`` (regularized lid only).
    """
    q = np.asarray(interior, dtype=float)
    if isinstance(bc, (Outflow, TranslationInvariant)):
        return q.copy()
    if not isinstance(bc, (SlipWall, NoSlipWall)):
        raise TypeError(f"unknown boundary condition {bc!r}")
    p = rotate_primitive(conserved_to_primitive(q), n)
    if isinstance(bc, SlipWall):
        u, v = -p.u, p.v
    else:
        speed = bc.u_lid
        if bc.regularized:
            if s is None:
                raise ValueError("regularized lid needs positions along the edge")
            s = np.asarray(s, dtype=float)
            speed = bc.u_lid * 16.0 * s**2 * (1.0 - s) ** 2
        t = _wall_tangent(n)
        # tangential wall speed in the local frame (n, n_perp)
        w_local = speed * (-t[0] * n[1] + t[1] * n[0])
        u, v = -p.u, 2.0 * w_local - p.v
    mirrored = PrimitiveState(p.h, u, v, p.cxx, p.cyy, -p.cxy, p.czz)
    return primitive_to_conserved(unrotate_primitive(mirrored, n))


def _source_indices(mesh: Mesh, edge: str, bc):
    """Indices ``(i, j)`` of the interior cells feeding the ghosts of an edge."""
    nx, ny = mesh.nx, mesh.ny
    if edge in ("west", "east"):
        gi = np.full(ny, -1 if edge == "west" else nx)
        gj = np.arange(ny)
    else:
        gi = np.arange(nx)
        gj = np.full(nx, -1 if edge == "south" else ny)
    if not isinstance(bc, TranslationInvariant):
        return np.clip(gi, 0, nx - 1), np.clip(gj, 0, ny - 1)
    di, dj = bc.direction

    def inside(i, j):
        return (i >= 0) & (i < nx) & (j >= 0) & (j < ny)

    ai, aj = gi - di, gj - dj
    bi, bj = gi + di, gj + dj
    use_a = inside(ai, aj)
    use_b = ~use_a & inside(bi, bj)
    si = np.where(use_a, ai, np.where(use_b, bi, np.clip(ai, 0, nx - 1)))
    sj = np.where(use_a, aj, np.where(use_b, bj, np.clip(aj, 0, ny - 1)))
    # clamped corner ghosts fall back on the nearest interior cell
    return np.clip(si, 0, nx - 1), np.clip(sj, 0, ny - 1)


def padded(q: np.ndarray, mesh: Mesh, bc: BoundarySpec) -> np.ndarray:
    """Field with one layer of ghost cells, shape ``(nx + 2, ny + 2, 7)``.

    Corner ghosts are never used by the face stencil and are copies of the
    corner cells.
    """
    nx, ny = mesh.nx, mesh.ny
    out = np.empty((nx + 2, ny + 2, q.shape[-1]))
    out[1:-1, 1:-1] = q
    for edge in EDGES:
        cond = bc.edge(edge)
        si, sj = _source_indices(mesh, edge, cond)
        n = OUTWARD[edge]
        s = None
        if isinstance(cond, NoSlipWall) and cond.regularized:
            s = (si + 0.5) / nx if edge in ("south", "north") else (sj + 0.5) / ny
        g = ghost_state(q[si, sj], cond, n, s)
        if edge == "west":
            out[0, 1:-1] = g
        elif edge == "east":
            out[-1, 1:-1] = g
        elif edge == "south":
            out[1:-1, 0] = g
        else:
            out[1:-1, -1] = g
    out[0, 0], out[0, -1], out[-1, 0], out[-1, -1] = q[0, 0], q[0, -1], q[-1, 0], q[-1, -1]
    return out
