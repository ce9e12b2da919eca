"""Benchmark presets, the 1D reference solver and the classical dam-break oracle."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .engine import FieldState, initial_state, integrate
from .mesh import BoundarySpec, NoSlipWall, Outflow, TranslationInvariant, build_cartesian_mesh
from .rheology import ModelKind
from .state import PhysParams, PrimitiveState, conserved_to_primitive


def _rest(h) -> PrimitiveState:
    h = np.asarray(h, dtype=float)
    zero = np.zeros_like(h)
    one = np.ones_like(h)
    return PrimitiveState(h, zero, zero.copy(), one, one.copy(), zero.copy(), one.copy())


def stoker_ic(x, y) -> PrimitiveState:
    """Two rest states separated by the line ``x + y = 1`` (depth 3 below, 1 on and above)."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    return _rest(np.where(x + y < 1.0, 3.0, 1.0))


def column_ic(x, y) -> PrimitiveState:
    """Rest column of depth 3 inside ``(x - .5)^2 + (y - .5)^2 < .2``, depth 1 elsewhere."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    return _rest(np.where((x - 0.5) ** 2 + (y - 0.5) ** 2 < 0.2, 3.0, 1.0))


def cavity_ic(x, y) -> PrimitiveState:
    """Unit depth at rest with ``C = I``."""
    x, _ = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    return _rest(np.ones_like(x))


@dataclass(frozen=True)
class BenchmarkPreset:
    """A reproducible benchmark configuration.

    Attributes:
        name: Preset name.
        ic: Initial condition ``ic(x, y) -> PrimitiveState``.
        bc: Boundary conditions.
        params: Default physical parameters.
        nx, ny, Lx, Ly: Default mesh.
        t_end: Final time.
        model: Default model.
    """

    name: str
    ic: Callable = field(repr=False)
    bc: BoundarySpec
    params: PhysParams
    nx: int = 33
    ny: int = 33
    Lx: float = 1.0
    Ly: float = 1.0
    t_end: float = 0.2
    model: ModelKind = ModelKind.SVTM

    def mesh(self):
        return build_cartesian_mesh(self.nx, self.ny, self.Lx, self.Ly)

    def initial_state(self) -> FieldState:
        return initial_state(self.mesh(), self.ic)

    def with_overrides(self, **kw) -> "BenchmarkPreset":
        """Copy with preset fields or physical parameters (``g``, ``G``, ``lam``, ``k``, ``nu_s``) replaced."""
        phys = {k: kw.pop(k) for k in list(kw) if k in ("g", "G", "lam", "k", "nu_s")}
        if "model" in kw:
            kw["model"] = ModelKind.parse(kw["model"])
        out = replace(self, **kw)
        if phys:
            out = replace(out, params=replace(out.params, **phys))
        return out

    def run(self, audit: bool = True, callback=None):
        """Integrate to ``t_end``; returns ``(mesh, final_state, diagnostics)``."""
        mesh = self.mesh()
        state, diags = integrate(self.initial_state(), mesh, self.bc, self.params, self.model,
                                 self.t_end, audit=audit, callback=callback)
        return mesh, state, diags


def stoker_preset(**kw) -> BenchmarkPreset:
    """Diagonal dam break; lateral ghosts copy along the isolines ``x + y = const``."""
    ti = TranslationInvariant((1, -1))
    base = BenchmarkPreset("stoker", stoker_ic, BoundarySpec.uniform(ti), PhysParams(g=10.0, G=10.0, lam=1.0))
    return base.with_overrides(**kw)


def column_preset(**kw) -> BenchmarkPreset:
    """Column collapse with far outflow boundaries."""
    base = BenchmarkPreset("column", column_ic, BoundarySpec.uniform(Outflow()),
                           PhysParams(g=10.0, G=1.0, lam=1.0), nx=65, ny=65)
    return base.with_overrides(**kw)


def cavity_preset(G: float = 0.1, lam: float = 1.0, nu_s: float = 0.1, g: float = 1e3,
                  regularized: bool = False, **kw) -> BenchmarkPreset:
    """Lid-driven cavity: no-slip walls, lid moving at unit speed along ``+x`` at ``y = 1``."""
    wall = NoSlipWall(0.0)
    bc = BoundarySpec(wall, wall, wall, NoSlipWall(1.0, regularized))
    base = BenchmarkPreset("cavity", cavity_ic, bc, PhysParams(g=g, G=G, lam=lam, nu_s=nu_s), t_end=1.0)
    return base.with_overrides(**kw)


def cavity_sweep(Gs=(0.1, 1.0), lams=(0.1, 1.0), **kw) -> list[BenchmarkPreset]:
    """Cavity presets over the grid of elastic moduli and relaxation times."""
    return [cavity_preset(G=G, lam=lam, **kw) for G in Gs for lam in lams]


PRESETS = {"stoker": stoker_preset, "column": column_preset, "cavity": cavity_preset}


def get_preset(name: str, **overrides) -> BenchmarkPreset:
    """Preset by name with optional overrides."""
    try:
        factory = PRESETS[name.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}") from None
    return factory(**overrides)


# ---------------------------------------------------------------------------
# 1D reference
# ---------------------------------------------------------------------------


@dataclass
class Profile1D:
    """Final 1D profiles along the normal direction.

    Attributes:
        s: Cell-centre coordinates.
        fields: ``h, u, v, cxx, cyy, cxy, czz`` arrays.
        t: Final time.
    """

    s: np.ndarray
    fields: dict
    t: float


def riemann_strip(left: PrimitiveState, right: PrimitiveState, N: int, length: float = float(np.sqrt(2.0)),
                  split: float | None = None):
    """An ``N x 1`` strip holding a 1D Riemann problem.

    Args:
        left, right: Scalar primitive states on either side of ``split``.
        N: Number of cells.
        length: Strip length; the default matches the diagonal of the unit square.
        split: Position of the initial discontinuity (default ``length / 2``).

    Returns:
        ``(mesh, bc, initial_state)`` with outflow ends and translation-invariant sides.
    """
    split = 0.5 * length if split is None else split
    mesh = build_cartesian_mesh(N, 1, length, length / N)
    names = ("h", "u", "v", "cxx", "cyy", "cxy", "czz")
    la = [float(getattr(left, f)) for f in names]
    ra = [float(getattr(right, f)) for f in names]

    def ic(x, y):
        side = x < split
        return PrimitiveState(*(np.where(side, a, b) for a, b in zip(la, ra)))

    lateral = TranslationInvariant((0, 1))
    return mesh, BoundarySpec(Outflow(), Outflow(), lateral, lateral), initial_state(mesh, ic)


def reference_1d_solve(left: PrimitiveState, right: PrimitiveState, N: int, T: float, params: PhysParams,
                       model, length: float = float(np.sqrt(2.0)), split: float | None = None,
                       cfl: float = 0.9) -> Profile1D:
    """1D Riemann problem run through the 2D engine on an ``N x 1`` strip.

    Args:
        left, right: Scalar primitive states on either side of ``split``.
        N: Number of cells.
        T: Final time.
        params: Physical parameters.
        model: Model kind.
        length: Strip length; the default matches the diagonal of the unit square.
        split: Position of the initial discontinuity (default ``length / 2``).
        cfl: CFL number.
    """
    mesh, bc, state0 = riemann_strip(left, right, N, length, split)
    state, _ = integrate(state0, mesh, bc, params, model, T, cfl=cfl, audit=False)
    return profile_1d(state, mesh)


def profile_1d(state: FieldState, mesh) -> Profile1D:
    """Profiles of a strip state along its length."""
    p = conserved_to_primitive(state.q[:, 0])
    fields = {f: np.asarray(getattr(p, f)) for f in ("h", "u", "v", "cxx", "cyy", "cxy", "czz")}
    return Profile1D(mesh.xc, fields, state.t)


def stationarity_metric(prev, nxt) -> float:
    """Sum over cells and components of ``|q_next - q_prev|``."""
    a = prev.q if isinstance(prev, FieldState) else np.asarray(prev)
    b = nxt.q if isinstance(nxt, FieldState) else np.asarray(nxt)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.sum(np.abs(b - a)))


# ---------------------------------------------------------------------------
# Classical dam break (Newtonian shallow water)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DamBreak:
    """Exact wet-bed dam-break solution of the classical shallow-water equations.

    Attributes:
        hl, hr: Initial depths (``hl > hr > 0``).
        g: Gravity.
        hm, um: Depth and velocity of the middle state.
        shock_speed: Speed of the bore.
        head_speed: Speed of the rarefaction head (negative).
        tail_speed: Speed of the rarefaction tail.
    """

    hl: float
    hr: float
    g: float
    hm: float
    um: float
    shock_speed: float
    head_speed: float
    tail_speed: float

    def depth(self, x, t, x0: float = 0.0):
        """Depth at positions ``x`` and time ``t > 0``."""
        xi = (np.asarray(x, dtype=float) - x0) / t
        g = self.g
        fan = (2.0 * np.sqrt(g * self.hl) - xi) ** 2 / (9.0 * g)
        return np.where(xi < self.head_speed, self.hl,
                        np.where(xi < self.tail_speed, fan,
                                 np.where(xi < self.shock_speed, self.hm, self.hr)))


def classical_dam_break(hl: float, hr: float, g: float) -> DamBreak:
    """Solve for the middle state of the classical dam break."""
    if not hl > hr > 0:
        raise ValueError("need hl > hr > 0")

    def mismatch(hm):
        u_raref = 2.0 * (np.sqrt(g * hl) - np.sqrt(g * hm))
        u_shock = (hm - hr) * np.sqrt(0.5 * g * (hm + hr) / (hm * hr))
        return u_raref - u_shock

    hm = brentq(mismatch, hr, hl, xtol=1e-15, rtol=1e-15)
    um = 2.0 * (np.sqrt(g * hl) - np.sqrt(g * hm))
    return DamBreak(hl, hr, g, hm, um, hm * um / (hm - hr), -np.sqrt(g * hl), um - np.sqrt(g * hm))


def front_position(s, h, level: float, start: float) -> float:
    """Rightmost crossing of ``h = level`` to the right of ``start`` by linear interpolation."""
    s = np.asarray(s)
    h = np.asarray(h)
    idx = np.nonzero((s[:-1] >= start) & (h[:-1] >= level) & (h[1:] < level))[0]
    if idx.size == 0:
        raise ValueError("no front found")
    i = idx[-1]
    w = (h[i] - level) / (h[i] - h[i + 1])
    return float(s[i] + w * (s[i + 1] - s[i]))
