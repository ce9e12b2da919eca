"""Split finite-volume time integrator on Cartesian meshes.

One step is a hyperbolic sub-step (face Riemann fans averaged over the cells),
a backward-Euler source sub-step (friction and Maxwell relaxation) and, when
the solvent viscosity is positive, an explicit momentum diffusion sub-step.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .diagnostics import StepDiagnostics, entropy_budget, totals
from .errors import CFLViolated, DiffusionCFLViolated, InadmissibleResult
from .mesh import BoundarySpec, Mesh, padded
from .rheology import ModelKind, dp_dh, relax_source_step
from .riemann import LocalPair, exact_normal_flux, interface_update, solve_pair, to_local_frame
from .state import (
    HU, HV, H, NQ, PhysParams, PrimitiveState, admissibility_margins, conserved_to_primitive,
    primitive_to_conserved,
)

_CFL_SLACK = 1e-12


@dataclass
class FieldState:
    """Cell averages at one time level.

    Attributes:
        q: Conserved states, shape ``(nx, ny, 7)``.
        t: Time.
        n: Step counter.
    """

    q: np.ndarray
    t: float = 0.0
    n: int = 0

    @classmethod
    def from_primitive(cls, p: PrimitiveState, t: float = 0.0) -> "FieldState":
        return cls(primitive_to_conserved(p), t, 0)

    def primitive(self) -> PrimitiveState:
        return conserved_to_primitive(self.q)


def initial_state(mesh: Mesh, ic) -> FieldState:
    """Sample an initial condition ``ic(x, y) -> PrimitiveState`` at cell centres."""
    x, y = mesh.centers()
    p = ic(x, y)
    shape = (mesh.nx, mesh.ny)
    arrs = [np.broadcast_to(np.asarray(getattr(p, f), dtype=float), shape).copy()
            for f in ("h", "u", "v", "cxx", "cyy", "cxy", "czz")]
    return FieldState.from_primitive(PrimitiveState(*arrs))


# ---------------------------------------------------------------------------
# Face solves
# ---------------------------------------------------------------------------


@dataclass
class _Faces:
    """Results of one face family, oriented along the positive axis."""

    delta_a: np.ndarray
    delta_b: np.ndarray
    smax: np.ndarray
    entropy_flux: np.ndarray
    flux: np.ndarray
    entropy_ok: np.ndarray
    decoupled: np.ndarray
    escalations: np.ndarray


def _flip(a: np.ndarray) -> np.ndarray:
    # the same local state seen from the opposite normal
    out = a.copy()
    out[:, 1] = -a[:, 1]
    out[:, 2] = -a[:, 2]
    return out


def _trivial_faces(q: np.ndarray, n, params: PhysParams, model: ModelKind) -> _Faces:
    """Faces with identical states on both sides: exact flux, no increment."""
    m = q.shape[0]
    p = to_local_frame(q, n)
    hu, mom_n, mom_t, ent = exact_normal_flux(p, params, model)
    nx, ny = (n[..., 0], n[..., 1])
    flux = np.stack(np.broadcast_arrays(hu, mom_n * nx - mom_t * ny, mom_n * ny + mom_t * nx), axis=-1)
    return _Faces(
        delta_a=np.zeros((m, NQ)),
        delta_b=np.zeros((m, NQ)),
        smax=np.abs(p.u) + np.sqrt(dp_dh(p, params, model)),
        entropy_flux=np.asarray(ent, dtype=float).copy(),
        flux=flux,
        entropy_ok=np.ones(m, dtype=bool),
        decoupled=np.zeros(m, dtype=bool),
        escalations=np.zeros(m, dtype=np.int64),
    )


def _solve_faces(qa: np.ndarray, qb: np.ndarray, n, params: PhysParams, model: ModelKind) -> _Faces:
    """Solve faces between cells ``a`` and ``b`` where ``n`` points from ``a`` to ``b``.

    ``n`` is one normal or an array of per-face normals.

    Each face is solved in whichever of its two equivalent orientations has the
    lexicographically smaller local data, so mirrored or rotated copies of a
    problem go through identical floating-point operations.
    """
    m = qa.shape[0]
    n = np.asarray(n, dtype=float)
    same = np.all(qa == qb, axis=1)
    if np.any(same):
        out = _trivial_faces(qa, n if n.ndim == 1 else n, params, model)
        if not np.all(same):
            nn = n if n.ndim == 1 else n[~same]
            sub = _solve_faces(qa[~same], qb[~same], nn, params, model)
            for name in out.__dataclass_fields__:
                getattr(out, name)[~same] = getattr(sub, name)
        return out
    la = to_local_frame(qa, n).as_array().reshape(m, NQ)
    lb = to_local_frame(qb, n).as_array().reshape(m, NQ)
    key1 = np.concatenate([la, lb], axis=1)
    fa, fb = _flip(la), _flip(lb)
    key2 = np.concatenate([fb, fa], axis=1)
    diff = key1 != key2
    first = np.argmax(diff, axis=1)
    rows = np.arange(m)
    swap = diff.any(axis=1) & (key2[rows, first] < key1[rows, first])
    s = swap[:, None]
    left = np.where(s, fb, la)
    right = np.where(s, fa, lb)
    normals = np.where(s, -n, n)
    pair = LocalPair(PrimitiveState.from_array(left), PrimitiveState.from_array(right), normals)
    fan = solve_pair(pair, params, model)
    upd = interface_update(fan, normal=normals, q_left=np.where(s, qb, qa), q_right=np.where(s, qa, qb))
    sign = np.where(swap, -1.0, 1.0)
    rp = fan.params
    return _Faces(
        delta_a=np.where(s, upd.delta_right, upd.delta_left),
        delta_b=np.where(s, upd.delta_left, upd.delta_right),
        smax=upd.smax,
        entropy_flux=sign * upd.entropy_flux,
        flux=sign[:, None] * upd.flux,
        entropy_ok=np.asarray(rp.entropy_ok, dtype=bool),
        decoupled=np.asarray(rp.decoupled if rp.decoupled is not None else np.zeros(m, bool), dtype=bool),
        escalations=np.asarray(rp.escalations if rp.escalations is not None else np.zeros(m, int)),
    )


@dataclass
class FacePass:
    """All face solves of one state, reshaped onto the grid.

    Attributes:
        rate: Cell increments per unit time, shape ``(nx, ny, 7)``.
        cell_speed: Largest wave speed over the four faces of each cell.
        div_entropy: ``sum_j |face|/|cell| G_ij`` per cell.
        abs_entropy: Same sum with ``|G_ij|``, used as a scale.
        cell_ok: Whether all four faces of a cell passed their entropy conditions.
        x, y: Face-family results with shapes ``(nx+1, ny)`` and ``(nx, ny+1)``.
    """

    rate: np.ndarray
    cell_speed: np.ndarray
    div_entropy: np.ndarray
    abs_entropy: np.ndarray
    cell_ok: np.ndarray
    x: _Faces
    y: _Faces


def _slice(f: _Faces, sl) -> _Faces:
    return _Faces(*(a[sl] for a in (
        f.delta_a, f.delta_b, f.smax, f.entropy_flux, f.flux, f.entropy_ok, f.decoupled, f.escalations)))


def _reshape(f: _Faces, shape) -> _Faces:
    return _Faces(*(a.reshape(shape + a.shape[1:]) for a in (
        f.delta_a, f.delta_b, f.smax, f.entropy_flux, f.flux, f.entropy_ok, f.decoupled, f.escalations)))


def face_pass(q: np.ndarray, mesh: Mesh, bc: BoundarySpec, params: PhysParams, model) -> FacePass:
    """Solve every face of the mesh for the field ``q``."""
    model = ModelKind.parse(model)
    nx, ny = mesh.nx, mesh.ny
    pad = padded(q, mesh, bc)
    mx, my = (nx + 1) * ny, nx * (ny + 1)
    qa = np.concatenate([pad[0:nx + 1, 1:ny + 1].reshape(-1, NQ), pad[1:nx + 1, 0:ny + 1].reshape(-1, NQ)])
    qb = np.concatenate([pad[1:nx + 2, 1:ny + 1].reshape(-1, NQ), pad[1:nx + 1, 1:ny + 2].reshape(-1, NQ)])
    normals = np.concatenate([np.tile([1.0, 0.0], (mx, 1)), np.tile([0.0, 1.0], (my, 1))])
    both = _solve_faces(qa, qb, normals, params, model)
    fx = _reshape(_slice(both, slice(0, mx)), (nx + 1, ny))
    fy = _reshape(_slice(both, slice(mx, mx + my)), (nx, ny + 1))
    wx, wy = 1.0 / mesh.dx, 1.0 / mesh.dy
    rate = (fx.delta_a[1:] + fx.delta_b[:-1]) * wx + (fy.delta_a[:, 1:] + fy.delta_b[:, :-1]) * wy
    speed = np.maximum(np.maximum(fx.smax[1:], fx.smax[:-1]), np.maximum(fy.smax[:, 1:], fy.smax[:, :-1]))
    gx, gy = fx.entropy_flux, fy.entropy_flux
    div = (gx[1:] - gx[:-1]) * wx + (gy[:, 1:] - gy[:, :-1]) * wy
    mag = (np.abs(gx[1:]) + np.abs(gx[:-1])) * wx + (np.abs(gy[:, 1:]) + np.abs(gy[:, :-1])) * wy
    ok = fx.entropy_ok[1:] & fx.entropy_ok[:-1] & fy.entropy_ok[:, 1:] & fy.entropy_ok[:, :-1]
    return FacePass(rate, speed, div, mag, ok, fx, fy)


# ---------------------------------------------------------------------------
# Time step control
# ---------------------------------------------------------------------------


def _hyperbolic_bound(fp: FacePass, mesh: Mesh) -> float:
    return float(np.min(1.0 / (fp.cell_speed * mesh.inverse_capacity)))


def diffusion_bound(mesh: Mesh, nu_s: float) -> float:
    """Largest stable explicit diffusion step ``min(dx, dy)^2 / (8 nu_s)``."""
    if nu_s <= 0:
        return np.inf
    return min(mesh.dx, mesh.dy) ** 2 / (8.0 * nu_s)


def compute_timestep(state: FieldState, mesh: Mesh, cfl: float, bc: BoundarySpec | None = None,
                     params: PhysParams | None = None, model="svtm", face_data: FacePass | None = None) -> float:
    """CFL-limited time step.

    ``tau = cfl * min_i 1 / (s_i sum_j |face_ij|/|cell_i|)`` where ``s_i`` is the
    largest wave speed of the fans around cell ``i``, further limited by the
    explicit diffusion bound when the solvent viscosity is positive.
    """
    if not 0.0 < cfl <= 1.0:
        raise ValueError("cfl must lie in (0, 1]")
    params = params or PhysParams()
    bc = bc or BoundarySpec()
    fp = face_data or face_pass(state.q, mesh, bc, params, model)
    return cfl * min(_hyperbolic_bound(fp, mesh), diffusion_bound(mesh, params.nu_s))


# ---------------------------------------------------------------------------
# Sub-steps
# ---------------------------------------------------------------------------


def _assert_admissible(q: np.ndarray, stage: str) -> float:
    m = admissibility_margins(q)
    low = float(np.min(m)) if m.size else np.inf
    if not low > 0:
        raise InadmissibleResult(f"{stage} produced an inadmissible cell (margin {low:.3e})")
    return low


def _boundary_fluxes(fp: FacePass, mesh: Mesh):
    """Outward mass, momentum and entropy flux rates through the boundary."""
    fx, fy = fp.x.flux, fp.y.flux
    out = (fx[-1].sum(axis=0) - fx[0].sum(axis=0)) * mesh.dy + (fy[:, -1].sum(axis=0) - fy[:, 0].sum(axis=0)) * mesh.dx
    gx, gy = fp.x.entropy_flux, fp.y.entropy_flux
    ent = (gx[-1].sum() - gx[0].sum()) * mesh.dy + (gy[:, -1].sum() - gy[:, 0].sum()) * mesh.dx
    return float(out[0]), (float(out[1]), float(out[2])), float(ent)


def _face_stats(fp: FacePass):
    ok = np.concatenate([fp.x.entropy_ok.ravel(), fp.y.entropy_ok.ravel()])
    esc = np.concatenate([fp.x.escalations.ravel(), fp.y.escalations.ravel()])
    dec = np.concatenate([fp.x.decoupled.ravel(), fp.y.decoupled.ravel()])
    keys, counts = np.unique(esc, return_counts=True)
    hist = {int(k): int(c) for k, c in zip(keys, counts)}
    return int(np.sum(~ok)), ok.size, hist, int(np.sum(dec))


def hyperbolic_step(state: FieldState, mesh: Mesh, bc: BoundarySpec, tau: float, params: PhysParams,
                    model, face_data: FacePass | None = None):
    """Advance the homogeneous system by ``tau``.

    Returns:
        ``(new_state, diagnostics)``. The diagnostics carry the outward boundary
        fluxes, the face failure counts and, in ``residual``, the per-cell
        entropy flux divergence.

    Raises:
        CFLViolated: If ``tau`` exceeds the stability bound.
        InadmissibleResult: If a cell leaves the admissible domain.
    """
    fp = face_data or face_pass(state.q, mesh, bc, params, model)
    bound = _hyperbolic_bound(fp, mesh)
    if tau > bound * (1.0 + _CFL_SLACK):
        raise CFLViolated(f"tau={tau:.6e} exceeds the hyperbolic bound {bound:.6e}")
    q = state.q + tau * fp.rate
    low = _assert_admissible(q, "hyperbolic sub-step")
    failed, total, hist, _ = _face_stats(fp)
    bm, bmom, bent = _boundary_fluxes(fp, mesh)
    diag = StepDiagnostics(
        t=state.t + tau, tau=tau, boundary_mass_flux=bm, boundary_momentum_flux=bmom,
        boundary_entropy_flux=bent, failed_faces=failed, total_faces=total,
        min_admissibility_margin=low, iteration_histogram=hist, residual=fp.div_entropy,
    )
    return FieldState(q, state.t + tau, state.n + 1), diag


def source_step(state: FieldState, tau: float, params: PhysParams) -> FieldState:
    """Backward-Euler friction and relaxation, cell by cell."""
    p = relax_source_step(conserved_to_primitive(state.q), tau, params)
    return replace(state, q=primitive_to_conserved(p))


def viscous_step(state: FieldState, mesh: Mesh, tau: float, nu_s: float,
                 bc: BoundarySpec | None = None) -> FieldState:
    """Explicit centred diffusion of momentum, ``HU += tau div(nu_s H grad U)``.

    Ghost velocities come from the boundary conditions; depth and conformation
    are untouched.

    Raises:
        DiffusionCFLViolated: If ``tau`` exceeds ``min(dx, dy)^2 / (8 nu_s)``.
    """
    if nu_s <= 0:
        return state
    bound = diffusion_bound(mesh, nu_s)
    if tau > bound * (1.0 + _CFL_SLACK):
        raise DiffusionCFLViolated(f"tau={tau:.6e} exceeds the diffusion bound {bound:.6e}")
    pad = padded(state.q, mesh, bc or BoundarySpec())
    h = pad[..., H]
    vel = pad[..., HU:HV + 1] / h[..., None]
    hx = 0.5 * (h[:-1, 1:-1] + h[1:, 1:-1])
    hy = 0.5 * (h[1:-1, :-1] + h[1:-1, 1:])
    gx = nu_s * hx[..., None] * (vel[1:, 1:-1] - vel[:-1, 1:-1]) / mesh.dx
    gy = nu_s * hy[..., None] * (vel[1:-1, 1:] - vel[1:-1, :-1]) / mesh.dy
    q = state.q.copy()
    q[..., HU:HV + 1] += tau * ((gx[1:] - gx[:-1]) / mesh.dx + (gy[:, 1:] - gy[:, :-1]) / mesh.dy)
    return replace(state, q=q)


def advance(state: FieldState, mesh: Mesh, bc: BoundarySpec, params: PhysParams, model, cfl: float = 0.9,
            tau_max: float | None = None, audit: bool = True):
    """One full split step with CFL-controlled ``tau``.

    Args:
        state: Current field.
        mesh: Mesh.
        bc: Boundary conditions.
        params: Physical parameters.
        model: Model kind.
        cfl: Fraction of the stable step.
        tau_max: Optional upper bound on ``tau`` (to land on an output time).
        audit: Whether to evaluate conserved totals and the entropy residual.

    Returns:
        ``(new_state, tau, diagnostics)``.
    """
    model = ModelKind.parse(model)
    fp = face_pass(state.q, mesh, bc, params, model)
    tau = compute_timestep(state, mesh, cfl, bc, params, model, face_data=fp)
    if tau_max is not None:
        tau = min(tau, tau_max)
    mid, diag = hyperbolic_step(state, mesh, bc, tau, params, model, face_data=fp)
    relaxed = source_step(mid, tau, params)
    diag.min_admissibility_margin = min(diag.min_admissibility_margin,
                                        _assert_admissible(relaxed.q, "source sub-step"))
    if audit:
        res = entropy_budget(state.q, relaxed.q, fp.div_entropy, tau, params, fp.abs_entropy)
        diag.residual = res
        audited = res[fp.cell_ok]
        diag.max_residual = float(np.max(audited)) if audited.size else 0.0
    else:
        diag.residual = None
    new = viscous_step(relaxed, mesh, tau, params.nu_s, bc)
    if audit:
        diag.mass, diag.momentum, diag.entropy = totals(new.q, mesh, params)
    return new, tau, diag


def integrate(state: FieldState, mesh: Mesh, bc: BoundarySpec, params: PhysParams, model, t_end: float,
              cfl: float = 0.9, audit: bool = True, callback=None, max_steps: int = 10_000_000):
    """Advance until ``t_end``, shortening the last step to land on it exactly.

    Args:
        callback: Called as ``callback(state, diagnostics)`` after every step.

    Returns:
        ``(final_state, diagnostics_list)``.
    """
    diags = []
    while state.t < t_end and state.n < max_steps:
        remaining = t_end - state.t
        state, tau, d = advance(state, mesh, bc, params, model, cfl, tau_max=remaining, audit=audit)
        if tau >= remaining:
            state.t = t_end
            d.t = t_end
        diags.append(d)
        if callback is not None:
            callback(state, d)
    return state, diags


__all__ = [
    "FieldState", "FacePass", "advance", "compute_timestep", "diffusion_bound",
    "face_pass", "hyperbolic_step", "initial_state", "integrate", "source_step", "viscous_step",
]
