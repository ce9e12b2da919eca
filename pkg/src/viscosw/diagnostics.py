"""Conservation and entropy budgets, audits and profile extraction."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .rheology import ModelKind, dissipation, strong_invariants
from .riemann import FanState, RiemannFan
from .state import H, HU, HV, PhysParams, conserved_to_primitive, entropy_density


@dataclass
class StepDiagnostics:
    """Per-step conservation, entropy and solver statistics.

    Attributes:
        t: Time after the step.
        tau: Step size.
        mass, momentum, entropy: Totals after the step.
        boundary_mass_flux: Outward mass flux through the boundary (rate).
        boundary_momentum_flux: Outward momentum flux (rate, global frame).
        boundary_entropy_flux: Outward numerical entropy flux (rate).
        max_residual: Largest scaled discrete entropy residual over audited cells.
        failed_faces: Faces whose entropy conditions did not hold.
        total_faces: Faces solved in the step.
        min_admissibility_margin: Smallest conserved-domain margin after the step.
        iteration_histogram: Counts of ``c_par`` escalations per face.
        residual: Per-cell scaled entropy residual (may be ``None``).
    """

    t: float = 0.0
    tau: float = 0.0
    mass: float = 0.0
    momentum: tuple[float, float] = (0.0, 0.0)
    entropy: float = 0.0
    boundary_mass_flux: float = 0.0
    boundary_momentum_flux: tuple[float, float] = (0.0, 0.0)
    boundary_entropy_flux: float = 0.0
    max_residual: float = 0.0
    failed_faces: int = 0
    total_faces: int = 0
    min_admissibility_margin: float = np.inf
    iteration_histogram: dict = field(default_factory=dict)
    residual: np.ndarray | None = field(default=None, repr=False)

    def row(self) -> list:
        return [self.t, self.tau, self.mass, self.momentum[0], self.momentum[1],
                self.entropy, self.max_residual, self.failed_faces]


DIAG_COLUMNS = ["t", "tau", "mass", "momx", "momy", "entropy", "max_residual", "failed_faces"]


def write_diagnostics_csv(rows: Iterable[StepDiagnostics], path) -> None:
    """Write one CSV line per step."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DIAG_COLUMNS)
        for d in rows:
            w.writerow([repr(float(x)) if isinstance(x, float) else x for x in d.row()])


def totals(q, mesh, params: PhysParams):
    """Mass, momentum and entropy integrated over the mesh.

    Returns:
        ``(mass, (momx, momy), entropy)``.
    """
    area = mesh.cell_area
    mass = float(np.sum(q[..., H]) * area)
    mom = (float(np.sum(q[..., HU]) * area), float(np.sum(q[..., HV]) * area))
    ent = float(np.sum(entropy_density(conserved_to_primitive(q), params)) * area)
    return mass, mom, ent


def entropy_budget(before, after, flux_divergence, tau, params: PhysParams, flux_magnitude=None):
    """Per-cell residual of the discrete entropy inequality.

    The residual is ``S(after) - S(before) + tau * div G + tau H (k |U|^2 + D)(after)``
    divided by the scale ``|S(before)| + |S(after)| + tau |div G| + 1e-30``;
    non-positive values (up to round-off) mean the inequality holds.

    Args:
        before: Conserved state at the start of the step.
        after: Conserved state after the hyperbolic and source sub-steps.
        flux_divergence: ``sum_j |face|/|cell| G_ij`` per cell.
        tau: Step size.
        params: Physical parameters.
        flux_magnitude: Optional ``sum_j |face|/|cell| |G_ij|`` used for the scale.
    """
    pb = conserved_to_primitive(before)
    pa = conserved_to_primitive(after)
    sb = entropy_density(pb, params)
    sa = entropy_density(pa, params)
    sink = pa.h * (params.k * (pa.u**2 + pa.v**2) + dissipation(pa, params))
    lhs = sa - sb + tau * flux_divergence + tau * sink
    mag = np.abs(flux_divergence) if flux_magnitude is None else flux_magnitude
    scale = np.abs(sa) + np.abs(sb) + tau * mag + 1e-30
    return lhs / scale


# ---------------------------------------------------------------------------
# Riemann invariant audit
# ---------------------------------------------------------------------------


def _rel(a_terms, b_terms):
    a = sum(a_terms)
    b = sum(b_terms)
    scale = sum(np.abs(t) for t in a_terms) + sum(np.abs(t) for t in b_terms) + 1e-300
    return np.abs(a - b) / scale


def _invariants(s: FanState, model):
    """Strong invariants recomputed from the primitive fields, as term lists."""
    i1, i2, _ = strong_invariants(s.primitive(), model)
    return [i1], [i2], [s.cyy, -s.cxy**2 / s.cxx]


def _rh_residuals(a: FanState, b: FanState, xi):
    """Rankine-Hugoniot residuals of the relaxed Euler system across speed ``xi``."""
    out = []
    fa, fb = a.flux(), b.flux()
    dens_a = (a.h, a.h * a.u, a.h * a.v, a.h * (0.5 * (a.u**2 + a.v**2) + a.e_par + a.e_perp))
    dens_b = (b.h, b.h * b.u, b.h * b.v, b.h * (0.5 * (b.u**2 + b.v**2) + b.e_par + b.e_perp))
    for qa, qb, ga, gb in zip(dens_a, dens_b, fa, fb):
        out.append(_rel([gb, -xi * qb], [ga, -xi * qa]))
    return out


def invariant_audit(fan: RiemannFan, model: ModelKind, detailed: bool = False):
    """Check every weak Riemann invariant and jump relation of the fan.

    Returns:
        The maximum relative residual per face, or with ``detailed=True`` a dict
        mapping check names to per-face residual arrays.
    """
    model = ModelKind.parse(model)
    rp = fan.params
    S = fan.states
    xi = fan.speeds
    checks: dict[str, np.ndarray] = {}

    def put(name, r):
        checks[name] = np.maximum(checks.get(name, 0.0), r)

    sides = (
        ("l", 0, 1, 2, rp.c_par_l, rp.c_perp_l, rp.a_sq_l, rp.b_l, +1.0),
        ("r", 5, 4, 3, rp.c_par_r, rp.c_perp_r, rp.a_sq_r, rp.b_r, -1.0),
    )
    for name, io, ist, ish, cp, cq, a2, b, sgn in sides:
        o, st, sh = S[io], S[ist], S[ish]
        # outer wave: sgn = +1 for xi_-2, -1 for xi_+2
        k_outer = 0 if name == "l" else 4
        k_inner = 1 if name == "l" else 3
        for lab, x, y in (("outer", o, st), ("inner", st, sh)):
            for j, (ia, ib) in enumerate(zip(_invariants(x, model), _invariants(y, model))):
                put(f"I{j + 1}_{lab}_{name}", _rel(ia, ib))
        put(f"tau_par_{name}", _rel([o.pi_par / cp**2, 1 / o.h], [st.pi_par / cp**2, 1 / st.h]))
        put(f"u_piu_{name}", _rel([o.pi_par, sgn * cp * o.u], [st.pi_par, sgn * cp * st.u]))
        put(f"bu_v_{name}", _rel([b * o.u, (cq**2 - cp**2) * o.v], [b * st.u, (cq**2 - cp**2) * st.v]))
        put(f"pperp_cpar_{name}", _rel([o.pi_perp, sgn * cp * o.v], [st.pi_perp, sgn * cp * st.v]))
        put(f"psi_cpar_{name}", _rel([a2 * o.pi_perp / cp**2, -o.psi], [a2 * st.pi_perp / cp**2, -st.psi]))
        put(f"epar_outer_{name}", _rel([o.e_par, -o.pi_par**2 / (2 * cp**2)], [st.e_par, -st.pi_par**2 / (2 * cp**2)]))
        put(f"eperp_outer_{name}", _rel([o.e_perp, -o.pi_perp**2 / (2 * cp**2)], [st.e_perp, -st.pi_perp**2 / (2 * cp**2)]))
        x_o = xi[:, k_outer]
        put(f"massflux_outer_{name}", _rel([o.h * o.u, -o.h * x_o], [sgn * cp]))
        put(f"massflux_outer_star_{name}", _rel([st.h * st.u, -st.h * x_o], [sgn * cp]))
        # inner (shear) wave
        x_i = xi[:, k_inner]
        put(f"u_inner_{name}", _rel([st.u], [sh.u]))
        put(f"pipar_inner_{name}", _rel([st.pi_par], [sh.pi_par]))
        put(f"h_inner_{name}", _rel([st.h], [sh.h]))
        put(f"pperp_cperp_{name}", _rel([st.pi_perp, sgn * cq * st.v], [sh.pi_perp, sgn * cq * sh.v]))
        put(f"psi_cperp_{name}", _rel([a2 * st.pi_perp / cq**2, -st.psi], [a2 * sh.pi_perp / cq**2, -sh.psi]))
        put(f"epar_inner_{name}", _rel([st.e_par], [sh.e_par]))
        put(f"eperp_inner_{name}", _rel([st.e_perp, -st.pi_perp**2 / (2 * cq**2)], [sh.e_perp, -sh.pi_perp**2 / (2 * cq**2)]))
        put(f"massflux_inner_{name}", _rel([st.h * st.u, -st.h * x_i], [sgn * cq]))
    # contact
    a, b_ = S[2], S[3]
    for lab, x, y in (("u", a.u, b_.u), ("pipar", a.pi_par, b_.pi_par), ("v", a.v, b_.v), ("pperp", a.pi_perp, b_.pi_perp)):
        put(f"contact_{lab}", _rel([x], [y]))
    put("contact_speed", _rel([xi[:, 2]], [a.u]))
    # Rankine-Hugoniot of the relaxed conservation laws across every wave
    for k in range(5):
        for j, r in enumerate(_rh_residuals(S[k], S[k + 1], xi[:, k])):
            put(f"rh{j}_wave{k}", r)
    order = np.all(np.diff(xi, axis=1) >= 0, axis=1)
    put("speed_order", np.where(order, 0.0, np.inf))
    if detailed:
        return checks
    return np.max(np.stack(list(checks.values()), axis=0), axis=0)


# ---------------------------------------------------------------------------
# Profiles
# ---------------------------------------------------------------------------


@dataclass
class Profile:
    """Values of cells sampled along a line.

    Attributes:
        s: Arc-length coordinate of each sample.
        x, y: Cell-centre coordinates.
        fields: Mapping of quantity name to values.
    """

    s: np.ndarray
    x: np.ndarray
    y: np.ndarray
    fields: dict


def cross_section(q, mesh, line: str | tuple = "diagonal") -> Profile:
    """Sample cells along the diagonal ``x = y`` or an axis-parallel line.

    Args:
        q: Conserved field of shape ``(nx, ny, 7)``.
        mesh: The mesh.
        line: ``"diagonal"``, ``("x", c)`` or ``("y", c)``.

    Returns:
        A :class:`Profile`. The diagonal variant also carries ``un``
        (``U . n``), ``cnn`` (``C n . n``) and ``ut``, ``ctt`` with
        ``n = (1, 1)/sqrt(2)``.
    """
    nx, ny = mesh.nx, mesh.ny
    if isinstance(line, str) and line.lower() == "diagonal":
        m = min(nx, ny)
        ii = np.round((np.arange(m) + 0.5) * nx / m - 0.5).astype(int)
        jj = np.round((np.arange(m) + 0.5) * ny / m - 0.5).astype(int)
    else:
        axis, c = line
        if axis.lower() == "x":
            i = int(np.clip(np.floor(c / mesh.dx), 0, nx - 1))
            jj = np.arange(ny)
            ii = np.full(ny, i)
        elif axis.lower() == "y":
            j = int(np.clip(np.floor(c / mesh.dy), 0, ny - 1))
            ii = np.arange(nx)
            jj = np.full(nx, j)
        else:
            raise ValueError(f"unknown line {line!r}")
    x = (ii + 0.5) * mesh.dx
    y = (jj + 0.5) * mesh.dy
    p = conserved_to_primitive(q[ii, jj])
    fields = {k: np.asarray(getattr(p, k)) for k in ("h", "u", "v", "cxx", "cyy", "cxy", "czz")}
    if isinstance(line, str):
        s = (x + y) / np.sqrt(2.0)
        r = 1.0 / np.sqrt(2.0)
        fields["un"] = (p.u + p.v) * r
        fields["ut"] = (p.v - p.u) * r
        fields["cnn"] = 0.5 * (p.cxx + 2 * p.cxy + p.cyy)
        fields["ctt"] = 0.5 * (p.cxx - 2 * p.cxy + p.cyy)
    elif line[0].lower() == "x":
        s = y
    else:
        s = x
    return Profile(s, x, y, fields)


# ---------------------------------------------------------------------------
# Fuzzing
# ---------------------------------------------------------------------------


def random_admissible_states(rng: np.random.Generator, n: int):
    """Random admissible primitive states spread over several decades.

    Depths and diagonal tensor entries are log-uniform; the correlation
    ``c_xy / sqrt(c_xx c_yy)`` is uniform in ``(-0.95, 0.95)``.
    """
    from .state import PrimitiveState

    h = np.exp(rng.uniform(np.log(0.1), np.log(10.0), n))
    u = rng.normal(0.0, 3.0, n)
    v = rng.normal(0.0, 3.0, n)
    cxx = np.exp(rng.uniform(-2.0, 2.0, n))
    cyy = np.exp(rng.uniform(-2.0, 2.0, n))
    rho = rng.uniform(-0.95, 0.95, n)
    czz = np.exp(rng.uniform(-2.0, 2.0, n))
    return PrimitiveState(h, u, v, cxx, cyy, rho * np.sqrt(cxx * cyy), czz)


@dataclass
class FuzzReport:
    """Outcome of a randomized Riemann audit.

    Attributes:
        model: Model audited.
        pairs: Number of face problems.
        max_residual: Largest relative invariant/jump residual.
        entropy_failures: Faces whose entropy conditions did not hold.
        inadmissible: Fan states outside the admissible domain.
        decoupled: Faces solved with the decoupled fallback.
    """

    model: ModelKind
    pairs: int
    max_residual: float
    entropy_failures: int
    inadmissible: int
    decoupled: int

    def passed(self, tol: float = 1e-10) -> bool:
        return self.max_residual <= tol and self.entropy_failures == 0 and self.inadmissible == 0


def fuzz_audit(n: int, seed: int, model, params: PhysParams | None = None) -> FuzzReport:
    """Solve ``n`` random admissible pairs and audit every fan."""
    from .riemann import LocalPair, solve_pair
    from .state import admissibility_margins, primitive_to_conserved

    model = ModelKind.parse(model)
    params = params or PhysParams()
    rng = np.random.default_rng(seed)
    left = random_admissible_states(rng, n)
    right = random_admissible_states(rng, n)
    fan = solve_pair(LocalPair(left, right), params, model)
    res = invariant_audit(fan, model)
    bad = 0
    for s in fan.states:
        p = s.primitive()
        ok = (p.h > 0) & (p.cxx > 0) & (p.cyy > 0) & (p.czz > 0) & (p.det > 0)
        if np.all(ok):
            ok = np.all(admissibility_margins(primitive_to_conserved(p)) > 0, axis=-1)
        bad += int(np.sum(~ok))
    rp = fan.params
    return FuzzReport(model, n, float(np.max(res)), int(np.sum(~rp.entropy_ok)), bad,
                      int(np.sum(rp.decoupled)) if rp.decoupled is not None else 0)
