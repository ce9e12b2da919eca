"""Physical and conserved state representations.

A primitive state holds depth, velocity and the conformation tensor
``C = (C_h, c_zz)``. The conserved vector used by the finite-volume scheme is

    q = (H, HU, HV, H c_xx, H c_yy, H c_xy / sqrt(c_xx c_yy), H c_zz)

whose admissible set ``q1, q4, q5, q7 > 0, |q6| < q1`` is convex.

All functions accept scalars or numpy arrays; array inputs are processed
elementwise, with the 7 conserved components on the last axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .errors import InadmissibleState

NQ = 7
H, HU, HV, HCXX, HCYY, HRHO, HCZZ = range(NQ)

_TINY = 1e-300
_COMPONENTS = ("h", "u", "v", "cxx", "cyy", "cxy", "czz")


@dataclass(frozen=True)
class PhysParams:
    """Physical parameters.

    Attributes:
        g: Gravity.
        G: Specific elastic modulus.
        lam: Relaxation time.
        k: Linear friction coefficient.
        nu_s: Solvent viscosity.
    """

    g: float = 10.0
    G: float = 10.0
    lam: float = 1.0
    k: float = 0.0
    nu_s: float = 0.0

    def __post_init__(self):
        checks = {
            "g > 0": self.g > 0,
            "G >= 0": self.G >= 0,
            "lambda > 0": self.lam > 0,
            "k >= 0": self.k >= 0,
            "nu_s >= 0": self.nu_s >= 0,
        }
        bad = [name for name, ok in checks.items() if not ok]
        if bad:
            raise ValueError(f"invalid physical parameters: {', '.join(bad)}")


@dataclass
class PrimitiveState:
    """Depth, velocity and conformation tensor components.

    Every field is either a float or an array; all fields share one shape.
    """

    h: np.ndarray | float
    u: np.ndarray | float
    v: np.ndarray | float
    cxx: np.ndarray | float
    cyy: np.ndarray | float
    cxy: np.ndarray | float
    czz: np.ndarray | float

    @classmethod
    def rest(cls, h=1.0, shape=()) -> "PrimitiveState":
        """Rest state with ``C = I``."""
        one = np.ones(shape)
        zero = np.zeros(shape)
        if shape == ():
            return cls(float(h), 0.0, 0.0, 1.0, 1.0, 0.0, 1.0)
        return cls(h * one, zero.copy(), zero.copy(), one.copy(), one.copy(), zero.copy(), one.copy())

    @classmethod
    def from_array(cls, a: np.ndarray) -> "PrimitiveState":
        """Build from an array with the 7 components on the last axis."""
        a = np.asarray(a, dtype=float)
        return cls(*(a[..., i] for i in range(NQ)))

    def as_array(self) -> np.ndarray:
        """Stack components on a trailing axis of length 7."""
        return np.stack(np.broadcast_arrays(*(np.asarray(getattr(self, n), dtype=float) for n in _COMPONENTS)), axis=-1)

    def take(self, idx) -> "PrimitiveState":
        """Select entries of array-valued fields."""
        return PrimitiveState(*(np.asarray(getattr(self, n))[idx] for n in _COMPONENTS))

    @property
    def det(self):
        return self.cxx * self.cyy - self.cxy**2


@dataclass
class AdmissibilityReport:
    """Outcome of an admissibility check.

    Attributes:
        violations: One ``(inequality, worst_margin, count)`` tuple per failed
            inequality. Empty when the state is admissible.
        min_margin: Smallest margin over all inequalities and entries.
    """

    violations: list[tuple[str, float, int]] = field(default_factory=list)
    min_margin: float = np.inf

    @property
    def admissible(self) -> bool:
        return not self.violations


_CONSERVED_CHECKS = ("q1>0", "q4>0", "q5>0", "q7>0", "|q6|<q1")
_PRIMITIVE_CHECKS = ("h>0", "cxx>0", "cyy>0", "czz>0", "det C_h>0")


def admissibility_margins(q) -> np.ndarray:
    """Margins of the five defining inequalities of the conserved domain.

    Args:
        q: Conserved state(s), components on the last axis.

    Returns:
        Array of shape ``q.shape[:-1] + (5,)``; positive entries are satisfied.
    """
    q = np.asarray(q, dtype=float)
    return np.stack(
        [q[..., H], q[..., HCXX], q[..., HCYY], q[..., HCZZ], q[..., H] - np.abs(q[..., HRHO])],
        axis=-1,
    )


def check_admissible(q) -> AdmissibilityReport:
    """List every violated inequality of the conserved domain with its margin."""
    m = admissibility_margins(q)
    m2 = m.reshape(-1, m.shape[-1])
    report = AdmissibilityReport(min_margin=float(np.min(m2)) if m2.size else np.inf)
    for j, name in enumerate(_CONSERVED_CHECKS):
        col = m2[:, j]
        bad = ~(col > 0)
        if np.any(bad):
            report.violations.append((name, float(np.min(np.where(np.isnan(col), -np.inf, col))), int(bad.sum())))
    return report


def _primitive_violations(p: PrimitiveState) -> list[str]:
    tests = (p.h, p.cxx, p.cyy, p.czz, p.det)
    return [name for name, val in zip(_PRIMITIVE_CHECKS, tests) if not np.all(np.asarray(val) >= _TINY)]


def require_admissible(p: PrimitiveState) -> None:
    """Raise :class:`InadmissibleState` unless every entry of ``p`` is admissible."""
    bad = _primitive_violations(p)
    if bad:
        raise InadmissibleState(f"inadmissible primitive state: {', '.join(bad)}", bad)


def primitive_to_conserved(p: PrimitiveState) -> np.ndarray:
    """Map a primitive state to the convex conserved vector.

    Raises:
        InadmissibleState: If any positivity condition fails.
    """
    require_admissible(p)
    h = np.asarray(p.h, dtype=float)
    rho = p.cxy / np.sqrt(p.cxx * p.cyy)
    comps = (h, h * p.u, h * p.v, h * p.cxx, h * p.cyy, h * rho, h * p.czz)
    return np.stack(np.broadcast_arrays(*(np.asarray(c, dtype=float) for c in comps)), axis=-1)


def conserved_to_primitive(q) -> PrimitiveState:
    """Exact inverse of :func:`primitive_to_conserved`.

    Raises:
        InadmissibleState: If ``q`` is outside the admissible domain.
    """
    q = np.asarray(q, dtype=float)
    m = admissibility_margins(q)
    if not np.all(m >= _TINY):
        bad = [name for j, name in enumerate(_CONSERVED_CHECKS) if not np.all(m[..., j] >= _TINY)]
        raise InadmissibleState(f"inadmissible conserved state: {', '.join(bad)}", bad)
    h = q[..., H]
    cxx = q[..., HCXX] / h
    cyy = q[..., HCYY] / h
    cxy = (q[..., HRHO] / h) * np.sqrt(cxx * cyy)
    return PrimitiveState(h, q[..., HU] / h, q[..., HV] / h, cxx, cyy, cxy, q[..., HCZZ] / h)


def _elastic_part(p: PrimitiveState):
    """tr(C - ln C - I) over C_h and c_zz."""
    return p.cxx + p.cyy + p.czz - np.log(p.det) - np.log(p.czz) - 3.0


def free_energy(p: PrimitiveState, params: PhysParams):
    """Specific free energy ``E`` (per unit mass)."""
    require_admissible(p)
    return 0.5 * (p.u**2 + p.v**2) + 0.5 * params.g * p.h + 0.5 * params.G * _elastic_part(p)


def entropy_density(p: PrimitiveState, params: PhysParams):
    """Mathematical entropy ``S = H E`` per unit area."""
    return p.h * free_energy(p, params)


def entropy_of_conserved(q, params: PhysParams):
    """``S(q)`` evaluated directly on conserved variables."""
    return entropy_density(conserved_to_primitive(q), params)


def energy_split(p: PrimitiveState, params: PhysParams):
    """Split the internal energy into a normal and a transverse part.

    The constants are chosen so that ``(u^2 + v^2)/2 + e_par + e_perp`` equals
    :func:`free_energy` and both parts vanish at rest with ``C = I``
    (apart from the hydrostatic ``g h / 2``).

    Returns:
        Tuple ``(e_par, e_perp)``.
    """
    require_admissible(p)
    G = params.G
    m = p.cyy - p.cxy**2 / p.cxx
    e_par = 0.5 * params.g * p.h + 0.5 * G * (p.cxx + p.czz - 2.0) - 0.5 * G * np.log(p.cxx * p.czz)
    e_perp = 0.5 * G * p.cxy**2 / p.cxx + 0.5 * G * (m - 1.0 - np.log(m))
    return e_par, e_perp
