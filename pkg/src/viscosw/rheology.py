"""Constitutive laws of the two Maxwell shallow-water models.

Everything that distinguishes the upper-convected model (SVUCM) from the
Teshukov model (SVTM) lives here: stress sign, normal/transverse pressures in
an interface frame, smooth relaxation coefficients, the transported strong
invariants, the relaxation source step and the dissipation rate.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .state import PhysParams, PrimitiveState


class ModelKind(enum.Enum):
    """Which conformation-tensor rate is used."""

    SVUCM = "svucm"
    SVTM = "svtm"

    @classmethod
    def parse(cls, name: "str | ModelKind") -> "ModelKind":
        if isinstance(name, ModelKind):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            raise ValueError(f"unknown model {name!r}; expected 'svucm' or 'svtm'") from None


@dataclass
class ModelCoefficients:
    """Pressures and smooth relaxation coefficients in an interface frame.

    Attributes:
        p_par: Normal pressure ``P_par``.
        p_perp: Transverse pressure ``P_perp``.
        c_par_sq: Smooth Lagrangian sound speed squared for the normal waves.
        c_perp_sq: Smooth Lagrangian speed squared for the shear waves.
        a_sq: Coupling between ``v`` and the transverse strain ``psi``.
        b: Coupling between ``u`` and ``P_perp``.
        psi: Transverse strain variable.
    """

    p_par: np.ndarray | float
    p_perp: np.ndarray | float
    c_par_sq: np.ndarray | float
    c_perp_sq: np.ndarray | float
    a_sq: np.ndarray | float
    b: np.ndarray | float
    psi: np.ndarray | float


def stress(p: PrimitiveState, G: float, model: ModelKind):
    """Specific elastic stress.

    Returns:
        ``((sxx, syy, sxy), szz)``.
    """
    sign = 1.0 if ModelKind.parse(model) is ModelKind.SVUCM else -1.0
    sxx = sign * G * (p.cxx - 1.0)
    syy = sign * G * (p.cyy - 1.0)
    sxy = sign * G * p.cxy
    szz = sign * G * (p.czz - 1.0)
    return (sxx, syy, sxy), szz


def pressures(p: PrimitiveState, params: PhysParams, model: ModelKind):
    """Normal and transverse pressures ``(P_par, P_perp)`` in the frame of ``p``."""
    g, G = params.g, params.G
    hydro = 0.5 * g * p.h**2
    if ModelKind.parse(model) is ModelKind.SVTM:
        return hydro + G * p.h * (p.cxx - p.czz), G * p.h * p.cxy
    return hydro + G * p.h * (p.czz - p.cxx), -G * p.h * p.cxy


def dp_dh(p: PrimitiveState, params: PhysParams, model: ModelKind):
    """Smooth ``d P_par / d h`` along the normal waves, i.e. ``c_par^2 / h^2``."""
    g, G = params.g, params.G
    if ModelKind.parse(model) is ModelKind.SVTM:
        return g * p.h + G * (3.0 * p.cxx + p.czz)
    return g * p.h + G * (3.0 * p.czz + p.cxx)


def transverse_strain(p: PrimitiveState, model: ModelKind):
    """Transverse strain variable ``psi``."""
    if ModelKind.parse(model) is ModelKind.SVTM:
        return p.cxy / p.h
    return -p.h * p.cxy


def model_coefficients(p: PrimitiveState, params: PhysParams, model: ModelKind) -> ModelCoefficients:
    """Smooth-case pressures and relaxation coefficients."""
    model = ModelKind.parse(model)
    G = params.G
    p_par, p_perp = pressures(p, params, model)
    c_par_sq = p.h**2 * dp_dh(p, params, model)
    c_perp_sq = G * p.h**2 * p.cxx
    if model is ModelKind.SVTM:
        a_sq = p.cxx
        b = 2.0 * G * p.h**2 * p.cxy
    else:
        a_sq = p.cxx * p.h**2
        b = 0.0 * p.cxy
    return ModelCoefficients(p_par, p_perp, c_par_sq, c_perp_sq, a_sq, b, transverse_strain(p, model))


def strong_invariants(p: PrimitiveState, model: ModelKind):
    """Quantities transported by ``u`` across every wave of one side of the fan.

    Returns:
        ``(I1, I2, I3)`` with ``I3 = c_yy - c_xy^2 / c_xx``.
    """
    i3 = p.cyy - p.cxy**2 / p.cxx
    if ModelKind.parse(model) is ModelKind.SVTM:
        return p.cxx / p.h**2, p.h**2 * p.czz, i3
    return p.h**2 * p.cxx, p.czz / p.h**2, i3


def state_from_invariants(h, u, v, i1, i2, i3, psi, model: ModelKind) -> PrimitiveState:
    """Inverse of ``(strong_invariants, transverse_strain)`` at given ``h, u, v``."""
    if ModelKind.parse(model) is ModelKind.SVTM:
        cxx = i1 * h**2
        czz = i2 / h**2
        cxy = h * psi
    else:
        cxx = i1 / h**2
        czz = i2 * h**2
        cxy = -psi / h
    cyy = i3 + cxy**2 / cxx
    return PrimitiveState(h, u, v, cxx, cyy, cxy, czz)


def relax_source_step(p: PrimitiveState, tau: float, params: PhysParams) -> PrimitiveState:
    """Backward-Euler step for friction and Maxwell relaxation.

    ``h`` is unchanged; ``U`` is damped and ``C`` moves toward ``I`` by a convex
    combination, so admissibility is preserved for any ``tau >= 0``.
    """
    if tau < 0:
        raise ValueError("tau must be non-negative")
    damp = 1.0 / (1.0 + tau * params.k)
    r = tau / params.lam
    w = 1.0 / (1.0 + r)
    return PrimitiveState(
        p.h,
        p.u * damp,
        p.v * damp,
        (p.cxx + r) * w,
        (p.cyy + r) * w,
        p.cxy * w,
        (p.czz + r) * w,
    )


def dissipation(p: PrimitiveState, params: PhysParams):
    """Elastic dissipation rate ``D >= 0`` (zero iff ``C = I``)."""
    det = p.cxx * p.cyy - p.cxy**2
    tr = p.cxx + p.cyy
    tr_inv = tr / det
    return params.G * (tr + tr_inv - 4.0 + p.czz + 1.0 / p.czz - 2.0) / (2.0 * params.lam)


@dataclass
class JSResult:
    """Characteristic speeds of the Johnson-Segalman family.

    Attributes:
        values: The four non-trivial speeds, ordered, or ``None``.
        hyperbolic: Whether all speeds are real.
        delta: The auxiliary quantity ``Delta``.
    """

    values: np.ndarray | None
    hyperbolic: bool
    delta: float


def js_eigenvalues(p: PrimitiveState, params: PhysParams, zeta: float) -> JSResult:
    """Speeds of the 1D Johnson-Segalman system with slip parameter ``zeta``.

    At ``zeta = 0`` these are ``u +- sqrt(gh + 3G c_zz + G c_xx)`` and
    ``u +- sqrt(G c_xx)``.
    """
    if not 0.0 <= zeta <= 2.0:
        raise ValueError("zeta must lie in [0, 2]")
    g, G = params.g, params.G
    delta = 2 * g * p.h + G * (2 * (3 - 2 * zeta) * p.czz + zeta * p.cyy - 3 * zeta * p.cxx)
    extra = G * ((4 - 2 * zeta) * p.cxx - 2 * zeta * p.cyy)
    inner = delta**2 + (G * 4 * zeta * p.cxy) ** 2
    root = np.sqrt(inner)
    lo = delta + extra - root
    hi = delta + extra + root
    if not lo >= 0:
        return JSResult(None, False, float(delta))
    s_hi = 0.5 * np.sqrt(hi)
    s_lo = 0.5 * np.sqrt(lo)
    vals = np.array([p.u - s_hi, p.u - s_lo, p.u + s_lo, p.u + s_hi], dtype=float)
    return JSResult(vals, True, float(delta))


def js_real_condition(p: PrimitiveState, params: PhysParams, zeta: float) -> bool:
    """Reality test written as the polynomial inequality on ``c_xy``.

    ``G^2 (4 zeta c_xy)^2 <= 2 Delta A + A^2`` with ``A = G((4 - 2 zeta) c_xx - 2 zeta c_yy)``
    together with ``Delta + A >= 0``.
    """
    g, G = params.g, params.G
    delta = 2 * g * p.h + G * (2 * (3 - 2 * zeta) * p.czz + zeta * p.cyy - 3 * zeta * p.cxx)
    a = G * ((4 - 2 * zeta) * p.cxx - 2 * zeta * p.cyy)
    return bool((G * 4 * zeta * p.cxy) ** 2 <= 2 * delta * a + a**2 and delta + a >= 0)
