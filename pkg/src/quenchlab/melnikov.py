"""Angle-selection integrals and the predicted angle derivative.

Projecting the parameter derivatives of the comoving equation on the
adjoint-kernel direction e^{c_x x} dTheta/dy yields two scalars: the angle
sensitivity (m_psi, negative) and the perturbation sensitivity (m_alpha).
Their ratio predicts the angle response d(phi)/d(alpha) = -m_alpha/m_psi.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateMpsi, NonFinite
from .model import ModelParams, potential_G
from .profiles1d import Profile1D, cn_prime_quadrature
from .quench2d import Field2D

#: the weighted integrand must have decayed by this factor at the domain edge
_EDGE_DECAY = 1e-6


@dataclass
class MelnikovReport:
    """Selection integrals, their ratio, and quadrature-error estimates."""

    m_psi: float
    m_alpha: float
    cn_prime: float
    dphi_dalpha: float
    c_x: float
    quadrature_error: dict = field(default_factory=dict)
    geometric_term: float = 0.0
    contact_line_term: float = 0.0


def _dy_centered(data: np.ndarray, hy: float) -> np.ndarray:
    out = np.zeros_like(data)
    out[1:-1, :] = (data[2:, :] - data[:-2, :]) / (2.0 * hy)
    out[0, :] = (data[1, :] - data[0, :]) / hy
    out[-1, :] = (data[-1, :] - data[-2, :]) / hy
    return out


def m_psi(theta: Field2D, c_x: float) -> float:
    """Angle sensitivity -c_x * integral of (dTheta/dy)^2 e^{c_x x}.

    Trapezoid quadrature with centered differences; the exponential factor
    converges on the left because the weight decays, on the right because
    the profile's transverse derivative does.
    """
    value, _ = m_psi_detail(theta, c_x)
    return value


def m_psi_detail(theta: Field2D, c_x: float):
    """m_psi plus a truncation estimate from the half-domain comparison."""
    thy = _dy_centered(theta.data, theta.hy)
    w = thy**2 * np.exp(c_x * theta.x)[None, :]
    if not np.isfinite(w).all():
        raise NonFinite("weighted integrand is not finite")
    interior_max = np.abs(w[1:-1, 1:-1]).max()
    right_edge = np.abs(w[:, -1]).max()
    if interior_max > 0 and right_edge > _EDGE_DECAY * interior_max:
        raise NonFinite(
            f"weighted integrand at the right boundary ({right_edge:.2e}) "
            f"has not decayed; domain too small")

    def integrate(sub):
        return float(np.trapezoid(np.trapezoid(sub, dx=theta.hx, axis=1),
                     dx=theta.hy, axis=0))

    full = integrate(w)
    qx = theta.nx // 4
    qy = theta.ny // 4
    half = integrate(w[qy:theta.ny - qy, qx:theta.nx - qx])
    return -c_x * full, abs(c_x) * abs(full - half)


def contact_line_integral(u_top: Profile1D, u_bottom: Profile1D,
                          p: ModelParams):
    """Weighted x-integral of G(x, u_t) - G(x, u_b) and an error estimate.

    G is the perturbation potential; the integrand is exponentially
    localized near the contact line by the weight on the left and the
    profile tails on the right.  Trapezoid at profile resolution with a
    coarse-grid Richardson error estimate.
    """
    if u_top.grid != u_bottom.grid:
        raise ValueError("top and bottom profiles must share one grid")
    x = u_top.grid.nodes()
    h = u_top.grid.h
    i0 = u_top.grid.index_of_origin()
    gt = potential_G(x, u_top.values, p)
    gb = potential_G(x, u_bottom.values, p)
    # the potential jump at the origin node is sampled by its side-average
    gt[i0] = 0.5 * (potential_G(-1.0, u_top.values[i0], p)
                    + potential_G(1.0, u_top.values[i0], p))
    gb[i0] = 0.5 * (potential_G(-1.0, u_bottom.values[i0], p)
                    + potential_G(1.0, u_bottom.values[i0], p))
    f = np.exp(p.c_x * x) * (gt - gb)
    if not np.isfinite(f).all():
        raise NonFinite("contact-line integrand is not finite")
    if np.abs(f[-1]) > _EDGE_DECAY * max(np.abs(f).max(), 1e-300):
        raise NonFinite("contact-line integrand has not decayed on the right")
    full = float(np.trapezoid(f, dx=h))
    even = i0 % 2  # keep the x = 0 node on the coarse grid
    coarse = float(np.trapezoid(f[even::2], dx=2 * h))
    return full, abs(full - coarse) / 3.0


def m_alpha(u_top: Profile1D, u_bottom: Profile1D, p: ModelParams,
            m_psi_value: float, cn_prime_value: float) -> float:
    """Perturbation sensitivity from the cokernel projection.

    Two contributions: a geometric term from the frame-speed response,
    cn'(0) * integral (dTheta/dy)^2 e^{c_x x} = -cn'(0) m_psi / c_x, and the
    contact-line term -integral e^{c_x x} [G(x,u_t) - G(x,u_b)] dx.
    """
    if p.c_x <= 0:
        raise ValueError("m_alpha requires c_x > 0")
    geometric = -cn_prime_value * m_psi_value / p.c_x
    contact, _ = contact_line_integral(u_top, u_bottom, p)
    return geometric - contact


def dphi_dalpha(m_psi_value: float, m_alpha_value: float, cn_prime_value: float,
                c_x: float, quadrature_error: dict | None = None,
                min_m_psi: float = 1e-10) -> MelnikovReport:
    """Assemble the report with dphi/dalpha = -m_alpha/m_psi."""
    if not m_psi_value < -min_m_psi:
        raise DegenerateMpsi(f"m_psi = {m_psi_value:.3e} is not negative enough")
    geometric = -cn_prime_value * m_psi_value / c_x if c_x > 0 else 0.0
    return MelnikovReport(
        m_psi=m_psi_value,
        m_alpha=m_alpha_value,
        cn_prime=cn_prime_value,
        dphi_dalpha=-m_alpha_value / m_psi_value,
        c_x=c_x,
        quadrature_error=dict(quadrature_error or {}),
        geometric_term=geometric,
        contact_line_term=m_alpha_value - geometric,
    )


def build_report(theta: Field2D, u_top: Profile1D, u_bottom: Profile1D,
                 p: ModelParams) -> MelnikovReport:
    """Compute all selection integrals for one parameter set."""
    mp, mp_err = m_psi_detail(theta, p.c_x)
    cnp = cn_prime_quadrature(p.g_left)
    contact, contact_err = contact_line_integral(u_top, u_bottom, p)
    ma = -cnp * mp / p.c_x - contact
    return dphi_dalpha(mp, ma, cnp, p.c_x,
                       quadrature_error={"m_psi": mp_err,
                                         "contact_line": contact_err,
                                         "cn_prime": 1e-10})


def write_report(report: MelnikovReport, path: str):
    """Serialize the report as key = value text."""
    with open(path, "w") as fh:
        fh.write(f"c_x = {report.c_x:.17g}\n")
        fh.write(f"m_psi = {report.m_psi:.17g}\n")
        fh.write(f"m_alpha = {report.m_alpha:.17g}\n")
        fh.write(f"cn_prime = {report.cn_prime:.17g}\n")
        fh.write(f"dphi_dalpha = {report.dphi_dalpha:.17g}\n")
        fh.write(f"geometric_term = {report.geometric_term:.17g}\n")
        fh.write(f"contact_line_term = {report.contact_line_term:.17g}\n")
        for key, val in sorted(report.quadrature_error.items()):
            fh.write(f"error.{key} = {val:.6e}\n")
