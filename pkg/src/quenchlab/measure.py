"""Interface extraction and contact-angle measurement on 2D fields."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientPoints, NoCrossing
from .quench2d import Field2D


@dataclass
class NodalLine:
    """Per-column zero-crossing heights, with problem columns reported."""

    x: np.ndarray
    y: np.ndarray
    no_crossing_x: list = field(default_factory=list)
    multi_crossing_x: list = field(default_factory=list)

    def points(self):
        return list(zip(self.x, self.y))


@dataclass
class AngleMeasurement:
    """Fitted interface slope and the angles derived from it."""

    psi: float
    phi: float
    slope: float
    fit_window: tuple
    rms_fit_error: float
    n_points: int


@dataclass
class ContactTrack:
    """Height of the nodal line at the quenching column x = 0 over time."""

    times: np.ndarray
    y_contact: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.y_contact = np.asarray(self.y_contact, dtype=float)
        if self.times.size != self.y_contact.size:
            raise ValueError("times and y_contact must have equal length")
        if self.times.size > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")


def _column_crossings(yv: np.ndarray, col: np.ndarray) -> list:
    s = np.sign(col)
    idx = np.nonzero((s[:-1] * s[1:] < 0) | ((s[:-1] != 0) & (s[1:] == 0)))[0]
    out = []
    for j in idx:
        if col[j + 1] == col[j]:
            continue
        out.append(yv[j] - col[j] * (yv[j + 1] - yv[j]) / (col[j + 1] - col[j]))
    return out


def zero_level_set(u: Field2D) -> NodalLine:
    """Nodal-line height per x-column by linear interpolation in y.

    Columns without a sign change (normal in the right farfield) and
    columns with several crossings are reported in the result rather than
    silently dropped; multi-crossing columns are excluded from the fit
    data.  Raises NoCrossing only if no column crosses zero at all.
    """
    xs, ys = [], []
    none_x, multi_x = [], []
    yv = u.y
    for i, xv in enumerate(u.x):
        roots = _column_crossings(yv, u.data[:, i])
        if len(roots) == 1:
            xs.append(xv)
            ys.append(roots[0])
        elif not roots:
            none_x.append(xv)
        else:
            multi_x.append(xv)
    if not xs:
        raise NoCrossing("no column of the field changes sign")
    return NodalLine(x=np.array(xs), y=np.array(ys),
                     no_crossing_x=none_x, multi_crossing_x=multi_x)


def fit_contact_angle(nodal: NodalLine, window: tuple) -> AngleMeasurement:
    """Least-squares line through the nodal points in the window.

    The asymptote encodes height y ~ -tan(psi) x, so psi = arctan(-slope)
    and the contact angle is phi = pi/2 + psi.  The window must sit in the
    left farfield (x < -5) where the interface is asymptotically straight.
    """
    lo, hi = window
    if hi > -5.0:
        raise ValueError("fit window must lie in the left farfield (x < -5)")
    m = (nodal.x >= lo) & (nodal.x <= hi)
    n = int(m.sum())
    if n < 20:
        raise InsufficientPoints(f"only {n} nodal points in window {window}")
    A = np.column_stack([nodal.x[m], np.ones(n)])
    coef, *_ = np.linalg.lstsq(A, nodal.y[m], rcond=None)
    resid = nodal.y[m] - A @ coef
    rms = float(np.sqrt(np.mean(resid**2)))
    slope = float(coef[0])
    psi = float(np.arctan(-slope))
    return AngleMeasurement(psi=psi, phi=np.pi / 2 + psi, slope=slope,
                            fit_window=(lo, hi), rms_fit_error=rms, n_points=n)


def measure_drift(track: ContactTrack) -> float:
    """Least-squares vertical speed of the contact point.

    In the correctly chosen comoving frame the drift is close to zero.
    """
    if track.times.size < 10:
        raise InsufficientPoints(f"need >= 10 samples, got {track.times.size}")
    if track.times[-1] - track.times[0] < 10.0:
        raise InsufficientPoints("track must span a time interval >= 10")
    t = track.times - track.times.mean()
    return float(np.sum(t * (track.y_contact - track.y_contact.mean()))
                 / np.sum(t * t))


class ContactRecorder:
    """run_to_steady recorder that tracks the contact point at x = 0."""

    def __init__(self, template: Field2D):
        self.i0 = template.index_of_x(0.0)
        self.yv = template.y
        self.times = []
        self.heights = []

    def __call__(self, step: int, time: float, data: np.ndarray):
        roots = _column_crossings(self.yv, data[:, self.i0])
        if not roots:
            return
        if self.heights:
            y0 = min(roots, key=lambda r: abs(r - self.heights[-1]))
        else:
            y0 = min(roots, key=abs)
        self.times.append(time)
        self.heights.append(y0)

    def track(self) -> ContactTrack:
        return ContactTrack(times=np.array(self.times),
                            y_contact=np.array(self.heights))


def append_measurement(path: str, alpha: float, c_x: float,
                       m: AngleMeasurement, drift: float):
    """Append one row to the measurements CSV, writing the header if new."""
    import os
    new = not os.path.exists(path)
    with open(path, "a") as fh:
        if new:
            fh.write("alpha,c_x,psi,phi,rms,drift\n")
        fh.write(f"{alpha:.17g},{c_x:.17g},{m.psi:.17g},{m.phi:.17g},"
                 f"{m.rms_fit_error:.17g},{drift:.17g}\n")
