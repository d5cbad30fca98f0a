"""Two-body propagation and inter-satellite link visibility."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from isrfd.errors import ConfigError, NumericalError

MU_EARTH = 398600.4418  # km^3/s^2
MU_MOON = 4902.800066  # km^3/s^2
R_EARTH = 6378.137  # km
R_MOON = 1737.4  # km

KEPLER_TOL = 1e-12
KEPLER_MAX_ITER = 100


@dataclass(frozen=True)
class OrbitalElements:
    """Keplerian elements of one satellite. Angles in degrees, ``a`` in km."""

    a: float
    e: float
    i: float
    raan: float
    argp: float
    M0: float
    mu: float = MU_EARTH

    def __post_init__(self):
        if not self.a > 0:
            raise ConfigError(f"semi-major axis must be positive, got {self.a}")
        if not 0.0 <= self.e < 1.0:
            raise ConfigError(f"eccentricity must lie in [0, 1), got {self.e}")
        if not self.mu > 0:
            raise ConfigError(f"mu must be positive, got {self.mu}")

    @property
    def period(self) -> float:
        """Orbital period in seconds."""
        return 2.0 * math.pi * math.sqrt(self.a**3 / self.mu)

    @property
    def mean_motion(self) -> float:
        return math.sqrt(self.mu / self.a**3)


@dataclass(frozen=True)
class BodyModel:
    """Central body with an occultation mask and a boresight cutoff angle."""

    radius: float
    mask_altitude: float
    phi_max: float
    mu: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ConfigError(f"body radius must be positive, got {self.radius}")
        if self.mask_altitude < 0:
            raise ConfigError(f"mask altitude must be >= 0, got {self.mask_altitude}")
        if not 0.0 <= self.phi_max <= 180.0:
            raise ConfigError(f"phi_max must lie in [0, 180], got {self.phi_max}")
        if not self.mu > 0:
            raise ConfigError(f"mu must be positive, got {self.mu}")

    @property
    def mask_radius(self) -> float:
        return self.radius + self.mask_altitude


EARTH = BodyModel(R_EARTH, 1000.0, 60.0, MU_EARTH)
MOON = BodyModel(R_MOON, 100.0, 90.0, MU_MOON)


@dataclass(frozen=True)
class ConstellationState:
    """Truth and ephemeris positions (km) of every satellite at one epoch.

    ``sigma_r`` is the per-axis 1-sigma ephemeris position error in metres.
    """

    epoch: float
    truth_positions: np.ndarray
    ephemeris_positions: np.ndarray
    sigma_r: float

    def __post_init__(self):
        if self.truth_positions.shape != self.ephemeris_positions.shape:
            raise ValueError("truth and ephemeris positions differ in shape")
        if self.sigma_r < 0:
            raise ValueError("sigma_r must be non-negative")

    @property
    def n(self) -> int:
        return len(self.truth_positions)


def solve_kepler(M, e, tol=KEPLER_TOL, max_iter=KEPLER_MAX_ITER):
    """Solve Kepler's equation ``E - e sin E = M`` for the eccentric anomaly.

    Newton iteration, with bisection on ``[M - e, M + e]`` if Newton fails
    to converge or leaves the bracket.
    """
    if not 0.0 <= e < 1.0:
        raise ValueError(f"eccentricity must lie in [0, 1), got {e}")
    if not tol > 0:
        raise ValueError("tol must be positive")

    def f(E):
        return E - e * math.sin(E) - M

    lo, hi = M - e, M + e
    E = M if e < 0.8 else math.pi * math.copysign(1.0, math.sin(M)) + M - math.sin(M)
    E = min(max(E, lo), hi)
    for _ in range(max_iter):
        fE = f(E)
        if abs(fE) <= tol:
            return E
        step = fE / (1.0 - e * math.cos(E))
        E_new = E - step
        if not lo <= E_new <= hi:
            break
        E = E_new
    # bisection fallback; f is monotone on the bracket
    flo = f(lo)
    if abs(flo) <= tol:
        return lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        if abs(fmid) <= tol or hi - lo < 1e-15:
            return mid
        if (fmid < 0) == (flo < 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    raise NumericalError(f"Kepler solver did not converge for M={M}, e={e}")


def _rotation(raan, inc, argp):
    """Perifocal-to-inertial rotation matrix (angles in radians)."""
    cO, sO = math.cos(raan), math.sin(raan)
    ci, si = math.cos(inc), math.sin(inc)
    cw, sw = math.cos(argp), math.sin(argp)
    return np.array(
        [
            [cO * cw - sO * sw * ci, -cO * sw - sO * cw * ci, sO * si],
            [sO * cw + cO * sw * ci, -sO * sw + cO * cw * ci, -cO * si],
            [sw * si, cw * si, ci],
        ]
    )


def propagate(elements: OrbitalElements, t: float) -> np.ndarray:
    """Inertial position (km) of a satellite ``t`` seconds after epoch."""
    el = elements
    M = math.radians(el.M0) + el.mean_motion * t
    M = math.remainder(M, 2.0 * math.pi)
    E = solve_kepler(M, el.e)
    r_pf = np.array(
        [
            el.a * (math.cos(E) - el.e),
            el.a * math.sqrt(1.0 - el.e**2) * math.sin(E),
            0.0,
        ]
    )
    R = _rotation(math.radians(el.raan), math.radians(el.i), math.radians(el.argp))
    return R @ r_pf


def propagate_all(constellation, t) -> np.ndarray:
    """Stack of positions (n, 3) for every satellite at time ``t``."""
    return np.array([propagate(el, t) for el in constellation])


def constellation_state(constellation, t, sigma_r, rng=None) -> ConstellationState:
    """Truth positions plus ephemeris positions with i.i.d. per-axis error.

    ``sigma_r`` is in metres; positions are in km.
    """
    truth = propagate_all(constellation, t)
    if sigma_r > 0:
        if rng is None:
            raise ValueError("an rng is required when sigma_r > 0")
        eph = truth + rng.normal(0.0, sigma_r * 1e-3, size=truth.shape)
    else:
        eph = truth.copy()
    return ConstellationState(float(t), truth, eph, float(sigma_r))


def _endpoint_angle_ok(x_from, x_to, cos_max):
    # angle between line-of-sight and the satellite-to-centre vector
    los = x_to - x_from
    nadir = -x_from
    denom = np.linalg.norm(los, axis=-1) * np.linalg.norm(nadir, axis=-1)
    cosang = np.sum(los * nadir, axis=-1) / denom
    return cosang > cos_max


def _segment_clear(x_i, x_j, radius):
    d = x_j - x_i
    dd = np.sum(d * d, axis=-1)
    s = np.clip(-np.sum(x_i * d, axis=-1) / np.where(dd > 0, dd, 1.0), 0.0, 1.0)
    closest = x_i + s[..., None] * d
    return np.sum(closest * closest, axis=-1) > radius * radius


def link_visible(x_i, x_j, body: BodyModel) -> bool:
    """Whether satellites at ``x_i`` and ``x_j`` (km) can range each other.

    The segment must clear the masked sphere and, at both ends, the line of
    sight must lie strictly within ``phi_max`` of the nadir direction.
    """
    x_i = np.asarray(x_i, dtype=float)
    x_j = np.asarray(x_j, dtype=float)
    cos_max = math.cos(math.radians(body.phi_max))
    return bool(
        _segment_clear(x_i, x_j, body.mask_radius)
        and _endpoint_angle_ok(x_i, x_j, cos_max)
        and _endpoint_angle_ok(x_j, x_i, cos_max)
    )


def visibility_matrix(positions, body: BodyModel) -> np.ndarray:
    """Symmetric boolean (n, n) matrix of visible links, False on the diagonal."""
    x = np.asarray(positions, dtype=float)
    n = len(x)
    xi = np.broadcast_to(x[:, None, :], (n, n, 3))
    xj = np.broadcast_to(x[None, :, :], (n, n, 3))
    cos_max = math.cos(math.radians(body.phi_max))
    with np.errstate(invalid="ignore", divide="ignore"):
        vis = (
            _segment_clear(xi, xj, body.mask_radius)
            & _endpoint_angle_ok(xi, xj, cos_max)
            & _endpoint_angle_ok(xj, xi, cos_max)
        )
    np.fill_diagonal(vis, False)
    # symmetric by construction; enforce against rounding
    return vis & vis.T


def build_link_graph(state: ConstellationState, body: BodyModel):
    """Link graph of all mutually visible pairs at the state's truth positions."""
    from isrfd.graphkit import LinkGraph

    if state.n < 2:
        raise ValueError("need at least two satellites")
    vis = visibility_matrix(state.truth_positions, body)
    return LinkGraph.from_adjacency(vis)


def walker_constellation(a, inc, planes, per_plane, phasing=1, e=0.0, mu=MU_EARTH,
                         raan0=0.0):
    """Walker-style constellation; ``per_plane`` may differ between planes."""
    if isinstance(per_plane, int):
        per_plane = [per_plane] * planes
    if len(per_plane) != planes:
        raise ConfigError("satellites_per_plane must have one entry per plane")
    total = sum(per_plane)
    sats = []
    for p, count in enumerate(per_plane):
        raan = raan0 + 360.0 * p / planes
        for s in range(count):
            M0 = (360.0 * s / count + 360.0 * phasing * p / total) % 360.0
            sats.append(OrbitalElements(a, e, inc, raan, 0.0, M0, mu))
    return sats
