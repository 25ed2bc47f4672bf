"""Ground-motion prediction, GMPE residual sampling and magnitude distributions.

Median PGA is the product of five filters evaluated from a coefficient table::

    ln PGA = ln G1(M) + ln G2(M, R) + ln G3(R) + ln G4(Vs30) + ln G5(B, R)

(magnitude/faulting scaling, geometric attenuation, anelastic attenuation,
site amplification, basin amplification) and spectral acceleration is
``Sa(T) = PGA * mu(T; M, R, Vs30, B)``. Each filter names a parametric *form*
in the table; all functions broadcast over numpy arrays.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import DataError

EARTH_RADIUS_KM = 6371.0
FILTERS = ("G1", "G2", "G3", "G4", "G5")
PERIOD_RANGE = (0.01, 5.0)


@dataclass(frozen=True)
class Site:
    lat: float
    lon: float
    vs30: float = 270.0
    basin_depth: float = 0.0  # km
    soil_class: str = "D"

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0 or not -180.0 <= self.lon <= 180.0:
            raise DataError(f"invalid coordinates ({self.lat}, {self.lon})")
        if not 200.0 <= self.vs30 <= 1300.0:
            warnings.warn(f"Vs30={self.vs30} m/s is outside the GMPE range 200-1300", stacklevel=3)


@dataclass(frozen=True)
class EarthquakeEvent:
    magnitude: float
    lat: float
    lon: float

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0 or not -180.0 <= self.lon <= 180.0:
            raise DataError(f"invalid epicenter ({self.lat}, {self.lon})")
        if not 5.0 <= self.magnitude <= 8.0:
            warnings.warn(f"M={self.magnitude} is outside the GMPE range 5.0-8.0", stacklevel=3)


def haversine_km(lat1, lon1, lat2, lon2):
    """Great-circle distance in km; broadcasts over arrays."""
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dphi = p2 - p1
    dlmb = np.radians(np.asarray(lon2) - np.asarray(lon1))
    h = np.sin(dphi / 2) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dlmb / 2) ** 2
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def source_distance(site: Site, event: EarthquakeEvent) -> float:
    """Epicentral distance used as the rupture distance (point source)."""
    return float(haversine_km(site.lat, site.lon, event.lat, event.lon))


# -- filter forms ----------------------------------------------------------
# Each form maps (params, m, r, vs30, basin) -> ln G, broadcasting.

def _constant(c, m, r, vs30, bd):
    return np.full(np.broadcast(m, r, vs30, bd).shape, float(c["ln_value"]))


def _arctan_magnitude(c, m, r, vs30, bd):
    return np.log((c["c1"] * np.arctan(m + c["c2"]) + c["c3"]) * c.get("fault_factor", 1.0))


def _loglinear_magnitude(c, m, r, vs30, bd):
    return c["a"] + c["b"] * (m - c.get("m_ref", 6.0))


def _resonance_attenuation(c, m, r, vs30, bd):
    r0 = c["c4"] * m + c["c5"]
    d0 = c["c6"] * np.cos(c["c7"] * (m + c["c8"])) + c["c9"]
    x = r / r0
    return -0.5 * np.log((1.0 - x) ** 2 + 4.0 * d0**2 * x)


def _geometric_attenuation(c, m, r, vs30, bd):
    h = c["h"]
    return -c.get("gamma", 1.0) * np.log(np.sqrt(r**2 + h**2) / h)


def _linear_anelastic(c, m, r, vs30, bd):
    return -c["q"] * r


def _vs30_loglinear(c, m, r, vs30, bd):
    return c["bv"] * np.log(vs30 / c["va"])


def _basin_resonance(c, m, r, vs30, bd):
    xb = c["b0"] / (bd + 0.1)
    xr = c["r0"] / (r + 0.1)
    d2 = 4.0 * c["damping"] ** 2
    a_depth = c["amp"] / np.sqrt((1.0 - xb**2) ** 2 + d2 * xb**2)
    a_dist = 1.0 / np.sqrt((1.0 - xr**2) ** 2 + d2 * xr**2)
    return np.log1p(a_depth * a_dist)


FILTER_FORMS: dict[str, tuple[Callable, tuple[str, ...]]] = {
    "constant": (_constant, ("ln_value",)),
    "arctan_magnitude": (_arctan_magnitude, ("c1", "c2", "c3")),
    "loglinear_magnitude": (_loglinear_magnitude, ("a", "b")),
    "resonance_attenuation": (_resonance_attenuation, ("c4", "c5", "c6", "c7", "c8", "c9")),
    "geometric_attenuation": (_geometric_attenuation, ("h",)),
    "linear_anelastic": (_linear_anelastic, ("q",)),
    "vs30_loglinear": (_vs30_loglinear, ("bv", "va")),
    "basin_resonance": (_basin_resonance, ("amp", "b0", "r0", "damping")),
}


# -- spectral shape forms: (params, T, m, r, vs30, basin) -> ln mu ----------

def _shape_constant(c, t, m, r, vs30, bd):
    return np.full(np.broadcast(t, m, r, vs30, bd).shape, float(c["ln_value"]))


def _shape_peak_decay(c, t, m, r, vs30, bd):
    # lognormal bump around a peak period, divided by a long-period roll-off;
    # mu -> 1 as T -> 0 so Sa(0) = PGA
    ln_tp = (c["p0"] + c["p1"] * (m - 6.0) + c["p2"] * np.log(vs30 / 760.0)
             + c["p3"] * np.log((r + 10.0) / 10.0) + c.get("p4", 0.0) * bd)
    ln_tc = c["t0"] + c["t1"] * (m - 6.0)
    bump = 1.0 + c["peak"] * np.exp(-0.5 * ((np.log(t) - ln_tp) / c["width"]) ** 2)
    rolloff = 1.0 + np.exp(c["decay"] * (np.log(t) - ln_tc))
    return np.log(bump) - np.log(rolloff)


SHAPE_FORMS: dict[str, tuple[Callable, tuple[str, ...]]] = {
    "constant": (_shape_constant, ("ln_value",)),
    "peak_decay": (_shape_peak_decay, ("p0", "p1", "p2", "p3", "t0", "t1", "peak", "width", "decay")),
}


@dataclass(frozen=True)
class GmpeCoefficients:
    filters: Mapping[str, Mapping[str, float]]
    spectral_shape: Mapping[str, float]
    sigma_ln_pga: float
    name: str = ""
    version: str = ""
    notes: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.sigma_ln_pga >= 0.0:
            raise DataError("sigma_ln_pga must be non-negative")
        for key in FILTERS:
            if key not in self.filters:
                raise DataError(f"GMPE table is missing filter {key}")
            _check_form(FILTER_FORMS, self.filters[key], key)
        _check_form(SHAPE_FORMS, self.spectral_shape, "spectral_shape")

    @classmethod
    def from_dict(cls, data: dict) -> "GmpeCoefficients":
        try:
            return cls(filters={k: dict(v) for k, v in data["filters"].items()},
                       spectral_shape=dict(data["spectral_shape"]),
                       sigma_ln_pga=float(data["sigma_ln_pga"]),
                       name=data.get("name", ""), version=str(data.get("version", "")),
                       notes=data.get("notes", ""))
        except (KeyError, TypeError, AttributeError) as exc:
            raise DataError(f"malformed GMPE table: {exc!r}") from exc

    def to_dict(self) -> dict:
        return {"name": self.name, "version": self.version, "notes": self.notes,
                "sigma_ln_pga": self.sigma_ln_pga,
                "filters": {k: dict(v) for k, v in self.filters.items()},
                "spectral_shape": dict(self.spectral_shape)}

    def with_sigma(self, sigma_ln_pga: float) -> "GmpeCoefficients":
        return GmpeCoefficients(self.filters, self.spectral_shape, sigma_ln_pga,
                                self.name, self.version, self.notes)


def _check_form(registry, table, label):
    form = table.get("form")
    if form not in registry:
        raise DataError(f"{label}: unknown form {form!r}")
    missing = [p for p in registry[form][1] if p not in table]
    if missing:
        raise DataError(f"{label}: form {form!r} needs {missing}")


def load_gmpe(text: str) -> GmpeCoefficients:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"GMPE file is not valid JSON: {exc}") from exc
    return GmpeCoefficients.from_dict(data)


def ln_filter(coeffs: GmpeCoefficients, key: str, m, r, vs30, basin_depth):
    table = coeffs.filters[key]
    fn = FILTER_FORMS[table["form"]][0]
    return fn(table, m, r, vs30, basin_depth)


def ln_median_pga(coeffs: GmpeCoefficients, m, r, vs30, basin_depth):
    """Sum of the five log-filters (residual term excluded)."""
    m, r, vs30, bd = (np.asarray(x, dtype=np.float64) for x in (m, r, vs30, basin_depth))
    if np.any(r < 0):
        raise DataError("distance must be non-negative")
    return sum(ln_filter(coeffs, k, m, r, vs30, bd) for k in FILTERS)


def ln_spectral_shape(coeffs: GmpeCoefficients, period, m, r, vs30, basin_depth):
    t = np.asarray(period, dtype=np.float64)
    if np.any((t < PERIOD_RANGE[0]) | (t > PERIOD_RANGE[1])):
        raise DataError(f"period must lie in {PERIOD_RANGE[0]}-{PERIOD_RANGE[1]} s")
    table = coeffs.spectral_shape
    fn = SHAPE_FORMS[table["form"]][0]
    return fn(table, t, *(np.asarray(x, dtype=np.float64) for x in (m, r, vs30, basin_depth)))


def median_pga(coeffs: GmpeCoefficients, m: float, r: float, site: Site) -> float:
    """Median peak ground acceleration in g."""
    return float(np.exp(ln_median_pga(coeffs, m, r, site.vs30, site.basin_depth)))


def spectral_accel(coeffs: GmpeCoefficients, m: float, r: float, site: Site, period: float) -> float:
    """Median 5%-damped spectral acceleration in g."""
    ln_pga = ln_median_pga(coeffs, m, r, site.vs30, site.basin_depth)
    ln_mu = ln_spectral_shape(coeffs, period, m, r, site.vs30, site.basin_depth)
    return float(np.exp(ln_pga + ln_mu))


def sample_ground_motion(median, sigma_ln: float, rng: np.random.Generator):
    """Lognormal draw around ``median``: ln(x) ~ N(ln median, sigma_ln**2)."""
    med = np.asarray(median, dtype=np.float64)
    if np.any(med <= 0):
        raise DataError("median ground motion must be positive")
    if sigma_ln < 0:
        raise DataError("sigma_ln must be non-negative")
    out = med * np.exp(sigma_ln * rng.standard_normal(med.shape))
    return float(out) if out.ndim == 0 else out


# -- magnitude distributions -------------------------------------------------

@dataclass(frozen=True)
class TruncExpMagnitude:
    """Exponential density with rate ``beta`` truncated to [m_min, m_max]."""

    beta: float
    m_min: float
    m_max: float

    def __post_init__(self):
        if not self.beta > 0:
            raise DataError("beta must be positive")
        if not self.m_min < self.m_max:
            raise DataError("m_min must be below m_max")

    @property
    def _mass(self) -> float:
        return -math.expm1(-self.beta * (self.m_max - self.m_min))

    def pdf(self, m):
        m = np.asarray(m, dtype=np.float64)
        dens = self.beta * np.exp(-self.beta * (m - self.m_min)) / self._mass
        return np.where((m >= self.m_min) & (m <= self.m_max), dens, 0.0)

    def cdf(self, m):
        m = np.clip(np.asarray(m, dtype=np.float64), self.m_min, self.m_max)
        return -np.expm1(-self.beta * (m - self.m_min)) / self._mass

    def ppf(self, u):
        u = np.asarray(u, dtype=np.float64)
        m = self.m_min - np.log1p(-u * self._mass) / self.beta
        return np.clip(m, self.m_min, self.m_max)

    def mean(self) -> float:
        width = self.m_max - self.m_min
        return self.m_min + 1.0 / self.beta - width * math.exp(-self.beta * width) / self._mass

    def sample(self, rng: np.random.Generator, size=None):
        out = self.ppf(rng.random(size))
        return float(out) if size is None else out

    def to_dict(self) -> dict:
        return {"beta": self.beta, "m_min": self.m_min, "m_max": self.m_max}


@dataclass(frozen=True)
class FixedMagnitude:
    """Scenario earthquake: every draw returns the same magnitude."""

    magnitude: float

    def sample(self, rng: np.random.Generator, size=None):
        rng.random(size)  # keep stream consumption identical to random distributions
        return self.magnitude if size is None else np.full(size, self.magnitude)

    def to_dict(self) -> dict:
        return {"beta": 1.0, "m_min": self.magnitude, "m_max": self.magnitude}


@dataclass(frozen=True)
class TrainingMagnitude:
    """m = m_top - theta with theta truncated-exponential; piles samples up near m_top."""

    m_top: float = 8.0
    theta: TruncExpMagnitude = TruncExpMagnitude(15.0, 0.0, 1.5)

    def from_uniform(self, u):
        return self.m_top - self.theta.ppf(u)

    def cdf(self, m):
        return 1.0 - self.theta.cdf(self.m_top - np.asarray(m, dtype=np.float64))

    def sample(self, rng: np.random.Generator, size=None):
        out = self.from_uniform(rng.random(size))
        return float(out) if size is None else out


def sample_magnitude_truncexp(dist: TruncExpMagnitude, rng: np.random.Generator) -> float:
    return dist.sample(rng)


def sample_training_magnitude(rng: np.random.Generator) -> float:
    return TrainingMagnitude().sample(rng)


def magnitude_dist_from_dict(data: dict):
    try:
        beta, lo, hi = float(data["beta"]), float(data["m_min"]), float(data["m_max"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed magnitude distribution: {exc!r}") from exc
    if lo == hi:
        return FixedMagnitude(lo)
    return TruncExpMagnitude(beta, lo, hi)


def load_magnitude_dist(text: str):
    try:
        return magnitude_dist_from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        raise DataError(f"magnitude file is not valid JSON: {exc}") from exc
