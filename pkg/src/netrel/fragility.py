"""Lognormal bridge fragility curves and roadway survival probabilities.

A bridge is taken out of service once it reaches the extensive damage state;
the slight/moderate/complete curves are kept for reporting only.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
from scipy.special import ndtr

from .errors import DataError
from .hazard import Site

DAMAGE_STATES = ("slight", "moderate", "extensive", "complete")
FAILURE_STATE = "extensive"
#: intensity-measure kinds and the spectral period each needs (None for PGA)
IM_PERIODS = {"PGA": None, "SA0.3": 0.3, "SA1.0": 1.0}


@dataclass(frozen=True)
class FragilityCurve:
    damage_state: str
    im_kind: str
    median_im: float
    beta_ln: float

    def __post_init__(self):
        if self.damage_state not in DAMAGE_STATES:
            raise DataError(f"unknown damage state {self.damage_state!r}")
        if self.im_kind not in IM_PERIODS:
            raise DataError(f"unknown intensity measure {self.im_kind!r}")
        if not (self.median_im > 0 and self.beta_ln > 0):
            raise DataError("fragility median and dispersion must be positive")


def damage_exceedance_prob(curve: FragilityCurve, im):
    """P(damage >= curve.damage_state | IM = im) = Phi(ln(im / median) / beta)."""
    im = np.asarray(im, dtype=np.float64)
    if np.any(im <= 0):
        raise DataError("intensity measure must be positive")
    p = ndtr(np.log(im / curve.median_im) / curve.beta_ln)
    return float(p) if p.ndim == 0 else p


@dataclass(frozen=True)
class Bridge:
    id: int
    site: Site
    bridge_class: str
    curves: Mapping[str, FragilityCurve]

    def __post_init__(self):
        missing = [s for s in DAMAGE_STATES if s not in self.curves]
        if missing:
            raise DataError(f"bridge {self.id}: missing fragility curves {missing}")
        medians = [self.curves[s].median_im for s in DAMAGE_STATES]
        if any(b < a for a, b in zip(medians, medians[1:])):
            raise DataError(f"bridge {self.id}: medians must not decrease with severity")

    @property
    def failure_curve(self) -> FragilityCurve:
        return self.curves[FAILURE_STATE]


def bridge_survival_prob(bridge: Bridge, ims: Mapping[str, float]) -> float:
    """1 - P(extensive or worse) at the bridge site."""
    curve = bridge.failure_curve
    if curve.im_kind not in ims:
        raise DataError(f"bridge {bridge.id} needs intensity measure {curve.im_kind}")
    return 1.0 - damage_exceedance_prob(curve, ims[curve.im_kind])


def roadway_survival_probs(net, bridge_survivals: Mapping[int, float]) -> np.ndarray:
    """Per-roadway survival: product of its bridges' survival, summed in log scale."""
    out = np.ones(net.n_links)
    for road in net.links:
        if not road.bridge_ids:
            continue
        try:
            ps = np.array([bridge_survivals[b] for b in road.bridge_ids], dtype=np.float64)
        except KeyError as exc:
            raise DataError(f"no survival probability for bridge {exc.args[0]}") from None
        if np.any(ps < 0) or np.any(ps > 1):
            raise DataError(f"roadway {road.id}: bridge survival outside [0, 1]")
        with np.errstate(divide="ignore"):
            out[road.id] = np.exp(np.log(ps).sum())
    return out


def load_fragility_table(text: str) -> dict[str, dict[str, FragilityCurve]]:
    """CSV ``class,damage_state,im_kind,median_g,beta_ln`` -> {class: {state: curve}}."""
    reader = csv.DictReader(io.StringIO(text))
    need = {"class", "damage_state", "im_kind", "median_g", "beta_ln"}
    if reader.fieldnames is None or not need <= set(reader.fieldnames):
        raise DataError(f"fragility table header must contain {sorted(need)}")
    table: dict[str, dict[str, FragilityCurve]] = {}
    for row in reader:
        try:
            curve = FragilityCurve(row["damage_state"].strip(), row["im_kind"].strip(),
                                   float(row["median_g"]), float(row["beta_ln"]))
        except (TypeError, ValueError) as exc:
            raise DataError(f"bad fragility row {row}: {exc}") from exc
        table.setdefault(row["class"].strip(), {})[curve.damage_state] = curve
    return table


def load_bridges(text: str, fragility: Mapping[str, Mapping[str, FragilityCurve]]) -> list[Bridge]:
    """Bridge inventory JSON joined with a fragility table by class label."""
    try:
        items = json.loads(text)["bridges"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"malformed bridge inventory: {exc!r}") from exc
    bridges = []
    for item in items:
        try:
            cls = item["class"]
            site = Site(float(item["lat"]), float(item["lon"]), float(item.get("vs30", 270.0)),
                        float(item.get("basin_depth", 0.0)), item.get("soil_class", "D"))
            bridge_id = int(item["id"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed bridge entry {item}: {exc!r}") from exc
        if cls not in fragility:
            raise DataError(f"bridge {bridge_id}: class {cls!r} not in fragility table")
        bridges.append(Bridge(bridge_id, site, cls, dict(fragility[cls])))
    ids = [b.id for b in bridges]
    if len(set(ids)) != len(ids):
        raise DataError("duplicate bridge ids in inventory")
    return bridges


class BridgeArrays:
    """Column view of a bridge inventory for vectorized evaluation over events."""

    def __init__(self, bridges: Iterable[Bridge]):
        bridges = sorted(bridges, key=lambda b: b.id)
        self.ids = np.array([b.id for b in bridges], dtype=np.int64)
        self.lat = np.array([b.site.lat for b in bridges])
        self.lon = np.array([b.site.lon for b in bridges])
        self.vs30 = np.array([b.site.vs30 for b in bridges])
        self.basin_depth = np.array([b.site.basin_depth for b in bridges])
        self.im_kind = [b.failure_curve.im_kind for b in bridges]
        self.ln_median = np.log([b.failure_curve.median_im for b in bridges])
        self.beta = np.array([b.failure_curve.beta_ln for b in bridges])
        self.position = {int(i): k for k, i in enumerate(self.ids)}

    def __len__(self):
        return len(self.ids)

    def survival_from_ln_im(self, ln_ims: Mapping[str, np.ndarray]) -> np.ndarray:
        """Bridge survival given ln IM arrays (..., n_bridges) per IM kind."""
        ln_im = np.stack([ln_ims[k][..., j] for j, k in enumerate(self.im_kind)], axis=-1)
        return ndtr(-(ln_im - self.ln_median) / self.beta)
