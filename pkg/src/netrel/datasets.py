"""Access to the bundled example data (synthetic network, bridges, GMPE, fragility)."""
from __future__ import annotations

from importlib import resources

from .fragility import load_bridges, load_fragility_table
from .hazard import load_gmpe, load_magnitude_dist
from .montecarlo import DEFAULT_EPICENTER, SeismicScenario
from .network import load_network

NETWORK = "network.json"
BRIDGES = "bridges.json"
FRAGILITY = "fragility_hazus_sa10.csv"
GMPE = "gmpe_default.json"
GMPE_SIMPLE = "gmpe_simple.json"
MAGNITUDE_EVENT = "magnitude_event.json"
MAGNITUDE_OAT = "magnitude_oat.json"


def read_text(name: str) -> str:
    return resources.files("netrel.data").joinpath(name).read_text(encoding="utf-8")


def default_network():
    return load_network(read_text(NETWORK), NETWORK)


def default_gmpe():
    return load_gmpe(read_text(GMPE))


def default_bridges():
    return load_bridges(read_text(BRIDGES), load_fragility_table(read_text(FRAGILITY)))


def event_distribution():
    """Truncated exponential, beta 0.76 on [6.8, 7.5]."""
    return load_magnitude_dist(read_text(MAGNITUDE_EVENT))


def oat_distribution():
    return load_magnitude_dist(read_text(MAGNITUDE_OAT))


def default_scenario(gmpe=None, epicenter=DEFAULT_EPICENTER) -> SeismicScenario:
    return SeismicScenario(default_network(), default_bridges(), gmpe or default_gmpe(), epicenter)
