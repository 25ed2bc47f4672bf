"""Neural surrogates for the connectivity pipeline.

* The classifier surrogate maps a roadway state vector (1 = survived) to a
  connected/disconnected decision and can stand in for DFS inside the Monte
  Carlo loop.
* The end-to-end surrogate maps a roadway survival-probability vector straight
  to expected connectivity, replacing the whole sampling loop.

Also here: dataset generation, accuracy metrics and one-at-a-time (OAT)
retrofit sensitivity ranking.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import rng as rngmod
from ._backend import kernels
from .errors import DataError
from .hazard import TrainingMagnitude
from .montecarlo import SeismicScenario, connectivity_per_event
from .network import connected_batch, exact_reliability
from .neural import Dataset, Mlp, TrainConfig, forward, train

CLASSIFIER_HIDDEN = (64, 64, 32, 32, 16, 16, 8)
E2E_HIDDEN = (64, 32, 32, 16, 8)
DEFAULT_THRESHOLD = 0.5
TRAIN_FRACTION = 0.9

# stream labels
TRAIN_MAGNITUDE = "train-magnitude"
TRAIN_TOPOLOGY = "train-topology"
SPLIT = "split"
AUGMENT = "augment"
E2E_MAGNITUDE = "e2e-magnitude"
OAT_EVENT = "oat-event"


def classifier_activations(n_hidden: int) -> list[str]:
    """relu on all hidden layers but the last, which is sigmoid; sigmoid output."""
    if n_hidden < 1:
        raise DataError("the classifier needs at least one hidden layer")
    return ["relu"] * (n_hidden - 1) + ["sigmoid", "sigmoid"]


def e2e_activations(n_hidden: int) -> list[str]:
    return ["sigmoid"] * n_hidden + ["identity"]


# -- surrogates ---------------------------------------------------------------

@dataclass
class ClassifierSurrogate:
    model: Mlp
    threshold: float = DEFAULT_THRESHOLD
    metrics: "ClassifierMetrics | None" = None
    history: list[float] = field(default_factory=list)

    def __post_init__(self):
        if self.model.output_dim != 1 or self.model.layers[-1].activation != "sigmoid":
            raise DataError("a classifier surrogate needs a single sigmoid output")
        if not 0.0 < self.threshold < 1.0:
            raise DataError("threshold must lie strictly between 0 and 1")

    @property
    def n_links(self) -> int:
        return self.model.input_dim

    def scores(self, states) -> np.ndarray:
        """Sigmoid outputs for a batch of state rows (M, n_links)."""
        return forward(self.model, np.atleast_2d(states))[:, 0]

    def check_batch(self, states) -> np.ndarray:
        return (self.scores(states) >= self.threshold).astype(np.uint8)

    def __call__(self, net, topo) -> int:
        return classify(self, topo)


def classify(surrogate: ClassifierSurrogate, topo) -> int:
    """1 if the surrogate's output for one realization reaches the threshold."""
    topo = np.asarray(topo)
    if topo.ndim != 1 or topo.shape[0] != surrogate.n_links:
        raise DataError(f"realization has shape {topo.shape}, surrogate expects "
                        f"{surrogate.n_links} roadways")
    return int(surrogate.check_batch(topo[None, :])[0])


@dataclass
class EndToEndSurrogate:
    model: Mlp
    qoi_accuracy: float | None = None
    history: list[float] = field(default_factory=list)

    def __post_init__(self):
        if self.model.output_dim != 1:
            raise DataError("an end-to-end surrogate has a single output")

    @property
    def n_links(self) -> int:
        return self.model.input_dim

    def predict_batch(self, prob_rows) -> np.ndarray:
        P = np.atleast_2d(np.asarray(prob_rows, dtype=np.float64))
        if P.shape[1] != self.n_links:
            raise DataError(f"probability rows have {P.shape[1]} entries, model expects "
                            f"{self.n_links}")
        if not np.all((P >= 0) & (P <= 1)):
            raise DataError("roadway probabilities must lie in [0, 1]")
        return np.clip(forward(self.model, P)[:, 0], 0.0, 1.0)

    def predict(self, probs) -> float:
        return float(self.predict_batch(np.asarray(probs, dtype=np.float64)[None, :])[0])


def predict_e2e(surrogate: EndToEndSurrogate, probs):
    """Expected connectivity for one probability vector, or one value per row of a matrix."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim == 1:
        return surrogate.predict(probs)
    return surrogate.predict_batch(probs)


# -- metrics ------------------------------------------------------------------

@dataclass(frozen=True)
class ClassifierMetrics:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def n(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @property
    def alpha_binary(self) -> float:
        return (self.tp + self.tn) / self.n

    @property
    def tpr(self) -> float | None:
        pos = self.tp + self.fn
        return self.tp / pos if pos else None

    @property
    def tnr(self) -> float | None:
        neg = self.tn + self.fp
        return self.tn / neg if neg else None

    def to_dict(self) -> dict:
        return {"alpha_binary": self.alpha_binary, "tpr": self.tpr, "tnr": self.tnr,
                "tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn}


def confusion(predicted, labels) -> ClassifierMetrics:
    pred = np.asarray(predicted).astype(bool).ravel()
    lab = np.asarray(labels).ravel()
    if pred.shape != lab.shape:
        raise DataError("predictions and labels differ in length")
    if lab.size == 0:
        raise DataError("cannot score an empty dataset")
    if not np.all((lab == 0) | (lab == 1)):
        raise DataError("labels must be 0 or 1")
    lab = lab.astype(bool)
    return ClassifierMetrics(int(np.sum(pred & lab)), int(np.sum(~pred & ~lab)),
                             int(np.sum(pred & ~lab)), int(np.sum(~pred & lab)))


def eval_classifier(surrogate: ClassifierSurrogate, data: Dataset) -> ClassifierMetrics:
    if len(data) == 0:
        raise DataError("cannot score an empty dataset")
    return confusion(surrogate.check_batch(data.inputs), data.targets[:, 0])


def qoi_accuracy(pc_ref: float, pc_sur: float) -> float:
    """1 - |ref - sur| / ref."""
    if pc_ref == 0:
        raise DataError("reference connectivity is zero; relative accuracy undefined")
    return 1.0 - abs(pc_ref - pc_sur) / pc_ref


# -- classifier data and training ---------------------------------------------

@dataclass
class SplitData:
    train: Dataset
    eval: Dataset
    magnitudes: np.ndarray
    train_events: np.ndarray
    eval_events: np.ndarray


def split_events(n: int, seed: int, fraction: float = TRAIN_FRACTION):
    """Random event-level partition; the first ``round(fraction * n)`` go to training."""
    order = rngmod.stream(seed, SPLIT).permutation(n)
    n_train = int(round(fraction * n))
    if n >= 2:
        n_train = min(max(n_train, 1), n - 1)
    return np.sort(order[:n_train]), np.sort(order[n_train:])


def _augment_disconnected(states, labels, copies, seed):
    """Extra negatives: fail one more surviving roadway of each disconnected row."""
    g = rngmod.stream(seed, AUGMENT)
    extra = []
    for row in states[labels == 0]:
        for _ in range(copies):
            alive = np.flatnonzero(row)
            if alive.size == 0:
                break
            row = row.copy()
            row[alive[g.integers(alive.size)]] = 0
            extra.append(row)
    if not extra:
        return np.empty((0, states.shape[1]), dtype=states.dtype)
    return np.array(extra)


def generate_classifier_dataset(scenario: SeismicScenario, n_magnitudes: int,
                                realizations_per_magnitude: int = 1, seed: int = 0,
                                magnitude_sampler=None, augment_disconnected: int = 0,
                                ) -> SplitData:
    """Topology realizations labelled by DFS, split by magnitude sample into train/eval.

    Augmented negatives (``augment_disconnected`` extra rows per disconnected
    training row) are added to the training part only.
    """
    if n_magnitudes < 1 or realizations_per_magnitude < 1:
        raise DataError("counts must be at least 1")
    sampler = magnitude_sampler or TrainingMagnitude()
    net = scenario.net
    mags, _ = scenario.draw_events(sampler, n_magnitudes, seed, label=TRAIN_MAGNITUDE)
    P = np.ascontiguousarray(scenario.roadway_probs(scenario.bridge_survivals(mags)))
    r = realizations_per_magnitude
    states = np.empty((n_magnitudes, r, net.n_links), dtype=np.uint8)
    for k in range(n_magnitudes):
        key = rngmod.stream_key(seed, TRAIN_TOPOLOGY, k)
        states[k] = kernels.sample_states(key, 0, r, P[k])
    tr, ev = split_events(n_magnitudes, seed)

    def rows(events):
        s = states[events].reshape(-1, net.n_links)
        return s, connected_batch(net, s)

    s_tr, y_tr = rows(tr)
    s_ev, y_ev = rows(ev)
    if augment_disconnected:
        extra = _augment_disconnected(s_tr, y_tr, augment_disconnected, seed)
        s_tr = np.vstack([s_tr, extra])
        y_tr = np.concatenate([y_tr, np.zeros(len(extra), dtype=y_tr.dtype)])
    return SplitData(Dataset(s_tr, y_tr), Dataset(s_ev, y_ev), mags, tr, ev)


def train_classifier(data: SplitData | Dataset, hidden: Sequence[int] = CLASSIFIER_HIDDEN,
                     config: TrainConfig | None = None, init_seed: int = 0,
                     threshold: float = DEFAULT_THRESHOLD,
                     eval_data: Dataset | None = None) -> ClassifierSurrogate:
    """Fit a classifier with BCE; held-out metrics are attached when eval rows exist."""
    config = config or TrainConfig(loss="bce")
    if config.loss != "bce":
        raise DataError("the classifier is trained with the bce loss")
    if isinstance(data, SplitData):
        train_set, eval_data = data.train, data.eval
    else:
        train_set = data
    if not np.all((train_set.targets == 0) | (train_set.targets == 1)):
        raise DataError("classifier targets must be binary")
    dims = [train_set.inputs.shape[1], *hidden, 1]
    model = Mlp.create(dims, classifier_activations(len(hidden)), seed=init_seed)
    fit = train(model, train_set, config)
    sur = ClassifierSurrogate(fit.model, threshold, history=fit.history)
    if eval_data is not None and len(eval_data):
        sur.metrics = eval_classifier(sur, eval_data)
    return sur


# -- end-to-end data and training ---------------------------------------------

@dataclass
class E2eData:
    train: Dataset
    eval: Dataset
    magnitudes: np.ndarray
    train_events: np.ndarray
    eval_events: np.ndarray


def generate_e2e_dataset(scenario: SeismicScenario, checker, n_magnitudes: int,
                         n_topologies: int, seed: int = 0, magnitude_sampler=None,
                         with_residuals: bool = False, residual_sigma: float | None = None,
                         workers: int = 1) -> E2eData:
    """Rows of (roadway survival probabilities -> mean checker verdict over sampled topologies).

    ``checker`` is normally a trained :class:`ClassifierSurrogate`; ``"dfs"``
    labels with the exact check instead. ``with_residuals`` draws per-bridge
    ground-motion residuals for each row, which spreads the inputs away from
    the one-parameter family traced by magnitude alone; ``residual_sigma``
    overrides the GMPE's log-standard deviation for those draws.
    """
    if n_magnitudes < 1 or n_topologies < 1:
        raise DataError("counts must be at least 1")
    sampler = magnitude_sampler or TrainingMagnitude()
    mags, z = scenario.draw_events(sampler, n_magnitudes, seed, with_residuals, label=E2E_MAGNITUDE)
    P = np.ascontiguousarray(scenario.roadway_probs(scenario.bridge_survivals(mags, z, residual_sigma)))
    y = connectivity_per_event(scenario.net, P, n_topologies, checker, seed, workers)
    tr, ev = split_events(n_magnitudes, seed)
    return E2eData(Dataset(P[tr], y[tr]), Dataset(P[ev], y[ev]), mags, tr, ev)


def train_e2e(data: E2eData | Dataset, hidden: Sequence[int] = E2E_HIDDEN,
              config: TrainConfig | None = None, init_seed: int = 0,
              eval_data: Dataset | None = None) -> EndToEndSurrogate:
    """Fit the regressor with MSE; attaches alpha_QoI of the held-out mean when available."""
    config = config or TrainConfig(epochs=2000, loss="mse")
    if config.loss != "mse":
        raise DataError("the end-to-end surrogate is trained with the mse loss")
    if isinstance(data, E2eData):
        train_set, eval_data = data.train, data.eval
    else:
        train_set = data
    if not np.all((train_set.targets >= 0) & (train_set.targets <= 1)):
        raise DataError("regression targets must lie in [0, 1]")
    dims = [train_set.inputs.shape[1], *hidden, 1]
    model = Mlp.create(dims, e2e_activations(len(hidden)), seed=init_seed)
    fit = train(model, train_set, config)
    sur = EndToEndSurrogate(fit.model, history=fit.history)
    if eval_data is not None and len(eval_data):
        ref = float(eval_data.targets.mean())
        if ref > 0:
            sur.qoi_accuracy = qoi_accuracy(ref, float(sur.predict_batch(eval_data.inputs).mean()))
    return sur


# -- one-at-a-time sensitivity --------------------------------------------------

ESTIMATORS = ("mc-dfs", "e2e", "exact")


@dataclass(frozen=True)
class SensitivityRow:
    rank: int
    bridge_id: int
    improvement_pct: float
    estimator_seconds: float


@dataclass
class SensitivityResult:
    baseline: float
    rows: list[SensitivityRow]
    estimator: str
    elapsed_seconds: float

    def to_csv(self) -> str:
        lines = ["rank,bridge_id,improvement_pct,estimator_seconds"]
        lines += [f"{r.rank},{r.bridge_id},{r.improvement_pct!r},{r.estimator_seconds!r}"
                  for r in self.rows]
        return "\n".join(lines) + "\n"

    def ranking(self) -> list[int]:
        return [r.bridge_id for r in self.rows]


def rank_improvements(improvements: dict[int, float], decimals: int | None = 2) -> list[int]:
    """Bridge ids by improvement, largest first; ties (at ``decimals``) by ascending id."""
    def key(item):
        bid, val = item
        v = round(val, decimals) if decimals is not None else val
        return (-v, bid)
    return [bid for bid, _ in sorted(improvements.items(), key=key)]


def oat_sensitivity(scenario: SeismicScenario, magnitude_dist, amplification: float = 0.10,
                    estimator: str = "mc-dfs", surrogate: EndToEndSurrogate | None = None,
                    n_events: int = 100, n_inner: int = 10000, seed: int = 0,
                    workers: int = 1, rank_decimals: int | None = 2) -> SensitivityResult:
    """Rank bridges by the gain in expected connectivity when each one's survival
    probability alone is scaled by ``1 + amplification`` (capped at 1).

    All variants share the same earthquake draws and, for ``mc-dfs``, the same
    topology uniforms, so differences reflect the perturbation and not sampling
    noise. Bridges that sit on no roadway of the network show no change.
    """
    if not amplification > 0:
        raise DataError("amplification must be positive")
    if estimator not in ESTIMATORS:
        raise DataError(f"estimator must be one of {ESTIMATORS}")
    if estimator == "e2e":
        if surrogate is None:
            raise DataError("the e2e estimator needs a trained end-to-end surrogate")
        if surrogate.n_links != scenario.net.n_links:
            raise DataError(f"surrogate expects {surrogate.n_links} roadways, network has "
                            f"{scenario.net.n_links}")
    t_start = time.perf_counter()
    mags, _ = scenario.draw_events(magnitude_dist, n_events, seed, label=OAT_EVENT)
    S = scenario.bridge_survivals(mags)
    net = scenario.net

    def expected(P):
        P = np.ascontiguousarray(P)
        if estimator == "e2e":
            return float(surrogate.predict_batch(P).mean())
        if estimator == "exact":
            return float(np.mean([exact_reliability(net, row) for row in P]))
        return float(connectivity_per_event(net, P, n_inner, "dfs", seed, workers).mean())

    base = expected(scenario.roadway_probs(S))
    if base <= 0:
        raise DataError("baseline connectivity is zero; relative improvement undefined")
    improvements, seconds = {}, {}
    for j, bid in enumerate(scenario.bridge_ids):
        t0 = time.perf_counter()
        Sj = S.copy()
        Sj[:, j] = np.minimum(1.0, S[:, j] * (1.0 + amplification))
        value = expected(scenario.roadway_probs(Sj))
        improvements[int(bid)] = 100.0 * (value - base) / base
        seconds[int(bid)] = time.perf_counter() - t0
    order = rank_improvements(improvements, rank_decimals)
    rows = [SensitivityRow(i + 1, b, improvements[b], seconds[b]) for i, b in enumerate(order)]
    return SensitivityResult(base, rows, estimator, time.perf_counter() - t_start)
