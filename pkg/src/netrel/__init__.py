"""Two-terminal seismic reliability of road networks: Monte Carlo and neural surrogates."""
from ._backend import COMPILED
from .errors import DataError, NumericalError
from .fragility import (Bridge, FragilityCurve, bridge_survival_prob, damage_exceedance_prob,
                        load_bridges, load_fragility_table, roadway_survival_probs)
from .hazard import (EarthquakeEvent, FixedMagnitude, GmpeCoefficients, Site, TrainingMagnitude,
                     TruncExpMagnitude, load_gmpe, load_magnitude_dist, median_pga,
                     sample_ground_motion, sample_magnitude_truncexp, sample_training_magnitude,
                     source_distance, spectral_accel)
from .montecarlo import (ReliabilityEstimate, SeismicScenario, estimate_connectivity,
                         estimate_probabilistic_event, sample_topology)
from .network import (Roadway, TransportNetwork, exact_reliability, is_connected, load_network,
                      network_from_dict)
from .neural import (AdamState, Dataset, Layer, Mlp, TrainConfig, adam_step, backward, forward,
                     load_model, loss_bce, loss_mse, save_model, train)
from .surrogates import (ClassifierMetrics, ClassifierSurrogate, EndToEndSurrogate, classify,
                         eval_classifier, generate_classifier_dataset, generate_e2e_dataset,
                         oat_sensitivity, predict_e2e, qoi_accuracy, train_classifier, train_e2e)

__version__ = "0.1.0"
