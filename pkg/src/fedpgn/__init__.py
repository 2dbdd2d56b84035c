"""Deterministic desk-scale lab for client-level DP federated learning.

The package trains small models under the client-level Gaussian
mechanism with three local update rules (plain averaging, local
sharpness-aware ascent, and server-anchored gradient-norm penalty),
accounts the privacy budget with a quadrature-based Renyi accountant,
and ships flatness / update-norm probes for inspecting what the privacy
mechanism does to the optimization geometry.
"""

from .accountant import (ALPHA_GRID, AccountResult, PrivacyLedger,
                         calibrate_sigma, compose_and_convert, rdp_per_round)
from .data import (CsvSchema, CsvSource, DataBatch, Dataset, Partition,
                   SyntheticSource, dirichlet_partition, ingest_csv, next_batch,
                   synth_clusters)
from .engine import (DP_FEDAVG, DP_FEDPGN, DP_FEDSAM, AlgorithmSpec,
                     ClientUpdate, RoundMetrics, RoundState, RunConfig,
                     RunResult, aggregate, local_train, make_raw_update, run,
                     run_round, sample_clients)
from .errors import ConfigError, CsvFormatError, NumericError
from .mechanism import (ClipPolicy, NoiseSpec, add_noise, clip,
                        resolve_clip_threshold, sensitivity)
from .models import MLP, SOFTMAX, Model, accuracy, loss_and_grad, perturbed_grad
from .numerics import (add, derive_seed, dot, l2_norm, load_checkpoint,
                       save_checkpoint, scale, stream)
from .probes import (GridSpec, LandscapeGrid, NormReport, SharpnessProbe,
                     landscape_slice, norm_report, shared_norm_reports,
                     sharpness_proxy)
from .smoothing import SmoothingOperator, smooth, smooth_blocks

__version__ = "0.1.0"
