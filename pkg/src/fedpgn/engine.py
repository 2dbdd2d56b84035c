"""Federated training loop: client sampling, local steps, private aggregation.

One round proceeds as follows.  A subset of S clients starts from the
global model and runs K local SGD steps; the local gradient target
depends on the algorithm variant:

  dp-fedavg   plain stochastic gradient,
  dp-fedsam   gradient after an ascent step along the per-batch
              stochastic gradient (recomputed every step),
  dp-fedpgn   beta-blend of the gradient taken at a point shifted along
              the server pseudo-gradient with that pseudo-gradient
              itself; the shift direction is constant within a round.

Each client then forms its raw update with the server-momentum term
added back (so the already-privatized momentum is not re-clipped),
clips, noises, removes the term again, and the server averages the
restored updates into the next pseudo-gradient and global step.

Determinism contract: every random draw comes from a stream keyed by
(seed, purpose, round, client), and all cross-client reductions run in
ascending client-id order, so results are independent of scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import data as datamod
from . import mechanism, models, smoothing
from .accountant import PrivacyLedger
from .errors import ConfigError, NumericError
from .numerics import TOL_ZERO_NORM, l2_norm, stream

DP_FEDAVG = "dp-fedavg"
DP_FEDSAM = "dp-fedsam"
DP_FEDPGN = "dp-fedpgn"

# Stream purposes; combined with (round, client) they name every draw.
PURPOSE_INIT = 0
PURPOSE_SELECT = 1
PURPOSE_BATCH = 2
PURPOSE_NOISE = 3


@dataclass(frozen=True)
class AlgorithmSpec:
    """Variant plus its perturbation / momentum / smoothing knobs.

    dp-fedavg is the rho = 0, beta = 1 point of the dp-fedpgn family and
    is normalized to it; dp-fedsam keeps its own per-step perturbation
    and does not blend in server momentum.
    """

    variant: str
    rho: float = 0.2
    beta: float = 0.3
    sigma_ls: float | None = None
    ls_per_layer: bool = False

    def __post_init__(self):
        if self.variant not in (DP_FEDAVG, DP_FEDSAM, DP_FEDPGN):
            raise ConfigError(f"unknown algorithm {self.variant!r}", field="algo.variant")
        if self.variant == DP_FEDAVG:
            object.__setattr__(self, "rho", 0.0)
            object.__setattr__(self, "beta", 1.0)
        if self.variant == DP_FEDSAM:
            object.__setattr__(self, "beta", 1.0)
        if self.rho < 0:
            raise ConfigError("rho must be >= 0", field="algo.rho")
        if not 0.0 < self.beta <= 1.0:
            raise ConfigError("beta must lie in (0, 1]", field="algo.beta")
        if self.sigma_ls is not None and self.sigma_ls < 0:
            raise ConfigError("sigma_ls must be >= 0", field="algo.sigma_ls")


@dataclass(frozen=True)
class RoundState:
    round: int
    x_global: np.ndarray
    g_server: np.ndarray
    ledger: PrivacyLedger


@dataclass(frozen=True)
class ClientUpdate:
    """One client's contribution through its four stages."""

    client: int
    raw: np.ndarray        # before clipping, momentum term included
    clipped: np.ndarray
    noised: np.ndarray
    restored: np.ndarray   # noised minus the momentum term; what the server sums
    preclip_norm: float
    grad_sum: np.ndarray   # sum over local steps of the evaluated gradients


@dataclass(frozen=True)
class RunConfig:
    """Every knob of a training run; see config.defaults() for values."""

    model: models.Model
    algo: AlgorithmSpec
    source: datamod.SyntheticSource | datamod.CsvSource
    n_clients: int
    sample_size: int
    local_steps: int
    rounds: int
    batch_size: int
    eta: float
    gamma: float | None
    lr_decay: float
    clip: mechanism.ClipPolicy
    noise: mechanism.NoiseSpec
    dp_delta: float | None
    partition_alpha: float
    seed_data: int
    seed_partition: int
    seed_train: int
    init_std: float = 0.1

    def __post_init__(self):
        if not 1 <= self.sample_size <= self.n_clients:
            raise ConfigError("need 1 <= S <= N", field="federation.sample_size")
        if self.local_steps < 1 or self.rounds < 0 or self.batch_size < 1:
            raise ConfigError("need K >= 1, R >= 0, B >= 1", field="federation")
        if self.eta <= 0 or (self.gamma is not None and self.gamma <= 0):
            raise ConfigError("learning rates must be > 0", field="federation.eta")
        if not 0 < self.lr_decay <= 1:
            raise ConfigError("lr_decay must lie in (0, 1]", field="federation.lr_decay")
        if self.partition_alpha <= 0:
            raise ConfigError("partition alpha must be > 0", field="partition.alpha")

    @property
    def q(self) -> float:
        return self.sample_size / self.n_clients

    @property
    def delta(self) -> float:
        return self.dp_delta if self.dp_delta is not None else 1.0 / self.n_clients

    def eta_at(self, rnd: int) -> float:
        return self.eta * self.lr_decay**rnd

    def gamma_at(self, rnd: int) -> float:
        if self.gamma is None:
            return self.eta_at(rnd) * self.local_steps
        return self.gamma * self.lr_decay**rnd


@dataclass(frozen=True)
class RoundMetrics:
    round: int
    train_loss: float
    test_acc: float
    grad_norm: float
    mean_preclip_norm: float
    median_preclip_norm: float
    clip_c: float
    epsilon: float


@dataclass
class RunResult:
    metrics: list
    x_final: np.ndarray
    ledger: PrivacyLedger
    norm_trace: list            # per round: list of (client, preclip_norm)
    round_vectors: list = field(default_factory=list)


def sample_clients(n_clients: int, sample_size: int,
                   rng: np.random.Generator) -> np.ndarray:
    """Uniform without-replacement draw of client ids, returned sorted."""
    if not 1 <= sample_size <= n_clients:
        raise ConfigError("need 1 <= S <= N")
    ids = rng.choice(n_clients, size=sample_size, replace=False)
    return np.sort(ids)


def perturbation_shift(g_server: np.ndarray, rho: float) -> np.ndarray | None:
    """The constant in-round shift rho * g/||g||, or None when it vanishes."""
    if rho == 0.0:
        return None
    norm = l2_norm(g_server)
    if norm <= TOL_ZERO_NORM:
        return None
    return (rho / norm) * g_server


def local_train(model, ds, part, client: int, x_start, g_server, shift,
                spec: AlgorithmSpec, local_steps: int, batch_size: int,
                eta: float, rng_batch, rnd: int = 0):
    """Run K local steps; returns (final params, sum of evaluated gradients)."""
    x = x_start.copy()
    grad_sum = np.zeros_like(x_start)
    for k in range(local_steps):
        batch = datamod.next_batch(ds, part, client, batch_size, rng_batch)
        if spec.variant == DP_FEDSAM:
            _, raw = models.loss_and_grad(model, x, batch)
            g_eval = models.perturbed_grad(model, x, raw, spec.rho, batch)
        elif shift is None:
            _, g_eval = models.loss_and_grad(model, x, batch)
        else:
            _, g_eval = models.loss_and_grad(model, x + shift, batch)
        if not np.all(np.isfinite(g_eval)):
            raise NumericError(
                f"non-finite gradient at round {rnd}, client {client}, step {k}")
        if spec.beta == 1.0:
            g_step = g_eval
        else:
            g_step = spec.beta * g_eval + (1.0 - spec.beta) * g_server
        x = x - eta * g_step
        grad_sum += g_eval
    return x, grad_sum


def make_raw_update(x_final, x_global, g_server, beta: float, local_steps: int,
                    eta: float) -> np.ndarray:
    """Local change with the server-momentum term added back before clipping."""
    if beta == 1.0:
        return x_final - x_global
    return x_final - x_global + ((1.0 - beta) * local_steps * eta) * g_server


def _restore(noised, g_server, beta: float, local_steps: int, eta: float):
    if beta == 1.0:
        return noised.copy()
    return noised - ((1.0 - beta) * local_steps * eta) * g_server


def aggregate(updates, state: RoundState, cfg: RunConfig,
              spec: AlgorithmSpec) -> RoundState:
    """Average restored updates into the next pseudo-gradient and take
    the global step; summation runs over updates in the given
    (ascending client id) order."""
    if len(updates) != cfg.sample_size:
        raise ConfigError(f"expected {cfg.sample_size} updates, got {len(updates)}")
    eta = cfg.eta_at(state.round)
    total = np.zeros_like(state.x_global)
    for upd in updates:
        total += -upd.restored
    g_next = total / (eta * cfg.sample_size * cfg.local_steps)
    if spec.sigma_ls is not None:
        if spec.ls_per_layer:
            g_next = smoothing.smooth_blocks(g_next, spec.sigma_ls,
                                             cfg.model.blocks())
        else:
            g_next = smoothing.smooth(g_next, spec.sigma_ls)
    x_next = state.x_global - cfg.gamma_at(state.round) * g_next
    ledger = state.ledger
    ledger.consume(1)
    return RoundState(state.round + 1, x_next, g_next, ledger)


def run_round(state: RoundState, cfg: RunConfig, ds, part):
    """Execute one full round; returns (next state, client updates)."""
    spec = cfg.algo
    rnd = state.round
    eta = cfg.eta_at(rnd)
    selected = sample_clients(cfg.n_clients, cfg.sample_size,
                              stream(cfg.seed_train, PURPOSE_SELECT, rnd, 0))
    shift = None
    if spec.variant == DP_FEDPGN:
        shift = perturbation_shift(state.g_server, spec.rho)

    raws = []
    for client in selected.tolist():
        rng_batch = stream(cfg.seed_train, PURPOSE_BATCH, rnd, client)
        x_final, grad_sum = local_train(
            cfg.model, ds, part, client, state.x_global, state.g_server, shift,
            spec, cfg.local_steps, cfg.batch_size, eta, rng_batch, rnd)
        raw = make_raw_update(x_final, state.x_global, state.g_server,
                              spec.beta, cfg.local_steps, eta)
        raws.append((client, raw, grad_sum, l2_norm(raw)))

    clip_c = mechanism.resolve_clip_threshold([n for _, _, _, n in raws],
                                              cfg.clip)

    updates = []
    for client, raw, grad_sum, norm in raws:
        clipped = mechanism.clip(raw, clip_c)
        noised = mechanism.add_noise(clipped, cfg.noise, clip_c, cfg.sample_size,
                                     stream(cfg.seed_train, PURPOSE_NOISE, rnd, client))
        restored = _restore(noised, state.g_server, spec.beta, cfg.local_steps, eta)
        updates.append(ClientUpdate(client, raw, clipped, noised, restored,
                                    norm, grad_sum))

    return aggregate(updates, state, cfg, spec), updates


def initial_state(cfg: RunConfig) -> RoundState:
    x0 = cfg.model.init_params(stream(cfg.seed_train, PURPOSE_INIT, 0, 0),
                               std=cfg.init_std)
    ledger = PrivacyLedger(sigma=cfg.noise.sigma, q=cfg.q, delta=cfg.delta)
    if cfg.clip.mode == mechanism.CLIP_MEDIAN:
        ledger.caveats.append(
            "clip_mode=median: threshold is data-dependent, epsilon is nominal")
    return RoundState(0, x0, np.zeros(cfg.model.dim), ledger)


def run(cfg: RunConfig, keep_round_vectors: bool = False,
        progress=None) -> RunResult:
    """Train for cfg.rounds rounds and collect per-round metrics.

    With ``keep_round_vectors`` the pseudo-gradient and the mean local
    step gradient of every round are retained for identity checks.
    """
    train, test = cfg.source.load(cfg.seed_data)
    if cfg.model.n_in != train.n_in or cfg.model.n_cls != train.n_cls:
        raise ConfigError("model dims do not match dataset", field="model")
    part = datamod.dirichlet_partition(
        train, cfg.n_clients, cfg.partition_alpha, cfg.seed_partition,
        min_client_size=max(cfg.batch_size, 10))

    state = initial_state(cfg)
    full_train = datamod.DataBatch(train.features, train.labels)
    metrics = [_measure(state, cfg, full_train, test, [], math.nan)]
    norm_trace = []
    result = RunResult(metrics, state.x_global, state.ledger, norm_trace)

    for rnd in range(cfg.rounds):
        state, updates = run_round(state, cfg, train, part)
        norms = [(u.client, u.preclip_norm) for u in updates]
        norm_trace.append(norms)
        clip_c = mechanism.resolve_clip_threshold([n for _, n in norms], cfg.clip)
        metrics.append(_measure(state, cfg, full_train, test,
                                [n for _, n in norms], clip_c))
        if keep_round_vectors:
            mean_step_grad = np.zeros_like(state.x_global)
            for u in updates:
                mean_step_grad += u.grad_sum
            mean_step_grad /= (cfg.sample_size * cfg.local_steps)
            result.round_vectors.append((state.g_server.copy(), mean_step_grad))
        if progress is not None:
            progress(metrics[-1])

    result.x_final = state.x_global
    result.ledger = state.ledger
    return result


def _measure(state, cfg, full_train, test, preclip_norms, clip_c) -> RoundMetrics:
    loss, _ = models.loss_and_grad(cfg.model, state.x_global, full_train)
    acc = models.accuracy(cfg.model, state.x_global, test.features, test.labels)
    if preclip_norms:
        srt = sorted(preclip_norms)
        mean_n = sum(srt) / len(srt)
        median_n = srt[(len(srt) - 1) // 2]
    else:
        mean_n = median_n = math.nan
    return RoundMetrics(state.round, loss, acc, l2_norm(state.g_server),
                        mean_n, median_n, clip_c, state.ledger.epsilon())
