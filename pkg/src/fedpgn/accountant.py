"""Renyi-DP accounting for the subsampled Gaussian mechanism.

Per-round Renyi divergence is evaluated by deterministic composite
Gauss-Legendre quadrature, entirely in log space, then composed
additively over rounds and converted to an (epsilon, delta) guarantee
minimized over a fixed grid of orders.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConfigError

# Orders start at the classic fractional values, continue in half steps
# through 64, then jump to the high tail.  Integers 2..64 are included.
ALPHA_GRID = tuple([1.25, 1.5, 1.75]
                   + [2.0 + 0.5 * i for i in range(125)]
                   + [128.0, 256.0])

# Quadrature layout: the integrand is a binomial mixture of Gaussians
# with centers spanning [0, max(1, alpha)], each of width sigma.  The
# window pads both ends by _TAIL_WIDTHS standard deviations and keeps a
# fixed node density equivalent to _BASE_PANELS panels over the
# two-center window.
_TAIL_WIDTHS = 20.0
_BASE_PANELS = 2000
_NODES_PER_PANEL = 8

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(_NODES_PER_PANEL)


def _log_mixture_ratio(z: np.ndarray, q: float, sigma: float,
                       mixture_reading: bool) -> np.ndarray:
    """log((1-q) + q * mu1(z)/mu0(z)) without leaving log space.

    mu0 is the N(0, sigma^2) density.  The standard reading takes mu1 as
    N(1, sigma^2); the alternative treats mu1 as the two-component
    mixture q N(1, sigma^2) + (1-q) N(0, sigma^2) before forming the
    same ratio, which double-counts the mixing.
    """
    log_ratio = (2.0 * z - 1.0) / (2.0 * sigma * sigma)
    if mixture_reading:
        # (1-q) + q*((1-q) + q*r) collapses to (1-q^2) + q^2 * r
        if q >= 1.0:
            return log_ratio
        return np.logaddexp(math.log1p(-q * q), 2.0 * math.log(q) + log_ratio)
    if q >= 1.0:
        return log_ratio
    return np.logaddexp(math.log1p(-q), math.log(q) + log_ratio)


@lru_cache(maxsize=4096)
def rdp_per_round(q: float, sigma: float, alpha: float,
                  mixture_reading: bool = False) -> float:
    """Renyi divergence of order alpha for one subsampled Gaussian round.

    Evaluates (1/(alpha-1)) * ln E_{z~N(0,sigma^2)}[((1-q) + q*r(z))^alpha]
    with r the N(1,sigma^2)/N(0,sigma^2) density ratio.  Returns inf for
    sigma = 0 (no noise means an unbounded budget) and 0 for q = 0.
    """
    if not 0.0 <= q <= 1.0:
        raise ConfigError("sampling ratio q must lie in [0, 1]")
    if alpha <= 1.0:
        raise ConfigError("Renyi order must exceed 1")
    if sigma < 0:
        raise ConfigError("sigma must be >= 0")
    if sigma == 0.0:
        return math.inf
    if q == 0.0:
        return 0.0

    lo = -1.0 - _TAIL_WIDTHS * sigma
    hi = max(1.0, alpha) + _TAIL_WIDTHS * sigma
    base_span = 2.0 + 2.0 * _TAIL_WIDTHS * sigma
    panels = max(_BASE_PANELS, int(math.ceil(_BASE_PANELS * (hi - lo) / base_span)))

    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    z = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    log_w = np.log((half[:, None] * _GL_WEIGHTS[None, :]).ravel())

    log_mu0 = -z * z / (2.0 * sigma * sigma) - math.log(sigma) - 0.5 * math.log(2.0 * math.pi)
    log_f = log_mu0 + alpha * _log_mixture_ratio(z, q, sigma, mixture_reading)

    terms = log_f + log_w
    m = float(terms.max())
    log_expectation = m + math.log(float(np.exp(terms - m).sum()))
    return max(log_expectation, 0.0) / (alpha - 1.0)


@dataclass(frozen=True)
class AccountResult:
    epsilon: float
    alpha_star: float
    epsilon_bar: float


def compose_and_convert(q: float, sigma: float, delta: float, rounds: int,
                        grid=ALPHA_GRID, mixture_reading: bool = False) -> AccountResult:
    """Total (epsilon, delta) after ``rounds`` compositions.

    For each order the accumulated divergence rounds * rdp(alpha) is
    converted via

        eps = eps_bar + ((alpha-1) ln(1 - 1/alpha) - ln alpha - ln delta)
                        / (alpha - 1)

    and the minimum over the grid is returned along with its minimizer.
    """
    if rounds < 0:
        raise ConfigError("rounds must be >= 0")
    if not 0.0 < delta < 1.0:
        raise ConfigError("delta must lie in (0, 1)")
    if not grid:
        raise ConfigError("order grid is empty")
    best = None
    for alpha in grid:
        if rounds == 0:
            eps_bar = 0.0
        else:
            per_round = rdp_per_round(q, sigma, alpha, mixture_reading)
            if math.isinf(per_round):
                continue
            eps_bar = rounds * per_round
        conv = ((alpha - 1.0) * math.log1p(-1.0 / alpha)
                - math.log(alpha) - math.log(delta)) / (alpha - 1.0)
        eps = eps_bar + conv
        if best is None or eps < best.epsilon:
            best = AccountResult(eps, alpha, eps_bar)
    if best is None:
        return AccountResult(math.inf, math.nan, math.inf)
    return best


def calibrate_sigma(target_eps: float, q: float, rounds: int, delta: float,
                    lo: float = 1e-2, hi: float = 1e3,
                    rel_tol: float = 0.005) -> float:
    """Smallest noise multiplier meeting ``target_eps`` by bisection.

    The budget is strictly decreasing in sigma, which the bracket check
    asserts before searching; an unreachable target raises.
    """
    if target_eps <= 0:
        raise ConfigError("target epsilon must be > 0")
    eps_lo = compose_and_convert(q, lo, delta, rounds).epsilon
    eps_hi = compose_and_convert(q, hi, delta, rounds).epsilon
    if not eps_lo > eps_hi:
        raise ConfigError("budget is not decreasing across the sigma bracket")
    if not eps_hi <= target_eps <= eps_lo:
        raise ConfigError(
            f"target eps {target_eps} unreachable within sigma in [{lo}, {hi}]")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        eps_mid = compose_and_convert(q, mid, delta, rounds).epsilon
        if abs(eps_mid - target_eps) <= rel_tol * target_eps:
            return mid
        if eps_mid > target_eps:
            lo = mid
        else:
            hi = mid
    raise ConfigError("sigma calibration did not converge")


@dataclass
class PrivacyLedger:
    """Running privacy account for one training run."""

    sigma: float
    q: float
    delta: float
    rounds_consumed: int = 0
    caveats: list = field(default_factory=list)

    def __post_init__(self):
        if not 0.0 < self.q <= 1.0:
            raise ConfigError("ledger q must lie in (0, 1]")
        # Fixed-size sampling without replacement is accounted as if it
        # were Poisson sampling with rate q = S/N.
        note = "fixed-size client sampling accounted as Poisson with q=S/N"
        if note not in self.caveats:
            self.caveats.append(note)

    def consume(self, rounds: int = 1) -> None:
        self.rounds_consumed += rounds

    def account(self) -> AccountResult:
        return compose_and_convert(self.q, self.sigma, self.delta,
                                   self.rounds_consumed)

    def epsilon(self) -> float:
        return self.account().epsilon

    def snapshot(self) -> dict:
        result = self.account()
        eps = "unbounded" if math.isinf(result.epsilon) else result.epsilon
        return {
            "sigma": self.sigma,
            "q": self.q,
            "delta": self.delta,
            "rounds_consumed": self.rounds_consumed,
            "epsilon": eps,
            "alpha_star": None if math.isnan(result.alpha_star) else result.alpha_star,
            "epsilon_bar": "unbounded" if math.isinf(result.epsilon_bar) else result.epsilon_bar,
            "caveats": list(self.caveats),
        }
