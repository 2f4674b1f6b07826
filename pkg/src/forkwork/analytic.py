"""No-forking probability and energy expectations, by quadrature.

Race math. Condition on the round winner (the miner with the smallest
compute time) having transmission latency t*. A single competitor fails to
overtake it with probability

    q(t*) = Pr(T >= t*) + E[ exp(-compute_rate * (t* - T)) ; T < t* ],

because the competitor's residual compute time past the winner's finish is
again exponential (memorylessness), so its head start never matters. The
competitors are independent and identically distributed, hence

    p_no_fork = E_T[ q(T)^(I - 1) ]

with the outer expectation over the winner's own transmission latency.

For the relocation mixture T = move_time * N + T_up everything reduces to
one reusable object: the exponentially tilted cumulative uplink integral
W(x) = integral_0^x exp(rate * u) f_up(u) du. W is approximated once per
configuration by a Chebyshev series and cross-checked against adaptive
quadrature; q is then closed-form arithmetic, and the outer expectation is
integrated per mixture shift with a vectorized adaptive Gauss-Legendre rule.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.chebyshev import Chebyshev

from .channel import DiscreteLatency, LatencyDistribution
from .model import (
    AnalyticResult,
    LatencyModel,
    SystemConfig,
    derive,
    ensure_valid,
)

__all__ = [
    "QuadratureSpec",
    "QuadratureError",
    "integrate_adaptive",
    "survival_prob",
    "no_forking_probability",
    "expected_min_compute_latency",
    "expected_mobility_latency",
    "expected_uplink_latency",
    "average_block_energy",
    "evaluate",
]


@dataclass(frozen=True)
class QuadratureSpec:
    """Adaptive-quadrature control: relative tolerance and subdivision budget."""

    rel_tol: float = 1e-8
    max_depth: int = 256


class QuadratureError(RuntimeError):
    """Integration failed to converge; carries the achieved value and estimate."""

    def __init__(self, message, *, value=float("nan"), error_estimate=float("inf")):
        super().__init__(f"{message} (value={value!r}, error_estimate={error_estimate!r})")
        self.value = value
        self.error_estimate = error_estimate


# --- adaptive quadrature ------------------------------------------------
#
# Global-greedy bisection with 20-point Gauss-Legendre panels. The error of
# an interval is |coarse - (left + right)|, which for smooth integrands
# vastly overestimates the error of the refined value; estimates stay
# conservative. The integrand must accept numpy arrays.

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)


def _one_panel(f, lo, hi):
    h, c = 0.5 * (hi - lo), 0.5 * (lo + hi)
    vals = np.asarray(f(c + h * _GL_NODES), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise QuadratureError("non-finite integrand value")
    return h * float(_GL_WEIGHTS @ vals)


def _two_panels(f, lo, mid, hi):
    h1, c1 = 0.5 * (mid - lo), 0.5 * (lo + mid)
    h2, c2 = 0.5 * (hi - mid), 0.5 * (mid + hi)
    pts = np.concatenate([c1 + h1 * _GL_NODES, c2 + h2 * _GL_NODES])
    vals = np.asarray(f(pts), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise QuadratureError("non-finite integrand value")
    return h1 * float(_GL_WEIGHTS @ vals[:20]), h2 * float(_GL_WEIGHTS @ vals[20:])


def integrate_adaptive(f, a, b, *, rel_tol=1e-8, abs_tol=0.0, max_intervals=256):
    """Integrate vectorized ``f`` over [a, b]; returns (value, error estimate).

    Stops once the total error estimate is below max(abs_tol, rel_tol*|value|).
    Raises :class:`QuadratureError` if the interval budget runs out first.
    """
    if not b > a:
        return 0.0, 0.0

    counter = 0

    def make(lo, hi, coarse):
        nonlocal counter
        mid = 0.5 * (lo + hi)
        left, right = _two_panels(f, lo, mid, hi)
        value = left + right
        counter += 1
        return (-abs(value - coarse), counter, lo, mid, hi, value, left, right)

    leaves = [make(a, b, _one_panel(f, a, b))]
    total = leaves[0][5]
    err_total = -leaves[0][0]

    while err_total > max(abs_tol, rel_tol * abs(total)):
        if len(leaves) >= max_intervals:
            raise QuadratureError(
                "interval budget exhausted", value=total, error_estimate=err_total
            )
        neg_err, _, lo, mid, hi, value, left, right = heapq.heappop(leaves)
        total -= value
        err_total += neg_err
        for node in (make(lo, mid, left), make(mid, hi, right)):
            heapq.heappush(leaves, node)
            total += node[5]
            err_total -= node[0]

    return total, err_total


# --- survival probability of one competitor ------------------------------


class _PiecewiseCheb:
    """Piecewise Chebyshev antiderivative of a vectorized smooth function.

    Panels are split in half until the trailing coefficients of a fixed-degree
    local fit drop below coef_tol relative to the global magnitude; panels
    where the function is flat accept immediately, so sharply localized
    integrands stay cheap. Calling the object evaluates the running integral
    from the left edge.
    """

    DEGREE = 32

    def __init__(self, f, a, b, coef_tol, max_panels=4096):
        scale = float(np.max(np.abs(np.asarray(f(np.linspace(a, b, 257)), dtype=float))))
        scale = max(scale, 1e-300)
        min_width = (b - a) * 2.0**-42

        panels = []  # (lo, hi, series), built left to right
        tail_bound = 0.0
        stack = [(a, b)]
        while stack:
            lo, hi = stack.pop()
            series = Chebyshev.interpolate(f, self.DEGREE, domain=[lo, hi])
            mags = np.abs(series.coef)
            scale = max(scale, float(mags.max()))
            tail = float(mags[-4:].max())
            if tail <= coef_tol * scale or (hi - lo) <= min_width:
                panels.append((lo, hi, series))
                tail_bound += tail * (hi - lo)
            else:
                if len(panels) + len(stack) >= max_panels:
                    raise QuadratureError("piecewise fit exceeded the panel budget")
                mid = 0.5 * (lo + hi)
                stack.append((mid, hi))
                stack.append((lo, mid))

        self.edges = np.array([p[0] for p in panels] + [b])
        self.prims = [series.integ(lbnd=lo) for lo, _, series in panels]
        offsets = [0.0]
        for (lo, hi, _), prim in zip(panels, self.prims):
            offsets.append(offsets[-1] + float(prim(hi)))
        self.offsets = np.array(offsets)
        self.total = float(self.offsets[-1])
        self.tail_bound = tail_bound

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        flat = np.atleast_1d(x).ravel()
        idx = np.clip(np.searchsorted(self.edges, flat, side="right") - 1, 0, len(self.prims) - 1)
        out = np.empty(flat.shape)
        for i in np.unique(idx):
            mask = idx == i
            out[mask] = self.offsets[i] + self.prims[i](flat[mask])
        return out.reshape(x.shape) if x.shape else float(out[0])


class _SurvivalEvaluator:
    """Evaluates q(t*) for a relocation-mixture latency distribution.

    Decomposition per relocation count n (x = t* - n * move_time):
      x <= 0            component has not arrived yet, survives surely;
      0 < x < max_up    exp(-rate x) W(x) + ccdf_up(x);
      x >= max_up       carry * exp(-rate x) with carry = E[exp(rate T_up)].
    Counts beyond the window sum in closed form (geometric), so q itself
    carries no mixture truncation error.
    """

    def __init__(self, dist: LatencyDistribution, rate: float, tol: float):
        self.dist = dist
        self.rate = float(rate)
        self.tol = float(tol)
        hi = dist.max_uplink
        lo = hi * 1e-12
        self._lo = lo

        def tilted_pdf(u):
            return np.exp(self.rate * np.asarray(u, dtype=float)) * dist.uplink_pdf(u)

        self._growth = _PiecewiseCheb(tilted_pdf, lo, hi, max(1e-3 * self.tol, 1e-15))
        self.carry = float(self._growth.total)

        # independent cross-check of the cumulative integral at three probes
        error = float(dist.uplink_cdf(lo))
        start = lo
        running = 0.0
        for probe in (0.5 * hi, 0.9 * hi, hi):
            piece, piece_err = integrate_adaptive(
                tilted_pdf,
                start,
                probe,
                rel_tol=1e-12,
                abs_tol=1e-13 * max(1.0, self.carry),
                max_intervals=2048,
            )
            running += piece
            error += abs(float(self._growth(probe)) - running) + piece_err
            start = probe
        self.error = error

    def _q_component(self, x):
        """Survival of one mixture component at shifted lag x (vectorized)."""
        x = np.asarray(x, dtype=float)
        out = np.ones(x.shape)
        hi = self.dist.max_uplink
        beyond = x >= hi
        mid = (x > 0.0) & ~beyond
        if np.any(mid):
            xm = x[mid]
            w = np.maximum(self._growth(np.clip(xm, self._lo, hi)), 0.0)
            out[mid] = np.exp(-self.rate * xm) * w + self.dist.uplink_ccdf(xm)
        if np.any(beyond):
            out[beyond] = self.carry * np.exp(-self.rate * x[beyond])
        return out

    def _passed_sum(self, t, n_cut: int):
        """Closed-form sum of components 0..n_cut-1, all in the x >= max_up regime."""
        if n_cut <= 0:
            return 0.0
        d = self.dist
        p, tm, r = d.success_prob, d.move_time, self.rate
        ratio_log = math.log1p(-p) + r * tm
        base = math.log(p) - r * np.asarray(t, dtype=float)
        with np.errstate(over="ignore"):
            if abs(ratio_log) < 1e-13:
                s = np.exp(base) * n_cut
            elif ratio_log > 690.0:
                s = np.exp(base + (n_cut - 1) * ratio_log)  # last term dominates
            else:
                s = (np.exp(base + n_cut * ratio_log) - np.exp(base)) / math.expm1(ratio_log)
        return self.carry * s

    def survival(self, t_star):
        """q(t*), scalar in, scalar out; array in, array out."""
        t = np.atleast_1d(np.asarray(t_star, dtype=float))
        d = self.dist
        if d.variant is LatencyModel.WIRELESS_ONLY or d.success_prob >= 1.0:
            out = self._q_component(t)
        else:
            p, tm, hi = d.success_prob, d.move_time, d.max_uplink
            t_max, t_min = float(t.max()), float(t.min())
            if t_max <= 0.0:
                out = np.ones(t.shape)
            else:
                # counts >= n_wait have not arrived for any element; counts
                # < n_cut are past the uplink window for every element
                n_wait = max(0, math.ceil(t_max / tm))
                n_cut = max(0, math.floor((t_min - hi) / tm) + 1) if t_min > hi else 0
                n_cut = min(n_cut, n_wait)
                out = np.full(t.shape, (1.0 - p) ** n_wait)
                counts = np.arange(n_cut, n_wait)
                if counts.size:
                    lags = t[None, :] - counts[:, None] * tm
                    q_parts = self._q_component(lags.ravel()).reshape(lags.shape)
                    out += (p * (1.0 - p) ** counts) @ q_parts
                out += self._passed_sum(t, n_cut)
        out = np.minimum(out, 1.0)
        return out if np.ndim(t_star) else float(out[0])


@lru_cache(maxsize=32)
def _evaluator(dist: LatencyDistribution, rate: float, tol: float) -> _SurvivalEvaluator:
    return _SurvivalEvaluator(dist, rate, tol)


def _discrete_survival(t_star, dist: DiscreteLatency, rate: float):
    atoms = np.asarray(dist.atoms)
    weights = np.asarray(dist.weights)
    lag = np.maximum(0.0, np.atleast_1d(np.asarray(t_star, dtype=float))[:, None] - atoms)
    out = np.exp(-rate * lag) @ weights
    return out if np.ndim(t_star) else float(out[0])


def survival_prob(t_star, dist, compute_rate: float | None = None, *, tol: float = 1e-9):
    """Probability that one competitor fails to overtake a winner whose
    transmission latency is ``t_star``.

    Accepts either a :class:`LatencyDistribution` (compute rate taken from it
    unless given) or a :class:`DiscreteLatency` (compute rate required).
    """
    if isinstance(dist, DiscreteLatency):
        if compute_rate is None:
            raise ValueError("compute_rate is required with a DiscreteLatency")
        return _discrete_survival(t_star, dist, compute_rate)
    rate = dist.compute_rate if compute_rate is None else compute_rate
    return _evaluator(dist, float(rate), float(tol)).survival(t_star)


# --- no-forking probability ----------------------------------------------


def _pn_attempt(dist, num_miners, rate, tol, eps_comp, inner_tol, max_depth):
    ev = _evaluator(dist, rate, inner_tol)
    weights = dist.mixture_weights()
    lo = dist.max_uplink * 1e-12
    hi = dist.max_uplink
    power = num_miners - 1
    shift_step = dist.move_time if dist.variant is LatencyModel.TOTAL else 0.0

    total = 0.0
    quad_err = 0.0
    skipped = 0.0
    skip_floor = 1e-3 * eps_comp / max(1, len(weights))
    for m, w in enumerate(weights):
        if w <= skip_floor:
            skipped += w
            continue
        shift = m * shift_step

        def integrand(u, _shift=shift):
            return dist.uplink_pdf(u) * ev.survival(u + _shift) ** power

        value, err = integrate_adaptive(
            integrand, lo, hi, rel_tol=0.1 * tol, abs_tol=eps_comp, max_intervals=max_depth
        )
        total += w * value
        quad_err += w * err

    tail = max(0.0, 1.0 - float(weights.sum())) + skipped
    err_est = quad_err + tail + power * ev.error + float(dist.uplink_cdf(lo))
    return total, err_est


def no_forking_probability(
    config: SystemConfig, *, dist=None, spec: QuadratureSpec | None = None
) -> tuple[float, float]:
    """Probability that a single PoW round commits without forking.

    Returns (value, absolute error estimate). The estimate satisfies
    ``error <= quadrature_tol * value``; if that cannot be reached even after
    a refinement pass, :class:`QuadratureError` is raised with the achieved
    numbers. A ``dist`` override substitutes the transmission-latency law
    (e.g. a :class:`DiscreteLatency`, evaluated in closed form).
    """
    ensure_valid(config)
    num = config.num_miners
    if num == 1:
        return 1.0, 0.0
    if dist is None:
        dist = LatencyDistribution.from_config(config)
    rate = getattr(dist, "compute_rate", None)
    if rate is None:
        rate = derive(config.channel, config.miner).compute_rate

    if isinstance(dist, DiscreteLatency):
        atoms = np.asarray(dist.atoms)
        weights = np.asarray(dist.weights)
        q = _discrete_survival(atoms, dist, rate)
        return float(weights @ q ** (num - 1)), 0.0

    tol = spec.rel_tol if spec is not None else config.quadrature_tol
    depth = spec.max_depth if spec is not None else 256

    inner = max(1e-13, 1e-3 * tol)
    value, err = _pn_attempt(dist, num, rate, tol, 0.1 * tol, inner, depth)
    if err <= tol * value:
        return value, err
    # refine against the measured magnitude (matters when p_n is small)
    scale = max(value, 1e-300)
    inner2 = max(1e-14, 1e-3 * tol * scale)
    value, err = _pn_attempt(dist, num, rate, tol, 0.1 * tol * scale, inner2, depth)
    if err <= tol * value:
        return value, err
    raise QuadratureError(
        "no-forking probability did not reach the requested tolerance",
        value=value,
        error_estimate=err,
    )


# --- expectations ----------------------------------------------------------


def expected_min_compute_latency(config: SystemConfig) -> float:
    """Mean compute time of the fastest of I miners: 1 / (compute_rate * I)."""
    ensure_valid(config)
    d = derive(config.channel, config.miner)
    return 1.0 / (d.compute_rate * config.num_miners)


def expected_mobility_latency(config: SystemConfig) -> float:
    """Mean relocation latency move_time * (exp(snr_rate * threshold) - 1).

    Reports infinity explicitly once the exponent passes 700 (the relocation
    count is astronomically large for such thresholds).
    """
    ensure_valid(config)
    d = derive(config.channel, config.miner)
    exponent = d.snr_rate * config.channel.snr_threshold
    if exponent > 700.0:
        return math.inf
    return d.move_time_s * math.expm1(exponent)


def expected_uplink_latency(
    config: SystemConfig, *, spec: QuadratureSpec | None = None
) -> tuple[float, float]:
    """Mean uplink latency, integrating the CCDF over its support.

    Returns (value, absolute error estimate); value lies in (0, max_uplink).
    """
    ensure_valid(config)
    dist = LatencyDistribution.from_config(config)
    tol = spec.rel_tol if spec is not None else config.quadrature_tol
    depth = spec.max_depth if spec is not None else 256
    return integrate_adaptive(
        dist.uplink_ccdf, 0.0, dist.max_uplink, rel_tol=tol, max_intervals=depth
    )


def evaluate(config: SystemConfig, *, dist=None) -> AnalyticResult:
    """All analytic outputs for one configuration.

    The per-round winner energy is compute_power * E[min compute] +
    tx_power * E[uplink] + mobility_power * E[relocation]; rounds per block
    are geometric with mean 1/p_no_fork, so the block energy is their ratio.
    Raises :class:`QuadratureError` when p_no_fork is below 1e-9 (the block
    energy would be unreliable).
    """
    ensure_valid(config)
    p_nofork, p_err = no_forking_probability(config, dist=dist)
    if p_nofork < 1e-9:
        raise QuadratureError(
            "no-forking probability below 1e-9; block energy unreliable",
            value=p_nofork,
            error_estimate=p_err,
        )
    exp_min = expected_min_compute_latency(config)
    exp_mob = expected_mobility_latency(config)
    exp_up, _ = expected_uplink_latency(config)
    round_energy = (
        config.miner.compute_power_w * exp_min
        + config.channel.tx_power_w * exp_up
        + config.miner.mobility_power_w * exp_mob
    )
    return AnalyticResult(
        no_fork_prob=p_nofork,
        exp_min_compute=exp_min,
        exp_mobility=exp_mob,
        exp_uplink=exp_up,
        avg_block_energy=round_energy / p_nofork,
        quadrature_error=p_err,
    )


def average_block_energy(config: SystemConfig) -> float:
    """Mean winner energy spent until a block commits without forking, J."""
    return evaluate(config).avg_block_energy
