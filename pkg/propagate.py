"""
Gaussian error propagation for composed quantities.

Generic Taylor-moment machinery, plus the closed forms for the MSE
(condensed variable Z = mean of squared deviations) and RMSE = sqrt(Z).
"""

import logging
import math
from typing import Tuple

import numpy as np
from scipy.special import factorial2

from models import (
    DerivativeEvaluations,
    EvaluationSet,
    MetricDistribution,
    MomentVector,
    ValidationError,
)

logger = logging.getLogger(__name__)


def normal_central_moments(sigma: float, order: int, mu: float = 0.0) -> MomentVector:
    """m_1..m_order of N(mu, sigma): odd orders vanish, m_k = (k-1)!! sigma^k otherwise."""
    if sigma < 0:
        raise ValidationError(f"sigma must be >= 0, got {sigma}")
    moments = []
    for k in range(1, order + 1):
        if k % 2:
            moments.append(0.0)
        else:
            moments.append(float(factorial2(k - 1, exact=True)) * sigma ** k)
    return MomentVector(mu=mu, central_moments=tuple(moments))


def taylor_expectation(d: DerivativeEvaluations, m: MomentVector, order: int) -> float:
    """E[g(X)] ~ sum_{k=0..K} g^(k)(mu) / k! * m_k, with m_0 = 1 and m_1 = 0."""
    if order < 0:
        raise ValidationError(f"order must be >= 0, got {order}")
    if order > d.order:
        raise ValidationError(f"order {order} needs derivatives up to g^({order}), have g^({d.order})")
    if order > m.order and order > 1:
        raise ValidationError(f"order {order} needs central moments up to m_{order}, have m_{m.order}")
    total = 0.0
    for k in range(order + 1):
        mk = 0.0 if k == 1 else m.moment(k)
        total += d.values[k] / math.factorial(k) * mk
    return total


def taylor_variance(d: DerivativeEvaluations, m: MomentVector, order: int) -> float:
    """
    V[g(X)] ~ sum_{k=1..K} (g^(k)(mu) / k!)^2 * (m_2k - m_k^2).
    Term-wise form: covariances between different powers are dropped.
    """
    if order < 1:
        raise ValidationError(f"order must be >= 1, got {order}")
    if order > d.order:
        raise ValidationError(f"order {order} needs derivatives up to g^({order}), have g^({d.order})")
    if 2 * order > m.order:
        raise ValidationError(f"order {order} needs central moments up to m_{2 * order}, have m_{m.order}")
    total = 0.0
    for k in range(1, order + 1):
        coefficient = d.values[k] / math.factorial(k)
        mk = 0.0 if k == 1 else m.moment(k)
        total += coefficient * coefficient * (m.moment(2 * k) - mk * mk)
    return total


def squared_error_moments(delta: float, sigma: float) -> Tuple[float, float]:
    """
    E[Y], V[Y] for Y = (X - pi)^2 with X - pi ~ N(delta, sigma), via the
    order-2 expansion of g(x) = x^2 at delta, exact for a quadratic.
    """
    derivatives = DerivativeEvaluations((delta * delta, 2.0 * delta, 2.0))
    moments = normal_central_moments(sigma, 4, mu=delta)
    return taylor_expectation(derivatives, moments, 2), taylor_variance(derivatives, moments, 2)


def mse_moments(deltas, sigmas) -> MetricDistribution:
    """
    mean = (1/N) sum(sigma^2 + delta^2)
    variance = (2/N^2) sum(sigma^4 + 2 sigma^2 delta^2)
    """
    deltas = np.asarray(deltas, dtype=float)
    sigmas = np.asarray(sigmas, dtype=float)
    n = deltas.size
    if n == 0 or sigmas.shape != deltas.shape:
        raise ValidationError(f"need equally long, non-empty deltas and sigmas ({deltas.size}, {sigmas.size})")
    sigma_sq = sigmas * sigmas
    delta_sq = deltas * deltas
    mean = float(np.sum(sigma_sq + delta_sq)) / n
    variance = 2.0 * float(np.sum(sigma_sq * sigma_sq + 2.0 * sigma_sq * delta_sq)) / (n * n)
    return MetricDistribution(mean=mean, variance=variance)


def rmse_from_mse(z: MetricDistribution) -> MetricDistribution:
    """
    First-order propagation through the square root:
    mean = sqrt(E[Z]), variance = V[Z] / (4 E[Z]); E[Z] = 0 is a point mass at 0.
    """
    if z.mean == 0.0:
        logger.debug("E[Z] = 0, RMSE is a point mass at 0")
        return MetricDistribution(mean=0.0, variance=0.0)
    return MetricDistribution(mean=math.sqrt(z.mean), variance=z.variance / (4.0 * z.mean))


def mse_distribution(eval_set: EvaluationSet) -> MetricDistribution:
    return mse_moments(eval_set.deltas, eval_set.sigmas)


def rmse_distribution(eval_set: EvaluationSet) -> MetricDistribution:
    """RMSE = sqrt(Z); a perfect deterministic predictor is a point mass at 0."""
    return rmse_from_mse(mse_distribution(eval_set))


def metric_distribution(eval_set: EvaluationSet, metric: str) -> MetricDistribution:
    """Analytic distribution for the metrics that have a closed form."""
    if metric == "mse":
        return mse_distribution(eval_set)
    if metric == "rmse":
        return rmse_distribution(eval_set)
    raise ValidationError(f"no analytic distribution for metric {metric!r}; use the Monte-Carlo path")
