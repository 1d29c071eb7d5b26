"""Online tuning of the quality-diversity trade-off with a two-expert hedge.

One expert stands for pure diversity (lam = 0), one for pure quality
(lam = 1); the played trade-off is the posterior weight of the quality
expert. Losses are the score gradient and its negation, and the learning
rate is self-tuned from the accumulated mixability gap, which makes the
whole scheme invariant to rescaling the scores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidInputError, SkipRound
from .validation import check_positive_vector

LOG2 = math.log(2.0)


def score_gradient(log_vol_f, feedback):
    """d(score)/d(lam): ``-4 log vol + 4 sum(log y)``.

    A non-finite volume means the round carries no usable signal, which is
    reported as :class:`SkipRound` so callers leave the learner untouched.
    """
    log_vol_f = float(log_vol_f)
    if not np.isfinite(log_vol_f):
        raise SkipRound("round volume is singular; no gradient available")
    feedback = check_positive_vector(feedback, "feedback")
    return float(-4.0 * log_vol_f + 4.0 * np.sum(np.log(feedback)))


@dataclass(frozen=True)
class HedgeState:
    """Cumulative losses (diversity expert first), gap budget, posterior."""

    cum_loss: tuple = (0.0, 0.0)
    gap_budget: float = 0.0
    current_lambda: float = 0.5
    round: int = 0


def _posterior(cum_loss, gap_budget):
    losses = np.asarray(cum_loss, dtype=np.float64)
    if gap_budget <= 0.0:
        leaders = losses == losses.min()
        return leaders / leaders.sum()
    eta = LOG2 / gap_budget
    shifted = np.exp(-eta * (losses - losses.min()))
    return shifted / shifted.sum()


def hedge_update(state, gradient):
    """Feed one score gradient to the learner; returns the next state.

    The two expert losses are ``[gradient, -gradient]``: a positive gradient
    says quality was under-weighted, so the diversity expert pays.
    """
    gradient = float(gradient)
    if not np.isfinite(gradient):
        raise InvalidInputError("gradient must be finite; skip singular rounds instead")
    loss = np.array([gradient, -gradient])
    previous = np.asarray(state.cum_loss, dtype=np.float64)
    weights = _posterior(previous, state.gap_budget)
    hedge_loss = float(weights @ loss)
    if state.gap_budget <= 0.0:
        mix_loss = float((previous + loss).min() - previous.min())
    else:
        eta = LOG2 / state.gap_budget
        mix_loss = float(-math.log(weights @ np.exp(-eta * loss)) / eta)
    gap = max(0.0, hedge_loss - mix_loss)
    cum_loss = previous + loss
    budget = state.gap_budget + gap
    posterior = _posterior(cum_loss, budget)
    return HedgeState(
        cum_loss=(float(cum_loss[0]), float(cum_loss[1])),
        gap_budget=float(budget),
        current_lambda=float(posterior[1]),
        round=state.round + 1,
    )


@dataclass
class RegretLedger:
    """Per-round records needed to audit the learner after a trajectory.

    Stores ``(lam, gradient, score)`` per round plus the running maximum of
    ``8 * log(max_feedback^batch / volume)``, the scale constant entering the
    regret bound.
    """

    batch_size: int
    lambdas: list = field(default_factory=list)
    gradients: list = field(default_factory=list)
    scores: list = field(default_factory=list)
    delta: float = 0.0

    def record(self, lam, gradient, score, log_max_feedback, log_volume):
        if not all(np.isfinite([lam, gradient, score, log_max_feedback, log_volume])):
            raise InvalidInputError("ledger entries must be finite; skip the round instead")
        self.lambdas.append(float(lam))
        self.gradients.append(float(gradient))
        self.scores.append(float(score))
        scale = 8.0 * (self.batch_size * float(log_max_feedback) - float(log_volume))
        self.delta = max(self.delta, scale)

    @property
    def rounds(self):
        return len(self.scores)

    def endpoint_totals(self):
        """Total score the fixed trade-offs 0 and 1 would have earned.

        Both follow from the stored triples: the score is affine in lam with
        slope equal to the gradient.
        """
        lam = np.asarray(self.lambdas)
        grad = np.asarray(self.gradients)
        score = np.asarray(self.scores)
        at_zero = float(np.sum(score - lam * grad))
        at_one = float(np.sum(score + (1.0 - lam) * grad))
        return at_zero, at_one


@dataclass(frozen=True)
class OracleLambda:
    """Best fixed trade-off in hindsight, exact and on a 0.01 grid."""

    value: float
    grid_value: float

    def __float__(self):
        return self.value


def oracle_lambda(ledger, grid_step=0.01):
    """Hindsight-optimal fixed ``lam`` for a recorded trajectory.

    The total score is affine in ``lam``, so the exact maximiser is an
    endpoint decided by the summed gradients (0.5 on an exact tie). The grid
    argmax over the same records is reported alongside for table parity;
    grid ties resolve to the smallest grid point.
    """
    if ledger.rounds == 0:
        raise InvalidInputError("ledger is empty; nothing to optimise")
    total_gradient = float(np.sum(ledger.gradients))
    if total_gradient > 0.0:
        exact = 1.0
    elif total_gradient < 0.0:
        exact = 0.0
    else:
        exact = 0.5
    at_zero, at_one = ledger.endpoint_totals()
    grid = np.arange(0.0, 1.0 + grid_step / 2, grid_step)
    totals = at_zero + grid * (at_one - at_zero)
    grid_value = float(grid[int(np.argmax(totals))])
    return OracleLambda(value=exact, grid_value=grid_value)


def regret_and_bound(ledger, batch_size=None):
    """Measured regret against the best endpoint, and its theoretical cap.

    The cap is ``2 delta sqrt(T log 2) + 16 delta (2 + log(2)/3)`` with
    ``delta`` the ledger's running scale constant.
    """
    if ledger.rounds == 0:
        raise InvalidInputError("ledger is empty; nothing to bound")
    if batch_size is not None and batch_size != ledger.batch_size:
        raise InvalidInputError(
            f"ledger was kept for batch_size {ledger.batch_size}, got {batch_size}"
        )
    played = float(np.sum(ledger.scores))
    at_zero, at_one = ledger.endpoint_totals()
    regret = max(at_zero, at_one) - played
    rounds = ledger.rounds
    delta = ledger.delta
    bound = 2.0 * delta * math.sqrt(rounds * LOG2) + 16.0 * delta * (2.0 + LOG2 / 3.0)
    return regret, bound
