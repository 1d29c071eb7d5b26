"""Offline replay of recommendation trajectories and benchmark aggregation.

A trajectory replays one user's ground-truth consumption sequence: round
``r`` sees exactly the first ``r`` consumed items as history, the method
picks a batch, feedback is observed through the configured noise channel,
and metrics are recorded. ``run_benchmark`` runs the cartesian product of
configurations, users, and seeds, aggregates, and renders CSV plus an
aligned text table.

Per-round wall-clock covers likelihood assembly plus selection only; the
one-time feature-map fit and dataset loading are deliberately outside the
timed span so per-batch costs stay comparable across methods.
"""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np
from threadpoolctl import threadpool_limits

from .adaptive import (
    HedgeState,
    OracleLambda,
    RegretLedger,
    hedge_update,
    oracle_lambda,
    score_gradient,
)
from .baselines import RerankConfig, mmr_select, xquad_select
from .data import generate_synthetic, load_items, load_scores
from .exceptions import ConfigError, RankDeficientError, SkipRound
from .feedback import (
    NOISE_KINDS,
    NoiseChannel,
    SyntheticLinearModel,
    observe,
)
from .features import fit_nystroem
from .inference import (
    Selection,
    _quality_order,
    diversity_log_volume,
    greedy_map,
    sample_kdpp,
    set_score,
)
from .likelihood import METHODS, LFactor, LikelihoodSpec, build_l_factor
from .metrics import (
    TrajectorySummary,
    aggregate,
    effective_diversity,
    round_metrics,
)
from .neighbors import build_index

logger = logging.getLogger(__name__)

REPLAY_METHODS = METHODS + ("mmr", "xquad")
STRATEGIES = ("maximization", "sampling")
HISTORY_POLICIES = ("taste_adjacent", "top_quality")

#: Methods whose likelihood accepts an ``alpha`` knob.
_ALPHA_METHODS = ("b_divrec", "xquad")


@dataclass(frozen=True)
class RunConfig:
    """Everything one benchmark cell needs, validated up front.

    Optional knobs (``alpha``, ``epsilon``) stay ``None`` unless the method
    actually consumes them; setting one on the wrong method is rejected
    rather than silently ignored.
    """

    method: str = "b_divrec"
    strategy: str = "maximization"
    lam: float = 0.5
    alpha: float = None
    epsilon: float = None
    batch_size: int = 3
    threshold: float = 0.5
    n_seeds: int = 10
    adaptive: bool = False
    noise: str = "none"
    rank: int = 100
    n_landmarks: int = None
    kernel: str = "linear"
    bandwidth: float = 1.0
    history_policy: str = "taste_adjacent"
    single_thread: bool = False
    users: tuple = None
    # dataset source: synthetic unless items_path is given
    n_items: int = 750
    dim: int = 20
    n_groups: int = 3
    n_users: int = 6
    data_seed: int = 1
    items_path: str = None
    items_format: str = "csv"
    scores_path: str = None

    def __post_init__(self):
        if self.method not in REPLAY_METHODS:
            raise ConfigError(
                f"unknown method {self.method!r}; pick one of {REPLAY_METHODS}"
            )
        if self.strategy not in STRATEGIES:
            raise ConfigError(
                f"unknown strategy {self.strategy!r}; pick one of {STRATEGIES}"
            )
        if self.history_policy not in HISTORY_POLICIES:
            raise ConfigError(
                f"unknown history policy {self.history_policy!r}; "
                f"pick one of {HISTORY_POLICIES}"
            )
        if self.noise not in NOISE_KINDS:
            raise ConfigError(
                f"unknown noise channel {self.noise!r}; pick one of {NOISE_KINDS}"
            )
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"lam must be within [0, 1], got {self.lam}")
        if self.alpha is not None and self.method not in _ALPHA_METHODS:
            raise ConfigError(
                f"alpha is not a parameter of {self.method}; it applies to "
                f"{_ALPHA_METHODS} only"
            )
        if self.epsilon is not None and self.method != "eps_greedy":
            raise ConfigError("epsilon only applies to eps_greedy")
        if self.method in ("mmr", "xquad"):
            if self.strategy == "sampling":
                raise ConfigError(f"{self.method} has no sampling strategy")
            if self.adaptive:
                raise ConfigError(
                    f"{self.method} produces no volume score; adaptive tuning "
                    "needs a DPP method"
                )
        if self.batch_size < 1:
            raise ConfigError("batch_size must be at least 1")
        if self.n_seeds < 1:
            raise ConfigError("n_seeds must be at least 1")

    @property
    def resolved_alpha(self):
        return 0.0 if self.alpha is None else float(self.alpha)

    @property
    def resolved_epsilon(self):
        return 0.9 if self.epsilon is None else float(self.epsilon)

    @property
    def label(self):
        parts = [self.method, self.strategy]
        if self.adaptive:
            parts.append("adaptive")
        return "/".join(parts)


@dataclass(frozen=True)
class RoundRecord:
    round_index: int
    history: tuple
    batch: tuple
    feedback: tuple
    lam: float
    metrics: object
    rank_deficient: bool = False
    skipped_update: bool = False


@dataclass
class TrajectoryRecord:
    user_id: int
    seed: int
    rounds: list
    summary: TrajectorySummary
    ledger: RegretLedger = None
    oracle: OracleLambda = None


@dataclass
class ReplayDataset:
    """A prepared dataset: store, feedback model, fitted features, index."""

    store: object
    model: object
    feat: object
    index: object
    _quality: dict = field(default_factory=dict)

    @property
    def n_users(self):
        return self.model.n_users

    def quality(self, user_id):
        if user_id not in self._quality:
            self._quality[user_id] = self.model.expected_vector(user_id)
        return self._quality[user_id]


def prepare_dataset(cfg):
    """Generate or load the items, fit features once, wrap the feedback model."""
    if cfg.items_path is not None:
        store = load_items(cfg.items_path, fmt=cfg.items_format)
        if cfg.scores_path is None:
            raise ConfigError("file-backed items need a scores file for feedback")
        model = load_scores(cfg.scores_path, n_items=store.n_items)
    else:
        store, contexts = generate_synthetic(
            cfg.n_items, cfg.dim, cfg.n_groups, cfg.n_users, seed=cfg.data_seed
        )
        model = SyntheticLinearModel(store=store, contexts=contexts)
    feat = fit_nystroem(store, rank=cfg.rank, seed=cfg.data_seed,
                        kernel=cfg.kernel, bandwidth=cfg.bandwidth,
                        n_landmarks=cfg.n_landmarks)
    index = build_index(feat)
    return ReplayDataset(store=store, model=model, feat=feat, index=index)


# -- ground-truth histories ------------------------------------------------------


def _interleaved(items):
    """Reorder the first six entries as 0,3,1,4,2,5 so consumption hops
    between taste clusters instead of marching down the preference list."""
    items = list(items)
    if len(items) < 4:
        return items
    head = items[:6]
    pattern = [0, 3, 1, 4, 2, 5]
    ordered = [head[i] for i in pattern if i < len(head)]
    return ordered + items[6:]


def sample_history(dataset, user_id, seed, policy="taste_adjacent",
                   m_low=5, m_high=15, near_twin=0.9):
    """Draw one user's ground-truth consumption sequence.

    ``top_quality`` takes the M highest-expected-feedback items in
    preference order. ``taste_adjacent`` instead walks the user's taste
    peaks — the items a quality-diversity engine itself would surface,
    i.e. the greedy quality-volume sequence — and records, for each peak,
    its nearest catalog neighbor: the user consumed something close to
    each favorite, while the favorites themselves are still on the shelf.
    Peaks are visited in an interleaved order and M is uniform on
    [m_low, m_high].
    """
    rng = np.random.default_rng((int(seed), int(user_id), 7))
    m = int(rng.integers(m_low, m_high + 1))
    quality = dataset.quality(user_id)
    m = int(min(m, quality.shape[0]))
    if policy == "top_quality":
        order = np.lexsort((np.arange(quality.shape[0]), -quality))
        return [int(i) for i in order[:m]]

    spec = LikelihoodSpec(method="qd_decomp", quality=quality, lam=0.5)
    peaks = greedy_map(build_l_factor(spec, dataset.feat), m)
    vectors = dataset.index.vectors
    chosen = []
    for peak in peaks:
        peak = int(peak)
        rest = np.delete(np.arange(vectors.shape[0]), chosen + [peak])
        neighbor, best_cos = dataset.index.max_cosine_in(peak, rest)
        if neighbor is not None and best_cos >= near_twin:
            chosen.append(int(neighbor))
        else:
            chosen.append(peak)
    return _interleaved(chosen)


# -- one trajectory ---------------------------------------------------------------


def _candidate_view(factor, exclude):
    """Restrict a likelihood factor to the not-yet-consumed items.

    Replayed rounds never re-offer something the user already consumed, so
    the prefix ids are dropped from the candidate pool before selection and
    the picked row positions are mapped back to catalog ids afterwards.
    """
    if not len(exclude):
        return factor, None
    keep = np.setdiff1d(np.arange(factor.n_items),
                        np.asarray(exclude, dtype=np.int64))
    sub = LFactor(rows=factor.rows[keep],
                  diversity_rows=factor.diversity_rows[keep],
                  quality=factor.quality[keep],
                  lam=factor.lam,
                  active_ids=keep)
    return sub, keep


def _select_batch(cfg, factor, seed, user_id, round_index, exclude=()):
    candidate, keep = _candidate_view(factor, exclude)
    if cfg.strategy == "maximization":
        picked = greedy_map(candidate, cfg.batch_size)
        ids = np.asarray(picked.ids, dtype=np.int64)
        rank_deficient = picked.rank_deficient
    else:
        rank_deficient = False
        try:
            ids = sample_kdpp(candidate, cfg.batch_size,
                              seed=(int(seed), int(user_id), int(round_index), 1))
        except RankDeficientError as err:
            rank = err.rank or 0
            if rank > 0:
                ids = sample_kdpp(candidate, rank,
                                  seed=(int(seed), int(user_id),
                                        int(round_index), 1))
            else:
                ids = np.empty(0, dtype=np.int64)
            pad = _quality_order(candidate.quality, ids)
            ids = np.sort(np.concatenate(
                [ids, pad[: cfg.batch_size - ids.size]]
            ).astype(np.int64))
            rank_deficient = True
    if keep is not None:
        ids = keep[ids]
    return Selection(ids, rank_deficient=rank_deficient)


def _coin_seed(seed, user_id):
    """Fold (seed, user) into the single integer the likelihood coin expects."""
    return int(np.random.default_rng((int(seed), int(user_id), 11)).integers(2**62))


def run_trajectory(cfg, user_id, seed, dataset, gt_history=None):
    """Replay one user's ground-truth sequence under one configuration."""
    if gt_history is None:
        gt_history = sample_history(dataset, user_id, seed,
                                    policy=cfg.history_policy)
    gt_history = [int(i) for i in gt_history]
    quality = dataset.quality(user_id)
    channel = NoiseChannel(kind=cfg.noise, seed=int(seed))
    coin_seed = _coin_seed(seed, user_id)

    adaptive = cfg.adaptive
    state = HedgeState() if adaptive else None
    ledger = RegretLedger(batch_size=cfg.batch_size) if adaptive else None
    lam = 0.5 if adaptive else cfg.lam

    records = []
    batches = []
    previous_batch = ()
    for round_index in range(len(gt_history) + 1):
        history = tuple(gt_history[:round_index])
        rank_deficient = False
        factor = None
        started = time.perf_counter()
        if cfg.method in METHODS:
            spec = LikelihoodSpec(
                method=cfg.method,
                quality=quality,
                lam=lam,
                history=history,
                alpha=cfg.resolved_alpha if cfg.method == "b_divrec" else 0.0,
                epsilon=cfg.resolved_epsilon,
                previous_batch=previous_batch,
            )
            factor = build_l_factor(
                spec, dataset.feat,
                index=dataset.index if cfg.method == "b_divrec" else None,
                round_index=round_index, rng_seed=coin_seed,
            )
            selection = _select_batch(cfg, factor, seed, user_id, round_index,
                                      exclude=history)
            rank_deficient = selection.rank_deficient
            batch = np.asarray(selection.ids, dtype=np.int64)
        else:
            rerank = RerankConfig(lam=cfg.lam, alpha=cfg.resolved_alpha,
                                  batch_size=cfg.batch_size)
            if cfg.method == "mmr":
                batch = mmr_select(rerank, quality, dataset.feat,
                                   history=history, exclude=history)
            else:
                batch = xquad_select(rerank, quality, dataset.feat,
                                     dataset.index, history=history,
                                     exclude=history)
        elapsed = time.perf_counter() - started

        feedback = np.array([
            observe(channel, float(quality[item]), round_index, slot)
            for slot, item in enumerate(batch)
        ])
        metrics = round_metrics(batch, quality, dataset.feat, history=history,
                                threshold=cfg.threshold,
                                runtime_seconds=elapsed)

        skipped = False
        if adaptive:
            if rank_deficient:
                skipped = True
            else:
                try:
                    log_vol = diversity_log_volume(factor, batch)
                    gradient = score_gradient(log_vol, feedback)
                    score = set_score(factor, batch, lam, feedback)
                    ledger.record(lam, gradient, score,
                                  log_max_feedback=float(np.log(feedback.max())),
                                  log_volume=log_vol)
                    state = hedge_update(state, gradient)
                except SkipRound:
                    skipped = True
        records.append(RoundRecord(
            round_index=round_index,
            history=history,
            batch=tuple(int(i) for i in batch),
            feedback=tuple(float(y) for y in feedback),
            lam=float(lam),
            metrics=metrics,
            rank_deficient=rank_deficient,
            skipped_update=skipped,
        ))
        batches.append(batch)
        previous_batch = tuple(int(i) for i in batch)
        if adaptive and not skipped:
            lam = state.current_lambda

    div_plus = effective_diversity(batches, quality, dataset.feat,
                                   threshold=cfg.threshold)
    summary = TrajectorySummary(
        user_id=int(user_id),
        seed=int(seed),
        rounds=len(records),
        rel=float(np.mean([r.metrics.rel for r in records])),
        prec=float(np.mean([r.metrics.prec for r in records])),
        div_local=float(np.mean([r.metrics.div_local for r in records])),
        div_global=float(np.mean([r.metrics.div_global for r in records])),
        div_plus=float(div_plus),
        runtime_seconds=float(np.mean([r.metrics.runtime_seconds
                                       for r in records])),
        lam_final=float(lam),
    )
    oracle = None
    if adaptive and ledger.rounds:
        oracle = oracle_lambda(ledger)
    return TrajectoryRecord(user_id=int(user_id), seed=int(seed),
                            rounds=records, summary=summary,
                            ledger=ledger, oracle=oracle)


def grid_oracle_rerun(cfg, user_id, seed, dataset, gt_history=None,
                      grid_step=0.1):
    """Diagnostic oracle that actually re-runs the trajectory per grid point.

    Unlike the recorded-trajectory oracle, each candidate trade-off is
    allowed to change which batches get picked, so interior optima are
    possible. Returns ``(best_lam, {lam: total_score})``.
    """
    if gt_history is None:
        gt_history = sample_history(dataset, user_id, seed,
                                    policy=cfg.history_policy)
    totals = {}
    quality = dataset.quality(user_id)
    for lam in np.arange(0.0, 1.0 + grid_step / 2, grid_step):
        lam = round(float(lam), 10)
        fixed = replace(cfg, lam=lam, adaptive=False)
        record = run_trajectory(fixed, user_id, seed, dataset,
                                gt_history=gt_history)
        total = 0.0
        previous = ()
        for round_rec in record.rounds:
            spec = LikelihoodSpec(
                method=cfg.method if cfg.method in METHODS else "qd_decomp",
                quality=quality,
                lam=lam,
                history=round_rec.history,
                alpha=cfg.resolved_alpha if cfg.method == "b_divrec" else 0.0,
                epsilon=cfg.resolved_epsilon,
                previous_batch=previous,
            )
            factor = build_l_factor(
                spec, dataset.feat,
                index=dataset.index if cfg.method == "b_divrec" else None,
                round_index=round_rec.round_index,
                rng_seed=_coin_seed(seed, user_id),
            )
            score = set_score(factor, np.asarray(round_rec.batch), lam,
                              np.asarray(round_rec.feedback))
            if np.isfinite(score):
                total += score
            previous = round_rec.batch
        totals[lam] = total
    best = max(sorted(totals), key=lambda k: totals[k])
    return best, totals


# -- benchmark over configs x users x seeds -----------------------------------


@dataclass
class BenchmarkReport:
    rows: list  # one dict per config
    failures: list  # (label, user, seed, error string)

    _METRICS = ("rel", "prec", "div_local", "div_global", "div_plus",
                "runtime_seconds")

    def to_csv(self, path=None):
        buffer = io.StringIO()
        names = ["method", "strategy", "adaptive"]
        for name in self._METRICS:
            names.extend([f"{name}_mean", f"{name}_std"])
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(names)
        for row in self.rows:
            out = [row["method"], row["strategy"], str(row["adaptive"]).lower()]
            for name in self._METRICS:
                mean, std, _ = row["table"][name]
                out.extend([repr(mean), repr(std)])
            writer.writerow(out)
        text = buffer.getvalue()
        if path is not None:
            with open(path, "w", encoding="ascii") as handle:
                handle.write(text)
        return text

    def to_text(self):
        headers = ["method", "strategy"] + list(self._METRICS)
        lines = [headers]
        for row in self.rows:
            label = row["method"] + ("*" if row["adaptive"] else "")
            rendered = [label, row["strategy"]]
            rendered += [row["table"][name][2] for name in self._METRICS]
            lines.append(rendered)
        widths = [max(len(line[i]) for line in lines)
                  for i in range(len(headers))]
        out = []
        for k, line in enumerate(lines):
            out.append("  ".join(cell.ljust(width)
                                 for cell, width in zip(line, widths)).rstrip())
            if k == 0:
                out.append("  ".join("-" * width for width in widths))
        if self.failures:
            out.append("")
            out.append(f"failed cells: {len(self.failures)}")
            for label, user, seed, error in self.failures:
                out.append(f"  {label} user={user} seed={seed}: {error}")
        return "\n".join(out) + "\n"


def run_benchmark(configs, dataset=None, users=None, seeds=None):
    """Cartesian product of configs x users x seeds, aggregated per config.

    Cells are independent: one failing trajectory is recorded and skipped
    without aborting the run. Output row order follows the config order;
    users and seeds are visited sorted so reruns are reproducible.
    """
    if not configs:
        raise ConfigError("need at least one configuration")
    if dataset is None:
        dataset = prepare_dataset(configs[0])
    rows = []
    failures = []
    for cfg in configs:
        if users is not None:
            cell_users = sorted(int(u) for u in users)
        elif cfg.users is not None:
            cell_users = sorted(int(u) for u in cfg.users)
        else:
            cell_users = list(range(dataset.n_users))
        cell_seeds = (sorted(int(s) for s in seeds) if seeds is not None
                      else list(range(cfg.n_seeds)))
        summaries = []
        limit = 1 if cfg.single_thread else None
        with threadpool_limits(limits=limit):
            for user_id in cell_users:
                for seed in cell_seeds:
                    try:
                        record = run_trajectory(cfg, user_id, seed, dataset)
                    except Exception as err:  # per-cell isolation
                        failures.append((cfg.label, user_id, seed, repr(err)))
                        logger.warning("cell failed: %s user=%d seed=%d: %r",
                                       cfg.label, user_id, seed, err)
                        continue
                    summaries.append(record.summary)
        if not summaries:
            failures.append((cfg.label, -1, -1, "no cell succeeded"))
            continue
        rows.append({
            "method": cfg.method,
            "strategy": cfg.strategy,
            "adaptive": cfg.adaptive,
            "label": cfg.label,
            "table": aggregate(summaries),
            "summaries": summaries,
        })
    return BenchmarkReport(rows=rows, failures=failures)
