"""Trial orchestration and reports."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ..core import ActiveSQError, BudgetTally, NoiseModel, RngStream, UnitVector
from ..distributions import (
    HalfspaceTarget,
    LabeledSource,
    Marginal,
    RectangleTarget,
    ThresholdTarget,
    disagreement_probability,
)
from ..learners import (
    LogcConstants,
    active_learn_hs_logc,
    active_learn_hs_u,
    active_learn_hs_u_unknown_noise,
    learn_hs_u_passive,
    learn_rectangle,
    learn_threshold,
    rectangle_query_bound,
)
from ..learners.noise_rate import query_count
from ..learners.uniform import HalfspaceHypothesis, passive_tolerance
from ..learners.simple import QUERY_TOLERANCE, RectangleHypothesis, ThresholdHypothesis
from ..oracles import DpOracle, ExactOracle, PrivateDatabase, RcnOracle, SamplingOracle, UncorrelatedOracle
from .. import constants
from .config import ExperimentConfig

MC_ERROR_SAMPLES = 1_000_000
LOGC_QUERY_BUDGET = 10_000


# ---------------------------------------------------------------------------
# error measurement


@dataclass(frozen=True)
class TrueError:
    value: float
    stderr: float = 0.0


def true_error(hypothesis, target, marginal: Marginal, rng: np.random.Generator | None = None) -> TrueError:
    """Disagreement of hypothesis and clean target under the marginal."""
    if isinstance(target, HalfspaceTarget) and isinstance(hypothesis, HalfspaceHypothesis) and marginal.symmetric:
        return TrueError(disagreement_probability(marginal, hypothesis.normal, target.normal))
    if isinstance(target, ThresholdTarget) and isinstance(hypothesis, ThresholdHypothesis):
        return TrueError(abs(hypothesis.theta_hat - target.theta))
    if isinstance(target, RectangleTarget) and isinstance(hypothesis, RectangleHypothesis):
        lo_t, hi_t = np.asarray(target.lows), np.asarray(target.highs)
        lo_h, hi_h = np.asarray(hypothesis.lows), np.asarray(hypothesis.highs)
        inter = np.prod(np.clip(np.minimum(hi_t, hi_h) - np.maximum(lo_t, lo_h), 0, None))
        return TrueError(float(np.prod(hi_t - lo_t) + np.prod(hi_h - lo_h) - 2 * inter))
    rng = rng if rng is not None else np.random.default_rng(0)
    pts = marginal.sample(rng, MC_ERROR_SAMPLES)
    wrong = hypothesis.predict(pts) != target.label(pts)
    p = float(wrong.mean())
    return TrueError(p, math.sqrt(p * (1 - p) / MC_ERROR_SAMPLES))


# ---------------------------------------------------------------------------
# building a trial


def make_marginal(cfg: ExperimentConfig) -> Marginal:
    if cfg.learner == "threshold":
        return Marginal.interval()
    if cfg.learner == "rectangle":
        return Marginal.cube(cfg.d)
    return {"sphere": Marginal.sphere, "gaussian": Marginal.gaussian, "ball": Marginal.ball}[cfg.marginal](cfg.d)


def _numbers(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def make_target(cfg: ExperimentConfig, marginal: Marginal, rng: np.random.Generator):
    explicit = None if cfg.target == "random" else _numbers(cfg.target)
    if cfg.learner == "threshold":
        return ThresholdTarget(explicit[0] if explicit else float(rng.uniform()))
    if cfg.learner == "rectangle":
        if explicit:
            return RectangleTarget(tuple(explicit[0::2]), tuple(explicit[1::2]))
        lows, highs = [], []
        for _ in range(cfg.d):
            length = rng.uniform(cfg.beta, 1.0)
            lo = rng.uniform(0.0, 1.0 - length)
            lows.append(lo)
            highs.append(lo + length)
        return RectangleTarget(tuple(lows), tuple(highs))
    if explicit:
        return HalfspaceTarget(UnitVector(explicit))
    return HalfspaceTarget(UnitVector.random(marginal.d, rng))


def hashed_uniform(points: np.ndarray) -> np.ndarray:
    """A fixed pseudo-random number in [0, 1) for every point (splitmix64 of its bytes)."""
    x = np.ascontiguousarray(points, dtype=np.float64)
    words = x.view(np.uint64).reshape(x.shape[0], -1)
    h = np.full(x.shape[0], np.uint64(0x9E3779B97F4A7C15))
    with np.errstate(over="ignore"):
        for j in range(words.shape[1]):
            h ^= words[:, j]
            h += np.uint64(0x9E3779B97F4A7C15)
            h = (h ^ (h >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
            h = (h ^ (h >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
            h ^= h >> np.uint64(31)
    return (h >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def make_noise(cfg: ExperimentConfig) -> NoiseModel:
    if cfg.noise_kind == "none":
        return NoiseModel.none()
    if cfg.noise_kind == "rcn":
        return NoiseModel.rcn(cfg.noise_eta)
    eta, spread = cfg.noise_eta, cfg.noise_spread
    return NoiseModel.per_point(lambda pts: eta + spread * (2.0 * hashed_uniform(pts) - 1.0), eta)


def expected_queries(cfg: ExperimentConfig) -> int:
    if cfg.learner == "threshold":
        return math.ceil(math.log2(1.0 / cfg.eps)) + 1
    if cfg.learner == "rectangle":
        return rectangle_query_bound(cfg.d, cfg.eps, cfg.beta)
    if cfg.learner == "hs_u_passive":
        return cfg.d + 1
    if cfg.learner in ("hs_u_active", "hs_u_unknown_noise"):
        return query_count(cfg.eps, cfg.d)
    return LOGC_QUERY_BUDGET


def default_dp_records(cfg: ExperimentConfig, queries: int) -> int:
    """Records the learner will consume, for learners whose query tolerances are known upfront."""
    if cfg.learner == "threshold":
        # one block per halving, filter mass 2^-j
        return sum(constants.dp_block_size(2.0**-j, QUERY_TOLERANCE, cfg.alpha, queries, cfg.delta)
                   for j in range(queries))
    if cfg.learner == "hs_u_passive":
        tau = passive_tolerance(cfg.eps, cfg.d)
        return queries * constants.dp_block_size(1.0, tau, cfg.alpha, queries, cfg.delta)
    raise ValueError(f"set dp.records explicitly for learner {cfg.learner!r}")


def make_oracle(cfg: ExperimentConfig, source: LabeledSource, stream: RngStream, queries: int,
                db: PrivateDatabase | None = None):
    per_query = cfg.delta / queries
    kind = cfg.oracle
    if kind == "exact":
        return ExactOracle(source, stream, tally=source.tally)
    if kind == "sampling":
        return SamplingOracle(source, per_query, fast=cfg.fast, share_samples=cfg.share_samples)
    if kind == "rcn":
        return RcnOracle(source, cfg.resolved_eta_assumed, per_query, fast=cfg.fast, share_samples=cfg.share_samples)
    if kind == "uncorrelated":
        return UncorrelatedOracle(source, cfg.resolved_eta_assumed, per_query, fast=cfg.fast)
    if db is None:
        size = cfg.dp_records or default_dp_records(cfg, queries)
        db = PrivateDatabase.from_source(source, size)
    return DpOracle(db, cfg.alpha, cfg.delta, queries, stream, tally=source.tally)


@dataclass
class TrialResult:
    index: int
    completed: bool
    error: float | None
    error_stderr: float
    success: bool
    tally: dict
    failure: str | None = None
    detail: dict = field(default_factory=dict)
    wall_time: float = 0.0


def run_trial(cfg: ExperimentConfig, index: int, db: PrivateDatabase | None = None) -> TrialResult:
    stream = RngStream(cfg.seed, (index,))
    marginal = make_marginal(cfg)
    target = make_target(cfg, marginal, stream.child(0).generator())
    tally = BudgetTally()
    started = time.perf_counter()
    queries = expected_queries(cfg)
    detail: dict = {}
    try:
        if cfg.learner == "rectangle":
            oracles = []
            for axis in range(cfg.d):
                src = LabeledSource(Marginal.interval(), target.axis(axis), make_noise(cfg),
                                    stream.child(2, axis), tally)
                oracles.append(make_oracle(cfg, src, stream.child(3, axis), queries))
            hyp = learn_rectangle(oracles, cfg.eps, cfg.beta)
            detail["queries"] = hyp.queries
        else:
            source = LabeledSource(marginal, target, make_noise(cfg), stream.child(2), tally)
            if cfg.learner == "hs_u_unknown_noise":
                hyp = active_learn_hs_u_unknown_noise(source, cfg.eps, cfg.d, cfg.delta, kappa=cfg.noise_kappa,
                                                      fast=cfg.fast)
                detail["eta_estimate"] = hyp.trace["eta_estimate"]
            else:
                oracle = make_oracle(cfg, source, stream.child(3), queries, db)
                hyp = _run_learner(cfg, oracle, marginal)
                detail["min_query_tolerance"] = min((t for _, t in oracle.issued), default=None)
                if isinstance(oracle, DpOracle):
                    detail["dp_audit"] = [list(a) for a in oracle.db.audit]
            if "filter_masses" in getattr(hyp, "trace", {}):
                detail["filter_masses"] = hyp.trace["filter_masses"]
                detail["filter_tolerance"] = hyp.trace["filter_tolerance"]
    except ActiveSQError as err:
        detail["message"] = str(err)
        return TrialResult(index, False, None, 0.0, False, tally.as_dict(), err.code, detail,
                           time.perf_counter() - started)
    detail["hypothesis"] = describe(hyp)
    if db is not None and cfg.target == "random":
        # records came from outside: the target is unknown, so there is nothing to score against
        return TrialResult(index, True, None, 0.0, False, tally.as_dict(), None, detail,
                           time.perf_counter() - started)
    err = true_error(hyp, target, marginal, stream.child(4).generator())
    return TrialResult(index, True, err.value, err.stderr, err.value <= cfg.eps, tally.as_dict(), None, detail,
                       time.perf_counter() - started)


def describe(hyp) -> dict:
    if isinstance(hyp, ThresholdHypothesis):
        return {"theta": hyp.theta_hat}
    if isinstance(hyp, RectangleHypothesis):
        return {"lows": list(hyp.lows), "highs": list(hyp.highs)}
    return {"normal": hyp.normal.coords.tolist()}


def _run_learner(cfg: ExperimentConfig, oracle, marginal: Marginal):
    if cfg.learner == "threshold":
        return learn_threshold(oracle, cfg.eps)
    if cfg.learner == "hs_u_passive":
        return learn_hs_u_passive(oracle, cfg.eps, cfg.d)
    if cfg.learner == "hs_u_active":
        return active_learn_hs_u(oracle, cfg.eps, cfg.d)
    if cfg.learner == "hs_logc":
        consts = LogcConstants.for_marginal(marginal)
        if cfg.logc_c is not None or cfg.logc_C1 is not None or cfg.logc_c_m is not None:
            consts = LogcConstants.build(
                consts.c if cfg.logc_c is None else cfg.logc_c,
                consts.C1 if cfg.logc_C1 is None else cfg.logc_C1,
                consts.c_m if cfg.logc_c_m is None else cfg.logc_c_m,
                marginal,
            )
        return active_learn_hs_logc(oracle, cfg.eps, cfg.d, consts=consts)
    raise ValueError(f"learner {cfg.learner!r} is not run through a single oracle")


# ---------------------------------------------------------------------------
# reports


@dataclass
class ExperimentReport:
    config: dict
    trials: list[TrialResult]

    @property
    def completed(self) -> bool:
        return all(t.completed for t in self.trials)

    def aggregate(self) -> dict:
        labels = np.array([t.tally["labels_used"] for t in self.trials], dtype=float)
        return {
            "trials": len(self.trials),
            "completed": sum(t.completed for t in self.trials),
            "success_fraction": sum(t.success for t in self.trials) / len(self.trials),
            "median_labels": float(np.median(labels)),
            "p90_labels": float(np.percentile(labels, 90)),
        }

    def to_dict(self, include_timing: bool = False) -> dict:
        trials = []
        for t in self.trials:
            row = asdict(t)
            if not include_timing:
                row.pop("wall_time")
            trials.append(row)
        return {"config": self.config, "aggregate": self.aggregate(), "trials": trials}

    def to_json(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_dict(include_timing), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> ExperimentReport:
        data = json.loads(text)
        trials = [TrialResult(**row) for row in data["trials"]]
        return cls(data["config"], trials)

    CSV_FIELDS = ("index", "completed", "success", "error", "error_stderr", "labels_used", "unlabeled_used",
                  "active_queries", "target_independent_queries", "failure")

    def csv_rows(self, extra: dict | None = None) -> list[dict]:
        rows = []
        for t in self.trials:
            row = {k: getattr(t, k) for k in ("index", "completed", "success", "error", "error_stderr", "failure")}
            row.update(t.tally)
            if extra:
                row = {**extra, **row}
            rows.append(row)
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=["seed", *self.CSV_FIELDS], lineterminator="\n")
        writer.writeheader()
        for row in self.csv_rows({"seed": self.config.get("seed")}):
            writer.writerow({k: row.get(k) for k in writer.fieldnames})
        return buf.getvalue()


def _trial_job(args):
    cfg, index = args
    return run_trial(cfg, index)


def run_experiment(cfg: ExperimentConfig, db: PrivateDatabase | None = None) -> ExperimentReport:
    """``trials`` independent runs on derived streams; deterministic given the seed."""
    cfg.validate()
    if db is not None or cfg.workers <= 1:
        results = [run_trial(cfg, i, db) for i in range(cfg.trials)]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_trial_job, [(cfg, i) for i in range(cfg.trials)]))
    return ExperimentReport(cfg.to_dotted(), results)
