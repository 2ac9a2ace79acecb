"""End-to-end experiment execution: leave-one-topic-out sweeps over schemes,
stage counts, and seeds, with deterministic CSV/JSON outputs."""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping

from .corpus import (
    Corpus,
    FieldMapping,
    NormalizationConfig,
    SyntheticSpec,
    generate_synthetic,
    load_corpus,
    merge_topics,
)
from .errors import ConfigError, TopicForgeError
from .evaluation import (
    RunReport,
    TopicResult,
    average_precision,
    mean_average_precision,
    rank,
)
from .schedule import AllocationSizes, Scheme, StagePlan, build_plan, split_target
from .seeding import derive_seed
from .similarity import order_sources
from .trainer import ExternalTrainerError, TrainerConfig, TrainExample, create_trainer

logger = logging.getLogger(__name__)

# Canonical scheme order for grids and reports (curricula A-D, then baseline).
SCHEME_ORDER = (
    Scheme.GTL_DEC_INC,
    Scheme.GTL_EQU_INC,
    Scheme.SGTL_DEC_INC,
    Scheme.SGTL_EQU_INC,
    Scheme.BASELINE_SINGLE_STAGE,
)

TrainerFactory = Callable[[TrainerConfig], object]


class TopicSetMismatch(TopicForgeError):
    pass


class TopicRunError(TopicForgeError):
    """A single (target, scheme, stages) cell failed; carries the context."""

    def __init__(self, target_id: str, scheme: Scheme, stages: int, cause: Exception):
        super().__init__(f"[target={target_id} scheme={scheme.value} stages={stages}] {cause}")
        self.target_id = target_id
        self.scheme = scheme
        self.stages = stages
        self.cause = cause


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed experiment description (see ``from_dict`` for the JSON schema)."""

    corpus_path: str | None = None
    corpus_mapping: FieldMapping = FieldMapping()
    synthetic: SyntheticSpec | None = None
    corpus_seed: int = 0
    schemes: tuple[Scheme, ...] = (Scheme.SGTL_EQU_INC,)
    stage_counts: tuple[int, ...] = (2, 3, 6, 8, 10)
    budget: int = 200
    repeats: int = 5
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    trainer: TrainerConfig = TrainerConfig()
    merge_groups: dict = dataclasses.field(default_factory=dict)
    normalization: NormalizationConfig = NormalizationConfig()
    output_dir: str = "out"
    min_test: int = 50
    ap_denominator: str = "relevant"

    _KEYS = {
        "corpus",
        "corpus_mapping",
        "synthetic",
        "corpus_seed",
        "schemes",
        "stage_counts",
        "budget",
        "repeats",
        "seeds",
        "trainer",
        "merge_topics",
        "normalization",
        "output_dir",
        "min_test",
        "ap_denominator",
    }

    @classmethod
    def from_dict(cls, data: Mapping[str, object]) -> "ExperimentConfig":
        unknown = set(data) - cls._KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if ("corpus" in data) == ("synthetic" in data):
            raise ConfigError("config needs exactly one of 'corpus' or 'synthetic'")

        try:
            synthetic = (
                SyntheticSpec.from_dict(data["synthetic"]) if "synthetic" in data else None
            )
            mapping = FieldMapping(**data.get("corpus_mapping", {}))
            trainer = TrainerConfig.from_dict(data.get("trainer", {}))
            normalization = NormalizationConfig.from_dict(data.get("normalization", {}))
            schemes = tuple(
                Scheme.from_slug(s) for s in data.get("schemes", ["sgtl-equ-inc"])
            )
        except (TypeError, ValueError, TopicForgeError) as exc:
            raise ConfigError(str(exc)) from exc

        seeds = data.get("seeds")
        repeats = data.get("repeats")
        if seeds is None:
            repeats = 5 if repeats is None else int(repeats)
            seeds = tuple(range(repeats))
        else:
            seeds = tuple(int(s) for s in seeds)
            if repeats is None:
                repeats = len(seeds)
            elif int(repeats) != len(seeds):
                raise ConfigError(f"repeats={repeats} but {len(seeds)} seeds given")

        budget = int(data.get("budget", 200))
        stage_counts = tuple(int(s) for s in data.get("stage_counts", (2, 3, 6, 8, 10)))
        if any(s < 1 or s > budget for s in stage_counts):
            raise ConfigError("stage_counts must lie within [1, budget]")
        gradual = [s for s in schemes if s is not Scheme.BASELINE_SINGLE_STAGE]
        if gradual and any(s < 2 for s in stage_counts):
            raise ConfigError("gradual schemes need stage counts >= 2")

        ap_denominator = data.get("ap_denominator", "relevant")
        if ap_denominator not in ("relevant", "total"):
            raise ConfigError("ap_denominator must be 'relevant' or 'total'")

        return cls(
            corpus_path=data.get("corpus"),
            corpus_mapping=mapping,
            synthetic=synthetic,
            corpus_seed=int(data.get("corpus_seed", 0)),
            schemes=schemes,
            stage_counts=stage_counts,
            budget=budget,
            repeats=int(repeats),
            seeds=seeds,
            trainer=trainer,
            merge_groups=dict(data.get("merge_topics", {})),
            normalization=normalization,
            output_dir=str(data.get("output_dir", "out")),
            min_test=int(data.get("min_test", 50)),
            ap_denominator=ap_denominator,
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        out: dict = {
            "schemes": [s.value for s in self.schemes],
            "stage_counts": list(self.stage_counts),
            "budget": self.budget,
            "repeats": self.repeats,
            "seeds": list(self.seeds),
            "trainer": dataclasses.asdict(self.trainer),
            "merge_topics": self.merge_groups,
            "normalization": dataclasses.asdict(self.normalization),
            "output_dir": self.output_dir,
            "min_test": self.min_test,
            "ap_denominator": self.ap_denominator,
            "corpus_seed": self.corpus_seed,
        }
        if self.corpus_path is not None:
            out["corpus"] = self.corpus_path
            out["corpus_mapping"] = dataclasses.asdict(self.corpus_mapping)
        if self.synthetic is not None:
            out["synthetic"] = dataclasses.asdict(self.synthetic)
        return out

    def load(self) -> Corpus:
        """Load or generate the corpus this experiment runs on."""
        if self.synthetic is not None:
            corpus = generate_synthetic(self.synthetic, self.corpus_seed)
        else:
            corpus = load_corpus(self.corpus_path, self.corpus_mapping, self.normalization)
        if self.merge_groups:
            corpus = merge_topics(corpus, self.merge_groups)
        return corpus


def _stage_list(scheme: Scheme, cfg: ExperimentConfig) -> tuple[int, ...]:
    if scheme is Scheme.BASELINE_SINGLE_STAGE:
        return (1,)
    return tuple(sorted(set(cfg.stage_counts)))


def _plan_for(
    corpus: Corpus, target_id: str, scheme: Scheme, stages: int, cfg: ExperimentConfig, seed: int
) -> StagePlan:
    ordering = None
    if scheme.needs_ordering:
        train_ids, _ = split_target(corpus, target_id, cfg.budget, seed, cfg.min_test)
        reference = [corpus.claim(cid) for cid in train_ids]
        ordering = order_sources(corpus, target_id, reference)
    return build_plan(
        corpus, target_id, scheme, stages, cfg.budget, seed, ordering, cfg.min_test
    )


def _execute_plan(
    corpus: Corpus,
    plan: StagePlan,
    cfg: ExperimentConfig,
    seed: int,
    trainer_factory: TrainerFactory,
) -> TopicResult:
    trainer_cfg = dataclasses.replace(
        cfg.trainer, seed=derive_seed(cfg.trainer.seed, seed, plan.target_id)
    )
    trainer = trainer_factory(trainer_cfg)
    try:
        for stage in plan.stages:
            batch = [
                TrainExample(text=corpus.claim(cid).text, label=int(corpus.claim(cid).label))
                for cid in stage.source_ids + stage.target_ids
            ]
            random.Random(
                derive_seed(seed, "stage-merge", plan.target_id, stage.index)
            ).shuffle(batch)
            trainer.train_stage(batch)
        test_claims = [corpus.claim(cid) for cid in plan.test_ids]
        scores = trainer.score([c.text for c in test_claims])
    finally:
        trainer.close()
    ranked = rank(test_claims, scores)
    avep = average_precision(ranked, cfg.ap_denominator)
    n_relevant = sum(1 for e in ranked.entries if e.relevant)
    return TopicResult(
        topic_id=plan.target_id,
        avep=avep,
        n_test=len(plan.test_ids),
        n_relevant=n_relevant,
    )


def run_topic(
    corpus: Corpus,
    target_id: str,
    scheme: Scheme,
    stages: int,
    cfg: ExperimentConfig,
    seed: int | None = None,
    trainer_factory: TrainerFactory = create_trainer,
) -> TopicResult:
    """Train a fresh model through one plan and evaluate on the held-out
    target claims.  Errors carry the (target, scheme, stages) context."""
    seed = cfg.seeds[0] if seed is None else seed
    try:
        plan = _plan_for(corpus, target_id, scheme, stages, cfg, seed)
        return _execute_plan(corpus, plan, cfg, seed, trainer_factory)
    except ExternalTrainerError:
        raise
    except TopicForgeError as exc:
        raise TopicRunError(target_id, scheme, stages, exc) from exc


@dataclass(frozen=True)
class SeedRun:
    """One (scheme, stages, seed) pass over all target topics."""

    seed: int
    report: RunReport | None
    per_topic_sizes: dict[str, AllocationSizes]
    failures: tuple[tuple[str, str], ...]  # (topic_id, error)


@dataclass(frozen=True)
class Cell:
    scheme: Scheme
    stages: int
    runs: tuple[SeedRun, ...]
    map_mean: float | None
    map_std: float | None


@dataclass(frozen=True)
class SweepResult:
    config: ExperimentConfig
    cells: tuple[Cell, ...]

    def cell(self, scheme: Scheme, stages: int) -> Cell:
        for cell in self.cells:
            if cell.scheme is scheme and cell.stages == stages:
                return cell
        raise KeyError((scheme, stages))

    @property
    def grid(self) -> dict[tuple[Scheme, int], tuple[float | None, float | None]]:
        return {(c.scheme, c.stages): (c.map_mean, c.map_std) for c in self.cells}


def _run_cell_seed(
    corpus: Corpus,
    scheme: Scheme,
    stages: int,
    seed: int,
    cfg: ExperimentConfig,
    trainer_factory: TrainerFactory,
    strict: bool,
) -> SeedRun:
    results: list[TopicResult] = []
    sizes: dict[str, AllocationSizes] = {}
    failures: list[tuple[str, str]] = []
    for target_id in corpus.topic_ids:
        try:
            plan = _plan_for(corpus, target_id, scheme, stages, cfg, seed)
            sizes[target_id] = AllocationSizes(
                stages=stages,
                target_sizes=tuple(len(s.target_ids) for s in plan.stages),
                source_sizes=tuple(len(s.source_ids) for s in plan.stages),
            )
            results.append(_execute_plan(corpus, plan, cfg, seed, trainer_factory))
        except ExternalTrainerError:
            raise
        except TopicForgeError as exc:
            wrapped = TopicRunError(target_id, scheme, stages, exc)
            if strict:
                raise wrapped from exc
            logger.warning("topic failed: %s", wrapped)
            failures.append((target_id, str(exc)))
    report = None
    if results:
        report = RunReport(
            scheme=scheme,
            stages=stages,
            per_topic=tuple(results),
            map=mean_average_precision(results),
            fingerprint={
                "seed": seed,
                "budget": cfg.budget,
                "trainer": dataclasses.asdict(cfg.trainer),
            },
        )
    return SeedRun(
        seed=seed, report=report, per_topic_sizes=sizes, failures=tuple(failures)
    )


def run_all(
    cfg: ExperimentConfig,
    corpus: Corpus | None = None,
    trainer_factory: TrainerFactory = create_trainer,
    strict: bool = False,
    jobs: int = 1,
) -> SweepResult:
    """Run the full sweep: every configured (scheme, stages, seed) cell with
    each topic in turn as the target.  Topic failures are recorded and the
    sweep continues unless ``strict``; results are deterministic for a fixed
    config."""
    if corpus is None:
        corpus = cfg.load()
    if len(corpus.topic_ids) < 2:
        raise ConfigError("the corpus needs at least 2 topics")

    tasks = [
        (scheme, stages, seed)
        for scheme in SCHEME_ORDER
        if scheme in cfg.schemes
        for stages in _stage_list(scheme, cfg)
        for seed in cfg.seeds
    ]

    def work(task):
        scheme, stages, seed = task
        return task, _run_cell_seed(corpus, scheme, stages, seed, cfg, trainer_factory, strict)

    runs: dict[tuple, SeedRun] = {}
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for task, run in pool.map(work, tasks):
                runs[task] = run
    else:
        for task in tasks:
            runs[task] = work(task)[1]

    cells = []
    for scheme in SCHEME_ORDER:
        if scheme not in cfg.schemes:
            continue
        for stages in _stage_list(scheme, cfg):
            seed_runs = tuple(runs[(scheme, stages, seed)] for seed in cfg.seeds)
            maps = [r.report.map for r in seed_runs if r.report is not None]
            mean = sum(maps) / len(maps) if maps else None
            std = (
                math.sqrt(sum((m - mean) ** 2 for m in maps) / len(maps))
                if maps
                else None
            )
            cells.append(
                Cell(scheme=scheme, stages=stages, runs=seed_runs, map_mean=mean, map_std=std)
            )
    return SweepResult(config=cfg, cells=tuple(cells))


# --- comparison (improvement over a baseline report) ------------------------


@dataclass(frozen=True)
class ComparisonRow:
    topic_id: str
    baseline: float
    candidate: float
    delta: float
    improvement_pct: int


@dataclass(frozen=True)
class Comparison:
    rows: tuple[ComparisonRow, ...]
    baseline_avg: float
    candidate_avg: float
    delta_avg: float
    improvement_pct: int


def _pct_points(delta: float) -> int:
    # Round half away from zero on percentage points, with a decimal-side
    # pre-round so values like -6.5 stored inexactly still round to -7.
    x = round(100.0 * delta, 9)
    return int(math.floor(x + 0.5)) if x >= 0 else -int(math.floor(-x + 0.5))


def compare(baseline_report: RunReport, candidate_report: RunReport) -> Comparison:
    """Per-topic AveP deltas of a candidate over a baseline report."""
    base = {t.topic_id: t.avep for t in baseline_report.per_topic}
    cand = {t.topic_id: t.avep for t in candidate_report.per_topic}
    if set(base) != set(cand):
        raise TopicSetMismatch(
            f"baseline topics {sorted(base)} != candidate topics {sorted(cand)}"
        )
    rows = tuple(
        ComparisonRow(
            topic_id=t.topic_id,
            baseline=base[t.topic_id],
            candidate=cand[t.topic_id],
            delta=cand[t.topic_id] - base[t.topic_id],
            improvement_pct=_pct_points(cand[t.topic_id] - base[t.topic_id]),
        )
        for t in baseline_report.per_topic
    )
    delta_avg = candidate_report.map - baseline_report.map
    return Comparison(
        rows=rows,
        baseline_avg=baseline_report.map,
        candidate_avg=candidate_report.map,
        delta_avg=delta_avg,
        improvement_pct=_pct_points(delta_avg),
    )


def render_comparison(comparison: Comparison) -> str:
    width = max([len("Topic")] + [len(r.topic_id) for r in comparison.rows])
    lines = [f"{'Topic':<{width}}  {'Baseline':>8}  {'Candidate':>9}  {'Imp.':>5}"]
    for r in comparison.rows:
        lines.append(
            f"{r.topic_id:<{width}}  {r.baseline:>8.4f}  {r.candidate:>9.4f}  "
            f"{r.improvement_pct:>4}%"
        )
    lines.append(
        f"{'Average':<{width}}  {comparison.baseline_avg:>8.4f}  "
        f"{comparison.candidate_avg:>9.4f}  {comparison.improvement_pct:>4}%"
    )
    return "\n".join(lines) + "\n"


# --- output files ------------------------------------------------------------


def _sweep_csv(sweep: SweepResult) -> str:
    stage_cols = sorted({c.stages for c in sweep.cells})
    lines = ["scheme," + ",".join(f"s{s}" for s in stage_cols)]
    for scheme in SCHEME_ORDER:
        if scheme not in sweep.config.schemes:
            continue
        cells = {c.stages: c for c in sweep.cells if c.scheme is scheme}
        row = [scheme.value]
        for s in stage_cols:
            cell = cells.get(s)
            if cell is None or cell.map_mean is None:
                row.append("")
            else:
                row.append(f"{cell.map_mean:.4f}±{cell.map_std:.4f}")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _per_topic_csv(cell: Cell) -> str:
    by_topic: dict[str, list[TopicResult]] = {}
    order: list[str] = []
    for run in cell.runs:
        if run.report is None:
            continue
        for t in run.report.per_topic:
            if t.topic_id not in by_topic:
                by_topic[t.topic_id] = []
                order.append(t.topic_id)
            by_topic[t.topic_id].append(t)
    lines = ["topic_id,avep,n_test,n_relevant"]
    for topic_id in order:
        results = by_topic[topic_id]
        avep = sum(t.avep for t in results) / len(results)
        n_rel = sum(t.n_relevant for t in results) / len(results)
        lines.append(f"{topic_id},{avep:.6f},{results[0].n_test},{n_rel:.1f}")
    maps = [r.report.map for r in cell.runs if r.report is not None]
    if maps:
        lines.append(f"AVERAGE,{sum(maps) / len(maps):.6f},,")
    return "\n".join(lines) + "\n"


def _run_json(sweep: SweepResult) -> str:
    cells = []
    for cell in sweep.cells:
        runs = []
        for run in cell.runs:
            entry: dict = {"seed": run.seed, "failures": [
                {"topic_id": tid, "error": err} for tid, err in run.failures
            ]}
            if run.report is not None:
                entry["map"] = run.report.map
                entry["per_topic"] = [
                    {
                        "topic_id": t.topic_id,
                        "avep": t.avep,
                        "n_test": t.n_test,
                        "n_relevant": t.n_relevant,
                        "target_sizes": list(run.per_topic_sizes[t.topic_id].target_sizes),
                        "source_sizes": list(run.per_topic_sizes[t.topic_id].source_sizes),
                    }
                    for t in run.report.per_topic
                ]
            else:
                entry["map"] = None
                entry["per_topic"] = []
            runs.append(entry)
        cells.append(
            {
                "scheme": cell.scheme.value,
                "stages": cell.stages,
                "map_mean": cell.map_mean,
                "map_std": cell.map_std,
                "runs": runs,
            }
        )
    doc = {"config": sweep.config.to_dict(), "cells": cells}
    return json.dumps(doc, ensure_ascii=False, sort_keys=True, indent=2) + "\n"


def write_outputs(sweep: SweepResult, outdir: str | Path) -> list[Path]:
    """Write sweep.csv, per-cell per-topic CSVs, and run.json into outdir."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []

    path = outdir / "sweep.csv"
    path.write_text(_sweep_csv(sweep), encoding="utf-8")
    written.append(path)

    for cell in sweep.cells:
        path = outdir / f"per_topic_{cell.scheme.value}_{cell.stages}.csv"
        path.write_text(_per_topic_csv(cell), encoding="utf-8")
        written.append(path)

    path = outdir / "run.json"
    path.write_text(_run_json(sweep), encoding="utf-8")
    written.append(path)
    return written
