"""Benchmark harness: replay fully labeled datasets through the engine.

Each run samples fresh random priors (one relevant, one irrelevant by
default), screens the whole pool synchronously with an oracle answering
every presented record from the historical labels, and records the
screening order.  From the per-run recall curves come the two headline
metrics:

    WSS@level  = level - n*/N, where n* is the first position at which
                 recall reaches the level (work saved versus screening in
                 random order);
    RRF@frac   = recall after screening the first ceil(frac * N) records.

Prior records occupy screening positions 0..p-1 and count as screened by
default; set exclude_priors_from_metrics for the alternative convention.
Runs are seeded master_seed + run_index so any single run can be re-run
in isolation, and every run uses the synchronous engine so timing can
never leak into benchmark numbers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

from .corpus import Dataset
from .engine import LabelEvent, ScreeningEngine, Settings, StopSpec, settings_to_dict
from .errors import LevelNeverReached, NotFullyLabeled, PoolExhausted, TooFewOfClass
from .rng import substream

WSS_LEVELS = (0.85, 0.95, 1.0)
RRF_FRACTIONS = (0.05, 0.10)


@dataclass(frozen=True)
class SimulationSpec:
    settings: Settings = Settings()
    n_runs: int = 15
    n_prior_included: int = 1
    n_prior_excluded: int = 1
    master_seed: int = 0
    exclude_priors_from_metrics: bool = False

    def validate(self) -> None:
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")
        if self.n_prior_included < 1 or self.n_prior_excluded < 1:
            raise ValueError("need at least one prior of each class")


@dataclass
class RunResult:
    run: int
    seed: int
    events: list[LabelEvent]
    recall: list[float]
    n_screened: int
    n_relevant: int
    wss: dict[str, float]
    rrf: dict[str, float]


@dataclass
class SimulationResult:
    n_records: int
    n_relevant: int
    spec: SimulationSpec
    runs: list[RunResult] = field(default_factory=list)
    aggregates: dict[str, dict[str, float]] = field(default_factory=dict)


def recall_curve(events, n_relevant: int) -> list[float]:
    """recall(k) = relevant found within the first k events, over R."""
    if n_relevant < 1:
        raise ValueError("n_relevant must be >= 1")
    curve: list[float] = []
    found = 0
    for event in events:
        found += getattr(event, "label", event)
        curve.append(found / n_relevant)
    return curve


def wss(curve, level: float) -> float:
    """Work saved over sampling at a recall level in (0, 1].

    Negative values are possible (worse than random) and reported as-is.
    """
    if not 0 < level <= 1:
        raise ValueError("level must be in (0, 1]")
    n = len(curve)
    for k, value in enumerate(curve, start=1):
        if value >= level - 1e-12:
            return level - k / n
    raise LevelNeverReached(f"recall never reached {level}")


def rrf(curve, fraction: float) -> float:
    """Recall after screening the first ceil(fraction * N) records."""
    if not 0 < fraction <= 1:
        raise ValueError("fraction must be in (0, 1]")
    n = len(curve)
    k = math.ceil(fraction * n - 1e-9)
    return curve[max(k, 1) - 1]


def _metric_keys() -> list[str]:
    keys = [f"wss{int(round(level * 100))}" for level in WSS_LEVELS]
    keys += [f"rrf{int(round(frac * 100))}" for frac in RRF_FRACTIONS]
    return keys


def _single_run(dataset: Dataset, spec: SimulationSpec, run_index: int,
                relevant_ids, irrelevant_ids) -> RunResult:
    seed = spec.master_seed + run_index
    prior_rng = substream(seed, "priors")
    included = sorted(prior_rng.sample(relevant_ids, spec.n_prior_included))
    excluded = sorted(prior_rng.sample(irrelevant_ids, spec.n_prior_excluded))
    settings = replace(spec.settings, seed=seed, stopping=StopSpec())
    engine = ScreeningEngine.create(dataset, settings, included, excluded,
                                    synchronous=True)
    truth = dataset.labels()
    while True:
        try:
            row = engine.next_record()
        except PoolExhausted:
            break
        engine.submit_label(row, truth[row])
    events = list(engine.events)

    if spec.exclude_priors_from_metrics:
        scored_events = [e for e in events if e.source != "prior"]
        n_relevant = len(relevant_ids) - spec.n_prior_included
    else:
        scored_events = events
        n_relevant = len(relevant_ids)
    curve = recall_curve(scored_events, n_relevant)
    return RunResult(
        run=run_index,
        seed=seed,
        events=events,
        recall=curve,
        n_screened=len(curve),
        n_relevant=n_relevant,
        wss={f"{int(round(l * 100))}": wss(curve, l) for l in WSS_LEVELS},
        rrf={f"{int(round(f * 100))}": rrf(curve, f) for f in RRF_FRACTIONS},
    )


def run_simulation(dataset: Dataset, spec: SimulationSpec, jobs: int = 1) -> SimulationResult:
    """All runs of the benchmark protocol; aggregation is order-independent."""
    spec.validate()
    labels = dataset.labels()
    if any(label is None for label in labels):
        raise NotFullyLabeled("dataset is not fully labeled")
    relevant_ids = [i for i, y in enumerate(labels) if y == 1]
    irrelevant_ids = [i for i, y in enumerate(labels) if y == 0]
    if len(relevant_ids) < spec.n_prior_included + 1:
        raise TooFewOfClass(
            f"{len(relevant_ids)} relevant records cannot cover "
            f"{spec.n_prior_included} priors plus one to find"
        )
    if len(irrelevant_ids) < spec.n_prior_excluded + 1:
        raise TooFewOfClass(
            f"{len(irrelevant_ids)} irrelevant records cannot cover "
            f"{spec.n_prior_excluded} priors plus one to screen"
        )

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            runs = list(
                pool.map(
                    lambda r: _single_run(dataset, spec, r, relevant_ids, irrelevant_ids),
                    range(spec.n_runs),
                )
            )
    else:
        runs = [
            _single_run(dataset, spec, r, relevant_ids, irrelevant_ids)
            for r in range(spec.n_runs)
        ]
    runs.sort(key=lambda rr: rr.run)

    aggregates: dict[str, dict[str, float]] = {}
    for key in _metric_keys():
        group, level = key[: 3], key[3:]
        values = [(run.wss if group == "wss" else run.rrf)[level] for run in runs]
        aggregates[key] = {
            "mean": sum(values) / len(values),
            "min": min(values),
            "max": max(values),
        }
    return SimulationResult(
        n_records=dataset.n_records,
        n_relevant=len(relevant_ids),
        spec=spec,
        runs=runs,
        aggregates=aggregates,
    )


def emit_plot_data(result: SimulationResult) -> bytes:
    """Long-format CSV (run,k,fraction_screened,recall) for any plotting
    tool, plus a random_baseline pseudo-run with recall(k) = k/N."""
    lines = ["run,k,fraction_screened,recall"]
    for run in result.runs:
        n = run.n_screened
        for k, value in enumerate(run.recall, start=1):
            lines.append(f"{run.run},{k},{k / n!r},{value!r}")
    n = result.runs[0].n_screened if result.runs else 0
    for k in range(1, n + 1):
        lines.append(f"random_baseline,{k},{k / n!r},{k / n!r}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def results_document(result: SimulationResult, dataset_path: str = "",
                     plot_csv: str = "recall.csv") -> dict:
    """Stable, versioned results schema; metrics are recomputable from the
    embedded per-run screening orders alone."""
    spec = result.spec
    return {
        "schema_version": 1,
        "generator": "screenloop",
        "dataset": {
            "path": dataset_path,
            "n_records": result.n_records,
            "n_relevant": result.n_relevant,
        },
        "protocol": {
            "n_runs": spec.n_runs,
            "n_prior_included": spec.n_prior_included,
            "n_prior_excluded": spec.n_prior_excluded,
            "master_seed": spec.master_seed,
            "exclude_priors_from_metrics": spec.exclude_priors_from_metrics,
        },
        "settings": settings_to_dict(spec.settings),
        "runs": [
            {
                "run": run.run,
                "seed": run.seed,
                "n_screened": run.n_screened,
                "n_relevant": run.n_relevant,
                "events": [
                    [e.order, e.row_id, e.label, e.source, e.model_version]
                    for e in run.events
                ],
                "wss": run.wss,
                "rrf": run.rrf,
            }
            for run in result.runs
        ],
        "aggregates": result.aggregates,
        "plot_csv": plot_csv,
    }
