"""Screening engine: priors -> train -> present -> label -> retrain.

A project owns an immutable dataset, a feature matrix built once at init,
an append-only label event log, and the latest completed model with its
pool ranking.  All randomness is drawn from substreams keyed by
(project seed, purpose, event-log length), which makes every ranking a
pure function of (dataset, settings, event log): replaying the log
reproduces the project exactly, and coalesced asynchronous retrains land
on the same state a synchronous run reaches.

Retraining is synchronous by default (tests, simulation).  In asynchronous
mode submit_label returns immediately, a single worker retrains on the
latest snapshot (coalescing bursts of labels into one pass), and
next_record always serves the latest completed model's ranking.
"""

from __future__ import annotations

import io
import json
import threading
import zipfile
from dataclasses import dataclass, replace

import numpy as np

from . import classify, corpus, strategy, textfeat
from .errors import (
    AlreadyLabeled,
    CorruptState,
    FingerprintMismatch,
    InvalidSettings,
    NoPriorExcluded,
    NoPriorIncluded,
    OverlappingPriors,
    PoolExhausted,
    Stopped,
    UnknownRowId,
    VersionUnsupported,
)
from .rng import Rng, substream

STATE_FORMAT_VERSION = 1
STOP_KINDS = ("none", "max_screened", "consecutive_irrelevant")
EVENT_SOURCES = ("prior", "model", "random", "searched")

# The only built-in feature extraction; the hook below rejects classifier /
# feature pairings that cannot work (naive Bayes needs nonnegative values)
# should other feature kinds be plugged in.
FEATURE_KIND = "tfidf"
NONNEGATIVE_FEATURE_KINDS = frozenset({"tfidf"})


def validate_combination(classifier_kind: str, feature_kind: str = FEATURE_KIND) -> None:
    if classifier_kind == "naive_bayes" and feature_kind not in NONNEGATIVE_FEATURE_KINDS:
        raise InvalidSettings(
            f"naive_bayes requires a nonnegative feature matrix; {feature_kind!r} "
            "may produce negative values"
        )


@dataclass(frozen=True)
class StopSpec:
    kind: str = "none"
    k: int = 0

    def validate(self) -> None:
        if self.kind not in STOP_KINDS:
            raise ValueError(f"unknown stopping kind {self.kind!r}")
        if self.kind != "none" and self.k < 1:
            raise ValueError("stopping threshold k must be >= 1")


@dataclass(frozen=True)
class Settings:
    feature: textfeat.FeatureSpec = textfeat.FeatureSpec()
    classifier: classify.ClassifierSpec = classify.ClassifierSpec()
    query: strategy.QuerySpec = strategy.QuerySpec()
    balance: strategy.BalanceSpec = strategy.BalanceSpec()
    seed: int = 0
    stopping: StopSpec = StopSpec()

    def validate(self) -> None:
        self.feature.validate()
        self.classifier.validate()
        self.query.validate()
        self.balance.validate()
        self.stopping.validate()
        validate_combination(self.classifier.kind)


@dataclass(frozen=True)
class LabelEvent:
    order: int
    row_id: int
    label: int
    source: str
    model_version: int


def settings_to_dict(settings: Settings) -> dict:
    f, c, q, b = settings.feature, settings.classifier, settings.query, settings.balance
    return {
        "feature": {
            "ngram_max": f.ngram_max,
            "split_title_abstract": f.split_title_abstract,
            "title_weight": f.title_weight,
            "abstract_weight": f.abstract_weight,
            "lowercase": f.lowercase,
            "stopword_removal": f.stopword_removal,
        },
        "classifier": {
            "kind": c.kind,
            "smoothing_alpha": c.smoothing_alpha,
            "l2_lambda": c.l2_lambda,
            "max_iterations": c.max_iterations,
            "learning_rate": c.learning_rate,
            "tolerance": c.tolerance,
            "seed": c.seed,
        },
        "query": {
            "kind": q.kind,
            "mixed_random_fraction": q.mixed_random_fraction,
            "seed": q.seed,
        },
        "balance": {
            "kind": b.kind,
            "undersample_ratio": b.undersample_ratio,
            "dr_floor": b.dr_floor,
        },
        "seed": settings.seed,
        "stopping": {"kind": settings.stopping.kind, "k": settings.stopping.k},
    }


def settings_from_dict(data: dict) -> Settings:
    return Settings(
        feature=textfeat.FeatureSpec(**data["feature"]),
        classifier=classify.ClassifierSpec(**data["classifier"]),
        query=strategy.QuerySpec(**data["query"]),
        balance=strategy.BalanceSpec(**data["balance"]),
        seed=data["seed"],
        stopping=StopSpec(**data["stopping"]),
    )


@dataclass
class _PipelineResult:
    model: classify.Model
    scores: np.ndarray
    ranking: list[int]
    presentation: tuple[int, str] | None
    draws: int
    multiset: list[int]
    trained_on: int


class ScreeningEngine:
    """Single-writer project state; see module docstring for the contract."""

    def __init__(self, dataset: corpus.Dataset, settings: Settings,
                 features: textfeat.FeatureMatrix, synchronous: bool = True):
        self._dataset = dataset
        self._settings = settings
        self._features = features
        self._synchronous = synchronous

        self._events: list[LabelEvent] = []
        self._labels: dict[int, int] = {}
        self._model: classify.Model | None = None
        self._model_version = 0
        self._model_trained_on = 0
        self._scores = np.full(dataset.n_records, np.nan)
        self._ranking: list[int] = []
        self._presentation: tuple[int, str] | None = None
        self._rng_cursor = 0
        self._suggest_counter = 0
        self.last_training_multiset: list[int] = []

        self._cv = threading.Condition(threading.RLock())
        self._dirty = False
        self._busy = False
        self._stop_worker = False
        self._worker: threading.Thread | None = None
        self.on_retrain_complete = None  # callable(model_version) hook

    # --- construction -----------------------------------------------------

    @classmethod
    def create(cls, dataset: corpus.Dataset, settings: Settings,
               prior_included, prior_excluded, synchronous: bool = True) -> "ScreeningEngine":
        """Start a project: validate priors, build features, train model 1.

        Prior events land in the log included-first then excluded, each set
        in ascending row_id, all stamped model_version 0.
        """
        settings.validate()
        included = sorted(set(prior_included))
        excluded = sorted(set(prior_excluded))
        if not included:
            raise NoPriorIncluded("need at least one prior relevant record")
        if not excluded:
            raise NoPriorExcluded("need at least one prior irrelevant record")
        overlap = set(included) & set(excluded)
        if overlap:
            raise OverlappingPriors(f"rows in both prior sets: {sorted(overlap)}")
        for row in included + excluded:
            if not 0 <= row < dataset.n_records:
                raise UnknownRowId(f"row {row} outside 0..{dataset.n_records - 1}")

        features = textfeat.build_features(dataset, settings.feature)
        engine = cls(dataset, settings, features, synchronous=synchronous)
        for row in included:
            engine._append_event(row, 1, "prior")
        for row in excluded:
            engine._append_event(row, 0, "prior")
        engine._apply(engine._compute_pipeline(dict(engine._labels), len(engine._events)))
        if not synchronous:
            engine._start_worker()
        return engine

    @classmethod
    def replay(cls, dataset: corpus.Dataset, settings: Settings, events,
               synchronous: bool = True) -> "ScreeningEngine":
        """Rebuild a project from (dataset, settings, event log).

        Prior events seed init; every later event is re-submitted with a
        synchronous retrain, reproducing ranking and rng cursor exactly for
        a log produced in synchronous mode.
        """
        events = list(events)
        priors = [e for e in events if e.source == "prior"]
        if len(priors) != len(events[: len(priors)]) or any(
            e.source == "prior" for e in events[len(priors):]
        ):
            raise CorruptState("prior events must form the log prefix", "events")
        engine = cls.create(
            dataset,
            settings,
            [e.row_id for e in priors if e.label == 1],
            [e.row_id for e in priors if e.label == 0],
            synchronous=True,
        )
        for event in events[len(priors):]:
            engine.submit_label(event.row_id, event.label)
        if not synchronous:
            engine._synchronous = False
            engine._start_worker()
        return engine

    # --- core cycle ---------------------------------------------------------

    def _append_event(self, row_id: int, label: int, source: str) -> LabelEvent:
        event = LabelEvent(
            order=len(self._events),
            row_id=row_id,
            label=label,
            source=source,
            model_version=0 if source == "prior" else self._model_version,
        )
        self._events.append(event)
        self._labels[row_id] = label
        return event

    def _compute_pipeline(self, labels_by_row: dict[int, int], trained_on: int) -> _PipelineResult:
        """balance -> fit -> score all rows -> rank pool -> pick presentation.

        All randomness comes from substreams keyed by the event count, so
        the result depends only on (seed, labels_by_row).
        """
        ids = sorted(labels_by_row)
        labs = [labels_by_row[i] for i in ids]
        balance_rng = substream(self._settings.seed, "balance", trained_on)
        multiset = strategy.balance(
            ids, labs, self._dataset.n_records, self._settings.balance, balance_rng
        )
        X = self._features.matrix[multiset, :]
        y = [labels_by_row[i] for i in multiset]
        model = classify.fit(X, y, self._settings.classifier)
        scores = classify.predict_relevance(model, self._features)
        mask = np.zeros(self._dataset.n_records, dtype=bool)
        mask[ids] = True
        ranking = strategy.rank_pool(scores, mask)
        query_rng = substream(self._settings.seed, "query", trained_on)
        presentation = None
        if ranking:
            row, source = strategy.select_next_with_source(
                scores, mask, self._settings.query, query_rng
            )
            presentation = (row, source)
        return _PipelineResult(
            model=model,
            scores=scores,
            ranking=ranking,
            presentation=presentation,
            draws=balance_rng.draws + query_rng.draws,
            multiset=multiset,
            trained_on=trained_on,
        )

    def _apply(self, result: _PipelineResult) -> None:
        with self._cv:
            self._model_version += 1
            self._model = classify.stamp_version(result.model, self._model_version)
            self._model_trained_on = result.trained_on
            self._scores = result.scores
            self._ranking = result.ranking
            self._presentation = result.presentation
            self._rng_cursor += result.draws
            self.last_training_multiset = result.multiset

    def submit_label(self, row_id: int, label: int) -> LabelEvent:
        """Record a decision; in async mode this returns before retraining."""
        if label not in (0, 1):
            raise ValueError("label must be 0 or 1")
        with self._cv:
            if not 0 <= row_id < self._dataset.n_records:
                raise UnknownRowId(f"row {row_id} outside 0..{self._dataset.n_records - 1}")
            if row_id in self._labels:
                raise AlreadyLabeled(f"row {row_id} is already labeled")
            if self._presentation and self._presentation[0] == row_id:
                source = self._presentation[1]
            else:
                source = "searched"
            event = self._append_event(row_id, label, source)
            if self._synchronous:
                self._apply(self._compute_pipeline(dict(self._labels), len(self._events)))
            else:
                self._dirty = True
                self._cv.notify_all()
        return event

    def retrain(self) -> int:
        """Synchronously retrain on the current log; returns the new version."""
        with self._cv:
            self._apply(self._compute_pipeline(dict(self._labels), len(self._events)))
            return self._model_version

    def refresh_if_stale(self) -> bool:
        """Retrain once if the model predates the latest events (post-load)."""
        with self._cv:
            if self._model_trained_on < len(self._events):
                self.retrain()
                return True
            return False

    def _stopping_triggered(self) -> bool:
        stop = self._settings.stopping
        if stop.kind == "max_screened":
            return len(self._events) >= stop.k
        if stop.kind == "consecutive_irrelevant":
            # Only screening decisions count: the excluded prior always sits
            # at the log head and must not trip the rule at k=1.
            decisions = [e for e in self._events if e.source != "prior"]
            tail = decisions[-stop.k:]
            return len(tail) >= stop.k and all(e.label == 0 for e in tail)
        return False

    def next_record(self) -> int:
        """The row to screen next, from the latest completed model's ranking.

        Stable between labels: repeated calls return the same row until a
        label arrives.
        """
        with self._cv:
            if self._stopping_triggered():
                raise Stopped(f"stopping rule {self._settings.stopping.kind} reached")
            if len(self._labels) >= self._dataset.n_records:
                raise PoolExhausted("every record is labeled")
            if self._presentation and self._presentation[0] not in self._labels:
                return self._presentation[0]
            for row in self._ranking:
                if row not in self._labels:
                    self._presentation = (row, "model")
                    return row
            row = min(set(range(self._dataset.n_records)) - set(self._labels))
            self._presentation = (row, "model")
            return row

    def suggest_random_excluded(self, k: int, rng: Rng | None = None) -> list[int]:
        """k uniform unlabeled rows (under heavy imbalance, almost surely
        irrelevant) to help pick the excluded prior."""
        with self._cv:
            unlabeled = [r for r in range(self._dataset.n_records) if r not in self._labels]
            if k > len(unlabeled):
                raise PoolExhausted(f"asked for {k} of {len(unlabeled)} unlabeled rows")
            if rng is None:
                rng = substream(self._settings.seed, "suggest", self._suggest_counter)
                self._suggest_counter += 1
            return rng.sample(unlabeled, k)

    # --- async worker -------------------------------------------------------

    def _start_worker(self) -> None:
        if self._worker is not None:
            return
        self._worker = threading.Thread(target=self._worker_loop, daemon=True)
        self._worker.start()

    def _worker_loop(self) -> None:
        while True:
            with self._cv:
                while not self._dirty and not self._stop_worker:
                    self._cv.wait()
                if self._stop_worker:
                    return
                self._dirty = False
                self._busy = True
                snapshot = dict(self._labels)
                trained_on = len(self._events)
            result = self._compute_pipeline(snapshot, trained_on)
            with self._cv:
                self._apply(result)
                self._busy = False
                self._cv.notify_all()
                version = self._model_version
            hook = self.on_retrain_complete
            if hook is not None:
                hook(version)

    def enable_async(self) -> None:
        """Switch to asynchronous retraining (idempotent)."""
        with self._cv:
            self._synchronous = False
        self._start_worker()

    def quiesce(self, timeout: float | None = None) -> bool:
        """Wait until no retrain is pending or in flight."""
        with self._cv:
            return self._cv.wait_for(lambda: not self._dirty and not self._busy, timeout)

    def close(self) -> None:
        if self._worker is None:
            return
        with self._cv:
            self._stop_worker = True
            self._cv.notify_all()
        self._worker.join(timeout=10)
        self._worker = None

    def __enter__(self) -> "ScreeningEngine":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # --- views ---------------------------------------------------------------

    @property
    def dataset(self) -> corpus.Dataset:
        return self._dataset

    @property
    def settings(self) -> Settings:
        return self._settings

    @property
    def features(self) -> textfeat.FeatureMatrix:
        return self._features

    @property
    def events(self) -> tuple[LabelEvent, ...]:
        with self._cv:
            return tuple(self._events)

    @property
    def labels(self) -> dict[int, int]:
        with self._cv:
            return dict(self._labels)

    @property
    def scores(self) -> np.ndarray:
        with self._cv:
            return self._scores.copy()

    @property
    def ranking(self) -> list[int]:
        with self._cv:
            return list(self._ranking)

    @property
    def model(self) -> classify.Model | None:
        return self._model

    @property
    def model_version(self) -> int:
        return self._model_version

    @property
    def rng_cursor(self) -> int:
        return self._rng_cursor

    @property
    def presentation(self) -> tuple[int, str] | None:
        with self._cv:
            return self._presentation

    @property
    def busy(self) -> bool:
        with self._cv:
            return self._dirty or self._busy

    @property
    def n_labeled(self) -> int:
        return len(self._labels)

    @property
    def n_relevant(self) -> int:
        with self._cv:
            return sum(1 for v in self._labels.values() if v == 1)

    # --- export ---------------------------------------------------------------

    def export_results(self, fmt: str = "csv") -> bytes:
        """Labeled records in screening order, then the unlabeled pool in
        ranking order with an empty label; all metadata preserved."""
        fmt = fmt.lower()
        if fmt not in ("csv", "ris"):
            raise ValueError(f"unsupported export format {fmt!r}")
        with self._cv:
            records = [
                replace(self._dataset.records[e.row_id], label=e.label)
                for e in self._events
            ]
            records += [
                replace(self._dataset.records[row], label=None)
                for row in self._ranking
                if row not in self._labels
            ]
        if fmt == "csv":
            return corpus.write_csv(records)
        return corpus.write_ris(records)

    # --- persistence ------------------------------------------------------------

    def save_state(self) -> bytes:
        """Single-archive snapshot with a fixed entry order and fixed zip
        metadata, so identical state serializes to identical bytes."""
        with self._cv:
            manifest = {
                "format_version": STATE_FORMAT_VERSION,
                "dataset_fingerprint": self._dataset.fingerprint,
                "n_records": self._dataset.n_records,
                "settings": settings_to_dict(self._settings),
                "model_version": self._model_version,
                "model_trained_on": self._model_trained_on,
                "rng_cursor": self._rng_cursor,
                "suggest_counter": self._suggest_counter,
                "presentation": list(self._presentation) if self._presentation else None,
            }
            events_lines = ["order,row_id,label,source,model_version"]
            events_lines += [
                f"{e.order},{e.row_id},{e.label},{e.source},{e.model_version}"
                for e in self._events
            ]
            vocab_text = "\n".join(self._features.terms) + "\n"
            feature_lines = ["row,col,value"]
            feature_lines += [
                f"{r},{c},{v!r}" for r, c, v in self._features.to_triplets()
            ]
            model_obj = None
            if self._model is not None:
                m = self._model
                model_obj = {
                    "kind": m.kind,
                    "model_version": m.model_version,
                    "n_features": m.n_features,
                    "n_train": m.n_train,
                    "log_priors": None if m.log_priors is None else [float(x) for x in m.log_priors],
                    "log_theta": None if m.log_theta is None else [
                        [float(x) for x in row] for row in m.log_theta
                    ],
                    "weights": None if m.weights is None else [float(x) for x in m.weights],
                    "bias": float(m.bias),
                }
            ranking_lines = ["position,row_id,score"]
            ranking_lines += [
                f"{pos},{row},{float(self._scores[row])!r}"
                for pos, row in enumerate(self._ranking)
            ]

        buffer = io.BytesIO()
        with zipfile.ZipFile(buffer, "w", zipfile.ZIP_STORED) as archive:
            def add(name: str, text: str) -> None:
                info = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
                archive.writestr(info, text.encode("utf-8"))

            add("manifest.json", json.dumps(manifest, ensure_ascii=False, separators=(",", ":")))
            add("events.csv", "\n".join(events_lines) + "\n")
            add("vocabulary.txt", vocab_text)
            add("features.csv", "\n".join(feature_lines) + "\n")
            add("model.json", json.dumps(model_obj, ensure_ascii=False, separators=(",", ":")))
            add("ranking.csv", "\n".join(ranking_lines) + "\n")
        return buffer.getvalue()

    @classmethod
    def load_state(cls, data: bytes, dataset: corpus.Dataset,
                   synchronous: bool = True) -> "ScreeningEngine":
        """Inverse of save_state; requires the matching dataset."""
        try:
            archive = zipfile.ZipFile(io.BytesIO(data))
        except zipfile.BadZipFile:
            raise CorruptState("not a valid state archive") from None

        def read(name: str) -> str:
            try:
                return archive.read(name).decode("utf-8")
            except KeyError:
                raise CorruptState("missing archive entry", name) from None

        try:
            manifest = json.loads(read("manifest.json"))
        except json.JSONDecodeError as exc:
            raise CorruptState(f"bad JSON: {exc}", "manifest.json") from None
        version = manifest.get("format_version")
        if version != STATE_FORMAT_VERSION:
            raise VersionUnsupported(f"state format {version!r} is not supported")
        if manifest.get("dataset_fingerprint") != dataset.fingerprint:
            raise FingerprintMismatch(
                "state file was created from a different dataset"
            )
        if manifest.get("n_records") != dataset.n_records:
            raise CorruptState("record count mismatch", "manifest.n_records")
        try:
            settings = settings_from_dict(manifest["settings"])
            settings.validate()
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptState(f"bad settings: {exc}", "manifest.settings") from None

        terms = tuple(read("vocabulary.txt").splitlines())
        triplets = []
        try:
            for line in read("features.csv").splitlines()[1:]:
                r, c, v = line.split(",")
                triplets.append((int(r), int(c), float(v)))
        except ValueError as exc:
            raise CorruptState(f"bad triplet: {exc}", "features.csv") from None
        features = textfeat.FeatureMatrix.from_triplets(
            dataset.n_records, len(terms), triplets, terms
        )

        engine = cls(dataset, settings, features, synchronous=True)
        try:
            for line in read("events.csv").splitlines()[1:]:
                order, row, label, source, mv = line.split(",")
                if source not in EVENT_SOURCES:
                    raise ValueError(f"unknown source {source!r}")
                event = LabelEvent(int(order), int(row), int(label), source, int(mv))
                if event.order != len(engine._events) or not 0 <= event.row_id < dataset.n_records:
                    raise ValueError(f"inconsistent event {line!r}")
                engine._events.append(event)
                engine._labels[event.row_id] = event.label
        except ValueError as exc:
            raise CorruptState(str(exc), "events.csv") from None

        model_obj = json.loads(read("model.json"))
        if model_obj is not None:
            try:
                engine._model = classify.Model(
                    kind=model_obj["kind"],
                    n_features=model_obj["n_features"],
                    n_train=model_obj["n_train"],
                    model_version=model_obj["model_version"],
                    log_priors=None if model_obj["log_priors"] is None
                    else np.asarray(model_obj["log_priors"], dtype=np.float64),
                    log_theta=None if model_obj["log_theta"] is None
                    else np.asarray(model_obj["log_theta"], dtype=np.float64),
                    weights=None if model_obj["weights"] is None
                    else np.asarray(model_obj["weights"], dtype=np.float64),
                    bias=float(model_obj["bias"]),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise CorruptState(f"bad model: {exc}", "model.json") from None

        try:
            for line in read("ranking.csv").splitlines()[1:]:
                _, row, score = line.split(",")
                engine._ranking.append(int(row))
                engine._scores[int(row)] = float(score)
        except ValueError as exc:
            raise CorruptState(str(exc), "ranking.csv") from None

        engine._model_version = int(manifest.get("model_version", 0))
        engine._model_trained_on = int(manifest.get("model_trained_on", 0))
        engine._rng_cursor = int(manifest.get("rng_cursor", 0))
        engine._suggest_counter = int(manifest.get("suggest_counter", 0))
        presentation = manifest.get("presentation")
        if presentation is not None:
            engine._presentation = (int(presentation[0]), str(presentation[1]))
        if not synchronous:
            engine._synchronous = False
            engine._start_worker()
        return engine
