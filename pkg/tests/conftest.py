"""Shared fixtures: tiny hand-written datasets and synthetic corpora.

Also collects `criterion`-marked acceptance tests and prints one PASS/FAIL
line per criterion at the end of the run.
"""

from __future__ import annotations

import pytest

from screenloop.corpus import Dataset, parse_csv
from screenloop.rng import Rng


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(name): named acceptance criterion"
    )
    config._criterion_results = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    name = marker.args[0]
    results = item.config._criterion_results
    if report.when == "setup" and report.skipped:
        results.append((name, "SKIP"))
    elif report.when == "call":
        results.append((name, "PASS" if report.outcome == "passed" else
                        "SKIP" if report.outcome == "skipped" else "FAIL"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "_criterion_results", [])
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in results:
        terminalreporter.write_line(f"{outcome:4s}  {name}")

PLANTED_TOKEN = "zetamarker"


def make_synthetic_dataset(
    n_records: int,
    n_relevant: int,
    seed: int = 0,
    n_noise_terms: int = 400,
    tokens_per_doc: int = 14,
    planted_copies: int = 2,
) -> Dataset:
    """Labeled corpus where relevant records share a planted topic token.

    Relevant rows are spread evenly through the file; everything else is
    noise drawn from a fixed vocabulary, so default settings must learn to
    chase the planted token.  Like a real topical abstract, a relevant
    record mentions its topic more than once (planted_copies).
    """
    rng = Rng(seed)
    relevant_rows = set(
        round(i * n_records / n_relevant) for i in range(n_relevant)
    )
    while len(relevant_rows) < n_relevant:  # collisions from rounding
        relevant_rows.add(rng.randint(n_records))
    lines = ["title,abstract,label_included"]
    for i in range(n_records):
        words = [f"w{rng.randint(n_noise_terms):03d}" for _ in range(tokens_per_doc)]
        relevant = i in relevant_rows
        if relevant:
            for _ in range(planted_copies):
                words.insert(rng.randint(len(words)), PLANTED_TOKEN)
        lines.append(f"record {i:04d},{' '.join(words)},{1 if relevant else 0}")
    return parse_csv(("\n".join(lines) + "\n").encode("utf-8"))


@pytest.fixture(scope="session")
def tiny_labeled_dataset() -> Dataset:
    """20 records, 4 relevant, separable by the shared 'magic' token."""
    lines = ["title,abstract,label_included"]
    for i in range(20):
        relevant = i % 5 == 0
        body = "magic signal study" if relevant else "plain filler words"
        lines.append(f"doc {i},{body} number{i},{1 if relevant else 0}")
    return parse_csv(("\n".join(lines) + "\n").encode("utf-8"))


@pytest.fixture(scope="session")
def synthetic_dataset_small() -> Dataset:
    return make_synthetic_dataset(120, 10, seed=3)
