#!/usr/bin/env python3
"""Walkthrough: a complete screening session through the engine.

Priors train the first model, every label retrains and re-ranks the pool,
state survives a save/load round trip, and the export file carries the
labeled records first and the ranked remainder after them.
"""

from screenloop import parse_csv
from screenloop.engine import ScreeningEngine, Settings
from screenloop.errors import PoolExhausted

rows = ["title,abstract"]
for i in range(12):
    topic = "active learning screening" if i % 4 == 0 else "glacier mass balance"
    rows.append(f"study {i},{topic} variant {i}")
ds = parse_csv(("\n".join(rows) + "\n").encode())

# the reviewer knows row 0 is relevant and row 1 is not
engine = ScreeningEngine.create(ds, Settings(seed=11), prior_included=[0], prior_excluded=[1])
print(f"model v{engine.model_version} trained on priors; "
      f"initial queue head: row {engine.next_record()}")

truth = [1 if i % 4 == 0 else 0 for i in range(12)]
while True:
    try:
        row = engine.next_record()
    except PoolExhausted:
        break
    event = engine.submit_label(row, truth[row])
    print(f"  screened row {row:2d} -> label {event.label} "
          f"(model v{event.model_version} proposed it)")

print(f"\nevent log: {len(engine.events)} events, "
      f"{engine.n_relevant} relevant found")

blob = engine.save_state()
restored = ScreeningEngine.load_state(blob, ds)
print(f"state file: {len(blob)} bytes; "
      f"round trip byte-identical: {restored.save_state() == blob}")

print("\nexport (labeled first, in screening order):")
for line in engine.export_results("csv").decode().splitlines()[:6]:
    print("  " + line)
