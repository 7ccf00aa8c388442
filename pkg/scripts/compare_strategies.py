"""Run every extraction strategy over one dataset and print a comparison table.

Examples:
    python scripts/compare_strategies.py --input dev/ --base-url http://localhost:8000/v1 --model medgemma-4b
    python scripts/compare_strategies.py --input dev/ --fixtures fixtures/4b   # replay a recorded run
"""

import argparse
import json
import logging
from pathlib import Path

from orderpipe.llm_gateway import HttpBackend, LLMSettings, ReplayBackend
from orderpipe.metrics import aggregate, score_encounter
from orderpipe.pipeline import run_batch
from orderpipe.strategies import ReactConfig
from orderpipe.transcript import load_dataset

LABELS = {"oneshot": "1-Shot", "react": "ReAct", "agentic": "Agentic Workflow"}


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--input", required=True)
    ap.add_argument("--split", default="custom", choices=["train", "dev", "custom"])
    ap.add_argument("--model", default="medgemma-4b")
    ap.add_argument("--base-url")
    ap.add_argument("--fixtures", help="replay from this fixture directory instead of calling --base-url")
    ap.add_argument("--strategies", default="oneshot,react,agentic")
    ap.add_argument("--concurrency", type=int, default=4)
    ap.add_argument("--out-dir", help="write predictions and reports here")
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING)

    if args.fixtures:
        backend = ReplayBackend(args.fixtures)
    elif args.base_url:
        backend = HttpBackend(args.base_url)
    else:
        ap.error("give --base-url or --fixtures")

    dataset = load_dataset(args.input, args.split)
    gold = [e for e in dataset if e.gold_orders is not None]
    print(f"{len(dataset)} encounters ({len(gold)} annotated), {dataset.stats.total} gold orders")

    rows = []
    for strategy in args.strategies.split(","):
        batch = run_batch(strategy, dataset.encounters, lambda e: backend, ReactConfig(),
                          LLMSettings(model=args.model), args.concurrency)
        preds = {r.encounter_id: r.orders for r in batch.results}
        report = aggregate([score_encounter(preds.get(e.id, []), e.gold_orders, e.id) for e in gold])
        rows.append((LABELS.get(strategy, strategy), report))
        if batch.failures:
            print(f"{strategy}: {len(batch.failures)} encounters failed")
        if args.out_dir:
            out = Path(args.out_dir)
            out.mkdir(parents=True, exist_ok=True)
            (out / f"{strategy}.predictions.json").write_text(
                json.dumps([r.to_record() for r in batch.results], indent=2) + "\n")
            (out / f"{strategy}.report.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")

    print(rows[0][1].table_header(args.model))
    for label, report in rows:
        print(report.table_row(label))


if __name__ == "__main__":
    main()
