"""Write synthetic encounter files whose order counts match the official train/dev splits.

Usage: python scripts/make_synthetic_dataset.py [OUT_DIR]

The files stand in for the shared-task data when it is not available; only
the per-type order counts are meant to be realistic.
"""

import json
import random
import sys
from pathlib import Path

from orderpipe.transcript import REFERENCE_STATS

ORDER_LINES = {
    "medication": [
        ("lisinopril 10 milligrams daily", "high blood pressure"),
        ("metformin 500 milligrams twice a day", "type two diabetes"),
        ("ibuprofen 600 milligrams as needed", "knee pain"),
        ("amoxicillin 500 milligrams three times a day", "ear infection"),
    ],
    "lab": [
        ("hemoglobin a1c", "diabetes"),
        ("complete blood count", "fatigue"),
        ("lipid panel", "high cholesterol"),
        ("urinalysis", "urinary symptoms"),
    ],
    "imaging": [
        ("chest x-ray", "cough"),
        ("mri of the lumbar spine", "back pain"),
        ("ultrasound of the abdomen", "abdominal pain"),
    ],
    "followup": [
        ("follow up in two weeks", "blood pressure check"),
        ("return visit in three months", "diabetes management"),
    ],
}


def make_split(name: str, seed: int) -> list[dict]:
    ref = REFERENCE_STATS[name]
    rng = random.Random(seed)
    kinds = [k for k in ORDER_LINES for _ in range(ref[k])]
    rng.shuffle(kinds)
    n = ref["encounters"]
    buckets: list[list[str]] = [[] for _ in range(n)]
    for k, kind in enumerate(kinds):
        # every encounter gets at least one order while they last
        buckets[k if k < n else rng.randrange(n)].append(kind)
    records = []
    for i, bucket in enumerate(buckets):
        turns = [{"turn_id": 0, "speaker": "doctor", "text": "hi, what brings you in today?"},
                 {"turn_id": 1, "speaker": "patient", "text": "i have not been feeling well."}]
        orders = []
        for kind in bucket:
            desc, reason = rng.choice(ORDER_LINES[kind])
            t = len(turns)
            turns.append({"turn_id": t, "speaker": "doctor", "text": f"for your {reason}, let's do {desc}."})
            turns.append({"turn_id": t + 1, "speaker": "patient", "text": "okay."})
            orders.append({"order_type": kind, "description": desc, "reason": reason, "provenance": [t]})
        records.append({"id": f"synthetic-{name}-{i:03d}", "transcript": turns, "expected_orders": orders})
    return records


def main(out_dir: str = "tests/data") -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for seed, name in enumerate(("train", "dev")):
        path = out / f"synthetic_{name}.json"
        path.write_text(json.dumps(make_split(name, seed), indent=1) + "\n", encoding="utf-8")
        print(f"wrote {path}")


if __name__ == "__main__":
    main(*sys.argv[1:])
