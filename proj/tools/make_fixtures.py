#!/usr/bin/env python3
"""Regenerates the committed scenario fixtures under scenarios/data/.

Deterministic: fixed RNG seed, floats rounded before writing. Run from the
repository root.
"""

import json
import pathlib
import random

ROOT = pathlib.Path(__file__).resolve().parent.parent
DATA = ROOT / "scenarios" / "data"

PODS = 100
ITEMS = [
    "usb_cable", "desk_lamp", "coffee_beans", "paperback", "headphones",
    "board_game", "water_bottle", "notebook", "phone_case", "backpack",
]


def write_jsonl(path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for row in rows:
            f.write(json.dumps(row, separators=(",", ":")) + "\n")


def gen_ads(rng):
    rows = []
    for pod in range(PODS):
        purchases = []
        for _ in range(rng.randint(1, 4)):
            item = rng.choice(ITEMS)
            purchases.append({"item": item, "price": round(rng.uniform(5, 80), 2)})
        if rng.random() < 0.3:
            purchases.append({"item": "nintendo_switch", "price": 299.99})
        rows.append({
            "pod": pod,
            "source": "hw",
            "signer": "device_maker",
            "record": {"purchases": purchases},
        })
    return rows


def gen_dpquery(rng):
    return [{
        "pod": pod,
        "source": "org",
        "signer": "tax_office",
        "record": {"income": round(rng.uniform(18000, 95000), 2)},
    } for pod in range(PODS)]


def gen_fedavg(rng):
    return [{
        "pod": pod,
        "source": "alleged",
        "record": {"weights": [round(rng.uniform(-1.5, 1.5), 6) for _ in range(8)]},
    } for pod in range(PODS)]


def gen_survey(rng):
    rows = []
    for pod in range(PODS):
        answer = "yes" if rng.random() < 0.6 else "no"
        row = {
            "pod": pod,
            "source": "org",
            "signer": "survey_registry",
            "record": {"answer": answer},
        }
        if pod in (17, 58, 77, 91):          # never registered: alleged ballots
            row = {"pod": pod, "source": "alleged", "record": {"answer": answer}}
        elif pod in (23, 64):                # forged registry signatures
            row["badsig"] = True
        rows.append(row)
    return rows


def main():
    rng = random.Random(20260801)
    write_jsonl(DATA / "ads.jsonl", gen_ads(rng))
    write_jsonl(DATA / "dpquery.jsonl", gen_dpquery(rng))
    write_jsonl(DATA / "fedavg.jsonl", gen_fedavg(rng))
    write_jsonl(DATA / "survey.jsonl", gen_survey(rng))
    print("wrote fixtures to", DATA)


if __name__ == "__main__":
    main()
