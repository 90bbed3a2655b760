#!/usr/bin/env python3
"""Generate the synthetic hallmark corpora under fixtures/ and count their labels.

The counts in fixtures/manifest.json are produced here by plain counting over
the written files, independently of the Rust loader.
"""
import json
import random
from pathlib import Path

TOPICS = [
    "Sustaining proliferative signaling",
    "Resisting cell death",
    "Activating invasion and metastasis",
    "Genomic instability and mutation",
    "Tumor promoting inflammation",
    "Inducing angiogenesis",
    "Evading growth suppressors",
    "Enabling replicative immortality",
    "Avoiding immune destruction",
    "Cellular energetics",
]

# Relative label frequencies, descending in taxonomy order.
WEIGHTS = [0.30, 0.24, 0.17, 0.16, 0.13, 0.11, 0.095, 0.07, 0.06, 0.045]

STOP = {"and", "the", "of"}

FILLER = (
    "cells expression protein patients levels study results observed increased analysis "
    "samples treatment pathway response activity significantly associated showed reduced "
    "model human lines mice data role regulation factor target clinical cancer carcinoma "
    "receptor kinase binding tissue primary phosphorylation inhibitor downstream mediated "
    "vitro vivo assay knockdown overexpression correlated survival cohort marker staining "
    "therapy dose compared higher lower early late stage breast lung colon liver gastric"
).split()


def cue_words(name):
    return [w.lower() for w in name.split() if len(w) >= 5 and w.lower() not in STOP]


def draw_labels(rng):
    r = rng.random()
    n = 0 if r < 0.10 else 1 if r < 0.80 else 2 if r < 0.97 else 3
    pool = list(range(len(TOPICS)))
    chosen = []
    for _ in range(n):
        w = [WEIGHTS[i] for i in pool]
        pick = rng.choices(pool, weights=w, k=1)[0]
        chosen.append(pick)
        pool.remove(pick)
    return sorted(chosen)


def make_text(rng, labels):
    length = rng.choice([rng.randint(8, 24)] * 9 + [rng.randint(55, 90)])
    words = [rng.choice(FILLER) for _ in range(length)]
    for j in labels:
        pos = rng.randrange(len(words) + 1)
        words.insert(pos, rng.choice(cue_words(TOPICS[j])))
    words[0] = words[0].capitalize()
    return " ".join(words) + "."


def generate(path, n, seed, prefix):
    rng = random.Random(seed)
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(n):
            labels = draw_labels(rng)
            rec = {
                "id": f"{prefix}-{i:04d}",
                "text": make_text(rng, labels),
                "labels": [TOPICS[j] for j in labels],
            }
            fh.write(json.dumps(rec) + "\n")


def count(path):
    counts = {t: 0 for t in TOPICS}
    docs = 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            docs += 1
            for name in json.loads(line)["labels"]:
                counts[name] += 1
    return {"documents": docs, "label_counts": [counts[t] for t in TOPICS]}


def main():
    out = Path(__file__).resolve().parent.parent / "fixtures"
    out.mkdir(exist_ok=True)
    specs = [
        ("hoc_synthetic_1499.jsonl", 1499, 1499, "hoc"),
        ("hoc_synthetic_1000.jsonl", 1000, 1000, "fig"),
        ("hoc_synthetic_100.jsonl", 100, 100, "doc"),
        ("exemplar_pool.jsonl", 10, 7, "ex"),
    ]
    manifest = {"topics": TOPICS, "files": {}}
    for name, n, seed, prefix in specs:
        generate(out / name, n, seed, prefix)
        manifest["files"][name] = count(out / name)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


if __name__ == "__main__":
    main()
