#!/usr/bin/env python3
"""Regenerates the bundled synthetic replay fixture.

The records follow the MixInstruct line shape (id, instruction, input,
candidates[{model, text, scores{bartscore}}]). Scores are synthetic: each toy
model has a base mean in the -2.7 .. -3.9 range, plus a per-query difficulty
shift and per-candidate noise. Output is deterministic for a given seed.
"""
import argparse
import json
import random

MODELS = [
    ("toy-7b", -2.74),
    ("toy-12b", -3.05),
    ("toy-13b", -3.41),
    ("toy-3b", -3.88),
]

VERBS = ["Summarize", "Explain", "Rewrite", "Classify", "Translate", "List", "Describe", "Compare"]
TOPICS = [
    "the water cycle", "a recipe for bread", "the causes of inflation", "how vaccines work",
    "the rules of chess", "a short poem about autumn", "the history of the printing press",
    "photosynthesis", "a job posting for a data analyst", "the plot of a mystery novel",
    "solar panels", "the difference between TCP and UDP",
]
FILLER = ("This passage provides background details that the answer should take into account. "
          "It may contain several sentences of context drawn from the original request. ")


def make_record(i, rng):
    instruction = f"{rng.choice(VERBS)} {rng.choice(TOPICS)}."
    inp = FILLER * rng.randint(0, 12)
    difficulty = rng.gauss(0.0, 0.3)
    candidates = []
    for name, mean in MODELS:
        score = mean + difficulty + rng.gauss(0.0, 0.35)
        candidates.append({
            "model": name,
            "decoding_method": "top_p_sampling",
            "text": f"Response from {name} to item {i}.",
            "scores": {"bartscore": round(score, 4)},
        })
    return {"id": f"fixture_{i:03d}", "instruction": instruction, "input": inp.strip(), "candidates": candidates}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=20240601)
    ap.add_argument("--count", type=int, default=100)
    ap.add_argument("--out", default="data/fixture_mixinstruct.jsonl")
    args = ap.parse_args()
    rng = random.Random(args.seed)
    with open(args.out, "w", encoding="utf-8") as f:
        for i in range(args.count):
            f.write(json.dumps(make_record(i, rng), sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
