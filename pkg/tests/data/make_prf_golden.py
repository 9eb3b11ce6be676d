"""Regenerate prf_golden.json from a standalone splitmix64 reference.

Deliberately does not import lanekit: the file pins the package against an
independent transcription of the published algorithm.
"""

import json
import random
from pathlib import Path

MASK = (1 << 64) - 1


def splitmix64(state):
    state = (state + 0x9E3779B97F4A7C15) & MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return state, z ^ (z >> 31)


def finalize(z):
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def score(seed, doc_id):
    return finalize(seed ^ splitmix64(doc_id)[1])


def main():
    rng = random.Random(20240917)
    pairs = [(0, 0), (0, 1), (1, 0), (MASK, MASK), (MASK, 0), (0, MASK), (42, 7), (123, 7), (789, 7)]
    while len(pairs) < 100:
        pairs.append((rng.getrandbits(64), rng.getrandbits(rng.choice([20, 32, 64]))))
    doc = {
        "splitmix64_state0_output": f"{splitmix64(0)[1]:#018x}",
        "triples": [{"seed": str(s), "id": str(i), "score": str(score(s, i))} for s, i in pairs],
    }
    out = Path(__file__).with_name("prf_golden.json")
    out.write_text(json.dumps(doc, indent=1) + "\n")


if __name__ == "__main__":
    main()
