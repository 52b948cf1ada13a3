"""Smoke test for the rigidleak extension module.

Build and install first, e.g.
    maturin build --release -m crates/python/Cargo.toml -o dist && pip install dist/rigidleak-*.whl
"""

import json
import math
import random

import rigidleak


def dist(a, b):
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


def main():
    rng = random.Random(0)
    records = [[rng.gauss(2.0, 1.0) for _ in range(4)] for _ in range(60)]

    out = rigidleak.perturb(records, seed=7)
    released, perm = out["released"], out["permutation"]
    assert len(released) == 60 and sorted(perm) == list(range(60))
    for i in range(5):
        for j in range(i):
            d = dist(records[i], records[j])
            assert abs(dist(released[perm[i]], released[perm[j]]) - d) < 1e-9 * (1 + d)

    attack = rigidleak.known_input_attack(records[:4], released, epsilon=0.05, seed=1)
    assert len(attack["linked"]) == 4 and attack["rho"] == 1.0

    sample = rigidleak.known_sample_attack(records, released, seed=2, permutations=19)
    assert len(sample["estimates"]) == 60 and len(sample["signs"]) == 4

    m = rigidleak.evaluate([3.0, 4.0], [3.0, 4.5], 0.1)
    assert m["eps_breach"] and abs(m["relative_euclid"] - 0.1) < 1e-12

    assert rigidleak.breach_probability(2.0, 1.0, 0.1, 1) == 0.5
    assert rigidleak.min_eigen_ratio([[0.1, 0, 0], [0, 2, 0], [0, 0, 40]]) == 20.0
    assert rigidleak.invariance_gaussian([1.0, 2.0], 0.0, [[2.0, 0.0], [0.0, 1.0]]) == 0.0

    config = """
seed = 0
repetitions = 2
epsilon = 0.3
[data]
kind = "random_gaussian"
dim = 5
records = 80
[attack]
kind = "known_input"
known_inputs = [2, 5]
"""
    first = rigidleak.experiment(config, seed=3)
    assert first == rigidleak.experiment(config, seed=3)
    assert len(json.loads(first)["rows"]) == 4
    assert rigidleak.experiment(config, format="csv").startswith("kind,")

    try:
        rigidleak.evaluate([0.0, 0.0], [1.0, 1.0], 0.1)
    except ValueError:
        pass
    else:
        raise AssertionError("zero record should raise")

    print("smoke test passed")


if __name__ == "__main__":
    main()
