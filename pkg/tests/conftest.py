"""Shared test helpers."""

import random

from perfopt.bow import BowVector


def make_clustered_vectors(n=1803, clusters=40, vocab=60, seed=7):
    """Synthetic corpus with planted cluster structure.

    Members of a cluster share a weighted term base plus per-member noise, so
    true nearest neighbors live in the same cluster. A uniform random corpus
    would make partition probing meaningless; real code corpora are clumpy,
    and this models that. Entries carry no cost annotation.
    """
    rng = random.Random(seed)
    terms = [f"t{i}" for i in range(vocab)]
    bases = []
    for _ in range(clusters):
        size = min(len(terms), rng.randint(8, 14))
        chosen = rng.sample(terms, size)
        bases.append({t: rng.uniform(1.0, 5.0) for t in chosen})
    entries = []
    for i in range(n):
        base = bases[i % clusters]
        counts = {t: max(0.2, w + rng.gauss(0.0, 0.35)) for t, w in base.items()}
        if rng.random() < 0.3:
            stray = rng.choice(terms)
            counts[stray] = counts.get(stray, 0.0) + rng.uniform(0.2, 1.0)
        entries.append((f"v{i:04d}", BowVector(counts), None))
    return entries


def perturb_vector(vec, rng):
    counts = {t: max(0.05, w + rng.gauss(0.0, 0.1)) for t, w in vec.counts.items()}
    return BowVector(counts)
