"""Instance builders shared by the test modules."""

import numpy as np

from overlapix.oracle import GenerationConfig


def random_config(seed: int, n_max: int = 12, **overrides) -> GenerationConfig:
    """A seeded generator config whose shape also varies with the seed."""
    rng = np.random.default_rng([seed, 9001])
    n_chars = int(rng.integers(1, 4))
    kw = dict(
        n_studies=int(rng.integers(2, n_max + 1)),
        collective_size=int(rng.integers(15, 80)),
        study_size=(2, int(rng.integers(3, 12))),
        domain_sizes=tuple(int(m) for m in rng.integers(2, 7, size=n_chars)),
        n_ordered=int(rng.integers(0, n_chars + 1)),
        eligibility=float(rng.uniform(0.2, 0.9)),
        overlap_intensity=float(rng.uniform(0.0, 0.9)),
        padding=float(rng.choice([0.0, 0.0, 0.3])),
        seed=seed,
    )
    kw.update(overrides)
    return GenerationConfig(**kw)


def dense_envelope_file(seed: int = 51, n: int = 51, templates: int = 12) -> dict:
    """Many studies reporting one of a few shared envelopes.

    Studies drawn from the same template have potential one with each other,
    so dozens of combinations reach the maximum, while templates over
    disjoint regions or years keep the overlap-free family non-trivial.
    """
    rng = np.random.default_rng(seed)
    regions = [f"region {r}" for r in range(8)]
    shapes = []
    for _ in range(templates):
        k = int(rng.integers(1, 3))
        regs = sorted(rng.choice(len(regions), size=k, replace=False).tolist())
        start = int(rng.integers(2010, 2018))
        end = start + int(rng.integers(0, 4))
        shapes.append(([regions[r] for r in regs], f"{start}..{end}"))
    studies = []
    for i in range(n):
        regs, span = shapes[int(rng.integers(templates))]
        studies.append(
            {
                "study_id": f"S{i + 1:02d}",
                "sample_size": int(rng.integers(50, 5000)),
                "ranges": {"region": regs, "year": span},
            }
        )
    return {
        "schema_version": 1,
        "characteristics": [
            {"id": "region", "kind": "categorical"},
            {"id": "year", "kind": "ordered", "order_key": "integer"},
        ],
        "studies": studies,
    }


def envelope_strategy(max_studies: int = 8, max_chars: int = 3, max_atoms: int = 5):
    """Hypothesis strategy: (envelopes, characteristics) with random ranges."""
    from hypothesis import strategies as st

    from overlapix.model import Characteristic, StudyEnvelope

    @st.composite
    def build(draw):
        n = draw(st.integers(2, max_studies))
        n_chars = draw(st.integers(1, max_chars))
        sizes = [draw(st.integers(1, max_atoms)) for _ in range(n_chars)]
        chars = [Characteristic(f"k{k}") for k in range(n_chars)]
        envs = []
        for i in range(n):
            ranges = {}
            for k, m in enumerate(sizes):
                picked = draw(st.sets(st.integers(0, m - 1), min_size=1))
                ranges[f"k{k}"] = [f"a{a}" for a in picked]
            envs.append(StudyEnvelope.from_sets(f"S{i + 1}", draw(st.integers(1, 500)), ranges))
        return envs, chars

    return build()


def encoded_of(envs, chars, scheme="singleton"):
    from overlapix.model import build_global_domains, encode, partition_domains

    part = partition_domains(build_global_domains(envs, chars), scheme)
    return encode(envs, part), part
