"""Generate the synthetic connectome fixture committed under fixtures/.

Produces an edge list with the statistical texture of a real synapse-count
export (heavy-tailed counts, hub-dominated in-degrees, a few self-loops and
duplicate rows) sized so that thresholding at 50 synapses leaves a network
of about 426 neurons. Deterministic; rerunning reproduces the committed
file byte for byte.
"""

import argparse
import sys

import numpy as np

sys.path.insert(0, "src")

from mfrc.topology import ingest_connectome  # noqa: E402

GENERATOR_SEED = 20240811
N_RAW = 455
THRESHOLD = 50


def build_edges(seed: int):
    rng = np.random.default_rng(seed)
    ids = np.sort(rng.choice(np.arange(5_400_000, 5_500_000), size=N_RAW, replace=False))

    # Hub-weighted target selection: a small population of highly connected
    # neurons, the rest sparsely wired.
    attractiveness = rng.lognormal(mean=0.0, sigma=1.1, size=N_RAW)
    attractiveness /= attractiveness.sum()

    # Wiring first (hub-dominated), then one synapse count per unique pair.
    # Most contacts are weak (below the 50-synapse threshold); surviving
    # strong contacts spread evenly up to ~160 synapses so the min-max
    # weight map covers [-1, 1] instead of piling up at the ends.
    pairs = set()
    out_degree = np.clip(rng.lognormal(mean=3.35, sigma=0.55, size=N_RAW), 3, 140)
    for i in range(N_RAW):
        k = int(round(out_degree[i]))
        targets = rng.choice(N_RAW, size=k, replace=True, p=attractiveness)
        pairs.update((i, int(j)) for j in targets if int(j) != i)
    edges = {}
    for i, j in sorted(pairs):
        if rng.random() < 0.72:
            count = int(rng.integers(1, 50))
        else:
            count = int(rng.integers(50, 161))
        edges[(int(ids[i]), int(ids[j]))] = count

    rows = [(pre, post, count) for (pre, post), count in sorted(edges.items())]

    # A few strong self-loops and duplicate rows so ingestion rules
    # (diagonal zeroing, duplicate merging) are exercised by the fixture.
    loop_ids = rng.choice(N_RAW, size=3, replace=False)
    for i in loop_ids:
        rows.append((int(ids[i]), int(ids[i]), int(rng.integers(80, 160))))
    splittable = [i for i, (_, _, c) in enumerate(rows) if c >= 4]
    dup_sources = rng.choice(splittable, size=4, replace=False)
    for idx in sorted(dup_sources):
        pre, post, count = rows[idx]
        half = count // 2
        rows[idx] = (pre, post, count - half)
        rows.append((pre, post, half))
    return rows


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="fixtures/synthetic_connectome.csv")
    parser.add_argument("--seed", type=int, default=GENERATOR_SEED)
    args = parser.parse_args()

    rows = build_edges(args.seed)
    matrix = ingest_connectome(rows, THRESHOLD)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("# synthetic connectome fixture (not biological data)\n")
        fh.write(f"# generator: scripts/make_connectome_fixture.py, seed {args.seed}\n")
        fh.write("pre_id,post_id,synapse_count\n")
        for pre, post, count in rows:
            fh.write(f"{pre},{post},{count}\n")
    print(f"wrote {args.out}: {len(rows)} raw edges; at threshold {THRESHOLD}: "
          f"n={matrix.n}, edges={matrix.entries.nnz}, "
          f"spectral_radius={matrix.spectral_radius:.4f}")


if __name__ == "__main__":
    main()
