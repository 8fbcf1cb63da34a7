"""Reservoir coupling matrices: random and connectome-derived.

Builds the internal coupling matrix M (weighted Erdos-Renyi or thresholded
connectome edge list), scales it to a target spectral radius, and builds the
one-nonzero-per-row input matrix W_in.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigs

from .errors import (
    EdgeFormatError,
    EmptyNetworkError,
    SpectralRadiusError,
    UnscalableMatrixError,
)

# Below this size a dense eigensolve is both faster and exact enough that the
# iterative path adds nothing.
_DENSE_CUTOFF = 64
_MAX_DENSE_FALLBACK = 1000
_POWER_MAXITER = 10_000


@dataclass(frozen=True)
class ErdosRenyiProvenance:
    seed: int
    sparsity: float

    kind = "erdos_renyi"


@dataclass(frozen=True)
class ConnectomeProvenance:
    source_id: str
    synapse_threshold: int

    kind = "connectome"


@dataclass
class AdjacencyMatrix:
    """Sparse coupling matrix with its spectral radius recorded at build time."""

    n: int
    entries: sp.csr_matrix
    spectral_radius: float
    provenance: ErdosRenyiProvenance | ConnectomeProvenance | None = None
    labels: list | None = None  # original node labels, index-aligned (connectome)

    @classmethod
    def from_array(cls, array, provenance=None, labels=None) -> "AdjacencyMatrix":
        entries = sp.csr_matrix(np.asarray(array, dtype=float))
        rho = compute_spectral_radius(entries)
        return cls(n=entries.shape[0], entries=entries, spectral_radius=rho,
                   provenance=provenance, labels=labels)

    def toarray(self) -> np.ndarray:
        return self.entries.toarray()


def generate_erdos_renyi(n: int, sparsity: float, rng_seed: int) -> AdjacencyMatrix:
    """Weighted Erdos-Renyi coupling matrix.

    Every entry (diagonal included) is independently nonzero with probability
    `sparsity`; nonzero weights are uniform on [-1, 1]. The matrix is left
    unscaled; its spectral radius is recorded for later scaling. The same
    seed reproduces the same matrix bit for bit.
    """
    if n < 1:
        raise EmptyNetworkError(f"reservoir needs at least one node, got n={n}")
    if not 0.0 <= sparsity <= 1.0:
        raise ValueError(f"sparsity must lie in [0, 1], got {sparsity}")
    rng = np.random.default_rng(rng_seed)
    mask = rng.random((n, n)) < sparsity
    weights = rng.uniform(-1.0, 1.0, size=(n, n))
    entries = sp.csr_matrix(np.where(mask, weights, 0.0))
    rho = compute_spectral_radius(entries)
    return AdjacencyMatrix(n=n, entries=entries, spectral_radius=rho,
                           provenance=ErdosRenyiProvenance(seed=rng_seed, sparsity=sparsity))


def _sort_labels(labels):
    # Numeric IDs sort numerically, anything else lexicographically, so that
    # re-indexing is stable regardless of how labels were written in a file.
    try:
        return sorted(labels, key=int)
    except (TypeError, ValueError):
        return sorted(labels, key=str)


def ingest_connectome(edges, synapse_threshold: int, source_id: str = "") -> AdjacencyMatrix:
    """Build a coupling matrix from a connectome edge list.

    Duplicate (pre, post) pairs are merged by summing synapse counts, edges
    below the threshold are dropped, surviving nodes are densely re-indexed
    in sorted label order, and counts are mapped linearly onto [-1, 1]
    (minimum surviving count -> -1, maximum -> +1; all equal -> 0).
    Self-connections are removed: the diagonal is identically zero.
    """
    if isinstance(edges, ConnectomeEdgeList):
        edges = edges.edges
    edges = list(edges)
    if not edges:
        raise EmptyNetworkError("edge list is empty")
    if synapse_threshold < 1:
        raise ValueError(f"synapse_threshold must be >= 1, got {synapse_threshold}")

    merged: dict[tuple, int] = {}
    for pre, post, count in edges:
        if int(count) != count or count < 1:
            raise EdgeFormatError(
                f"synapse count must be a positive integer, got {count!r} for edge ({pre!r}, {post!r})")
        key = (pre, post)
        merged[key] = merged.get(key, 0) + int(count)

    survivors = {k: c for k, c in merged.items() if c >= synapse_threshold}
    if not survivors:
        raise EmptyNetworkError(
            f"no edges survive synapse threshold {synapse_threshold}")

    nodes = _sort_labels({pre for pre, _ in survivors} | {post for _, post in survivors})
    index = {label: i for i, label in enumerate(nodes)}
    n = len(nodes)

    counts = np.array(list(survivors.values()), dtype=float)
    cmin, cmax = counts.min(), counts.max()

    rows, cols, vals = [], [], []
    for (pre, post), count in survivors.items():
        i, j = index[pre], index[post]
        if i == j:
            continue  # self-connections removed; diagonal stays exactly zero
        if cmin == cmax:
            w = 0.0
        else:
            w = -1.0 + 2.0 * (count - cmin) / (cmax - cmin)
        rows.append(i)
        cols.append(j)
        vals.append(w)

    # Surviving zero-weight edges are kept as explicit entries so the graph
    # structure round-trips through export/import.
    entries = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    rho = compute_spectral_radius(entries)
    return AdjacencyMatrix(
        n=n, entries=entries, spectral_radius=rho,
        provenance=ConnectomeProvenance(source_id=source_id, synapse_threshold=synapse_threshold),
        labels=nodes)


@dataclass
class ConnectomeEdgeList:
    """Directed edges (pre, post, synapse_count) read from a delimited file."""

    edges: list = field(default_factory=list)

    @classmethod
    def from_file(cls, path) -> "ConnectomeEdgeList":
        return cls(edges=read_edge_list(path))


def read_edge_list(path) -> list:
    """Read `pre_id,post_id,synapse_count` rows; '#' lines are comments."""
    edges = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if parts == ["pre_id", "post_id", "synapse_count"]:
                continue
            if len(parts) != 3:
                raise EdgeFormatError(f"{path}:{lineno}: expected 3 fields, got {len(parts)}")
            pre, post, count_text = parts
            try:
                count = int(count_text)
            except ValueError:
                raise EdgeFormatError(
                    f"{path}:{lineno}: synapse_count must be an integer, got {count_text!r}") from None
            if count < 1:
                raise EdgeFormatError(f"{path}:{lineno}: synapse_count must be >= 1, got {count}")
            edges.append((pre, post, count))
    if not edges:
        raise EmptyNetworkError(f"no edges found in {path}")
    return edges


def _dense_spectral_radius(entries) -> float:
    dense = entries.toarray() if sp.issparse(entries) else np.asarray(entries, dtype=float)
    if dense.size == 0:
        return 0.0
    return float(np.abs(np.linalg.eigvals(dense)).max())


def compute_spectral_radius(entries, maxiter: int = _POWER_MAXITER) -> float:
    """Largest eigenvalue magnitude of a (sparse) matrix.

    Small matrices use a dense eigensolve directly; larger ones use ARPACK
    with a fixed start vector (deterministic) and fall back to the dense
    solver on non-convergence while the size still permits it.
    """
    if sp.issparse(entries):
        matrix = entries.tocsr()
    else:
        matrix = sp.csr_matrix(np.asarray(entries, dtype=float))
    n = matrix.shape[0]
    if n < 1:
        raise EmptyNetworkError("cannot take the spectral radius of an empty matrix")
    if matrix.nnz == 0 or np.all(matrix.data == 0.0):
        return 0.0
    if n <= _DENSE_CUTOFF:
        return _dense_spectral_radius(matrix)
    v0 = np.ones(n)
    try:
        vals = eigs(matrix, k=1, which="LM", v0=v0, maxiter=maxiter,
                    return_eigenvectors=False)
        return float(np.abs(vals).max())
    except ArpackNoConvergence as exc:
        if n <= _MAX_DENSE_FALLBACK:
            return _dense_spectral_radius(matrix)
        last = float(np.abs(exc.eigenvalues).max()) if len(exc.eigenvalues) else None
        raise SpectralRadiusError(
            f"spectral radius estimate did not converge within {maxiter} iterations",
            last_estimate=last) from exc
    except ArpackError as exc:
        if n <= _MAX_DENSE_FALLBACK:
            return _dense_spectral_radius(matrix)
        raise SpectralRadiusError(f"eigensolver failed: {exc}") from exc


def spectral_radius(m) -> float:
    """Spectral radius of an AdjacencyMatrix (or any matrix-like)."""
    if isinstance(m, AdjacencyMatrix):
        return compute_spectral_radius(m.entries)
    return compute_spectral_radius(m)


def scale_to_spectral_radius(m: AdjacencyMatrix, target_rho: float) -> AdjacencyMatrix:
    """Rescale so the spectral radius equals `target_rho`.

    Multiplies every entry by target_rho / spectral_radius(m), using the
    radius recorded on the matrix. A zero target returns the zero matrix;
    a zero-radius matrix cannot be scaled to a positive target.
    """
    if target_rho < 0:
        raise ValueError(f"target spectral radius must be nonnegative, got {target_rho}")
    if target_rho == 0.0:
        entries = m.entries.copy()
        entries.data[:] = 0.0
        return AdjacencyMatrix(n=m.n, entries=entries, spectral_radius=0.0,
                               provenance=m.provenance, labels=m.labels)
    rho = m.spectral_radius
    if rho == 0.0:
        raise UnscalableMatrixError(
            "matrix has spectral radius 0 (zero or nilpotent); cannot scale to "
            f"target {target_rho}")
    entries = m.entries * (target_rho / rho)
    return AdjacencyMatrix(n=m.n, entries=entries, spectral_radius=target_rho,
                           provenance=m.provenance, labels=m.labels)


def generate_input_matrix(n: int, d: int, rng_seed: int) -> np.ndarray:
    """Input matrix W_in: each row has one nonzero, uniform on [-1, 1],
    in a uniformly chosen column."""
    if n < 1:
        raise EmptyNetworkError(f"input matrix needs at least one row, got n={n}")
    if d < 1:
        raise ValueError(f"input dimension must be >= 1, got {d}")
    rng = np.random.default_rng(rng_seed)
    cols = rng.integers(0, d, size=n)
    vals = rng.uniform(-1.0, 1.0, size=n)
    w_in = np.zeros((n, d))
    w_in[np.arange(n), cols] = vals
    return w_in


# ---------------------------------------------------------------------------
# Matrix export / import: triplet file plus sidecar metadata.
# ---------------------------------------------------------------------------

def export_matrix(m: AdjacencyMatrix, path) -> None:
    """Write `row,col,weight` triplets to `path` and metadata to `path + '.meta'`."""
    coo = m.entries.tocoo()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("row,col,weight\n")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i},{j},{v:.17g}\n")
    with open(str(path) + ".meta", "w", encoding="utf-8") as fh:
        fh.write(f"n = {m.n}\n")
        fh.write(f"spectral_radius = {m.spectral_radius:.17g}\n")
        prov = m.provenance
        if isinstance(prov, ErdosRenyiProvenance):
            fh.write("provenance = erdos_renyi\n")
            fh.write(f"seed = {prov.seed}\n")
            fh.write(f"sparsity = {prov.sparsity:.17g}\n")
        elif isinstance(prov, ConnectomeProvenance):
            fh.write("provenance = connectome\n")
            fh.write(f"source_id = {prov.source_id}\n")
            fh.write(f"synapse_threshold = {prov.synapse_threshold}\n")
        else:
            fh.write("provenance = unknown\n")
        if m.labels is not None:
            fh.write("labels = " + ",".join(str(x) for x in m.labels) + "\n")


def load_matrix(path) -> AdjacencyMatrix:
    """Inverse of export_matrix; weights round-trip exactly."""
    meta: dict[str, str] = {}
    with open(str(path) + ".meta", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or "=" not in line:
                continue
            key, value = line.split("=", 1)
            meta[key.strip()] = value.strip()
    n = int(meta["n"])
    rows, cols, vals = [], [], []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        if header.strip() != "row,col,weight":
            raise EdgeFormatError(f"{path}: expected 'row,col,weight' header")
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            i, j, v = line.split(",")
            rows.append(int(i))
            cols.append(int(j))
            vals.append(float(v))
    entries = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    provenance = None
    if meta.get("provenance") == "erdos_renyi":
        provenance = ErdosRenyiProvenance(seed=int(meta["seed"]), sparsity=float(meta["sparsity"]))
    elif meta.get("provenance") == "connectome":
        provenance = ConnectomeProvenance(source_id=meta.get("source_id", ""),
                                          synapse_threshold=int(meta["synapse_threshold"]))
    labels = None
    if "labels" in meta:
        labels = meta["labels"].split(",")
    return AdjacencyMatrix(n=n, entries=entries,
                           spectral_radius=float(meta["spectral_radius"]),
                           provenance=provenance, labels=labels)
