"""Directed connection-probability graph: construction, ingestion, synthesis,
statistics, community clustering, and substructure ablation.

Orientation convention: ``matrix[i, j]`` is the connection probability from
presynaptic category ``j`` to postsynaptic category ``i`` (rows = targets,
columns = sources).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import CircuitFormatError, ConfigError, GroupError

PORT_KINDS = ("internal", "input", "output")


@dataclass(frozen=True, eq=False)
class Circuit:
    """Immutable weighted directed graph over named node categories."""

    node_names: tuple[str, ...]
    matrix: np.ndarray
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        names = tuple(self.node_names)
        object.__setattr__(self, "node_names", names)
        mat = np.asarray(self.matrix, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise CircuitFormatError(f"matrix must be square, got shape {mat.shape}")
        if mat.shape[0] != len(names):
            raise CircuitFormatError(
                f"matrix side {mat.shape[0]} does not match {len(names)} node names"
            )
        seen: dict[str, int] = {}
        for idx, name in enumerate(names):
            if name in seen:
                raise CircuitFormatError(
                    f"duplicate node name {name!r} at positions {seen[name]} and {idx}"
                )
            seen[name] = idx
        if not np.all(np.isfinite(mat)):
            i, j = np.argwhere(~np.isfinite(mat))[0]
            raise CircuitFormatError(f"non-finite entry at row {i} ({names[i]}), column {j} ({names[j]})")
        bad = np.argwhere((mat < 0.0) | (mat > 1.0))
        if bad.size:
            i, j = bad[0]
            raise CircuitFormatError(
                f"probability out of range: entry {mat[i, j]!r} at row {i} ({names[i]}), "
                f"column {j} ({names[j]})"
            )
        mat = mat.copy()
        mat.flags.writeable = False
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "_index", seen)

    @property
    def n(self) -> int:
        return len(self.node_names)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise GroupError(f"unknown node name: {name!r}") from None

    def indices(self, names: Iterable[str]) -> np.ndarray:
        return np.array(sorted(self.index(n) for n in names), dtype=int)


@dataclass(frozen=True)
class GroupConfig:
    """Named mesoscopic substructures (node sets) with port flags."""

    groups: dict[str, frozenset[str]]
    port_flags: dict[str, str]

    def __post_init__(self):
        groups = {name: frozenset(nodes) for name, nodes in self.groups.items()}
        flags = dict(self.port_flags)
        for name, nodes in groups.items():
            if not nodes:
                raise GroupError(f"group {name!r} is empty")
            flags.setdefault(name, "internal")
        for name, flag in flags.items():
            if name not in groups:
                raise GroupError(f"port flag for unknown group {name!r}")
            if flag not in PORT_KINDS:
                raise GroupError(f"group {name!r} has invalid port flag {flag!r}")
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "port_flags", flags)

    def names(self) -> list[str]:
        return sorted(self.groups)

    def port(self, name: str) -> str:
        resolve_group(self, name)  # raise on unknown
        return self.port_flags[name]

    def groups_with_port(self, kind: str) -> list[str]:
        return sorted(g for g, f in self.port_flags.items() if f == kind)

    def validate_against(self, circuit: Circuit) -> None:
        known = set(circuit.node_names)
        for name, nodes in sorted(self.groups.items()):
            missing = sorted(nodes - known)
            if missing:
                raise GroupError(f"group {name!r} references unknown nodes: {missing}")


@dataclass(frozen=True)
class GraphStats:
    n: int
    nonzero_edges: int
    density: float
    spectral_radius: float
    prob_min: float | None
    prob_max: float | None

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "nonzero_edges": self.nonzero_edges,
            "density": self.density,
            "spectral_radius": self.spectral_radius,
            "prob_min": self.prob_min,
            "prob_max": self.prob_max,
        }


@dataclass(frozen=True)
class SynthesisSpec:
    """Targets for a statistics-matched surrogate connection matrix.

    ``input_rows`` lists node indices treated as input ports, whose diagonal
    cells (self-loops) are never populated.  ``None`` excludes every diagonal
    cell, the conservative default when port information is unavailable.
    """

    n: int
    nonzero_edges: int
    prob_range: tuple[float, float]
    target_spectral_radius: float
    seed: int
    input_rows: tuple[int, ...] | None = None

    def __post_init__(self):
        lo, hi = self.prob_range
        if self.n < 1:
            raise ConfigError(f"node count must be >= 1, got {self.n}")
        if self.nonzero_edges < 0 or self.nonzero_edges > self.n * self.n:
            raise ConfigError(f"edge count {self.nonzero_edges} out of range for n={self.n}")
        if not (0.0 < lo <= hi <= 1.0):
            raise ConfigError(f"prob_range must satisfy 0 < low <= high <= 1, got {self.prob_range}")
        if self.target_spectral_radius <= 0.0:
            raise ConfigError("target_spectral_radius must be positive")
        object.__setattr__(self, "prob_range", (float(lo), float(hi)))
        if self.input_rows is not None:
            rows = tuple(sorted(set(int(r) for r in self.input_rows)))
            if rows and (rows[0] < 0 or rows[-1] >= self.n):
                raise ConfigError(f"input_rows out of range for n={self.n}: {rows}")
            object.__setattr__(self, "input_rows", rows)


def load_circuit(path: str | Path) -> Circuit:
    """Read a connection-matrix document: {"nodes": [...], "matrix": [[...]], "metadata": {...}}.

    Rows of ``matrix`` are postsynaptic categories, in the order of ``nodes``.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise
    except (OSError, json.JSONDecodeError) as exc:
        raise CircuitFormatError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(raw, dict) or "nodes" not in raw or "matrix" not in raw:
        raise CircuitFormatError(f"{path}: document must contain 'nodes' and 'matrix' keys")
    nodes = raw["nodes"]
    matrix = raw["matrix"]
    if not isinstance(nodes, list) or not all(isinstance(n, str) for n in nodes):
        raise CircuitFormatError(f"{path}: 'nodes' must be a list of strings")
    if not isinstance(matrix, list) or any(not isinstance(row, list) for row in matrix):
        raise CircuitFormatError(f"{path}: 'matrix' must be a list of rows")
    lengths = {len(row) for row in matrix}
    if len(matrix) != len(nodes) or (lengths and lengths != {len(nodes)}):
        raise CircuitFormatError(
            f"{path}: matrix must be square with side {len(nodes)}; "
            f"got {len(matrix)} rows with lengths {sorted(lengths)}"
        )
    metadata = raw.get("metadata", {})
    if not isinstance(metadata, dict):
        raise CircuitFormatError(f"{path}: 'metadata' must be a mapping")
    metadata = {str(k): str(v) for k, v in metadata.items()}
    return Circuit(tuple(nodes), np.asarray(matrix, dtype=float), metadata)


def save_circuit(circuit: Circuit, path: str | Path) -> None:
    doc = {
        "nodes": list(circuit.node_names),
        "matrix": circuit.matrix.tolist(),
        "metadata": dict(sorted(circuit.metadata.items())),
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def synthesize_circuit(spec: SynthesisSpec, node_names: Sequence[str] | None = None) -> Circuit:
    """Generate a surrogate circuit matching the spec's published statistics.

    Edge positions are drawn uniformly without replacement from the eligible
    cells, magnitudes log-uniformly from ``prob_range``, and the whole matrix
    is rescaled multiplicatively so the spectral radius hits the target to
    1e-6 relative accuracy.  Entries are finally clamped to <= 1 and the
    post-clamp radius is recorded in the metadata.  Deterministic per seed.
    """
    n = spec.n
    if node_names is None:
        node_names = tuple(f"node_{i:02d}" for i in range(n))
    if len(node_names) != n:
        raise ConfigError(f"got {len(node_names)} node names for n={n}")

    eligible = np.ones((n, n), dtype=bool)
    if spec.input_rows is None:
        np.fill_diagonal(eligible, False)
    else:
        for r in spec.input_rows:
            eligible[r, r] = False
    flat = np.flatnonzero(eligible.ravel())
    if spec.nonzero_edges > flat.size:
        raise ConfigError(
            f"infeasible spec: {spec.nonzero_edges} edges requested but only "
            f"{flat.size} self-loop-excluded cells available"
        )

    rng = np.random.default_rng(spec.seed)
    cells = rng.choice(flat, size=spec.nonzero_edges, replace=False)
    lo, hi = spec.prob_range
    values = np.exp(rng.uniform(np.log(lo), np.log(hi), size=spec.nonzero_edges))

    mat = np.zeros((n, n), dtype=float)
    mat.ravel()[cells] = values

    radius = _spectral_radius(mat)
    if spec.nonzero_edges > 0 and radius <= 0.0:
        raise ConfigError(
            "infeasible spec: sampled edge placement is cycle-free (spectral radius 0), "
            "cannot rescale to a positive target"
        )
    if radius > 0.0:
        mat *= spec.target_spectral_radius / radius
    pre_clamp = _spectral_radius(mat)
    clamped = int(np.count_nonzero(mat > 1.0))
    mat = np.minimum(mat, 1.0)
    post_clamp = _spectral_radius(mat)

    metadata = {
        "source": "synthesized surrogate",
        "seed": str(spec.seed),
        "target_spectral_radius": repr(spec.target_spectral_radius),
        "pre_clamp_spectral_radius": repr(float(pre_clamp)),
        "post_clamp_spectral_radius": repr(float(post_clamp)),
        "clamped_entries": str(clamped),
    }
    return Circuit(tuple(node_names), mat, metadata)


def _spectral_radius(mat: np.ndarray) -> float:
    if mat.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(mat))))


def graph_stats(circuit: Circuit) -> GraphStats:
    """Node count, positive-edge count, exact density, spectral radius, and
    the range of strictly positive probabilities."""
    mat = circuit.matrix
    positive = mat > 0.0
    nonzero = int(np.count_nonzero(positive))
    density = nonzero / (circuit.n * circuit.n)
    if nonzero:
        vals = mat[positive]
        prob_min, prob_max = float(vals.min()), float(vals.max())
    else:
        prob_min = prob_max = None
    return GraphStats(
        n=circuit.n,
        nonzero_edges=nonzero,
        density=density,
        spectral_radius=_spectral_radius(mat),
        prob_min=prob_min,
        prob_max=prob_max,
    )


def ablate(circuit: Circuit, group: Iterable[str]) -> Circuit:
    """Zero every incoming and outgoing connection of the given node set.

    Returns a new Circuit; the input is never modified.
    """
    nodes = set(group)
    idx = circuit.indices(nodes)  # raises GroupError on unknown names
    mat = circuit.matrix.copy()
    if idx.size:
        mat[idx, :] = 0.0
        mat[:, idx] = 0.0
    metadata = dict(circuit.metadata)
    prior = metadata.get("ablated")
    tag = ",".join(sorted(nodes))
    metadata["ablated"] = f"{prior};{tag}" if prior else tag
    return Circuit(circuit.node_names, mat, metadata)


def resolve_group(config: GroupConfig, name: str) -> frozenset[str]:
    try:
        return config.groups[name]
    except KeyError:
        known = ", ".join(sorted(config.groups))
        raise GroupError(f"unknown group name: {name!r} (known groups: {known})") from None


def cluster_communities(circuit: Circuit, k: int) -> list[list[str]]:
    """Partition nodes into k communities by average-linkage agglomerative
    clustering of z-scored degree/strength feature vectors.

    Features per node: in-degree, out-degree, in-strength, out-strength
    (rows receive, columns send).  Merge ties break on the lowest node index,
    so the result is deterministic.  Clusters are returned ordered by their
    lowest member index.
    """
    n = circuit.n
    if not (1 <= k <= n):
        raise GroupError(f"cluster count k={k} out of range [1, {n}]")
    mat = circuit.matrix
    positive = mat > 0.0
    feats = np.column_stack([
        positive.sum(axis=1),  # in-degree (incoming edges land on rows)
        positive.sum(axis=0),  # out-degree
        mat.sum(axis=1),       # in-strength
        mat.sum(axis=0),       # out-strength
    ]).astype(float)
    mean = feats.mean(axis=0)
    std = feats.std(axis=0)
    std[std == 0.0] = 1.0  # constant feature carries no information
    feats = (feats - mean) / std

    diff = feats[:, None, :] - feats[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))

    clusters: list[list[int]] = [[i] for i in range(n)]
    while len(clusters) > k:
        best = None
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                d = dist[np.ix_(clusters[a], clusters[b])].mean()
                key = (d, clusters[a][0], clusters[b][0])
                if best is None or key < best[0]:
                    best = (key, a, b)
        _, a, b = best
        merged = sorted(clusters[a] + clusters[b])
        clusters = [c for i, c in enumerate(clusters) if i not in (a, b)]
        clusters.append(merged)
        clusters.sort(key=lambda c: c[0])
    return [[circuit.node_names[i] for i in c] for c in clusters]


def load_group_config(path: str | Path) -> GroupConfig:
    """Read a group document: map of group name -> {"nodes": [...], "port": "internal"|"input"|"output"}."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise
    except (OSError, json.JSONDecodeError) as exc:
        raise GroupError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise GroupError(f"{path}: document must be a mapping of group name to definition")
    groups: dict[str, frozenset[str]] = {}
    flags: dict[str, str] = {}
    for name, entry in raw.items():
        if not isinstance(entry, Mapping) or "nodes" not in entry:
            raise GroupError(f"{path}: group {name!r} must be a mapping with a 'nodes' list")
        groups[name] = frozenset(str(n) for n in entry["nodes"])
        flags[name] = str(entry.get("port", "internal"))
    return GroupConfig(groups, flags)


def save_group_config(config: GroupConfig, path: str | Path) -> None:
    doc = {
        name: {"nodes": sorted(nodes), "port": config.port_flags[name]}
        for name, nodes in sorted(config.groups.items())
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
