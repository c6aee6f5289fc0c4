"""Default 52-category node catalog and mesoscopic group definitions for the
zebrafish visual-motor abstraction.

Node naming follows retinotectal organization: retinal ganglion cell (RGC)
input classes tagged by tectal termination lamina (SO, SFGS1-6, SGC/SAC,
SPV), tectal interneurons (TINs) split into excitatory ``e_`` and inhibitory
``i_`` categories per lamina, a non-stratified (``ns``) TIN pair, deep
SGC/SAC-layer TINs, superficial inhibitory neurons (SINs), the two tectal
projection neuron classes (TPN-E, TPN-O), downstream motor-related units,
and one task readout category.

Only the group names and the published cardinalities of the named example
groups are constrained; the per-node membership below is this package's
default and can be replaced with a user-supplied group document.
"""
from __future__ import annotations

import numpy as np

from .circuit import GroupConfig, SynthesisSpec

RGC_NODES = (
    "SO_A_RGC",
    "SO_B_RGC",
    "SFGS1_RGC",
    "SFGS2_RGC",
    "SFGS3_RGC",
    "SFGS4_RGC",
    "SFGS5_RGC",
    "SFGS6_RGC",
    "SGC_SAC_P_RGC",
    "SPV_multi_RGC",
)

# Superficial TINs: one excitatory/inhibitory pair per SO/SFGS lamina plus
# bistratified and multistratified pairs (22 categories).
_SUPERFICIAL_LAYERS = ("SO", "S1", "S2", "S3", "S4", "S5", "S6", "S12", "S34", "S56", "SFGS_multi")
SUPERFICIAL_TIN_NODES = tuple(
    f"{sign}_{layer}_TIN" for layer in _SUPERFICIAL_LAYERS for sign in ("e", "i")
)

NS_TIN_NODES = ("e_ns_TIN", "i_ns_TIN")

DEEP_TIN_NODES = (
    "e_SGC_TIN_a",
    "e_SGC_TIN_b",
    "i_SGC_TIN_a",
    "i_SGC_TIN_b",
    "e_SAC_TIN_a",
    "e_SAC_TIN_b",
    "i_SAC_TIN_a",
    "i_SAC_TIN_b",
    "e_SGC_SAC_TIN",
    "i_SGC_SAC_TIN",
)

SIN_NODES = ("i_SIN_SO", "i_SIN_SFGS")
TPN_NODES = ("TPN-E", "TPN-O")
MOTOR_NODES = ("nMLF_motor", "RS_premotor", "HB_premotor")
READOUT_NODES = ("task_readout",)

DEFAULT_NODES: tuple[str, ...] = (
    RGC_NODES
    + SUPERFICIAL_TIN_NODES
    + NS_TIN_NODES
    + DEEP_TIN_NODES
    + SIN_NODES
    + TPN_NODES
    + MOTOR_NODES
    + READOUT_NODES
)
assert len(DEFAULT_NODES) == 52

# Published graph statistics used as synthesis targets for the surrogate.
SURROGATE_N = 52
SURROGATE_EDGES = 938
SURROGATE_PROB_RANGE = (0.000271, 0.285035)
SURROGATE_SPECTRAL_RADIUS = 1.5173

# Propagation pathways: source group -> target group.
DEFAULT_PATHWAYS = {
    "R2O": ("RGC_input", "TPN_O"),
    "R2E": ("RGC_input", "TPN_E"),
}

# Canonical ablation sweep over the named mesoscopic substructures.
DEFAULT_SWEEP_GROUPS = (
    "RGC_input",
    "ns_TIN",
    "S12_group",
    "TPN_output",
    "superficial_TIN",
    "deep_TIN",
    "SGC_group",
)


def _layer_group(tag: str) -> frozenset[str]:
    pair = tag[1:]  # "S12" -> "12"
    members = [
        f"{sign}_S{d}_TIN" for d in pair for sign in ("e", "i")
    ] + [f"{sign}_{tag}_TIN" for sign in ("e", "i")]
    return frozenset(members)


def default_groups() -> GroupConfig:
    """Built-in GroupConfig covering the named mesoscopic substructures."""
    tin_nodes = SUPERFICIAL_TIN_NODES + NS_TIN_NODES + DEEP_TIN_NODES
    groups: dict[str, frozenset[str]] = {
        "RGC_input": frozenset(RGC_NODES),
        "TPN_output": frozenset(TPN_NODES),
        "TPN_E": frozenset({"TPN-E"}),
        "TPN_O": frozenset({"TPN-O"}),
        "ns_TIN": frozenset(NS_TIN_NODES),
        "superficial_TIN": frozenset(SUPERFICIAL_TIN_NODES),
        "deep_TIN": frozenset(DEEP_TIN_NODES),
        "excitatory_TIN": frozenset(n for n in tin_nodes if n.startswith("e_")),
        "inhibitory_TIN": frozenset(n for n in tin_nodes if n.startswith("i_")),
        "S12_group": _layer_group("S12"),
        "S34_group": _layer_group("S34"),
        "S56_group": _layer_group("S56"),
        "SGC_group": frozenset(n for n in DEEP_TIN_NODES if "SGC" in n),
        "SAC_group": frozenset(n for n in DEEP_TIN_NODES if "SAC" in n),
        "SIN_hub": frozenset(SIN_NODES),
        "TPN_hub": frozenset(TPN_NODES),
        "integration_hubs": frozenset(SIN_NODES + TPN_NODES),
        "motor_related": frozenset(MOTOR_NODES),
    }
    flags = {name: "internal" for name in groups}
    flags["RGC_input"] = "input"
    flags["TPN_output"] = "output"
    flags["TPN_E"] = "output"
    flags["TPN_O"] = "output"
    return GroupConfig(groups, flags)


def node_signs(node_names: tuple[str, ...] | list[str]) -> np.ndarray:
    """Excitatory/inhibitory sign per node: -1 for ``i_`` categories, else +1."""
    return np.array([-1.0 if name.startswith("i_") else 1.0 for name in node_names])


def default_synthesis_spec(seed: int = 42) -> SynthesisSpec:
    """Synthesis targets matching the published 52-category graph statistics.

    Self-loops are excluded on the RGC input rows only.
    """
    input_rows = tuple(DEFAULT_NODES.index(n) for n in RGC_NODES)
    return SynthesisSpec(
        n=SURROGATE_N,
        nonzero_edges=SURROGATE_EDGES,
        prob_range=SURROGATE_PROB_RANGE,
        target_spectral_radius=SURROGATE_SPECTRAL_RADIUS,
        seed=seed,
        input_rows=input_rows,
    )
