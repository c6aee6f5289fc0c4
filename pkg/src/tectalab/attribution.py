"""Substructure ablation sweeps and the dual-axis sensitivity indices.

ESI (energy sensitivity) relates the relative spike-count change to the
absolute relative error change; among ablations that increase error, small
|ESI| marks substructures whose removal costs much error for little spike
saving.  RSI (robustness sensitivity) is the error increase normalized by
the intact baseline; large values mark stability-critical substructures.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .circuit import GroupConfig, resolve_group
from .errors import DataError

DEFAULT_EPSILON = 1e-6


def esi(delta_spike_pct: float, delta_mse_pct: float, epsilon: float = DEFAULT_EPSILON) -> float:
    """Energy Sensitivity Index: relative spike change over absolute relative
    error change, with epsilon guarding the denominator."""
    if epsilon <= 0.0:
        raise DataError(f"epsilon must be positive, got {epsilon}")
    return delta_spike_pct / (abs(delta_mse_pct) + epsilon)


def rsi(mse_after: float, mse_baseline: float) -> float:
    """Robustness Sensitivity Index: error increase normalized by the intact
    baseline error."""
    if mse_baseline <= 0.0:
        raise DataError(f"baseline MSE must be positive, got {mse_baseline}")
    return (mse_after - mse_baseline) / mse_baseline


def _pct_change(after: float, before: float) -> float:
    if before == 0.0:
        return 0.0
    return (after - before) / before * 100.0


@dataclass(frozen=True)
class AblationRecord:
    """Per-substructure deltas against the intact baseline."""

    group: str
    nodes: int
    mse_before: float
    mse_after: float
    spikes_before: float
    spikes_after: float
    delta_mse: float
    delta_mse_pct: float
    delta_spike_pct: float
    esi: float
    rsi: float
    is_input_port: bool
    epsilon: float = DEFAULT_EPSILON

    @classmethod
    def from_measurements(
        cls,
        group: str,
        nodes: int,
        mse_before: float,
        mse_after: float,
        spikes_before: float,
        spikes_after: float,
        is_input_port: bool,
        epsilon: float = DEFAULT_EPSILON,
    ) -> "AblationRecord":
        delta_mse_pct = _pct_change(mse_after, mse_before)
        delta_spike_pct = _pct_change(spikes_after, spikes_before)
        return cls(
            group=group,
            nodes=nodes,
            mse_before=mse_before,
            mse_after=mse_after,
            spikes_before=spikes_before,
            spikes_after=spikes_after,
            delta_mse=mse_after - mse_before,
            delta_mse_pct=delta_mse_pct,
            delta_spike_pct=delta_spike_pct,
            esi=esi(delta_spike_pct, delta_mse_pct, epsilon),
            rsi=rsi(mse_after, mse_before),
            is_input_port=is_input_port,
            epsilon=epsilon,
        )

    def verify_consistency(self) -> None:
        """Recompute every derived field from the raw ones and compare exactly."""
        expected = AblationRecord.from_measurements(
            group=self.group,
            nodes=self.nodes,
            mse_before=self.mse_before,
            mse_after=self.mse_after,
            spikes_before=self.spikes_before,
            spikes_after=self.spikes_after,
            is_input_port=self.is_input_port,
            epsilon=self.epsilon,
        )
        if expected != self:
            raise DataError(f"inconsistent derived fields in record for group {self.group!r}")

    def to_dict(self) -> dict:
        return {
            "group": self.group,
            "nodes": self.nodes,
            "is_input_port": self.is_input_port,
            "mse_before": self.mse_before,
            "mse_after": self.mse_after,
            "delta_mse": self.delta_mse,
            "delta_mse_pct": self.delta_mse_pct,
            "spikes_before": self.spikes_before,
            "spikes_after": self.spikes_after,
            "delta_spike_pct": self.delta_spike_pct,
            "esi": self.esi,
            "rsi": self.rsi,
            "epsilon": self.epsilon,
        }


def run_ablation_sweep(
    model,
    groups: GroupConfig,
    dataset,
    group_names: Sequence[str],
    epsilon: float = DEFAULT_EPSILON,
) -> list[AblationRecord]:
    """Evaluate the trained model once intact, then once per ablated group.

    The model is never retrained; each condition evaluates with the circuit
    ablation applied (the group's nodes disabled along with every incident
    connection) and all other parameters untouched.
    """
    from .model import evaluate  # deferred: keeps index math importable without torch

    if epsilon <= 0.0:
        raise DataError(f"epsilon must be positive, got {epsilon}")
    baseline = evaluate(model, dataset)
    records: list[AblationRecord] = []
    for name in group_names:
        nodes = resolve_group(groups, name)
        try:
            metrics = evaluate(model, dataset, ablated=nodes)
        except Exception as exc:
            raise type(exc)(f"ablation of group {name!r} failed: {exc}") from exc
        record = AblationRecord.from_measurements(
            group=name,
            nodes=len(nodes),
            mse_before=baseline.mse,
            mse_after=metrics.mse,
            spikes_before=baseline.spikes_per_sample,
            spikes_after=metrics.spikes_per_sample,
            is_input_port=groups.port(name) == "input",
            epsilon=epsilon,
        )
        record.verify_consistency()
        records.append(record)
    return records


def rank_esi(records: Iterable[AblationRecord], exclude_input_ports: bool) -> list[AblationRecord]:
    """Error-increasing ablations ordered by ascending |ESI| (name-tiebroken);
    smaller magnitude means a larger error cost per unit of spike saving."""
    kept = [r for r in records if r.delta_mse > 0.0]
    if exclude_input_ports:
        kept = [r for r in kept if not r.is_input_port]
    return sorted(kept, key=lambda r: (abs(r.esi), r.group))


def rank_rsi(records: Iterable[AblationRecord]) -> list[AblationRecord]:
    """All records ordered by descending RSI (name-tiebroken)."""
    return sorted(records, key=lambda r: (-r.rsi, r.group))


@dataclass(frozen=True)
class DualAxisReport:
    """Both rankings plus the headline candidate on each computational axis."""

    esi_ranking: tuple[AblationRecord, ...]
    rsi_ranking: tuple[AblationRecord, ...]
    top_energy: AblationRecord | None
    top_robustness: AblationRecord | None
    records: tuple[AblationRecord, ...]
    flags: tuple[str, ...]

    def to_dict(self) -> dict:
        def headline(record: AblationRecord | None, index_name: str) -> dict | None:
            if record is None:
                return None
            return {
                "group": record.group,
                "nodes": record.nodes,
                index_name: getattr(record, index_name),
            }

        return {
            "esi_ranking": [r.to_dict() for r in self.esi_ranking],
            "rsi_ranking": [r.to_dict() for r in self.rsi_ranking],
            "top_energy": headline(self.top_energy, "esi"),
            "top_robustness": headline(self.top_robustness, "rsi"),
            "records": [r.to_dict() for r in self.records],
            "flags": list(self.flags),
        }


def dual_axis_report(records: Sequence[AblationRecord], groups: GroupConfig) -> DualAxisReport:
    """Assemble the dissociation report: ESI ranking (input ports listed but
    the energy candidate drawn from internal substructures), RSI ranking, and
    the top candidate per axis with its evidence fields."""
    if not records:
        raise DataError("dual_axis_report requires at least one ablation record")
    esi_ranked = rank_esi(records, exclude_input_ports=False)
    rsi_ranked = rank_rsi(records)
    internal = rank_esi(records, exclude_input_ports=True)
    flags: list[str] = []
    top_energy = internal[0] if internal else (esi_ranked[0] if esi_ranked else None)
    if not esi_ranked:
        flags.append("no error-increasing ablation: energy axis is empty")
    elif not internal:
        flags.append("every error-increasing ablation hits an input port; "
                     "energy candidate drawn from input-port records")
    top_robustness = rsi_ranked[0] if rsi_ranked else None
    return DualAxisReport(
        esi_ranking=tuple(esi_ranked),
        rsi_ranking=tuple(rsi_ranked),
        top_energy=top_energy,
        top_robustness=top_robustness,
        records=tuple(records),
        flags=tuple(flags),
    )
