"""LIF spiking network over the circuit graph, trained for Lorenz next-state
prediction with surrogate-gradient descent.

The recurrent topology is fixed by the circuit: effective weight (i, j) is
``gain[i, j] * circuit[i, j] * sign(j)`` with a trainable non-negative gain,
so zero entries stay zero and inhibitory columns stay non-positive.  Only the
encoder (3 -> input nodes), the readout (output-node spike filters -> 3), and
the gains are trained.  The spike threshold uses a rectangular surrogate
derivative of width 1 centered on the threshold; ``spike_mode="soft"``
replaces the hard step by the surrogate's exact antiderivative (a hard
sigmoid), which makes the whole network differentiable for gradient checks.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .atlas import node_signs
from .circuit import Circuit, GroupConfig, load_group_config, resolve_group
from .dynamics import LIFParams, LorenzParams, SynapseParams, lorenz_trajectory
from .errors import ConfigError, DataError, GroupError, NumericError

torch.set_default_dtype(torch.float64)

SURROGATE_HALF_WIDTH = 0.5


class _BoxcarSpike(torch.autograd.Function):
    """Heaviside step with a width-1 rectangular surrogate derivative."""

    @staticmethod
    def forward(ctx, v_minus_th):
        ctx.save_for_backward(v_minus_th)
        return (v_minus_th >= 0.0).to(v_minus_th.dtype)

    @staticmethod
    def backward(ctx, grad_output):
        (v_minus_th,) = ctx.saved_tensors
        window = (v_minus_th.abs() <= SURROGATE_HALF_WIDTH).to(grad_output.dtype)
        return grad_output * window


def spike_hard(v: torch.Tensor, v_th: float) -> torch.Tensor:
    return _BoxcarSpike.apply(v - v_th)


def spike_soft(v: torch.Tensor, v_th: float) -> torch.Tensor:
    """Hard-sigmoid spike whose exact derivative is the boxcar surrogate."""
    return torch.clamp(v - v_th + SURROGATE_HALF_WIDTH, 0.0, 1.0)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 60
    horizon: int = 100
    lr: float = 1e-3
    seed: int = 42
    n_train: int = 64
    n_val: int = 16
    n_test: int = 32
    lorenz_dt: float = 0.01
    transient: int = 1000

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {self.horizon}")
        if self.lr <= 0.0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        for name in ("n_train", "n_val", "n_test"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.transient < 0:
            raise ConfigError(f"transient must be >= 0, got {self.transient}")


@dataclass(frozen=True)
class EvalMetrics:
    mse: float
    r2: float
    corr: float
    spikes_per_sample: float
    r2_defined: bool = True

    def to_dict(self) -> dict:
        return {
            "mse": self.mse,
            "r2": self.r2 if self.r2_defined else None,
            "r2_defined": self.r2_defined,
            "corr": self.corr,
            "spikes_per_sample": self.spikes_per_sample,
        }


@dataclass
class LorenzDataset:
    """Non-overlapping (horizon + 1)-point windows of one long Lorenz run,
    z-scored with train-split statistics and split per seeded shuffle."""

    train: torch.Tensor
    val: torch.Tensor
    test: torch.Tensor
    mean: np.ndarray
    std: np.ndarray


def make_dataset(cfg: TrainConfig, lorenz: LorenzParams | None = None) -> LorenzDataset:
    total = cfg.n_train + cfg.n_val + cfg.n_test
    steps = cfg.transient + total * cfg.horizon + 1
    if lorenz is None:
        lorenz = LorenzParams(dt=cfg.lorenz_dt, steps=steps)
    else:
        lorenz = LorenzParams(
            sigma=lorenz.sigma, rho=lorenz.rho, beta=lorenz.beta,
            dt=lorenz.dt, steps=steps, init=lorenz.init,
        )
    run = lorenz_trajectory(lorenz)[cfg.transient:]

    windows = np.stack(
        [run[w * cfg.horizon: w * cfg.horizon + cfg.horizon + 1] for w in range(total)]
    )
    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(total)
    train_idx = order[: cfg.n_train]
    val_idx = order[cfg.n_train: cfg.n_train + cfg.n_val]
    test_idx = order[cfg.n_train + cfg.n_val:]

    train_raw = windows[train_idx]
    mean = train_raw.reshape(-1, 3).mean(axis=0)
    std = train_raw.reshape(-1, 3).std(axis=0)
    std[std == 0.0] = 1.0

    def norm(w: np.ndarray) -> torch.Tensor:
        return torch.from_numpy((w - mean) / std)

    return LorenzDataset(
        train=norm(train_raw),
        val=norm(windows[val_idx]),
        test=norm(windows[test_idx]),
        mean=mean,
        std=std,
    )


class SNNModel(nn.Module):
    """Spiking network bound to a circuit, with trainable encoder, readout,
    and per-edge gains."""

    def __init__(
        self,
        circuit: Circuit,
        groups: GroupConfig,
        lif: LIFParams = LIFParams(),
        syn: SynapseParams = SynapseParams(),
        seed: int = 42,
        input_group: str | None = None,
        readout_group: str | None = None,
    ):
        super().__init__()
        groups.validate_against(circuit)
        input_ports = groups.groups_with_port("input")
        output_ports = groups.groups_with_port("output")
        if not input_ports:
            raise GroupError("group config defines no input_port group")
        if not output_ports:
            raise GroupError("group config defines no output_port group")
        if input_group is None:
            input_group = input_ports[0]
        elif groups.port(input_group) != "input":
            raise GroupError(f"input group {input_group!r} is not flagged as an input port")
        if readout_group is None:
            readout_group = "TPN_output" if "TPN_output" in output_ports else output_ports[0]
        elif groups.port(readout_group) != "output":
            raise GroupError(f"readout group {readout_group!r} is not flagged as an output port")

        self.circuit = circuit
        self.groups = groups
        self.lif = lif
        self.syn = syn
        self.seed = seed
        self.input_group = input_group
        self.readout_group = readout_group

        n = circuit.n
        in_idx = circuit.indices(resolve_group(groups, input_group))
        out_idx = circuit.indices(resolve_group(groups, readout_group))
        self.register_buffer("base", torch.from_numpy(circuit.matrix.copy()))
        self.register_buffer("signs", torch.from_numpy(node_signs(circuit.node_names)))
        self.register_buffer("in_idx", torch.from_numpy(in_idx))
        self.register_buffer("out_idx", torch.from_numpy(out_idx))
        self.register_buffer("norm_mean", torch.zeros(3))
        self.register_buffer("norm_std", torch.ones(3))

        gen = torch.Generator().manual_seed(seed)
        self.gain = nn.Parameter(torch.ones(n, n))
        self.encoder_w = nn.Parameter(
            torch.randn(len(in_idx), 3, generator=gen) / np.sqrt(3.0)
        )
        self.encoder_b = nn.Parameter(torch.zeros(len(in_idx)))
        self.readout_w = nn.Parameter(
            torch.randn(3, len(out_idx), generator=gen) / np.sqrt(float(len(out_idx)))
        )
        self.readout_b = nn.Parameter(torch.zeros(3))

    @property
    def n(self) -> int:
        return self.circuit.n

    def recurrent_weights(self, alive: torch.Tensor | None = None) -> torch.Tensor:
        w = self.gain * self.base * self.signs.unsqueeze(0)
        if alive is not None:
            w = w * alive.unsqueeze(0) * alive.unsqueeze(1)
        return w

    def alive_mask(self, ablated: frozenset[str] | set[str]) -> torch.Tensor | None:
        if not ablated:
            return None
        idx = self.circuit.indices(ablated)
        alive = torch.ones(self.n, dtype=self.base.dtype)
        alive[torch.from_numpy(idx)] = 0.0
        return alive

    def set_normalization(self, mean: np.ndarray, std: np.ndarray) -> None:
        self.norm_mean.copy_(torch.from_numpy(np.asarray(mean, dtype=float)))
        self.norm_std.copy_(torch.from_numpy(np.asarray(std, dtype=float)))

    def forward(
        self,
        windows: torch.Tensor,
        alive: torch.Tensor | None = None,
        spike_mode: str = "hard",
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Run the network over (batch, steps, 3) input windows.

        Returns per-step next-state predictions (batch, steps, 3) and the
        spike raster (batch, steps, nodes).  Disabled nodes (alive == 0)
        never spike and their incident connections are zeroed.
        """
        if windows.dim() != 3 or windows.shape[-1] != 3:
            raise ConfigError(f"windows must have shape (batch, steps, 3), got {tuple(windows.shape)}")
        spike_fn = spike_hard if spike_mode == "hard" else spike_soft
        b, steps, _ = windows.shape
        lif, syn = self.lif, self.syn
        decay_m = float(np.exp(-lif.dt / lif.tau_m))
        decay_s = float(np.exp(-syn.dt / syn.tau_s))
        w_rec = self.recurrent_weights(alive).t()  # (pre, post) for right-multiplication

        drive = windows @ self.encoder_w.t() + self.encoder_b  # (b, steps, |in|)
        v = torch.full((b, self.n), lif.v_rest, dtype=windows.dtype)
        i_syn = torch.zeros(b, self.n, dtype=windows.dtype)
        filt = torch.zeros(b, self.n, dtype=windows.dtype)
        s = torch.zeros(b, self.n, dtype=windows.dtype)

        preds: list[torch.Tensor] = []
        spikes: list[torch.Tensor] = []
        for t in range(steps):
            i_syn = i_syn * decay_s + s @ w_rec
            external = torch.zeros(b, self.n, dtype=windows.dtype)
            external.index_add_(1, self.in_idx, drive[:, t, :])
            i_total = i_syn + external
            v_inf = lif.v_rest + lif.r_m * i_total
            v = v_inf + (v - v_inf) * decay_m
            if not torch.isfinite(v).all():
                raise NumericError("non-finite membrane potential", where=t)
            s = spike_fn(v, lif.v_th)
            if alive is not None:
                s = s * alive
            v = v * (1.0 - s) + lif.v_reset * s
            filt = filt * decay_s + s
            preds.append(filt[:, self.out_idx] @ self.readout_w.t() + self.readout_b)
            spikes.append(s)
        return torch.stack(preds, dim=1), torch.stack(spikes, dim=1)


def build_model(
    circuit: Circuit,
    groups: GroupConfig,
    cfg: TrainConfig,
    lif: LIFParams = LIFParams(),
    syn: SynapseParams = SynapseParams(),
    input_group: str | None = None,
    readout_group: str | None = None,
) -> SNNModel:
    """Construct a model with seeded initialization (deterministic per seed)."""
    return SNNModel(
        circuit, groups, lif=lif, syn=syn, seed=cfg.seed,
        input_group=input_group, readout_group=readout_group,
    )


def forward(model: SNNModel, window: torch.Tensor | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Single-window convenience wrapper: returns (predictions, spike raster)."""
    win = torch.as_tensor(np.asarray(window, dtype=float))
    if win.dim() != 2:
        raise ConfigError(f"window must have shape (steps, 3), got {tuple(win.shape)}")
    with torch.no_grad():
        preds, spikes = model(win.unsqueeze(0))
    return preds[0].numpy(), spikes[0].numpy()


def _pearson(x: torch.Tensor, y: torch.Tensor) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    denom = xc.norm() * yc.norm()
    if denom.item() == 0.0:
        return 0.0  # constant predictions or targets carry no correlation
    return float((xc @ yc / denom).item())


def evaluate(
    model: SNNModel,
    windows: torch.Tensor,
    ablated: frozenset[str] | set[str] = frozenset(),
) -> EvalMetrics:
    """Pooled MSE / R^2 / correlation over all samples, steps, and dimensions,
    plus mean spikes per sample.  Side-effect free: no parameter or state
    mutation, so repeated calls return identical metrics."""
    if windows.numel() == 0:
        raise DataError("evaluation dataset is empty")
    inputs = windows[:, :-1, :]
    targets = windows[:, 1:, :]
    alive = model.alive_mask(ablated)
    with torch.no_grad():
        preds, spikes = model(inputs, alive=alive)
        err = preds - targets
        mse = float(err.pow(2).mean().item())
        ss_res = float(err.pow(2).sum().item())
        ss_tot = float((targets - targets.mean()).pow(2).sum().item())
        if ss_tot == 0.0:
            r2, r2_defined = float("nan"), False
        else:
            r2, r2_defined = 1.0 - ss_res / ss_tot, True
        corr = _pearson(preds.reshape(-1), targets.reshape(-1))
        spikes_per_sample = float(spikes.sum().item()) / windows.shape[0]
    return EvalMetrics(
        mse=mse, r2=r2, corr=corr,
        spikes_per_sample=spikes_per_sample, r2_defined=r2_defined,
    )


def train(
    model: SNNModel,
    cfg: TrainConfig,
    dataset: LorenzDataset | None = None,
) -> tuple[SNNModel, list[dict[str, float]]]:
    """Gradient training of encoder, readout, and edge gains through time.

    Uses Adam on the pooled one-step-ahead MSE with the boxcar surrogate at
    every threshold.  Gains are projected to >= 0 after each update, which
    preserves the excitatory/inhibitory sign pattern; zero topology entries
    stay zero by construction.  If the last epoch's train MSE exceeds the
    initial one, the best-seen parameters are restored, so the returned model
    never ends worse than it started on the train split.
    """
    if dataset is None:
        dataset = make_dataset(cfg)
    model.set_normalization(dataset.mean, dataset.std)
    inputs = dataset.train[:, :-1, :]
    targets = dataset.train[:, 1:, :]

    def train_mse() -> float:
        with torch.no_grad():
            preds, _ = model(inputs)
            return float((preds - targets).pow(2).mean().item())

    def snapshot() -> dict[str, torch.Tensor]:
        return {k: v.detach().clone() for k, v in model.state_dict().items()}

    history: list[dict[str, float]] = []
    initial = train_mse()
    best_mse, best_state = initial, snapshot()

    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    for epoch in range(cfg.epochs):
        optimizer.zero_grad()
        preds, _ = model(inputs)
        loss = (preds - targets).pow(2).mean()
        if not torch.isfinite(loss):
            raise NumericError("training diverged (non-finite loss)", where=epoch)
        loss.backward()
        optimizer.step()
        with torch.no_grad():
            model.gain.clamp_(min=0.0)
        epoch_train = train_mse()
        with torch.no_grad():
            val_preds, _ = model(dataset.val[:, :-1, :])
            epoch_val = float((val_preds - dataset.val[:, 1:, :]).pow(2).mean().item())
        history.append({"epoch": epoch, "train_mse": epoch_train, "val_mse": epoch_val})
        if epoch_train < best_mse:
            best_mse, best_state = epoch_train, snapshot()

    if cfg.epochs > 0 and history[-1]["train_mse"] > initial:
        model.load_state_dict(best_state)
    return model, history


CHECKPOINT_KEYS = (
    "circuit_matrix", "node_names", "gain", "encoder_w", "encoder_b",
    "readout_w", "readout_b", "norm_mean", "norm_std", "meta_json",
)


def save_checkpoint(model: SNNModel, cfg: TrainConfig, path: str | Path) -> None:
    """Flat key -> array archive (.npz) with the full model definition.

    Arrays: circuit_matrix, node_names, gain, encoder_w/b, readout_w/b,
    norm_mean/std; ``meta_json`` embeds the train config, LIF/synapse
    parameters, group document, port wiring, circuit metadata, and seed.
    """
    meta = {
        "train_config": asdict(cfg),
        "lif": asdict(model.lif),
        "syn": asdict(model.syn),
        "seed": model.seed,
        "input_group": model.input_group,
        "readout_group": model.readout_group,
        "groups": {
            name: {"nodes": sorted(nodes), "port": model.groups.port_flags[name]}
            for name, nodes in sorted(model.groups.groups.items())
        },
        "circuit_metadata": dict(sorted(model.circuit.metadata.items())),
    }
    np.savez(
        path,
        circuit_matrix=model.circuit.matrix,
        node_names=np.array(model.circuit.node_names),
        gain=model.gain.detach().numpy(),
        encoder_w=model.encoder_w.detach().numpy(),
        encoder_b=model.encoder_b.detach().numpy(),
        readout_w=model.readout_w.detach().numpy(),
        readout_b=model.readout_b.detach().numpy(),
        norm_mean=model.norm_mean.numpy(),
        norm_std=model.norm_std.numpy(),
        meta_json=np.array(json.dumps(meta, sort_keys=True)),
    )


def load_checkpoint(path: str | Path) -> tuple[SNNModel, TrainConfig]:
    with np.load(path, allow_pickle=False) as data:
        missing = [k for k in CHECKPOINT_KEYS if k not in data]
        if missing:
            raise DataError(f"checkpoint {path} is missing keys: {missing}")
        meta = json.loads(str(data["meta_json"]))
        circuit = Circuit(
            tuple(str(n) for n in data["node_names"]),
            data["circuit_matrix"],
            {str(k): str(v) for k, v in meta.get("circuit_metadata", {}).items()},
        )
        groups = GroupConfig(
            {name: frozenset(entry["nodes"]) for name, entry in meta["groups"].items()},
            {name: entry["port"] for name, entry in meta["groups"].items()},
        )
        cfg = TrainConfig(**meta["train_config"])
        model = SNNModel(
            circuit,
            groups,
            lif=LIFParams(**meta["lif"]),
            syn=SynapseParams(**meta["syn"]),
            seed=int(meta["seed"]),
            input_group=meta["input_group"],
            readout_group=meta["readout_group"],
        )
        with torch.no_grad():
            model.gain.copy_(torch.from_numpy(data["gain"]))
            model.encoder_w.copy_(torch.from_numpy(data["encoder_w"]))
            model.encoder_b.copy_(torch.from_numpy(data["encoder_b"]))
            model.readout_w.copy_(torch.from_numpy(data["readout_w"]))
            model.readout_b.copy_(torch.from_numpy(data["readout_b"]))
            model.norm_mean.copy_(torch.from_numpy(data["norm_mean"]))
            model.norm_std.copy_(torch.from_numpy(data["norm_std"]))
    return model, cfg
