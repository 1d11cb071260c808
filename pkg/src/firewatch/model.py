"""Masked-autoencoder transformer for hotspot classification.

Tokenization: each 96-step window becomes 96 x 3 wavelength-group tokens (the
group's channels linearly projected to d_model) plus one static land-cover
token, 289 tokens in all. Every group token also receives the fixed sinusoidal
timestep encoding, a learned group embedding, and linear projections of the
month and location encodings; the land-cover token receives the month and
location terms only.

Masking: a masked timestep replaces the *content* of all three of its group
tokens with the learned mask token (the timestep/group/month/location terms
stay), so encoder inputs at masked timesteps are independent of the observed
values there. The land-cover token may be masked the same way. Masked tokens
are kept in the sequence, not dropped.

The encoder runs over the full 289-token sequence; the decoder re-attends
over the encoder output with its own blocks. Per-group reconstruction heads
read the decoder output at the group-token positions, the land-cover head
reads the decoder output at the land-cover token, and the hotspot head reads
the mean of all encoder output tokens.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .core import NUM_CHANNELS, PixelTimeseries
from .dataset import DatasetManifest
from .encodings import (
    ChannelGroupSpec,
    DEFAULT_GROUPS,
    location_encoding,
    month_encoding,
    timestep_encoding_table,
)

HEADER_FILE = "header.json"
WEIGHTS_FILE = "weights.bin"


@dataclass(frozen=True)
class ModelConfig:
    d_model: int = 64
    encoder_layers: int = 2
    decoder_layers: int = 2
    attention_heads: int = 4
    ff_width: int | None = None  # defaults to 4 * d_model
    mask_ratio: float = 0.75
    timesteps: int = 96
    landcover_classes: int = 9
    groups: ChannelGroupSpec = field(default_factory=ChannelGroupSpec)

    def __post_init__(self):
        if self.d_model % self.attention_heads != 0:
            raise ValueError(
                f"d_model {self.d_model} not divisible by {self.attention_heads} heads"
            )
        if self.d_model % 2 != 0:
            raise ValueError("d_model must be even (sinusoidal timestep encoding)")
        if not 0.0 <= self.mask_ratio <= 1.0:
            raise ValueError(f"mask_ratio {self.mask_ratio} outside [0, 1]")
        if self.encoder_layers < 1 or self.decoder_layers < 1:
            raise ValueError("need at least one encoder and one decoder layer")
        if self.timesteps < 1:
            raise ValueError("timesteps must be positive")
        if self.ff_width is not None and self.ff_width < 1:
            raise ValueError("ff_width must be positive")

    @property
    def ffn_width(self) -> int:
        return self.ff_width if self.ff_width is not None else 4 * self.d_model

    @property
    def tokens(self) -> int:
        """Sequence length: 3 group tokens per timestep plus the land-cover token."""
        return 3 * self.timesteps + 1

    def to_dict(self) -> dict:
        return {
            "d_model": self.d_model,
            "encoder_layers": self.encoder_layers,
            "decoder_layers": self.decoder_layers,
            "attention_heads": self.attention_heads,
            "ff_width": self.ffn_width,
            "mask_ratio": self.mask_ratio,
            "timesteps": self.timesteps,
            "landcover_classes": self.landcover_classes,
            "groups": {
                "infrared": list(self.groups.infrared),
                "visible": list(self.groups.visible),
                "water_vapor": list(self.groups.water_vapor),
            },
        }

    @staticmethod
    def from_dict(payload: dict) -> "ModelConfig":
        groups = payload.get("groups")
        spec = (
            ChannelGroupSpec(
                infrared=tuple(groups["infrared"]),
                visible=tuple(groups["visible"]),
                water_vapor=tuple(groups["water_vapor"]),
            )
            if groups
            else DEFAULT_GROUPS
        )
        return ModelConfig(
            d_model=int(payload.get("d_model", 64)),
            encoder_layers=int(payload.get("encoder_layers", 2)),
            decoder_layers=int(payload.get("decoder_layers", 2)),
            attention_heads=int(payload.get("attention_heads", 4)),
            ff_width=int(payload["ff_width"]) if payload.get("ff_width") else None,
            mask_ratio=float(payload.get("mask_ratio", 0.75)),
            timesteps=int(payload.get("timesteps", 96)),
            landcover_classes=int(payload.get("landcover_classes", 9)),
            groups=spec,
        )


@dataclass(frozen=True)
class MaskSpec:
    """Masked timestep indices for one sample, plus the land-cover coin.

    ``mask_landcover`` is drawn from the same stream as the indices so a
    resolved MaskSpec carries all of a sample's masking randomness and the
    model forward stays a pure function.
    """

    timesteps: tuple[int, ...]
    mask_landcover: bool = False

    def __post_init__(self):
        idx = tuple(int(t) for t in self.timesteps)
        if len(set(idx)) != len(idx):
            raise ValueError("masked timesteps must be unique")
        if any(t < 0 for t in idx):
            raise ValueError("masked timesteps must be non-negative")
        object.__setattr__(self, "timesteps", tuple(sorted(idx)))


EMPTY_MASK = MaskSpec(())


def sample_mask(ts: int, ratio: float, rng: np.random.Generator) -> MaskSpec:
    """Draw ceil(ratio * ts) distinct timesteps uniformly, then the land-cover coin.

    ratio 0 consumes no randomness and returns the empty mask.
    """
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"mask ratio {ratio} outside [0, 1]")
    if ts < 1:
        raise ValueError("ts must be positive")
    k = math.ceil(ratio * ts)
    if k == 0:
        return EMPTY_MASK
    idx = rng.choice(ts, size=k, replace=False)
    return MaskSpec(tuple(int(t) for t in idx), mask_landcover=bool(rng.random() < ratio))


@dataclass
class BatchTensors:
    """Normalized model inputs for one batch (invalid positions zero-filled)."""

    values: torch.Tensor  # (B, T, 11) float
    validity: torch.Tensor  # (B, T, 11) bool
    month_enc: torch.Tensor  # (B, 2) float
    loc_enc: torch.Tensor  # (B, 3) float
    landcover: torch.Tensor  # (B,) long
    labels: torch.Tensor  # (B,) long

    def __len__(self) -> int:
        return self.values.shape[0]

    def to(self, dtype: torch.dtype) -> "BatchTensors":
        return BatchTensors(
            values=self.values.to(dtype),
            validity=self.validity,
            month_enc=self.month_enc.to(dtype),
            loc_enc=self.loc_enc.to(dtype),
            landcover=self.landcover,
            labels=self.labels,
        )


@dataclass
class ModelOutput:
    reconstruction: torch.Tensor  # (B, T, 11)
    landcover_logits: torch.Tensor  # (B, classes)
    hotspot_logit: torch.Tensor  # (B, 1)


def pack_batch(
    series: list[PixelTimeseries],
    channel_mean: np.ndarray | tuple[float, ...],
    channel_std: np.ndarray | tuple[float, ...],
) -> BatchTensors:
    """Normalize windows with the manifest stats and stack them into tensors."""
    if not series:
        raise ValueError("batch must be non-empty")
    mean = np.asarray(channel_mean, dtype=np.float32)
    std = np.asarray(channel_std, dtype=np.float32)
    if mean.shape != (NUM_CHANNELS,) or std.shape != (NUM_CHANNELS,):
        raise ValueError(f"need {NUM_CHANNELS} per-channel stats")

    values = np.stack([s.values for s in series])
    validity = np.stack([s.validity for s in series])
    normalized = (values - mean[None, None, :]) / std[None, None, :]
    normalized = np.where(validity, normalized, 0.0).astype(np.float32)

    month_enc = np.stack([month_encoding(s.month) for s in series]).astype(np.float32)
    loc_enc = np.stack([location_encoding(s.lat, s.lon) for s in series]).astype(np.float32)
    return BatchTensors(
        values=torch.from_numpy(normalized),
        validity=torch.from_numpy(validity),
        month_enc=torch.from_numpy(month_enc),
        loc_enc=torch.from_numpy(loc_enc),
        landcover=torch.tensor([s.landcover for s in series], dtype=torch.long),
        labels=torch.tensor([s.label for s in series], dtype=torch.long),
    )


def masks_to_tensors(
    masks: list[MaskSpec] | None, batch: int, ts: int
) -> tuple[torch.Tensor, torch.Tensor]:
    """Resolve per-sample MaskSpecs into (B, T) and (B,) boolean tensors."""
    step_mask = torch.zeros(batch, ts, dtype=torch.bool)
    lc_mask = torch.zeros(batch, dtype=torch.bool)
    if masks is None:
        return step_mask, lc_mask
    if len(masks) != batch:
        raise ValueError(f"got {len(masks)} masks for a batch of {batch}")
    for i, spec in enumerate(masks):
        if spec.timesteps and spec.timesteps[-1] >= ts:
            raise ValueError(f"mask index {spec.timesteps[-1]} outside [0, {ts})")
        step_mask[i, list(spec.timesteps)] = True
        lc_mask[i] = spec.mask_landcover
    return step_mask, lc_mask


class TokenEmbeddings(nn.Module):
    """Learned group/land-cover embeddings and the mask token.

    Kept in one submodule so the parameter registry enumerates them between
    the input projections and the month/location projections.
    """

    def __init__(self, d_model: int, landcover_classes: int):
        super().__init__()
        self.group = nn.Parameter(torch.zeros(3, d_model))
        self.landcover = nn.Parameter(torch.zeros(landcover_classes, d_model))
        self.mask = nn.Parameter(torch.zeros(d_model))


class MultiHeadSelfAttention(nn.Module):
    def __init__(self, d_model: int, heads: int):
        super().__init__()
        self.heads = heads
        self.d_head = d_model // heads
        self.q = nn.Linear(d_model, d_model)
        self.k = nn.Linear(d_model, d_model)
        self.v = nn.Linear(d_model, d_model)
        self.out = nn.Linear(d_model, d_model)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, n, d = x.shape

        def split(t: torch.Tensor) -> torch.Tensor:
            return t.view(b, n, self.heads, self.d_head).transpose(1, 2)

        q, k, v = split(self.q(x)), split(self.k(x)), split(self.v(x))
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.d_head)
        attended = torch.softmax(scores, dim=-1) @ v
        return self.out(attended.transpose(1, 2).reshape(b, n, d))


class TransformerBlock(nn.Module):
    """Pre-norm block: x + attn(ln(x)), then x + ffn(ln(x))."""

    def __init__(self, d_model: int, heads: int, ff_width: int):
        super().__init__()
        self.norm1 = nn.LayerNorm(d_model)
        self.attn = MultiHeadSelfAttention(d_model, heads)
        self.norm2 = nn.LayerNorm(d_model)
        self.ff1 = nn.Linear(d_model, ff_width)
        self.ff2 = nn.Linear(ff_width, d_model)
        self.act = nn.GELU()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self.attn(self.norm1(x))
        return x + self.ff2(self.act(self.ff1(self.norm2(x))))


class HotspotMAE(nn.Module):
    """The masked autoencoder with reconstruction, land-cover and hotspot heads.

    Submodules are declared in checkpoint registry order; named_parameters()
    therefore enumerates tensors in the exact order they appear in weights.bin.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        d = config.d_model
        n_ir, n_vis, n_wv = config.groups.sizes

        self.ir_proj = nn.Linear(n_ir, d)
        self.vis_proj = nn.Linear(n_vis, d)
        self.wv_proj = nn.Linear(n_wv, d)
        self.embeddings = TokenEmbeddings(d, config.landcover_classes)
        self.month_proj = nn.Linear(2, d)
        self.loc_proj = nn.Linear(3, d)
        self.encoder = nn.ModuleList(
            TransformerBlock(d, config.attention_heads, config.ffn_width)
            for _ in range(config.encoder_layers)
        )
        self.encoder_norm = nn.LayerNorm(d)
        self.decoder = nn.ModuleList(
            TransformerBlock(d, config.attention_heads, config.ffn_width)
            for _ in range(config.decoder_layers)
        )
        self.decoder_norm = nn.LayerNorm(d)
        self.ir_head = nn.Linear(d, n_ir)
        self.vis_head = nn.Linear(d, n_vis)
        self.wv_head = nn.Linear(d, n_wv)
        self.lc_head = nn.Linear(d, config.landcover_classes)
        self.cls_head = nn.Linear(d, 1)

        table = timestep_encoding_table(config.timesteps, d).astype(np.float32)
        self.register_buffer("pos_table", torch.from_numpy(table), persistent=False)
        inv = config.groups.inverse_permutation().copy()
        self.register_buffer("channel_unpermute", torch.from_numpy(inv), persistent=False)

    def forward(
        self, batch: BatchTensors, masks: list[MaskSpec] | None = None
    ) -> ModelOutput:
        """Run the autoencoder; ``masks=None`` is inference mode (nothing masked)."""
        cfg = self.config
        b, ts, ch = batch.values.shape
        if ts != cfg.timesteps or ch != NUM_CHANNELS:
            raise ValueError(
                f"batch shape {tuple(batch.values.shape)} incompatible with "
                f"timesteps={cfg.timesteps}, channels={NUM_CHANNELS}"
            )
        if not torch.isfinite(batch.values).all():
            raise ValueError("batch values must be finite (invalid positions zero-filled)")
        if batch.landcover.min() < 0 or batch.landcover.max() >= cfg.landcover_classes:
            raise ValueError("landcover category out of range")
        step_mask, lc_mask = masks_to_tensors(masks, b, ts)

        mask_token = self.embeddings.mask
        dtype = mask_token.dtype
        values = batch.values.to(dtype)
        groups = (cfg.groups.infrared, cfg.groups.visible, cfg.groups.water_vapor)
        projections = (self.ir_proj, self.vis_proj, self.wv_proj)

        month_term = self.month_proj(batch.month_enc.to(dtype))  # (B, d)
        loc_term = self.loc_proj(batch.loc_enc.to(dtype))  # (B, d)
        context = (month_term + loc_term)[:, None, :]  # (B, 1, d)
        pos = self.pos_table[None, :, :].to(dtype)  # (1, T, d)
        masked_content = step_mask[:, :, None]  # (B, T, 1)

        group_tokens = []
        for g, (idx, proj) in enumerate(zip(groups, projections)):
            content = proj(values[:, :, list(idx)])  # (B, T, d)
            content = torch.where(masked_content, mask_token, content)
            group_tokens.append(content + pos + self.embeddings.group[g] + context)

        lc_content = self.embeddings.landcover[batch.landcover]  # (B, d)
        lc_content = torch.where(lc_mask[:, None], mask_token, lc_content)
        lc_token = (lc_content + context[:, 0, :])[:, None, :]  # (B, 1, d)

        seq = torch.cat(group_tokens + [lc_token], dim=1)  # (B, 3T+1, d)

        enc = seq
        for block in self.encoder:
            enc = block(enc)
        enc = self.encoder_norm(enc)

        dec = enc
        for block in self.decoder:
            dec = block(dec)
        dec = self.decoder_norm(dec)

        ir_out = self.ir_head(dec[:, 0:ts])
        vis_out = self.vis_head(dec[:, ts : 2 * ts])
        wv_out = self.wv_head(dec[:, 2 * ts : 3 * ts])
        stacked = torch.cat([ir_out, vis_out, wv_out], dim=-1)
        reconstruction = stacked[:, :, self.channel_unpermute]

        out = ModelOutput(
            reconstruction=reconstruction,
            landcover_logits=self.lc_head(dec[:, 3 * ts]),
            hotspot_logit=self.cls_head(enc.mean(dim=1)),
        )
        for name, tensor in (
            ("reconstruction", out.reconstruction),
            ("landcover_logits", out.landcover_logits),
            ("hotspot_logit", out.hotspot_logit),
        ):
            if not torch.isfinite(tensor).all():
                raise RuntimeError(f"non-finite {name} in forward pass")
        return out


def init_params(config: ModelConfig, seed: int) -> HotspotMAE:
    """Build a model with Glorot-uniform weights drawn from a seeded numpy stream.

    Scheme, applied in registry order: 2-D weights get U(+-sqrt(6/(fan_in+fan_out)))
    with (fan_out, fan_in) = shape; the mask token is treated as a (1, d) matrix;
    layer-norm scales are 1; all biases and layer-norm shifts are 0.
    """
    model = HotspotMAE(config)
    rng = np.random.default_rng(seed)
    with torch.no_grad():
        for name, param in model.named_parameters():
            if param.ndim == 2:
                fan_out, fan_in = param.shape
                limit = math.sqrt(6.0 / (fan_in + fan_out))
                param.copy_(torch.from_numpy(rng.uniform(-limit, limit, size=tuple(param.shape))).to(param.dtype))
            elif name == "embeddings.mask":  # mask token, treated as a (1, d) matrix
                limit = math.sqrt(6.0 / (1 + param.shape[0]))
                param.copy_(torch.from_numpy(rng.uniform(-limit, limit, size=tuple(param.shape))).to(param.dtype))
            elif name.endswith(".weight"):  # LayerNorm scale
                param.fill_(1.0)
            else:  # Linear and LayerNorm biases
                param.zero_()
    return model


def predict_proba(
    model: HotspotMAE, series: PixelTimeseries, manifest: DatasetManifest
) -> float:
    """Hotspot probability under an empty mask; threshold at 0.5 to classify."""
    batch = pack_batch([series], manifest.channel_mean, manifest.channel_std)
    with torch.no_grad():
        out = model(batch, masks=None)
    return float(torch.sigmoid(out.hotspot_logit[0, 0]))


def predict_probs(
    model: HotspotMAE,
    series: list[PixelTimeseries],
    manifest: DatasetManifest,
    batch_size: int = 256,
) -> np.ndarray:
    """Batched inference-mode hotspot probabilities."""
    probs = []
    with torch.no_grad():
        for lo in range(0, len(series), batch_size):
            batch = pack_batch(
                series[lo : lo + batch_size], manifest.channel_mean, manifest.channel_std
            )
            out = model(batch, masks=None)
            probs.append(torch.sigmoid(out.hotspot_logit[:, 0]).numpy())
    return np.concatenate(probs) if probs else np.empty(0)


def registry(model: HotspotMAE) -> list[tuple[str, tuple[int, ...]]]:
    """The ordered (name, shape) tensor registry backing the checkpoint format."""
    return [(name, tuple(p.shape)) for name, p in model.named_parameters()]


def save_checkpoint(model: HotspotMAE, path: str | Path) -> None:
    """Write ``header.json`` (config + registry) and ``weights.bin`` under ``path``."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    header = {
        "config": model.config.to_dict(),
        "registry": [{"name": n, "shape": list(s)} for n, s in registry(model)],
        "dtype": "float32",
        "byte_order": "little",
    }
    (path / HEADER_FILE).write_text(json.dumps(header, indent=2), encoding="utf-8")
    chunks = [
        p.detach().cpu().numpy().astype("<f4", copy=False).tobytes()
        for _, p in model.named_parameters()
    ]
    (path / WEIGHTS_FILE).write_bytes(b"".join(chunks))


def load_checkpoint(path: str | Path) -> HotspotMAE:
    path = Path(path)
    header_path = path / HEADER_FILE
    if not header_path.exists():
        raise FileNotFoundError(f"missing {header_path}")
    header = json.loads(header_path.read_text(encoding="utf-8"))
    model = HotspotMAE(ModelConfig.from_dict(header["config"]))

    declared = [(e["name"], tuple(e["shape"])) for e in header["registry"]]
    if declared != registry(model):
        raise ValueError(f"{header_path}: registry does not match the declared config")

    raw = (path / WEIGHTS_FILE).read_bytes()
    expected = sum(int(np.prod(s)) for _, s in declared) * 4
    if len(raw) != expected:
        raise ValueError(
            f"{path / WEIGHTS_FILE}: expected {expected} bytes, found {len(raw)}"
        )
    offset = 0
    with torch.no_grad():
        for name, param in model.named_parameters():
            n = param.numel()
            arr = np.frombuffer(raw, dtype="<f4", count=n, offset=offset).reshape(
                tuple(param.shape)
            )
            if not np.isfinite(arr).all():
                raise ValueError(f"{path / WEIGHTS_FILE}: non-finite values in {name!r}")
            param.copy_(torch.from_numpy(arr.copy()))
            offset += n * 4
    return model


__all__ = [
    "HEADER_FILE",
    "WEIGHTS_FILE",
    "ModelConfig",
    "MaskSpec",
    "EMPTY_MASK",
    "sample_mask",
    "BatchTensors",
    "ModelOutput",
    "pack_batch",
    "masks_to_tensors",
    "HotspotMAE",
    "init_params",
    "predict_proba",
    "predict_probs",
    "registry",
    "save_checkpoint",
    "load_checkpoint",
]
