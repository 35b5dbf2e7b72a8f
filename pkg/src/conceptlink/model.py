"""Order-free Transformer encoder with an MLP head for pair classification.

Input is ``[CLS] objects... [SEP] attributes...`` with ``[PAD]`` filling.
There is no positional encoding, so the encoder is permutation-equivariant
over positions and the ``[CLS]`` output is invariant to member order.
``[PAD]`` positions are masked out as attention keys, which makes the
output independent of how much padding follows the real tokens.
"""

import csv
import io
import json
import logging
import math
import time
import zipfile
from dataclasses import asdict, dataclass, field

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ._rng import make_rng
from .samples import Vocabulary, tokenize_all

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


class NumericalError(RuntimeError):
    """A forward pass or loss produced a non-finite value."""


@dataclass
class EncoderConfig:
    vocab_size: int
    l_ext: int = 1
    l_int: int = 1
    num_layers: int = 9
    num_heads: int = 12
    model_dim: int = 768
    ffn_dim: int = 3072
    mlp_hidden: int = 512
    dropout: float = 0.1
    seed: int = 0

    def __post_init__(self):
        for name in ("vocab_size", "l_ext", "l_int", "num_layers", "num_heads", "model_dim", "ffn_dim", "mlp_hidden"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.model_dim % self.num_heads:
            raise ValueError(f"model_dim={self.model_dim} is not divisible by num_heads={self.num_heads}")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must lie in [0, 1)")

    @property
    def max_seq_len(self):
        return 2 + self.l_ext + self.l_int

    @classmethod
    def paper(cls, vocab_size, l_ext=1, l_int=1, **kw):
        """Full-size encoder: 9 layers, 12 heads, width 768, FFN 3072, MLP 512."""
        return cls(vocab_size, l_ext, l_int, **kw)

    @classmethod
    def desk(cls, vocab_size, l_ext=1, l_int=1, **kw):
        """Small profile for CPU runs."""
        dims = dict(num_layers=2, num_heads=4, model_dim=64, ffn_dim=128, mlp_hidden=64)
        dims.update(kw)
        return cls(vocab_size, l_ext, l_int, **dims)

    @classmethod
    def profile(cls, name, vocab_size, l_ext=1, l_int=1, **kw):
        if name == "paper":
            return cls.paper(vocab_size, l_ext, l_int, **kw)
        if name == "desk":
            return cls.desk(vocab_size, l_ext, l_int, **kw)
        if name == "custom":
            return cls(vocab_size, l_ext, l_int, **kw)
        raise ValueError(f"unknown encoder profile {name!r}")


class SelfAttention(nn.Module):
    def __init__(self, dim, heads, dropout):
        super().__init__()
        self.heads = heads
        self.head_dim = dim // heads
        self.query = nn.Linear(dim, dim)
        self.key = nn.Linear(dim, dim)
        self.value = nn.Linear(dim, dim)
        self.output = nn.Linear(dim, dim)
        self.dropout = nn.Dropout(dropout)

    def weights(self, x, pad_mask):
        """Attention probabilities, shape ``(batch, heads, seq, seq)``."""
        b, n, _ = x.shape
        q = self.query(x).view(b, n, self.heads, self.head_dim).transpose(1, 2)
        k = self.key(x).view(b, n, self.heads, self.head_dim).transpose(1, 2)
        scores = q @ k.transpose(-1, -2) / math.sqrt(self.head_dim)
        if pad_mask is not None:
            scores = scores.masked_fill(pad_mask[:, None, None, :], float("-inf"))
        return scores.softmax(dim=-1)

    def forward(self, x, pad_mask=None):
        b, n, d = x.shape
        attn = self.dropout(self.weights(x, pad_mask))
        v = self.value(x).view(b, n, self.heads, self.head_dim).transpose(1, 2)
        out = (attn @ v).transpose(1, 2).reshape(b, n, d)
        return self.output(out)


class EncoderLayer(nn.Module):
    """Post-norm block: attention, add & norm, GELU feed-forward, add & norm."""

    def __init__(self, dim, heads, ffn_dim, dropout):
        super().__init__()
        self.attention = SelfAttention(dim, heads, dropout)
        self.norm1 = nn.LayerNorm(dim, eps=1e-5)
        self.ffn_in = nn.Linear(dim, ffn_dim)
        self.ffn_out = nn.Linear(ffn_dim, dim)
        self.norm2 = nn.LayerNorm(dim, eps=1e-5)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x, pad_mask=None):
        x = self.norm1(x + self.dropout(self.attention(x, pad_mask)))
        h = self.ffn_out(self.dropout(F.gelu(self.ffn_in(x))))
        return self.norm2(x + self.dropout(h))


class PairEncoder(nn.Module):
    """Token embedding, encoder stack, and MLP head on the ``[CLS]`` state."""

    def __init__(self, cfg):
        super().__init__()
        self.cfg = cfg
        self.embedding = nn.Embedding(cfg.vocab_size, cfg.model_dim)
        self.layers = nn.ModuleList(
            EncoderLayer(cfg.model_dim, cfg.num_heads, cfg.ffn_dim, cfg.dropout) for _ in range(cfg.num_layers)
        )
        self.head_hidden = nn.Linear(cfg.model_dim, cfg.mlp_hidden)
        self.head_out = nn.Linear(cfg.mlp_hidden, 1)
        self.reset_parameters(cfg.seed)

    def reset_parameters(self, seed):
        gen = torch.Generator().manual_seed(int(seed))
        with torch.no_grad():
            for name, p in self.named_parameters():
                if name.endswith("bias"):
                    p.zero_()
                elif ".norm" in name:
                    p.fill_(1.0)
                else:
                    p.copy_(torch.randn(p.shape, generator=gen, dtype=p.dtype) * 0.02)

    def embed(self, ids):
        ids = torch.as_tensor(ids)
        if ids.numel() and (ids.min() < 0 or ids.max() >= self.cfg.vocab_size):
            raise IndexError(f"token id out of range [0, {self.cfg.vocab_size})")
        return self.embedding(ids)

    def encode(self, x, pad_mask=None):
        for layer in self.layers:
            x = layer(x, pad_mask)
        if not torch.isfinite(x).all():
            raise NumericalError("non-finite hidden state in the encoder")
        return x

    def head(self, cls_vec):
        """Pre-sigmoid logit for a batch of ``[CLS]`` vectors."""
        return self.head_out(F.gelu(self.head_hidden(cls_vec))).squeeze(-1)

    def classify(self, cls_vec):
        return torch.sigmoid(self.head(cls_vec))

    def forward(self, ids, pad_id=0):
        """Logits for a ``(batch, seq)`` id tensor."""
        ids = torch.as_tensor(ids)
        if ids.dim() == 1:
            ids = ids[None]
        mask = ids == pad_id
        hidden = self.encode(self.embed(ids), mask)
        return self.head(hidden[:, 0])


def init_model(cfg):
    return PairEncoder(cfg)


@dataclass
class TrainReport:
    epoch_losses: list = field(default_factory=list)
    epoch_seconds: list = field(default_factory=list)
    epochs: int = 0
    wall_time: float = 0.0

    def log_csv(self):
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["epoch", "mean_loss", "seconds"])
        for i, (loss, sec) in enumerate(zip(self.epoch_losses, self.epoch_seconds), start=1):
            w.writerow([i, f"{loss:.8f}", f"{sec:.3f}"])
        return out.getvalue()


def bce_loss(logits, labels):
    return F.binary_cross_entropy_with_logits(logits, labels)


def train(
    samples,
    vocab,
    cfg,
    epochs=180,
    batch_size=24,
    lr=1e-4,
    betas=(0.9, 0.999),
    eps=1e-8,
    shuffle_seed=0,
    model=None,
    callback=None,
):
    """Fit the classifier with Adam on mean binary cross-entropy.

    ``samples`` is a list of :class:`PaddedSample`.  Batches are reshuffled
    every epoch from a generator seeded with ``shuffle_seed``; dropout draws
    from torch's global generator, which is reseeded from ``cfg.seed``.
    Returns ``(model, report)``.
    """
    if not samples:
        raise ValueError("no training samples")
    lengths = {len(s.x) + len(s.y) for s in samples}
    if len(lengths) != 1:
        raise ValueError(f"samples have differing lengths {sorted(lengths)}")
    ids, labels = tokenize_all(samples, vocab)
    ids = torch.from_numpy(ids)
    labels = torch.from_numpy(labels)

    if model is None:
        model = init_model(cfg)
    torch.manual_seed(cfg.seed)
    opt = torch.optim.Adam(model.parameters(), lr=lr, betas=betas, eps=eps)
    rng = make_rng(shuffle_seed)
    report = TrainReport()
    start = time.perf_counter()
    n = len(ids)
    for epoch in range(epochs):
        t0 = time.perf_counter()
        model.train()
        order = torch.from_numpy(rng.permutation(n))
        total = 0.0
        for lo in range(0, n, batch_size):
            idx = order[lo : lo + batch_size]
            logits = model(ids[idx], vocab.pad_id)
            loss = bce_loss(logits, labels[idx])
            if not torch.isfinite(loss):
                raise NumericalError(f"non-finite loss at epoch {epoch + 1}, batch starting {lo}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += loss.item() * len(idx)
        report.epoch_losses.append(total / n)
        report.epoch_seconds.append(time.perf_counter() - t0)
        if callback is not None:
            callback(epoch + 1, report.epoch_losses[-1])
    report.epochs = epochs
    report.wall_time = time.perf_counter() - start
    model.eval()
    return model, report


# -- inference -------------------------------------------------------------------


def _pad_pair(vocab, cfg, object_ids, attribute_ids):
    objs = sorted(vocab["o:" + o] for o in object_ids)
    attrs = sorted(vocab["a:" + a] for a in attribute_ids)
    x = objs + [vocab.pad_id] * max(0, cfg.l_ext - len(objs))
    y = attrs + [vocab.pad_id] * max(0, cfg.l_int - len(attrs))
    return [vocab.cls_id] + x + [vocab.sep_id] + y


@torch.no_grad()
def predict(model, vocab, object_ids, attribute_ids):
    """Link score in (0, 1) for a set of objects and a set of attributes (raw identifiers)."""
    model.eval()
    ids = torch.tensor([_pad_pair(vocab, model.cfg, object_ids, attribute_ids)])
    return float(torch.sigmoid(model(ids, vocab.pad_id))[0])


@torch.no_grad()
def predict_pairs(model, vocab, pairs, batch_size=512):
    """Scores for many ``(object_id, attribute_id)`` single-member pairs."""
    model.eval()
    rows = [_pad_pair(vocab, model.cfg, [o], [a]) for o, a in pairs]
    out = []
    for lo in range(0, len(rows), batch_size):
        ids = torch.tensor(rows[lo : lo + batch_size])
        out.append(torch.sigmoid(model(ids, vocab.pad_id)).double().numpy())
    return np.concatenate(out) if out else np.zeros(0)


@torch.no_grad()
def sample_logits(model, vocab, samples):
    ids, _ = tokenize_all(samples, vocab)
    model.eval()
    return model(torch.from_numpy(ids), vocab.pad_id).numpy()


# -- checkpoints -----------------------------------------------------------------


def _zip_write(zf, name, data):
    # fixed timestamp keeps checkpoints byte-identical across runs
    info = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
    info.compress_type = zipfile.ZIP_STORED
    zf.writestr(info, data)


def save_checkpoint(path, model, vocab, extra=None):
    """Zip container: ``manifest.json`` plus one raw little-endian float32 blob per tensor."""
    tensors = []
    blobs = []
    for name, t in model.state_dict().items():
        arr = np.ascontiguousarray(t.detach().cpu().numpy().astype("<f4"))
        tensors.append({"name": name, "shape": list(arr.shape), "dtype": "<f4", "file": f"tensors/{name}.bin"})
        blobs.append((f"tensors/{name}.bin", arr.tobytes(order="C")))
    manifest = {
        "format": "conceptlink-checkpoint",
        "version": CHECKPOINT_VERSION,
        "config": asdict(model.cfg),
        "vocabulary": vocab.to_dict(),
        "tensors": tensors,
        "extra": extra or {},
    }
    with zipfile.ZipFile(path, "w") as zf:
        _zip_write(zf, "manifest.json", json.dumps(manifest, indent=1, sort_keys=True))
        for name, data in blobs:
            _zip_write(zf, name, data)


def load_checkpoint(path):
    """Return ``(model, vocab, manifest)``."""
    with zipfile.ZipFile(path) as zf:
        manifest = json.loads(zf.read("manifest.json"))
        if manifest.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {manifest.get('version')}")
        cfg = EncoderConfig(**manifest["config"])
        vocab = Vocabulary(**manifest["vocabulary"])
        state = {}
        for entry in manifest["tensors"]:
            arr = np.frombuffer(zf.read(entry["file"]), dtype="<f4").reshape(entry["shape"])
            state[entry["name"]] = torch.from_numpy(arr.copy())
    model = PairEncoder(cfg)
    model.load_state_dict(state)
    model.eval()
    return model, vocab, manifest

