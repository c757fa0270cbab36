"""Training loop and checkpoint files."""

from __future__ import annotations

import json
import logging
import struct
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from ..config import PipelineConfig
from ..preprocess import TrainingSchedule
from .model import NonFiniteError, SpanScorer
from .optim import AdamW

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"DCRFCKPT"
CHECKPOINT_VERSION = 1


class TrainingDiverged(RuntimeError):
    """Raised when the loss becomes non-finite; carries the last good model."""

    def __init__(self, message, last_good: Optional[SpanScorer] = None):
        super().__init__(message)
        self.last_good = last_good


def training_vocabulary(schedule: TrainingSchedule) -> tuple[list[str], list[str]]:
    words, speakers = set(), set()
    for phase in schedule.phases:
        for doc in phase.documents:
            for tok in doc.tokens:
                words.add(tok.text)
                if tok.is_speaker:
                    speakers.add(tok.text)
    return sorted(words), sorted(speakers)


def learning_rates(model: SpanScorer) -> dict:
    cfg = model.config
    return {name: (cfg.embedding_lr if name == "token_table" else cfg.task_lr)
            for name in model.params}


def fit(schedule: TrainingSchedule, config: PipelineConfig, checkpoint_dir=None,
        on_epoch: Optional[Callable[[dict], None]] = None) -> SpanScorer:
    """Train a scorer through every phase of ``schedule``.

    One optimizer step per document.  The returned model carries the
    per-epoch loss log in ``model.history``.
    """
    if not schedule.phases:
        raise ValueError("empty training schedule")
    vocab, speakers = training_vocabulary(schedule)
    model = SpanScorer(config, vocab, speaker_tokens=speakers)
    opt = AdamW(model.params, learning_rates(model), weight_decay=config.weight_decay,
                clip_norm=config.clip_norm)
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(2,)))
    history = []
    last_good = snapshot(model)
    if checkpoint_dir is not None:
        checkpoint_dir = Path(checkpoint_dir)
        checkpoint_dir.mkdir(parents=True, exist_ok=True)

    for p, epoch, docs in schedule.iter_epochs():
        totals = np.zeros(3)
        for doc in docs:
            try:
                total, lc, lm, grads = model.loss(doc, rng)
            except NonFiniteError as exc:
                raise TrainingDiverged(f"{doc.doc_id}: {exc}", last_good) from exc
            if not np.isfinite(total):
                raise TrainingDiverged(f"non-finite loss on {doc.doc_id} "
                                       f"(phase {p}, epoch {epoch})", last_good)
            opt.step(grads)
            totals += (total, lc, lm)
        record = {
            "phase": p,
            "phase_name": schedule.phases[p].name,
            "epoch": epoch,
            "documents": len(docs),
            "loss": float(totals[0] / max(len(docs), 1)),
            "coref_loss": float(totals[1] / max(len(docs), 1)),
            "mention_loss": float(totals[2] / max(len(docs), 1)),
        }
        history.append(record)
        log.info("phase %d (%s) epoch %d: loss %.4f", p, record["phase_name"], epoch, record["loss"])
        last_good = snapshot(model)
        if checkpoint_dir is not None:
            save_checkpoint(model, checkpoint_dir / f"phase{p}-epoch{epoch:02d}.ckpt")
        if on_epoch is not None:
            on_epoch(record)
    model.history = history
    return model


def snapshot(model: SpanScorer) -> SpanScorer:
    params = {k: v.copy() for k, v in model.params.items()}
    return SpanScorer(model.config, model.embedder.vocab if hasattr(model.embedder, "vocab") else (),
                      params, model.speaker_tokens)


def save_checkpoint(model: SpanScorer, path) -> None:
    """Write parameters, config and vocabularies.

    Layout: magic, little-endian uint32 header length, JSON header, then the
    raw little-endian float64 arrays in header order.
    """
    names = sorted(model.params)
    entries, offset = [], 0
    for name in names:
        arr = np.ascontiguousarray(model.params[name], dtype="<f8")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.nbytes
    header = {
        "version": CHECKPOINT_VERSION,
        "config": model.config.to_dict(),
        "vocab": list(getattr(model.embedder, "vocab", [])),
        "speaker_tokens": sorted(model.speaker_tokens),
        "params": entries,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for name in names:
            fh.write(np.ascontiguousarray(model.params[name], dtype="<f8").tobytes())


def load_checkpoint(path) -> SpanScorer:
    data = Path(path).read_bytes()
    if not data.startswith(CHECKPOINT_MAGIC):
        raise ValueError(f"{path}: not a checkpoint file")
    pos = len(CHECKPOINT_MAGIC)
    (hlen,) = struct.unpack("<I", data[pos:pos + 4])
    pos += 4
    header = json.loads(data[pos:pos + hlen].decode("utf-8"))
    pos += hlen
    if header.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: checkpoint version {header.get('version')} "
                         f"unsupported (expected {CHECKPOINT_VERSION})")
    params = {}
    for entry in header["params"]:
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        start = pos + entry["offset"]
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=start)
        params[entry["name"]] = arr.reshape(entry["shape"]).astype(np.float64)
    config = PipelineConfig.from_dict(header["config"])
    return SpanScorer(config, header["vocab"], params, header["speaker_tokens"])
