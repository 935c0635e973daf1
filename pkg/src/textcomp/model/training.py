"""Training loop and evaluation.

Deterministic given the seed: batch order comes from a per-epoch
permutation seeded by (seed, epoch), and quad-augmentation noise is
seeded by (seed, epoch, sample index), so a resumed run replays exactly
the batches the uninterrupted run would have seen.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import ctc as ctc_mod
from .. import diffcore as dc
from ..synthesis import Dataset, PerturbationParams, perturb_quad
from ..geometry import Quad
from . import checkpoint as ckpt_mod
from .network import Model, ModelConfig

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    batch_size: int = 32
    steps: int = 1000
    lr: float = 1e-4
    schedule: str = "exp"          # "exp" or "stage"
    decay_factor: float = 0.9      # exp: multiplier applied every decay_every
    decay_every: int = 5000
    stage_fractions: tuple = (0.2, 0.4, 0.7)   # stage: x0.1 after these
    sigma_p: float = 0.025         # quad augmentation (the perturbation law)
    sigma_t: float = 0.025
    beta1: float = 0.5
    seed: int = 0
    checkpoint_every: int = 0      # 0 = only final
    log_every: int = 10

    def to_json(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["stage_fractions"] = list(self.stage_fractions)
        return d


def lr_at(cfg: TrainConfig, step: int) -> float:
    if cfg.schedule == "exp":
        return cfg.lr * cfg.decay_factor ** (step // cfg.decay_every)
    if cfg.schedule == "stage":
        drops = sum(1 for fr in cfg.stage_fractions if step >= fr * cfg.steps)
        return cfg.lr * 0.1 ** drops
    raise ValueError(f"unknown schedule {cfg.schedule!r}")


def _epoch_permutation(seed: int, epoch: int, n: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2000, epoch]))
    return rng.permutation(n)


def _augment_quad(quad_arr: np.ndarray, cfg: TrainConfig, epoch: int, idx: int) -> np.ndarray:
    if cfg.sigma_p == 0 and cfg.sigma_t == 0:
        return quad_arr
    q = Quad.from_corners(quad_arr, validate=False)
    seed = int(np.random.SeedSequence([cfg.seed, 3000, epoch, idx]).generate_state(1)[0])
    try:
        return perturb_quad(q, PerturbationParams(cfg.sigma_p, cfg.sigma_t), seed).corners
    except Exception:
        return quad_arr


def batch_at(dataset: Dataset, cfg: TrainConfig, codec: ctc_mod.Codec, step: int):
    """The (scenes, quads, labels, templates) a deterministic run sees at
    `step`; pure function of (dataset, cfg, step)."""
    n = len(dataset)
    bs = cfg.batch_size
    per_epoch = max(n // bs, 1)
    epoch = step // per_epoch
    slot = step % per_epoch
    perm = _epoch_permutation(cfg.seed, epoch, n)
    idx = perm[slot * bs : slot * bs + bs]
    scenes = dataset.scenes[idx]
    quads = np.stack([
        _augment_quad(dataset.quads[i], cfg, epoch, int(i)) for i in idx
    ])
    labels = [codec.encode(dataset.transcripts[i]) for i in idx]
    templates = dataset.templates[idx]
    return scenes, quads, labels, templates, idx


def train(model: Model, dataset: Dataset, cfg: TrainConfig, out_dir,
          state: dc.AdamState | None = None, start_step: int = 0):
    """Run cfg.steps optimizer steps; returns (state, csv_rows).

    Writes loss.csv (step, ctc, mse, lr) and checkpoint files under
    out_dir.  A non-finite loss dumps the offending batch and raises.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    codec = model.codec
    if state is None:
        state = dc.AdamState(lr=cfg.lr, beta1=cfg.beta1)
    params = model.params
    rows = []
    csv_path = out / "loss.csv"
    mode = "a" if start_step else "w"
    with open(csv_path, mode, newline="") as fh:
        writer = csv.writer(fh)
        if not start_step:
            writer.writerow(["step", "ctc", "mse", "lr"])
        for step in range(start_step, cfg.steps):
            scenes, quads, labels, templates, idx = batch_at(dataset, cfg, codec, step)
            try:
                with dc.tape():
                    loss, parts = model.loss(scenes, quads, labels, templates)
                    grads_by_id = dc.backward(loss, params=list(params.values()))
            except dc.NonFiniteError:
                dump = {
                    "step": step,
                    "indices": [int(i) for i in idx],
                    "transcripts": [dataset.transcripts[int(i)] for i in idx],
                    "files": [dataset.manifest["entries"][int(i)]["file"] for i in idx],
                }
                with open(out / "nonfinite_batch.json", "w") as df:
                    json.dump(dump, df, indent=1)
                log.error("non-finite loss at step %d; batch dumped", step)
                raise
            state.lr = lr_at(cfg, step)
            grads = {name: grads_by_id[id(p)] for name, p in params.items()}
            dc.adam_step(params, grads, state)
            row = [step, f"{parts['ctc']:.6f}", f"{parts['mse']:.6f}", f"{state.lr:.8g}"]
            if step % cfg.log_every == 0 or step == cfg.steps - 1:
                writer.writerow(row)
                rows.append(row)
            if cfg.checkpoint_every and (step + 1) % cfg.checkpoint_every == 0:
                ckpt_mod.save(out / f"ckpt_{step + 1:06d}.bin", model, state, step + 1)
    ckpt_mod.save(out / "ckpt_final.bin", model, state, cfg.steps)
    return state, rows


def _decode(logp: np.ndarray, mode: str, codec: ctc_mod.Codec, lexicon):
    if mode == "greedy":
        return codec.decode(ctc_mod.greedy_decode(logp))
    if mode == "beam":
        return codec.decode(ctc_mod.beam_decode(logp, 8))
    return ctc_mod.lexicon_decode(logp, lexicon or [], mode, codec)


def evaluate(model: Model, dataset: Dataset, mode: str = "greedy",
             lexicon=None, pp: PerturbationParams | None = None,
             seed: int = 0, batch_size: int = 64) -> dict:
    """Word accuracy (exact match) and micro-averaged CER.

    With `pp`, every quad is perturbed with a per-sample seed derived
    from `seed` before rectification (the robustness protocol).
    """
    if dataset.manifest["codec"] != model.codec.alphabet:
        raise ckpt_mod.CheckpointError("dataset codec differs from model codec")
    n = len(dataset)
    correct = 0
    edits = 0
    ref_len = 0
    for lo in range(0, n, batch_size):
        idx = np.arange(lo, min(lo + batch_size, n))
        quads = dataset.quads[idx]
        if pp is not None and (pp.sigma_p > 0 or pp.sigma_t > 0):
            quads = np.stack([
                perturb_quad(
                    Quad.from_corners(q, validate=False), pp,
                    int(np.random.SeedSequence([seed, 4000, int(i)]).generate_state(1)[0]),
                ).corners
                for q, i in zip(quads, idx)
            ])
        with dc.no_grad():
            out = model.forward(dataset.scenes[idx], quads, need_recon=False)
        logp = out["logp"].data.astype(np.float64)
        for row, i in enumerate(idx):
            hyp = _decode(logp[row], mode, model.codec, lexicon)
            ref = dataset.transcripts[int(i)]
            correct += hyp == ref
            edits += ctc_mod.levenshtein(hyp, ref)
            ref_len += len(ref)
    return {
        "word_acc": correct / n if n else 0.0,
        "cer": edits / ref_len if ref_len else 0.0,
        "n": n,
    }
