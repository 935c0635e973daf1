"""Experiment drivers: dataset generation, variant training, evaluation,
perturbation and kerning sweeps, and the ablation table.

Every artifact is reproducible from (spec, seed): datasets regenerate
bit-identically, trained variants share seed and data order, sweep trials
derive their noise seeds from (spec seed, variant, sweep value, trial).
TEXTCOMP_THREADS > 1 runs independent eval trials in worker processes.
"""

from __future__ import annotations

import json
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from functools import lru_cache
from pathlib import Path

import numpy as np

from .. import ctc as ctc_mod
from .. import imaging
from .. import synthesis as syn
from ..model import checkpoint as ckpt_mod
from ..model.network import Model
from ..model.training import evaluate, train
from .plot import emit_plot
from .spec import ExperimentSpec, ResultTable, VARIANTS


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("TEXTCOMP_THREADS", "1")))
    except ValueError:
        return 1


def _trial_seed(spec_seed: int, variant: str, value: float, trial: int) -> int:
    vkey = zlib.crc32(variant.encode())
    key = [spec_seed, 5000, vkey, int(round(value * 1e6)), trial]
    return int(np.random.SeedSequence(key).generate_state(1)[0])


# ------------------------------------------------------------------ datasets

def ensure_datasets(spec: ExperimentSpec, out: Path) -> tuple[Path, Path]:
    data = out / "data"
    train_dir, eval_dir = data / "train", data / "eval"
    lex = spec.resolved_lexicon()
    ranges = spec.param_ranges()
    if not (train_dir / syn.MANIFEST_NAME).exists():
        syn.gen_dataset(lex, spec.n_train, ranges, spec.seed, train_dir, spec.alphabet)
    if not (eval_dir / syn.MANIFEST_NAME).exists():
        syn.gen_dataset(lex, spec.n_eval, ranges, spec.seed + 1, eval_dir, spec.alphabet)
    return train_dir, eval_dir


def cmd_synth(spec: ExperimentSpec, out: Path) -> dict:
    spec.write_resolved(out)
    train_dir, eval_dir = ensure_datasets(spec, out)
    return {"train_dir": str(train_dir), "eval_dir": str(eval_dir)}


# ------------------------------------------------------------------ training

def variant_ckpt(out: Path, variant: str) -> Path:
    return out / "models" / variant / "ckpt_final.bin"


def train_variant(spec: ExperimentSpec, out: Path, variant: str) -> Path:
    """Train one ablation variant (idempotent: skips if the checkpoint
    exists).  All variants share the training seed and data order."""
    ck = variant_ckpt(out, variant)
    if ck.exists():
        return ck
    train_dir, _ = ensure_datasets(spec, out)
    dataset = syn.load_dataset(train_dir)
    codec = ctc_mod.Codec(spec.alphabet)
    model = Model(spec.model_config(variant), codec,
                  np.random.default_rng(np.random.SeedSequence([spec.seed, 77])))
    cfg = spec.train_config()
    train(model, dataset, cfg, ck.parent)
    return ck


def cmd_train(spec: ExperimentSpec, out: Path, variant: str = "full") -> dict:
    spec.write_resolved(out)
    ck = train_variant(spec, out, variant)
    return {"checkpoint": str(ck)}


# ---------------------------------------------------------------- evaluation

@lru_cache(maxsize=8)
def _cached_dataset(path: str):
    return syn.load_dataset(path)


@lru_cache(maxsize=8)
def _cached_model(ckpt_path: str):
    model, _, _ = ckpt_mod.load(ckpt_path)
    return model


def eval_task(ckpt_path: str, dataset_dir: str, mode: str, lexicon: tuple,
              sigma_p: float, sigma_t: float, seed: int) -> dict:
    model = _cached_model(ckpt_path)
    dataset = _cached_dataset(dataset_dir)
    pp = None
    if sigma_p > 0 or sigma_t > 0:
        pp = syn.PerturbationParams(sigma_p, sigma_t)
    return evaluate(model, dataset, mode, list(lexicon) or None, pp, seed)


def _run_tasks(tasks: list) -> list:
    n = worker_count()
    if n <= 1 or len(tasks) <= 1:
        return [eval_task(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=n) as ex:
        return list(ex.map(eval_task, *zip(*tasks)))


def cmd_eval(spec: ExperimentSpec, out: Path, variant: str = "full") -> dict:
    spec.write_resolved(out)
    ck = train_variant(spec, out, variant)
    _, eval_dir = ensure_datasets(spec, out)
    lex = tuple(spec.resolved_lexicon()) if spec.eval_mode in ("strong", "weak") else ()
    res = eval_task(str(ck), str(eval_dir), spec.eval_mode, lex, 0.0, 0.0, spec.seed)
    metrics = {"variant": variant, "mode": spec.eval_mode, **res}
    with open(out / f"metrics_{variant}.json", "w") as f:
        json.dump(metrics, f, indent=1, sort_keys=True)
    return metrics


# -------------------------------------------------------------------- sweeps

def cmd_perturb_sweep(spec: ExperimentSpec, out: Path) -> ResultTable:
    """Accuracy under coordinate noise: for each variant and each
    sigma_p = sigma_t in the grid, `trials` independent perturbation draws."""
    spec.write_resolved(out)
    _, eval_dir = ensure_datasets(spec, out)
    cks = {v: train_variant(spec, out, v) for v in spec.variants}
    lex = tuple(spec.resolved_lexicon()) if spec.eval_mode in ("strong", "weak") else ()
    table = ResultTable()
    tasks = []
    keys = []
    for variant in spec.variants:
        for sigma in spec.sweep_sigmas:
            for trial in range(spec.trials):
                seed = _trial_seed(spec.seed, variant, sigma, trial)
                tasks.append((str(cks[variant]), str(eval_dir), spec.eval_mode,
                              lex, sigma, sigma, seed))
                keys.append((variant, sigma, trial))
    for (variant, sigma, trial), res in zip(keys, _run_tasks(tasks)):
        table.add(variant, sigma, trial, res["word_acc"], res["cer"])
    table.write_csv(out / "perturb_results.csv")
    table.write_aggregate_csv(out / "perturb_aggregate.csv")
    svg = emit_plot(table.series(), "coordinate noise sigma", "word accuracy",
                    "accuracy under quad perturbation")
    (out / "perturb_sweep.svg").write_text(svg)
    return table


def _stretched_dataset(spec: ExperimentSpec, eval_dir: Path, factor: float):
    """Rebuild each eval sample with its inter-character gaps widened by
    `factor` before the geometry stage (gap columns from the manifest)."""
    manifest = syn.load_manifest(eval_dir)
    entries = manifest["entries"]
    ranges = spec.param_ranges()
    ch, cw = manifest["canvas"]
    n = len(entries)
    scenes = np.zeros((n, ch, cw), dtype=np.float32)
    quads = np.zeros((n, 4, 2))
    templates = np.zeros((n, 32, 256), dtype=np.float32)
    transcripts = []
    tmpl_cache: dict = {}
    for i, e in enumerate(entries):
        if "gaps" not in e:
            raise ValueError("manifest lacks gap metadata; regenerate the dataset")
        word = e["transcript"]
        sample, stages = syn.synthesize_with_stages(word, ranges, e["seed"])
        stretched = imaging.stretch_gaps(stages.flat, e["gaps"], factor, keep_width=False)
        quad = syn.base_quad_for(stretched.shape, sample.params)
        h_pull = syn.invert(syn.flat_rect_to_quad(stretched.shape, quad))
        scene, quad = syn.apply_geometry(stretched, h_pull, (ch, cw),
                                         bg_level=syn.scene_background(sample.params))
        scenes[i] = scene
        quads[i] = quad.corners
        t = tmpl_cache.get(word)
        if t is None:
            t = sample.template.image.astype(np.float32)
            tmpl_cache[word] = t
        templates[i] = t
        transcripts.append(word)
    return syn.Dataset(eval_dir, manifest, scenes, templates, quads, transcripts)


def cmd_kern_sweep(spec: ExperimentSpec, out: Path) -> ResultTable:
    """Accuracy vs gap widening 1 + 0.1*k*H (H = 1 normalized, or 32 px
    behind the spec flag); compares the full model and the no-kLSTM
    ablation and dumps rectified/predicted/target template grids."""
    spec.write_resolved(out)
    _, eval_dir = ensure_datasets(spec, out)
    variants = [v for v in spec.variants if v in ("full", "no_klstm")] or ["full", "no_klstm"]
    cks = {v: train_variant(spec, out, v) for v in variants}
    table = ResultTable()
    grid_words: list = []
    for k in spec.kern_levels:
        factor = spec.kern_factor(k)
        ds = _stretched_dataset(spec, eval_dir, factor)
        for variant in variants:
            model = _cached_model(str(cks[variant]))
            res = evaluate(model, ds, spec.eval_mode,
                           list(spec.resolved_lexicon()) if spec.eval_mode in ("strong", "weak") else None)
            table.add(variant, k, 0, res["word_acc"], res["cer"])
        if not grid_words:
            seen = []
            for w in ds.transcripts:
                if w not in seen:
                    seen.append(w)
                if len(seen) == 4:
                    break
            grid_words = seen
        _dump_template_grids(out, spec, cks, ds, grid_words, k)
    table.write_csv(out / "kern_results.csv")
    table.write_aggregate_csv(out / "kern_aggregate.csv")
    svg = emit_plot(table.series(), "kerning stretch level k", "word accuracy",
                    "accuracy under gap widening")
    (out / "kern_sweep.svg").write_text(svg)
    return table


def _dump_template_grids(out: Path, spec: ExperimentSpec, cks: dict, ds, words, k: int):
    from .. import diffcore as dc

    grid_dir = out / "template_grids"
    grid_dir.mkdir(parents=True, exist_ok=True)
    idx = [ds.transcripts.index(w) for w in words]
    for variant, ck in cks.items():
        model = _cached_model(str(ck))
        if not model.config.use_recon:
            continue
        with dc.no_grad():
            o = model.forward(ds.scenes[idx], ds.quads[idx])
        crops = o["crop"].data[:, 0]
        recon = o["recon"].data
        for j, w in enumerate(words):
            panel = np.concatenate([crops[j], recon[j], ds.templates[idx[j]]], axis=0)
            imaging.write_pgm(grid_dir / f"k{k}_{variant}_{w}.pgm", panel)


# ------------------------------------------------------------------ ablation

def cmd_ablate(spec: ExperimentSpec, out: Path, perturb_sigma: float = 0.1) -> ResultTable:
    """Train all variants under identical settings; report clean accuracy
    and accuracy at one perturbation level."""
    spec.write_resolved(out)
    train_dir, eval_dir = ensure_datasets(spec, out)
    with open(train_dir / syn.MANIFEST_NAME, "rb") as f:
        import hashlib

        data_hash = hashlib.sha256(f.read()).hexdigest()[:16]
    cks = {v: train_variant(spec, out, v) for v in spec.variants}
    lex = tuple(spec.resolved_lexicon()) if spec.eval_mode in ("strong", "weak") else ()
    table = ResultTable()
    tasks = []
    keys = []
    for variant in spec.variants:
        tasks.append((str(cks[variant]), str(eval_dir), spec.eval_mode, lex, 0.0, 0.0, 0))
        keys.append((variant, 0.0, 0))
        for trial in range(spec.trials):
            seed = _trial_seed(spec.seed, variant, perturb_sigma, trial)
            tasks.append((str(cks[variant]), str(eval_dir), spec.eval_mode, lex,
                          perturb_sigma, perturb_sigma, seed))
            keys.append((variant, perturb_sigma, trial))
    for (variant, sigma, trial), res in zip(keys, _run_tasks(tasks)):
        table.add(variant, sigma, trial, res["word_acc"], res["cer"])
    table.write_csv(out / "ablate_results.csv")
    table.write_aggregate_csv(out / "ablate_aggregate.csv")
    with open(out / "ablate_meta.json", "w") as f:
        json.dump({"dataset_hash": data_hash,
                   "variant_flags": {v: VARIANTS[v] for v in spec.variants}},
                  f, indent=1, sort_keys=True)
    return table
