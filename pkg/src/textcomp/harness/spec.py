"""Experiment specification and the result table.

A spec fully determines an experiment (data, model, schedule, sweep grid,
trials, seeds); every run writes its resolved copy next to the outputs so
artifacts are reproducible from disk alone.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from ..model.network import ModelConfig
from ..model.training import TrainConfig
from ..synthesis import ParamRanges

VARIANTS = {
    "baseline": {"use_stn": False, "use_klstm": False, "lambda_recon": 0.0},
    "full": {},
    "no_recon": {"lambda_recon": 0.0},
    "no_stn": {"use_stn": False},
    "no_klstm": {"use_klstm": False},
}


@dataclass
class ExperimentSpec:
    name: str = "experiment"
    seed: int = 0
    alphabet: str = "0123456789"
    lexicon: list = field(default_factory=list)   # empty -> generated
    lexicon_size: int = 50
    word_len_lo: int = 3
    word_len_hi: int = 6
    n_train: int = 5000
    n_eval: int = 500
    ranges: dict = field(default_factory=dict)     # ParamRanges overrides
    model: dict = field(default_factory=dict)      # ModelConfig overrides
    train: dict = field(default_factory=dict)      # TrainConfig overrides
    eval_mode: str = "greedy"
    sweep_sigmas: list = field(default_factory=lambda: [0.0, 0.025, 0.05, 0.1, 0.15, 0.2])
    trials: int = 10
    kern_levels: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    kern_height_mode: str = "normalized"           # or "pixels" (H = 32)
    variants: list = field(default_factory=lambda: list(VARIANTS))

    def resolved_lexicon(self) -> list:
        if self.lexicon:
            return list(self.lexicon)
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, 71]))
        words = []
        seen = set()
        while len(words) < self.lexicon_size:
            n = int(rng.integers(self.word_len_lo, self.word_len_hi + 1))
            w = "".join(rng.choice(list(self.alphabet), size=n))
            if w not in seen:
                seen.add(w)
                words.append(w)
        return words

    def param_ranges(self) -> ParamRanges:
        return ParamRanges(**{**ParamRanges().to_json(), **self.ranges})

    def model_config(self, variant: str = "full") -> ModelConfig:
        base = {**ModelConfig().to_json(), **self.model}
        base.update(VARIANTS[variant])
        return ModelConfig.from_json(base)

    def train_config(self) -> TrainConfig:
        d = {k: getattr(TrainConfig(), k) for k in TrainConfig.__dataclass_fields__}
        d.update(self.train)
        d["seed"] = d.get("seed", self.seed)
        cfg = TrainConfig(**d)
        cfg.stage_fractions = tuple(cfg.stage_fractions)
        return cfg

    def kern_factor(self, k: int) -> float:
        height = 1.0 if self.kern_height_mode == "normalized" else 32.0
        return 1.0 + 0.1 * k * height

    def to_json(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_json(d: dict) -> "ExperimentSpec":
        known = set(ExperimentSpec.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown spec fields: {sorted(extra)}")
        return ExperimentSpec(**d)

    @staticmethod
    def load(path) -> "ExperimentSpec":
        with open(path) as f:
            return ExperimentSpec.from_json(json.load(f))

    def write_resolved(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        resolved = self.to_json()
        resolved["lexicon"] = self.resolved_lexicon()
        with open(out / "spec.resolved.json", "w") as f:
            json.dump(resolved, f, indent=1, sort_keys=True)


@dataclass
class ResultTable:
    """Raw per-trial rows plus mean/std aggregates."""

    rows: list = field(default_factory=list)   # (variant, sweep_value, trial, word_acc, cer)

    def add(self, variant: str, value: float, trial: int, word_acc: float, cer: float):
        if not (np.isfinite(word_acc) and np.isfinite(cer)):
            raise ValueError("non-finite metric")
        self.rows.append((variant, float(value), int(trial), float(word_acc), float(cer)))

    def aggregate(self) -> list:
        keys = sorted({(v, s) for v, s, _, _, _ in self.rows})
        out = []
        for v, s in keys:
            accs = [a for vv, ss, _, a, _ in self.rows if (vv, ss) == (v, s)]
            cers = [c for vv, ss, _, _, c in self.rows if (vv, ss) == (v, s)]
            out.append((v, s, float(np.mean(accs)), float(np.std(accs)),
                        float(np.mean(cers))))
        return out

    def write_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["variant", "sweep_value", "trial", "word_acc", "cer"])
            for row in self.rows:
                w.writerow([row[0], f"{row[1]:g}", row[2], f"{row[3]:.6f}", f"{row[4]:.6f}"])

    def write_aggregate_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["variant", "sweep_value", "mean_acc", "std_acc", "mean_cer"])
            for v, s, ma, sa, mc in self.aggregate():
                w.writerow([v, f"{s:g}", f"{ma:.6f}", f"{sa:.6f}", f"{mc:.6f}"])

    def series(self) -> dict:
        out: dict = {}
        for v, s, ma, sa, _ in self.aggregate():
            out.setdefault(v, []).append((s, ma, sa))
        for v in out:
            out[v].sort()
        return out

    @staticmethod
    def read_csv(path) -> "ResultTable":
        import csv

        t = ResultTable()
        with open(path) as f:
            for row in csv.DictReader(f):
                t.add(row["variant"], float(row["sweep_value"]), int(row["trial"]),
                      float(row["word_acc"]), float(row["cer"]))
        return t
