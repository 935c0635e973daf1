"""The inverse-inference network and its multi-task objective.

Pipeline: IC-STN rectifier -> conv encoder (3 residual pairs, stride 8)
-> kerning LSTM over width-2/stride-1 column windows -> in parallel, a
template decoder (upsampling residual pairs) and a CTC recognition head
(residual adapt + bidirectional LSTM over 32 columns).  Ablation flags
remove the rectifier iterations, the kerning LSTM, or the reconstruction
term; with all three off the function reduces to crop -> encoder -> head.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .. import ctc as ctc_mod
from .. import diffcore as dc
from .layers import (
    BiLSTM,
    Conv,
    LSTM,
    Linear,
    ParamStore,
    ResidualPair,
    columns_to_features,
    features_to_columns,
)
from .stn import Regressor, icstn_rectify

DOMAIN = (32, 256)


@dataclass(frozen=True)
class ModelConfig:
    use_stn: bool = True
    stn_iters: int = 2
    use_klstm: bool = True
    lambda_recon: float = 1.0          # 0 detaches the decoder entirely
    encoder_channels: tuple = (16, 32, 64)
    decoder_channels: tuple = (32, 16, 8)
    klstm_hidden: int = 64
    rec_adapt: int = 32
    rec_hidden: int = 128
    stn_channels: tuple = (8, 16, 16)
    stn_fc: int = 64
    stn_gain: float = 0.1

    def __post_init__(self):
        if self.lambda_recon < 0:
            raise ValueError("lambda_recon must be >= 0")
        if self.use_stn and self.stn_iters < 1:
            raise ValueError("stn_iters must be >= 1 when the STN is on")
        if (2 * self.klstm_hidden) % 4:
            raise ValueError("klstm_hidden must be a multiple of 2")

    @property
    def use_recon(self) -> bool:
        return self.lambda_recon > 0

    def to_json(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @staticmethod
    def from_json(d: dict) -> "ModelConfig":
        d = dict(d)
        for k in ("encoder_channels", "decoder_channels", "stn_channels"):
            if k in d:
                d[k] = tuple(d[k])
        return ModelConfig(**d)


class KernLSTM:
    """Width-2/stride-1 column windows, one LSTM per direction.

    Each direction builds windows in its own scan order (the leading
    window is padded by replicating the first column of that order), so
    mirroring the input columns and swapping directions mirrors the
    output columns with the feature halves swapped.
    """

    def __init__(self, store: ParamStore, name: str, nin: int, hidden: int, rng):
        self.fwd = LSTM(store, f"{name}.fwd", 2 * nin, hidden, rng)
        self.bwd = LSTM(store, f"{name}.bwd", 2 * nin, hidden, rng)

    @staticmethod
    def _windows(cols):
        t_len = cols.shape[1]
        first = dc.slice_axis(cols, 1, 0, 1)
        shifted = dc.concat([first, dc.slice_axis(cols, 1, 0, t_len - 1)], 1)
        return dc.concat([shifted, cols], 2)

    def __call__(self, cols):
        out_f = self.fwd(self._windows(cols))
        rev = dc.reverse_axis(cols, 1)
        out_b = dc.reverse_axis(self.bwd(self._windows(rev)), 1)
        return dc.concat([out_f, out_b], 2)


class Model:
    def __init__(self, config: ModelConfig, codec: ctc_mod.Codec,
                 rng: np.random.Generator, dtype=np.float32):
        self.config = config
        self.codec = codec
        self.store = ParamStore(dtype)
        store = self.store
        c1, c2, c3 = config.encoder_channels
        self.enc1 = ResidualPair(store, "encoder.pair1", 1, c1, rng)
        self.enc2 = ResidualPair(store, "encoder.pair2", c1, c2, rng)
        self.enc3 = ResidualPair(store, "encoder.pair3", c2, c3, rng)
        feat_ch = c3
        if config.use_klstm:
            self.klstm = KernLSTM(store, "klstm", feat_ch * 4, config.klstm_hidden, rng)
            feat_ch = 2 * config.klstm_hidden // 4
        else:
            self.klstm = None
        self.feat_ch = feat_ch
        if config.use_recon:
            d1, d2, d3 = config.decoder_channels
            self.dec1 = ResidualPair(store, "decoder.pair1", feat_ch, d1, rng)
            self.dec2 = ResidualPair(store, "decoder.pair2", d1, d2, rng)
            self.dec3 = ResidualPair(store, "decoder.pair3", d2, d3, rng)
            self.dec_out = Conv(store, "decoder.out", d3, 1, rng, k=1)
        self.rec_pair = ResidualPair(store, "recognition.pair", feat_ch, feat_ch, rng)
        self.rec_adapt = Conv(store, "recognition.adapt", feat_ch, config.rec_adapt, rng, k=1)
        self.rec_lstm = BiLSTM(store, "recognition.lstm", config.rec_adapt * 4,
                               config.rec_hidden, rng)
        self.rec_out = Linear(store, "recognition.out", 2 * config.rec_hidden,
                              codec.size, rng)
        if config.use_stn:
            self.regressor = Regressor(store, "stn", rng, config.stn_channels,
                                       config.stn_fc, DOMAIN)
        else:
            self.regressor = None

    @property
    def params(self) -> dict:
        return self.store.params

    def rectify(self, scenes: np.ndarray, quads: np.ndarray):
        scene_t = dc.constant(np.ascontiguousarray(scenes[:, None], dtype=self.store.dtype))
        iters = self.config.stn_iters if self.config.use_stn else 0
        return icstn_rectify(scene_t, quads, iters, self.regressor, DOMAIN,
                             self.config.stn_gain)

    def encode(self, crop):
        x = dc.add(crop, dc.constant(np.full(crop.shape, -0.5, dtype=crop.dtype)))
        x = self.enc1(dc.avgpool2(x))
        x = self.enc2(dc.avgpool2(x))
        x = self.enc3(dc.avgpool2(x))
        return x

    def features(self, crop):
        x = self.encode(crop)
        if self.klstm is not None:
            cols = features_to_columns(x)
            x = columns_to_features(self.klstm(cols), 4)
        return x

    def decode_template(self, feats):
        x = self.dec1(dc.upsample2(feats))
        x = self.dec2(dc.upsample2(x))
        x = self.dec3(dc.upsample2(x))
        x = dc.sigmoid(self.dec_out(x))
        b = x.shape[0]
        return dc.reshape(x, (b, DOMAIN[0], DOMAIN[1]))

    def recognize(self, feats):
        x = self.rec_pair(feats)
        x = dc.relu(self.rec_adapt(x))
        cols = features_to_columns(x)           # (B, 32, adapt*4)
        y = self.rec_lstm(cols)                  # (B, 32, 2*hidden)
        b, t_len, f = y.shape
        logits = self.rec_out(dc.reshape(y, (b * t_len, f)))
        logits = dc.reshape(logits, (b, t_len, self.codec.size))
        return dc.log_softmax(logits)

    def forward(self, scenes: np.ndarray, quads: np.ndarray,
                need_recon: bool = True) -> dict:
        crop, h_total = self.rectify(scenes, quads)
        feats = self.features(crop)
        want = self.config.use_recon and need_recon
        return {
            "crop": crop,
            "h_total": h_total,
            "logp": self.recognize(feats),
            "recon": self.decode_template(feats) if want else None,
        }

    def loss(self, scenes, quads, label_seqs, templates) -> tuple:
        """Batch-mean CTC plus lambda * batch-mean MSE; parts reported
        separately for logging."""
        out = self.forward(scenes, quads)
        b = scenes.shape[0]
        ctc_term = dc.scale(ctc_mod.ctc_loss_node(out["logp"], label_seqs), 1.0 / b)
        parts = {"ctc": float(ctc_term.data)}
        total = ctc_term
        if self.config.use_recon:
            target = dc.constant(np.ascontiguousarray(templates, dtype=self.store.dtype))
            diff = dc.sub(out["recon"], target)
            mse = dc.mean_all(dc.mul(diff, diff))
            parts["mse"] = float(mse.data)
            total = dc.add(total, dc.scale(mse, self.config.lambda_recon))
        else:
            parts["mse"] = 0.0
        parts["total"] = float(total.data)
        return total, parts
