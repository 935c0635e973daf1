"""CTC objective and decoding.

Blank has index 0.  Losses and tables are computed in log space (float64)
with log-sum-exp; there is no probability-space fallback.  `logp` arguments
are (T, K) matrices of log-probabilities, each row summing to 1 in
probability space (the recognition head's log_softmax output).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diffcore as dc

NEG_INF = -np.inf


class CtcError(ValueError):
    pass


@dataclass(frozen=True)
class Codec:
    """Ordered alphabet; label index = position + 1, blank = 0."""

    alphabet: str

    def __post_init__(self):
        if len(set(self.alphabet)) != len(self.alphabet):
            raise CtcError("alphabet has duplicate symbols")

    @property
    def size(self) -> int:
        """Number of classes including blank."""
        return len(self.alphabet) + 1

    def encode(self, word: str) -> list[int]:
        try:
            return [self.alphabet.index(ch) + 1 for ch in word]
        except ValueError:
            raise CtcError(f"word {word!r} leaves the alphabet") from None

    def decode(self, labels) -> str:
        out = []
        for i in labels:
            if not 1 <= i < self.size:
                raise CtcError(f"label id {i} out of range")
            out.append(self.alphabet[i - 1])
        return "".join(out)


def collapse(path) -> list[int]:
    """Merge adjacent repeats, then delete blanks (the B map)."""
    out = []
    prev = None
    for s in path:
        if s != prev:
            if s != 0:
                out.append(int(s))
            prev = s
    return out


def _validate(logp, labels):
    logp = np.asarray(logp, dtype=np.float64)
    if logp.ndim != 2:
        raise CtcError("logp must be (T, K)")
    labels = [int(x) for x in labels]
    if len(labels) == 0:
        raise CtcError("empty label sequence")
    k = logp.shape[1]
    if any(not 1 <= x < k for x in labels):
        raise CtcError("label index out of range")
    repeats = sum(1 for a, b in zip(labels, labels[1:]) if a == b)
    if logp.shape[0] < len(labels) + repeats:
        raise CtcError(
            f"label needs at least {len(labels) + repeats} frames, got {logp.shape[0]}"
        )
    return logp, labels


def _augment(labels):
    aug = [0]
    for x in labels:
        aug.append(x)
        aug.append(0)
    return np.asarray(aug, dtype=np.int64)


def ctc_loss(logp, labels):
    """-log p(l|y) plus the forward/backward tables.

    alpha[t,s] includes the emission at t; beta[t,s] covers emissions
    strictly after t, so alpha+beta-logP is the state occupancy.
    """
    logp, labels = _validate(logp, labels)
    t_len = logp.shape[0]
    aug = _augment(labels)
    s_len = len(aug)

    alpha = np.full((t_len, s_len), NEG_INF)
    alpha[0, 0] = logp[0, 0]
    alpha[0, 1] = logp[0, aug[1]]
    skip_ok = np.zeros(s_len, dtype=bool)
    skip_ok[2:] = (aug[2:] != 0) & (aug[2:] != aug[:-2])
    for t in range(1, t_len):
        prev = alpha[t - 1]
        stay = prev
        step = np.full(s_len, NEG_INF)
        step[1:] = prev[:-1]
        skip = np.full(s_len, NEG_INF)
        skip[2:] = prev[:-2]
        skip = np.where(skip_ok, skip, NEG_INF)
        alpha[t] = np.logaddexp(np.logaddexp(stay, step), skip) + logp[t, aug]

    logp_total = np.logaddexp(alpha[t_len - 1, s_len - 1], alpha[t_len - 1, s_len - 2])
    if not np.isfinite(logp_total):
        raise CtcError("label unreachable: p(l|y) = 0")

    beta = np.full((t_len, s_len), NEG_INF)
    beta[t_len - 1, s_len - 1] = 0.0
    beta[t_len - 1, s_len - 2] = 0.0
    for t in range(t_len - 2, -1, -1):
        nxt = beta[t + 1] + logp[t + 1, aug]
        stay = nxt
        step = np.full(s_len, NEG_INF)
        step[:-1] = nxt[1:]
        skip = np.full(s_len, NEG_INF)
        skip[:-2] = np.where(skip_ok[2:], nxt[2:], NEG_INF)
        beta[t] = np.logaddexp(np.logaddexp(stay, step), skip)

    return -logp_total, alpha, beta


def _occupancy(logp, labels):
    """gamma[t,k]: posterior probability of emitting class k at frame t."""
    loss, alpha, beta = ctc_loss(logp, labels)
    aug = _augment(labels)
    post = np.exp(alpha + beta + loss)        # (T, S), rows sum to 1
    gamma = np.zeros_like(logp)
    for s, lab in enumerate(aug):
        gamma[:, lab] += post[:, s]
    return loss, gamma


def ctc_grad(logp, labels):
    """Gradient of -log p(l|y) w.r.t. the pre-softmax logits.

    With logp = log_softmax(z), d(-log p)/dz = softmax(z) - gamma.
    """
    logp = np.asarray(logp, dtype=np.float64)
    _, gamma = _occupancy(logp, labels)
    return np.exp(logp) - gamma


def ctc_loss_node(logp: "dc.Tensor", label_seqs) -> "dc.Tensor":
    """Tape node: summed CTC loss over a batch.

    logp is (B,T,K) or (T,K) log-probabilities on the tape; label_seqs is
    one label list per batch item.  The local derivative w.r.t. logp is
    -gamma, which chains through log_softmax to the standard
    softmax-minus-occupancy form.
    """
    ld = logp.data
    batched = ld.ndim == 3
    mats = ld if batched else ld[None]
    seqs = label_seqs if batched else [label_seqs]
    if len(seqs) != mats.shape[0]:
        raise CtcError("one label sequence per batch item required")
    total = 0.0
    gammas = np.zeros(mats.shape, dtype=np.float64)
    for i, labels in enumerate(seqs):
        loss, gamma = _occupancy(mats[i].astype(np.float64), labels)
        total += loss
        gammas[i] = gamma

    def vjp(g):
        d = (-gammas * float(g)).astype(ld.dtype)
        return (d if batched else d[0],)

    return dc.record("ctc_loss", (logp,), np.asarray(total, dtype=ld.dtype), vjp)


# ----------------------------------------------------------------- oracle

def brute_force_prob(logp, labels) -> float:
    """p(l|y) by exhaustive path enumeration (K^T <= 1e7)."""
    logp = np.asarray(logp, dtype=np.float64)
    t_len, k = logp.shape
    n_paths = k ** t_len
    if n_paths > 10**7:
        raise CtcError("path space too large for enumeration")
    labels = [int(x) for x in labels]
    target = 0
    for c in labels:
        target = target * (k + 1) + (c + 1)
    total = 0.0
    chunk = 1 << 18
    powers = np.array([k ** (t_len - 1 - t) for t in range(t_len)], dtype=np.int64)
    for lo in range(0, n_paths, chunk):
        ids = np.arange(lo, min(lo + chunk, n_paths), dtype=np.int64)
        lp = np.zeros(len(ids))
        code = np.zeros(len(ids), dtype=np.int64)
        prev = np.full(len(ids), -1, dtype=np.int64)
        for t in range(t_len):
            sym = (ids // powers[t]) % k
            lp += logp[t, sym]
            emit = (sym != prev) & (sym != 0)
            code = np.where(emit, code * (k + 1) + (sym + 1), code)
            prev = sym
        total += float(np.exp(lp[code == target]).sum())
    return total


# ---------------------------------------------------------------- decoding

def greedy_decode(logp) -> list[int]:
    logp = np.asarray(logp)
    return collapse(np.argmax(logp, axis=1))


def _exact_label_logprob(logp, labels) -> float:
    """log p(l|y) by the forward DP; handles the empty label."""
    if len(labels) == 0:
        return float(np.sum(logp[:, 0]))
    try:
        loss, _, _ = ctc_loss(logp, labels)
    except CtcError:
        return NEG_INF
    return -loss


def beam_decode(logp, width: int) -> list[int]:
    """Prefix beam search over collapsed prefixes, merging blank/non-blank
    scores, with exact DP rescoring of the surviving prefixes.

    width=1 is defined to coincide with greedy decoding.
    """
    if width < 1:
        raise CtcError("beam width must be >= 1")
    if width == 1:
        return greedy_decode(logp)
    logp = np.asarray(logp, dtype=np.float64)
    t_len, k = logp.shape
    beams: dict[tuple, tuple[float, float]] = {(): (0.0, NEG_INF)}
    for t in range(t_len):
        nxt: dict[tuple, list[float]] = {}

        def bump(prefix, which, val):
            cell = nxt.setdefault(prefix, [NEG_INF, NEG_INF])
            cell[which] = np.logaddexp(cell[which], val)

        for prefix, (pb, pnb) in beams.items():
            total = np.logaddexp(pb, pnb)
            bump(prefix, 0, total + logp[t, 0])
            for c in range(1, k):
                lp = logp[t, c]
                if prefix and prefix[-1] == c:
                    bump(prefix, 1, pnb + lp)
                    bump(prefix + (c,), 1, pb + lp)
                else:
                    bump(prefix + (c,), 1, total + lp)
        ranked = sorted(
            nxt.items(), key=lambda kv: (-np.logaddexp(kv[1][0], kv[1][1]), kv[0])
        )
        beams = {p: (b, nb) for p, (b, nb) in ranked[:width]}
    best = min(beams, key=lambda p: (-_exact_label_logprob(logp, list(p)), p))
    return list(best)


def levenshtein(a, b) -> int:
    la, lb = len(a), len(b)
    row = list(range(lb + 1))
    for i in range(1, la + 1):
        prev = row[0]
        row[0] = i
        for j in range(1, lb + 1):
            cur = row[j]
            row[j] = min(row[j] + 1, row[j - 1] + 1, prev + (a[i - 1] != b[j - 1]))
            prev = cur
    return row[lb]


EXACT_LEXICON_LIMIT = 1000


def _word_loss(logp, codec, word):
    try:
        loss, _, _ = ctc_loss(logp, codec.encode(word))
        return loss
    except CtcError:
        return np.inf


def lexicon_decode(logp, lexicon, mode: str, codec: Codec, beam_width: int = 8) -> str:
    """Decode to a word under a lexicon protocol.

    generic: unconstrained beam search.  strong/weak: argmax over the
    lexicon of the exact per-word CTC posterior (lexicons up to
    EXACT_LEXICON_LIMIT), else snap the beam output by edit distance with
    posterior tie-break.  Ties resolve lexicographically.
    """
    if mode == "generic":
        return codec.decode(beam_decode(logp, beam_width))
    if mode not in ("strong", "weak"):
        raise CtcError(f"unknown decode mode {mode!r}")
    words = sorted(set(lexicon))
    if not words:
        raise CtcError("constrained decoding requires a lexicon")
    if len(words) <= EXACT_LEXICON_LIMIT:
        return min(words, key=lambda w: (_word_loss(logp, codec, w), w))
    hyp = codec.decode(beam_decode(logp, beam_width))
    dists = [(levenshtein(hyp, w), w) for w in words]
    dmin = min(d for d, _ in dists)
    finalists = [w for d, w in dists if d == dmin]
    return min(finalists, key=lambda w: (_word_loss(logp, codec, w), w))
