import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from textcomp import ctc
from textcomp import diffcore as dc
from textcomp.ctc import Codec, CtcError


def rand_logp(rng, t, k):
    z = rng.normal(size=(t, k))
    return z - np.log(np.exp(z).sum(1, keepdims=True))


def test_codec_contracts():
    c = Codec("abc")
    assert c.size == 4
    assert c.encode("cab") == [3, 1, 2]
    assert c.decode([3, 1, 2]) == "cab"
    with pytest.raises(CtcError):
        c.encode("abd")
    with pytest.raises(CtcError):
        Codec("aab")


def test_collapse_examples():
    a = Codec("ab")
    paths = {
        (0, 1, 1, 0, 2, 0): [1, 2],   # "-aa-b-" -> "ab"
        (1, 1, 2): [1, 2],            # "aab" -> "ab"
        (1, 0, 1): [1, 1],            # "a-a" -> "aa"
    }
    for path, want in paths.items():
        assert ctc.collapse(path) == want


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=0, max_size=12))
def test_collapse_fixed_point_on_repeat_free_output(path):
    # collapse output is blank-free; re-collapsing is the identity exactly
    # when the output carries no adjacent repeats (an 'a-a' path collapses
    # to 'aa', which a second collapse would merge), so the fixed-point
    # property is asserted on the repeat-free outputs
    once = ctc.collapse(path)
    assert 0 not in once
    if all(a != b for a, b in zip(once, once[1:])):
        assert ctc.collapse(once) == once
    else:
        assert ctc.collapse(once) != once   # repeats merge, by design of B


def test_single_frame_loss_closed_form(rng):
    lp = rand_logp(rng, 1, 4)
    loss, _, _ = ctc.ctc_loss(lp, [2])
    assert abs(loss + lp[0, 2]) <= 1e-12


def test_uniform_rows_hand_count():
    lp = np.log(np.full((3, 3), 1 / 3))
    loss, _, _ = ctc.ctc_loss(lp, [1])
    assert abs(np.exp(-loss) - 6 / 27) <= 1e-12


def test_too_few_frames_is_an_error(rng):
    with pytest.raises(CtcError):
        ctc.ctc_loss(rand_logp(rng, 2, 3), [1, 1])   # needs a,-,a
    ctc.ctc_loss(rand_logp(rng, 3, 3), [1, 1])


def test_loss_matches_brute_force_on_200_instances():
    rng = np.random.default_rng(77)
    checked = 0
    worst = 0.0
    while checked < 200:
        t = int(rng.integers(1, 9))
        k = int(rng.integers(2, 4)) + 1
        n = int(rng.integers(1, 5))
        labels = list(rng.integers(1, k, size=n))
        reps = sum(1 for a, b in zip(labels, labels[1:]) if a == b)
        if t < n + reps:
            continue
        lp = rand_logp(rng, t, k)
        loss, _, _ = ctc.ctc_loss(lp, labels)
        worst = max(worst, abs(np.exp(-loss) - ctc.brute_force_prob(lp, labels)))
        checked += 1
    assert worst <= 1e-10


def test_brute_force_unreachable_and_total_probability(rng):
    lp = rand_logp(rng, 2, 3)
    assert ctc.brute_force_prob(lp, [1, 1]) == 0.0
    t, k = 4, 3
    lp = rand_logp(rng, t, k)
    total = np.exp(np.sum(lp[:, 0]))   # empty label
    for n in range(1, t + 1):
        for cand in itertools.product(range(1, k), repeat=n):
            total += ctc.brute_force_prob(lp, list(cand))
    assert abs(total - 1.0) <= 1e-10


def test_alpha_beta_consistency(rng):
    lp = rand_logp(rng, 6, 4)
    labels = [1, 2, 2]
    loss, alpha, beta = ctc.ctc_loss(lp, labels)
    # alpha+beta marginalizes to the same total at every frame
    for t in range(6):
        tot = np.logaddexp.reduce(alpha[t] + beta[t])
        assert abs(tot + loss) <= 1e-9


def test_grad_closed_forms_and_fd(rng):
    lp = np.log(np.full((1, 3), 1 / 3))
    g = ctc.ctc_grad(lp, [1])
    expect = np.full((1, 3), 1 / 3)
    expect[0, 1] -= 1
    assert np.allclose(g, expect, atol=1e-12)

    lp = rand_logp(rng, 5, 4)
    assert np.abs(ctc.ctc_grad(lp, [1, 2]).sum(axis=1)).max() <= 1e-12

    z = dc.parameter(rng.normal(size=(6, 4)))
    err = dc.check_grad(lambda zz: ctc.ctc_loss_node(dc.log_softmax(zz), [1, 3]), [z])
    assert err <= 1e-5


def test_ctc_node_batched(rng):
    z = dc.parameter(rng.normal(size=(2, 6, 4)))
    err = dc.check_grad(
        lambda zz: ctc.ctc_loss_node(dc.log_softmax(zz), [[1, 3], [2, 2]]), [z]
    )
    assert err <= 1e-5


def test_blank_prob_one_frame_is_neutral(rng):
    lp = rand_logp(rng, 4, 3)
    blank = np.full((1, 3), -np.inf)
    blank[0, 0] = 0.0
    l1, _, _ = ctc.ctc_loss(lp, [1, 2])
    l2, _, _ = ctc.ctc_loss(np.vstack([lp, blank]), [1, 2])
    assert abs(l1 - l2) <= 1e-12


def test_greedy_decode_one_hot():
    c = Codec("ab")
    seq = [0, 1, 2, 0]
    lp = np.full((4, 3), -30.0)
    for t, s in enumerate(seq):
        lp[t, s] = 0.0
    assert c.decode(ctc.greedy_decode(lp)) == "ab"


def test_beam_width_one_equals_greedy(rng):
    for _ in range(100):
        lp = rand_logp(rng, int(rng.integers(1, 9)), int(rng.integers(2, 5)))
        assert ctc.beam_decode(lp, 1) == ctc.greedy_decode(lp)


def _exhaustive_argmax(lp):
    t, k = lp.shape
    best, bestp = [], np.exp(np.sum(lp[:, 0]))
    for n in range(1, t + 1):
        for cand in itertools.product(range(1, k), repeat=n):
            reps = sum(1 for a, b in zip(cand, cand[1:]) if a == b)
            if t < n + reps:
                continue
            p = ctc.brute_force_prob(lp, list(cand))
            if p > bestp:
                best, bestp = list(cand), p
    return best


def test_beam_four_recovers_exhaustive_argmax():
    rng = np.random.default_rng(55)
    for _ in range(40):
        t = int(rng.integers(2, 9))
        k = 3 if t > 6 else 4
        if k ** t > 10**5:
            k = 3
        lp = rand_logp(rng, t, k)
        assert ctc.beam_decode(lp, 4) == _exhaustive_argmax(lp)


def _one_hot_logp(codec, word, gap_blank=True):
    seq = []
    for lab in codec.encode(word):
        seq.append(lab)
        if gap_blank:
            seq.append(0)
    lp = np.full((len(seq), codec.size), -25.0)
    for t, s in enumerate(seq):
        lp[t, s] = 0.0
    return lp - np.log(np.exp(lp).sum(1, keepdims=True))


def test_lexicon_decode_modes():
    c = Codec("act" + "o")
    lp = _one_hot_logp(c, "cat")
    assert ctc.lexicon_decode(lp, ["cat"], "strong", c) == "cat"
    assert ctc.lexicon_decode(lp, ["cat", "cot"], "strong", c) == "cat"
    assert ctc.lexicon_decode(lp, ["cot", "cat"], "weak", c) == "cat"
    generic = ctc.lexicon_decode(lp, [], "generic", c)
    assert generic == c.decode(ctc.beam_decode(lp, 8))
    with pytest.raises(CtcError):
        ctc.lexicon_decode(lp, [], "strong", c)
    with pytest.raises(CtcError):
        ctc.lexicon_decode(lp, ["cat"], "bogus", c)


def test_lexicon_decode_large_lexicon_fallback(rng):
    c = Codec("abcd")
    lp = _one_hot_logp(c, "abd")
    lex = {"abd", "abc"}
    while len(lex) < ctc.EXACT_LEXICON_LIMIT + 10:
        lex.add("".join(rng.choice(list("abcd"), size=6)))
    assert ctc.lexicon_decode(lp, sorted(lex), "strong", c) == "abd"


def test_levenshtein():
    assert ctc.levenshtein("kitten", "sitting") == 3
    assert ctc.levenshtein("", "abc") == 3
    assert ctc.levenshtein("abc", "abc") == 0
