import numpy as np
import pytest

from textcomp import imaging, templates
from textcomp.templates import TemplateError, render_layout, render_template, transcribe


def test_transcribe_identity_and_validation():
    assert transcribe("abc") == ["a", "b", "c"]
    assert transcribe("A1z") == ["A", "1", "z"]
    with pytest.raises(TemplateError):
        transcribe("a~b")
    with pytest.raises(TemplateError):
        transcribe("")


def test_template_law_exact_against_brute_force(rng):
    alphabet = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"
    for trial in range(20):
        n = int(rng.integers(1, 9))
        word = "".join(rng.choice(list(alphabet), size=n))
        t = render_template(word)
        lay = render_layout(word)
        d = imaging.brute_force_distance(lay.skeleton)
        expect = np.exp(-(d * d) / 2.0)
        assert np.abs(t.image - expect).max() <= 1e-12
        assert np.all(t.image[lay.skeleton] == 1.0)


def test_template_neighbor_value_and_far_field():
    t = render_template("8")
    lay = render_layout("8")
    d = imaging.distance_transform(lay.skeleton)
    at_one = np.isclose(d, 1.0)
    assert at_one.any()
    assert np.allclose(t.image[at_one], np.exp(-0.5), atol=1e-12)
    far = d >= 6.0
    assert far.any()
    assert t.image[far].max() <= 2e-8


def test_slot_arithmetic_for_eight_chars():
    lay = render_layout("01234567")
    assert lay.slot_width == 256 / 8 == 32.0
    for i, (a, b) in enumerate(lay.char_columns):
        assert a >= round(i * 32) + templates.MARGIN
        assert b <= round((i + 1) * 32) - templates.MARGIN


def test_template_values_bounded_and_deterministic():
    t1 = render_template("Word42")
    t2 = render_template("Word42")
    assert np.array_equal(t1.image, t2.image)
    assert t1.image.max() == 1.0
    assert t1.image.min() >= 0.0
    assert t1.image.shape == (32, 256)


def test_length_bounds():
    with pytest.raises(TemplateError):
        render_template("a" * 17)
    assert render_template("a" * 16).image.shape == (32, 256)


def test_gaps_are_disjoint_and_sorted():
    lay = render_layout("HelloWorld")
    prev_end = -1
    for (a, b), (c0, c1) in zip(lay.gaps, lay.char_columns[:-1]):
        assert a == c1
        assert a < b or a == b
    for (a, b), (a2, b2) in zip(lay.gaps, lay.gaps[1:]):
        assert b <= a2
