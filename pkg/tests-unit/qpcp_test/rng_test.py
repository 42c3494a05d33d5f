import numpy as np

from qpcp.rng import RandomStream, as_stream


def test_same_seed_and_label_repeat():
    a = RandomStream(5, "node=1").generator.random(8)
    b = RandomStream(5, "node=1").generator.random(8)
    np.testing.assert_array_equal(a, b)


def test_labels_separate_streams():
    a = RandomStream(5, "node=1").generator.random(8)
    b = RandomStream(5, "node=2").generator.random(8)
    c = RandomStream(6, "node=1").generator.random(8)
    assert not np.allclose(a, b)
    assert not np.allclose(a, c)


def test_child_is_addressed_by_label_path():
    parent = RandomStream(9, "node=3")
    child = parent.child("shot=4")
    assert child.label == "node=3/shot=4"
    np.testing.assert_array_equal(child.generator.random(4), RandomStream(9, "node=3/shot=4").generator.random(4))


def test_child_draws_do_not_depend_on_sibling_use():
    parent = RandomStream(9)
    first = parent.child("b").generator.random(3)
    parent.child("a").generator.random(1000)
    np.testing.assert_array_equal(parent.child("b").generator.random(3), first)


def test_seed_is_masked_to_64_bits():
    assert RandomStream(-1).seed == 2 ** 64 - 1


def test_as_stream():
    s = RandomStream(3, "x")
    assert as_stream(s) is s
    assert as_stream(None).seed == 0
    made = as_stream(7, "label")
    assert made.seed == 7 and made.label == "label"
