import pytest

from ksynth.rng import SplitMix64


def test_reference_vectors():
    r = SplitMix64(0)
    assert [r.next_u64() for _ in range(4)] == [
        0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F, 0xF88BB8A8724C81EC]
    r = SplitMix64(1234567)
    assert [r.next_u64() for _ in range(2)] == [6457827717110365317, 3203168211198807973]


def test_choice_is_reproducible():
    opts = list("abcdef")
    a, b = SplitMix64(42), SplitMix64(42)
    assert [a.choice(opts) for _ in range(20)] == [b.choice(opts) for _ in range(20)]


def test_below_rejects_empty_range():
    with pytest.raises(ValueError):
        SplitMix64(1).below(0)
