import math
import random

import pytest

from quasitrace.xfloat import XReal, rel_gap, xreal


def test_round_trip_moderate_values():
    rng = random.Random(0)
    for _ in range(200):
        x = rng.uniform(-1e6, 1e6)
        assert float(XReal(x)) == x


def test_arithmetic_matches_floats():
    rng = random.Random(1)
    for _ in range(300):
        a, b = rng.uniform(-50, 50), rng.uniform(-50, 50)
        assert float(XReal(a) * XReal(b)) == pytest.approx(a * b, rel=1e-15, abs=1e-300)
        assert float(XReal(a) + XReal(b)) == pytest.approx(a + b, rel=1e-15, abs=1e-12)
        assert float(XReal(a) - b) == pytest.approx(a - b, rel=1e-15, abs=1e-12)


def test_huge_range_products():
    x = XReal(1.5, 5000)  # 1.5 * 2**5000
    y = x * x
    assert y.log2() == pytest.approx(2 * x.log2(), rel=1e-14)
    assert float(y) == math.inf
    assert float(XReal(1.0, -5000) * XReal(1.0, 5000)) == 1.0


def test_addition_alignment_and_absorption():
    big = XReal(1.0, 2000)
    tiny = XReal(1.0, -2000)
    assert (big + tiny) == big  # absorbed beyond float precision
    same = XReal(3.0, 100) + XReal(1.0, 100)
    assert same.log2() == pytest.approx(102.0)


def test_comparisons_across_magnitudes():
    assert XReal(1.0, 100) > XReal(1.9, 99)
    assert XReal(-1.0, 100) < XReal(1.0, -100)
    assert XReal(-1.0, 100) < XReal(-1.0, 99)
    assert XReal(0.0) < XReal(1e-300)
    assert abs(XReal(-2.5)) == XReal(2.5)


def test_sqrt_and_power():
    for value, exp in ((2.0, 0), (1.7, 301), (0.3, -200)):
        x = XReal(value, exp)
        s = x.sqrt()
        assert (s * s).log2() == pytest.approx(x.log2(), abs=1e-12)
        p = x.pow_3_2()
        assert p.log2() == pytest.approx(1.5 * x.log2(), abs=1e-12)
    with pytest.raises(ValueError):
        XReal(-1.0).sqrt()


def test_sci_formatting():
    assert XReal(0.0).sci() == "0.0"
    assert XReal(1.0).sci().startswith("1.0000000000")
    s = XReal(1.5, 1000).sci()
    mant, expo = s.split("e")
    assert 1.0 <= float(mant) < 10.0
    assert int(expo) == math.floor(1000 * math.log10(2) + math.log10(1.5))
    assert XReal(-2.0).sci().startswith("-2.")


def test_rel_gap():
    assert rel_gap(1.0, 1.0) == 0.0
    assert rel_gap(XReal(1.0, 400), XReal(1.0, 400)) == 0.0
    gap = rel_gap(XReal(1.0, 400) * (1.0 + 1e-10), XReal(1.0, 400))
    assert gap == pytest.approx(1e-10, rel=1e-3)
    assert rel_gap(xreal(0.0), xreal(1e-12)) == pytest.approx(1e-12, rel=1e-3)
