import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from koopman_po.dictionary import Dictionary, delay_dictionary, dual_normalization, monomial_dictionary


def test_two_variable_degree_five_order():
    d = monomial_dictionary(2, 5)
    assert len(d) == 21
    assert d.basis[:6] == ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))
    assert d.labels()[:6] == ["1", "x1", "x2", "x1^2", "x1*x2", "x2^2"]


def test_lorenz_dictionary_size():
    assert len(monomial_dictionary(3, 6)) == 84


def test_constant_only():
    d = monomial_dictionary(1, 0)
    assert d.basis == ((0,),)


@pytest.mark.parametrize("V", range(1, 5))
@pytest.mark.parametrize("p", range(0, 9))
def test_count_and_order_by_enumeration(V, p):
    d = monomial_dictionary(V, p)
    assert len(d) == math.comb(V + p, p)
    brute = [idx for idx in np.ndindex(*(p + 1,) * V) if sum(idx) <= p]
    # graded, then x1-powers descending within a degree
    brute.sort(key=lambda b: (sum(b), tuple(-n for n in b)))
    assert list(d.basis) == [tuple(b) for b in brute]


def test_delay_dictionary_listing():
    d = delay_dictionary(1, 2)
    assert d.labels() == ["1", "z1", "z2", "z1^2", "z1*z2", "z2^2"]
    assert len(delay_dictionary(8, 2)) == 55
    assert len(delay_dictionary(8, 1)) == 10
    for M in range(6):
        assert len(delay_dictionary(M, 2)) == 1 + (M + 1) + (M + 1) * (M + 2) // 2
    with pytest.raises(ValueError):
        delay_dictionary(3, 3)
    with pytest.raises(ValueError):
        delay_dictionary(3, 0)


def test_evaluate_examples():
    d = monomial_dictionary(2, 2)
    f = d.evaluate(np.array([[2.0, 3.0]]))
    assert f[0, d.index((1, 1))] == 6.0
    assert f[0, 0] == 1.0
    np.testing.assert_array_equal(d.evaluate(np.zeros((1, 2)))[0], [1, 0, 0, 0, 0, 0])
    assert d.evaluate([2.0, 3.0]).shape == (6,)
    with pytest.raises(ValueError):
        d.evaluate(np.zeros((4, 3)))


def test_dual_normalization():
    d = monomial_dictionary(2, 3)
    z = dual_normalization(d).z_diag
    assert z[d.index((2, 1))] == 2.0
    assert z[d.index((1, 0))] == 1.0
    assert z[d.index((3, 0))] == 6.0
    assert z[0] == 1.0


def test_lookup_and_errors():
    d = monomial_dictionary(2, 2)
    assert (1, 1) in d and (3, 0) not in d
    with pytest.raises(KeyError):
        d.index((3, 0))
    with pytest.raises(ValueError):
        Dictionary(2, ((1, 0), (0, 0)))
    with pytest.raises(ValueError):
        Dictionary(2, ((0, 0), (1, 0), (1, 0)))


def test_manifest_round_trip():
    for d in (monomial_dictionary(3, 4), delay_dictionary(5, 2)):
        back = Dictionary.from_manifest(d.manifest())
        assert back == d


@given(st.integers(1, 3), st.integers(0, 4), st.data())
def test_evaluate_is_multiplicative(V, p, data):
    d = monomial_dictionary(V, p)
    x = np.array(data.draw(st.lists(st.floats(-2, 2), min_size=V, max_size=V)))
    f = d.evaluate(x)
    i = data.draw(st.integers(0, len(d) - 1))
    j = data.draw(st.integers(0, len(d) - 1))
    m = tuple(a + b for a, b in zip(d.basis[i], d.basis[j]))
    if m in d:
        assert f[d.index(m)] == pytest.approx(f[i] * f[j], rel=1e-12, abs=1e-12)
