import pytest

from qsm.bigw_recursion import (
    CRational, MAX_ORDER, Poly, printed_coefficients, sho_invariants, sho_recursion,
)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_recursion_matches_printed_coefficients(d):
    rec = sho_recursion(d, 5)
    for n, (a, b) in enumerate(zip(rec, printed_coefficients(d))):
        assert a == b, f"W_{n} differs for d={d}"


def test_base_cases():
    w = sho_recursion(1, 1)
    assert w[0] == Poly.const(1, 1)
    assert not w[1].terms


@pytest.mark.parametrize("d,n_max", [(1, MAX_ORDER), (2, 8), (3, 6)])
def test_p_q_symmetry(d, n_max):
    for wn in sho_recursion(d, n_max):
        assert wn == wn.swap_pq()


def test_order_cap():
    with pytest.raises(ValueError):
        sho_recursion(1, MAX_ORDER + 1)


def test_poly_algebra():
    p2, q2, r = sho_invariants(1)
    assert (q2.dq(0)) == Poly.q(1, 0) * 2
    assert q2.laplacian() == Poly.const(1, 2)
    assert r.swap_pq() == r
    assert (r * CRational(0, 1))([1.0], [2.0]) == pytest.approx(2j)
    assert complex(CRational(1, -2) * CRational(0, 1)) == 2 + 1j
