import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bagcert.certifier import (
    ABSTAIN,
    CertInputs,
    Certificate,
    accuracy_curve,
    adjusted_gap,
    argmax_nprime,
    certified_accuracy,
    certified_size,
    certify_all,
    closed_form_delete,
    closed_form_insert,
    closed_form_modify,
    constraint_lhs,
    max_constraint,
    read_certificates,
    residuals,
    write_certificates,
)
from bagcert.ensemble import VoteTable
from bagcert.errors import DomainError, ValidationError


def brute_lhs(n, k, r, npr, gap):
    m = max(n, npr) - r
    return Fraction(npr, n) ** k - 2 * Fraction(m, n) ** k + 1 - gap


def brute_max(n, k, r, gap):
    return max(brute_lhs(n, k, r, v, gap) for v in range(n - r, n + r + 1))


def brute_gap(pl, ps, n, k):
    pl, ps = Fraction(pl), Fraction(ps)
    scale = n**k
    return Fraction(math.floor(pl * scale) - math.ceil(ps * scale), scale)


def brute_r_star(n, k, pl, ps):
    gap = brute_gap(pl, ps, n, k)
    best = 0
    for r in range(n + 1):
        if brute_max(n, k, r, gap) < 0:
            best = r
        else:
            break
    return best


def test_residuals_small_grid():
    res = residuals(0.9, 0.1, 5, 2)
    assert float(res.delta_l) == pytest.approx(0.02, abs=1e-15)
    assert float(res.delta_s) == pytest.approx(0.02, abs=1e-15)
    assert 0 <= res.delta_l < Fraction(1, 25) and 0 <= res.delta_s < Fraction(1, 25)


def test_residuals_huge_grid_are_exact():
    n, k = 60000, 100
    res = residuals(0.98, 0.01, n, k)
    scale = n**k
    assert 0 <= res.delta_l < Fraction(1, scale)
    assert 0 <= res.delta_s < Fraction(1, scale)
    assert ((Fraction(0.98) - res.delta_l) * scale).denominator == 1


def test_residuals_zero_on_grid_points():
    res = residuals(Fraction(3, 4), Fraction(1, 4), 2, 2)
    assert res.delta_l == 0 and res.delta_s == 0


def test_constraint_lhs_exact_value():
    assert constraint_lhs(100, 5, 9, 100, Fraction(8, 10)) == 1 - 2 * Fraction(91, 100) ** 5 + 1 - Fraction(8, 10)


def test_constraint_lhs_domain():
    with pytest.raises(DomainError):
        constraint_lhs(10, 2, 3, 14, Fraction(1, 2))
    with pytest.raises(DomainError):
        max_constraint(10, 2, 11, Fraction(1, 2))


@pytest.mark.parametrize(
    "n,k,r,expected",
    [(100, 2, 10, (100,)), (100, 2, 60, (120,)), (100, 3, 40, (136, 137))],
)
def test_argmax_examples(n, k, r, expected):
    assert argmax_nprime(n, k, r) == expected


def test_argmax_insert_regime():
    # r beyond n(2^{1/(k-1)} - 1) puts the peak at the insertion end
    assert argmax_nprime(100, 2, 100) == (200,)


@settings(max_examples=300, deadline=None)
@given(n=st.integers(1, 80), k=st.integers(2, 8), data=st.data())
def test_argmax_hits_a_true_maximizer(n, k, data):
    r = data.draw(st.integers(0, n))
    values = {v: brute_lhs(n, k, r, v, 0) for v in range(n - r, n + r + 1)}
    top = max(values.values())
    assert any(values[v] == top for v in argmax_nprime(n, k, r))


@settings(max_examples=300, deadline=None)
@given(n=st.integers(1, 60), k=st.integers(1, 6), data=st.data())
def test_max_constraint_matches_brute_force(n, k, data):
    r = data.draw(st.integers(0, n))
    gap = Fraction(data.draw(st.integers(0, 1000)), 1000)
    assert max_constraint(n, k, r, gap) == brute_max(n, k, r, gap)


pairs = st.tuples(st.floats(0.0, 1.0), st.floats(0.0, 1.0)).filter(lambda t: t[0] > t[1])


@settings(max_examples=300, deadline=None)
@given(n=st.integers(1, 40), k=st.integers(1, 6), pair=pairs)
def test_certified_size_matches_linear_scan(n, k, pair):
    pl, ps = pair
    assert certified_size(CertInputs(n, k, pl, ps)) == brute_r_star(n, k, pl, ps)


@settings(max_examples=200, deadline=None)
@given(n=st.integers(1, 40), k=st.integers(1, 6), pair=pairs)
def test_certified_size_is_sound_and_tight(n, k, pair):
    pl, ps = pair
    gap = brute_gap(pl, ps, n, k)
    r = certified_size(CertInputs(n, k, pl, ps))
    if gap > 0 and brute_max(n, k, 0, gap) < 0:
        assert all(brute_max(n, k, q, gap) < 0 for q in range(r + 1))
    if r < n:
        assert brute_max(n, k, r + 1, gap) >= 0


def test_certifier_examples():
    assert certified_size(CertInputs(100, 5, 0.9, 0.1)) == 9
    assert certified_size(CertInputs(100, 5, 1.0, 0.0)) == 12


@pytest.mark.parametrize(
    "gap,modify,delete,insert",
    [(0.8, 16, 52, 19), (1.0, 22, 999, 23)],
)
def test_closed_form_examples(gap, modify, delete, insert):
    inp = CertInputs(1000, 30, gap, 0.0)
    assert closed_form_modify(inp) == modify
    assert closed_form_delete(inp) == delete
    assert closed_form_insert(inp) == insert
    for attack, want in (("modify", modify), ("delete", delete), ("insert", insert)):
        assert certified_size(CertInputs(1000, 30, gap, 0.0, attack)) == want


def test_gap_of_one_modify_matches_general():
    assert certified_size(CertInputs(1000, 30, 1.0, 0.0, "general")) == 22


def test_abstain_inputs_rejected():
    with pytest.raises(ValidationError):
        CertInputs(10, 2, 0.4, 0.4)
    with pytest.raises(ValidationError):
        CertInputs(10, 2, 0.5, 0.1, "flip")


def test_nonpositive_adjusted_gap_certifies_nothing():
    # bounds separated by less than one grid cell
    n, k = 3, 2
    assert adjusted_gap(0.51, 0.5, n, k) <= 0
    assert certified_size(CertInputs(n, k, 0.51, 0.5)) == 0


@settings(max_examples=200, deadline=None)
@given(n=st.integers(2, 3000), k=st.integers(2, 60), pair=pairs)
def test_attack_ordering(n, k, pair):
    pl, ps = pair
    r = {a: certified_size(CertInputs(n, k, pl, ps, a)) for a in ("general", "modify", "delete", "insert")}
    assert r["general"] <= r["modify"] <= r["insert"] <= r["delete"]


@settings(max_examples=200, deadline=None)
@given(n=st.integers(2, 3000), k=st.integers(1, 60), data=st.data())
def test_monotone_in_lower_bound(n, k, data):
    ps = data.draw(st.floats(0.0, 0.5))
    a = data.draw(st.floats(ps, 1.0))
    b = data.draw(st.floats(ps, 1.0))
    lo, hi = sorted((a, b))
    if not lo > ps:
        return
    assert certified_size(CertInputs(n, k, lo, ps)) <= certified_size(CertInputs(n, k, hi, ps))


def test_certify_all_bonferroni_split():
    counts = [[950, 50]]
    one = certify_all(VoteTable(counts, 1000, 30, 1000, 2, 0, "centroid"), alpha=0.01)
    two = certify_all(VoteTable(counts * 2, 1000, 30, 1000, 2, 0, "centroid"), alpha=0.01)
    assert two[0].p_lower < one[0].p_lower
    assert two[0].radius() <= one[0].radius()
    assert two[0] == Certificate(0, two[1].label, two[1].p_lower, two[1].p_upper_runner, two[1].r_star)


def test_certify_all_tie_abstains():
    certs = certify_all(VoteTable([[50, 50], [90, 10]], 100, 5, 100, 2, 0, "centroid", ids=[3, 4]), alpha=0.01)
    assert certs[0].abstain and certs[0].radius("modify") is None
    assert certs[1].label == 0 and certs[1].id == 4


def test_certified_accuracy_examples():
    certs = [
        Certificate(0, 1, 0.9, 0.1, {"general": 5}),
        Certificate(1, 0, 0.9, 0.1, {"general": 2}),
        Certificate(2, None, 0.4, 0.5, {"general": None}),
        Certificate(3, 2, 0.9, 0.1, {"general": 9}),
    ]
    truth = [1, 0, 0, 1]
    assert certified_accuracy(certs, truth, 0) == 0.5
    assert certified_accuracy(certs, truth, 3) == 0.25
    assert certified_accuracy(certs, truth, 6) == 0.0
    assert accuracy_curve(certs, truth, 3) == [(0, 0.5), (1, 0.5), (2, 0.5), (3, 0.25)]
    with pytest.raises(ValidationError):
        certified_accuracy(certs, truth[:2], 0)


def test_certificate_csv_round_trip(tmp_path):
    certs = [
        Certificate(7, 1, 0.91, 0.05, {"general": 3, "modify": 4, "delete": 9, "insert": 5}),
        Certificate(8, None, 0.4, 0.5, {"general": None, "modify": None, "delete": None, "insert": None}),
        Certificate(9, 0, 0.8, 0.1, {"modify": 2}),
    ]
    path = tmp_path / "c.csv"
    write_certificates(certs, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "id,predicted_label,abstain,p_lower,p_upper_runner,r_general,r_modify,r_delete,r_insert"
    assert lines[2] == f"8,{ABSTAIN},1,0.4,0.5,{ABSTAIN},{ABSTAIN},{ABSTAIN},{ABSTAIN}"
    assert lines[3].endswith(",,2,,")
    back = read_certificates(path)
    assert [(c.id, c.label, c.r_star) for c in back] == [(7, 1, certs[0].r_star), (8, None, certs[1].r_star),
                                                        (9, 0, {"modify": 2})]


def test_read_certificates_rejects_bad_header(tmp_path):
    path = tmp_path / "c.csv"
    path.write_text("id,label\n1,2\n")
    with pytest.raises(ValidationError):
        read_certificates(path)
