import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from robustcfx.experiments import canonical_cnfs, gadget_lemmas, random_cnfs
from robustcfx.reduction import (Cnf, DimacsError, brute_force_sat, build_reduction,
                                 check_equivalence, clause, clause_high_bound, clause_low_bound,
                                 discretizer, end, generating, negation, parse_dimacs, realizable)

DELTA = 0.05
# three variables, two clauses, mixing positive and negated literals
FIG10 = Cnf(3, ((1, -2, 3), (-1, 2, -3)))


def test_parse_single_clause():
    cnf = parse_dimacs("p cnf 1 1 \n 1 1 1 0")
    assert cnf == Cnf(1, ((1, 1, 1),))


def test_parse_fig10_structure():
    text = "c three variables, two clauses\np cnf 3 2\n1 -2 3 0\n-1 2 -3 0\n"
    assert parse_dimacs(text) == FIG10


def test_parse_clause_spanning_lines_and_trailer():
    cnf = parse_dimacs("p cnf 2 2\n1 2\n-1 0 2 2 -2 0\n%\n0\n")
    assert cnf.clauses == ((1, 2, -1), (2, 2, -2))


@pytest.mark.parametrize("text,match", [
    ("p cnf 2 1\n1 2 0\n", "2 literals"),
    ("p cnf 2 1\n1 2 2 2 0\n", "4 literals"),
    ("p cnf 2 1\n1 2 3 0\n", "exceeds"),
    ("p cnf x 1\n1 1 1 0\n", "header"),
    ("1 1 1 0\n", "before"),
    ("p cnf 1 2\n1 1 1 0\n", "declares 2"),
    ("p cnf 1 1\n1 1 1\n", "terminated"),
    ("p cnf 1 1\n1 a 1 0\n", "bad literal"),
    ("", "missing"),
])
def test_parse_errors(text, match):
    with pytest.raises(DimacsError, match=match):
        parse_dimacs(text)


def test_cnf_validation():
    with pytest.raises(ValueError):
        Cnf(2, ((1, 2),))
    with pytest.raises(ValueError):
        Cnf(2, ((1, 2, 3),))


literal = st.integers(1, 5).flatmap(lambda v: st.sampled_from((v, -v)))


@given(st.lists(st.tuples(literal, literal, literal), min_size=1, max_size=6))
def test_dimacs_roundtrip(clauses):
    n = max(abs(l) for c in clauses for l in c)
    cnf = Cnf(n, tuple(clauses))
    assert parse_dimacs(cnf.to_dimacs()) == cnf


def test_delta_range():
    for bad in (0.0, 0.08, 0.1, -0.01):
        with pytest.raises(ValueError):
            build_reduction(FIG10, bad)
    with pytest.raises(ValueError):
        check_equivalence(Cnf(7, ((1, 2, 7),)))


def test_fig10_topology():
    g = build_reduction(FIG10, DELTA)
    names = set(g.probes)
    assert {f"u{i}" for i in (1, 2, 3)} <= names and "u4" not in names
    assert {"c1", "c2"} <= names and "c3" not in names
    assert sum(n.startswith("chi_tilde") for n in names) == 6
    assert sum(n.startswith("not_chi_tilde") for n in names) == 3
    assert {"n_tilde", "c_tilde", "z"} <= names
    lo, hi, m = g.lo, g.hi, g.mask
    assert np.allclose((hi - lo)[m], 2 * DELTA, atol=1e-12)
    assert np.all(lo[~m] == hi[~m])
    ones = m & (g.upper == 1.0)
    assert np.allclose(lo[ones], 1 - 2 * DELTA) and np.all(hi[ones] == 1.0)
    a, b = g.main_inputs[0]
    assert (lo[a], hi[a]) == pytest.approx((0.0, 2 * DELTA))
    assert (lo[b], hi[b]) == pytest.approx((-1 / DELTA, -1 / DELTA + 2 * DELTA))


def test_smallest_instance():
    g = build_reduction(Cnf(1, ((1, 1, 1),)), DELTA)
    assert g.centre_output < 0.5
    assert realizable(g) == (1,)


@pytest.mark.parametrize("cnf,sat", [
    (Cnf(1, ((1, 1, 1), (-1, -1, -1))), False),
    (Cnf(3, ((1, 2, 3),)), True),
    (FIG10, True),
    (Cnf(2, ((1, 1, 2), (-1, -1, 2), (1, 1, -2), (-1, -1, -2))), False),
])
def test_equivalence_examples(cnf, sat):
    assert (brute_force_sat(cnf) is not None) == sat
    assert (realizable(build_reduction(cnf, DELTA)) is not None) == sat
    assert check_equivalence(cnf, DELTA)


def test_prescribed_weights_follow_the_formula():
    g = build_reduction(FIG10, DELTA)
    for bits in itertools.product((0, 1), repeat=3):
        theta = g.prescribed(bits)
        for i in range(3):
            assert g.probe(theta, f"chi{i + 1}") == bits[i]
            assert g.probe(theta, f"y_hat{i + 1}") == 1.0
        for j, c in enumerate(FIG10.clauses):
            truth = any((l > 0) == bool(bits[abs(l) - 1]) for l in c)
            assert g.probe(theta, f"c{j + 1}") == pytest.approx(float(truth), abs=1e-12)
        z = g.probe(theta, "z")
        if FIG10.satisfied_by(bits):
            assert z == pytest.approx(0.5, abs=1e-9)
        else:
            assert z <= -0.5 + 1e-9


def test_non_binary_choice_is_penalised():
    g = build_reduction(Cnf(1, ((1, 1, 1),)), DELTA)
    theta = g.prescribed((1,))
    theta[g.main_inputs[0][0]] = DELTA / 2  # chi = 1/2
    assert g.probe(theta, "y_hat1") < 1.0
    assert g.net.forward_params(theta[None], g.x)[0] < 0.5


@pytest.mark.parametrize("cnf", [Cnf(1, ((1, 1, 1), (-1, -1, -1))),
                                 Cnf(2, ((1, 1, 2), (-1, -1, 2), (1, 1, -2), (-1, -1, -2)))])
def test_unsat_box_stays_below_threshold_on_samples(cnf):
    g = build_reduction(cnf, DELTA)
    thetas = np.random.default_rng(0).uniform(g.lo, g.hi, size=(20_000, g.lo.size))
    assert g.net.forward_params(thetas, g.x).max() < 0.5


def test_generating_gadget():
    assert generating(DELTA, -1 / DELTA) == pytest.approx(1.0)
    assert generating(0.0, -1 / DELTA) == 0.0
    assert generating(DELTA / 2, -1 / DELTA) == pytest.approx(0.5)
    assert generating(2 * DELTA, -1 / DELTA) == 1.0  # saturates


def test_discretizer_lemma():
    assert discretizer(0.0) == 1.0 and discretizer(1.0) == 1.0
    interior = np.linspace(0, 1, 102)[1:-1]
    assert np.all(discretizer(interior) < 1.0)


def test_negation_lemma():
    high = np.linspace(1 - 2 * DELTA, 1, 50)
    assert negation(0.0) == 1.0
    out = negation(high)
    assert np.all((0 <= out) & (out <= 2 * DELTA))


@pytest.mark.parametrize("delta", [0.01, 0.05, 0.079])
def test_clause_lemma(delta):
    low = np.linspace(0, 2 * delta, 7)
    high = np.linspace(1 - 2 * delta, 1, 7)
    vals = np.concatenate([low, high])
    for t in itertools.product(vals, repeat=3):
        c = clause(*t)
        if max(t) < 1 - 2 * delta:
            assert 0 <= c <= clause_low_bound(delta)
        else:
            assert clause_high_bound(delta) <= c <= 1


def test_conjunction_gap():
    for delta in (0.05, 0.079):
        assert clause_low_bound(delta) < clause_high_bound(delta)
    assert clause_low_bound(0.079) == pytest.approx(8 * 0.079 + 2 * 0.079 ** 2)


def test_end_lemma():
    n, m = 3, 2
    for nt in np.linspace(0, n, 13):
        for ct in np.linspace(0, m, 9):
            assert (end(nt, ct, n, m) == 0.5) == (nt == n and ct == m)


def test_lemma_bundle():
    assert all(gadget_lemmas(DELTA, 0.079).values())


def test_canonical_family_size():
    cnfs = list(canonical_cnfs(1, 2))
    # 4 literal multisets of size 3 over {x1, -x1}; formulas of 1 or 2 such clauses
    assert len(cnfs) == 4 + 10
    assert all(check_equivalence(c) for c in cnfs)


def test_random_formulas():
    assert all(check_equivalence(c) for c in random_cnfs(15, seed=3))
