"""Canned desk-scale experiments with pass/fail bounds read from a versioned tolerance file."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .apds import apds
from .enumeration import enumerate_shifts, provable_delta
from .evaluation.noms import expectation_test
from .network import Network
from .reduction import (Cnf, build_reduction, check_equivalence, clause, clause_high_bound,
                        clause_low_bound, discretizer, end, negation)
from .zoo import (ENUMERATION_CFX, TWO_RELU_CFX, enumeration_network, find_valid_input,
                  random_network, two_relu_network)

EXPERIMENTS = ("fig5-apds", "fig5-enumeration", "lemma3-witness", "prop1-ordering",
               "reduction-suite")


def load_tolerances() -> dict:
    text = resources.files("robustcfx").joinpath("data/reproduce_tolerances.json").read_text()
    return json.loads(text)


@dataclass
class Outcome:
    experiment: str
    passed: bool
    metrics: dict = field(default_factory=dict)


# -- instance families --------------------------------------------------------

_SHAPES = ((1, (3,)), (2, (3,)), (2, (4,)), (3, (4,)), (2, (3, 2)), (2, (4, 2)), (3, (3, 3)))


def random_instance(rng: np.random.Generator, input_dim: int, hidden: tuple[int, ...], *,
                    biases: bool = False, margin: float = 0.05,
                    tries: int = 100) -> tuple[Network, np.ndarray]:
    """A random net plus an input it classifies 1 with some margin; redraws nets as needed."""
    for _ in range(tries):
        net = random_network(rng, input_dim, hidden, biases=biases)
        x = find_valid_input(net, rng, margin=margin, tries=2000)
        if x is not None:
            return net, x
    raise RuntimeError("could not find a net with a valid counterfactual")


def small_instances(count: int, seed: int = 0) -> list[tuple[Network, np.ndarray]]:
    """Nets with at most two hidden layers and at most 30 parameters."""
    out = []
    for i in range(count):
        d, h = _SHAPES[i % len(_SHAPES)]
        out.append(random_instance(np.random.default_rng([seed, i]), d, h, biases=bool(i % 2)))
    return out


def canonical_cnfs(max_vars: int = 3, max_clauses: int = 3):
    """Every formula over n <= max_vars variables with 1..max_clauses clauses, treating
    clauses as literal multisets and formulas as clause multisets."""
    for n in range(1, max_vars + 1):
        lits = [s * v for v in range(1, n + 1) for s in (1, -1)]
        clauses = list(itertools.combinations_with_replacement(lits, 3))
        for m in range(1, max_clauses + 1):
            for cs in itertools.combinations_with_replacement(clauses, m):
                yield Cnf(n, cs)


def random_cnfs(count: int, max_vars: int = 6, max_clauses: int = 8, seed: int = 0):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n = int(rng.integers(1, max_vars + 1))
        m = int(rng.integers(1, max_clauses + 1))
        lits = rng.integers(1, n + 1, size=(m, 3)) * rng.choice((-1, 1), size=(m, 3))
        yield Cnf(n, tuple(map(tuple, lits.tolist())))


def gadget_lemmas(delta: float = 0.05, gap_delta: float = 0.079) -> dict[str, bool]:
    """Numeric checks of the gadget contracts at the prescribed weights."""
    interior = np.linspace(0.0, 1.0, 102)[1:-1]
    low = np.linspace(0.0, 2 * delta, 5)
    high = np.linspace(1 - 2 * delta, 1.0, 5)
    lit_values = np.concatenate([low, high])
    all_low = [clause(*t) for t in itertools.product(low, repeat=3)]
    some_high = [clause(*t) for t in itertools.product(lit_values, repeat=3)
                 if max(t) >= 1 - 2 * delta]
    neg_ok = (np.all(negation(high) <= 2 * delta) and negation(0.0) == 1.0)
    n, m = 3, 2
    end_ok = all((end(a, b, n, m) == 0.5) == (a == n and b == m)
                 for a in np.linspace(0, n, 13) for b in np.linspace(0, m, 9))
    return {
        "discretizer": bool(discretizer(0.0) == 1.0 and discretizer(1.0) == 1.0
                            and np.all(discretizer(interior) < 1.0)),
        "negation": bool(neg_ok),
        "clause": bool(max(all_low) <= clause_low_bound(delta)
                       and min(some_high) >= clause_high_bound(delta)),
        "conjunction_gap": bool(clause_low_bound(gap_delta) < clause_high_bound(gap_delta)),
        "end": bool(end_ok),
    }


# -- experiments --------------------------------------------------------------

def fig5_apds(tol: dict) -> Outcome:
    net = enumeration_network()
    deltas = [apds(net, ENUMERATION_CFX, None, tol["R"], seed, miss=tol["miss"], n=tol["n"]).delta_max
              for seed in range(tol["seeds"])]
    hits = sum(tol["delta_lo"] <= d <= tol["delta_hi"] for d in deltas)
    return Outcome("fig5-apds", hits >= tol["min_pass"],
                   {"delta_max": deltas, "in_range": hits, "required": tol["min_pass"]})


def fig5_enumeration(tol: dict) -> Outcome:
    rep = enumerate_shifts(enumeration_network(), ENUMERATION_CFX, tol["delta"],
                           max_depth=tol["max_depth"])
    other = rep.nonrobust_fraction + rep.unknown_fraction
    ok = rep.robust_fraction >= tol["min_robust"] and other <= tol["max_other"]
    return Outcome("fig5-enumeration", ok, rep.as_dict())


def lemma3_witness(tol: dict) -> Outcome:
    res = expectation_test(two_relu_network(), TWO_RELU_CFX, tol["delta"], tol["n"], 0,
                           reference=tol["threshold"], alternative="greater")
    ok = res.mean > tol["threshold"] and res.pvalue < tol["p_max"]
    return Outcome("lemma3-witness", ok, {"mean": res.mean, "std": res.std, "n": res.n,
                                          "pvalue": res.pvalue, "threshold": tol["threshold"]})


def prop1_ordering(tol: dict) -> Outcome:
    rows = []
    for i, (net, x) in enumerate(small_instances(tol["n_nets"], tol["seed"])):
        p = provable_delta(net, x)
        a = apds(net, x, tol["alpha"], tol["R"], seed=i).delta_max
        rows.append((p, a))
    holds = sum(p <= a for p, a in rows)
    return Outcome("prop1-ordering", holds == len(rows),
                   {"provable": [p for p, _ in rows], "apds": [a for _, a in rows],
                    "ordered": holds, "total": len(rows)})


def reduction_suite(tol: dict) -> Outcome:
    canon = list(canonical_cnfs(tol["max_vars"], tol["max_clauses"]))
    bad = [c.to_dimacs() for c in canon if not check_equivalence(c, tol["delta"])]
    rand = list(random_cnfs(tol["n_random"], tol["random_max_vars"], tol["random_max_clauses"]))
    bad += [c.to_dimacs() for c in rand if not check_equivalence(c, tol["delta"])]
    lemmas = gadget_lemmas(tol["delta"], tol["gap_delta"])
    centre_ok = all(build_reduction(c, tol["delta"]).centre_output < 0.5 for c in rand)
    ok = not bad and all(lemmas.values()) and centre_ok
    return Outcome("reduction-suite", ok, {"canonical": len(canon), "random": len(rand),
                                           "disagreements": len(bad), "lemmas": lemmas,
                                           "centre_below_threshold": centre_ok})


_RUNNERS = {
    "fig5-apds": fig5_apds,
    "fig5-enumeration": fig5_enumeration,
    "lemma3-witness": lemma3_witness,
    "prop1-ordering": prop1_ordering,
    "reduction-suite": reduction_suite,
}


def reproduce(experiment: str, tolerances: dict | None = None) -> Outcome:
    if experiment not in _RUNNERS:
        raise ValueError(f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    tol = (tolerances or load_tolerances())[experiment]
    return _RUNNERS[experiment](tol)
