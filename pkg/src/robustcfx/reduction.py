"""3-SAT to shift-robustness reduction.

Given a 3-CNF formula, build a ReLU network, a fixed input ``x = [1]`` and a
uniform shift box (every edge interval ``[v - 2*delta, v]``) such that some
realization reaches output 1/2 iff the formula is satisfiable. The centre of the
box outputs less than 1/2, so a satisfying assignment is exactly a realization
that flips the decision.

Gadgets, with the weights prescribed for an assignment (every edge other than
the main inputs at the upper end ``v`` of its interval):

* generating: ``u = relu(a)``, ``v = relu(1 + b * u)``, ``chi = relu(1 - v)``,
  which is ``min(1, a / delta)`` at ``b = -1/delta``. The free "main input"
  weights are ``a in [0, 2 delta]`` and ``b in [-1/delta, -1/delta + 2 delta]``;
  ``a = delta`` encodes true and ``a = 0`` false. ``chi`` fans out into one
  ``chi_hat`` and one ``chi_tilde`` per occurrence.
* discretizer: ``y = relu(1 - relu(t) + 2 relu(t - 1/2) - 2 relu(t - 1))``,
  equal to 1 exactly for ``t in {0, 1}``.
* negation: ``relu(1 - t)``.
* clause: ``c = relu(1 - relu(1 - (l1 + l2 + l3)))``, i.e. ``min(1, l1 + l2 + l3)``.
* conjunction: ``c~ = relu(sum c)``. Count: ``n~ = relu(sum y)``.
* end: ``z = n~ + c~ - (n + m) + 1/2`` (identity output).
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field

import numpy as np

from .network import THRESHOLD, DenseLayer, Network

MAX_BRUTE_FORCE_VARS = 6
Z_TOL = 1e-9


class DimacsError(ValueError):
    pass


@dataclass(frozen=True)
class Cnf:
    n_vars: int
    clauses: tuple[tuple[int, int, int], ...]

    def __post_init__(self):
        if self.n_vars < 1:
            raise ValueError("a formula needs at least one variable")
        clauses = tuple(tuple(int(l) for l in c) for c in self.clauses)
        for i, c in enumerate(clauses):
            if len(c) != 3:
                raise ValueError(f"clause {i + 1} has {len(c)} literals; exactly 3 are required")
            for lit in c:
                if lit == 0 or abs(lit) > self.n_vars:
                    raise ValueError(f"clause {i + 1}: literal {lit} out of range 1..{self.n_vars}")
        object.__setattr__(self, "clauses", clauses)

    @property
    def n_clauses(self) -> int:
        return len(self.clauses)

    def satisfied_by(self, assignment) -> bool:
        return all(any((lit > 0) == bool(assignment[abs(lit) - 1]) for lit in c)
                   for c in self.clauses)

    def to_dimacs(self) -> str:
        lines = [f"p cnf {self.n_vars} {self.n_clauses}"]
        lines += [" ".join(map(str, c)) + " 0" for c in self.clauses]
        return "\n".join(lines) + "\n"


def parse_dimacs(text: str) -> Cnf:
    """Parse DIMACS CNF; every clause must have exactly three literals."""
    header = None
    clauses, current = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("%"):
            break
        if line.startswith("p"):
            m = re.fullmatch(r"p\s+cnf\s+(\d+)\s+(\d+)", line)
            if header is not None or m is None:
                raise DimacsError(f"line {lineno}: malformed or repeated header {line!r}")
            header = (int(m.group(1)), int(m.group(2)))
            continue
        if header is None:
            raise DimacsError(f"line {lineno}: clause before 'p cnf' header")
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise DimacsError(f"line {lineno}: bad literal {tok!r}") from None
            if lit == 0:
                if len(current) != 3:
                    raise DimacsError(
                        f"line {lineno}: clause {len(clauses) + 1} has {len(current)} literals, expected 3")
                clauses.append(tuple(current))
                current = []
            elif abs(lit) > header[0]:
                raise DimacsError(f"line {lineno}: literal {lit} exceeds {header[0]} variables")
            else:
                current.append(lit)
    if header is None:
        raise DimacsError("missing 'p cnf' header")
    if current:
        raise DimacsError("last clause is not terminated by 0")
    if len(clauses) != header[1]:
        raise DimacsError(f"header declares {header[1]} clauses, found {len(clauses)}")
    if header[0] < 1:
        raise DimacsError("formula must declare at least one variable")
    return Cnf(header[0], tuple(clauses))


def brute_force_sat(cnf: Cnf) -> tuple[int, ...] | None:
    """First satisfying assignment in lexicographic order, or None."""
    for bits in itertools.product((0, 1), repeat=cnf.n_vars):
        if cnf.satisfied_by(bits):
            return bits
    return None


# -- gadget functions at prescribed weights ----------------------------------

def _relu(v):
    return np.maximum(v, 0.0)


def generating(a: float, b: float) -> float:
    u = _relu(a)
    v = _relu(1.0 + b * u)
    return float(_relu(1.0 - v))


def discretizer(t):
    return _relu(1.0 - _relu(t) + 2.0 * _relu(t - 0.5) - 2.0 * _relu(t - 1.0))


def negation(t):
    return _relu(1.0 - t)


def clause(l1, l2, l3):
    return _relu(1.0 - _relu(1.0 - (l1 + l2 + l3)))


def conjunction(cs):
    return _relu(np.sum(cs, axis=-1))


def end(n_tilde, c_tilde, n: int, m: int):
    return n_tilde + c_tilde - (n + m) + 0.5


def clause_low_bound(delta: float) -> float:
    return 8 * delta + 2 * delta ** 2


def clause_high_bound(delta: float) -> float:
    return 1 - 4 * delta - 4 * delta ** 2


# -- network construction ----------------------------------------------------

@dataclass
class _Node:
    depth: int
    name: str
    edges: list = field(default_factory=list)  # (src id, value, lo, hi)


class _Builder:
    def __init__(self, delta: float):
        self.delta = delta
        self.nodes = [_Node(0, "one")]
        self._relays: dict[tuple[int, int], int] = {}

    def node(self, depth: int, name: str, inputs) -> int:
        """Add a node at ``depth``; ``inputs`` is a list of (src, value[, (lo, hi)])."""
        nid = len(self.nodes)
        self.nodes.append(_Node(depth, name))
        for spec in inputs:
            src, value = spec[0], spec[1]
            lo, hi = spec[2] if len(spec) > 2 else (value - 2 * self.delta, value)
            self.nodes[nid].edges.append((self.at(src, depth - 1), value, lo, hi))
        return nid

    def at(self, src: int, depth: int) -> int:
        """``src`` carried forward to ``depth`` through weight-1 relays."""
        have = self.nodes[src].depth
        if have > depth:
            raise ValueError("edges must point forward")
        cur = src
        for d in range(have + 1, depth + 1):
            key = (src, d)
            if key not in self._relays:
                rid = len(self.nodes)
                self.nodes.append(_Node(d, f"relay({self.nodes[src].name})@{d}",
                                        [(cur, 1.0, 1.0 - 2 * self.delta, 1.0)]))
                self._relays[key] = rid
            cur = self._relays[key]
        return cur


@dataclass
class GadgetNetwork:
    """Centre network plus the uniform shift box of the reduction."""

    cnf: Cnf
    delta: float
    net: Network  # box centres
    mask: np.ndarray
    upper: np.ndarray  # prescribed edge values; zero off-edge
    main_inputs: list[tuple[int, int]]  # flat indices of (a, b) per variable
    probes: dict[str, tuple[int, int]]  # node name -> (layer, row)
    x: np.ndarray = field(default_factory=lambda: np.ones(1))

    @property
    def lo(self) -> np.ndarray:
        return self.net.flatten() - np.where(self.mask, self.delta, 0.0)

    @property
    def hi(self) -> np.ndarray:
        return self.net.flatten() + np.where(self.mask, self.delta, 0.0)

    def prescribed(self, assignment) -> np.ndarray:
        """Realization for an assignment: edges at ``v``, ``a`` = delta or 0, ``b`` = -1/delta."""
        if len(assignment) != self.cnf.n_vars:
            raise ValueError("assignment length must equal the number of variables")
        theta = self.upper.copy()
        for (ia, ib), val in zip(self.main_inputs, assignment):
            theta[ia] = self.delta if val else 0.0
            theta[ib] = -1.0 / self.delta
        return theta

    @property
    def centre_output(self) -> float:
        return self.net.forward(self.x)

    def layer_values(self, theta) -> list[np.ndarray]:
        net = self.net.with_params(theta)
        h = self.x.copy()
        out = [h]
        for layer in net.layers:
            h = layer.weights @ h + layer.biases
            h = np.maximum(h, 0.0) if layer.activation == "relu" else h
            out.append(h)
        return out

    def probe(self, theta, name: str) -> float:
        layer, row = self.probes[name]
        return float(self.layer_values(theta)[layer][row])


def build_reduction(cnf: Cnf, delta: float = 0.05) -> GadgetNetwork:
    if not 0.0 < delta < 2.0 / 25.0:
        raise ValueError(f"delta must lie in (0, 2/25), got {delta!r}")
    B = _Builder(delta)
    one = 0
    n, m = cnf.n_vars, cnf.n_clauses
    occurrences = [[] for _ in range(n)]
    for j, c in enumerate(cnf.clauses):
        for t, lit in enumerate(c):
            occurrences[abs(lit) - 1].append((j, t))

    main_edges, y_hat, literal = [], [], {}
    for i in range(n):
        v = i + 1
        u = B.node(1, f"u{v}", [(one, 2 * delta, (0.0, 2 * delta))])
        w = B.node(2, f"v{v}", [(one, 1.0), (u, -1.0 / delta, (-1.0 / delta, -1.0 / delta + 2 * delta))])
        chi = B.node(3, f"chi{v}", [(one, 1.0), (w, -1.0)])
        main_edges.append((u, w))
        chi_hat = B.node(4, f"chi_hat{v}", [(chi, 1.0)])
        a1 = B.node(5, f"d1_{v}", [(chi_hat, 1.0)])
        a2 = B.node(5, f"d2_{v}", [(chi_hat, 1.0), (one, -0.5)])
        a3 = B.node(5, f"d3_{v}", [(chi_hat, 1.0), (one, -1.0)])
        y_hat.append(B.node(6, f"y_hat{v}", [(one, 1.0), (a1, -1.0), (a2, 2.0), (a3, -2.0)]))
        for r, (j, t) in enumerate(occurrences[i]):
            tilde = B.node(4, f"chi_tilde{v}_{r + 1}", [(chi, 1.0)])
            if cnf.clauses[j][t] < 0:
                tilde = B.node(5, f"not_chi_tilde{v}_{r + 1}", [(one, 1.0), (tilde, -1.0)])
            literal[(j, t)] = tilde

    cs = []
    for j in range(m):
        s = B.node(6, f"clause_gap{j + 1}", [(one, 1.0)] + [(literal[(j, t)], -1.0) for t in range(3)])
        cs.append(B.node(7, f"c{j + 1}", [(one, 1.0), (s, -1.0)]))
    n_tilde = B.node(7, "n_tilde", [(y, 1.0) for y in y_hat])
    c_tilde = B.node(8, "c_tilde", [(c, 1.0) for c in cs])
    z = B.node(9, "z", [(n_tilde, 1.0), (c_tilde, 1.0), (one, -(n + m) + 0.5)])

    return _layerize(B, cnf, delta, main_edges, z)


def _layerize(B: _Builder, cnf: Cnf, delta: float, main_edges, z: int) -> GadgetNetwork:
    depth = B.nodes[z].depth
    by_depth = [[] for _ in range(depth + 1)]
    for nid, node in enumerate(B.nodes):
        if node.depth <= depth and nid != z:
            by_depth[node.depth].append(nid)
    by_depth[depth] = [z]
    # drop nodes that cannot reach the output (unused relays)
    live = {z}
    for d in range(depth, 0, -1):
        for nid in by_depth[d]:
            if nid in live:
                live.update(src for src, *_ in B.nodes[nid].edges)
    by_depth = [[nid for nid in layer if nid in live] for layer in by_depth]
    pos = {nid: (d, r) for d, layer in enumerate(by_depth) for r, nid in enumerate(layer)}

    layers, upper, mask = [], [], []
    main_idx = {}
    offset = 0
    for d in range(1, depth + 1):
        rows, cols = len(by_depth[d]), len(by_depth[d - 1])
        c = np.zeros((rows, cols))
        u = np.zeros((rows, cols))
        mk = np.zeros((rows, cols), dtype=bool)
        for r, nid in enumerate(by_depth[d]):
            for src, value, lo, hi in B.nodes[nid].edges:
                col = pos[src][1]
                c[r, col] = 0.5 * (lo + hi)
                u[r, col] = value
                mk[r, col] = True
                main_idx[(src, nid)] = offset + r * cols + col
        act = "identity" if d == depth else "relu"
        layers.append(DenseLayer(c, np.zeros(rows), act))
        upper.append(u.ravel())
        mask.append(mk.ravel())
        zeros = np.zeros(rows)
        upper.append(zeros)
        mask.append(np.zeros(rows, dtype=bool))
        offset += rows * cols + rows

    net = Network(tuple(layers), {"name": "sat-reduction", "perturb_biases": False})
    main_inputs = [(main_idx[(0, u)], main_idx[(u, w)]) for u, w in main_edges]
    probes = {B.nodes[nid].name: (d, r) for nid, (d, r) in pos.items()}
    return GadgetNetwork(cnf, delta, net, np.concatenate(mask), np.concatenate(upper),
                         main_inputs, probes)


def realizable(g: GadgetNetwork) -> tuple[int, ...] | None:
    """First prescribed realization (in assignment order) whose output reaches 1/2."""
    assignments = list(itertools.product((0, 1), repeat=g.cnf.n_vars))
    thetas = np.stack([g.prescribed(a) for a in assignments])
    out = g.net.forward_params(thetas, g.x)
    hits = np.flatnonzero(out >= THRESHOLD - Z_TOL)
    return assignments[hits[0]] if hits.size else None


def check_equivalence(cnf: Cnf, delta: float = 0.05) -> bool:
    """Brute-force satisfiability agrees with existence of a prescribed realization at 1/2."""
    if cnf.n_vars > MAX_BRUTE_FORCE_VARS:
        raise ValueError(f"brute force is limited to {MAX_BRUTE_FORCE_VARS} variables")
    g = build_reduction(cnf, delta)
    return (brute_force_sat(cnf) is not None) == (realizable(g) is not None)
