"""Independent oracles used by the test suite.

These deliberately re-derive results along different code paths than the
library (set arithmetic, exhaustive enumeration, plain-python loops) so a
test never checks an implementation against itself.
"""

from __future__ import annotations

import itertools
import math

from screenforge.chem_graph import Molecule


def _atom_key(mol: Molecule, i: int):
    a = mol.atoms[i]
    return (a.element, a.formal_charge, a.isotope or 0, a.aromatic, mol.total_h(i))


def brute_force_isomorphic(a: Molecule, b: Molecule) -> bool:
    """Backtracking graph-isomorphism check for small molecules."""
    n = len(a.atoms)
    if n != len(b.atoms) or len(a.bonds) != len(b.bonds):
        return False
    keys_a = sorted(_atom_key(a, i) for i in range(n))
    keys_b = sorted(_atom_key(b, i) for i in range(n))
    if keys_a != keys_b:
        return False

    bonds_a = {(min(x.a, x.b), max(x.a, x.b)): x.order for x in a.bonds}
    bonds_b = {(min(x.a, x.b), max(x.a, x.b)): x.order for x in b.bonds}
    candidates = [
        [j for j in range(n) if _atom_key(b, j) == _atom_key(a, i)] for i in range(n)
    ]
    mapping: dict[int, int] = {}
    used: set[int] = set()

    def extend(i: int) -> bool:
        if i == n:
            return True
        for j in candidates[i]:
            if j in used:
                continue
            ok = True
            for (x, y), order in bonds_a.items():
                if x == i and y in mapping:
                    if bonds_b.get((min(j, mapping[y]), max(j, mapping[y]))) != order:
                        ok = False
                        break
                elif y == i and x in mapping:
                    if bonds_b.get((min(j, mapping[x]), max(j, mapping[x]))) != order:
                        ok = False
                        break
            if ok:
                # also forbid extra bonds in b between mapped atoms
                for x, y in mapping.items():
                    key_a = (min(i, x), max(i, x))
                    key_b = (min(j, y), max(j, y))
                    if (key_a in bonds_a) != (key_b in bonds_b):
                        ok = False
                        break
            if ok:
                mapping[i] = j
                used.add(j)
                if extend(i + 1):
                    return True
                del mapping[i]
                used.discard(j)
        return False

    return extend(0)


def tanimoto_set_oracle(a, b) -> float:
    """|A n B| / |A u B| over the set-bit index sets."""
    sa = {i for i, bit in enumerate(a) if bit}
    sb = {i for i, bit in enumerate(b) if bit}
    if not sa and not sb:
        return 1.0
    return len(sa & sb) / len(sa | sb)


def tanimoto_formula_oracle(a, b) -> float:
    """Direct evaluation of T = A.B / (|A|^2 + |B|^2 - A.B), plain python."""
    dot = sum(x * y for x, y in zip(a, b))
    na = sum(x * x for x in a)
    nb = sum(y * y for y in b)
    denom = na + nb - dot
    return 1.0 if denom == 0 else dot / denom


def mlp_forward_oracle(weights, biases, activation, x):
    """Plain-python affine/activation chain, no numpy."""
    values = list(x)
    last = len(weights) - 1
    for layer, (w, b) in enumerate(zip(weights, biases)):
        nxt = []
        for row, bias in zip(w, b):
            z = sum(wi * vi for wi, vi in zip(row, values)) + bias
            if layer == last:
                nxt.append(z)
            elif activation == "relu":
                nxt.append(max(z, 0.0))
            else:
                nxt.append(math.tanh(z))
        values = nxt
    return values[0]


def fit_value_oracle(hypothesis, mol: Molecule) -> float:
    """Exhaustive enumeration of every injective mapping from hypothesis
    slots onto molecule features, kind-checked per mapping."""
    from screenforge.pharmacophore import detect_features, feature_distance

    feats = detect_features(mol)
    slots = hypothesis.features
    n = len(slots)
    weights = [w for _, w in slots]
    best = 0.0
    found_complete = False
    for combo in itertools.permutations(range(len(feats)), n):
        if any(feats[m].kind != slots[s][0] for s, m in enumerate(combo)):
            continue
        found_complete = True
        score = 0.0
        for (i, j), (constraint, tol) in hypothesis.pair_constraints.items():
            d = feature_distance(mol, feats[combo[i]], feats[combo[j]])
            if math.isinf(d) and math.isinf(constraint):
                dev = 0.0
            elif math.isinf(d) or math.isinf(constraint):
                continue
            else:
                dev = abs(d - constraint)
            score += (weights[i] + weights[j]) / (n - 1) * max(0.0, 1.0 - dev / (tol + 1.0))
        best = max(best, score)
    return best if found_complete else 0.0


def least_squares_oracle(xs, ys):
    """Closed-form 1-D least squares (slope, intercept)."""
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    var = sum((x - mx) ** 2 for x in xs)
    if var == 0:
        return 0.0, my
    slope = sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / var
    return slope, my - slope * mx
