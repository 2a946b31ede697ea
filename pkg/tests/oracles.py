"""Reference computations that share no code with the package under test."""
from __future__ import annotations

import itertools
from fractions import Fraction


def _descendants(edges, node):
    seen, stack = {node}, [node]
    while stack:
        u = stack.pop()
        for s, t in edges:
            if s == u and t not in seen:
                seen.add(t)
                stack.append(t)
    return seen


def undirected_paths(nodes, edges, x, y):
    adj = {n: [] for n in nodes}
    for s, t in edges:
        adj[s].append(t)
        adj[t].append(s)

    def rec(path):
        u = path[-1]
        if u == y:
            yield list(path)
            return
        for v in adj[u]:
            if v not in path:
                path.append(v)
                yield from rec(path)
                path.pop()

    yield from rec([x])


def path_open(edges, path, z):
    z = set(z)
    es = set(edges)
    for k in range(1, len(path) - 1):
        prev, mid, nxt = path[k - 1], path[k], path[k + 1]
        collider = (prev, mid) in es and (nxt, mid) in es
        if collider:
            if not (_descendants(edges, mid) & z):
                return False
        elif mid in z:
            return False
    return True


def brute_dsep(nodes, edges, x, y, z):
    return not any(path_open(edges, p, z) for p in undirected_paths(nodes, edges, x, y))


def bn_joint(order, cpts):
    """Exact joint pmf of a binary Bayesian network as {assignment tuple: probability}.

    ``cpts[node] = (parents, fn)`` where ``fn(**parent_values)`` gives Pr(node = 1).
    Probabilities are Fractions when the CPT entries are.
    """
    joint = {}
    for vals in itertools.product((0, 1), repeat=len(order)):
        v = dict(zip(order, vals))
        p = 1
        for n in order:
            parents, fn = cpts[n]
            q = fn(**{k: v[k] for k in parents})
            p *= q if v[n] == 1 else 1 - q
        joint[vals] = p
    return joint


def mediation_formula(order, joint, a, b, y, l):
    """Sum over (l, b) of {E[Y|1,b,l] - E[Y|0,b,l]} Pr(b|A=0,l) Pr(l) from an exact joint."""
    idx = {n: k for k, n in enumerate(order)}

    def pr(**fixed):
        return sum(p for vals, p in joint.items() if all(vals[idx[k]] == v for k, v in fixed.items()))

    total = 0
    for lv in itertools.product((0, 1), repeat=len(l)):
        lf = dict(zip(l, lv))
        pl = pr(**lf)
        for bv in (0, 1):
            diff = 0
            for av, sign in ((1, 1), (0, -1)):
                den = pr(**lf, **{a: av, b: bv})
                diff += sign * pr(**lf, **{a: av, b: bv, y: 1}) / den
            pb = pr(**lf, **{a: 0, b: bv}) / pr(**lf, **{a: 0})
            total += diff * pb * pl
    return total


def standardized_total(order, joint, a, y, l):
    idx = {n: k for k, n in enumerate(order)}

    def pr(**fixed):
        return sum(p for vals, p in joint.items() if all(vals[idx[k]] == v for k, v in fixed.items()))

    total = 0
    for lv in itertools.product((0, 1), repeat=len(l)):
        lf = dict(zip(l, lv))
        diff = pr(**lf, **{a: 1, y: 1}) / pr(**lf, **{a: 1}) - pr(**lf, **{a: 0, y: 1}) / pr(**lf, **{a: 0})
        total += diff * pr(**lf)
    return total


# Worked example in exact arithmetic.
T1_B = {0: Fraction(3, 10), 1: Fraction(7, 10)}
T1_Y = {(0, 0): Fraction(25, 100), (0, 1): Fraction(35, 100), (1, 0): Fraction(14, 100), (1, 1): Fraction(21, 100)}


def t1_risk(a_y, a_b):
    """E[Y^{a_y, B^{a_b}}] for the worked example."""
    pb = T1_B[a_b]
    return pb * T1_Y[(a_y, 1)] + (1 - pb) * T1_Y[(a_y, 0)]
