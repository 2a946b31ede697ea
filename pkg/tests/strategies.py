"""Hypothesis strategies for random discrete structural models."""
import itertools

from hypothesis import strategies as st

from vaxmed.scm import StructuralModel, bernoulli_node

PROB = st.integers(1, 19).map(lambda k: k / 20)


@st.composite
def binary_models(draw, min_nodes=3, max_nodes=5, coupling=None):
    """Random binary SCM over nodes N0..Nk with edges respecting index order."""
    n = draw(st.integers(min_nodes, max_nodes))
    names = [f"N{k}" for k in range(n)]
    specs = []
    for j, name in enumerate(names):
        parents = [names[i] for i in range(j) if draw(st.booleans())]
        probs = {c: draw(PROB) for c in itertools.product((0, 1), repeat=len(parents))}
        cp = coupling or draw(st.sampled_from(["monotone", "independent"]))
        if len(parents) > 2:
            cp = "monotone"  # independent coupling grows as 2^(2^k) atoms
        specs.append(bernoulli_node(name, parents, probs if parents else probs[()], cp))
    return StructuralModel(specs)


@st.composite
def mediation_models(draw, coupling=None):
    """Randomised A -> B -> Y with A -> Y, arbitrary risks."""
    cp = coupling or draw(st.sampled_from(["monotone", "independent"]))
    return StructuralModel([
        bernoulli_node("A", (), draw(PROB)),
        bernoulli_node("B", ("A",), {(0,): draw(PROB), (1,): draw(PROB)}, cp),
        bernoulli_node("Y", ("A", "B"), {c: draw(PROB) for c in itertools.product((0, 1), repeat=2)}, cp),
    ])


@st.composite
def figure_s1_models(draw):
    cp = draw(st.sampled_from(["monotone", "independent"]))
    return StructuralModel([
        bernoulli_node("A", (), draw(PROB)),
        bernoulli_node("BM", ("A",), {(0,): draw(PROB), (1,): draw(PROB)}, cp),
        bernoulli_node("BSC", ("A",), {(0,): draw(PROB), (1,): draw(PROB)}, cp),
        bernoulli_node("Y", ("A", "BM", "BSC"), {c: draw(PROB) for c in itertools.product((0, 1), repeat=3)}, cp),
    ])
