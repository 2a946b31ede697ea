"""Plug-in estimators of natural direct and total effects from observed data.

The estimators follow the scikit-learn conventions: hyper-parameters go in
``__init__``, :meth:`fit` takes a :class:`~vaxmed.data.Dataset` or a
DataFrame with one column per node, and results are exposed as trailing
underscore attributes.

Both estimators depend on the data only through the counts of each
``(L, A, B, Y)`` cell, so the nonparametric bootstrap is run by drawing
multinomial cell counts, which has the same law as resampling units.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .data import Dataset, as_dataset
from .exceptions import EstimationError, InputError
from .scm import StructuralModel, observational_pmf

DEFAULT_BOOTSTRAP = 500


@dataclass(frozen=True)
class PositivityFlag:
    """An empty ``(L = stratum, A = a)`` cell, or ``(L, A, B)`` cell when ``b`` is set."""

    stratum: tuple
    a: int
    b: int | None
    count: int
    stratum_size: int

    def __str__(self) -> str:
        cell = f"a={self.a}" if self.b is None else f"a={self.a},b={self.b}"
        return f"L={self.stratum}:{cell}:n={self.count}"


@dataclass(frozen=True)
class PluginEstimate:
    estimate: float
    se: float
    cells_used: int
    positivity_flags: tuple[PositivityFlag, ...]
    n: int

    def __post_init__(self):
        if not math.isnan(self.se) and self.se < 0:
            raise ValueError("standard error must be nonnegative")

    @property
    def reliable(self) -> bool:
        return not self.positivity_flags


def check_columns(data, *columns) -> Dataset:
    """Coerce ``data`` to a Dataset and make sure ``columns`` exist."""
    data = as_dataset(data)
    missing = [c for c in columns if c not in data.frame]
    if missing:
        raise InputError(f"data has no column(s) {missing}")
    return data


def check_binary(data: Dataset, col: str) -> np.ndarray:
    values = data.frame[col].to_numpy()
    if not np.isin(values, (0, 1)).all():
        raise InputError(f"column {col!r} must be binary (0/1)")
    return values.astype(np.int64)


def _strata(data: Dataset, l: Sequence[str]):
    """Observed strata of the adjustment set: codes per unit and the stratum labels."""
    n = len(data)
    if not l:
        return np.zeros(n, dtype=np.int64), [()]
    block = data.frame[list(l)].to_numpy()
    labels, codes = np.unique(block, axis=0, return_inverse=True)
    return codes.reshape(-1), [tuple(int(v) for v in row) for row in labels]


def _encode(values: np.ndarray, support: Sequence) -> np.ndarray:
    support = np.asarray(support)
    order = np.argsort(support)
    pos = np.searchsorted(support[order], values)
    pos = np.minimum(pos, len(support) - 1)
    if not (support[order][pos] == values).all():
        raise InputError("values outside the declared support")
    return order[pos]


@dataclass(frozen=True)
class _Cells:
    counts: np.ndarray  # (L, 2, nb, ny)
    strata: list
    b_support: tuple
    y_values: np.ndarray


def _cells(data: Dataset, a: str, b: str | None, y: str | None, l: Sequence[str]) -> _Cells:
    a_idx = check_binary(data, a)
    codes, strata = _strata(data, l)
    if b is None:
        b_support, b_idx = (None,), np.zeros(len(data), dtype=np.int64)
    else:
        b_support = data.support(b)
        b_idx = _encode(data.frame[b].to_numpy(), b_support)
    if y is None:
        y_support, y_idx = (0,), np.zeros(len(data), dtype=np.int64)
    else:
        y_support = data.support(y)
        y_idx = _encode(data.frame[y].to_numpy(), y_support)
    shape = (len(strata), 2, len(b_support), len(y_support))
    flat = np.ravel_multi_index((codes, a_idx, b_idx, y_idx), shape)
    counts = np.bincount(flat, minlength=math.prod(shape)).reshape(shape)
    return _Cells(counts.astype(float), strata, tuple(b_support), np.asarray(y_support, dtype=float))


def _nde_functional(counts: np.ndarray, y_values: np.ndarray) -> np.ndarray:
    """Mediation formula on (batched) cell weights of shape ``(..., L, 2, nb, ny)``."""
    n_cell = counts.sum(-1)
    s_cell = counts @ y_values
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = s_cell / n_cell
        n_la = n_cell.sum(-1)
        pb0 = n_cell[..., 0, :] / n_la[..., 0, None]
    diff = mean[..., 1, :] - mean[..., 0, :]
    ok = (pb0 > 0) & np.isfinite(diff)
    with np.errstate(invalid="ignore"):
        term = np.where(ok, diff * pb0, 0.0).sum(-1)
    return _pool(term, n_la)


def _total_functional(counts: np.ndarray, y_values: np.ndarray) -> np.ndarray:
    n_la = counts.sum((-1, -2))
    s_la = (counts @ y_values).sum(-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = s_la / n_la
    diff = np.where(np.isfinite(mean[..., 1] - mean[..., 0]), mean[..., 1] - mean[..., 0], 0.0)
    return _pool(diff, n_la)


def _pool(stratum_effect, n_la):
    # strata lacking either exposure arm are dropped, the rest reweighted
    usable = (n_la[..., 0] > 0) & (n_la[..., 1] > 0)
    w = np.where(usable, n_la.sum(-1), 0.0)
    total = w.sum(-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(total > 0, (w * stratum_effect).sum(-1) / total, np.nan)


def _bootstrap_se(counts, y_values, functional, n_bootstrap, random_state) -> float:
    if n_bootstrap < 2:
        return float("nan")
    n = int(counts.sum())
    p = counts.ravel() / n
    seeds = np.random.SeedSequence(random_state).spawn(n_bootstrap)
    draws = np.stack([np.random.default_rng(s).multinomial(n, p) for s in seeds])
    reps = functional(draws.reshape((n_bootstrap,) + counts.shape).astype(float), y_values)
    reps = reps[np.isfinite(reps)]
    if len(reps) < 2:
        return float("nan")
    return float(np.std(reps, ddof=1))


def _flags(cells: _Cells, with_mediator: bool) -> list[PositivityFlag]:
    out = []
    for li, stratum in enumerate(cells.strata):
        size = int(cells.counts[li].sum())
        for a in (0, 1):
            n_a = int(cells.counts[li, a].sum())
            if n_a == 0:
                out.append(PositivityFlag(stratum, a, None, 0, size))
            if with_mediator:
                for bi, b in enumerate(cells.b_support):
                    n_ab = int(cells.counts[li, a, bi].sum())
                    if n_ab == 0:
                        out.append(PositivityFlag(stratum, a, b, 0, size))
    return out


def positivity_report(data, a: str, b: str, l: Sequence[str] = ()) -> list[PositivityFlag]:
    """Every empty ``(stratum, a)`` cell and every empty ``(stratum, a, b)`` cell.

    Strata are the observed combinations of ``l``; ``b`` ranges over its
    declared support (or the observed values when none is declared).
    """
    data = check_columns(data, a, b, *l)
    cells = _cells(data, a, b, None, l)
    return _flags(cells, with_mediator=True)


class _PluginEstimator(BaseEstimator):
    _functional = None
    _with_mediator = True

    def _roles(self):
        raise NotImplementedError

    def fit(self, X, y=None):
        a, b, out, l = self._roles()
        cols = [c for c in (a, b, out, *l) if c is not None]
        if len(set(cols)) != len(cols):
            raise InputError(f"roles must be distinct, got {cols}")
        data = check_columns(X, *cols)
        cells = _cells(data, a, b, out, list(l))
        functional = type(self)._functional
        estimate = float(functional(cells.counts, cells.y_values))
        if math.isnan(estimate):
            raise EstimationError("no adjustment stratum contains both exposure arms")
        self.positivity_flags_ = tuple(_flags(cells, self._with_mediator))
        self.estimate_ = estimate
        self.se_ = _bootstrap_se(cells.counts, cells.y_values, functional, self.n_bootstrap, self.random_state)
        usable = (cells.counts.sum((-1, -2)) > 0).all(-1)
        cell_n = cells.counts.sum(-1)[usable]
        self.cells_used_ = int((cell_n > 0).sum())
        self.n_samples_ = len(data)
        self.strata_ = cells.strata
        return self

    @property
    def reliable_(self) -> bool:
        return not self.positivity_flags_

    @property
    def result_(self) -> PluginEstimate:
        return PluginEstimate(self.estimate_, self.se_, self.cells_used_, self.positivity_flags_, self.n_samples_)


class PluginNDE(_PluginEstimator):
    """Mediation-formula estimate of the natural direct effect.

    Sums, over mediator levels ``b`` and strata ``l`` of the adjustment set,
    the within-cell outcome contrast between exposure arms weighted by
    ``Pr(B=b | A=0, L=l) Pr(L=l)``, all estimated by empirical frequencies.

    Parameters
    ----------
    exposure, mediator, outcome : str
        Column names. Exposure must be 0/1.
    adjust : tuple of str
        Discrete adjustment columns ``L``.
    n_bootstrap : int, default 500
        Bootstrap replicates for the standard error.
    random_state : int or None
        Seed for the bootstrap.

    Attributes
    ----------
    estimate_, se_ : float
    positivity_flags_ : tuple of PositivityFlag
        Empty cells. Missing terms are skipped (available-case) and the
        estimate is then marked unreliable.
    cells_used_ : int
    """

    _functional = staticmethod(_nde_functional)

    def __init__(self, exposure="A", mediator="B", outcome="Y", adjust=(), n_bootstrap=DEFAULT_BOOTSTRAP, random_state=None):
        self.exposure = exposure
        self.mediator = mediator
        self.outcome = outcome
        self.adjust = adjust
        self.n_bootstrap = n_bootstrap
        self.random_state = random_state

    def _roles(self):
        return self.exposure, self.mediator, self.outcome, tuple(self.adjust)


class PluginTotal(_PluginEstimator):
    """Standardised (back-door adjusted) risk difference for the total effect."""

    _functional = staticmethod(_total_functional)
    _with_mediator = False

    def __init__(self, exposure="A", outcome="Y", adjust=(), n_bootstrap=DEFAULT_BOOTSTRAP, random_state=None):
        self.exposure = exposure
        self.outcome = outcome
        self.adjust = adjust
        self.n_bootstrap = n_bootstrap
        self.random_state = random_state

    def _roles(self):
        return self.exposure, None, self.outcome, tuple(self.adjust)


def plugin_nde(data, a: str, b: str, y: str, l: Sequence[str] = (), n_bootstrap: int = DEFAULT_BOOTSTRAP, seed=None) -> PluginEstimate:
    return PluginNDE(a, b, y, tuple(l), n_bootstrap, seed).fit(data).result_


def plugin_total(data, a: str, y: str, l: Sequence[str] = (), n_bootstrap: int = DEFAULT_BOOTSTRAP, seed=None) -> PluginEstimate:
    return PluginTotal(a, y, tuple(l), n_bootstrap, seed).fit(data).result_


def misclassify_mediator(data, b: str, flip_prob: float, seed=None) -> Dataset:
    """Copy of ``data`` with each unit's binary ``b`` flipped with probability ``flip_prob``.

    Flips are independent of every other column (non-differential).
    """
    if not 0.0 <= flip_prob <= 1.0:
        raise InputError(f"flip_prob must lie in [0, 1], got {flip_prob}")
    data = check_columns(data, b)
    values = check_binary(data, b)
    flips = np.random.default_rng(seed).random(len(values)) < flip_prob
    corrupted = np.where(flips, 1 - values, values).astype(data.frame[b].dtype)
    return data.replace(**{b: corrupted})


class MediatorMisclassifier(TransformerMixin, BaseEstimator):
    """Transformer wrapper around :func:`misclassify_mediator`."""

    def __init__(self, mediator="B", flip_prob=0.1, random_state=None):
        self.mediator = mediator
        self.flip_prob = flip_prob
        self.random_state = random_state

    def fit(self, X, y=None):
        data = check_columns(X, self.mediator)
        check_binary(data, self.mediator)
        if not 0.0 <= self.flip_prob <= 1.0:
            raise InputError(f"flip_prob must lie in [0, 1], got {self.flip_prob}")
        self.n_features_in_ = len(data.columns)
        return self

    def transform(self, X):
        out = misclassify_mediator(X, self.mediator, self.flip_prob, self.random_state)
        return out.frame if not isinstance(X, Dataset) else out


def _population_cells(model: StructuralModel, a, b, y, l, flip_prob=0.0):
    nodes = list(l) + [a] + ([b] if b is not None else []) + [y]
    pmf = observational_pmf(model, nodes)
    probs = pmf.probs
    if b is not None and flip_prob:
        if set(model.support(b)) != {0, 1}:
            raise InputError("misclassification needs a binary mediator")
        axis = len(l) + 1
        probs = (1 - flip_prob) * probs + flip_prob * np.flip(probs, axis=axis)
    if tuple(model.support(a)) != (0, 1):
        raise InputError(f"exposure {a} must have support (0, 1)")
    n_l = math.prod(probs.shape[: len(l)])
    nb = probs.shape[len(l) + 1] if b is not None else 1
    cells = probs.reshape(n_l, 2, nb, -1)
    return cells, np.asarray(model.support(y), dtype=float)


def plugin_nde_limit(model: StructuralModel, a: str, b: str, y: str, l: Sequence[str] = (), flip_prob: float = 0.0) -> float:
    """Large-sample limit of :class:`PluginNDE` on data drawn from ``model``.

    With ``flip_prob`` the mediator is misclassified non-differentially before
    estimation; the joint law then mixes each cell with its flipped twin.
    """
    cells, y_values = _population_cells(model, a, b, y, tuple(l), flip_prob)
    return float(_nde_functional(cells, y_values))


def plugin_total_limit(model: StructuralModel, a: str, y: str, l: Sequence[str] = ()) -> float:
    cells, y_values = _population_cells(model, a, None, y, tuple(l))
    return float(_total_functional(cells, y_values))
