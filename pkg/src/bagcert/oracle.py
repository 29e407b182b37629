"""Exhaustive small-scale checks of the certification guarantees.

Everything here is exact: label probabilities are rationals obtained by
enumerating all ``n**k`` ordered subsamples, and poisoned datasets are
enumerated as multisets over a finite universe of examples.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .dataset import Dataset, Example, Subsample
from .errors import BudgetExceeded, ValidationError
from .learners import BaseLearnerSpec, fit

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 10**7

Content = tuple  # (features tuple, label)


@dataclass(frozen=True)
class ExactDistribution:
    p: tuple[Fraction, ...]

    def __post_init__(self):
        if sum(self.p) != 1:
            raise ValueError("label probabilities must sum to one")

    @property
    def top(self) -> int:
        return max(range(len(self.p)), key=lambda j: (self.p[j], -j))

    @property
    def strict(self) -> bool:
        """True when the top label's probability exceeds every other label's."""
        l = self.top
        return all(self.p[l] > q for j, q in enumerate(self.p) if j != l)

    def runner_up(self) -> Fraction:
        l = self.top
        return max((q for j, q in enumerate(self.p) if j != l), default=Fraction(0))


def _content(example: Example) -> Content:
    return (tuple(example.features), example.label)


class _Predictor:
    """Memoised ``A(ω, x)`` keyed by the ordered contents of ``ω``."""

    def __init__(self, spec: BaseLearnerSpec, x, c: int):
        if spec.randomized:
            raise ValidationError("exact enumeration needs a deterministic learner")
        self.spec = spec
        self.x = np.asarray(x, dtype=np.float64)
        self.c = c
        self.cache: dict[tuple, int] = {}

    def __call__(self, contents: tuple) -> int:
        label = self.cache.get(contents)
        if label is None:
            ds = Dataset([f for f, _ in contents], [y for _, y in contents], self.c)
            clf = fit(self.spec, ds, Subsample(tuple(range(len(contents)))))
            label = clf.predict(self.x)
            self.cache[contents] = label
        return label


def exact_label_probabilities(dataset: Dataset, spec: BaseLearnerSpec, k: int, x,
                              budget: int = DEFAULT_BUDGET) -> ExactDistribution:
    """Label probabilities by brute force over all ordered index tuples."""
    n = dataset.n
    if n**k > budget:
        raise BudgetExceeded(f"n^k = {n}^{k} exceeds the enumeration budget {budget}")
    predictor = _Predictor(spec, x, dataset.c)
    contents = [_content(ex) for ex in dataset]
    tally = [0] * dataset.c
    for tup in itertools.product(range(n), repeat=k):
        tally[predictor(tuple(contents[i] for i in tup))] += 1
    total = n**k
    return ExactDistribution(tuple(Fraction(t, total) for t in tally))


def _exact_from_counts(multiset: Sequence[tuple[Content, int]], k: int, c: int,
                       predictor: _Predictor) -> ExactDistribution:
    # Same ordered enumeration, with index tuples that share contents grouped:
    # a content tuple (u_1..u_k) stands for prod(mult(u_i)) index tuples.
    items = [(u, m) for u, m in multiset if m > 0]
    n = sum(m for _, m in items)
    tally = [0] * c
    for combo in itertools.product(items, repeat=k):
        weight = 1
        for _, m in combo:
            weight *= m
        tally[predictor(tuple(u for u, _ in combo))] += weight
    total = n**k
    return ExactDistribution(tuple(Fraction(t, total) for t in tally))


def exact_ensemble_prediction(dataset: Dataset, spec: BaseLearnerSpec, k: int, x,
                              budget: int = DEFAULT_BUDGET) -> int:
    """Label with the largest exact probability; ties go to the smaller label."""
    return exact_label_probabilities(dataset, spec, k, x, budget).top


def binomial_reference(dataset: Dataset, k: int, label: int, tie_policy: str = "smallest") -> Fraction:
    """Closed-form label probability for the majority-label learner, two classes only.

    ``tie_policy`` says where the mass of an evenly split subsample goes:
    ``"smallest"`` (label 0, matching the built-in learner), ``"largest"`` or ``"none"``.
    """
    if dataset.c != 2:
        raise ValidationError("binomial reference needs exactly two labels")
    if tie_policy not in ("smallest", "largest", "none"):
        raise ValidationError(f"unknown tie policy {tie_policy!r}")
    q = Fraction(int(np.sum(dataset.labels == label)), dataset.n)
    total = Fraction(0)
    for j in range(k + 1):
        mass = math.comb(k, j) * q**j * (1 - q) ** (k - j)
        if 2 * j > k:
            total += mass
        elif 2 * j == k:
            tie_winner = {"smallest": 0, "largest": 1, "none": None}[tie_policy]
            if tie_winner == label:
                total += mass
    return total


def binary_universe(d: int, c: int) -> list[Example]:
    """All examples with features in ``{0, 1}^d`` and labels in ``[0, c)``."""
    return [Example(tuple(float(b) for b in bits), y)
            for bits in itertools.product((0, 1), repeat=d) for y in range(c)]


def _compositions(total: int, parts: int):
    """All non-negative integer vectors of length ``parts`` summing to ``total``."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def poisoned_datasets(base_counts: Sequence[int], r: int):
    """Every multiset ``D'`` (as a count vector) within distance ``r`` of ``base_counts``.

    Distance is ``max(|D|, |D'|) - |D ∩ D'|`` with multiset intersection.
    """
    n = sum(base_counts)
    for size in range(max(1, n - r), n + r + 1):
        for counts in _compositions(size, len(base_counts)):
            common = sum(min(a, b) for a, b in zip(base_counts, counts))
            if max(n, size) - common <= r:
                yield counts


@dataclass
class SoundnessReport:
    passed: bool
    label: Optional[int]
    r: int
    checked: int = 0
    outcome: str = ""
    violation: Optional[list] = None
    violation_p: Optional[list] = None

    def to_dict(self):
        return asdict(self)


def verify_soundness(dataset: Dataset, spec: BaseLearnerSpec, k: int, x, r: int,
                     universe: Sequence[Example], budget: int = DEFAULT_BUDGET,
                     _predictor: _Predictor | None = None, _memo: dict | None = None) -> SoundnessReport:
    """Check that no poisoned dataset within distance ``r`` changes the exact prediction.

    ``outcome`` is ``"robust"`` when every ``D'`` keeps the label strictly,
    ``"violated"`` when some ``D'`` loses it or ties, and ``"abstain"`` when the
    clean prediction is itself tied.
    """
    elements = sorted({_content(ex) for ex in universe} | {_content(ex) for ex in dataset})
    c = max(dataset.c, 1 + max(y for _, y in elements))
    index = {u: i for i, u in enumerate(elements)}
    base = [0] * len(elements)
    for ex in dataset:
        base[index[_content(ex)]] += 1
    predictor = _predictor or _Predictor(spec, x, c)
    memo = {} if _memo is None else _memo

    def dist(counts):
        key = (k, tuple(counts))
        if key not in memo:
            memo[key] = _exact_from_counts(list(zip(elements, counts)), k, c, predictor)
        return memo[key]

    clean = dist(base)
    if not clean.strict:
        return SoundnessReport(False, None, r, 0, "abstain")
    label = clean.top
    candidates = list(poisoned_datasets(base, r))
    cost = len(candidates) * len(elements) ** k
    if cost > budget:
        raise BudgetExceeded(f"soundness sweep needs ~{cost} evaluations, budget is {budget}")
    for i, counts in enumerate(candidates, start=1):
        p = dist(counts)
        if p.top != label or not p.strict:
            bad = [[list(u[0]), u[1], m] for u, m in zip(elements, counts) if m]
            return SoundnessReport(False, label, r, i, "violated", bad, [str(q) for q in p.p])
    return SoundnessReport(True, label, r, len(candidates), "robust")


@dataclass
class WitnessReport:
    found: bool
    reason: str = ""
    n: int = 0
    k: int = 0
    r: int = 0
    n_prime: Optional[int] = None
    m: Optional[int] = None
    region_sizes: dict = field(default_factory=dict)
    x_probs: list = field(default_factory=list)
    y_probs: list = field(default_factory=list)
    analytic_y_prob_l: Optional[str] = None
    partition_ok: bool = False
    consistent: bool = False
    holds: bool = False

    def to_dict(self):
        return asdict(self)


def _violation(n: int, k: int, r: int, n_prime: int, gap: Fraction) -> Fraction:
    m = max(n, n_prime) - r
    return Fraction(n_prime, n) ** k - 2 * Fraction(m, n) ** k + 1 - gap


def tightness_witness(n: int, k: int, c: int, p_lower, p_upper, r: int,
                      budget: int = DEFAULT_BUDGET) -> WitnessReport:
    """Build an adversarial learner and poisoned dataset that defeat label ``l`` at radius ``r``.

    Examples of ``D`` are abstract ids ``0..n-1``; the first ``m`` of them are
    kept in ``D'`` and ``n' - m`` fresh ids are added. The learner is defined
    directly on subsamples: ``l`` on ``R = B ∪ B'``, ``s`` on ``C ∪ C'_s`` and
    the remaining labels on the leftover tuples, with label ``l = 0`` and
    runner-up ``s = 1``.
    """
    pl, ps = Fraction(p_lower), Fraction(p_upper)
    scale = n**k
    if (pl * scale).denominator != 1 or (ps * scale).denominator != 1:
        raise ValidationError("bounds must be integer multiples of 1/n^k")
    if not (pl + ps <= 1 and pl + (c - 1) * ps >= 1 and pl >= ps):
        raise ValidationError("bounds violate p_l + p_s <= 1, p_l + (c-1) p_s >= 1 or p_l >= p_s")
    if c < 2 or r < 0 or r > n:
        raise ValidationError("need c >= 2 and 0 <= r <= n")
    report = WitnessReport(False, n=n, k=k, r=r)
    gap = pl - ps
    violating = [(v, _violation(n, k, r, v, gap)) for v in range(max(n - r, 1), n + r + 1)
                 if max(n, v) - r >= 0]
    violating = [(v, val) for v, val in violating if val >= 0]
    if not violating:
        report.reason = "no witness: the constraint holds for every n' at this radius"
        return report
    n_prime = max(violating, key=lambda t: (t[1], -t[0]))[0]
    m = max(n, n_prime) - r
    if n**k + n_prime**k > budget:
        raise BudgetExceeded(f"witness enumeration needs {n ** k + n_prime ** k} tuples, budget is {budget}")

    new_ids = list(range(n, n + n_prime - m))
    d_prime = list(range(m)) + new_ids
    omega_x = list(itertools.product(range(n), repeat=k))       # B ∪ E, lexicographic
    omega_y = list(itertools.product(d_prime, repeat=k))         # C ∪ E
    E = [w for w in omega_x if max(w) < m]
    B = [w for w in omega_x if max(w) >= m]
    C = [w for w in omega_y if max(w) >= n]

    want_l, want_s = int(pl * scale), int(ps * scale)
    assign: dict[tuple, int] = {}
    reduced = want_l < len(B)
    if reduced:
        # B alone carries more than p_l; take R inside B (it has no Y-mass)
        R = B[:want_l]
        pool = E + B[want_l:]
    else:
        R = B + E[: want_l - len(B)]
        pool = E[want_l - len(B):]
    for w in R:
        assign[w] = 0
    for w in C:
        assign[w] = 1
    C_s = pool[:want_s]
    for w in C_s:
        assign[w] = 1
    rest = pool[want_s:]
    for j in range(2, c):
        chunk, rest = rest[:want_s], rest[want_s:]
        for w in chunk:
            assign[w] = j
    if rest:
        raise ValidationError("leftover subsample mass could not be assigned within the runner-up bound")

    ids_B, ids_C, ids_E = set(B), set(C), set(E)
    report.partition_ok = (
        not (ids_B & ids_C or ids_B & ids_E or ids_C & ids_E)
        and len(ids_B) + len(ids_C) + len(ids_E) == len(set(omega_x) | set(omega_y))
        and len(E) == m**k
    )
    x_tally, y_tally = [0] * c, [0] * c
    for w in omega_x:
        x_tally[assign[w]] += 1
    for w in omega_y:
        y_tally[assign[w]] += 1
    x_probs = [Fraction(t, scale) for t in x_tally]
    y_probs = [Fraction(t, n_prime**k) for t in y_tally]
    report.consistent = x_probs[0] == pl and x_probs[1] == ps and all(q <= ps for q in x_probs[2:])
    report.found = True
    report.n_prime, report.m = n_prime, m
    report.region_sizes = {"B": len(B), "C": len(C), "E": len(E), "R": len(R),
                           "C_s": len(C_s), "reduced_R": reduced}
    report.x_probs = [str(q) for q in x_probs]
    report.y_probs = [str(q) for q in y_probs]
    if not reduced:
        gamma = Fraction(n_prime, n) ** k
        report.analytic_y_prob_l = str((pl - (1 - Fraction(m, n) ** k)) / gamma)
    report.holds = report.consistent and report.partition_ok and y_probs[0] <= y_probs[1]
    report.reason = "witness found" if report.holds else "construction failed"
    return report


# ---------------------------------------------------------------------------
# suite used by ``bagcert oracle``

CertifyFn = Callable[[int, int, Fraction, Fraction], int]


def _default_certify(n, k, p_lower, p_upper):
    from .certifier import CertInputs, certified_size_general
    return certified_size_general(CertInputs(n, k, p_lower, p_upper))


def soundness_grid(max_n: int = 6, max_k: int = 3, d: int = 1, c: int = 2):
    """Every dataset of size ``<= max_n`` over the binary universe, paired with each ``k``."""
    universe = binary_universe(d, c)
    for n in range(1, max_n + 1):
        for counts in _compositions(n, len(universe)):
            examples = [ex for ex, m in zip(universe, counts) for _ in range(m)]
            for k in range(1, max_k + 1):
                yield Dataset.from_examples(examples, c=c), k, universe


def witness_grid(max_n: int = 4, max_k: int = 2, labels=(2, 3)):
    """Bound pairs on the ``1/n^k`` grid that satisfy the tightness assumptions."""
    for n in range(1, max_n + 1):
        for k in range(1, max_k + 1):
            scale = n**k
            for c in labels:
                for a in range(scale + 1):
                    for b in range(a):
                        pl, ps = Fraction(a, scale), Fraction(b, scale)
                        if pl + ps <= 1 and pl + (c - 1) * ps >= 1:
                            yield n, k, c, pl, ps


@dataclass
class OracleReport:
    soundness: list = field(default_factory=list)
    witnesses: list = field(default_factory=list)
    skipped: int = 0
    failures: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self):
        return {"passed": self.passed, "soundness_checked": len(self.soundness),
                "witnesses_checked": len(self.witnesses), "skipped": self.skipped,
                "failures": self.failures, "warnings": self.warnings,
                "soundness": self.soundness, "witnesses": self.witnesses}


def run_oracle_suite(budget: int = DEFAULT_BUDGET, certify: CertifyFn | None = None,
                     max_n: int = 6, max_k: int = 3, witness_n: int = 5, witness_k: int = 3,
                     spec: BaseLearnerSpec | None = None) -> OracleReport:
    """Soundness sweep plus tightness witnesses, checking the radii ``certify`` reports.

    For every tiny instance the exact label probabilities are fed to
    ``certify`` as bounds. Soundness is checked over all of ``B(D, r*)``;
    the witness must exist at ``r* + 1`` and must not exist at ``r*``.
    """
    certify = certify or _default_certify
    spec = spec or BaseLearnerSpec("majority")
    report = OracleReport()
    if budget <= 0:
        report.warnings.append("budget is 0: no instances were checked")
        return report
    x = (0.0,)
    memo: dict = {}
    predictors: dict = {}
    for dataset, k, universe in soundness_grid(max_n, max_k):
        key = dataset.c
        predictor = predictors.setdefault(key, _Predictor(spec, x, max(2, dataset.c)))
        elements = sorted({_content(ex) for ex in universe})
        index = {u: i for i, u in enumerate(elements)}
        counts = [0] * len(elements)
        for ex in dataset:
            counts[index[_content(ex)]] += 1
        mkey = (k, tuple(counts))
        if mkey not in memo:
            memo[mkey] = _exact_from_counts(list(zip(elements, counts)), k, dataset.c, predictor)
        p = memo[mkey]
        if not p.strict:
            continue
        r_star = certify(dataset.n, k, p.p[p.top], p.runner_up())
        instance = {"labels": dataset.labels.tolist(), "features": dataset.features.tolist(),
                    "k": k, "r_star": r_star}
        try:
            res = verify_soundness(dataset, spec, k, x, r_star, universe, budget, predictor, memo)
        except BudgetExceeded:
            report.skipped += 1
            continue
        instance.update(passed=res.passed, checked=res.checked, outcome=res.outcome)
        if res.passed and r_star + 1 <= dataset.n:
            try:
                past = verify_soundness(dataset, spec, k, x, r_star + 1, universe, budget, predictor, memo)
                # beyond r* this learner may still resist; only the algorithm class must fail
                instance["beyond_r_star"] = past.outcome
            except BudgetExceeded:
                instance["beyond_r_star"] = "skipped"
        report.soundness.append(instance)
        if not res.passed:
            report.failures.append({"check": "soundness", **instance, "violation": res.violation,
                                    "violation_p": res.violation_p})
    for n, k, c, pl, ps in witness_grid(witness_n, witness_k):
        r_star = certify(n, k, pl, ps)
        instance = {"n": n, "k": k, "c": c, "p_lower": str(pl), "p_upper": str(ps), "r_star": r_star}
        try:
            at = tightness_witness(n, k, c, pl, ps, r_star, budget) if r_star <= n else None
            beyond = tightness_witness(n, k, c, pl, ps, r_star + 1, budget) if r_star + 1 <= n else None
        except BudgetExceeded:
            report.skipped += 1
            continue
        ok = (at is None or not at.found) and (beyond is None or beyond.holds)
        instance.update(passed=ok, witness_at_r_star=bool(at and at.found),
                        witness_beyond=bool(beyond and beyond.holds))
        report.witnesses.append(instance)
        if not ok:
            report.failures.append({"check": "tightness", **instance})
    if report.skipped:
        report.warnings.append(f"{report.skipped} instances skipped by the budget")
    return report
