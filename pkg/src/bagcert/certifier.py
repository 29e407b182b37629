"""Certified poisoning sizes for bagging.

For a training set of size ``n`` and subsample size ``k``, a prediction with
probability bounds ``p_lower > p_upper`` is certified against ``r`` poisoned
examples when, for every poisoned size ``n'`` in ``[n - r, n + r]``,

    (n'/n)^k - 2 ((max(n, n') - r)/n)^k + 1 - gap < 0,

where ``gap`` is ``p_lower - p_upper`` after rounding both bounds onto the
``1/n^k`` grid of the subsample measure. All of this is evaluated exactly:
probabilities are read as the rational value of their binary float and the
powers are Python integers.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import mpmath

from .bounds import bonferroni_alpha, simuem
from .errors import DomainError, ValidationError

ATTACKS = ("general", "modify", "delete", "insert")
_ATTACK_ALIASES = {"all": "general", "general": "general", "modify": "modify", "delete": "delete", "insert": "insert"}
CERT_COLUMNS = ["id", "predicted_label", "abstain", "p_lower", "p_upper_runner",
                "r_general", "r_modify", "r_delete", "r_insert"]
ABSTAIN = "ABSTAIN"

_CLOSED_FORM_DPS = 60


def normalize_attack(name: str) -> str:
    try:
        return _ATTACK_ALIASES[name]
    except KeyError:
        raise ValidationError(f"unknown attack model {name!r}") from None


@dataclass(frozen=True)
class CertInputs:
    n: int
    k: int
    p_lower: float | Fraction
    p_upper_runner: float | Fraction
    attack: str = "general"

    def __post_init__(self):
        if self.n < 1 or self.k < 1:
            raise ValidationError("n and k must be positive")
        pl, ps = Fraction(self.p_lower), Fraction(self.p_upper_runner)
        if not (0 <= ps <= 1 and 0 <= pl <= 1):
            raise ValidationError("probability bounds must lie in [0, 1]")
        if not pl > ps:
            raise ValidationError(f"abstain inputs: p_lower={self.p_lower} <= p_upper_runner={self.p_upper_runner}")
        object.__setattr__(self, "attack", normalize_attack(self.attack))


@dataclass(frozen=True)
class Residuals:
    delta_l: Fraction
    delta_s: Fraction


@dataclass(frozen=True)
class ConstraintEval:
    value: Fraction
    gamma: Fraction
    x_root: float


def residuals(p_lower, p_upper_runner, n: int, k: int) -> Residuals:
    """Distance from each bound to the nearest grid point of width ``1/n^k`` in the safe direction."""
    scale = n**k
    pl, ps = Fraction(p_lower), Fraction(p_upper_runner)
    delta_l = pl - Fraction(math.floor(pl * scale), scale)
    delta_s = Fraction(math.ceil(ps * scale), scale) - ps
    return Residuals(delta_l, delta_s)


def adjusted_gap(p_lower, p_upper_runner, n: int, k: int) -> Fraction:
    """``p_lower - p_upper - delta_l - delta_s``; always a multiple of ``1/n^k``."""
    scale = n**k
    pl, ps = Fraction(p_lower), Fraction(p_upper_runner)
    return Fraction(math.floor(pl * scale) - math.ceil(ps * scale), scale)


def _shape_term(n: int, k: int, r: int, n_prime: int) -> int:
    """``n'^k - 2 m^k`` with ``m = max(n, n') - r``: the numerator of L(n') up to constants."""
    m = max(n, n_prime) - r
    return n_prime**k - 2 * m**k


def _check_range(n, r, n_prime):
    if not n - r <= n_prime <= n + r:
        raise DomainError(f"n'={n_prime} outside [{n - r}, {n + r}]")
    if max(n, n_prime) - r < 0:
        raise DomainError(f"max(n, n') - r is negative for n={n}, n'={n_prime}, r={r}")


def constraint_lhs(n: int, k: int, r: int, n_prime: int, gap) -> Fraction:
    """Exact value of the certification constraint's left-hand side at ``n'``."""
    _check_range(n, r, n_prime)
    return Fraction(_shape_term(n, k, r, n_prime), n**k) + 1 - Fraction(gap)


def _x_root(k: int, r: int) -> float:
    if k < 2:
        return math.nan
    return r / (1.0 - 0.5 ** (1.0 / (k - 1)))


def evaluate_constraint(n: int, k: int, r: int, n_prime: int, gap) -> ConstraintEval:
    return ConstraintEval(
        value=constraint_lhs(n, k, r, n_prime, gap),
        gamma=Fraction(n_prime**k, n**k),
        x_root=_x_root(k, r),
    )


def argmax_nprime(n: int, k: int, r: int) -> tuple[int, ...]:
    """At most two poisoned-set sizes at which the constraint's LHS peaks.

    On ``[n - r, n]`` the LHS increases with ``n'``; on ``[n, n + r]`` it rises
    up to ``r / (1 - 2^(-1/(k-1)))`` and falls afterwards.
    """
    if r == 0:
        return (n,)
    if k == 1:
        # the LHS is linear in n' for k = 1; compare both ends of [n, n + r]
        return (n, n + r)
    h = 0.5 ** (1.0 / (k - 1))
    if r <= n * (1.0 - h):
        return (n,)
    if r >= n * (2.0 ** (1.0 / (k - 1)) - 1.0):
        return (n + r,)
    x = r / (1.0 - h)
    lo, hi = n, n + r
    cands = sorted({min(max(math.floor(x), lo), hi), min(max(math.ceil(x), lo), hi)})
    return tuple(cands)


def _best_shape_term(n: int, k: int, r: int) -> int:
    """Exact ``max over n' in [n-r, n+r]`` of ``n'^k - 2 (max(n, n') - r)^k``."""
    lo, hi = n, n + r
    cache: dict[int, int] = {}

    def T(v):
        if v not in cache:
            cache[v] = _shape_term(n, k, r, v)
        return cache[v]

    cands = set(argmax_nprime(n, k, r)) | {lo, hi}
    best = max(cands, key=lambda v: (T(v), -v))
    # float thresholds can misplace the peak by one; climb to the exact integer optimum
    while best + 1 <= hi and T(best + 1) > T(best):
        best += 1
    while best - 1 >= lo and T(best - 1) > T(best):
        best -= 1
    return max(T(v) for v in cands | {best})


def max_constraint(n: int, k: int, r: int, gap) -> Fraction:
    """Exact maximum of the constraint LHS over all ``n'`` in ``[n - r, n + r]``."""
    if r < 0 or r > n:
        raise DomainError(f"r must lie in [0, n], got {r}")
    return Fraction(_best_shape_term(n, k, r), n**k) + 1 - Fraction(gap)


def _restricted_term(n: int, k: int, r: int, attack: str) -> int:
    if attack == "general":
        return _best_shape_term(n, k, r)
    if attack == "modify":
        return _shape_term(n, k, r, n)
    if attack == "delete":
        return _shape_term(n, k, r, n - r)
    if attack == "insert":
        return _shape_term(n, k, r, n + r)
    raise ValidationError(f"unknown attack model {attack!r}")


def _feasible(n: int, k: int, r: int, gap: Fraction, attack: str) -> bool:
    # L < 0  <=>  (T + n^k) * den - num * n^k < 0, all in integers
    scale = n**k
    term = _restricted_term(n, k, r, attack)
    return (term + scale) * gap.denominator - gap.numerator * scale < 0


def certified_size(inputs: CertInputs) -> int:
    """Largest ``r`` in ``[0, n]`` satisfying the constraint for ``inputs.attack``.

    Binary search is valid because the constraint only gets harder as ``r``
    grows. Returns 0 when not even ``r = 0`` passes the grid-adjusted check.
    """
    n, k = inputs.n, inputs.k
    gap = adjusted_gap(inputs.p_lower, inputs.p_upper_runner, n, k)
    lo, hi = 0, n
    if not _feasible(n, k, 0, gap, inputs.attack):
        return 0
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if _feasible(n, k, mid, gap, inputs.attack):
            lo = mid
        else:
            hi = mid - 1
    return lo


def certified_size_general(inputs: CertInputs) -> int:
    if inputs.attack != "general":
        inputs = CertInputs(inputs.n, inputs.k, inputs.p_lower, inputs.p_upper_runner, "general")
    return certified_size(inputs)


def _closed_form(inputs: CertInputs, root_of) -> int:
    gap = adjusted_gap(inputs.p_lower, inputs.p_upper_runner, inputs.n, inputs.k)
    with mpmath.workdps(_CLOSED_FORM_DPS):
        g = mpmath.mpf(gap.numerator) / gap.denominator
        value = mpmath.ceil(inputs.n * root_of(g, mpmath.mpf(1) / inputs.k) - 1)
    return max(int(value), 0)


def closed_form_modify(inputs: CertInputs) -> int:
    """Certified size when the attacker only modifies examples (``n' = n``)."""
    return _closed_form(inputs, lambda g, inv_k: 1 - (1 - g / 2) ** inv_k)


def closed_form_delete(inputs: CertInputs) -> int:
    """Certified size when the attacker only deletes examples (``n' = n - r``)."""
    return _closed_form(inputs, lambda g, inv_k: 1 - (1 - g) ** inv_k)


def closed_form_insert(inputs: CertInputs) -> int:
    """Certified size when the attacker only inserts examples (``n' = n + r``)."""
    return _closed_form(inputs, lambda g, inv_k: (1 + g) ** inv_k - 1)


@dataclass(frozen=True)
class Certificate:
    id: object
    label: Optional[int]
    p_lower: float
    p_upper_runner: float
    r_star: Mapping[str, Optional[int]] = field(default_factory=dict)

    @property
    def abstain(self) -> bool:
        return self.label is None

    def radius(self, attack: str = "general") -> Optional[int]:
        return self.r_star.get(normalize_attack(attack))


def certify_counts(counts: Sequence[int], n: int, k: int, N: int, c: int, alpha_effective: float,
                   attacks: Iterable[str] = ATTACKS, id=None) -> Certificate:
    bounds = simuem(counts, N, c, alpha_effective)
    if bounds.abstain:
        return Certificate(id, None, bounds.p_lower, bounds.p_upper_runner, {a: None for a in attacks})
    r_star = {}
    for attack in attacks:
        r_star[attack] = certified_size(CertInputs(n, k, bounds.p_lower, bounds.p_upper_runner, attack))
    return Certificate(id, bounds.l, bounds.p_lower, bounds.p_upper_runner, r_star)


def certify_all(votes, alpha: float, attacks: Iterable[str] = ATTACKS) -> list[Certificate]:
    """Predicted label and certified sizes for every row of a vote table.

    The error budget ``alpha`` is split evenly across the ``e`` test examples,
    so with probability at least ``1 - alpha`` every non-abstaining certificate
    is simultaneously correct.
    """
    attacks = tuple(dict.fromkeys(normalize_attack(a) for a in attacks))
    if votes.c < 2:
        raise ValidationError("vote table needs at least two labels")
    alpha_eff = bonferroni_alpha(alpha, votes.e)
    memo: dict[tuple, Certificate] = {}
    certs = []
    for ex_id, row in zip(votes.ids, votes.counts.tolist()):
        key = tuple(row)
        if key not in memo:
            memo[key] = certify_counts(row, votes.n, votes.k, votes.N, votes.c, alpha_eff, attacks)
        cert = memo[key]
        certs.append(Certificate(ex_id, cert.label, cert.p_lower, cert.p_upper_runner, cert.r_star))
    return certs


def certified_accuracy(certs: Sequence[Certificate], truth: Sequence[int], r: int, attack: str = "general") -> float:
    """Fraction of examples predicted correctly with certified size at least ``r``."""
    if len(certs) != len(truth):
        raise ValidationError(f"{len(certs)} certificates but {len(truth)} labels")
    if not certs:
        raise ValidationError("no certificates")
    attack = normalize_attack(attack)
    hits = 0
    for cert, y in zip(certs, truth):
        if cert.abstain or cert.label != int(y):
            continue
        radius = cert.radius(attack)
        if radius is not None and radius >= r:
            hits += 1
    return hits / len(certs)


def accuracy_curve(certs, truth, r_max: int, attack: str = "general") -> list[tuple[int, float]]:
    return [(r, certified_accuracy(certs, truth, r, attack)) for r in range(r_max + 1)]


def write_certificates(certs: Sequence[Certificate], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CERT_COLUMNS)
        for cert in certs:
            radii = []
            for attack in ATTACKS:
                if attack not in cert.r_star:
                    radii.append("")
                elif cert.abstain:
                    radii.append(ABSTAIN)
                else:
                    radii.append(cert.r_star[attack])
            writer.writerow([cert.id, ABSTAIN if cert.abstain else cert.label, int(cert.abstain),
                             repr(float(cert.p_lower)), repr(float(cert.p_upper_runner))] + radii)


def read_certificates(path: str | Path) -> list[Certificate]:
    certs = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CERT_COLUMNS:
            raise ValidationError(f"{path}: expected header {','.join(CERT_COLUMNS)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                abstain = row["abstain"] == "1"
                r_star = {}
                for attack in ATTACKS:
                    cell = row[f"r_{attack}"]
                    if cell == "":
                        continue
                    r_star[attack] = None if cell == ABSTAIN else int(cell)
                label = None if abstain else int(row["predicted_label"])
                ex_id = int(row["id"]) if row["id"].lstrip("-").isdigit() else row["id"]
                certs.append(Certificate(ex_id, label, float(row["p_lower"]), float(row["p_upper_runner"]), r_star))
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"{path}: line {lineno}: {exc}") from None
    return certs
