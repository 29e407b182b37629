"""Acceptance suite: one PASS/FAIL line per criterion, printed even without ``-s``."""

import math
import time
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from bagcert.bounds import simuem
from bagcert.certifier import (
    CertInputs,
    argmax_nprime,
    certified_accuracy,
    certified_size,
    certified_size_general,
    certify_all,
    closed_form_delete,
    closed_form_insert,
    closed_form_modify,
)
from bagcert.cli import main
from bagcert.dataset import make_blobs, save_csv
from bagcert.ensemble import VoteTable, train_votes
from bagcert.learners import BaseLearnerSpec
from bagcert.oracle import run_oracle_suite


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[acceptance {number:2d}] {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail

    return emit


@pytest.fixture(scope="module")
def random_configs():
    rng = np.random.default_rng(20240601)
    configs = []
    for _ in range(1000):
        n = int(rng.integers(10, 10**5 + 1))
        k = int(rng.integers(2, 501))
        gap = 1.0 - float(rng.random())  # (0, 1]
        configs.append((n, k, gap))
    return configs


def test_01_closed_form_equivalence(report, random_configs):
    start = time.perf_counter()
    mismatches = []
    for n, k, gap in random_configs:
        for attack, closed in (("modify", closed_form_modify), ("delete", closed_form_delete),
                               ("insert", closed_form_insert)):
            inp = CertInputs(n, k, gap, 0.0, attack)
            if certified_size(inp) != closed(inp):
                mismatches.append((n, k, gap, attack))
    elapsed = time.perf_counter() - start
    report(1, not mismatches and elapsed < 60,
           f"{3 * len(random_configs)} searches vs closed forms, {len(mismatches)} mismatches, {elapsed:.1f}s")


def _exhaustive_max_terms(n, k):
    """max over n' in [n-r, n+r] of n'^k - 2(max(n,n') - r)^k, for every r in [0, n]."""
    pw = [v**k for v in range(2 * n + 1)]
    out = []
    for r in range(n + 1):
        out.append(max(pw[v] - 2 * pw[max(n, v) - r] for v in range(n - r, n + r + 1)))
    return out


def _scan_r_star(max_terms, scale, grid_gap):
    feasible = [t + scale - grid_gap < 0 for t in max_terms]
    r_star = 0
    for r, ok in enumerate(feasible):
        if not ok:
            break
        r_star = r
    monotone = not any(feasible[r_star + 1:])
    return r_star, monotone


def test_02_brute_force_solver_equivalence(report):
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    pairs = []
    for i in range(200):
        if i < 150:
            pl = 0.5 + 0.5 * float(rng.random())
            ps = (1.0 - pl) * float(rng.random())
        else:
            a, b = sorted(float(v) for v in rng.random(2))
            pl, ps = b, a
        if not pl > ps:
            pl, ps = 0.9, 0.1
        pairs.append((pl, ps))
    fractions = [(Fraction(pl), Fraction(ps)) for pl, ps in pairs]
    checked, mismatches, non_monotone = 0, [], 0
    for n in range(1, 61):
        for k in range(1, 7):
            scale = n**k
            terms = _exhaustive_max_terms(n, k)
            for (pl, ps), (fl, fs) in zip(pairs, fractions):
                grid_gap = math.floor(fl * scale) - math.ceil(fs * scale)
                want, monotone = _scan_r_star(terms, scale, grid_gap)
                non_monotone += not monotone
                got = certified_size_general(CertInputs(n, k, pl, ps))
                checked += 1
                if got != want:
                    mismatches.append((n, k, pl, ps, got, want))
    elapsed = time.perf_counter() - start
    report(2, not mismatches and non_monotone == 0 and elapsed < 300,
           f"{checked} instances, {len(mismatches)} mismatches, {non_monotone} non-monotone, {elapsed:.1f}s")


def test_03_maximizer_candidates(report):
    start = time.perf_counter()
    checked, misses = 0, []
    for n in range(1, 201):
        for k in range(2, 11):
            pw = [v**k for v in range(2 * n + 1)]
            for r in range(n + 1):
                top = max(pw[v] - 2 * pw[max(n, v) - r] for v in range(n - r, n + r + 1))
                best = max(pw[v] - 2 * pw[max(n, v) - r] for v in argmax_nprime(n, k, r))
                checked += 1
                if best != top:
                    misses.append((n, k, r))
    elapsed = time.perf_counter() - start
    report(3, not misses and elapsed < 120, f"{checked} (n, k, r) triples, {len(misses)} misses, {elapsed:.1f}s")


@pytest.fixture(scope="module")
def oracle_report():
    start = time.perf_counter()
    rep = run_oracle_suite(max_n=6, max_k=3, witness_n=5, witness_k=3)
    return rep, time.perf_counter() - start


def test_04_oracle_soundness(report, oracle_report):
    rep, elapsed = oracle_report
    failures = [f for f in rep.failures if f["check"] == "soundness"]
    checked = sum(inst["checked"] for inst in rep.soundness)
    report(4, rep.soundness and not failures and rep.skipped == 0 and elapsed < 300,
           f"{len(rep.soundness)} instances, {checked} poisoned datasets, {len(failures)} violations, "
           f"{elapsed:.1f}s")


def test_05_tightness_witness(report, oracle_report):
    rep, elapsed = oracle_report
    witnessed = [w for w in rep.witnesses if w["witness_beyond"]]
    failures = [f for f in rep.failures if f["check"] == "tightness"]
    report(5, len(witnessed) >= 20 and not failures and elapsed < 120,
           f"{len(witnessed)} exact witnesses at r*+1, {len(failures)} failures, {elapsed:.1f}s")


def _independent_r_star(n, k, N, alpha, e, c, digits=600):
    """High-precision evaluation with an exhaustive max over n', sharing no code with the package."""
    with mpmath.workdps(digits):
        level = mpmath.mpf(alpha) / e / c
        p_lower = level ** (mpmath.mpf(1) / N)  # Beta(level; N, 1) quantile
        p_upper = 1 - p_lower  # unanimous votes: per-label bound and clamp coincide
        scale = n**k
        grid_gap = int(mpmath.floor(p_lower * scale)) - int(mpmath.ceil(p_upper * scale))
    powers = {}

    def pw(v):
        if v not in powers:
            powers[v] = v**k
        return powers[v]

    r = 0
    while r + 1 <= n:
        q = r + 1
        worst = max(pw(v) - 2 * pw(max(n, v) - q) for v in range(n - q, n + q + 1))
        if not worst + scale - grid_gap < 0:
            break
        r = q
    return r


def test_06_mnist_scale(report):
    n, k, N, alpha, e, c = 60000, 100, 1000, 0.001, 10000, 10
    votes = VoteTable([[N] + [0] * (c - 1)] * e, n=n, k=k, N=N, c=c, seed=0, learner="centroid")
    certs = certify_all(votes, alpha, attacks=("general",))
    pipeline = {cert.radius("general") for cert in certs}
    independent = _independent_r_star(n, k, N, alpha, e, c)
    ok = len(pipeline) == 1 and pipeline == {independent} and independent >= 100
    report(6, ok, f"pipeline r*={sorted(pipeline)}, independent r*={independent}")


def test_07_attack_ordering(report, random_configs):
    bad_order, bad_regime, regime_cases = [], [], 0
    for n, k, gap in random_configs:
        r = {a: certified_size(CertInputs(n, k, gap, 0.0, a)) for a in ("general", "modify", "insert", "delete")}
        if not r["general"] <= r["modify"] <= r["insert"] <= r["delete"]:
            bad_order.append((n, k, gap, r))
        if r["modify"] <= n * (1 - 0.5 ** (1 / (k - 1))):
            regime_cases += 1
            if r["general"] != r["modify"]:
                bad_regime.append((n, k, gap, r))
    report(7, not bad_order and not bad_regime,
           f"{len(random_configs)} configs, {len(bad_order)} ordering violations, "
           f"{len(bad_regime)}/{regime_cases} regime mismatches")


COVERAGE_CASES = [
    ([0.4, 0.3, 0.2, 0.1], 200, 0.05),
    ([0.7, 0.2, 0.1], 1000, 0.05),
    ([0.5, 0.5], 100, 0.05),
    ([0.9, 0.05, 0.03, 0.02], 500, 0.1),
    ([0.35] + [0.65 / 9] * 9, 300, 0.01),
]


def test_08_statistical_coverage(report):
    start = time.perf_counter()
    trials = 10_000
    rng = np.random.default_rng(8)
    lines, ok = [], True
    for probs, N, alpha_eff in COVERAGE_CASES:
        probs = np.asarray(probs)
        c = len(probs)
        failures = 0
        cache = {}
        for counts in rng.multinomial(N, probs, size=trials):
            key = tuple(int(v) for v in counts)
            if key not in cache:
                b = simuem(key, N, c, alpha_eff)
                others = max(p for j, p in enumerate(probs) if j != b.l)
                cache[key] = b.p_lower > probs[b.l] or b.p_upper_runner < others
            failures += cache[key]
        rate = failures / trials
        limit = alpha_eff + 3 * math.sqrt(alpha_eff * (1 - alpha_eff) / trials)
        ok &= rate <= limit
        lines.append(f"c={c},N={N}: {rate:.4f}<={limit:.4f}")
    elapsed = time.perf_counter() - start
    report(8, ok and elapsed < 180, "; ".join(lines) + f"; {elapsed:.1f}s")


def _zero_radius(certs, truth, attack="general"):
    """Smallest r with CA_r = 0."""
    radii = [c.radius(attack) for c, y in zip(certs, truth) if not c.abstain and c.label == y]
    return max(radii) + 1 if radii else 0


def test_09_k_tradeoff(report):
    ks = (5, 10, 30, 100, 500)
    bad = []
    for n in (1000, 10000, 60000):
        for gap in (0.2, 0.5, 0.8, 0.95, 1.0):
            radii = [certified_size(CertInputs(n, k, gap, 0.0, "modify")) for k in ks]
            if any(a < b for a, b in zip(radii, radii[1:])):
                bad.append((n, gap, radii))
    train = make_blobs(500, 4, spread=1.5, seed=1)
    test = make_blobs(200, 4, spread=1.5, seed=2)
    spec = BaseLearnerSpec("centroid")
    summary = {}
    for k in (5, 20):
        votes = train_votes(train, spec, k, 1000, 7, test)
        certs = certify_all(votes, 0.001, attacks=("general",))
        truth = test.labels.tolist()
        summary[k] = (certified_accuracy(certs, truth, 0), _zero_radius(certs, truth))
    ok = not bad and summary[20][0] >= summary[5][0] and summary[20][1] < summary[5][1]
    report(9, ok, f"{len(bad)} non-monotone (n, gap) rows; end-to-end k=5: CA_0={summary[5][0]:.3f}, "
                  f"zero at r={summary[5][1]}; k=20: CA_0={summary[20][0]:.3f}, zero at r={summary[20][1]}")


def test_10_determinism(report, tmp_path):
    train, test = tmp_path / "train.csv", tmp_path / "test.csv"
    save_csv(make_blobs(300, 3, seed=11), train)
    save_csv(make_blobs(60, 3, seed=12), test)
    outputs = []
    for run in ("a", "b"):
        votes, certs, curve = (tmp_path / f"{run}_{name}" for name in ("votes.json", "certs.csv", "curve.csv"))
        codes = [
            main(["train", "--dataset", str(train), "--test", str(test), "--k", "15", "--n-classifiers", "300",
                  "--seed", "42", "--out", str(votes)]),
            main(["certify", "--votes", str(votes), "--alpha", "0.001", "--out", str(certs)]),
            main(["curve", "--certificates", str(certs), "--truth", str(test), "--r-max", "20", "--out", str(curve)]),
        ]
        assert codes == [0, 0, 0]
        outputs.append([p.read_bytes() for p in (votes, certs, curve)])
    report(10, outputs[0] == outputs[1], "train -> certify -> curve outputs byte-identical across two runs")
