"""``bagcert`` command line: train votes, certify, certified-accuracy curves, oracle.

Exit codes: 0 success, 1 verification failure, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from . import certifier, oracle
from .dataset import Dataset, load_csv, load_idx
from .ensemble import VoteTable, train_votes
from .errors import BagcertError, ValidationError
from .learners import BaseLearnerSpec

log = logging.getLogger("bagcert")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
LEARNERS = ("centroid", "nb", "majority")


@dataclass
class RunConfig:
    dataset: list = field(default_factory=list)
    test: list = field(default_factory=list)
    learner: BaseLearnerSpec = field(default_factory=BaseLearnerSpec)
    k: int = 30
    N: int = 1000
    alpha: float = 0.001
    seed: int = 0
    attacks: tuple = certifier.ATTACKS
    out: Optional[str] = None
    num_classes: Optional[int] = None
    workers: int = 1

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")
        if self.N < 1:
            raise ValidationError(f"N must be >= 1, got {self.N}")


def read_config_file(path: str | Path) -> list[str]:
    """Turn a flat ``key = value`` file into argv tokens (``--key value``)."""
    tokens: list[str] = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}: line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        flag = "--" + key.replace("_", "-")
        tokens.append(flag)
        if flag in ("--dataset", "--test"):
            tokens.extend(value.split())
        else:
            tokens.append(value)
    return tokens


def _parse_attacks(text: str) -> tuple[str, ...]:
    names = [a.strip() for a in text.split(",") if a.strip()]
    if not names:
        raise ValidationError("at least one attack model is required")
    return tuple(dict.fromkeys(certifier.normalize_attack(a) for a in names))


def _load_dataset(paths: Sequence[str], c: Optional[int]) -> Dataset:
    if len(paths) == 1:
        return load_csv(paths[0], c=c)
    if len(paths) == 2:
        return load_idx(paths[0], paths[1], c=c or 10)
    raise ValidationError("give one CSV path or an IDX images/labels pair")


def _read_truth(path: str | Path) -> dict:
    """Map example id -> true label from ``id,label`` or a ``label,f0,...`` dataset CSV."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValidationError(f"{path}: empty file")
        truth = {}
        if header[:2] == ["id", "label"]:
            for lineno, row in enumerate(reader, start=2):
                try:
                    truth[int(row[0])] = int(row[1])
                except (ValueError, IndexError):
                    raise ValidationError(f"{path}: line {lineno}: bad id/label row") from None
            return truth
    ds = load_csv(path)
    return dict(enumerate(ds.labels.tolist()))


def cmd_train(cfg: RunConfig) -> int:
    train = _load_dataset(cfg.dataset, cfg.num_classes)
    test = _load_dataset(cfg.test, cfg.num_classes)
    c = cfg.num_classes or max(train.c, test.c)
    train, test = train.with_classes(c), test.with_classes(c)
    start = time.perf_counter()
    votes = train_votes(train, cfg.learner, cfg.k, cfg.N, cfg.seed, test, workers=cfg.workers)
    elapsed = time.perf_counter() - start
    votes.save(cfg.out)
    print(f"trained N={cfg.N} classifiers with k={cfg.k} on n={train.n} examples "
          f"in {elapsed:.2f}s; votes for {votes.e} test examples -> {cfg.out}")
    return EXIT_OK


def cmd_certify(votes_path: str, alpha: float, attacks: Sequence[str], out: str) -> int:
    votes = VoteTable.load(votes_path)
    certs = certifier.certify_all(votes, alpha, attacks)
    certifier.write_certificates(certs, out)
    abstained = sum(c.abstain for c in certs)
    print(f"certified {len(certs)} examples ({abstained} abstained) at alpha={alpha} -> {out}")
    return EXIT_OK


def cmd_curve(cert_path: str, truth_path: str, r_max: int, out: str, attack: str = "general") -> int:
    certs = certifier.read_certificates(cert_path)
    truth = _read_truth(truth_path)
    ids = [c.id for c in certs]
    if set(ids) != set(truth):
        missing = sorted(set(ids) ^ set(truth), key=str)[:5]
        raise ValidationError(f"ids differ between {cert_path} and {truth_path} (e.g. {missing})")
    attack = certifier.normalize_attack(attack)
    if certs and attack not in certs[0].r_star:
        raise ValidationError(f"certificates have no r_{attack} column")
    labels = [truth[i] for i in ids]
    rows = certifier.accuracy_curve(certs, labels, r_max, attack)
    with Path(out).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["r", "certified_accuracy"])
        for r, acc in rows:
            writer.writerow([r, repr(acc)])
    print(f"CA_0={rows[0][1]:.4f}, CA_{r_max}={rows[-1][1]:.4f} -> {out}")
    return EXIT_OK


def cmd_oracle(budget: int, out: Optional[str] = None, certify=None, **grid) -> int:
    report = oracle.run_oracle_suite(budget=budget, certify=certify, **grid)
    for msg in report.warnings:
        log.warning(msg)
        print(f"warning: {msg}", file=sys.stderr)
    print(f"soundness instances: {len(report.soundness)}, "
          f"tightness instances: {len(report.witnesses)}, failures: {len(report.failures)}")
    for failure in report.failures[:10]:
        print("FAIL " + json.dumps(failure, default=str))
    print("oracle: PASS" if report.passed else "oracle: FAIL")
    if out:
        Path(out).write_text(json.dumps(report.to_dict(), default=str, indent=1) + "\n", encoding="utf-8")
    return EXIT_OK if report.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bagcert", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train N base classifiers and write a votes file")
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--dataset", nargs="+", required=True, help="training CSV, or IDX images and labels")
    p.add_argument("--test", nargs="+", required=True, help="test CSV, or IDX images and labels")
    p.add_argument("--learner", choices=LEARNERS, default="centroid")
    p.add_argument("--nb-smoothing", type=float, default=1.0)
    p.add_argument("--k", type=int, default=30)
    p.add_argument("--n-classifiers", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--num-classes", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)

    p = sub.add_parser("certify", help="certificates CSV from a votes file")
    p.add_argument("--config")
    p.add_argument("--votes", required=True)
    p.add_argument("--alpha", type=float, default=0.001)
    p.add_argument("--attack", default="all,modify,delete,insert",
                   help="comma-separated subset of all,modify,delete,insert ('all' is the unrestricted attacker)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("curve", help="certified accuracy CA_r for r = 0..r_max")
    p.add_argument("--config")
    p.add_argument("--certificates", required=True)
    p.add_argument("--truth", required=True, help="test dataset CSV or an id,label CSV")
    p.add_argument("--r-max", type=int, required=True)
    p.add_argument("--attack", default="all")
    p.add_argument("--out", required=True)

    p = sub.add_parser("oracle", help="exhaustive soundness and tightness checks on tiny instances")
    p.add_argument("--config")
    p.add_argument("--budget", type=int, default=oracle.DEFAULT_BUDGET)
    p.add_argument("--max-n", type=int, default=6)
    p.add_argument("--max-k", type=int, default=3)
    p.add_argument("--out", help="write the JSON report here")
    return parser


def _parse(argv: Sequence[str]) -> argparse.Namespace:
    # Pull --config out first so required flags may come from the file alone.
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(list(argv[1:]))
    parser = build_parser()
    if known.config and argv:
        tokens = read_config_file(known.config)
        return parser.parse_args([argv[0]] + tokens + list(argv[1:]))
    return parser.parse_args(argv)


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args = _parse(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    except (BagcertError, OSError) as exc:
        print(f"bagcert: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "train":
            cfg = RunConfig(dataset=args.dataset, test=args.test,
                            learner=BaseLearnerSpec(args.learner, args.nb_smoothing),
                            k=args.k, N=args.n_classifiers, seed=args.seed, out=args.out,
                            num_classes=args.num_classes, workers=args.workers)
            return cmd_train(cfg)
        if args.command == "certify":
            if not 0.0 < args.alpha < 1.0:
                raise ValidationError(f"alpha must lie in (0, 1), got {args.alpha}")
            return cmd_certify(args.votes, args.alpha, _parse_attacks(args.attack), args.out)
        if args.command == "curve":
            if args.r_max < 0:
                raise ValidationError("--r-max must be non-negative")
            return cmd_curve(args.certificates, args.truth, args.r_max, args.out, args.attack)
        if args.command == "oracle":
            return cmd_oracle(args.budget, args.out, max_n=args.max_n, max_k=args.max_k)
    except (BagcertError, OSError) as exc:
        print(f"bagcert: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
