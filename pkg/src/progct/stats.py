"""Blinded reader-study statistics.

Readers score each image for noise and structural fidelity on a 1-4
scale. Paired comparisons are lexicographic (fidelity decides, noise
breaks ties), the two one-sided hypothesis tests are exact binomial
sign tests on the discordant pairs, and inter-reader agreement is
Cohen's kappa. All test arithmetic is exact (rational).
"""
from __future__ import annotations

import enum
import json
from collections import Counter, defaultdict
from dataclasses import dataclass
from fractions import Fraction
from math import comb, inf

ALPHA = 0.05
SCORE_RANGE = (1, 4)


class Outcome(enum.Enum):
    A_BETTER = "a>b"
    EQUAL = "a=b"
    B_BETTER = "a<b"


def _check_score(name, value):
    if not isinstance(value, int) or isinstance(value, bool) or not (
            SCORE_RANGE[0] <= value <= SCORE_RANGE[1]):
        raise ValueError(f"{name} score must be an integer in [1,4], got {value!r}")
    return value


@dataclass(frozen=True)
class RatingRecord:
    case_id: str
    reader_id: str
    method: str            # opaque label; blinding lives outside this layer
    noise: int
    fidelity: int
    depth: int | None = None
    region: str = "all"

    def __post_init__(self):
        _check_score("noise", self.noise)
        _check_score("fidelity", self.fidelity)


@dataclass
class SignTestResult:
    n_gt: int
    n_lt: int
    p1: Fraction  # against the one-sided alternative "first is better"
    p2: Fraction  # against "second is better"
    reject_h1: bool
    reject_h2: bool

    def as_dict(self) -> dict:
        return {
            "n_gt": self.n_gt, "n_lt": self.n_lt,
            "p1": float(self.p1), "p2": float(self.p2),
            "reject_h1": self.reject_h1, "reject_h2": self.reject_h2,
        }


@dataclass
class KappaResult:
    p_observed: float
    p_expected: float
    kappa: float


def lexicographic_compare(a: RatingRecord, b: RatingRecord) -> Outcome:
    """Fidelity decides; on a fidelity tie the noise score decides."""
    if a.case_id != b.case_id or a.reader_id != b.reader_id:
        raise ValueError(
            f"comparison requires one case and reader: "
            f"({a.case_id},{a.reader_id}) vs ({b.case_id},{b.reader_id})")
    ka, kb = (a.fidelity, a.noise), (b.fidelity, b.noise)
    if ka > kb:
        return Outcome.A_BETTER
    if ka < kb:
        return Outcome.B_BETTER
    return Outcome.EQUAL


def select_best(records: list[RatingRecord]) -> RatingRecord:
    """Lexicographic maximum; ties broken by lowest depth, then label."""
    if not records:
        raise ValueError("select_best: empty record family")
    return min(records, key=lambda r: (-r.fidelity, -r.noise,
                                       r.depth if r.depth is not None else inf, r.method))


def sign_test(n_gt: int, n_lt: int, alpha: float = ALPHA) -> SignTestResult:
    """Exact one-sided binomial tests on the discordant pairs.

    With n = n_gt + n_lt and k = n_gt: p1 = P(X >= k), p2 = P(X <= k)
    under X ~ Binomial(n, 1/2); n = 0 yields p1 = p2 = 1.
    """
    if n_gt < 0 or n_lt < 0:
        raise ValueError(f"counts must be nonnegative, got ({n_gt}, {n_lt})")
    n = n_gt + n_lt
    k = n_gt
    if n == 0:
        p1 = p2 = Fraction(1)
    else:
        denom = Fraction(1, 2 ** n)
        p1 = sum(comb(n, i) for i in range(k, n + 1)) * denom
        p2 = sum(comb(n, i) for i in range(0, k + 1)) * denom
    return SignTestResult(n_gt=n_gt, n_lt=n_lt, p1=p1, p2=p2,
                          reject_h1=p1 < alpha, reject_h2=p2 < alpha)


def cohen_kappa(ratings_a: list[int], ratings_b: list[int]) -> KappaResult:
    """Chance-corrected agreement between two raters over the 4 categories."""
    if len(ratings_a) != len(ratings_b):
        raise ValueError(f"rating lists differ in length: {len(ratings_a)} vs {len(ratings_b)}")
    if not ratings_a:
        raise ValueError("rating lists are empty")
    n = len(ratings_a)
    p_o = Fraction(sum(x == y for x, y in zip(ratings_a, ratings_b)), n)
    ca, cb = Counter(ratings_a), Counter(ratings_b)
    p_e = sum(Fraction(ca[c], n) * Fraction(cb[c], n) for c in set(ca) | set(cb))
    if p_e == 1:
        kappa = Fraction(1)  # both raters constant and equal
    else:
        kappa = (p_o - p_e) / (1 - p_e)
    return KappaResult(p_observed=float(p_o), p_expected=float(p_e), kappa=float(kappa))


# ---------------------------------------------------------------------------
# report over a rating log


def load_ratings_jsonl(path) -> list[RatingRecord]:
    records = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            records.append(RatingRecord(
                case_id=str(d["case_id"]), reader_id=str(d["reader_id"]),
                method=str(d["method"]), noise=d["noise"], fidelity=d["fidelity"],
                depth=d.get("depth"), region=d.get("region", "all")))
    return records


def build_report(records: list[RatingRecord], family_a: str = "DL", family_b: str = "IR",
                 alpha: float = ALPHA) -> dict:
    """Best-of-family comparisons, sign tests, and reader-pair kappas.

    Keyed by (region, reader) for the method-pair family_a vs family_b;
    methods belong to a family by label prefix.
    """
    by_cell = defaultdict(lambda: defaultdict(list))  # (region, reader) -> case -> records
    for r in records:
        by_cell[(r.region, r.reader_id)][r.case_id].append(r)

    comparisons = {}
    for (region, reader), cases in sorted(by_cell.items()):
        counts = {"a_better": 0, "equal": 0, "b_better": 0}
        for case_id in sorted(cases):
            fam_a = [r for r in cases[case_id] if r.method.startswith(family_a)]
            fam_b = [r for r in cases[case_id] if r.method.startswith(family_b)]
            if not fam_a or not fam_b:
                continue
            out = lexicographic_compare(select_best(fam_a), select_best(fam_b))
            key = {Outcome.A_BETTER: "a_better", Outcome.EQUAL: "equal",
                   Outcome.B_BETTER: "b_better"}[out]
            counts[key] += 1
        test = sign_test(counts["a_better"], counts["b_better"], alpha=alpha)
        comparisons.setdefault(region, {})[reader] = {"counts": counts, **test.as_dict()}

    readers = sorted({r.reader_id for r in records})
    kappas = {}
    for i, ra in enumerate(readers):
        for rb in readers[i + 1:]:
            a_scores = {(r.region, r.case_id, r.method, r.depth): r
                        for r in records if r.reader_id == ra}
            b_scores = {(r.region, r.case_id, r.method, r.depth): r
                        for r in records if r.reader_id == rb}
            common = sorted(set(a_scores) & set(b_scores),
                            key=lambda k: tuple(str(x) for x in k))
            if not common:
                continue
            pair = {}
            for field in ("noise", "fidelity"):
                ka = cohen_kappa([getattr(a_scores[k], field) for k in common],
                                 [getattr(b_scores[k], field) for k in common])
                pair[field] = {"kappa": ka.kappa, "p_observed": ka.p_observed,
                               "p_expected": ka.p_expected}
            kappas[f"{ra}|{rb}"] = {"n_items": len(common), **pair}

    return {
        "method_pair": {"a": family_a, "b": family_b},
        "alpha": alpha,
        "comparisons": comparisons,
        "kappa": kappas,
        "n_records": len(records),
    }
