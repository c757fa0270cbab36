"""MUC, B-cubed and CEAF-phi4 scoring of predicted clusters against gold.

Each metric first reduces a (key, response) pair to four counts: recall
numerator and denominator, precision numerator and denominator.  Corpus
scores sum those counts over documents before dividing (micro average),
or average the per-document ratios when ``aggregate="macro"``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .doc_model import ClusterSet, Span

METRICS = ("muc", "b3", "ceaf_phi4")
METRIC_LABELS = {"muc": "MUC", "b3": "B3", "ceaf_phi4": "CEAF_phi4"}


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    defined: bool = True

    @classmethod
    def from_counts(cls, r_num, r_den, p_num, p_den) -> "PRF":
        recall = r_num / r_den if r_den else 0.0
        precision = p_num / p_den if p_den else 0.0
        return cls(precision, recall, f_measure(precision, recall), bool(r_den and p_den))

    def swapped(self) -> "PRF":
        return PRF(self.recall, self.precision, self.f1, self.defined)


def f_measure(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def align_and_filter(key: ClusterSet, response: ClusterSet, exclude: Iterable[Span] = ()):
    """Remove excluded mentions from both sides; emptied clusters disappear."""
    exclude = frozenset(exclude)
    if not exclude:
        return key, response

    def keep(m):
        return m not in exclude

    return key.restricted(keep), response.restricted(keep)


# -- counts -----------------------------------------------------------------

def muc_counts(key: ClusterSet, response: ClusterSet):
    def links(gold, other):
        where = other.mention_to_cluster()
        num = den = 0
        for cluster in gold:
            parts = set()
            unmatched = 0
            for m in cluster:
                k = where.get(m)
                if k is None:
                    unmatched += 1
                else:
                    parts.add(k)
            num += len(cluster) - (len(parts) + unmatched)
            den += len(cluster) - 1
        return num, den

    r_num, r_den = links(key, response)
    p_num, p_den = links(response, key)
    return r_num, r_den, p_num, p_den


def b_cubed_counts(key: ClusterSet, response: ClusterSet):
    def overlap(gold, other):
        where = {m: set(c) for c in other for m in c}
        num = 0.0
        count = 0
        for cluster in gold:
            members = set(cluster)
            for m in cluster:
                count += 1
                num += len(members & where.get(m, set())) / len(members)
        return num, count

    r_num, r_den = overlap(key, response)
    p_num, p_den = overlap(response, key)
    return r_num, r_den, p_num, p_den


def phi4(a, b) -> float:
    a, b = set(a), set(b)
    return 2.0 * len(a & b) / (len(a) + len(b))


def ceaf_similarity(key: ClusterSet, response: ClusterSet) -> float:
    """Total phi4 similarity of the best one-to-one cluster alignment."""
    if not len(key) or not len(response):
        return 0.0
    where = response.mention_to_cluster()
    sim = np.zeros((len(key), len(response)))
    for i, cluster in enumerate(key):
        for m in cluster:
            j = where.get(m)
            if j is not None:
                sim[i, j] += 1.0
    sizes_k = np.array([len(c) for c in key], dtype=float)
    sizes_r = np.array([len(c) for c in response], dtype=float)
    sim = 2.0 * sim / (sizes_k[:, None] + sizes_r[None, :])
    rows, cols = linear_sum_assignment(sim, maximize=True)
    return float(sim[rows, cols].sum())


def ceaf_counts(key: ClusterSet, response: ClusterSet):
    total = ceaf_similarity(key, response)
    return total, len(key), total, len(response)


def mention_counts(key: ClusterSet, response: ClusterSet):
    k, r = key.mentions, response.mentions
    hit = len(k & r)
    return hit, len(k), hit, len(r)


def singleton_counts(key: ClusterSet, response: ClusterSet):
    k, r = set(key.singletons()), set(response.singletons())
    hit = len(k & r)
    return hit, len(k), hit, len(r)


# -- single-document metrics ------------------------------------------------

def muc(key: ClusterSet, response: ClusterSet) -> PRF:
    return PRF.from_counts(*muc_counts(key, response))


def b_cubed(key: ClusterSet, response: ClusterSet) -> PRF:
    if not key.mentions:
        raise ValueError("B-cubed is undefined for an empty key")
    return PRF.from_counts(*b_cubed_counts(key, response))


def ceaf_phi4(key: ClusterSet, response: ClusterSet) -> PRF:
    return PRF.from_counts(*ceaf_counts(key, response))


def mention_prf(key: ClusterSet, response: ClusterSet) -> PRF:
    return PRF.from_counts(*mention_counts(key, response))


def singleton_prf(key: ClusterSet, response: ClusterSet) -> PRF:
    return PRF.from_counts(*singleton_counts(key, response))


def avg_f1(*scores) -> float:
    """Arithmetic mean of the MUC, B-cubed and CEAF-phi4 F1 scores.

    Accepts an :class:`EvalReport` or the three F1 values.
    """
    if len(scores) == 1 and isinstance(scores[0], EvalReport):
        r = scores[0]
        scores = (r.muc.f1, r.b3.f1, r.ceaf_phi4.f1)
    if len(scores) != 3:
        raise ValueError(f"expected three F1 scores, got {len(scores)}")
    return sum(scores) / 3.0


# -- corpus-level reports ---------------------------------------------------

COUNTERS = {
    "muc": muc_counts,
    "b3": b_cubed_counts,
    "ceaf_phi4": ceaf_counts,
    "mentions": mention_counts,
    "singletons": singleton_counts,
}


@dataclass
class EvalReport:
    muc: PRF
    b3: PRF
    ceaf_phi4: PRF
    mentions: PRF
    singletons: PRF
    documents: int = 0
    aggregate: str = "micro"
    warnings: list[str] = field(default_factory=list)

    @property
    def avg_f1(self) -> float:
        return avg_f1(self)

    def to_dict(self) -> dict:
        out = {name: asdict(getattr(self, name)) for name in COUNTERS}
        out.update(avg_f1=self.avg_f1, documents=self.documents, aggregate=self.aggregate,
                   warnings=list(self.warnings))
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def render(self) -> str:
        """Human-readable table, scores as percentages with two decimals."""
        header = f"{'':<12}{'P':>8}{'R':>8}{'F1':>8}"
        lines = [header, "-" * len(header)]
        for name in METRICS:
            s = getattr(self, name)
            lines.append(f"{METRIC_LABELS[name]:<12}{100 * s.precision:8.2f}"
                         f"{100 * s.recall:8.2f}{100 * s.f1:8.2f}")
        lines.append(f"{'Avg F1':<12}{'':>16}{100 * self.avg_f1:8.2f}")
        lines.append("-" * len(header))
        for name, label in (("mentions", "Mentions"), ("singletons", "Singletons")):
            s = getattr(self, name)
            lines.append(f"{label:<12}{100 * s.precision:8.2f}"
                         f"{100 * s.recall:8.2f}{100 * s.f1:8.2f}")
        lines.extend(f"warning: {w}" for w in self.warnings)
        return "\n".join(lines)


def evaluate(pairs: Sequence[tuple[ClusterSet, ClusterSet]], excludes=None,
             aggregate: str = "micro") -> EvalReport:
    """Score a list of (key, response) documents.

    ``excludes`` optionally gives, per document, spans (non-referring
    expressions) removed from both sides before scoring.
    """
    if aggregate not in ("micro", "macro"):
        raise ValueError(f"unknown aggregate {aggregate!r}")
    pairs = list(pairs)
    excludes = list(excludes) if excludes is not None else [()] * len(pairs)
    filtered = [align_and_filter(k, r, ex) for (k, r), ex in zip(pairs, excludes)]
    if not any(k.mentions for k, _ in filtered):
        raise ValueError("no gold mentions to score against")
    results = {}
    for name, counter in COUNTERS.items():
        counts = [counter(k, r) for k, r in filtered]
        if aggregate == "micro":
            results[name] = PRF.from_counts(*(sum(c[i] for c in counts) for i in range(4)))
        else:
            per_doc = [PRF.from_counts(*c) for c in counts]
            p = float(np.mean([s.precision for s in per_doc]))
            r = float(np.mean([s.recall for s in per_doc]))
            f = float(np.mean([s.f1 for s in per_doc]))
            results[name] = PRF(p, r, f, all(s.defined for s in per_doc))
    warnings = [f"{METRIC_LABELS.get(n, n)} undefined (no links or clusters on one side); reported as 0"
                for n in METRICS if not results[n].defined]
    return EvalReport(**results, documents=len(pairs), aggregate=aggregate, warnings=warnings)
