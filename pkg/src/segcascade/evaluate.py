"""Phone error rate via Levenshtein alignment."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping, Sequence

from .errors import EmptyCorpus, EmptyReference, UnmappedLabel


@dataclass(frozen=True)
class ErrorCounts:
    substitutions: int
    insertions: int
    deletions: int
    ref_len: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    @property
    def rate(self) -> float:
        return self.errors / self.ref_len


def per(hyp: Sequence[Hashable], ref: Sequence[Hashable]) -> ErrorCounts:
    """Unit-cost alignment; ties prefer substitution, then insertion, then deletion."""
    if not ref:
        raise EmptyReference("reference sequence is empty")
    n, m = len(hyp), len(ref)
    # d[i][j]: distance between hyp[:i] and ref[:j]
    d = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        d[i][0] = i
    for j in range(1, m + 1):
        d[0][j] = j
    for i in range(1, n + 1):
        hi = hyp[i - 1]
        prev, cur = d[i - 1], d[i]
        for j in range(1, m + 1):
            cur[j] = min(prev[j - 1] + (hi != ref[j - 1]), prev[j] + 1, cur[j - 1] + 1)
    s = ins = dels = 0
    i, j = n, m
    while i or j:
        if i and j and d[i][j] == d[i - 1][j - 1] + (hyp[i - 1] != ref[j - 1]):
            s += hyp[i - 1] != ref[j - 1]
            i, j = i - 1, j - 1
        elif i and d[i][j] == d[i - 1][j] + 1:
            ins += 1
            i -= 1
        else:
            dels += 1
            j -= 1
    return ErrorCounts(s, ins, dels, m)


def collapse(seq: Iterable[Hashable], mapping: Mapping[Hashable, Hashable]) -> list:
    """Map every symbol; adjacent duplicates are kept."""
    out = []
    for s in seq:
        try:
            out.append(mapping[s])
        except KeyError:
            raise UnmappedLabel(f"no collapse entry for {s!r}") from None
    return out


def corpus_per(pairs: Iterable[tuple[Sequence[Hashable], Sequence[Hashable]]]) -> ErrorCounts:
    """Pooled counts: total errors over total reference length."""
    s = i = d = n = 0
    seen = False
    for hyp, ref in pairs:
        c = per(hyp, ref)
        s, i, d, n = s + c.substitutions, i + c.insertions, d + c.deletions, n + c.ref_len
        seen = True
    if not seen:
        raise EmptyCorpus("no utterances to score")
    return ErrorCounts(s, i, d, n)
