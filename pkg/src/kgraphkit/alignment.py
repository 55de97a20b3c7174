"""Minimal common extensions, the vee closure, and exhaustive sets.

Every operation here has a brute-force counterpart enumerating candidate
paths directly; the fast versions extend one participant along degree
complements and filter by the prefix condition.  The test suite keeps the
oracles wired to the fast paths permanently.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .core import (
    Degree,
    KGraph,
    KGraphError,
    Path,
    compose,
    degrees_up_to,
    paths_of_degree,
    paths_up_to_degree,
    segment,
)


class EmptyEError(KGraphError):
    """An empty candidate set is never exhaustive; reported explicitly."""


class CapTooLargeForBudget(KGraphError):
    pass


def _extends(lam: Path, mu: Path) -> bool:
    """True when lam = mu.mu' for some mu', i.e. mu is an initial segment."""
    if not mu.degree <= lam.degree:
        return False
    if lam.range_vertex != mu.range_vertex:
        return False
    return segment(lam, Degree.zero(lam.graph.rank), mu.degree) == mu


def mce(g: KGraph, mu: Path, nu: Path) -> list[Path]:
    """Common extensions of degree exactly d(mu) v d(nu), sorted by word."""
    target = mu.degree.join(nu.degree)
    # extend the participant with the smaller complement
    base, other = (mu, nu)
    if (target - nu.degree).total() < (target - mu.degree).total():
        base, other = (nu, mu)
    out = []
    for ext in paths_of_degree(g, target - base.degree, range_vertex=base.source_vertex):
        lam = compose(base, ext)
        if _extends(lam, other):
            out.append(lam)
    out.sort(key=Path.sort_key)
    return out


def mce_brute(g: KGraph, mu: Path, nu: Path) -> list[Path]:
    """Oracle: scan every path of the joined degree for the prefix conditions."""
    target = mu.degree.join(nu.degree)
    out = [lam for lam in paths_of_degree(g, target, range_vertex=mu.range_vertex)
           if _extends(lam, mu) and _extends(lam, nu)]
    out.sort(key=Path.sort_key)
    return out


def mce_set(g: KGraph, F: Iterable[Path]) -> list[Path]:
    """Paths of degree v_{a in F} d(a) extending every member of F."""
    F = list(F)
    if not F:
        return []
    target = Degree.zero(g.rank)
    for a in F:
        target = target.join(a.degree)
    base = max(F, key=lambda a: (a.degree.total(), a.sort_key()))
    out = []
    for ext in paths_of_degree(g, target - base.degree, range_vertex=base.source_vertex):
        lam = compose(base, ext)
        if all(_extends(lam, a) for a in F):
            out.append(lam)
    out.sort(key=Path.sort_key)
    return out


def mce_set_brute(g: KGraph, F: Iterable[Path]) -> list[Path]:
    F = list(F)
    if not F:
        return []
    target = Degree.zero(g.rank)
    for a in F:
        target = target.join(a.degree)
    out = [lam for lam in paths_of_degree(g, target, range_vertex=F[0].range_vertex)
           if all(_extends(lam, a) for a in F)]
    out.sort(key=Path.sort_key)
    return out


def vee(g: KGraph, F: Iterable[Path]) -> list[Path]:
    """Union of MCE(G) over all nonempty subsets G of F, deduplicated."""
    F = sorted(set(F), key=Path.sort_key)
    seen: set[Path] = set()
    for size in range(1, len(F) + 1):
        for G in itertools.combinations(F, size):
            seen.update(mce_set(g, list(G)))
    return sorted(seen, key=Path.sort_key)


@dataclass(frozen=True)
class AlignmentCertificate:
    degree_cap: Degree
    pair_count: int
    max_mce_size: int
    argmax: Optional[tuple[str, str]]


def is_finitely_aligned(g: KGraph, cap=None) -> tuple[bool, AlignmentCertificate]:
    """Always true for a finite presentation; certifies the max |MCE| seen."""
    if cap is None:
        cap = Degree((3,) * g.rank)
    else:
        cap = Degree(cap)
    if g.has_finite_path_category():
        cap = cap.meet(g.max_path_degree())
    paths = paths_up_to_degree(g, cap)
    best, arg, pairs = 0, None, 0
    for mu in paths:
        for nu in paths:
            if mu.range_vertex != nu.range_vertex:
                continue
            pairs += 1
            size = len(mce(g, mu, nu))
            if size > best:
                best, arg = size, (mu.label(), nu.label())
    return True, AlignmentCertificate(cap, pairs, best, arg)


@dataclass(frozen=True)
class ExhaustiveVerdict:
    exhaustive: bool
    witness: Optional[Path]
    test_degree: Degree
    test_set_size: int

    def __bool__(self) -> bool:
        return self.exhaustive


def _test_set(g: KGraph, v: str, D: Degree) -> list[Path]:
    """Paths from v of degree D plus source-blocked maximal ones below D.

    A path below D is kept only when every deficient color has no edge at
    its source, so no extension could raise it toward D.
    """
    out = []
    for n in degrees_up_to(D):
        for mu in paths_of_degree(g, n, range_vertex=v):
            if tuple(n) == tuple(D):
                out.append(mu)
                continue
            blocked = all(
                g.edges_at(mu.source_vertex, i + 1) == []
                for i in range(g.rank) if n[i] < D[i])
            if blocked:
                out.append(mu)
    out.sort(key=Path.sort_key)
    return out


def is_exhaustive(g: KGraph, v: str, E: Sequence[Path]) -> ExhaustiveVerdict:
    """Decide whether every path from v has a common extension with some λ in E.

    Runs on the finite test set of degree-D and source-blocked paths, where
    D joins the degrees in E; the brute-force oracle below stays in the test
    suite as a permanent guard on this reduction.
    """
    E = list(E)
    if not E:
        raise EmptyEError(f"empty candidate set at {v!r} is not exhaustive")
    for lam in E:
        if lam.range_vertex != v:
            raise KGraphError(f"{lam.label()} does not have range {v!r}")
    D = Degree.zero(g.rank)
    for lam in E:
        D = D.join(lam.degree)
    test = _test_set(g, v, D)
    for mu in test:
        if not any(mce(g, mu, lam) for lam in E):
            return ExhaustiveVerdict(False, mu, D, len(test))
    return ExhaustiveVerdict(True, None, D, len(test))


def is_exhaustive_brute(g: KGraph, v: str, E: Sequence[Path], slack: int = 1
                        ) -> ExhaustiveVerdict:
    """Oracle: test every path from v of degree <= D + slack·(1,...,1)."""
    E = list(E)
    if not E:
        raise EmptyEError(f"empty candidate set at {v!r} is not exhaustive")
    D = Degree.zero(g.rank)
    for lam in E:
        D = D.join(lam.degree)
    cap = D + Degree((slack,) * g.rank)
    if g.has_finite_path_category():
        cap = cap.meet(g.max_path_degree().join(D))
    count = 0
    for mu in paths_up_to_degree(g, cap, range_vertex=v):
        count += 1
        if not any(mce_brute(g, mu, lam) for lam in E):
            return ExhaustiveVerdict(False, mu, D, count)
    return ExhaustiveVerdict(True, None, D, count)


def enumerate_fe(g: KGraph, v: str, cap, budget: int = 100_000) -> list[list[Path]]:
    """All inclusion-minimal exhaustive subsets of the paths from v below cap.

    Minimality is by inclusion only, an artifact convenience; candidates are
    scanned by size so supersets of found sets are pruned, and the scan stops
    at the first size where every candidate was pruned.  Exceeding the node
    budget fails loudly instead of hanging.
    """
    cap = Degree(cap)
    if g.has_finite_path_category():
        cap = cap.meet(g.max_path_degree())
    universe = paths_up_to_degree(g, cap, range_vertex=v)
    found: list[frozenset[Path]] = []
    out: list[list[Path]] = []
    checked = 0
    for size in range(1, len(universe) + 1):
        any_live = False
        for combo in itertools.combinations(universe, size):
            cand = frozenset(combo)
            if any(prev <= cand for prev in found):
                continue
            any_live = True
            checked += 1
            if checked > budget:
                raise CapTooLargeForBudget(
                    f"examined more than {budget} candidate sets at cap {tuple(cap)}")
            if is_exhaustive(g, v, list(combo)):
                found.append(cand)
                out.append(sorted(combo, key=Path.sort_key))
        if not any_live:
            break
    out.sort(key=lambda E: (len(E), [p.sort_key() for p in E]))
    return out
