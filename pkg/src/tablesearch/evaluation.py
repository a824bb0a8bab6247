"""TREC-style evaluation with graded judgments, plus cross-validated parameter sweeps."""

from __future__ import annotations

import logging
import math
import random
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

logger = logging.getLogger(__name__)

MAX_GRADE = 3
GRADE_NAMES = ("Non", "Rel", "HRel", "Key")
RELEVANT_GRADE = 1

Judgments = Dict[str, Dict[str, int]]
Run = Dict[str, List[Tuple[str, float]]]
PathLike = Union[str, Path]


class FormatError(ValueError):
    pass


# -- file formats -----------------------------------------------------------

def read_qrels(path: PathLike) -> Judgments:
    judgments: Judgments = {}
    for lineno, line in enumerate(Path(path).read_text("utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 4:
            raise FormatError(f"{path}:{lineno}: expected 'qid iter table_id grade'")
        qid, _, tid, grade = parts
        try:
            g = int(grade)
        except ValueError:
            raise FormatError(f"{path}:{lineno}: grade {grade!r} is not an integer") from None
        if not 0 <= g <= MAX_GRADE:
            raise FormatError(f"{path}:{lineno}: grade {g} outside 0..{MAX_GRADE}")
        judgments.setdefault(qid, {})[tid] = g
    return judgments


def write_qrels(judgments: Judgments, path: PathLike) -> None:
    lines = [f"{q} 0 {t} {g}" for q in sorted(judgments) for t, g in sorted(judgments[q].items())]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def format_run(run: Run, tag: str = "tablesearch") -> List[str]:
    return [
        f"{qid} Q0 {tid} {rank} {score:.10g} {tag}"
        for qid in sorted(run)
        for rank, (tid, score) in enumerate(run[qid], 1)
    ]


def write_run(run: Run, path: PathLike, tag: str = "tablesearch") -> None:
    lines = format_run(run, tag)
    Path(path).write_text("".join(l + "\n" for l in lines), encoding="utf-8")


def read_run(path: PathLike) -> Run:
    rows: Dict[str, List[Tuple[int, str, float]]] = {}
    for lineno, line in enumerate(Path(path).read_text("utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 6:
            raise FormatError(f"{path}:{lineno}: expected 'qid Q0 table_id rank score tag'")
        try:
            rows.setdefault(parts[0], []).append((int(parts[3]), parts[2], float(parts[4])))
        except ValueError:
            raise FormatError(f"{path}:{lineno}: bad rank or score") from None
    run: Run = {}
    for qid, items in rows.items():
        items.sort(key=lambda r: (-r[2], r[1]))
        seen = set()
        for _, tid, _ in items:
            if tid in seen:
                raise FormatError(f"{path}: table {tid} listed twice for query {qid}")
            seen.add(tid)
        run[qid] = [(tid, score) for _, tid, score in items]
    return run


@dataclass(frozen=True)
class Topic:
    qid: str
    title: str
    intent: Optional[str] = None


_TOP_RE = re.compile(r"<top>(.*?)</top>", re.S | re.I)


def _tag(block: str, name: str) -> Optional[str]:
    # closing tags are optional in classic TREC topic files
    m = re.search(rf"<{name}>(.*?)(?=</{name}>|<[a-z]+>|\Z)", block, re.S | re.I)
    return " ".join(m.group(1).split()) if m else None


def read_topics(path: PathLike) -> List[Topic]:
    text = Path(path).read_text("utf-8")
    topics = []
    for block in _TOP_RE.findall(text):
        num, title = _tag(block, "num"), _tag(block, "title")
        if not num or title is None:
            raise FormatError(f"{path}: topic without <num> or <title>: {block.strip()[:60]!r}")
        qid = re.sub(r"^number:\s*", "", num, flags=re.I)
        topics.append(Topic(qid, title, _tag(block, "intent")))
    if not topics:
        raise FormatError(f"{path}: no <top> blocks found")
    return topics


# -- per-query metrics ------------------------------------------------------

def _ids(ranking: Sequence) -> List[str]:
    return [r[0] if isinstance(r, tuple) else r for r in ranking]


def average_precision(ranking: Sequence, grades: Mapping[str, int], k: int = 100) -> float:
    num_relevant = sum(1 for g in grades.values() if g >= RELEVANT_GRADE)
    if num_relevant == 0:
        return 0.0
    hits, total = 0, 0.0
    for rank, tid in enumerate(_ids(ranking)[:k], 1):
        if grades.get(tid, 0) >= RELEVANT_GRADE:
            hits += 1
            total += hits / rank
    return total / min(num_relevant, k)


def _gain(grade: int) -> float:
    return 2.0 ** grade - 1.0


def dcg(grades: Sequence[int], k: int) -> float:
    return sum(_gain(g) / math.log2(rank + 1) for rank, g in enumerate(grades[:k], 1))


def ndcg(ranking: Sequence, grades: Mapping[str, int], k: int = 20) -> float:
    ideal = dcg(sorted(grades.values(), reverse=True), k)
    if ideal == 0:
        return 0.0
    return dcg([grades.get(t, 0) for t in _ids(ranking)], k) / ideal


def err(ranking: Sequence, grades: Mapping[str, int], k: int = 20) -> float:
    """Cascade expected reciprocal rank with R(g) = (2^g - 1) / 2^MAX_GRADE."""
    total, p_continue = 0.0, 1.0
    for rank, tid in enumerate(_ids(ranking)[:k], 1):
        r = _gain(grades.get(tid, 0)) / 2.0 ** MAX_GRADE
        total += p_continue * r / rank
        p_continue *= 1.0 - r
    return total


PER_QUERY: Dict[str, Callable[[Sequence, Mapping[str, int]], float]] = {
    "map@100": lambda r, g: average_precision(r, g, 100),
    "ndcg@20": lambda r, g: ndcg(r, g, 20),
    "err@20": lambda r, g: err(r, g, 20),
}


# -- aggregates -------------------------------------------------------------

def evaluated_queries(judgments: Judgments) -> List[str]:
    """Queries with at least one relevant table; the others are left out of every mean."""
    return sorted(q for q, g in judgments.items() if any(v >= RELEVANT_GRADE for v in g.values()))


def per_query_scores(run: Run, judgments: Judgments, metric: str) -> Dict[str, float]:
    try:
        fn = PER_QUERY[metric]
    except KeyError:
        raise ValueError(f"unknown metric {metric!r}; choose from {', '.join(PER_QUERY)}") from None
    return {q: fn(run.get(q, []), judgments[q]) for q in evaluated_queries(judgments)}


def _mean(values: Iterable[float]) -> float:
    values = list(values)
    return sum(values) / len(values) if values else 0.0


def map_at_100(run: Run, judgments: Judgments) -> float:
    return _mean(per_query_scores(run, judgments, "map@100").values())


def ndcg_at_20(run: Run, judgments: Judgments) -> float:
    return _mean(per_query_scores(run, judgments, "ndcg@20").values())


def err_at_20(run: Run, judgments: Judgments) -> float:
    return _mean(per_query_scores(run, judgments, "err@20").values())


def evaluate_run(run: Run, judgments: Judgments) -> Dict[str, float]:
    return {m: _mean(per_query_scores(run, judgments, m).values()) for m in PER_QUERY}


def win_tie_loss(run_a: Run, run_b: Run, judgments: Judgments) -> Tuple[int, int, int]:
    """Per-query comparison of AP rounded to four decimals."""
    a = per_query_scores(run_a, judgments, "map@100")
    b = per_query_scores(run_b, judgments, "map@100")
    wins = ties = losses = 0
    for q in a:
        x, y = round(a[q], 4), round(b[q], 4)
        if x > y:
            wins += 1
        elif x < y:
            losses += 1
        else:
            ties += 1
    return wins, ties, losses


def paired_t_test(run_a: Run, run_b: Run, judgments: Judgments, metric: str = "map@100") -> Tuple[float, float]:
    """Two-sided paired t-test on per-query scores; informational only."""
    from scipy import stats

    a = per_query_scores(run_a, judgments, metric)
    b = per_query_scores(run_b, judgments, metric)
    qs = sorted(a)
    if len(qs) < 2:
        return float("nan"), float("nan")
    res = stats.ttest_rel([a[q] for q in qs], [b[q] for q in qs])
    return float(res.statistic), float(res.pvalue)


# -- cross validation -------------------------------------------------------

def assign_folds(query_ids: Sequence[str], folds: int = 10, seed: int = 0) -> Dict[str, int]:
    if folds < 2:
        raise ValueError("need at least 2 folds")
    qids = sorted(set(query_ids))
    random.Random(seed).shuffle(qids)
    return {q: i % folds for i, q in enumerate(qids)}


def write_folds(assignment: Mapping[str, int], path: PathLike) -> None:
    lines = [f"{q}\t{f}" for q, f in sorted(assignment.items(), key=lambda x: (x[1], x[0]))]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_folds(path: PathLike) -> Dict[str, int]:
    out = {}
    for line in Path(path).read_text("utf-8").splitlines():
        if line.strip():
            q, f = line.split("\t")
            out[q] = int(f)
    return out


def load_or_create_folds(query_ids: Sequence[str], path: Optional[PathLike], folds: int = 10,
                         seed: int = 0) -> Dict[str, int]:
    """Reuse a persisted partition when it covers exactly these queries; otherwise create and persist one."""
    if path is not None and Path(path).exists():
        assignment = read_folds(path)
        if set(assignment) == set(query_ids):
            return assignment
        logger.warning("fold file %s covers different queries; regenerating", path)
    assignment = assign_folds(query_ids, folds, seed)
    if path is not None:
        write_folds(assignment, path)
    return assignment


@dataclass
class CVResult:
    chosen: List[Dict[str, Any]]
    held_out: Dict[str, float]
    folds: Dict[str, int]
    metric: str

    @property
    def pooled(self) -> float:
        return _mean(self.held_out.values())


def cross_validate(query_ids: Sequence[str], grid: Sequence[Mapping[str, Any]],
                   run_fn: Callable[[Mapping[str, Any], Sequence[str]], Run], judgments: Judgments,
                   folds: int = 10, metric: str = "map@100", seed: int = 0,
                   fold_file: Optional[PathLike] = None) -> CVResult:
    """Pick the best grid point on the training folds, score it on the held-out fold.

    ``run_fn(params, qids)`` must return a run for the given queries.  Each
    grid point is run once over all queries; fold selection then reuses
    the per-query scores.  Ties between grid points go to the earlier one.
    """
    if not grid:
        raise ValueError("parameter grid is empty")
    qids = [q for q in sorted(set(query_ids)) if q in set(evaluated_queries(judgments))]
    if not qids:
        raise ValueError("no judged queries with relevant tables")
    assignment = load_or_create_folds(qids, fold_file, min(folds, len(qids)) if len(qids) >= 2 else 2, seed)
    scores = [per_query_scores(run_fn(params, qids), {q: judgments[q] for q in qids}, metric) for params in grid]
    chosen: List[Dict[str, Any]] = []
    held_out: Dict[str, float] = {}
    for fold in sorted(set(assignment.values())):
        test = [q for q in qids if assignment[q] == fold]
        train = [q for q in qids if assignment[q] != fold]
        train_means = [_mean(s[q] for q in train) for s in scores]
        best = max(range(len(grid)), key=lambda i: (train_means[i], -i))
        chosen.append(dict(grid[best]))
        for q in test:
            held_out[q] = scores[best][q]
    return CVResult(chosen, held_out, assignment, metric)
