"""Text-generation metric suite for the evaluation harness.

Covers ROUGE-1/2/L, BLEU-1..4 (additive epsilon smoothing on zero counts),
METEOR-lite (exact + Porter-stem matching, no synonym dictionary — hence the
"lite"), classic CIDEr, and a rubric-based judge score from a model backend.

CIDEr here is the classic TF-IDF variant: per-n cosine between the candidate
vector and the MEAN reference vector, averaged over n = 1..4 and scaled by 10
(not CIDEr-D, and not the per-reference cosine average some toolkits use —
identical for single-reference corpora). Reports macro-average per-sample
scores except CIDEr, which is corpus-level by definition.

Tokenization: lowercase, split on Unicode whitespace, strip leading/trailing
punctuation per token. All functions are pure except ``judge_score``.
"""

from __future__ import annotations

import math
import re
import string
from collections import Counter, deque
from dataclasses import dataclass
from typing import Sequence

from .backends import Backend, ChatMessage
from .errors import InvalidArgument, MetricUnavailable, WaterwayQAError
from .stemming import porter_stem

BLEU_EPSILON = 1e-9

_PUNCT = string.punctuation + "“”‘’…–—«»"
_NUMBER = re.compile(r"-?(?:\d+\.?\d*|\.\d+)")


def tokenize(text: str) -> list[str]:
    tokens = []
    for raw in text.lower().split():
        token = raw.strip(_PUNCT)
        if token:
            tokens.append(token)
    return tokens


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


# --- ROUGE ---------------------------------------------------------------------


def rouge_n(candidate: Sequence[str], reference: Sequence[str], n: int) -> float:
    """F1 over clipped n-gram overlap; 0 when either side has no n-grams."""
    if n not in (1, 2):
        raise InvalidArgument("rouge_n supports n in {1, 2}")
    cand = _ngram_counts(candidate, n)
    ref = _ngram_counts(reference, n)
    total_c, total_r = sum(cand.values()), sum(ref.values())
    if not total_c or not total_r:
        return 0.0
    overlap = sum((cand & ref).values())
    precision = overlap / total_c
    recall = overlap / total_r
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    # rolling single-row DP; text answers are short so quadratic is fine
    row = [0] * (len(b) + 1)
    for x in a:
        diag = 0
        for j, y in enumerate(b, start=1):
            tmp = row[j]
            if x == y:
                row[j] = diag + 1
            elif row[j - 1] > row[j]:
                row[j] = row[j - 1]
            diag = tmp
    return row[-1]


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> float:
    """F1 from longest-common-subsequence length."""
    if not candidate or not reference:
        return 0.0
    lcs = _lcs_length(candidate, reference)
    if lcs == 0:
        return 0.0
    precision = lcs / len(candidate)
    recall = lcs / len(reference)
    return 2.0 * precision * recall / (precision + recall)


# --- BLEU ----------------------------------------------------------------------


def bleu(
    candidate: Sequence[str],
    references: Sequence[Sequence[str]],
    max_n: int,
) -> float:
    """Geometric mean of clipped modified n-gram precisions times the brevity
    penalty. Zero clipped counts are smoothed to BLEU_EPSILON; orders where the
    candidate is shorter than n are skipped so identity stays exactly 1.0."""
    if max_n not in (1, 2, 3, 4):
        raise InvalidArgument("max_n must be in 1..4")
    if not references:
        raise InvalidArgument("bleu needs at least one reference")
    if not candidate:
        return 0.0
    ref_counts = [[_ngram_counts(ref, n) for ref in references] for n in range(1, max_n + 1)]
    log_sum, orders = 0.0, 0
    for n in range(1, max_n + 1):
        cand = _ngram_counts(candidate, n)
        total = sum(cand.values())
        if total == 0:
            continue
        max_ref: Counter = Counter()
        for counts in ref_counts[n - 1]:
            for gram, count in counts.items():
                if count > max_ref[gram]:
                    max_ref[gram] = count
        clipped = sum((cand & max_ref).values())
        log_sum += math.log(clipped / total) if clipped else math.log(BLEU_EPSILON)
        orders += 1
    c = len(candidate)
    r = min((len(ref) for ref in references), key=lambda length: (abs(length - c), length))
    brevity = min(1.0, math.exp(1.0 - r / c))
    return brevity * math.exp(log_sum / orders)


# --- METEOR-lite ------------------------------------------------------------------


def _meteor_alignment(
    candidate: Sequence[str], reference: Sequence[str]
) -> list[tuple[int, int]]:
    """Two-stage greedy alignment: exact surface matches first, then Porter-stem
    matches, each stage scanning the candidate left to right and taking the
    first unmatched reference position."""
    positions: dict[str, deque[int]] = {}
    for j, token in enumerate(reference):
        positions.setdefault(token, deque()).append(j)
    taken = [False] * len(reference)
    pairs: list[tuple[int, int]] = []
    leftovers: list[int] = []
    for i, token in enumerate(candidate):
        queue = positions.get(token)
        while queue and taken[queue[0]]:
            queue.popleft()
        if queue:
            j = queue.popleft()
            taken[j] = True
            pairs.append((i, j))
        else:
            leftovers.append(i)
    if leftovers:
        ref_stems = [porter_stem(t) for t in reference]
        for i in leftovers:
            stem = porter_stem(candidate[i])
            for j, ref_stem in enumerate(ref_stems):
                if not taken[j] and ref_stem == stem:
                    taken[j] = True
                    pairs.append((i, j))
                    break
    pairs.sort()
    return pairs


def meteor_lite(candidate: Sequence[str], reference: Sequence[str]) -> float:
    """Recall-weighted harmonic mean of unigram alignment precision/recall with
    the cubic fragmentation penalty: 0.5 * (chunks / matches)^3."""
    if not candidate or not reference:
        return 0.0
    pairs = _meteor_alignment(candidate, reference)
    matches = len(pairs)
    if matches == 0:
        return 0.0
    chunks = 1
    for (ci, ri), (cj, rj) in zip(pairs, pairs[1:]):
        if cj != ci + 1 or rj != ri + 1:
            chunks += 1
    precision = matches / len(candidate)
    recall = matches / len(reference)
    f_mean = precision * recall / (0.9 * precision + 0.1 * recall)
    penalty = 0.5 * (chunks / matches) ** 3
    return f_mean * (1.0 - penalty)


# --- CIDEr --------------------------------------------------------------------------


def cider(
    candidates: Sequence[Sequence[str]],
    reference_sets: Sequence[Sequence[Sequence[str]]],
) -> tuple[float, list[float]]:
    """Corpus CIDEr plus per-sample scores.

    Document frequency counts corpus items whose reference set contains the
    n-gram; idf = log(corpus / max(df, 1)). A single-item corpus therefore
    scores 0 by construction (all idf terms vanish).
    """
    if len(candidates) != len(reference_sets):
        raise InvalidArgument("candidates and reference_sets must be parallel")
    if not candidates:
        raise InvalidArgument("cider needs at least one sample")
    corpus = len(candidates)
    idf_by_n: list[dict[tuple, float]] = []
    for n in range(1, 5):
        df: Counter = Counter()
        for refs in reference_sets:
            grams: set[tuple] = set()
            for ref in refs:
                grams.update(_ngram_counts(ref, n))
            df.update(grams)
        idf_by_n.append({g: math.log(corpus / max(d, 1)) for g, d in df.items()})

    default_idf = math.log(corpus)

    def tfidf_vec(tokens: Sequence[str], n: int) -> dict[tuple, float]:
        idf = idf_by_n[n - 1]
        return {
            g: count * idf.get(g, default_idf)
            for g, count in _ngram_counts(tokens, n).items()
        }

    def cosine(u: dict, v: dict) -> float:
        norm_u = math.sqrt(sum(x * x for x in u.values()))
        norm_v = math.sqrt(sum(x * x for x in v.values()))
        if norm_u == 0.0 or norm_v == 0.0:
            return 0.0
        smaller, larger = (u, v) if len(u) <= len(v) else (v, u)
        dot = sum(x * larger.get(g, 0.0) for g, x in smaller.items())
        return dot / (norm_u * norm_v)

    per_sample: list[float] = []
    for cand, refs in zip(candidates, reference_sets):
        total = 0.0
        for n in range(1, 5):
            cand_vec = tfidf_vec(cand, n)
            mean_ref: dict[tuple, float] = {}
            for ref in refs:
                for g, x in tfidf_vec(ref, n).items():
                    mean_ref[g] = mean_ref.get(g, 0.0) + x / len(refs)
            total += cosine(cand_vec, mean_ref)
        per_sample.append(10.0 * total / 4.0)
    return sum(per_sample) / corpus, per_sample


# --- judge score --------------------------------------------------------------------


def extract_score(text: str) -> float | None:
    """First decimal number within [0, 1] (tolerating up to 0.05 of overshoot,
    clamped); numbers further out of range are skipped. None when no usable
    number appears."""
    for match in _NUMBER.finditer(text):
        value = float(match.group())
        if -0.05 <= value <= 1.05:
            return min(1.0, max(0.0, value))
    return None


JUDGE_SYSTEM_PROMPT = """\
You grade a candidate answer against a reference answer for a question about
a waterway video clip. Judge semantic alignment with the reference and logical
consistency; wording differences do not matter. Reply with a single score
between 0 and 1, e.g. "Score: 0.8".
"""


def judge_score(question: str, candidate: str, reference: str, judge: Backend) -> float:
    """Rubric-based semantic/logical score in [0, 1]. Raises MetricUnavailable
    on backend failure or an unparseable reply — judge scores are never
    silently zeroed in evaluation reports."""
    prompt = (
        f"QUESTION:\n{question}\n\n"
        f"REFERENCE ANSWER:\n{reference}\n\n"
        f"CANDIDATE ANSWER:\n{candidate}\n\n"
        "Score the candidate from 0 to 1."
    )
    try:
        exchange = judge.chat(
            [
                ChatMessage(role="system", text=JUDGE_SYSTEM_PROMPT),
                ChatMessage(role="user", text=prompt),
            ]
        )
    except WaterwayQAError as exc:
        raise MetricUnavailable(f"judge backend failed: {exc}") from exc
    score = extract_score(exchange.response_text)
    if score is None:
        raise MetricUnavailable(
            f"judge reply had no score in [0, 1]: {exchange.response_text[:80]!r}"
        )
    return score


# --- report -----------------------------------------------------------------------


@dataclass(frozen=True)
class MetricReport:
    rouge1: float
    rouge2: float
    rougeL: float
    bleu1: float
    bleu2: float
    bleu3: float
    bleu4: float
    meteor: float
    cider: float
    judge_score: float | None = None

    def __post_init__(self):
        for name in ("rouge1", "rouge2", "rougeL", "bleu1", "bleu2", "bleu3", "bleu4", "meteor"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvalidArgument(f"{name} out of [0, 1]: {value}")
        if self.cider < 0.0:
            raise InvalidArgument(f"cider must be >= 0: {self.cider}")
        if self.judge_score is not None and not 0.0 <= self.judge_score <= 1.0:
            raise InvalidArgument(f"judge_score out of [0, 1]: {self.judge_score}")

    def to_dict(self) -> dict:
        return {
            "rouge1": self.rouge1,
            "rouge2": self.rouge2,
            "rougeL": self.rougeL,
            "bleu1": self.bleu1,
            "bleu2": self.bleu2,
            "bleu3": self.bleu3,
            "bleu4": self.bleu4,
            "meteor": self.meteor,
            "cider": self.cider,
            "judge_score": self.judge_score,
        }


def pair_scores(candidate_text: str, reference_text: str) -> dict[str, float]:
    """Every per-sample metric for one candidate/reference pair (CIDEr and the
    judge score are computed elsewhere: corpus-level and backend-bound)."""
    cand = tokenize(candidate_text)
    ref = tokenize(reference_text)
    return {
        "rouge1": rouge_n(cand, ref, 1),
        "rouge2": rouge_n(cand, ref, 2),
        "rougeL": rouge_l(cand, ref),
        "bleu1": bleu(cand, [ref], 1),
        "bleu2": bleu(cand, [ref], 2),
        "bleu3": bleu(cand, [ref], 3),
        "bleu4": bleu(cand, [ref], 4),
        "meteor": meteor_lite(cand, ref),
    }
