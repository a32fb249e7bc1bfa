"""The 16 per-answer features and the tf-idf machinery behind them.

A tf-idf "document" is one question-answer pair: the normalized prose
tokens of both posts plus the identifier tokens of both posts' code.
Document frequencies therefore count Q&A pairs, and N is the number of
answers in the run.  Weights follow w = nf * idf with
nf = 0.5 + 0.5 * tf / maxtf (maxtf over the document's own term set) and
idf = ln(N / df).
"""

from __future__ import annotations

import csv
import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .ingest import PostRow, QARecord, UserRow
from .textprep import (
    AnswerParts,
    count_code_lines,
    raw_tokens,
    remove_stop_words,
    split_code_blocks,
    split_sentences,
    tokenize,
)

FEATURE_NAMES = (
    "Timelag",
    "URLCount",
    "CommentCount",
    "Reputation",
    "TextPolarity",
    "AnswerCount",
    "ViewCount",
    "Score",
    "NumberOfCodeLine",
    "NumberOfSentence",
    "TextualSimilarity",
    "Codelength",
    "TFAnswerCode",
    "TFAnswerText",
    "SignUpDateTimeLag",
    "NumberOfWords",
)

LABEL_ACCEPTED = "accepted"
LABEL_UNACCEPTED = "unaccepted"

_URL_RE = re.compile(r"https?://")
_IDENTIFIER_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")

# tokens that flip the sign of the next lexicon word; "t" is the tail of
# split contractions (doesn't -> doesn, t)
NEGATORS = frozenset({"not", "no", "never", "none", "neither", "nor", "cannot", "t"})


class TfIdfError(Exception):
    pass


@dataclass
class TfIdfModel:
    vocabulary: dict[str, int]  # term -> dense index 0..|V|-1
    df: np.ndarray  # per-term document frequency
    n_docs: int

    def idf(self, index: int) -> float:
        return math.log(self.n_docs / self.df[index])


def fit_tfidf(corpus: list[list[str]]) -> TfIdfModel:
    """Fit vocabulary and document frequencies over token documents."""
    if not corpus:
        raise TfIdfError("empty corpus")
    df_counter: Counter = Counter()
    for doc in corpus:
        df_counter.update(set(doc))
    terms = sorted(df_counter)
    vocabulary = {t: i for i, t in enumerate(terms)}
    df = np.array([df_counter[t] for t in terms], dtype=np.int64)
    return TfIdfModel(vocabulary=vocabulary, df=df, n_docs=len(corpus))


TFIDF_SCHEMA_VERSION = 1


def tfidf_to_dict(model: TfIdfModel) -> dict:
    terms = sorted(model.vocabulary, key=model.vocabulary.get)
    return {
        "schema_version": TFIDF_SCHEMA_VERSION,
        "kind": "tfidf",
        "terms": terms,
        "df": [int(v) for v in model.df],
        "n_docs": model.n_docs,
    }


def tfidf_from_dict(payload: dict) -> TfIdfModel:
    if payload.get("schema_version") != TFIDF_SCHEMA_VERSION:
        raise TfIdfError(
            f"unsupported tfidf schema version: {payload.get('schema_version')!r}"
        )
    terms = payload["terms"]
    return TfIdfModel(
        vocabulary={t: i for i, t in enumerate(terms)},
        df=np.asarray(payload["df"], dtype=np.int64),
        n_docs=int(payload["n_docs"]),
    )


def save_tfidf(model: TfIdfModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(tfidf_to_dict(model), fh, sort_keys=True,
                  separators=(",", ":"), ensure_ascii=False)
        fh.write("\n")


def load_tfidf(path) -> TfIdfModel:
    with open(path, "r", encoding="utf-8") as fh:
        return tfidf_from_dict(json.load(fh))


def tfidf_vector(model: TfIdfModel, doc: list[str]) -> dict[int, float]:
    """Sparse Eq-style weight vector for one document.

    maxtf is the maximum raw count over the document's own terms, known
    or not; terms outside the vocabulary contribute no output entry.
    """
    if not doc:
        return {}
    counts = Counter(doc)
    maxtf = max(counts.values())
    out: dict[int, float] = {}
    for term, tf in counts.items():
        idx = model.vocabulary.get(term)
        if idx is None:
            continue
        nf = 0.5 + 0.5 * tf / maxtf
        out[idx] = nf * model.idf(idx)
    return out


def cosine_similarity(q, a) -> float:
    """Cosine of two vectors; 0.0 when either has zero norm.

    Accepts sparse mappings (index -> weight) or dense sequences.
    """
    if not isinstance(q, dict):
        q = {i: float(v) for i, v in enumerate(q) if v}
    if not isinstance(a, dict):
        a = {i: float(v) for i, v in enumerate(a) if v}
    norm_q = math.sqrt(sum(v * v for _, v in sorted(q.items())))
    norm_a = math.sqrt(sum(v * v for _, v in sorted(a.items())))
    if norm_q == 0.0 or norm_a == 0.0:
        return 0.0
    dot = sum(q[k] * a[k] for k in sorted(q.keys() & a.keys()))
    return dot / (norm_q * norm_a)


def tf_answer_text(question_tokens, answer_tokens, model: TfIdfModel) -> float:
    return cosine_similarity(
        tfidf_vector(model, question_tokens), tfidf_vector(model, answer_tokens)
    )


def tf_answer_code(question_tokens, code_tokens, model: TfIdfModel) -> float:
    return cosine_similarity(
        tfidf_vector(model, question_tokens), tfidf_vector(model, code_tokens)
    )


def vector_concordance_similarity(question_text: str, answer_text: str) -> float:
    """Cosine of raw word-count vectors over the pair's union vocabulary."""
    q_counts = Counter(raw_tokens(question_text))
    a_counts = Counter(raw_tokens(answer_text))
    union = sorted(q_counts.keys() | a_counts.keys())
    index = {t: i for i, t in enumerate(union)}
    q_vec = {index[t]: float(c) for t, c in q_counts.items()}
    a_vec = {index[t]: float(c) for t, c in a_counts.items()}
    return cosine_similarity(q_vec, a_vec)


def load_polarity_lexicon() -> dict[str, float]:
    text = resources.files("soaccept.data").joinpath("polarity_lexicon.tsv").read_text("utf-8")
    lexicon = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        word, valence = line.split("\t")
        lexicon[word] = float(valence)
    return lexicon


def text_polarity(text: str, lexicon: dict[str, float]) -> float:
    """Mean signed valence of matched lexicon words; negator flips sign."""
    tokens = raw_tokens(text)
    total = 0.0
    matched = 0
    for i, tok in enumerate(tokens):
        valence = lexicon.get(tok)
        if valence is None:
            continue
        if i > 0 and tokens[i - 1] in NEGATORS:
            valence = -valence
        total += valence
        matched += 1
    return total / matched if matched else 0.0


def load_keywords() -> frozenset[str]:
    words = set()
    for name in ("keywords_java.txt", "keywords_js.txt"):
        text = resources.files("soaccept.data").joinpath(name).read_text("utf-8")
        words.update(w for w in (line.strip() for line in text.splitlines()) if w)
    return frozenset(words)


def extract_identifiers(code: str, keywords: frozenset[str]) -> list[str]:
    return [t for t in _IDENTIFIER_RE.findall(code) if t not in keywords]


@dataclass
class CountFeatures:
    number_of_words: int
    number_of_sentence: int
    url_count: int
    number_of_code_line: int
    codelength: int


def count_features(
    parts: AnswerParts, stop_list: frozenset[str], keywords: frozenset[str]
) -> CountFeatures:
    return CountFeatures(
        number_of_words=len(remove_stop_words(raw_tokens(parts.prose_text), stop_list)),
        number_of_sentence=len(split_sentences(parts.prose_text)),
        url_count=len(_URL_RE.findall(parts.prose_text)),
        number_of_code_line=count_code_lines(parts.code_blocks),
        codelength=sum(
            len(extract_identifiers(block, keywords)) for block in parts.code_blocks
        ),
    )


class ClockAnomalyError(Exception):
    pass


def time_features(question: PostRow, answer: PostRow, user: UserRow) -> tuple[int, int]:
    timelag = answer.creation_ts - question.creation_ts
    if timelag < 0:
        raise ClockAnomalyError(
            f"answer {answer.id} predates question {question.id} by {-timelag} ms"
        )
    signup_lag = answer.creation_ts - user.creation_ts
    return timelag, signup_lag


@dataclass
class FeatureMatrix:
    names: tuple[str, ...]
    x: np.ndarray  # (n_rows, n_features) float64
    y: np.ndarray  # (n_rows,) int8, 1 = accepted
    question_ids: np.ndarray
    answer_ids: np.ndarray
    stats: dict = field(default_factory=dict)

    def __eq__(self, other):
        return (
            isinstance(other, FeatureMatrix)
            and self.names == other.names
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.question_ids, other.question_ids)
            and np.array_equal(self.answer_ids, other.answer_ids)
        )


@dataclass
class _PostText:
    parts: AnswerParts
    prose_tokens: list[str]
    code_ids: list[str]  # lowercased identifier tokens


def _analyze_post(post: PostRow, stop_list, keywords) -> _PostText:
    parts = split_code_blocks(post.body)
    prose_tokens = tokenize(parts.prose_text, stop_list)
    code_ids = [
        t.lower()
        for block in parts.code_blocks
        for t in extract_identifiers(block, keywords)
    ]
    return _PostText(parts=parts, prose_tokens=prose_tokens, code_ids=code_ids)


def build_pair_corpus(
    records: list[QARecord],
    stop_list: frozenset[str] | None = None,
    keywords: frozenset[str] | None = None,
) -> list[list[str]]:
    """Token document per Q&A pair: both prose streams plus both
    identifier streams, in (question id, answer id) order."""
    if stop_list is None:
        stop_list = _default_stopwords()
    if keywords is None:
        keywords = load_keywords()
    corpus = []
    for rec in sorted(records, key=lambda r: r.question.id):
        qt = _analyze_post(rec.question, stop_list, keywords)
        for entry in sorted(rec.answers, key=lambda e: e.post.id):
            at = _analyze_post(entry.post, stop_list, keywords)
            corpus.append(qt.prose_tokens + at.prose_tokens + qt.code_ids + at.code_ids)
    return corpus


def extract_matrix(
    records: list[QARecord],
    stop_list: frozenset[str] | None = None,
    lexicon: dict[str, float] | None = None,
    keywords: frozenset[str] | None = None,
    tfidf_model: TfIdfModel | None = None,
) -> FeatureMatrix:
    """One feature row per answer, ordered by (question id, answer id).

    The tf-idf model is fitted once over every Q&A pair of the run, then
    applied per answer; passing `tfidf_model` reuses frequencies from an
    earlier corpus instead.  Answers that predate their question (clock
    anomaly) are dropped and counted in stats.
    """
    if stop_list is None:
        stop_list = _default_stopwords()
    if lexicon is None:
        lexicon = load_polarity_lexicon()
    if keywords is None:
        keywords = load_keywords()

    ordered = sorted(records, key=lambda r: r.question.id)
    q_texts = [_analyze_post(r.question, stop_list, keywords) for r in ordered]
    a_texts = [
        [_analyze_post(a.post, stop_list, keywords) for a in sorted(r.answers, key=lambda e: e.post.id)]
        for r in ordered
    ]

    if tfidf_model is not None:
        model = tfidf_model
    else:
        corpus = []
        for qt, answers in zip(q_texts, a_texts):
            for at in answers:
                corpus.append(qt.prose_tokens + at.prose_tokens + qt.code_ids + at.code_ids)
        model = fit_tfidf(corpus) if corpus else None

    rows = []
    labels = []
    qids = []
    aids = []
    stats = {
        "rows_dropped_negative_timelag": 0,
        "rows_negative_signup_lag": 0,
        "unclosed_code_blocks": 0,
    }
    for rec, qt, answers in zip(ordered, q_texts, a_texts):
        entries = sorted(rec.answers, key=lambda e: e.post.id)
        for entry, at in zip(entries, answers):
            try:
                timelag, signup_lag = time_features(rec.question, entry.post, entry.user)
            except ClockAnomalyError:
                stats["rows_dropped_negative_timelag"] += 1
                continue
            if signup_lag < 0:
                stats["rows_negative_signup_lag"] += 1
            if at.parts.unclosed_code:
                stats["unclosed_code_blocks"] += 1
            counts = count_features(at.parts, stop_list, keywords)
            row = (
                float(timelag),
                float(counts.url_count),
                float(entry.post.comment_count),
                float(entry.user.reputation),
                text_polarity(at.parts.prose_text, lexicon),
                float(len(rec.answers)),
                float(rec.question.view_count or 0),
                float(entry.post.score),
                float(counts.number_of_code_line),
                float(counts.number_of_sentence),
                vector_concordance_similarity(qt.parts.prose_text, at.parts.prose_text),
                float(counts.codelength),
                tf_answer_code(qt.prose_tokens, at.code_ids, model),
                tf_answer_text(qt.prose_tokens, at.prose_tokens, model),
                float(signup_lag),
                float(counts.number_of_words),
            )
            rows.append(row)
            labels.append(1 if entry.accepted else 0)
            qids.append(rec.question.id)
            aids.append(entry.post.id)

    n = len(rows)
    return FeatureMatrix(
        names=FEATURE_NAMES,
        x=np.array(rows, dtype=np.float64).reshape(n, len(FEATURE_NAMES)),
        y=np.array(labels, dtype=np.int8),
        question_ids=np.array(qids, dtype=np.int64),
        answer_ids=np.array(aids, dtype=np.int64),
        stats=stats,
    )


def _default_stopwords() -> frozenset[str]:
    from .textprep import load_stopwords

    return load_stopwords()


def format_value(v: float) -> str:
    """Integral values print as integers, others with 9 significant digits."""
    if float(v).is_integer() and abs(v) < 2**53:
        return str(int(v))
    return f"{v:.9g}"


def write_features_csv(matrix: FeatureMatrix, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(matrix.names) + ["label"])
        for row, label in zip(matrix.x, matrix.y):
            writer.writerow(
                [format_value(v) for v in row]
                + [LABEL_ACCEPTED if label else LABEL_UNACCEPTED]
            )


def read_features_csv(path) -> FeatureMatrix:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header[:-1]) != FEATURE_NAMES or header[-1] != "label":
            raise ValueError(f"unexpected features header: {header}")
        rows, labels = [], []
        for rec in reader:
            rows.append([float(v) for v in rec[:-1]])
            labels.append(1 if rec[-1] == LABEL_ACCEPTED else 0)
    n = len(rows)
    return FeatureMatrix(
        names=FEATURE_NAMES,
        x=np.array(rows, dtype=np.float64).reshape(n, len(FEATURE_NAMES)),
        y=np.array(labels, dtype=np.int8),
        question_ids=np.zeros(n, dtype=np.int64),
        answer_ids=np.zeros(n, dtype=np.int64),
    )
