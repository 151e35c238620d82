"""Text feature extraction: a fixed, row-sparse TF-IDF document-term matrix.

The matrix is computed once per project and never changes afterwards, so
everything here is deterministic by construction: tokens are maximal runs
of Unicode alphanumerics of length >= 2 (lowercased by default, no stop
words removed by default), vocabulary columns are in lexicographic term
order, tf is the raw in-document count, idf(t) = ln((1+N)/(1+df(t))) + 1,
and every non-empty row is L2-normalized.

An advanced mode builds separate title and abstract matrices, scales them
by independent weights, concatenates the columns and then L2-normalizes
the combined rows, so a zero weight annihilates one block and equal
weights on disjoint vocabularies reproduce the unsplit matrix up to a
column permutation.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from importlib import resources

import numpy as np
from scipy import sparse

from .errors import EmptyVocabulary

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

_STOPWORDS: frozenset[str] | None = None


def stopwords() -> frozenset[str]:
    """The built-in 179-word English stopword list (shipped as a data file)."""
    global _STOPWORDS
    if _STOPWORDS is None:
        text = resources.files("screenloop.data").joinpath("stopwords.txt").read_text("utf-8")
        _STOPWORDS = frozenset(text.split())
    return _STOPWORDS


@dataclass(frozen=True)
class FeatureSpec:
    ngram_max: int = 1
    split_title_abstract: bool = False
    title_weight: float = 1.0
    abstract_weight: float = 1.0
    lowercase: bool = True
    stopword_removal: bool = False

    def validate(self) -> None:
        if not 1 <= self.ngram_max <= 3:
            raise ValueError("ngram_max must be in 1..3")
        if self.title_weight < 0 or self.abstract_weight < 0:
            raise ValueError("block weights must be nonnegative")
        if self.split_title_abstract and self.title_weight + self.abstract_weight <= 0:
            raise ValueError("split mode needs title_weight + abstract_weight > 0")


@dataclass(frozen=True)
class Vocabulary:
    """Term -> dense column index (lexicographic) plus document frequencies."""

    terms: tuple[str, ...]
    document_frequencies: tuple[int, ...]
    n_documents: int

    @property
    def size(self) -> int:
        return len(self.terms)

    def column(self, term: str) -> int | None:
        idx = self._index().get(term)
        return idx

    def _index(self) -> dict[str, int]:
        cached = getattr(self, "_term_index", None)
        if cached is None:
            cached = {t: i for i, t in enumerate(self.terms)}
            object.__setattr__(self, "_term_index", cached)
        return cached


class FeatureMatrix:
    """CSR wrapper: strictly positive stored values, unit (or empty) rows."""

    def __init__(self, matrix: sparse.csr_matrix, terms: tuple[str, ...]):
        matrix = matrix.tocsr()
        matrix.eliminate_zeros()
        self.matrix = matrix
        self.terms = terms

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_cols(self) -> int:
        return self.matrix.shape[1]

    def row_pairs(self, row: int) -> list[tuple[int, float]]:
        start, end = self.matrix.indptr[row], self.matrix.indptr[row + 1]
        return [
            (int(c), float(v))
            for c, v in zip(self.matrix.indices[start:end], self.matrix.data[start:end])
        ]

    def to_triplets(self) -> list[tuple[int, int, float]]:
        coo = self.matrix.tocoo()
        triplets = sorted(
            zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist())
        )
        return [(int(r), int(c), float(v)) for r, c, v in triplets]

    @classmethod
    def from_triplets(cls, n_rows, n_cols, triplets, terms) -> "FeatureMatrix":
        if triplets:
            rows, cols, vals = zip(*triplets)
        else:
            rows, cols, vals = (), (), ()
        matrix = sparse.csr_matrix(
            (np.asarray(vals, dtype=np.float64), (rows, cols)),
            shape=(n_rows, n_cols),
        )
        return cls(matrix, tuple(terms))


def tokenize(text: str, spec: FeatureSpec | None = None) -> list[str]:
    """Alphanumeric runs of length >= 2 plus optional appended n-grams.

    Stopword filtering (when enabled) happens before n-gram construction,
    so n-grams never bridge a removed word.
    """
    spec = spec or FeatureSpec()
    raw = _TOKEN_RE.findall(text)
    if spec.lowercase:
        raw = [t.lower() for t in raw]
    tokens = [t for t in raw if len(t) >= 2]
    if spec.stopword_removal:
        stop = stopwords()
        tokens = [t for t in tokens if t not in stop]
    if spec.ngram_max <= 1:
        return tokens
    out = list(tokens)
    for n in range(2, spec.ngram_max + 1):
        out.extend(
            " ".join(tokens[i : i + n]) for i in range(len(tokens) - n + 1)
        )
    return out


def fit_vocabulary(corpus) -> Vocabulary:
    """Collect distinct terms (lexicographic order) and per-document presence counts."""
    df: dict[str, int] = {}
    n_documents = 0
    for tokens in corpus:
        n_documents += 1
        for term in set(tokens):
            df[term] = df.get(term, 0) + 1
    if n_documents == 0:
        raise EmptyVocabulary("empty corpus")
    if not df:
        raise EmptyVocabulary("no token in any document")
    terms = tuple(sorted(df))
    return Vocabulary(
        terms=terms,
        document_frequencies=tuple(df[t] for t in terms),
        n_documents=n_documents,
    )


def _idf_vector(vocab: Vocabulary) -> np.ndarray:
    df = np.asarray(vocab.document_frequencies, dtype=np.float64)
    return np.log((1.0 + vocab.n_documents) / (1.0 + df)) + 1.0


def _raw_tfidf(corpus, vocab: Vocabulary) -> sparse.csr_matrix:
    """tf * idf without row normalization; out-of-vocabulary tokens ignored."""
    index = {t: i for i, t in enumerate(vocab.terms)}
    idf = _idf_vector(vocab)
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    n_rows = 0
    for tokens in corpus:
        n_rows += 1
        counts: dict[int, int] = {}
        for tok in tokens:
            col = index.get(tok)
            if col is not None:
                counts[col] = counts.get(col, 0) + 1
        for col in sorted(counts):
            indices.append(col)
            data.append(counts[col] * idf[col])
        indptr.append(len(indices))
    return sparse.csr_matrix(
        (np.asarray(data, dtype=np.float64), indices, indptr),
        shape=(n_rows, vocab.size),
    )


def _l2_normalize(matrix: sparse.csr_matrix) -> sparse.csr_matrix:
    matrix = matrix.tocsr().copy()
    norms = np.sqrt(matrix.multiply(matrix).sum(axis=1)).A1
    scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
    diag = sparse.diags(scale)
    return (diag @ matrix).tocsr()


def tfidf(corpus, vocab: Vocabulary) -> FeatureMatrix:
    """L2-normalized TF-IDF matrix over a tokenized corpus."""
    return FeatureMatrix(_l2_normalize(_raw_tfidf(corpus, vocab)), vocab.terms)


def build_features(dataset, spec: FeatureSpec | None = None) -> FeatureMatrix:
    """Dataset -> TF-IDF matrix, joint or split per-block with weights.

    Unsplit: each record's text is ``title + " " + abstract`` under one
    vocabulary.  Split: title and abstract get their own vocabularies and
    raw tf-idf blocks, which are weighted, column-concatenated and then
    L2-normalized in one pass.
    """
    spec = spec or FeatureSpec()
    spec.validate()
    if not spec.split_title_abstract:
        corpus = [tokenize(f"{r.title} {r.abstract}", spec) for r in dataset.records]
        vocab = fit_vocabulary(corpus)
        return tfidf(corpus, vocab)

    title_corpus = [tokenize(r.title, spec) for r in dataset.records]
    abstract_corpus = [tokenize(r.abstract, spec) for r in dataset.records]
    title_vocab = fit_vocabulary(title_corpus)
    abstract_vocab = fit_vocabulary(abstract_corpus)
    block_title = _raw_tfidf(title_corpus, title_vocab) * spec.title_weight
    block_abstract = _raw_tfidf(abstract_corpus, abstract_vocab) * spec.abstract_weight
    combined = sparse.hstack([block_title, block_abstract], format="csr")
    terms = title_vocab.terms + abstract_vocab.terms
    return FeatureMatrix(_l2_normalize(combined), terms)
