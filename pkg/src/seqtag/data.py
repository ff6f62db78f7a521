"""Corpus handling: tagged sentences, the CoNLL-style text codec, JSON
corpus conversion, vocabulary construction, dataset splitting, and a
synthetic corpus generator for self-contained experiments.

The on-disk sentence format is one ``token<space>tag`` pair per line with
a blank line after each sentence. The JSON side expects one top-level
object mapping corpus names to sentence lists, each sentence a list of
word objects carrying ``text`` and an optional ``entity`` annotation; a
null or missing annotation means the outside tag "O".
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass, field

from .errors import DataError, ParseError

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PAD_ID = 0
UNK_ID = 1
OUTSIDE_TAG = "O"


def _check_symbol(value: str, what: str, where: str) -> str:
    if not isinstance(value, str) or not value:
        raise DataError(f"{where}: {what} must be a non-empty string")
    if any(ch.isspace() for ch in value):
        # whitespace would corrupt the line-oriented codec
        raise DataError(f"{where}: {what} {value!r} contains whitespace")
    return value


@dataclass
class TaggedSentence:
    """A sentence with one tag per token. Validated on construction."""

    tokens: list[str]
    tags: list[str]

    def __post_init__(self):
        if not self.tokens:
            raise DataError("sentence has no tokens")
        if len(self.tokens) != len(self.tags):
            raise DataError(
                f"{len(self.tokens)} tokens but {len(self.tags)} tags"
            )
        for i, tok in enumerate(self.tokens):
            _check_symbol(tok, "token", f"position {i}")
        for i, tag in enumerate(self.tags):
            _check_symbol(tag, "tag", f"position {i}")

    def __len__(self) -> int:
        return len(self.tokens)


# ---------------------------------------------------------------------------
# JSON corpus conversion


def convert_json_corpus(text: str) -> list[TaggedSentence]:
    """Flatten a JSON annotation document into tagged sentences.

    Corpora are concatenated in file order. Unannotated words (``entity``
    null, empty, or absent) get the outside tag. Empty sentences are
    skipped. Unknown keys on word objects are ignored. Structural
    problems raise ParseError naming the offending element; a bad word
    entry raises DataError with the same kind of path.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object mapping corpus names to sentence lists")
    out: list[TaggedSentence] = []
    for cname, sentences in doc.items():
        if not isinstance(sentences, list):
            raise ParseError(f"corpus {cname!r}: expected a list of sentences")
        for si, sent in enumerate(sentences):
            where_s = f"corpus {cname!r} sentence {si}"
            if not isinstance(sent, list):
                raise ParseError(f"{where_s}: expected a list of word objects")
            tokens: list[str] = []
            tags: list[str] = []
            for wi, word in enumerate(sent):
                where_w = f"{where_s} word {wi}"
                if not isinstance(word, dict):
                    raise ParseError(f"{where_w}: expected an object")
                if "text" not in word:
                    raise DataError(f"{where_w}: missing token text")
                tokens.append(_check_symbol(word["text"], "token text", where_w))
                entity = word.get("entity")
                if entity is None or entity == "":
                    tags.append(OUTSIDE_TAG)
                elif isinstance(entity, str):
                    tags.append(_check_symbol(entity, "entity tag", where_w))
                else:
                    raise DataError(f"{where_w}: entity must be a string or null")
            if tokens:
                out.append(TaggedSentence(tokens, tags))
    return out


# ---------------------------------------------------------------------------
# CoNLL-style codec


def write_conll(sentences: list[TaggedSentence]) -> str:
    """Render sentences in the line-oriented format; one blank line closes
    each sentence, so a non-empty result always ends with a newline."""
    parts: list[str] = []
    for sent in sentences:
        for tok, tag in zip(sent.tokens, sent.tags):
            parts.append(f"{tok} {tag}\n")
        parts.append("\n")
    return "".join(parts)


def parse_conll(text: str) -> list[TaggedSentence]:
    """Inverse of write_conll. Tolerates CRLF line endings and any number
    of trailing blank lines; anything other than two whitespace-separated
    fields on a non-blank line is a ParseError carrying the line number."""
    sentences: list[TaggedSentence] = []
    tokens: list[str] = []
    tags: list[str] = []

    def flush():
        if tokens:
            sentences.append(TaggedSentence(tokens.copy(), tags.copy()))
            tokens.clear()
            tags.clear()

    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip("\r")
        if not line.strip():
            flush()
            continue
        fields = line.split()
        if len(fields) != 2:
            raise ParseError(
                f"line {lineno}: expected 'token tag', got {len(fields)} fields"
            )
        tokens.append(fields[0])
        tags.append(fields[1])
    flush()
    return sentences


# ---------------------------------------------------------------------------
# Vocabulary


class Vocabulary:
    """Bidirectional token and tag id maps.

    Token id 0 is PAD and id 1 is UNK; unknown tokens encode to UNK. Tag
    ids are dense 0..K-1 and carry no reserved entries; encoding an
    unknown tag is an error because silently mislabeling gold data would
    poison training.
    """

    def __init__(self, id_to_token: list[str], id_to_tag: list[str]):
        if len(id_to_token) < 2 or id_to_token[0] != PAD_TOKEN or id_to_token[1] != UNK_TOKEN:
            raise DataError(f"token list must start with {PAD_TOKEN!r}, {UNK_TOKEN!r}")
        if len(set(id_to_token)) != len(id_to_token):
            raise DataError("duplicate tokens in vocabulary")
        if not id_to_tag:
            raise DataError("tag set is empty")
        if len(set(id_to_tag)) != len(id_to_tag):
            raise DataError("duplicate tags in vocabulary")
        self.id_to_token = list(id_to_token)
        self.id_to_tag = list(id_to_tag)
        self._token_ids = {t: i for i, t in enumerate(self.id_to_token)}
        self._tag_ids = {t: i for i, t in enumerate(self.id_to_tag)}

    @property
    def num_tokens(self) -> int:
        return len(self.id_to_token)

    @property
    def num_tags(self) -> int:
        return len(self.id_to_tag)

    def encode_tokens(self, tokens: list[str]) -> list[int]:
        get = self._token_ids.get
        return [get(tok, UNK_ID) for tok in tokens]

    def encode_tags(self, tags: list[str]) -> list[int]:
        try:
            return [self._tag_ids[t] for t in tags]
        except KeyError as e:
            raise DataError(f"tag {e.args[0]!r} not in vocabulary") from None

    def decode_tags(self, ids: list[int]) -> list[str]:
        out = []
        for i in ids:
            if not 0 <= int(i) < self.num_tags:
                raise IndexError(f"tag id {i} outside [0, {self.num_tags})")
            out.append(self.id_to_tag[int(i)])
        return out


def build_vocab(
    sentences: list[TaggedSentence],
    min_count: int = 1,
    tag_source: list[TaggedSentence] | None = None,
) -> Vocabulary:
    """Count tokens over ``sentences`` and assign ids by descending
    frequency, ties broken lexicographically; tokens seen fewer than
    ``min_count`` times are left to UNK. The tag inventory is taken from
    ``tag_source`` when given (e.g. the full corpus while tokens come from
    the training split alone) and sorted lexicographically."""
    if not sentences:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    if min_count < 1:
        raise ValueError(f"min_count must be >= 1, got {min_count}")
    counts: Counter[str] = Counter()
    for sent in sentences:
        counts.update(sent.tokens)
    kept = sorted(
        (t for t, c in counts.items() if c >= min_count),
        key=lambda t: (-counts[t], t),
    )
    tag_sentences = sentences if tag_source is None else tag_source
    tags = sorted({tag for sent in tag_sentences for tag in sent.tags})
    if not tags:
        raise ValueError("no tags found")
    return Vocabulary([PAD_TOKEN, UNK_TOKEN] + kept, tags)


# ---------------------------------------------------------------------------
# Dataset split


@dataclass
class SplitSpec:
    """Shuffled train/validation/test split. Fractions must be whole
    percents summing to one; cut points use exact integer arithmetic so
    the sizes are floor(0.7 n) etc. with no float drift."""

    fractions: tuple[float, float, float] = (0.70, 0.10, 0.20)
    seed: int = 0
    _percents: tuple[int, int, int] = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.fractions) != 3:
            raise ValueError("need exactly three fractions")
        pct = []
        for f in self.fractions:
            p = round(f * 100)
            if p < 1 or abs(f * 100 - p) > 1e-6:
                raise ValueError(f"fraction {f} is not a positive whole percent")
            pct.append(p)
        if sum(pct) != 100:
            raise ValueError(f"fractions {self.fractions} do not sum to 1")
        self._percents = tuple(pct)


def split_dataset(sentences: list[TaggedSentence], spec: SplitSpec):
    """Shuffle with the spec seed and cut into (train, val, test)."""
    n = len(sentences)
    if n < 3:
        raise ValueError(f"need at least 3 sentences to split, got {n}")
    shuffled = list(sentences)
    random.Random(spec.seed).shuffle(shuffled)
    p1, p2, _ = spec._percents
    cut1 = p1 * n // 100
    cut2 = (p1 + p2) * n // 100
    return shuffled[:cut1], shuffled[cut1:cut2], shuffled[cut2:]


# ---------------------------------------------------------------------------
# Synthetic corpus


def generate_synthetic_corpus(
    seed: int,
    n_sentences: int,
    vocab_size: int = 100,
    n_tags: int = 5,
) -> list[TaggedSentence]:
    """Deterministic corpus where each surface token encodes its own tag.

    Token i of the lexicon belongs to class ``i % n_tags`` and is spelled
    ``w<i>c<class>``; its gold tag is ``T<class>``. Sentence lengths are
    uniform on [3, 12]. A competent tagger should reach near-perfect
    accuracy here, which makes the corpus a learnability probe rather
    than a benchmark.
    """
    if n_tags < 2:
        raise ValueError(f"n_tags must be >= 2, got {n_tags}")
    if vocab_size < n_tags:
        raise ValueError(f"vocab_size {vocab_size} smaller than n_tags {n_tags}")
    if n_sentences < 1:
        raise ValueError(f"n_sentences must be >= 1, got {n_sentences}")
    lexicon = [f"w{i}c{i % n_tags}" for i in range(vocab_size)]
    tag_of = [f"T{i % n_tags}" for i in range(vocab_size)]
    rng = random.Random(seed)
    sentences = []
    for _ in range(n_sentences):
        length = rng.randint(3, 12)
        idxs = [rng.randrange(vocab_size) for _ in range(length)]
        sentences.append(
            TaggedSentence([lexicon[i] for i in idxs], [tag_of[i] for i in idxs])
        )
    return sentences
