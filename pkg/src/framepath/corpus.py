"""Corpus containers, JSONL IO, tag codecs, ontology, and vocabularies.

A corpus file holds one JSON object per line:

    {"tokens": [...], "pos": [...], "tree": "(S ...)",
     "annotations": [{"target": [1], "lu": "try.v", "frame": "Attempt",
                      "elements": [{"span": [0, 0], "label": "Agent"}]}]}

Spans are inclusive [start, end] token index pairs.  Targets are sorted
token index lists and may be discontinuous.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .syntax import ConstTree, TreeSyntaxError, parse_bracketed, serialize

UNK = "<unk>"

# Tag ids for target spans (O outside, B begin, I inside, C continuation
# of a discontinuous target after a gap).
TI_TAGS = ("O", "B", "I", "C")
O, B, I, C = 0, 1, 2, 3

# Tag ids for argument spans (plain begin/inside, no discontinuity).
AI_TAGS = ("O", "B", "I")


class CorpusError(ValueError):
    """Raised when a corpus or ontology file fails validation."""


@dataclass
class FrameAnnotation:
    target: list[int]
    lu: str
    frame: str
    elements: list[tuple[tuple[int, int], str]] = field(default_factory=list)


@dataclass
class Sentence:
    tokens: list[str]
    pos: list[str]
    tree: ConstTree
    annotations: list[FrameAnnotation] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.tokens)


# ---------------------------------------------------------------------------
# tag codecs

def encode_iobc(targets: Sequence[Sequence[int]], n: int) -> list[int]:
    """Tag a sentence of length n with its target index sets.

    Each target's first token gets B; later tokens get I when contiguous
    with the previous target token and C after a gap.  Raises when the
    targets overlap or when the tagging would not decode back to the same
    sets (interleaved discontinuous targets cannot be represented).
    """
    tags = [O] * n
    seen: set[int] = set()
    norm = [sorted(t) for t in targets]
    for t in norm:
        if not t:
            raise ValueError("empty target index set")
        if t[0] < 0 or t[-1] >= n:
            raise ValueError(f"target index out of range for n={n}: {t}")
        if seen & set(t):
            raise ValueError(f"overlapping targets at indices {sorted(seen & set(t))}")
        seen |= set(t)
        for k, idx in enumerate(t):
            if k == 0:
                tags[idx] = B
            elif idx == t[k - 1] + 1:
                tags[idx] = I
            else:
                tags[idx] = C
    if decode_iobc(tags) != sorted(norm):
        raise ValueError("interleaved discontinuous targets cannot be tagged")
    return tags


def decode_iobc(tags: Sequence[int]) -> list[list[int]]:
    """Recover target index sets from a tag sequence.

    Total over arbitrary sequences: a stray I or C (no open target to
    extend) starts a new target.  Returned sets are sorted by first index.
    """
    targets: list[list[int]] = []
    cur: list[int] | None = None
    for i, tag in enumerate(tags):
        if tag == B:
            cur = [i]
            targets.append(cur)
        elif tag == I:
            if cur is not None and cur[-1] == i - 1:
                cur.append(i)
            else:
                cur = [i]
                targets.append(cur)
        elif tag == C:
            if cur is not None:
                cur.append(i)
            else:
                cur = [i]
                targets.append(cur)
    return sorted(targets)


def encode_iob2(spans: Sequence[tuple[int, int]], n: int) -> list[int]:
    """Tag a sentence of length n with contiguous [start, end] spans."""
    tags = [0] * n
    last_end = -1
    for start, end in sorted(spans):
        if not (0 <= start <= end < n):
            raise ValueError(f"span ({start}, {end}) out of range for n={n}")
        if start <= last_end:
            raise ValueError(f"overlapping span ({start}, {end})")
        tags[start] = 1
        for i in range(start + 1, end + 1):
            tags[i] = 2
        last_end = end
    return tags


def decode_iob2(tags: Sequence[int]) -> list[tuple[int, int]]:
    """Recover sorted spans from a tag sequence; a stray I opens a span."""
    spans: list[tuple[int, int]] = []
    start: int | None = None
    for i, tag in enumerate(tags):
        if tag == 1:
            if start is not None:
                spans.append((start, i - 1))
            start = i
        elif tag == 2:
            if start is None:
                start = i
        else:
            if start is not None:
                spans.append((start, i - 1))
                start = None
    if start is not None:
        spans.append((start, len(tags) - 1))
    return spans


def lu_key(tokens: Sequence[str], target: Sequence[int], pos: Sequence[str]) -> str:
    """Lexical-unit key for a target: joined lowercased words + POS letter.

    The suffix letter comes from the coarse part of speech of the first
    target token ("picked up" tagged VBD/RP gives "picked up.v").
    """
    words = " ".join(tokens[i].lower() for i in sorted(target))
    first_pos = pos[sorted(target)[0]]
    coarse = {"V": "v", "N": "n", "J": "a", "R": "adv", "I": "prep"}
    return f"{words}.{coarse.get(first_pos[:1], first_pos[:1].lower())}"


# ---------------------------------------------------------------------------
# ontology

@dataclass
class Ontology:
    """Lexicon mapping lexical units to frames and frames to role labels."""

    lu_to_frames: dict[str, list[str]]
    frame_to_elements: dict[str, list[str]]
    frames: list[str] = field(init=False)
    fes: list[str] = field(init=False)
    lus: list[str] = field(init=False)

    def __post_init__(self):
        self.lu_to_frames = {k: sorted(set(v)) for k, v in self.lu_to_frames.items()}
        self.frame_to_elements = {
            k: sorted(set(v)) for k, v in self.frame_to_elements.items()
        }
        for lu, frames in self.lu_to_frames.items():
            if not frames:
                raise CorpusError(f"lexical unit {lu!r} licenses no frames")
            for f in frames:
                if f not in self.frame_to_elements:
                    raise CorpusError(
                        f"lexical unit {lu!r} references unknown frame {f!r}"
                    )
        self.frames = sorted(self.frame_to_elements)
        self.fes = sorted({e for v in self.frame_to_elements.values() for e in v})
        self.lus = sorted(self.lu_to_frames)

    def frame_mask(self, lu: str) -> np.ndarray:
        """Boolean vector over the frame inventory: frames licensed by lu."""
        if lu not in self.lu_to_frames:
            raise KeyError(f"unknown lexical unit {lu!r}")
        allowed = set(self.lu_to_frames[lu])
        return np.array([f in allowed for f in self.frames], dtype=bool)

    def fe_mask(self, frame: str) -> np.ndarray:
        """Boolean vector over the role inventory: roles licensed by frame."""
        if frame not in self.frame_to_elements:
            raise KeyError(f"unknown frame {frame!r}")
        allowed = set(self.frame_to_elements[frame])
        return np.array([e in allowed for e in self.fes], dtype=bool)

    def to_dict(self) -> dict:
        return {
            "lu_to_frames": self.lu_to_frames,
            "frame_to_elements": self.frame_to_elements,
        }


def load_ontology(path: str) -> Ontology:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as e:
            raise CorpusError(f"{path}: invalid JSON: {e}") from e
    if not isinstance(data, dict) or set(data) != {"lu_to_frames", "frame_to_elements"}:
        raise CorpusError(
            f"{path}: expected keys lu_to_frames and frame_to_elements"
        )
    return Ontology(data["lu_to_frames"], data["frame_to_elements"])


def save_ontology(ontology: Ontology, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(ontology.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# corpus IO

def _sentence_from_dict(obj: dict, where: str, ontology: Ontology | None) -> Sentence:
    for key in ("tokens", "pos", "tree"):
        if key not in obj:
            raise CorpusError(f"{where}: missing field {key!r}")
    tokens = obj["tokens"]
    pos = obj["pos"]
    try:
        tree = parse_bracketed(obj["tree"])
    except TreeSyntaxError as e:
        raise CorpusError(f"{where}: bad tree: {e}") from e
    if tree.tokens() != tokens:
        raise CorpusError(
            f"{where}: tree leaves {tree.tokens()!r} do not match tokens {tokens!r}"
        )
    if len(pos) != len(tokens):
        raise CorpusError(f"{where}: {len(pos)} pos tags for {len(tokens)} tokens")
    tree_pos = [tree.nodes[k].label for k in tree.preterminal_order]
    if tree_pos != pos:
        raise CorpusError(
            f"{where}: preterminal labels {tree_pos!r} do not match pos {pos!r}"
        )

    annotations = []
    n = len(tokens)
    for a_idx, ann in enumerate(obj.get("annotations", [])):
        loc = f"{where}, annotation {a_idx}"
        for key in ("target", "lu", "frame"):
            if key not in ann:
                raise CorpusError(f"{loc}: missing field {key!r}")
        target = sorted(ann["target"])
        if not target or target[0] < 0 or target[-1] >= n:
            raise CorpusError(f"{loc}: bad target indices {ann['target']!r}")
        if len(set(target)) != len(target):
            raise CorpusError(f"{loc}: duplicate target indices")
        elements = []
        spans_seen: list[tuple[int, int]] = []
        for el in ann.get("elements", []):
            if set(el) != {"span", "label"}:
                raise CorpusError(f"{loc}: element needs span and label, got {el!r}")
            start, end = el["span"]
            if not (0 <= start <= end < n):
                raise CorpusError(f"{loc}: span {el['span']!r} out of range")
            for s2, e2 in spans_seen:
                if start <= e2 and s2 <= end:
                    raise CorpusError(
                        f"{loc}: span ({start}, {end}) overlaps ({s2}, {e2})"
                    )
            spans_seen.append((start, end))
            elements.append(((start, end), el["label"]))
        if ontology is not None:
            if ann["lu"] not in ontology.lu_to_frames:
                raise CorpusError(f"{loc}: unknown lexical unit {ann['lu']!r}")
            if ann["frame"] not in ontology.lu_to_frames[ann["lu"]]:
                raise CorpusError(
                    f"{loc}: frame {ann['frame']!r} not licensed by {ann['lu']!r}"
                )
            licensed = set(ontology.frame_to_elements[ann["frame"]])
            for _, label in elements:
                if label not in licensed:
                    raise CorpusError(
                        f"{loc}: role {label!r} not licensed by frame "
                        f"{ann['frame']!r}"
                    )
        elements.sort()
        annotations.append(
            FrameAnnotation(target=target, lu=ann["lu"], frame=ann["frame"],
                            elements=elements)
        )
    return Sentence(tokens=tokens, pos=pos, tree=tree, annotations=annotations)


def sentence_to_dict(sent: Sentence) -> dict:
    return {
        "tokens": sent.tokens,
        "pos": sent.pos,
        "tree": serialize(sent.tree),
        "annotations": [
            {
                "target": ann.target,
                "lu": ann.lu,
                "frame": ann.frame,
                "elements": [
                    {"span": [s, e], "label": lab} for (s, e), lab in ann.elements
                ],
            }
            for ann in sent.annotations
        ],
    }


def load_corpus(path: str, ontology: Ontology | None = None) -> list[Sentence]:
    """Read a JSONL corpus; errors carry the 1-based line number.

    With an ontology, annotations are checked against it (known lexical
    units, licensed frames and roles).
    """
    sentences = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusError(f"{path}:{lineno}: invalid JSON: {e}") from e
            sentences.append(_sentence_from_dict(obj, f"{path}:{lineno}", ontology))
    return sentences


def save_corpus(sentences: Sequence[Sentence], path: str) -> None:
    with open(path, "w") as fh:
        for sent in sentences:
            fh.write(json.dumps(sentence_to_dict(sent)) + "\n")


# ---------------------------------------------------------------------------
# vocabularies

@dataclass
class Vocab:
    """Deterministic string-to-id tables shared by model and checkpoints.

    tokens[0] is the unknown-word entry; every other table is closed
    (an unseen part of speech or constituent label is an error, since its
    embedding was never trained).
    """

    tokens: list[str]
    pos: list[str]
    labels: list[str]
    frames: list[str]
    fes: list[str]
    lus: list[str]

    def __post_init__(self):
        if self.tokens[0] != UNK:
            raise ValueError(f"tokens[0] must be {UNK!r}")
        self._token = {t: i for i, t in enumerate(self.tokens)}
        self._pos = {p: i for i, p in enumerate(self.pos)}
        self._label = {l: i for i, l in enumerate(self.labels)}
        self._frame = {f: i for i, f in enumerate(self.frames)}
        self._fe = {e: i for i, e in enumerate(self.fes)}
        self._lu = {u: i for i, u in enumerate(self.lus)}
        for name, table in [("tokens", self._token), ("pos", self._pos),
                            ("labels", self._label), ("frames", self._frame),
                            ("fes", self._fe), ("lus", self._lu)]:
            if len(table) != len(getattr(self, name)):
                raise ValueError(f"duplicate entries in {name} vocabulary")

    def token_id(self, token: str) -> int:
        return self._token.get(token, 0)

    def pos_id(self, tag: str) -> int:
        if tag not in self._pos:
            raise KeyError(f"part of speech {tag!r} not in training vocabulary")
        return self._pos[tag]

    def label_id(self, label: str) -> int:
        if label not in self._label:
            raise KeyError(f"constituent label {label!r} not in training vocabulary")
        return self._label[label]

    def frame_id(self, frame: str) -> int:
        if frame not in self._frame:
            raise KeyError(f"unknown frame {frame!r}")
        return self._frame[frame]

    def fe_id(self, fe: str) -> int:
        if fe not in self._fe:
            raise KeyError(f"unknown role label {fe!r}")
        return self._fe[fe]

    def lu_id(self, lu: str) -> int:
        if lu not in self._lu:
            raise KeyError(f"unknown lexical unit {lu!r}")
        return self._lu[lu]

    def to_dict(self) -> dict:
        return {
            "tokens": self.tokens,
            "pos": self.pos,
            "labels": self.labels,
            "frames": self.frames,
            "fes": self.fes,
            "lus": self.lus,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Vocab":
        return cls(**{k: list(data[k]) for k in
                      ("tokens", "pos", "labels", "frames", "fes", "lus")})


def build_vocab(sentences: Sequence[Sentence], ontology: Ontology) -> Vocab:
    """Closed vocabularies from a training corpus plus its ontology."""
    tokens: set[str] = set()
    pos: set[str] = set()
    labels: set[str] = set()
    for sent in sentences:
        tokens.update(sent.tokens)
        pos.update(sent.pos)
        labels.update(node.label for node in sent.tree.nodes)
    return Vocab(
        tokens=[UNK] + sorted(tokens),
        pos=sorted(pos),
        labels=sorted(labels),
        frames=list(ontology.frames),
        fes=list(ontology.fes),
        lus=list(ontology.lus),
    )
