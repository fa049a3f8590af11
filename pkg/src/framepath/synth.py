"""Deterministic toy-corpus generator.

A handful of sentence templates over a small word list, built directly
as bracketed trees so every role span is a constituent span by
construction.  The workhorse is the prepositional-attachment pair: the
same surface string "<subj> sold the bread near the mill" is generated
with the PP attached either to the verb phrase (the PP is a Place role)
or inside the object noun phrase (one long Goods role).  Token and POS
sequences are identical across the two readings, so only a model that
reads the tree can tell them apart; the attachment coin is flipped
independently of all word choices to keep the surface unpredictive.

"ran" evokes Motion before a preposition and Operating before a direct
object, giving frame identification a genuinely ambiguous lexical unit,
and "picked ... up" yields a discontinuous target.
"""

from __future__ import annotations

import numpy as np

from .corpus import FrameAnnotation, Ontology, Sentence
from .syntax import parse_bracketed

SUBJECTS = [("mara", "NNP"), ("tam", "NNP"), ("ida", "NNP"),
            ("bruno", "NNP"), ("she", "PRP"), ("he", "PRP"), ("they", "PRP")]
GOODS = ["bread", "wool", "grain", "cloth", "honey"]
PLACES = ["mill", "hill", "barn", "market", "river"]
DEVICES = ["loom", "cart", "press"]
ASSETS = ["ledger", "basket", "lantern", "key"]
ADJECTIVES = ["old", "dusty", "small"]
PREPOSITIONS = ["near", "behind", "toward", "down"]
MOTION_VERBS = ["walked", "wandered", "ran"]
SELL_VERBS = ["sold", "peddled"]
KEEP_VERBS = ["kept", "held"]
ADVERBS = ["swiftly", "quietly"]
INTERJECTIONS = ["well", "oh"]
DETERMINERS = ["the", "a"]


def make_ontology() -> Ontology:
    return Ontology(
        lu_to_frames={
            "sold.v": ["Commerce_sell"],
            "peddled.v": ["Commerce_sell"],
            "ran.v": ["Motion", "Operating"],
            "walked.v": ["Motion"],
            "wandered.v": ["Motion"],
            "kept.v": ["Possession"],
            "held.v": ["Possession"],
            "picked up.v": ["Taking"],
        },
        frame_to_elements={
            "Commerce_sell": ["Seller", "Goods", "Place"],
            "Motion": ["Mover", "Path"],
            "Operating": ["Agent", "Device"],
            "Possession": ["Owner", "Asset"],
            "Taking": ["Taker", "Theme"],
        },
    )


class _Builder:
    """Assembles bracket fragments while tracking token offsets."""

    def __init__(self):
        self.parts: list[str] = []
        self.n = 0

    def add(self, fragment: str, n_tokens: int) -> tuple[int, int]:
        self.parts.append(fragment)
        start = self.n
        self.n += n_tokens
        return start, self.n - 1

    def sentence(self) -> str:
        return "(S " + " ".join(self.parts) + ")"


def _pick(rng: np.random.Generator, pool: list):
    return pool[int(rng.integers(len(pool)))]


def _noun_phrase(rng, nouns: list[str], label: str = "NP") -> tuple[str, int]:
    det = _pick(rng, DETERMINERS)
    noun = _pick(rng, nouns)
    if rng.random() < 0.3:
        adj = _pick(rng, ADJECTIVES)
        return f"({label} (DT {det}) (JJ {adj}) (NN {noun}))", 3
    return f"({label} (DT {det}) (NN {noun}))", 2


def _subject(rng, b: _Builder) -> tuple[int, int]:
    word, pos = _pick(rng, SUBJECTS)
    return b.add(f"(NP ({pos} {word}))", 1)


def _finish(b: _Builder, pos_annotations) -> Sentence:
    tree = parse_bracketed(b.sentence())
    sent = Sentence(tokens=tree.tokens(),
                    pos=[tree.nodes[i].label for i in tree.preterminal_order],
                    tree=tree, annotations=pos_annotations)
    return sent


def _sell(rng) -> Sentence:
    # surface drawn first, attachment flipped after, so the words carry
    # no information about the tree
    verb = _pick(rng, SELL_VERBS)
    obj_np, obj_n = _noun_phrase(rng, GOODS)
    prep = _pick(rng, PREPOSITIONS)
    pp_np, pp_n = _noun_phrase(rng, PLACES)
    attach_np = rng.random() < 0.5

    b = _Builder()
    seller = _subject(rng, b)
    if attach_np:
        inner = obj_np.replace("(NP ", "(NML ", 1)
        frag = f"(VP (VBD {verb}) (NP {inner} (PP (IN {prep}) {pp_np})))"
        vstart, _ = b.add(frag, 1 + obj_n + 1 + pp_n)
        goods = (vstart + 1, vstart + obj_n + 1 + pp_n)
        elements = [((seller[0], seller[1]), "Seller"), (goods, "Goods")]
    else:
        frag = f"(VP (VBD {verb}) {obj_np} (PP (IN {prep}) {pp_np}))"
        vstart, _ = b.add(frag, 1 + obj_n + 1 + pp_n)
        goods = (vstart + 1, vstart + obj_n)
        place = (vstart + obj_n + 1, vstart + obj_n + 1 + pp_n)
        elements = [((seller[0], seller[1]), "Seller"), (goods, "Goods"),
                    (place, "Place")]
    ann = FrameAnnotation(target=[seller[1] + 1], lu=f"{verb}.v",
                          frame="Commerce_sell", elements=sorted(elements))
    return _finish(b, [ann])


def _motion(rng) -> Sentence:
    b = _Builder()
    if rng.random() < 0.25:
        b.add(f"(INTJ (UH {_pick(rng, INTERJECTIONS)}))", 1)
    mover = _subject(rng, b)
    if rng.random() < 0.25:
        b.add(f"(ADVP (RB {_pick(rng, ADVERBS)}))", 1)
    verb = _pick(rng, MOTION_VERBS)
    prep = _pick(rng, PREPOSITIONS)
    pp_np, pp_n = _noun_phrase(rng, PLACES)
    frag = f"(VP (VBD {verb}) (PP (IN {prep}) {pp_np}))"
    vstart, vend = b.add(frag, 1 + 1 + pp_n)
    ann = FrameAnnotation(
        target=[vstart], lu=f"{verb}.v", frame="Motion",
        elements=[((mover[0], mover[1]), "Mover"), ((vstart + 1, vend), "Path")])
    return _finish(b, [ann])


def _operate(rng) -> Sentence:
    b = _Builder()
    agent = _subject(rng, b)
    obj_np, obj_n = _noun_phrase(rng, DEVICES)
    vstart, vend = b.add(f"(VP (VBD ran) {obj_np})", 1 + obj_n)
    ann = FrameAnnotation(
        target=[vstart], lu="ran.v", frame="Operating",
        elements=[((agent[0], agent[1]), "Agent"),
                  ((vstart + 1, vend), "Device")])
    return _finish(b, [ann])


def _possession(rng) -> Sentence:
    b = _Builder()
    owner = _subject(rng, b)
    verb = _pick(rng, KEEP_VERBS)
    obj_np, obj_n = _noun_phrase(rng, ASSETS)
    vstart, vend = b.add(f"(VP (VBD {verb}) {obj_np})", 1 + obj_n)
    ann = FrameAnnotation(
        target=[vstart], lu=f"{verb}.v", frame="Possession",
        elements=[((owner[0], owner[1]), "Owner"),
                  ((vstart + 1, vend), "Asset")])
    return _finish(b, [ann])


def _taking(rng) -> Sentence:
    b = _Builder()
    taker = _subject(rng, b)
    obj_np, obj_n = _noun_phrase(rng, ASSETS)
    frag = f"(VP (VBD picked) {obj_np} (PRT (RP up)))"
    vstart, vend = b.add(frag, 1 + obj_n + 1)
    ann = FrameAnnotation(
        target=[vstart, vend], lu="picked up.v", frame="Taking",
        elements=[((taker[0], taker[1]), "Taker"),
                  ((vstart + 1, vend - 1), "Theme")])
    return _finish(b, [ann])


def _coordination(rng) -> Sentence:
    # two targets sharing a subject: "<subj> kept the ledger and wandered
    # down the hill"
    b = _Builder()
    subj = _subject(rng, b)
    kverb = _pick(rng, KEEP_VERBS)
    obj_np, obj_n = _noun_phrase(rng, ASSETS)
    mverb = _pick(rng, ["walked", "wandered"])
    prep = _pick(rng, PREPOSITIONS)
    pp_np, pp_n = _noun_phrase(rng, PLACES)
    frag = (f"(VP (VP (VBD {kverb}) {obj_np}) (CC and) "
            f"(VP (VBD {mverb}) (PP (IN {prep}) {pp_np})))")
    vstart, vend = b.add(frag, 1 + obj_n + 1 + 1 + 1 + pp_n)
    mv = vstart + 1 + obj_n + 1
    anns = [
        FrameAnnotation(
            target=[vstart], lu=f"{kverb}.v", frame="Possession",
            elements=[((subj[0], subj[1]), "Owner"),
                      ((vstart + 1, vstart + obj_n), "Asset")]),
        FrameAnnotation(
            target=[mv], lu=f"{mverb}.v", frame="Motion",
            elements=[((subj[0], subj[1]), "Mover"), ((mv + 1, vend), "Path")]),
    ]
    return _finish(b, anns)


TEMPLATES = [(_sell, 0.50), (_motion, 0.12), (_operate, 0.08),
             (_possession, 0.08), (_taking, 0.10), (_coordination, 0.12)]


def generate(seed: int, n: int) -> tuple[list[Sentence], Ontology]:
    if n < 1:
        raise ValueError("need at least one sentence")
    rng = np.random.default_rng(seed)
    weights = np.array([w for _, w in TEMPLATES])
    weights /= weights.sum()
    sentences = []
    for _ in range(n):
        k = int(rng.choice(len(TEMPLATES), p=weights))
        sentences.append(TEMPLATES[k][0](rng))
    return sentences, make_ontology()
