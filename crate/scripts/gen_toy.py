#!/usr/bin/env python3
"""Regenerate the toy STS corpus under crates/core/tests/data/toy.

Every sentence follows one clause shape:
    DET [ADJ] NOUN VERB DET [ADJ] NOUN ADP DET NOUN .
so the dependency tree can be written down directly. Word vectors are
topic center + synonym-cluster center + noise, which makes synonyms close,
same-topic words moderately close and cross-topic words near orthogonal.
"""

import os
import random

DIM = 50
OUT = os.path.join(os.path.dirname(__file__), "..", "crates", "core", "tests", "data", "toy")

# topic -> list of synonym clusters
TOPICS = {
    "animals": [
        ["cat", "kitten"], ["dog", "puppy", "hound"], ["chased", "pursued"], ["mouse", "rat"],
        ["garden", "yard"], ["small", "little"], ["bird", "sparrow"], ["watched", "observed"],
        ["tree", "oak"], ["noisy", "loud"],
    ],
    "cooking": [
        ["chef", "cook"], ["cooked", "prepared"], ["soup", "stew"], ["kitchen", "galley"],
        ["delicious", "tasty"], ["bread", "loaf"], ["baked", "roasted"], ["oven", "stove"],
        ["fresh", "crisp"], ["vegetables", "greens"],
    ],
    "finance": [
        ["bank", "lender"], ["approved", "granted"], ["loan", "credit"], ["customer", "client"],
        ["new", "recent"], ["office", "branch"], ["manager", "director"], ["rejected", "denied"],
        ["request", "application"], ["large", "substantial"],
    ],
    "sport": [
        ["team", "squad"], ["won", "secured"], ["match", "game"], ["stadium", "arena"],
        ["final", "decisive"], ["coach", "trainer"], ["praised", "commended"], ["players", "athletes"],
        ["young", "junior"], ["trophy", "cup"],
    ],
    "travel": [
        ["train", "railway"], ["reached", "entered"], ["station", "terminal"], ["morning", "dawn"],
        ["late", "delayed"], ["passengers", "travelers"], ["boarded", "caught"], ["bus", "coach-bus"],
        ["crowded", "packed"], ["city", "town"],
    ],
}
FUNCTION = ["the", "a", "in", "at", "for", "with", "on", "."]

# (topic, subj_adj, subj, verb, obj_adj, obj, adp, pobj)
S = lambda *w: w  # noqa: E731

PAIRS = [
    # paraphrases
    ("toy-a", 5.0, S("animals", "small", "cat", "chased", None, "mouse", "in", "garden"),
                   S("animals", "little", "kitten", "pursued", None, "rat", "in", "yard")),
    ("toy-a", 4.8, S("cooking", None, "chef", "cooked", "delicious", "soup", "in", "kitchen"),
                   S("cooking", None, "cook", "prepared", "tasty", "stew", "in", "kitchen")),
    ("toy-a", 4.6, S("finance", None, "bank", "approved", "new", "loan", "for", "customer"),
                   S("finance", None, "lender", "granted", "recent", "credit", "for", "client")),
    ("toy-b", 4.9, S("sport", None, "team", "won", "final", "match", "at", "stadium"),
                   S("sport", None, "squad", "secured", "decisive", "game", "at", "arena")),
    ("toy-b", 4.7, S("travel", "late", "train", "reached", None, "station", "in", "morning"),
                   S("travel", "delayed", "railway", "entered", None, "terminal", "at", "dawn")),
    # unrelated
    ("toy-a", 0.0, S("animals", "noisy", "dog", "watched", None, "bird", "in", "tree"),
                   S("finance", None, "manager", "rejected", "large", "request", "at", "office")),
    ("toy-a", 0.2, S("cooking", None, "chef", "baked", "fresh", "bread", "in", "oven"),
                   S("sport", None, "coach", "praised", "young", "players", "at", "stadium")),
    ("toy-b", 0.1, S("finance", None, "client", "requested", "new", "loan", "at", "branch"),
                   S("animals", "small", "sparrow", "watched", None, "cat", "in", "garden")),
    ("toy-b", 0.4, S("sport", "young", "athletes", "won", None, "trophy", "at", "arena"),
                   S("travel", None, "passengers", "boarded", "crowded", "bus", "in", "city")),
    ("toy-b", 0.3, S("travel", None, "travelers", "caught", "late", "train", "at", "terminal"),
                   S("cooking", None, "cook", "roasted", "crisp", "vegetables", "on", "stove")),
    # same topic, partly related
    ("toy-a", 2.5, S("animals", None, "dog", "chased", None, "cat", "in", "yard"),
                   S("animals", None, "bird", "watched", None, "dog", "in", "tree")),
    ("toy-a", 3.2, S("cooking", None, "cook", "baked", "fresh", "bread", "in", "oven"),
                   S("cooking", None, "chef", "roasted", "fresh", "vegetables", "in", "oven")),
    ("toy-a", 1.8, S("finance", None, "director", "denied", None, "application", "at", "branch"),
                   S("finance", None, "bank", "opened", "new", "office", "in", "city")),
    ("toy-a", 2.9, S("sport", None, "coach", "praised", None, "squad", "at", "stadium"),
                   S("sport", None, "trainer", "commended", "junior", "athletes", "at", "arena")),
    ("toy-a", 1.5, S("travel", None, "passengers", "boarded", None, "bus", "at", "dawn"),
                   S("travel", None, "railway", "reached", "crowded", "city", "in", "morning")),
    ("toy-b", 3.5, S("animals", "loud", "hound", "pursued", None, "rat", "in", "garden"),
                   S("animals", "noisy", "puppy", "chased", None, "mouse", "in", "yard")),
    ("toy-b", 2.1, S("cooking", None, "chef", "prepared", None, "soup", "in", "galley"),
                   S("cooking", None, "cook", "baked", "delicious", "loaf", "in", "oven")),
    ("toy-b", 3.0, S("finance", None, "lender", "rejected", "large", "loan", "for", "client"),
                   S("finance", None, "bank", "denied", "substantial", "credit", "for", "customer")),
    ("toy-b", 1.2, S("sport", None, "team", "won", None, "cup", "at", "arena"),
                   S("sport", None, "coach", "watched", "young", "players", "at", "stadium")),
    ("toy-b", 2.6, S("travel", "crowded", "train", "reached", None, "city", "at", "dawn"),
                   S("travel", "packed", "railway", "entered", None, "town", "in", "morning")),
]


def parse(words):
    """Tokens as (form, upos, head, deprel) for the fixed clause shape."""
    _, sadj, subj, verb, oadj, obj, adp, pobj = words
    toks = []

    def add(form, upos, deprel):
        toks.append([form, upos, None, deprel])
        return len(toks)

    sdet = add("the", "DET", "det")
    sa = add(sadj, "ADJ", "amod") if sadj else None
    sn = add(subj, "NOUN", "nsubj")
    v = add(verb, "VERB", "root")
    odet = add("the", "DET", "det")
    oa = add(oadj, "ADJ", "amod") if oadj else None
    on = add(obj, "NOUN", "obj")
    case = add(adp, "ADP", "case")
    pdet = add("the", "DET", "det")
    pn = add(pobj, "NOUN", "obl")
    p = add(".", "PUNCT", "punct")
    heads = {sdet: sn, sn: v, v: 0, odet: on, on: v, case: pn, pdet: pn, pn: v, p: v}
    if sa:
        heads[sa] = sn
    if oa:
        heads[oa] = on
    for i, t in enumerate(toks, start=1):
        t[2] = heads[i]
    return toks


def main():
    rng = random.Random(7)
    gauss = lambda scale: [rng.gauss(0.0, scale) for _ in range(DIM)]  # noqa: E731

    vectors = {}
    for topic, clusters in TOPICS.items():
        center = gauss(1.0)
        for cluster in clusters:
            c = gauss(1.0)
            for w in cluster:
                noise = gauss(0.25)
                vectors[w] = [a + b + n for a, b, n in zip(center, c, noise)]
    for w in FUNCTION:
        vectors[w] = gauss(1.0)

    os.makedirs(OUT, exist_ok=True)
    conllu, sentences, sts, cls = [], [], [], []
    n = 0
    for k, (subset, gold, left, right) in enumerate(PAIRS):
        ids = []
        for words in (left, right):
            n += 1
            sid = f"t{n:02d}"
            ids.append(sid)
            toks = parse(words)
            text = " ".join(t[0] for t in toks[:-1]) + "."
            conllu.append(f"# sent_id = {sid}")
            conllu.append(f"# text = {text}")
            for i, (form, upos, head, rel) in enumerate(toks, start=1):
                if form not in vectors:
                    vectors[form] = gauss(1.0)
                conllu.append(f"{i}\t{form}\t{form}\t{upos}\t_\t_\t{head}\t{rel}\t_\t_")
            conllu.append("")
            sentences.append(f"{sid}\t{text}")
            cls.append(f"{words[0]}\t{sid}")
        sts.append(f"{subset}\t{gold}\t{ids[0]}\t{ids[1]}")

    with open(os.path.join(OUT, "corpus.conllu"), "w") as f:
        f.write("\n".join(conllu) + "\n")
    with open(os.path.join(OUT, "sentences.tsv"), "w") as f:
        f.write("\n".join(sentences) + "\n")
    with open(os.path.join(OUT, "sts.tsv"), "w") as f:
        f.write("\n".join(sts) + "\n")
    with open(os.path.join(OUT, "cls.tsv"), "w") as f:
        f.write("\n".join(cls) + "\n")
    with open(os.path.join(OUT, "vectors.txt"), "w") as f:
        f.write(f"{len(vectors)} {DIM}\n")
        for w in sorted(vectors):
            f.write(w + " " + " ".join(f"{x:.6f}" for x in vectors[w]) + "\n")


if __name__ == "__main__":
    main()
