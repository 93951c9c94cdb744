#!/usr/bin/env python3
"""Regenerate the small synthetic task suite under crates/core/fixtures/.

The word vectors are built so that the labels are learnable from averaged
embeddings: sentiment words point along one axis, subjectivity along
another, question words along per-class axes, and so on. Output is fully
determined by SEED.
"""

import math
import random
from pathlib import Path

SEED = 20171
DIM = 32
IMAGE_DIM = 2048
OUT = Path(__file__).resolve().parent.parent / "crates" / "core" / "fixtures"

rng = random.Random(SEED)

# semantic axes in word space
AX_SENT, AX_SUBJ, AX_NEG = 0, 1, 2
AX_TREC = [3, 4, 5, 6, 7, 8]
AX_TOPIC = list(range(9, 25))

POS = "great wonderful moving superb delightful charming brilliant fine".split()
NEG = "awful boring dull terrible clumsy tedious bland weak".split()
SUBJ = "i think feel believe beautiful sadly honestly seems".split()
OBJ = "the film follows story set year town family".split()
FILLER = "a an of to and is was it this that with on in for as at by its".split()
OOV = "zorblat quuxen flimmer".split()

TREC_CUES = {
    "ABBR": "abbreviation stand acronym".split(),
    "DESC": "why describe explain".split(),
    "ENTY": "which animal color".split(),
    "HUM": "who person named".split(),
    "LOC": "where city country".split(),
    "NUM": "many much when".split(),
}
TREC_OBJECTS = "twin cities nasa river war king moon bridge".split()

TOPICS = {
    "man": "man guitar song singing playing".split(),
    "woman": "woman cooking kitchen onion cutting".split(),
    "dog": "dog ball park running grass".split(),
    "child": "child bike street riding helmet".split(),
    "chef": "chef pizza oven baking dough".split(),
    "bird": "bird tree branch sitting nest".split(),
    "boat": "boat lake water sailing wind".split(),
    "leak": "liquid ammonia leak kills shanghai".split(),
}
TOPIC_EXTRA = "package headphones opening contains chair rubbing eyes least there no not".split()
COCO_CONCEPTS = "dog cat beach pizza bus horse kite train surfboard clock".split()


def unit_noise(scale):
    return [rng.gauss(0.0, scale) for _ in range(DIM)]


def build_vectors():
    vecs = {}

    def add(word, axes):
        if word in vecs:
            return
        v = unit_noise(0.15)
        for ax, w in axes:
            v[ax] += w
        vecs[word] = v

    for w in POS:
        add(w, [(AX_SENT, 1.0), (AX_SUBJ, 0.4)])
    for w in NEG:
        add(w, [(AX_SENT, -1.0), (AX_SUBJ, 0.4)])
    for w in SUBJ:
        add(w, [(AX_SUBJ, 1.0)])
    for w in OBJ:
        add(w, [(AX_SUBJ, -1.0)])
    for w in ["not", "no", "never", "nobody"]:
        add(w, [(AX_NEG, 1.5)])
    for k, (cls, cues) in enumerate(TREC_CUES.items()):
        for w in cues:
            add(w, [(AX_TREC[k], 1.2)])
    for w in TREC_OBJECTS + ["what", "are", "does", "do", "how", "?"]:
        add(w, [])
    for t, (name, words) in enumerate(TOPICS.items()):
        for w in words:
            add(w, [(AX_TOPIC[t], 1.0)])
    for w in TOPIC_EXTRA:
        add(w, [])
    for c, w in enumerate(COCO_CONCEPTS):
        add(w, [(AX_TOPIC[8 + c % 8], 1.0), (AX_TREC[c % 6], 0.5 * (1 if c < 6 else -1))])
    for w in FILLER + [".", ",", "A", "The", "is", "are", "at", "15", "It", "'s", "n't"]:
        add(w, [])
    for w in ["photo", "showing", "next", "near", "small", "large", "red", "old"]:
        add(w, [])
    return vecs


def write(path, lines):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def fmt(x):
    return f"{x:.4f}".rstrip("0").rstrip(".") if x != 0 else "0"


def sentiment_sentence(label, length=7):
    words = rng.sample(OBJ + FILLER, length - 2)
    cue = rng.sample(POS if label == 1 else NEG, 2)
    words[rng.randrange(len(words))] = cue[0]
    words.insert(rng.randrange(len(words) + 1), cue[1])
    if rng.random() < 0.2:
        words.append(rng.choice(OOV))
    s = " ".join(words)
    return s[0].upper() + s[1:] + " ."


def graded_sentence(label, n_classes):
    # 0 very negative ... n-1 very positive: number of cue words encodes strength
    centre = (n_classes - 1) / 2
    strength = label - centre
    words = rng.sample(OBJ + FILLER, 6)
    pool = POS if strength > 0 else NEG
    for _ in range(int(round(abs(strength) * 2))):
        words.insert(rng.randrange(len(words) + 1), rng.choice(pool))
    return " ".join(words) + " ."


def subj_sentence(label):
    pool = SUBJ if label == 1 else OBJ
    words = rng.sample(FILLER, 4) + rng.sample(pool, 3)
    rng.shuffle(words)
    return " ".join(words) + " ."


def balanced_labels(n, k):
    labels = [i % k for i in range(n)]
    rng.shuffle(labels)
    return labels


def single_task(name, n, make, k, splits=("train",), names=None):
    for split, size in zip(splits, n):
        lines = []
        for y in balanced_labels(size, k):
            label = names[y] if names else str(y)
            lines.append(f"{label}\t{make(y)}")
        write(OUT / name / f"{split}.tsv", lines)


def trec_question(y):
    cls = list(TREC_CUES)[y]
    cue = rng.choice(TREC_CUES[cls])
    obj = rng.sample(TREC_OBJECTS, 2)
    lead = {"ABBR": "What does", "DESC": "Why do", "ENTY": "Which", "HUM": "Who", "LOC": "Where are", "NUM": "How many"}[cls]
    return f"{lead} the {obj[0]} {cue} {obj[1]} ?"


def trec():
    fine = {"ABBR": "exp", "DESC": "reason", "ENTY": "animal", "HUM": "ind", "LOC": "city", "NUM": "count"}
    for split, size in [("train", 120), ("test", 60)]:
        lines = []
        if split == "train":
            lines.append("LOC:city\tWhat are the twin cities ?")
        for y in balanced_labels(size - len(lines), 6):
            cls = list(TREC_CUES)[y]
            lines.append(f"{cls}:{fine[cls]}\t{trec_question(y)}")
        write(OUT / "TREC" / f"{split}.tsv", lines)


def topic_sentence(topic, extra=0):
    words = TOPICS[topic]
    picked = rng.sample(words, 3 + extra)
    subj = picked[0]
    return f"A {subj} is " + " ".join(picked[1:]) + " " + rng.choice(["in the park", "at home", "on a chair", "near water"])


def nli_pair(y):
    topic = rng.choice(list(TOPICS)[:7])
    premise = topic_sentence(topic)
    if y == 0:  # contradiction
        hyp = "There is no " + premise[2:]
        if rng.random() < 0.5:
            hyp = premise.replace(" is ", " is not ", 1)
    elif y == 1:  # neutral
        other = rng.choice([t for t in list(TOPICS)[:7] if t != topic])
        hyp = topic_sentence(other)
    else:  # entailment
        hyp = topic_sentence(topic)
    return premise, hyp


def nli(name, sizes, use_names):
    names = ["contradiction", "neutral", "entailment"]
    for split, size in zip(["train", "dev", "test"], sizes):
        lines = []
        if name == "SICK-E" and split == "train":
            lines.append("contradiction\tA man is sitting on a chair and rubbing his eyes\tThere is no man sitting on a chair and rubbing his eyes")
        for y in balanced_labels(size - len(lines), 3):
            p, h = nli_pair(y)
            label = names[y] if use_names else str(y)
            lines.append(f"{label}\t{p}\t{h}")
        write(OUT / name / f"{split}.tsv", lines)


def scored_pair(lo, hi):
    """Pair whose topical overlap tracks the score."""
    topics = list(TOPICS)[:7]
    a = rng.choice(topics)
    score = rng.uniform(lo, hi)
    frac = (score - lo) / (hi - lo)
    s1 = topic_sentence(a, extra=1)
    if rng.random() < frac:
        s2 = topic_sentence(a, extra=rng.choice([0, 1]))
        if frac > 0.8:
            s2 = s1.replace(" is ", " is also ", 1)
    else:
        s2 = topic_sentence(rng.choice([t for t in topics if t != a]))
    # score grows with word overlap so the gold is learnable
    w1, w2 = set(s1.split()), set(s2.split())
    overlap = len(w1 & w2) / len(w1 | w2)
    gold = lo + (hi - lo) * min(1.0, overlap * 1.4)
    gold = min(hi, max(lo, round(0.7 * gold + 0.3 * score, 1)))
    return gold, s1, s2


def relatedness(name, lo, hi, sizes, first=None):
    for split, size in zip(["train", "dev", "test"], sizes):
        lines = []
        if first and split == "train":
            lines.append(first)
        while len(lines) < size:
            g, a, b = scored_pair(lo, hi)
            lines.append(f"{g}\t{a}\t{b}")
        write(OUT / name / f"{split}.tsv", lines)


def sts():
    years = {
        "STS12": ["MSRpar", "MSRvid"],
        "STS13": ["FNWN", "headlines"],
        "STS14": ["deft-news", "headlines"],
        "STS15": ["answers-forums", "images"],
        "STS16": ["plagiarism", "question-question"],
    }
    for year, subs in years.items():
        for sub in subs:
            lines = []
            if year == "STS14" and sub == "headlines":
                lines.append("4.6\tLiquid ammonia leak kills 15 in Shanghai\tLiquid ammonia leak kills at least 15 in Shanghai")
            while len(lines) < 20:
                g, a, b = scored_pair(0.0, 5.0)
                lines.append(f"{g}\t{a}\t{b}")
            write(OUT / year / "subtasks" / f"{sub}.tsv", lines)


def mrpc():
    for split, size in [("train", 120), ("test", 60)]:
        lines = []
        for y in balanced_labels(size, 2):
            topic = rng.choice(list(TOPICS)[:7])
            s1 = topic_sentence(topic, extra=1)
            if y == 1:
                s2 = s1.replace(" is ", " is also ", 1) if rng.random() < 0.5 else topic_sentence(topic, extra=1)
            else:
                s2 = topic_sentence(rng.choice([t for t in list(TOPICS)[:7] if t != topic]), extra=1)
            lines.append(f"{y}\t{s1}\t{s2}")
        write(OUT / "MRPC" / f"{split}.tsv", lines)


def coco(vecs):
    # each image shows two concepts; its feature vector activates a block of
    # 2048 dims per concept plus sparse noise
    blocks = {c: rng.sample(range(IMAGE_DIM), 12) for c in COCO_CONCEPTS}
    feature_lines = []
    image_id = 0
    for split, n_images in [("train", 20), ("dev", 5), ("test", 10)]:
        lines = []
        for _ in range(n_images):
            image_id += 1
            iid = f"img{image_id:03d}"
            concepts = rng.sample(COCO_CONCEPTS, 2)
            feat = [0.0] * IMAGE_DIM
            for c in concepts:
                for d in blocks[c]:
                    feat[d] += 1.0 + rng.uniform(-0.1, 0.1)
            for d in rng.sample(range(IMAGE_DIM), 8):
                feat[d] += rng.uniform(0.0, 0.3)
            feature_lines.append(iid + " " + " ".join(fmt(x) for x in feat))
            for _ in range(5):
                adj = rng.choice(["small", "large", "red", "old"])
                tmpl = rng.choice([
                    "A {adj} {a} next to a {b} .",
                    "A photo showing a {a} and a {b} .",
                    "The {b} is near a {adj} {a} .",
                ])
                lines.append(f"{iid}\t" + tmpl.format(adj=adj, a=concepts[0], b=concepts[1]))
        write(OUT / "COCO" / f"{split}.tsv", lines)
    write(OUT / "COCO" / "features.vec", feature_lines)


def main():
    vecs = build_vectors()
    vec_lines = [f"{len(vecs)} {DIM}"] + [w + " " + " ".join(fmt(x) for x in v) for w, v in vecs.items()]
    write(OUT / "vectors.vec", vec_lines)

    single_task("MR", [100], lambda y: sentiment_sentence(y), 2)
    single_task("CR", [80], lambda y: sentiment_sentence(y, 6), 2)
    single_task("SUBJ", [80], subj_sentence, 2, names=["obj", "subj"])
    single_task("MPQA", [80], lambda y: " ".join(rng.sample(POS if y else NEG, 1) + rng.sample(FILLER, 1)), 2)
    trec()
    single_task("SST-2", [80, 30, 30], sentiment_sentence, 2, splits=("train", "dev", "test"))
    single_task("SST-5", [100, 40, 40], lambda y: graded_sentence(y, 5), 5, splits=("train", "dev", "test"))
    nli("SNLI", [90, 30, 30], use_names=False)
    nli("SICK-E", [90, 30, 30], use_names=True)
    relatedness(
        "SICK-R", 1.0, 5.0, [90, 30, 30],
        first="1.6\tA man is singing a song and playing the guitar\tA man is opening a package that contains headphones",
    )
    relatedness("STS-B", 0.0, 5.0, [90, 30, 30])
    sts()
    mrpc()
    coco(vecs)


if __name__ == "__main__":
    main()
