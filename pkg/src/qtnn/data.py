"""Datasets: CIFAR-format binary I/O, procedural vehicle images, the
military lexicon, phrase-corpus generation, tokenisation, and splits.

CIFAR binary records are 3073 bytes: one label byte then 3072 pixel bytes
(1024 R, 1024 G, 1024 B planes, row-major 32x32). The loader/writer pair is
bit-exact on arbitrary valid inputs; label values are validated only at the
training boundary so round-tripping foreign files never alters them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import SeedStream

RECORD_BYTES = 3073
PIXELS = 3072
SIDE = 32


class DataFormatError(ValueError):
    pass


# ---------------------------------------------------------------------------
# CIFAR binary I/O
# ---------------------------------------------------------------------------

@dataclass
class LabeledImageSet:
    images: np.ndarray  # (n, 3072) uint8, planar RGB
    labels: np.ndarray  # (n,) uint8

    def __post_init__(self):
        self.images = np.ascontiguousarray(self.images, dtype=np.uint8)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.uint8)
        if self.images.ndim != 2 or self.images.shape[1] != PIXELS:
            raise ValueError(f"images must be (n, {PIXELS}) bytes")
        if self.labels.shape != (self.images.shape[0],):
            raise ValueError("images and labels must have equal length")

    def __len__(self):
        return self.images.shape[0]

    def take(self, idx) -> "LabeledImageSet":
        return LabeledImageSet(self.images[idx], self.labels[idx])


def load_cifar_binary(blob: bytes) -> LabeledImageSet:
    """One record per 3073-byte chunk, order preserved."""
    n, leftover = divmod(len(blob), RECORD_BYTES)
    if leftover:
        raise DataFormatError(
            f"truncated CIFAR file: {len(blob)} bytes leaves a partial record "
            f"at offset {n * RECORD_BYTES}")
    raw = np.frombuffer(blob, dtype=np.uint8).reshape(n, RECORD_BYTES) if n \
        else np.zeros((0, RECORD_BYTES), dtype=np.uint8)
    return LabeledImageSet(raw[:, 1:], raw[:, 0])


def write_cifar_binary(dataset: LabeledImageSet) -> bytes:
    n = len(dataset)
    out = np.empty((n, RECORD_BYTES), dtype=np.uint8)
    out[:, 0] = dataset.labels
    out[:, 1:] = dataset.images
    return out.tobytes()


def require_binary_labels(dataset: LabeledImageSet):
    """Training boundary: labels must be 0 (civilian) or 1 (military)."""
    if len(dataset) and int(dataset.labels.max(initial=0)) > 1:
        bad = int(np.argmax(dataset.labels > 1))
        raise DataFormatError(
            f"record {bad} has label {int(dataset.labels[bad])}; "
            "training needs binary labels 0/1")


# ---------------------------------------------------------------------------
# Procedural vehicle images
# ---------------------------------------------------------------------------

_CIVILIAN_HUES = [
    (200.0, 30.0, 30.0),    # red
    (30.0, 60.0, 200.0),    # blue
    (230.0, 200.0, 30.0),   # yellow
    (235.0, 235.0, 235.0),  # white
]
_MILITARY_HUES = [
    (80.0, 95.0, 60.0),     # olive
    (85.0, 90.0, 85.0),     # grey
    (70.0, 80.0, 55.0),     # dark olive
]


def _fill_rect(img, x0, x1, y0, y1, color, shade=1.0):
    x0, x1 = max(x0, 0), min(x1, SIDE)
    y0, y1 = max(y0, 0), min(y1, SIDE)
    for c in range(3):
        img[c, y0:y1, x0:x1] = color[c] * shade


def _fill_disc(img, cx, cy, r, color):
    ys, xs = np.ogrid[:SIDE, :SIDE]
    mask = (xs - cx) ** 2 + (ys - cy) ** 2 <= r * r
    for c in range(3):
        img[c][mask] = color[c]


def _civilian(img, s: SeedStream):
    hue = _CIVILIAN_HUES[s.randint_below(len(_CIVILIAN_HUES))]
    shade = 0.85 + 0.3 * s.uniform()
    ground = 24 + s.randint_below(3)
    x0 = 3 + s.randint_below(3)
    cargo_w = 14 + s.randint_below(5)
    cargo_h = 9 + s.randint_below(4)
    x1 = x0 + cargo_w
    _fill_rect(img, x0, x1, ground - cargo_h, ground, hue, shade)
    cab_w = 5 + s.randint_below(3)
    cab_h = 6 + s.randint_below(3)
    _fill_rect(img, x1, x1 + cab_w, ground - cab_h, ground, hue, shade * 0.9)
    _fill_rect(img, x1 + 1, x1 + cab_w - 1, ground - cab_h + 1,
               ground - cab_h + 3, (40.0, 45.0, 55.0))  # windshield
    wheel_r = 2 + s.randint_below(2)
    _fill_disc(img, x0 + 3, ground, wheel_r, (25.0, 25.0, 25.0))
    _fill_disc(img, x1 + 2, ground, wheel_r, (25.0, 25.0, 25.0))


def _military(img, s: SeedStream):
    hue = _MILITARY_HUES[s.randint_below(len(_MILITARY_HUES))]
    shade = 0.85 + 0.3 * s.uniform()
    ground = 24 + s.randint_below(3)
    x0 = 4 + s.randint_below(3)
    hull_w = 16 + s.randint_below(5)
    hull_h = 6 + s.randint_below(3)
    x1 = x0 + hull_w
    _fill_rect(img, x0, x1, ground - hull_h, ground, hue, shade)
    # turret block plus a barrel line
    tw = 5 + s.randint_below(3)
    tx = x0 + hull_w // 2 - tw // 2
    ty = ground - hull_h - 4
    _fill_rect(img, tx, tx + tw, ty, ground - hull_h, hue, shade * 0.92)
    by = ty + 1 + s.randint_below(2)
    bx1 = min(tx + tw + 8 + s.randint_below(3), SIDE)
    _fill_rect(img, tx + tw, bx1, by, by + 1, (50.0, 52.0, 45.0))
    # dark running gear
    _fill_rect(img, x0, x1, ground - 2, ground, (30.0, 30.0, 28.0))
    if s.uniform() < 0.30:  # muzzle flash at the barrel tip
        r = 2 + s.randint_below(2)
        flash = (250.0, 120.0 + s.randint_below(40), 20.0)
        _fill_disc(img, min(bx1, SIDE - 1), by, r, flash)


def synth_vehicle_images(count: int, stream: SeedStream) -> LabeledImageSet:
    """Alternating civilian/military images (even index = civilian).

    Each image draws from its own child stream stream.spawn(i): per-pixel
    gaussian noise (sigma 12) around the base background, then the vehicle
    recipe. Pixels are rounded and clamped to [0, 255].
    """
    count = int(count)
    if count < 0:
        raise ValueError("count must be >= 0")
    images = np.empty((count, PIXELS), dtype=np.uint8)
    labels = np.empty(count, dtype=np.uint8)
    for i in range(count):
        s = stream.spawn(i)
        label = i % 2  # 0 civilian, 1 military
        base = 200.0 if label == 0 else 90.0
        img = base + 12.0 * s.gaussians(PIXELS).reshape(3, SIDE, SIDE)
        if label == 0:
            _civilian(img, s)
        else:
            _military(img, s)
        np.clip(np.rint(img), 0.0, 255.0, out=img)
        images[i] = img.astype(np.uint8).reshape(PIXELS)
        labels[i] = label
    return LabeledImageSet(images, labels)


def images_to_features(dataset: LabeledImageSet) -> np.ndarray:
    """Float features in [0, 1] (pixel / 255)."""
    return dataset.images.astype(np.float64) / 255.0


def planar_to_interleaved(record: np.ndarray) -> np.ndarray:
    """3072 planar bytes -> 3072 interleaved RGB bytes (for PPM export)."""
    planes = record.reshape(3, SIDE * SIDE)
    return np.ascontiguousarray(planes.T).reshape(-1)


# ---------------------------------------------------------------------------
# Lexicon and phrase corpus
# ---------------------------------------------------------------------------

POSITIVE_WORDS = (
    "achieve", "advance", "authorize", "clear", "command", "confirm",
    "decisive", "definitive", "deploy", "designated", "effective", "engage",
    "established", "mission-ready", "objective-secured", "on-target",
    "success", "validated",
)
NEGATIVE_WORDS = (
    "abort", "ambiguous", "breakdown", "cancel", "compromised", "conflicted",
    "degrade", "defeat", "denied", "disrupt", "doubtful", "failure",
    "ineffective", "misfire", "obstructed", "off-course", "unconfirmed",
    "void",
)

# versioned operator-report templates; {w} is the single lexicon slot and no
# template token may itself be a lexicon word
PHRASE_TEMPLATES = (
    "mission status {w} proceed as planned",
    "target report {w} awaiting orders",
    "comms check {w} over",
    "recon update {w} holding position",
    "ground team reports {w} at waypoint two",
    "strike assessment {w} request further tasking",
    "perimeter sweep {w} sector four quiet",
    "supply route {w} convoy moving north",
    "air support {w} standing by for signal",
    "evac corridor {w} copy and acknowledge",
)


@dataclass(frozen=True)
class Lexicon:
    positive: tuple = POSITIVE_WORDS
    negative: tuple = NEGATIVE_WORDS

    def __post_init__(self):
        words = tuple(self.positive) + tuple(self.negative)
        if len(set(words)) != len(words):
            raise ValueError("lexicon words must be distinct")
        if len(self.positive) != 18 or len(self.negative) != 18:
            raise ValueError("lexicon needs 18 positive and 18 negative words")

    def polarity(self, word: str) -> int:
        if word in self.positive:
            return 1
        if word in self.negative:
            return 0
        raise KeyError(word)


@dataclass
class PhraseSet:
    phrases: list
    labels: list
    provenance: list = field(default_factory=list)  # (template id, word) or None

    def __post_init__(self):
        if len(self.phrases) != len(self.labels):
            raise ValueError("phrases and labels must have equal length")
        if not self.provenance:
            self.provenance = [None] * len(self.phrases)

    def __len__(self):
        return len(self.phrases)

    def take(self, idx) -> "PhraseSet":
        return PhraseSet([self.phrases[i] for i in idx],
                         [self.labels[i] for i in idx],
                         [self.provenance[i] for i in idx])


def gen_phrases(lexicon: Lexicon, stream: SeedStream) -> PhraseSet:
    """Every template crossed with every word (10 x 36 = 360 phrases),
    labels from word polarity, order shuffled by the stream."""
    phrases, labels, prov = [], [], []
    for t_id, template in enumerate(PHRASE_TEMPLATES):
        for word in lexicon.positive + lexicon.negative:
            phrases.append(template.replace("{w}", word))
            labels.append(lexicon.polarity(word))
            prov.append((t_id, word))
    order = stream.permutation(len(phrases))
    return PhraseSet([phrases[i] for i in order], [labels[i] for i in order],
                     [prov[i] for i in order])


def tokenize(text: str) -> list[str]:
    """Lower-case, whitespace split, strip punctuation except internal
    hyphens ("mission-ready" stays one token)."""
    tokens = []
    for raw in text.lower().split():
        kept = "".join(ch for ch in raw if ch.isalnum() or ch == "-")
        kept = kept.strip("-")
        if kept:
            tokens.append(kept)
    return tokens


@dataclass(frozen=True)
class Vocabulary:
    index: dict  # token -> id, ids dense from 1; 0 is out-of-vocabulary

    OOV = 0

    def __len__(self):
        return len(self.index) + 1

    def encode(self, text: str) -> np.ndarray:
        return np.array([self.index.get(t, self.OOV) for t in tokenize(text)],
                        dtype=np.int64)


def build_vocab(phrases: PhraseSet) -> Vocabulary:
    tokens = set()
    for phrase in phrases.phrases:
        tokens.update(tokenize(phrase))
    return Vocabulary({tok: i for i, tok in enumerate(sorted(tokens), start=1)})


# ---------------------------------------------------------------------------
# Stratified split
# ---------------------------------------------------------------------------

def split_indices(labels, fraction: float, stream: SeedStream):
    """Seeded shuffle then stratified prefix split.

    Per-class train quotas are round(fraction * class count), so class counts
    stay within 1 of exact proportionality; the shuffled order decides which
    items fill each quota.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must be in (0, 1)")
    labels = np.asarray(labels)
    n = labels.shape[0]
    order = stream.permutation(n)
    classes, counts = np.unique(labels, return_counts=True)
    quota = {int(c): int(np.floor(fraction * k + 0.5)) for c, k in zip(classes, counts)}
    train, test = [], []
    for i in order:
        c = int(labels[i])
        if quota[c] > 0:
            quota[c] -= 1
            train.append(int(i))
        else:
            test.append(int(i))
    if not train or not test:
        raise ValueError(f"degenerate split: {len(train)} train / {len(test)} test")
    return np.array(train, dtype=np.int64), np.array(test, dtype=np.int64)


# ---------------------------------------------------------------------------
# Corpus and lexicon files
# ---------------------------------------------------------------------------

def write_phrase_corpus(path, phrases: PhraseSet):
    """UTF-8 lines `<label 0|1>\\t<phrase>`."""
    with open(path, "w", encoding="utf-8") as fh:
        for label, phrase in zip(phrases.labels, phrases.phrases):
            fh.write(f"{int(label)}\t{phrase}\n")


def load_phrase_corpus(path) -> PhraseSet:
    phrases, labels = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise DataFormatError(f"{path}:{lineno}: expected <label>\\t<phrase>")
            label, phrase = line.split("\t", 1)
            if label not in ("0", "1"):
                raise DataFormatError(f"{path}:{lineno}: label must be 0 or 1")
            phrases.append(phrase)
            labels.append(int(label))
    return PhraseSet(phrases, labels)


def load_lexicon(path) -> Lexicon:
    """Sections `[positive]` / `[negative]`, one lower-case word per line."""
    sections = {"positive": [], "negative": []}
    current = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            word = line.strip()
            if not word or word.startswith("#"):
                continue
            if word.startswith("[") and word.endswith("]"):
                name = word[1:-1].lower()
                if name not in sections:
                    raise DataFormatError(f"{path}:{lineno}: unknown section {name!r}")
                current = name
                continue
            if current is None:
                raise DataFormatError(f"{path}:{lineno}: word before any section")
            sections[current].append(word.lower())
    return Lexicon(tuple(sections["positive"]), tuple(sections["negative"]))
