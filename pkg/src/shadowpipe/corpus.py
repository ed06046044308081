"""Seeded synthetic corpus: users, weakly-labelable train posts, and an
expert-labeled test set.

Posts are assembled from template families so the planted structure is exact
by construction rather than statistical:

* most train posts are labeled correctly by the default expert rules;
* a configured fraction is written so those rules assign the wrong label
  (rule-dodging phrasings, overzealous override phrasings, benign-habit
  posts that trip a positive rule, and typo'd trigger phrases);
* a configured fraction of train posts carries typos inside trigger phrases,
  a subset of which flips the weak label (counted among the mislabels);
* a configured fraction of test posts is rendered in a reversible
  pseudo-foreign language via a seeded word-to-token dictionary.

The generator self-checks every planted property and raises CorpusError if
the template pools ever drift out of agreement with the rules.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import asdict, dataclass
from pathlib import Path

from .relation import Relation, read_csv, source_row_id, write_csv
from .textsim import SpellChecker, rule_label, translate_text

DEFAULT_POSITIVE_PATTERNS = ["(0|no|zero) (motivation)", "lost (interest|motivation)"]
DEFAULT_NEGATIVE_OVERRIDE_PATTERNS = ["recover from (0|no|zero) interest"]

FOREIGN_LANGUAGE = "xx"
_FOREIGN_ALPHABET = "qxzjv"

USERS_COLUMNS = ["user_id", "country"]
TRAIN_COLUMNS = ["post_id", "user_id", "post_text", "language", "true_label"]
TEST_COLUMNS = ["post_id", "user_id", "post_text", "language", "length_bucket", "signs_of_anhedonia"]


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class CorpusConfig:
    n_train_posts: int = 1000
    n_test_posts: int = 200
    n_users: int = 150
    countries: tuple[tuple[str, float], ...] = (("US", 0.45), ("CAN", 0.30), ("UK", 0.15), ("DE", 0.10))
    non_english_fraction: float = 0.15
    train_non_english_fraction: float = 0.02
    planted_mislabel_fraction: float = 0.08
    typo_prone_fraction: float = 0.10
    seed: int = 42

    def __post_init__(self) -> None:
        if self.n_train_posts <= 0 or self.n_users <= 0:
            raise CorpusError("n_train_posts and n_users must be positive")
        if self.n_test_posts < 0:
            raise CorpusError("n_test_posts must be >= 0")
        for name in ("non_english_fraction", "train_non_english_fraction",
                     "planted_mislabel_fraction", "typo_prone_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise CorpusError(f"{name} must be in [0, 1]")
        if not self.countries or any(w <= 0 for _, w in self.countries):
            raise CorpusError("countries must carry positive sampling weights")

    def to_doc(self) -> dict:
        doc = asdict(self)
        doc["countries"] = [[name, weight] for name, weight in self.countries]
        return doc

    @staticmethod
    def from_doc(doc: dict) -> "CorpusConfig":
        doc = dict(doc)
        if "countries" in doc:
            doc["countries"] = tuple((str(n), float(w)) for n, w in doc["countries"])
        return CorpusConfig(**doc)


@dataclass(frozen=True)
class CorpusBundle:
    users: Relation
    train_posts: Relation
    test_posts: Relation
    word_map: dict[str, str]  # english word -> pseudo-foreign token
    config: CorpusConfig

    @property
    def vocabulary(self) -> frozenset[str]:
        return frozenset(self.word_map)

    @property
    def reverse_map(self) -> dict[str, str]:
        return {tok: word for word, tok in self.word_map.items()}


# --------------------------------------------------------------------------
# Template pools
# --------------------------------------------------------------------------

CLEAN_TOPICS = [
    {"things": ["the tomato seedlings", "my herb garden", "the flower beds", "the compost pile"],
     "acts": ["repotting the seedlings", "weeding the beds", "watering the garden", "pruning the roses"]},
    {"things": ["my acoustic guitar", "the new chord chart", "the song i was learning", "my practice routine"],
     "acts": ["practicing chords", "learning that new song", "tuning the guitar", "recording a rough take"]},
    {"things": ["my morning runs", "the local trail", "my training plan", "the weekend race"],
     "acts": ["running the river loop", "doing hill repeats", "stretching after the run", "logging my miles"]},
    {"things": ["the sourdough starter", "a fresh loaf", "the pastry recipe", "my baking experiments"],
     "acts": ["kneading the dough", "baking a fresh loaf", "trying a pastry recipe", "feeding the starter"]},
    {"things": ["the watercolor set", "my latest canvas", "the half finished portrait", "my sketchbook"],
     "acts": ["mixing new colors", "painting the harbor scene", "sketching at the park", "framing a finished piece"]},
    {"things": ["my camera bag", "the photo series", "the darkroom prints", "the editing backlog"],
     "acts": ["shooting at golden hour", "editing the photo series", "printing in the darkroom", "scouting new locations"]},
    {"things": ["the ridge trail", "my hiking boots", "the summit route", "the trail map"],
     "acts": ["hiking the ridge trail", "planning the summit route", "packing for the hike", "breaking in new boots"]},
    {"things": ["my chess openings", "the endgame studies", "the club tournament", "my puzzle streak"],
     "acts": ["drilling chess puzzles", "studying endgames", "playing at the club", "reviewing my games"]},
    {"things": ["my swim laps", "the early pool session", "my freestyle form", "the swim workout"],
     "acts": ["swimming laps", "working on my freestyle", "doing the early pool session", "timing my intervals"]},
    {"things": ["my reading list", "the new novel", "the book club pick", "the library stack"],
     "acts": ["reading the new novel", "finishing the book club pick", "browsing the library", "annotating chapters"]},
    {"things": ["my road bike", "the gravel route", "the cycling club ride", "the bike repairs"],
     "acts": ["riding the gravel route", "fixing the rear derailleur", "joining the club ride", "cleaning the chain"]},
    {"things": ["the pottery wheel", "my glazing tests", "the ceramics class", "the kiln schedule"],
     "acts": ["throwing bowls on the wheel", "testing new glazes", "attending ceramics class", "loading the kiln"]},
    {"things": ["my binoculars", "the wetland checklist", "the warbler migration", "the feeder setup"],
     "acts": ["watching the feeders", "walking the wetland loop", "logging new sightings", "photographing warblers"]},
    {"things": ["my lifting program", "the squat progression", "the gym schedule", "my workout log"],
     "acts": ["hitting the gym", "working the squat progression", "tracking my lifts", "doing the accessory work"]},
    {"things": ["my side project", "the little game engine", "the open source patch", "the refactor branch"],
     "acts": ["hacking on my side project", "polishing the game engine", "reviewing the patch", "cleaning up the refactor"]},
    {"things": ["the strategy board game", "our game night", "the new expansion", "the campaign box"],
     "acts": ["hosting game night", "learning the new expansion", "painting the miniatures", "teaching the rules"]},
    {"things": ["my fly rod", "the trout stream", "the tackle box", "the fishing trip"],
     "acts": ["tying new flies", "wading the trout stream", "organizing the tackle box", "planning the fishing trip"]},
    {"things": ["my yoga mat", "the morning flow", "the balance poses", "the studio class"],
     "acts": ["doing the morning flow", "holding the balance poses", "going to the studio class", "stretching before bed"]},
    {"things": ["the wool sweater", "my knitting needles", "the cable pattern", "the yarn stash"],
     "acts": ["knitting the sweater sleeves", "learning the cable pattern", "sorting the yarn stash", "blocking the finished scarf"]},
    {"things": ["the curry recipe", "my spice shelf", "the sunday dinner", "the soup pot"],
     "acts": ["cooking sunday dinner", "testing the curry recipe", "restocking the spice shelf", "simmering the soup"]},
]

# Clean posts are built from a shared everyday scaffold plus a class
# segment: trigger segments mark anhedonia posts, pleasant endings mark the
# rest. Test positives pair a negative-style scaffold with a trigger
# segment, so losing trigger words to typos genuinely tips their nearest
# neighbors toward the wrong class.
_NEG_SCAFFOLDS = [
    "my {daypart} {act}",
    "busy {daypart} {act}",
    "calm {daypart} {act}",
    "one {daypart} {act}",
]
# pos and neg segments share scaffold and tail pools; the class signal is
# the two-word trigger (or calm pair). Tail variety keeps nearest-neighbor
# margins moderate, so heavy typo damage can genuinely tip a post toward
# the other class's neighborhood.
_POS_TRIGGER_PAIRS = ["zero motivation", "no motivation", "0 motivation"]
_NEG_CALM_PAIRS = ["easy comfort", "warm pride", "quiet joy", "real delight"]
_SEGMENT_TAILS = ["again today", "this evening", "once more", "all over again"]
_POS_HOOKS = [
    "tried {act}",
    "sat down for {act}",
    "halfway into {act}",
    "meant to keep {act}",
]
_DAYPARTS = ["morning", "afternoon", "evening", "weekend"]


def _pos_segment(rng: random.Random) -> str:
    return f"and {rng.choice(_POS_TRIGGER_PAIRS)} {rng.choice(_SEGMENT_TAILS)}"


def _neg_ending(rng: random.Random) -> str:
    return f"and {rng.choice(_NEG_CALM_PAIRS)} {rng.choice(_SEGMENT_TAILS)}"

# trigger-phrase typos; never part of the vocabulary
_TYPO_MOTIVATION = ["motivatoin", "motivaton", "motivtion"]

_BENIGN_TYPO_TEMPLATES = [
    "lost interest in {thing} and zero {typo} for anything else",
    "lost motivation for {act} and honestly zero {typo} left",
]

_ENERGY_CONTEXTS = ["getting out of bed", "answering messages", "making breakfast",
                    "doing the laundry", "leaving the house", "seeing my friends"]
_M_MISSING_TEMPLATES = [
    "i have no energy for {ectx} anymore",
    "woke up with no energy again and skipped {ectx}",
    "absolutely no energy left after {ectx} these days",
]
_T_MISSING_TEMPLATES = [
    "no energy for {ectx} again this week",
    "running on no energy and even {ectx} feels impossible",
]

_OVERRIDE_CONTEXTS = ["my hobbies", "most things", "everything i used to enjoy", "my old routine"]
_M_OVERRIDE_TEMPLATES = [
    "i lost interest in {octx} and i doubt i will recover from zero interest soon",
    "lost interest in {octx} again and trying to recover from zero interest is exhausting",
]
_T_OVERRIDE_TEMPLATES = [
    "still hoping to recover from zero interest in {octx}",
    "been trying to recover from zero interest in {octx} for months",
]

_HABITS = ["doomscrolling", "junk food", "late night gaming", "online arguments", "gossip threads"]
_M_FP_TEMPLATES = [
    "finally lost interest in {habit} and i feel so much better",
    "happily lost interest in {habit} this month and life feels lighter",
]
_T_FP_TEMPLATES = [
    "so glad i lost interest in {habit} and my evenings feel lighter",
    "lost interest in {habit} a while ago and honestly it feels great",
]

_CHORE_CONTEXTS = ["the weekly chores", "cleaning the apartment", "the grocery run", "sorting the mail"]
_M_TYPO_TEMPLATES = [
    "zero {typo} for {chctx} again",
    "woke up with zero {typo} and ignored {chctx} completely",
]
_T_TYPO_TEMPLATES = [
    "zero motivation for {chctx} again this week",
    "no motivation for {chctx} and it keeps piling up",
]

# fraction of the test set drawn from each planted-defect family
_TEST_FAMILY_FRACTIONS = {"missing": 0.04, "override": 0.03, "fp": 0.045, "typo": 0.035}


def _pool_phrases() -> list[str]:
    phrases: list[str] = []
    for topic in CLEAN_TOPICS:
        phrases.extend(topic["things"])
        phrases.extend(topic["acts"])
    phrases.extend(_DAYPARTS)
    phrases.extend(_POS_TRIGGER_PAIRS + _NEG_CALM_PAIRS + _SEGMENT_TAILS)
    phrases.append("and")
    phrases.extend(_ENERGY_CONTEXTS + _OVERRIDE_CONTEXTS + _HABITS + _CHORE_CONTEXTS)
    for tpl in (_NEG_SCAFFOLDS + _POS_HOOKS
                + _BENIGN_TYPO_TEMPLATES + _M_MISSING_TEMPLATES
                + _T_MISSING_TEMPLATES + _M_OVERRIDE_TEMPLATES + _T_OVERRIDE_TEMPLATES
                + _M_FP_TEMPLATES + _T_FP_TEMPLATES + _M_TYPO_TEMPLATES + _T_TYPO_TEMPLATES):
        phrases.append(" ".join(w for w in tpl.split() if not w.startswith("{")))
    return phrases


def template_vocabulary() -> frozenset[str]:
    """Every legitimate word any template can emit; typo variants excluded."""
    words: set[str] = set()
    for phrase in _pool_phrases():
        words.update(phrase.split())
    return frozenset(words)


def _build_word_map(vocabulary: frozenset[str], seed: int) -> dict[str, str]:
    """Seeded bijective word -> token dictionary. Tokens use a disjoint
    alphabet and are kept out of spell-check range of every vocabulary word
    so the simulators treat them as opaque foreign text."""
    rng = random.Random(seed)
    checker = SpellChecker(vocabulary)
    used: set[str] = set()
    word_map: dict[str, str] = {}
    for word in sorted(vocabulary):
        for _ in range(1000):
            token = "".join(rng.choice(_FOREIGN_ALPHABET) for _ in range(rng.randint(4, 7)))
            if token in used or token in vocabulary:
                continue
            if checker.correct_token(token) != token:
                continue
            used.add(token)
            word_map[word] = token
            break
        else:  # pragma: no cover - alphabet provides ample headroom
            raise CorpusError(f"could not draw a pseudo-foreign token for {word!r}")
    return word_map


def _fill(template: str, rng: random.Random, **pools) -> str:
    out = template
    for name, pool in pools.items():
        marker = "{" + name + "}"
        while marker in out:
            out = out.replace(marker, rng.choice(pool), 1)
    return out


def _clean_post(rng: random.Random, topic_index: int, positive: bool) -> str:
    """Train-side clean post: triggers ride on a short hook, pleasant posts
    ride on the everyday scaffold."""
    topic = CLEAN_TOPICS[topic_index % len(CLEAN_TOPICS)]
    if positive:
        hook = _fill(rng.choice(_POS_HOOKS), rng, act=topic["acts"])
        return f"{hook} {_pos_segment(rng)}"
    scaffold = _fill(rng.choice(_NEG_SCAFFOLDS), rng, act=topic["acts"], daypart=_DAYPARTS)
    return f"{scaffold} {_neg_ending(rng)}"


def _clean_test_post(rng: random.Random, topic_index: int, positive: bool) -> str:
    """Test-side clean post: positives mix the everyday scaffold with a
    trigger segment, which is what makes them typo-fragile."""
    topic = CLEAN_TOPICS[topic_index % len(CLEAN_TOPICS)]
    scaffold = _fill(rng.choice(_NEG_SCAFFOLDS), rng, act=topic["acts"], daypart=_DAYPARTS)
    if positive:
        return f"{scaffold} {_pos_segment(rng)}"
    return f"{scaffold} {_neg_ending(rng)}"


def _default_rule(text: str) -> int:
    return rule_label(text, DEFAULT_POSITIVE_PATTERNS, DEFAULT_NEGATIVE_OVERRIDE_PATTERNS)


def _check(text: str, true_label: int, expect_mislabel: bool) -> None:
    got = _default_rule(text)
    if expect_mislabel and got == true_label:
        raise CorpusError(f"template drift: expected the default rules to mislabel {text!r}")
    if not expect_mislabel and got != true_label:
        raise CorpusError(f"template drift: default rules mislabel {text!r}")


def _train_counts(config: CorpusConfig) -> dict[str, int]:
    n = config.n_train_posts
    n_mis = round(config.planted_mislabel_fraction * n)
    n_typo = round(config.typo_prone_fraction * n)
    m_typo = min(n_typo, n_mis // 3)
    rest = n_mis - m_typo
    m_missing = rest - 2 * (rest // 3)
    m_override = rest // 3
    m_fp = rest // 3
    benign = n_typo - m_typo
    foreign = round(config.train_non_english_fraction * n)
    clean = n - n_mis - benign - foreign
    if clean < 0:
        raise CorpusError(
            "infeasible config: planted mislabel, typo and language fractions exceed the corpus size"
        )
    return {"clean": clean, "benign": benign, "foreign": foreign, "missing": m_missing,
            "override": m_override, "fp": m_fp, "typo": m_typo}


def generate_corpus(config: CorpusConfig | None = None) -> CorpusBundle:
    """Pure function of the config; identical configs yield identical bundles."""
    config = config or CorpusConfig()
    master = random.Random(config.seed)
    seed_users = master.randrange(2**62)
    seed_train = master.randrange(2**62)
    seed_test = master.randrange(2**62)
    seed_lang = master.randrange(2**62)

    vocabulary = template_vocabulary()
    word_map = _build_word_map(vocabulary, seed_lang)

    # users
    rng_u = random.Random(seed_users)
    names = [c for c, _ in config.countries]
    weights = [w for _, w in config.countries]
    user_ids = [f"u{i:04d}" for i in range(config.n_users)]
    user_countries = rng_u.choices(names, weights=weights, k=config.n_users)
    users = Relation(
        {"user_id": list(user_ids), "country": user_countries},
        [source_row_id("users", i) for i in range(config.n_users)],
    )

    # train posts
    rng_t = random.Random(seed_train)
    counts = _train_counts(config)
    rows: list[tuple[str, int, bool, str]] = []  # text, true_label, expect_mislabel, language
    for i in range(counts["clean"]):
        positive = i % 2 == 0
        rows.append((_clean_post(rng_t, i, positive), int(positive), False, "en"))
    for i in range(counts["foreign"]):
        # posts the expert rules cannot read: rendered in the pseudo-foreign
        # language, negative ground truth so the rule label stays correct
        text = _clean_post(rng_t, i, positive=False)
        rendered = " ".join(word_map[w] for w in text.split())
        rows.append((rendered, 0, False, FOREIGN_LANGUAGE))
    for _ in range(counts["benign"]):
        text = _fill(rng_t.choice(_BENIGN_TYPO_TEMPLATES), rng_t,
                     thing=rng_t.choice(CLEAN_TOPICS)["things"],
                     act=rng_t.choice(CLEAN_TOPICS)["acts"],
                     typo=_TYPO_MOTIVATION)
        rows.append((text, 1, False, "en"))
    for _ in range(counts["missing"]):
        rows.append((_fill(rng_t.choice(_M_MISSING_TEMPLATES), rng_t, ectx=_ENERGY_CONTEXTS), 1, True, "en"))
    for _ in range(counts["override"]):
        rows.append((_fill(rng_t.choice(_M_OVERRIDE_TEMPLATES), rng_t, octx=_OVERRIDE_CONTEXTS), 1, True, "en"))
    for _ in range(counts["fp"]):
        rows.append((_fill(rng_t.choice(_M_FP_TEMPLATES), rng_t, habit=_HABITS), 0, True, "en"))
    for _ in range(counts["typo"]):
        rows.append((_fill(rng_t.choice(_M_TYPO_TEMPLATES), rng_t,
                           typo=_TYPO_MOTIVATION, chctx=_CHORE_CONTEXTS), 1, True, "en"))
    for text, label, mislabel, _lang in rows:
        _check(text, label, mislabel)
    rng_t.shuffle(rows)
    train_posts = Relation(
        {
            "post_id": [f"p{i:05d}" for i in range(len(rows))],
            "user_id": [rng_t.choice(user_ids) for _ in rows],
            "post_text": [r[0] for r in rows],
            "language": [r[3] for r in rows],
            "true_label": [r[1] for r in rows],
        },
        [source_row_id("train_posts", i) for i in range(len(rows))],
    )

    # test posts
    rng_e = random.Random(seed_test)
    n_test = config.n_test_posts
    fam_counts = {fam: round(frac * n_test) for fam, frac in _TEST_FAMILY_FRACTIONS.items()}
    n_clean = n_test - sum(fam_counts.values())
    n_foreign = round(config.non_english_fraction * n_test)
    if n_clean < 0 or n_foreign > n_clean:
        raise CorpusError("infeasible config: not enough clean test rows for the requested fractions")
    test_rows: list[tuple[str, int, bool]] = []  # text, truth, eligible-for-foreign
    for i in range(n_clean):
        positive = i % 2 == 0
        test_rows.append((_clean_test_post(rng_e, i, positive), int(positive), True))
    for _ in range(fam_counts["missing"]):
        test_rows.append((_fill(rng_e.choice(_T_MISSING_TEMPLATES), rng_e, ectx=_ENERGY_CONTEXTS), 1, False))
    for _ in range(fam_counts["override"]):
        test_rows.append((_fill(rng_e.choice(_T_OVERRIDE_TEMPLATES), rng_e, octx=_OVERRIDE_CONTEXTS), 1, False))
    for _ in range(fam_counts["fp"]):
        test_rows.append((_fill(rng_e.choice(_T_FP_TEMPLATES), rng_e, habit=_HABITS), 0, False))
    for _ in range(fam_counts["typo"]):
        test_rows.append((_fill(rng_e.choice(_T_TYPO_TEMPLATES), rng_e, chctx=_CHORE_CONTEXTS), 1, False))
    for text, truth, eligible in test_rows:
        if eligible:
            _check(text, truth, expect_mislabel=False)
    rng_e.shuffle(test_rows)

    # foreign test rows come from rule-consistent positive templates: the
    # translation oracle stays exact and the planted language slice carries
    # a saturated error signal against the foreign train posts
    eligible_idx = [i for i, r in enumerate(test_rows)
                    if r[2] and r[1] == 1 and _default_rule(r[0]) == r[1]]
    if n_foreign > len(eligible_idx):
        raise CorpusError("infeasible config: not enough positive clean test rows to render foreign")
    foreign_idx = set(rng_e.sample(eligible_idx, n_foreign)) if n_foreign else set()
    texts, languages = [], []
    for i, (text, _, _) in enumerate(test_rows):
        if i in foreign_idx:
            rendered = " ".join(word_map[w] for w in text.split())
            if translate_text(rendered, {t: w for w, t in word_map.items()}) != text:
                raise CorpusError("pseudo-foreign rendering is not reversible")
            texts.append(rendered)
            languages.append(FOREIGN_LANGUAGE)
        else:
            texts.append(text)
            languages.append("en")

    lengths = sorted(len(t.split()) for t in texts)
    def bucket(wc: int) -> str:
        if not lengths:
            return "short"
        t1 = lengths[max(0, math.ceil(len(lengths) / 3) - 1)]
        t2 = lengths[max(0, math.ceil(2 * len(lengths) / 3) - 1)]
        return "short" if wc <= t1 else ("medium" if wc <= t2 else "long")

    test_posts = Relation(
        {
            "post_id": [f"q{i:05d}" for i in range(n_test)],
            "user_id": [rng_e.choice(user_ids) for _ in range(n_test)],
            "post_text": texts,
            "language": languages,
            "length_bucket": [bucket(len(t.split())) for t in texts],
            "signs_of_anhedonia": [r[1] for r in test_rows],
        },
        [source_row_id("test_posts", i) for i in range(n_test)],
    )

    return CorpusBundle(users, train_posts, test_posts, word_map, config)


def export_corpus(bundle: CorpusBundle, out_dir: str | Path) -> list[Path]:
    """Write users.csv, train_posts.csv, test_posts.csv plus corpus_meta.json
    (config and translation dictionary, so the simulators can be rebuilt when
    the directory is loaded back)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(bundle.users, out / "users.csv", USERS_COLUMNS)
    write_csv(bundle.train_posts, out / "train_posts.csv", TRAIN_COLUMNS)
    write_csv(bundle.test_posts, out / "test_posts.csv", TEST_COLUMNS)
    meta = {"config": bundle.config.to_doc(), "word_map": bundle.word_map}
    meta_path = out / "corpus_meta.json"
    with open(meta_path, "w", encoding="utf-8") as f:
        json.dump(meta, f, sort_keys=True, indent=1)
        f.write("\n")
    return [out / "users.csv", out / "train_posts.csv", out / "test_posts.csv", meta_path]


def load_corpus(data_dir: str | Path) -> CorpusBundle:
    d = Path(data_dir)
    try:
        with open(d / "corpus_meta.json", encoding="utf-8") as f:
            meta = json.load(f)
    except FileNotFoundError as e:
        raise CorpusError(f"{d}: missing corpus_meta.json (not an exported corpus directory)") from e
    return CorpusBundle(
        users=read_csv(d / "users.csv", "users"),
        train_posts=read_csv(d / "train_posts.csv", "train_posts"),
        test_posts=read_csv(d / "test_posts.csv", "test_posts"),
        word_map=dict(meta["word_map"]),
        config=CorpusConfig.from_doc(meta["config"]),
    )


def source_schemas(bundle: CorpusBundle) -> dict[str, dict[str, str]]:
    """Column->type maps per csv path, for plan schema validation."""
    def schema(rel: Relation) -> dict[str, str]:
        out = {}
        for name, values in rel.columns.items():
            if values and isinstance(values[0], int):
                out[name] = "int"
            elif values and isinstance(values[0], float):
                out[name] = "float"
            else:
                out[name] = "str"
        return out

    return {
        "users.csv": schema(bundle.users),
        "train_posts.csv": schema(bundle.train_posts),
        "test_posts.csv": schema(bundle.test_posts),
    }
