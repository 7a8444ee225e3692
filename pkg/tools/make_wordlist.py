"""Regenerate the bundled benign domain list.

Builds popular-site-looking registered domains from high-frequency English and
Portuguese words. Needs the ``wordfreq`` package, which is a build-time tool
only and not a runtime dependency of botsieve.

    python tools/make_wordlist.py src/botsieve/data/benign_domains.txt
"""

import random
import re
import sys
import unicodedata

import wordfreq

TARGET = 10_000
SEED = 2022

TLDS = [
    ("com", 60), ("net", 8), ("org", 8), ("io", 3), ("pt", 6), ("com.br", 4),
    ("co.uk", 3), ("de", 2), ("es", 2), ("fr", 1), ("tv", 1), ("info", 1), ("app", 1),
]


def ascii_word(w):
    w = unicodedata.normalize("NFKD", w).encode("ascii", "ignore").decode()
    return w if re.fullmatch(r"[a-z]{3,11}", w) else None


def main(out):
    rng = random.Random(SEED)
    words = []
    seen = set()
    for lang, n in (("en", 6000), ("pt", 2500)):
        for w in wordfreq.top_n_list(lang, n):
            a = ascii_word(w)
            if a and a not in seen:
                seen.add(a)
                words.append(a)
    tlds = [t for t, _ in TLDS]
    weights = [w for _, w in TLDS]

    domains = set()
    while len(domains) < TARGET:
        r = rng.random()
        a = rng.choice(words)
        if r < 0.45:
            label = a
        elif r < 0.85:
            label = a + rng.choice(words)
        elif r < 0.93:
            label = a + "-" + rng.choice(words)
        else:
            label = a + str(rng.randint(1, 365))
        if len(label) > 24:
            continue
        domains.add(label + "." + rng.choices(tlds, weights)[0])

    with open(out, "w") as fh:
        for d in sorted(domains):
            fh.write(d + "\n")


if __name__ == "__main__":
    main(sys.argv[1])
