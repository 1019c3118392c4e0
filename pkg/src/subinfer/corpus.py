"""Reference programs used by the tests, demos and acceptance suite."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

from .inference import AllChoices, BlackBox, ByLabels, EnumGibbs, Mix, PriorMH
from .lang import parse


@dataclass(frozen=True)
class Entry:
    name: str
    source: str
    sites: tuple        # assume names holding stochastic choices, in order
    note: str = ""

    @cached_property
    def program(self):
        return parse(self.source)


_ENTRIES = [
    Entry("fair_coin", "(assume x (flip 1/2))", ("x",), "one fair flip"),
    Entry("two_flip",
          "(assume x (flip 3/10))\n(observe (flip (if x 9/10 1/10)) #t)",
          ("x",), "a choice and a noisy observation of it"),
    Entry("product",
          "(assume x (flip 1/2))\n(assume y (flip 1/2))",
          ("x", "y"), "independent 2x2 product"),
    Entry("product_2x2",
          "(assume x (flip 1/3))\n(assume y (flip 1/2))\n"
          "(observe (flip (if x (if y 4/5 1/5) (if y 1/2 1/10))) #t)",
          ("x", "y"), "2x2 space with a correlated posterior"),
    Entry("xor",
          "(assume xor (lambda (a) (lambda (b) (if a (if b #f #t) b))))\n"
          "(assume x (flip 1/2))\n(assume y (flip 1/2))\n"
          "(observe (flip (if (xor x y) 0 1)) #t)",
          ("x", "y"), "posterior support {x=y}; single-variable moves get stuck"),
    Entry("dependent",
          "(assume x (flip 1/2))\n(assume y (if x (flip 1/3) #f))",
          ("x", "y"), "y is only sampled when x holds"),
    Entry("nested_dist",
          "(assume x (flip (if (flip 1/2) 1/4 3/4)))\n(observe (flip (if x 2/3 1/3)) #t)",
          ("x",), "a choice inside another choice's parameter"),
    Entry("opaque",
          "(assume x (flip 2/5))\n(assume pair ((cons x) 1))\n"
          "(observe (flip (if x 1/2 1/4)) #f)",
          ("x",), "application of a free constructor stays stuck"),
    Entry("lambda_beta",
          "(assume f (lambda (p) (flip p)))\n(assume x (f 1/2))\n"
          "(assume y (f (if x 9/10 1/10)))\n(observe (flip (if y 3/5 1/5)) #t)",
          ("x", "y"), "choices made inside a shared function"),
    Entry("categorical",
          "(assume c (dist categorical (1/6 1/3 1/2)))\n(assume u (dist uniform-int 3))",
          ("c", "u"), "finite distributions beyond coin flips"),
    Entry("deterministic",
          "(assume a 1/2)\n(assume id (lambda (z) z))\n(assume b (id a))",
          (), "no stochastic choices"),
    Entry("chain3",
          "(assume a (flip 1/2))\n(assume b (flip (if a 1/3 2/3)))\n"
          "(assume c (flip (if b 1/4 3/4)))\n(observe (flip (if c 4/5 1/5)) #t)",
          ("a", "b", "c"), "three-link Markov chain with evidence at the end"),
    Entry("higher_order",
          "(assume nn (lambda (b) (if (flip 1/5) (if b #f #t) b)))\n"
          "(assume twice (lambda (f) (lambda (v) (f (f v)))))\n"
          "(assume z ((twice nn) #t))\n(observe (flip (if z 3/4 1/4)) #t)",
          ("z",), "one source choice executed twice through a combinator"),
    Entry("two_observes",
          "(assume x (flip 1/2))\n(observe (flip (if x 1/2 1/5)) #f)\n"
          "(observe (flip (if x 1/3 2/3)) #t)",
          ("x",), "several observations of one choice"),
]

CORPUS = {e.name: e for e in _ENTRIES}


def get(name: str) -> Entry:
    return CORPUS[name]


def gibbs_mix(entry: Entry):
    """Two EnumGibbs clauses: the first site alone, and every site together."""
    first = ByLabels(entry.sites[:1])
    every = ByLabels(entry.sites)
    return Mix(((Fraction(1, 2), first, BlackBox(EnumGibbs())),
                (Fraction(1, 2), every, BlackBox(EnumGibbs()))))


def single_site_gibbs(entry: Entry):
    """Uniform mixture of one EnumGibbs clause per site (classic Gibbs)."""
    k = len(entry.sites)
    return Mix(tuple((Fraction(1, k), ByLabels([s]), BlackBox(EnumGibbs()))
                     for s in entry.sites))


def standard_metaprograms(entry: Entry) -> dict:
    """Named metaprograms exercised for every corpus program."""
    mps = {
        "enum-gibbs": BlackBox(EnumGibbs()),
        "prior-mh": BlackBox(PriorMH()),
        "all-choices-mh": Mix(((1, AllChoices(), BlackBox(PriorMH())),)),
    }
    if entry.sites:
        mps["first-site-mh"] = Mix(((1, ByLabels(entry.sites[:1]), BlackBox(PriorMH())),))
        mps["gibbs-mix"] = gibbs_mix(entry)
        mps["single-site-gibbs"] = single_site_gibbs(entry)
        mps["nested"] = Mix(((1, ByLabels(entry.sites),
                              Mix(((1, ByLabels(entry.sites[:1]), BlackBox(EnumGibbs())),))),))
    return mps
