"""Finite-support distributions with exact rational densities.

A distribution maps a parameter value to an ordered list of
``(outcome expression, probability)`` pairs.  Only outcomes with positive
probability are listed; every other expression has density zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from .lang import Expr, Literal, alpha_key, church_false, church_true

__all__ = [
    "Distribution", "DistributionError", "Registry", "builtin_distributions",
    "bernoulli", "uniform_int", "categorical", "fixed_categorical",
]


class DistributionError(ValueError):
    """Parameter outside a distribution's domain."""


@dataclass(frozen=True)
class Distribution:
    name: str
    # param value -> [(outcome expr, prob)], positive probs summing to 1
    _outcomes: Callable

    def outcomes(self, param) -> list[tuple[Expr, Fraction]]:
        return self._outcomes(param)

    def support(self, param) -> list[Expr]:
        return [e for e, _ in self.outcomes(param)]

    def pdf(self, param, outcome: Expr) -> Fraction:
        key = alpha_key(outcome)
        for e, w in self.outcomes(param):
            if alpha_key(e) == key:
                return w
        return Fraction(0)


class Registry(dict):
    """Name -> :class:`Distribution` map used by the parser and executor."""

    def register(self, dist: Distribution) -> Distribution:
        self[dist.name] = dist
        return dist


def _rational(param, name: str) -> Fraction:
    from .executor import Rational
    if not isinstance(param, Rational):
        raise DistributionError("%s expects a rational parameter, got %s" % (name, param))
    return param.value


_TRUE, _FALSE = church_true(), church_false()


def _bernoulli_outcomes(param):
    p = _rational(param, "bernoulli")
    if not 0 <= p <= 1:
        raise DistributionError("bernoulli probability %s outside [0, 1]" % p)
    return [(e, w) for e, w in ((_TRUE, p), (_FALSE, 1 - p)) if w > 0]


def _uniform_int_outcomes(param):
    n = _rational(param, "uniform-int")
    if n.denominator != 1 or n < 1:
        raise DistributionError("uniform-int needs a positive integer, got %s" % n)
    w = Fraction(1, int(n))
    return [(Literal(Fraction(k)), w) for k in range(int(n))]


def _weight_vector(param) -> list[Fraction]:
    from .executor import Rational, StuckApp
    weights = []
    while isinstance(param, StuckApp):
        weights.append(_rational(param.arg, "categorical"))
        param = param.fn
    weights.append(_rational(param, "categorical"))
    return weights[::-1]


def _categorical_outcomes(param):
    weights = _weight_vector(param)
    if any(w < 0 for w in weights) or sum(weights) != 1:
        raise DistributionError("categorical weights %s must be nonnegative and sum to 1"
                                % [str(w) for w in weights])
    return [(Literal(Fraction(k)), w) for k, w in enumerate(weights) if w > 0]


bernoulli = Distribution("bernoulli", _bernoulli_outcomes)
uniform_int = Distribution("uniform-int", _uniform_int_outcomes)
# Weights are given as a literal vector, e.g. (dist categorical (1/6 1/3 1/2)),
# which evaluates to a stuck application of rationals; outcomes are 0..k-1.
categorical = Distribution("categorical", _categorical_outcomes)


def fixed_categorical(name: str, table) -> Distribution:
    """Distribution over an explicit ``[(outcome expr, weight)]`` list.

    The parameter is ignored, so call sites can pass any value.
    """
    table = [(e, Fraction(w)) for e, w in table]
    if not table or any(w < 0 for _, w in table) or sum(w for _, w in table) != 1:
        raise DistributionError("weights of %r must be nonnegative and sum to 1" % name)
    keys = [alpha_key(e) for e, _ in table]
    if len(set(keys)) != len(keys):
        raise DistributionError("duplicate outcomes in %r" % name)
    positive = [(e, w) for e, w in table if w > 0]
    return Distribution(name, lambda param: positive)


def builtin_distributions() -> Registry:
    reg = Registry()
    for d in (bernoulli, uniform_int, categorical):
        reg.register(d)
    return reg
