"""JSON forms of values and traces, plus display helpers for reports."""

from __future__ import annotations

from fractions import Fraction

from .executor import (AppNode, AugAssume, AugObserve, BetaTail, BoundVarNode, Closure,
                       DistNode, FreeVarNode, LambdaNode, LiteralNode, Rational,
                       StuckApp, Symbol, Trace, church_bool, value_to_expr)
from .lang import Lambda, parse_expr, print_expr


def rational_str(x: Fraction) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else "%d/%d" % (x.numerator, x.denominator)


def show_value(v) -> str:
    """Short deterministic text for a value: #t/#f, rationals, or source text."""
    b = church_bool(v)
    if b is not None:
        return "#t" if b else "#f"
    if isinstance(v, Rational):
        return rational_str(v.value)
    return print_expr(value_to_expr(v))


def show_outcome(e) -> str:
    from .lang import Literal
    if isinstance(e, Literal):
        return rational_str(e.value)
    if isinstance(e, Lambda):
        b = church_bool(Closure(e.param, e.body, (), ()))
        if b is not None:
            return "#t" if b else "#f"
    return print_expr(e)


def trace_label(t: Trace) -> str:
    """Outcomes in evaluation order; a trace is determined by its program and these."""
    return "[" + " ".join(show_outcome(o) for o in t.outcomes) + "]"


# --------------------------------------------------------------------------
# Values

def value_to_json(v):
    if isinstance(v, Symbol):
        return {"symbol": v.name}
    if isinstance(v, Rational):
        return {"rational": rational_str(v.value)}
    if isinstance(v, Closure):
        return {"closure": {"param": v.param, "body": print_expr(v.body),
                            "env": [[n, value_to_json(x), i]
                                    for (n, x), (_, i) in zip(v.env, v.env_ids)]}}
    return {"stuck": [value_to_json(v.fn), value_to_json(v.arg)]}


def value_from_json(obj):
    (kind, val), = obj.items()
    if kind == "symbol":
        return Symbol(val)
    if kind == "rational":
        return Rational(Fraction(val))
    if kind == "closure":
        env = tuple((n, value_from_json(x)) for n, x, _ in val["env"])
        ids = tuple((n, i) for n, _, i in val["env"])
        return Closure(val["param"], parse_expr(val["body"]), env, ids)
    if kind == "stuck":
        return StuckApp(value_from_json(val[0]), value_from_json(val[1]))
    raise ValueError("unknown value kind %r" % kind)


# --------------------------------------------------------------------------
# Traces

def node_to_json(ae) -> dict:
    t = type(ae)
    out = {"id": ae.id, "value": value_to_json(ae.value)}
    if t is FreeVarNode:
        out.update(kind="free-var", name=ae.name)
    elif t is BoundVarNode:
        out.update(kind="bound-var", name=ae.name, binder=ae.binder_id)
    elif t is LiteralNode:
        out.update(kind="literal")
    elif t is LambdaNode:
        out.update(kind="lambda", param=ae.param, body=print_expr(ae.body))
    elif t is AppNode:
        out.update(kind="app", fn=node_to_json(ae.fn), arg=node_to_json(ae.arg),
                   tail=None if ae.tail is None else
                   {"name": ae.tail.name, "body": node_to_json(ae.tail.body)})
    elif t is DistNode:
        out.update(kind="dist", dist=ae.dist, label=ae.label, choice=ae.choice_id,
                   param=node_to_json(ae.param), result=node_to_json(ae.result))
    else:
        raise TypeError("not a trace node: %r" % (ae,))
    return out


def node_from_json(obj):
    k = obj["kind"]
    nid, v = obj["id"], value_from_json(obj["value"])
    if k == "free-var":
        return FreeVarNode(nid, v, obj["name"])
    if k == "bound-var":
        return BoundVarNode(nid, v, obj["name"], obj["binder"])
    if k == "literal":
        return LiteralNode(nid, v)
    if k == "lambda":
        return LambdaNode(nid, v, obj["param"], parse_expr(obj["body"]))
    if k == "app":
        tail = obj["tail"]
        return AppNode(nid, v, node_from_json(obj["fn"]), node_from_json(obj["arg"]),
                       None if tail is None else BetaTail(tail["name"], node_from_json(tail["body"])))
    if k == "dist":
        return DistNode(nid, v, obj["dist"], obj["label"], node_from_json(obj["param"]),
                        obj["choice"], node_from_json(obj["result"]))
    raise ValueError("unknown node kind %r" % k)


def trace_to_json(trace: Trace) -> list:
    out = []
    for s in trace.stmts:
        if isinstance(s, AugAssume):
            out.append({"assume": s.name, "expr": node_to_json(s.expr)})
        else:
            out.append({"observe": s.dist, "label": s.label, "id": s.obs_id,
                        "param": node_to_json(s.param),
                        "constrained": print_expr(s.constrained)})
    return out


def trace_from_json(obj) -> Trace:
    stmts = []
    for s in obj:
        if "assume" in s:
            stmts.append(AugAssume(s["assume"], node_from_json(s["expr"])))
        else:
            stmts.append(AugObserve(s["observe"], s["label"], node_from_json(s["param"]),
                                    s["id"], parse_expr(s["constrained"])))
    return Trace(stmts)
