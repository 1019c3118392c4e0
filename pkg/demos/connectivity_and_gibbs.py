"""Why single-variable Gibbs fails on XOR evidence, and what fixes it.

With the evidence that x and y agree, moving x alone or y alone can never
leave {x=y=#t} or {x=y=#f}.  Adding a clause that moves both reconnects
the two modes.

    python3 demos/connectivity_and_gibbs.py
"""

from fractions import Fraction

from subinfer.analysis import (build_kernel_matrix, check_aperiodic, check_connectivity,
                               check_irreducible, check_stationary, enumerate_traces, posterior)
from subinfer.corpus import get
from subinfer.inference import BlackBox, ByLabels, EnumGibbs, Mix
from subinfer.serialize import rational_str, trace_label

entry = get("xor")
space = enumerate_traces(entry.program)
post = posterior(space)
gibbs = BlackBox(EnumGibbs())
labels = [trace_label(t) for t in space.traces]


def report(title, groups):
    w = Fraction(1, len(groups))
    mp = Mix(tuple((w, ByLabels(g), gibbs) for g in groups))
    K = build_kernel_matrix(mp, space)
    con = check_connectivity([ByLabels(g) for g in groups], space, post)
    print(title)
    for lab, row in zip(labels, K.entries):
        print("   %-8s" % lab + " ".join("%5s" % rational_str(x) for x in row))
    print("   connected:", con.connected,
          "" if con.witness is None else "(stuck set %s)" % [labels[i] for i in con.witness])
    print("   stationary residual:", rational_str(check_stationary(K, post)),
          " irreducible:", check_irreducible(K, post), " aperiodic:", check_aperiodic(K, post))
    print()


print("Posterior:", dict(zip(labels, map(rational_str, post.probs))), "\n")
report("Clauses {x}, {y}:", [["x"], ["y"]])
report("Clauses {x}, {y}, {x,y}:", [["x"], ["y"], ["x", "y"]])
