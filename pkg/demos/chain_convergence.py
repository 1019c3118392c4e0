"""Total variation to the exact posterior as a chain gets longer.

    python3 demos/chain_convergence.py
"""

from collections import Counter

from subinfer.analysis import enumerate_traces, posterior, tv_distance
from subinfer.corpus import CORPUS, gibbs_mix
from subinfer.executor import make_rng
from subinfer.inference import (BlackBox, ByLabels, InferenceCache, Mix, PriorMH, infer_step,
                                initial_trace)

MARKS = (100, 1_000, 10_000, 50_000)

for name in ("two_flip", "chain3", "higher_order"):
    e = CORPUS[name]
    space = enumerate_traces(e.program)
    post = posterior(space)
    print(name)
    kernels = {"gibbs mix": gibbs_mix(e),
               "prior MH on sites": Mix(((1, ByLabels(e.sites), BlackBox(PriorMH())),))}
    for label, mp in kernels.items():
        rng = make_rng(1)
        cache = InferenceCache()
        t = initial_trace(e.program, rng)
        hist, row = Counter(), []
        for i in range(1, MARKS[-1] + 1):
            t = infer_step(mp, t, rng, cache)
            hist[t.key] += 1
            if i in MARKS:
                row.append("%.4f" % tv_distance(hist, space, post))
        print("   %-18s" % label + "  ".join("n=%-6d tv=%s" % (m, v) for m, v in zip(MARKS, row)))
