"""A coin with a noisy witness: execute, inspect, enumerate, condition.

    python3 demos/walkthrough_two_flip.py
"""

from subinfer import parse, print_program
from subinfer.analysis import enumerate_traces, posterior
from subinfer.executor import execute, make_rng
from subinfer.serialize import rational_str, trace_label
from subinfer.transform import density, observe_weight, prior_density

SOURCE = """
(assume x (flip 3/10))
(observe (flip (if x 9/10 1/10)) #t)
"""

program = parse(SOURCE)
print("Desugared program (booleans become Church-encoded lambdas):")
print(print_program(program))

t = execute(program, make_rng(2024))
print("One forward run drew", trace_label(t))
print("  prior factor   ", rational_str(prior_density(t)))
print("  observe factor ", rational_str(observe_weight(t)))
print("  density        ", rational_str(density(t)))
print("  graph has", len(t.graph.kinds), "nodes,", len(t.graph.sample_nodes), "of them stochastic")

space = enumerate_traces(program)
post = posterior(space)
print("\nEvery trace, with its unnormalized density and posterior probability:")
for tr, d, p in zip(space.traces, space.densities, post.probs):
    print("  %-6s density %-7s posterior %s" % (trace_label(tr), rational_str(d), rational_str(p)))
