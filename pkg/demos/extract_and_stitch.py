"""Cut a subproblem out of a trace, resample it on its own, and put it back.

The subprogram keeps the selected choices free and pins everything else as
observations, so its density equals the density of the whole trace.

    python3 demos/extract_and_stitch.py
"""

from subinfer.analysis import enumerate_traces
from subinfer.corpus import get
from subinfer.executor import execute, explore, make_rng
from subinfer.inference import ByLabels, select
from subinfer.serialize import rational_str, trace_label
from subinfer.transform import density, equiv, extract_trace, stitch_trace

entry = get("lambda_beta")
print("Program:\n" + entry.source + "\n")

t = execute(entry.program, make_rng(3))
sub = select(ByLabels(["y"]), t)
ext = extract_trace(t, sub)
print("Trace", trace_label(t), "with density", rational_str(density(t)))
print("Selected ids:", sorted(sub.selected), " absorbing:", sorted(sub.absorbing))
print("\nSubprogram for choice y (x is now an observation):")
print(ext.source())
print("Subtrace density:", rational_str(density(ext.trace)))

print("\nEvery trace of the subprogram, stitched back into the original:")
space = enumerate_traces(entry.program)
for ts in explore(ext.program):
    back = stitch_trace(t, ts, sub, extracted=ext)
    print("  sub %-6s -> full %-9s density %-6s same class: %s"
          % (trace_label(ts), trace_label(back), rational_str(density(back)), equiv(sub, t, back)))
print("\nThe original space has", len(space), "traces; stitching only reaches the ones that agree on x.")
