"""Build the bundled 6-bus, 24-hour model and solve it with branch-and-bound."""
from ucreduce import base_profile, build, load_bundled, problem_stats, solve_mip

system = load_bundled()
problem = build(system, base_profile(system))
print("model size:", problem_stats(problem).as_dict())

result = solve_mip(problem)
print(f"status {result.status}  objective {result.objective:.2f}  "
      f"gap {result.achieved_gap:.4f}  nodes {result.nodes_explored}  "
      f"time {result.wall_time:.2f}s")
print("commitment (rows are generators, columns are hours):")
for g, row in zip(system.generators, problem.commitment(result.incumbent.values)):
    print(f"  G{g.id}", "".join(str(int(v)) for v in row))
