"""Solve a two-unit single-bus commitment problem and inspect the schedule.

Demand of 150 MW must be met by a cheap and an expensive 100 MW unit. The
cheap unit runs at full output and the expensive one covers the remaining
50 MW, so the optimum is 100*10 + 50*20 + 2*5 = 2010.
"""
import numpy as np

from ucreduce import Bus, Generator, GridSystem, MipOptions, base_profile, build, solve_mip

gens = [
    Generator(1, 1, 0.0, 100.0, 100.0, 0.0, 10.0, 5.0, 0.0, 0),
    Generator(2, 1, 0.0, 100.0, 100.0, 0.0, 20.0, 5.0, 0.0, 0),
]
system = GridSystem([Bus(1, [150.0])], [], gens, reference_bus=1, n_periods=1,
                    reserve_requirement=False)
problem = build(system, base_profile(system))

result = solve_mip(problem, MipOptions(relative_gap=0.0))
x = result.incumbent.values
print(f"status     {result.status}")
print(f"objective  {result.objective:.1f}")
print(f"nodes      {result.nodes_explored}")
print(f"commitment {problem.commitment(x).ravel().tolist()}")
print(f"dispatch   {np.round(x[:2], 3).tolist()} MW")
