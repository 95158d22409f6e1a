"""Random-speed particle in a box: simulation and rare-event laboratory.

A particle crosses [0, 1) at constant speed, is absorbed at the right wall
and re-emitted at 0 with a fresh i.i.d. speed. The package simulates the
process exactly, represents its empirical measures as finite mixtures,
evaluates the associated rate functionals, and runs tilted-sampling
experiments, including the demonstration that no large-deviations principle
holds when the two small-speed tail exponents differ.
"""

__version__ = "0.1.0"
