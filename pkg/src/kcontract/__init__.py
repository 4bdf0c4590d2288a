"""k-contraction analysis and k-contractive feedback design.

Volume-contraction analysis for linear and nonlinear systems through
generalized Lyapunov inertia tests instead of matrix-compound inequalities,
plus feedback synthesis, compound/volume simulation, and a CLI with
reproduction bundles for the built-in example systems.
"""

__version__ = "0.1.0"
