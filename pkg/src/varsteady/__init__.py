"""Variational steady states of driven-dissipative lattice models.

The steady state is approximated by minimizing the trace norm of the reduced
time derivative of a small cluster, for product and nearest-neighbor
correlated states, with mean-field and exact small-lattice references.
"""
__version__ = "0.1.0"
