"""Normalization of cone factorizations by self-scaled barrier automorphisms.

Modules
-------
cones       cone descriptors, membership and projections
barriers    self-scaled barriers, Hessians and their square roots
scaling     the scaling program, certificates and Nesterov-Todd points
recovery    recovering linear maps; the half-cone counterexample
nets        lattice nets and maximum-volume row selection
encoding    compact encodings and reconstruction by convex feasibility
polytopes   0/1 and cyclic instances with exact facet descriptions
bounds      counting bounds in log2
io, cli     JSON schemas and the command-line interface
"""

__version__ = "0.1.0"
