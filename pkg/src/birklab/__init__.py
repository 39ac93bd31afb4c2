"""Exact-arithmetic laboratory for adjacency and incidence matrix models of
NP problems over the Birkhoff polytope."""

__version__ = "0.1.0"
