"""Weights, radius function, quadrature and geodesic distance."""
