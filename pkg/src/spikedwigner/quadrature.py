"""One-dimensional quadrature rules on [0, 1].

Multidimensional integrals in :mod:`spikedwigner.theory` are built as
tensor products of these rules, contracted with matrix products.
"""

import numpy as np


def simpson_rule(n_intervals):
    """Nodes and weights of the composite Simpson rule on [0, 1]."""
    if n_intervals < 2 or n_intervals % 2:
        raise ValueError("Simpson rule needs an even number of intervals >= 2")
    x = np.linspace(0.0, 1.0, n_intervals + 1)
    w = np.ones(n_intervals + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w *= 1.0 / (3.0 * n_intervals)
    return x, w


def midpoint_rule(n_intervals):
    """Nodes and weights of the composite midpoint rule on [0, 1]."""
    if n_intervals < 1:
        raise ValueError("midpoint rule needs at least one interval")
    x = (np.arange(n_intervals) + 0.5) / n_intervals
    return x, np.full(n_intervals, 1.0 / n_intervals)


def rule(name, n_intervals):
    if name == "simpson":
        return simpson_rule(n_intervals)
    if name == "midpoint":
        return midpoint_rule(n_intervals)
    raise ValueError(f"unknown quadrature rule {name!r}")


def integrate(func, n_intervals=1024, name="simpson"):
    x, w = rule(name, n_intervals)
    return float(np.dot(w, np.asarray(func(x), dtype=float)))
