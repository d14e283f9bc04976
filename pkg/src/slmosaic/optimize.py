"""Nelder-Mead simplex search, written for maximisation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class SimplexCoefficients:
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5


@dataclass
class SimplexResult:
    x: np.ndarray
    score: float
    iterations: int
    evaluations: int
    converged: bool
    simplex: np.ndarray
    scores: np.ndarray
    best_history: list[float] = field(default_factory=list)


def nelder_mead_maximize(
    func: Callable[[np.ndarray], float],
    initial_simplex,
    converged: Callable[[np.ndarray, np.ndarray], bool],
    max_iterations: int = 200,
    coefficients: SimplexCoefficients = SimplexCoefficients(),
) -> SimplexResult:
    """Maximise ``func`` starting from an ``(n + 1, n)`` simplex.

    Each iteration replaces the vertex with the smallest score using the
    reflection / expansion / contraction rules, or shrinks the simplex
    towards the best vertex. ``converged(simplex, scores)`` is called with
    vertices sorted best-first after every iteration. Vertices scoring
    ``-inf`` are treated as infeasible but kept in the simplex.
    """
    c = coefficients
    simplex = np.array(initial_simplex, dtype=float)
    n_eval = 0

    def f(x):
        nonlocal n_eval
        n_eval += 1
        return float(func(x))

    scores = np.array([f(v) for v in simplex])
    if not np.any(np.isfinite(scores)):
        raise ValueError("every initial vertex is infeasible")

    def order():
        nonlocal simplex, scores
        idx = np.argsort(-scores, kind="stable")
        simplex, scores = simplex[idx], scores[idx]

    order()
    history = [scores[0]]
    iterations = 0
    done = converged(simplex, scores)
    while not done and iterations < max_iterations:
        iterations += 1
        worst = simplex[-1]
        centroid = simplex[:-1].mean(axis=0)
        xr = centroid + c.reflection * (centroid - worst)
        fr = f(xr)
        if fr > scores[0]:
            xe = centroid + c.expansion * (xr - centroid)
            fe = f(xe)
            simplex[-1], scores[-1] = (xe, fe) if fe > fr else (xr, fr)
        elif fr > scores[-2]:
            simplex[-1], scores[-1] = xr, fr
        else:
            if fr > scores[-1]:
                xc = centroid + c.contraction * (xr - centroid)
                fc = f(xc)
                accept = fc >= fr
            else:
                xc = centroid + c.contraction * (worst - centroid)
                fc = f(xc)
                accept = fc > scores[-1]
            if accept:
                simplex[-1], scores[-1] = xc, fc
            else:
                best = simplex[0]
                for i in range(1, len(simplex)):
                    simplex[i] = best + c.shrink * (simplex[i] - best)
                    scores[i] = f(simplex[i])
        order()
        history.append(scores[0])
        done = converged(simplex, scores)

    return SimplexResult(
        x=simplex[0].copy(),
        score=float(scores[0]),
        iterations=iterations,
        evaluations=n_eval,
        converged=bool(done),
        simplex=simplex.copy(),
        scores=scores.copy(),
        best_history=history,
    )
