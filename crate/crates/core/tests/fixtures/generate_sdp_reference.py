"""Reference optima for the structured PSD solver, computed with CLARABEL and cross-checked with SCS.

Run once: python3 generate_sdp_reference.py > sdp_reference.json
"""
import json

import cvxpy as cp
import numpy as np


def toeplitz(x):
    n = x.shape[0]
    return [x[i, j] == x[i + 1, j + 1] for i in range(n - 1) for j in range(n - 1)]


def two_block(first, second, d, rho):
    p, q = d.shape
    x = cp.Variable((p + q, p + q), hermitian=True)
    cons = [x >> 0]
    for struct, sl in ((first, slice(0, q)), (second, slice(q, p + q))):
        if struct == "toeplitz":
            cons += toeplitz(x[sl, sl])
    reg = cp.real(cp.trace(x[:q, :q])) / (2 * q) + cp.real(cp.trace(x[q:, q:])) / (2 * p)
    obj = rho * reg + 0.5 * cp.sum_squares(d - x[q:, :q])
    return cp.Problem(cp.Minimize(obj), cons)


def unit_diagonal(c):
    n = c.shape[0]
    w = cp.Variable((n, n), hermitian=True)
    return cp.Problem(cp.Maximize(cp.real(cp.trace(c @ w))), [w >> 0, cp.real(cp.diag(w)) == 1])


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def solve(problem):
    a = problem.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)
    b = problem.solve(solver=cp.SCS, eps=1e-9, max_iters=200000)
    assert abs(a - b) <= 1e-5 * max(1.0, abs(a)), (a, b)
    return a


def emit(m):
    return {"re": np.real(m).tolist(), "im": np.imag(m).tolist()}


def main():
    rng = np.random.default_rng(20240611)
    cases = []
    specs = [("toeplitz", "toeplitz", 5, 5, 0.8), ("toeplitz", "toeplitz", 7, 4, 0.3),
             ("free", "toeplitz", 3, 6, 0.5), ("free", "toeplitz", 8, 5, 1.5)]
    for first, second, p, q, rho in specs:
        # A low-rank structured signal plus noise keeps the optimum away from zero.
        w = rng.uniform(-np.pi, np.pi, 2)
        a = np.exp(1j * np.outer(np.arange(p), w))
        b = np.exp(1j * np.outer(np.arange(q), rng.uniform(-np.pi, np.pi, 2)))
        d = a @ np.diag(rng.uniform(0.5, 2.0, 2)) @ b.conj().T + 0.2 * crandn(rng, p, q)
        cases.append({"kind": "two_block", "first": first, "second": second, "rho": rho,
                      "data": emit(d), "objective": solve(two_block(first, second, d, rho))})
    g = crandn(rng, 6, 6)
    c = g.conj().T @ g
    cases.append({"kind": "unit_diagonal", "data": emit(c), "objective": solve(unit_diagonal(c))})
    print(json.dumps({"cases": cases}, indent=1))


if __name__ == "__main__":
    main()
