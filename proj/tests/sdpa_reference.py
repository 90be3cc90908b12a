"""Independent SDPA sparse-format reader.

Solves  min c^T x  s.t.  sum_i F_i x_i - F_0 >= 0  with cvxpy and prints one
optimal objective per input file. Exit status 1 if any solve fails.
"""
import re
import sys

import cvxpy as cp
import numpy as np


def read_sdpa(path):
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and ln.lstrip()[0] not in '"*']
    nums = lambda s: [float(t) for t in re.split(r"[\s,{}()]+", s) if t]
    m = int(nums(lines[0])[0])
    nblock = int(nums(lines[1])[0])
    sizes = [int(v) for v in nums(lines[2])[:nblock]]
    c = np.array(nums(lines[3])[:m])
    mats = [[np.zeros((abs(s), abs(s))) for s in sizes] for _ in range(m + 1)]
    for ln in lines[4:]:
        k, b, i, j, v = nums(ln)
        k, b, i, j = int(k), int(b) - 1, int(i) - 1, int(j) - 1
        mats[k][b][i, j] = v
        mats[k][b][j, i] = v
    return m, sizes, c, mats


def solve(path):
    m, sizes, c, mats = read_sdpa(path)
    x = cp.Variable(m)
    cons = []
    for b, s in enumerate(sizes):
        expr = -mats[0][b]
        for k in range(m):
            if np.any(mats[k + 1][b]):
                expr = expr + x[k] * mats[k + 1][b]
        if s < 0:
            cons.append(cp.diag(expr) >= 0)
        else:
            cons.append((expr + expr.T) / 2 >> 0)
    prob = cp.Problem(cp.Minimize(c @ x), cons)
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10, max_iter=500)
    if prob.status not in ("optimal", "optimal_inaccurate"):
        raise RuntimeError(f"{path}: {prob.status}")
    return prob.value


def main(paths):
    ok = True
    for p in paths:
        try:
            print(repr(float(solve(p))))
        except Exception as exc:  # report and keep going
            print(f"error {exc}")
            ok = False
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
