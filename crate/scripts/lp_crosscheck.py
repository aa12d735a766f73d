#!/usr/bin/env python3
"""Solve an LP-format model with SCIP and print its optimal objective.

Usage: lp_crosscheck.py MODEL.lp
Exit status is nonzero unless SCIP proves optimality.
"""
import sys

from pyscipopt import Model


def main(path):
    m = Model()
    m.hideOutput()
    m.readProblem(path)
    m.setParam("limits/gap", 0.0)
    m.setParam("limits/absgap", 0.0)
    m.setParam("numerics/feastol", 1e-9)
    m.optimize()
    status = m.getStatus()
    if status != "optimal":
        print(f"status {status}", file=sys.stderr)
        return 1
    print(f"objective {m.getObjVal():.12g}")
    return 0


if __name__ == "__main__":
    if len(sys.argv) != 2:
        print(__doc__, file=sys.stderr)
        sys.exit(2)
    sys.exit(main(sys.argv[1]))
