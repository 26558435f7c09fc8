"""Sweep r on a configuration and print the efficient frontier next to the oracle."""
import argparse

import numpy as np

from qcport.oracle import minimize_risk, solve_primal
from qcport.report import RunConfig, cmd_frontier


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("config")
    ap.add_argument("--steps", type=int, default=8)
    ap.add_argument("--span", type=float, default=0.01, help="width of the r range above min g2")
    args = ap.parse_args()
    cfg = RunConfig.load(args.config)
    s = cfg.scenarios()
    m2, _ = minimize_risk(cfg.rho2, s)
    lo = m2 + 1e-4 * max(1.0, abs(m2))
    table, _ = cmd_frontier(cfg, lo, lo + args.span, args.steps)
    print(f"{'r':>12} {'status':>10} {'value':>14} {'oracle':>14}")
    for row in table["rows"]:
        p = solve_primal(cfg.rho1, cfg.rho2, s, row["r"]).p_value
        v = row.get("p_value", np.nan)
        print(f"{row['r']:>12.6f} {row['status']:>10} {float(v):>14.9f} {p:>14.9f}")
    for w in table["warnings"]:
        print("warning:", w)


if __name__ == "__main__":
    main()
