"""Print the bisection trace for a run configuration."""
import argparse

from qcport.bisection import bisect
from qcport.report import RunConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("config")
    ap.add_argument("--r", type=float, default=None)
    ap.add_argument("--epsilon", type=float, default=None)
    args = ap.parse_args()
    cfg = RunConfig.load(args.config)
    r = cfg.r if args.r is None else args.r
    eps = cfg.epsilon if args.epsilon is None else args.epsilon
    tr = bisect(cfg.rho1, cfg.rho2, cfg.scenarios(), r, eps, cfg.solver)
    print(f"l1 = {tr.l1:.9f}  u1 = {tr.u1:.9f}  K bound = {tr.K_bound}")
    print(f"{'k':>3} {'t':>14} {'verdict':>10} {'status':>10} {'newton':>6}")
    for k, st in enumerate(tr.iterations, 1):
        print(f"{k:>3} {st.t:>14.9f} {st.verdict:>10} {st.status:>10} {st.newton_steps:>6}")
    f = tr.final
    print(f"final w = {f.w.weights.round(6).tolist()}  g1 = {f.value:.9f}  g2 = {f.g2:.9f}  t_K = {f.t_K:.9f}")
    for w in tr.warnings:
        print("warning:", w)


if __name__ == "__main__":
    main()
