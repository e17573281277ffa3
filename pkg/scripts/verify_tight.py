"""Check loss = bound on the adversarial chain for a grid of (ell, m).

    python3 scripts/verify_tight.py --gamma 0.95 --iterations 10
"""
import argparse

from nsmpi.dp import INF, format_m
from nsmpi.tight import TightInstanceSpec, verify_tight_trajectory


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--gamma", type=float, default=0.9)
    ap.add_argument("--epsilon", type=float, default=0.1)
    ap.add_argument("--iterations", type=int, default=8)
    args = ap.parse_args()

    failures = 0
    for ell in (1, 2, 3, 5):
        for m in (0, 1, 2, 3, INF):
            spec = TightInstanceSpec(ell, m, args.epsilon, args.gamma, args.iterations)
            rep = verify_tight_trajectory(spec)
            worst = max(abs(r.loss - r.bound) for r in rep.rows)
            failures += not rep.success
            print(f"ell={ell} m={format_m(m):>3} N={spec.N:4d} max|loss-bound|={worst:.2e} "
                  f"trajectory={'ok' if rep.trajectory_ok else 'MISMATCH'}")
    raise SystemExit(1 if failures else 0)


if __name__ == "__main__":
    main()
