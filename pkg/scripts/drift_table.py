"""Print the exact drift mu_n next to its even and odd limits."""

from __future__ import annotations

import argparse

from rankwalk.chain import mu_limit, mu_n


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--q", type=int, default=2)
    ap.add_argument("--nmax", type=int, default=30)
    args = ap.parse_args()

    lim = {p: mu_limit(args.q, p) for p in ("even", "odd")}
    print(f"q={args.q}  limit(even)={lim['even']:.12f}  limit(odd)={lim['odd']:.12f}")
    print(f"{'n':>3} {'mu_n':>16} {'gap to limit':>14}")
    for n in range(2, args.nmax + 1):
        m = mu_n(n, args.q)
        print(f"{n:>3} {m:>16.12f} {m - lim['even' if n % 2 == 0 else 'odd']:>14.3e}")


if __name__ == "__main__":
    main()
