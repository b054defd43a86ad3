"""Postulate battery over random rational local-reinforcement kernels.

For each kernel prints A1, A2, J, J', BC and whether the extracted
increments are one constant, then checks the implications
J' => A2, A1 and A2 => J, BC <=> J', and J' with A1 => constant increments.

    python scripts/ladder.py --count 200 --seed 1
"""

import argparse
import random
from fractions import Fraction as F

from papangelou import (LocalReinforcement, Measure, Space, check_A2, check_BC, check_cocycle,
                        check_J, check_Jprime, extract_local, local_reinforcement_kernel)


def random_kernel(rng: random.Random, space: Space, depth: int):
    kind = rng.choice(["common_linear", "site_linear", "generic", "difference"])
    den = rng.choice([1, 2, 3, 4, 5, 10])
    n = space.size
    if kind == "common_linear":
        c = F(rng.randint(0, 9), den)
        rho, incs = [F(rng.randint(0, 6), den) for _ in range(n)], [[c] * depth] * n
    elif kind == "site_linear":
        cs = [F(rng.randint(0, 9), den) for _ in range(n)]
        while len(set(cs)) == 1:
            cs[0] += F(1, den)
        rho, incs = [F(rng.randint(1, 6), den) for _ in range(n)], [[c] * depth for c in cs]
    elif kind == "generic":
        rho = [F(rng.randint(1, 6), den) for _ in range(n)]
        incs = [[F(rng.randint(0, 9), den) for _ in range(depth)] for _ in range(n)]
    else:
        c = F(rng.randint(1, 9), den)
        rho, incs = [c * rng.randint(0, 4) for _ in range(n)], [[-c] * depth] * n
    spec = LocalReinforcement(Measure(space, tuple(rho)), dict(zip(space.sites, incs)))
    return kind, local_reinforcement_kernel(spec)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=120)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--sites", type=int, default=3)
    ap.add_argument("--probe-mass", type=int, default=4)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    space = Space(tuple("abcdefghij"[:args.sites]))
    pm = args.probe_mass
    print("idx,kind,A1,A2,J,Jprime,BC,constant_c")
    violations = 0
    for k in range(args.count):
        kind, pi = random_kernel(rng, space, pm + 2)
        a1, a2, j, jp, bc = (c(pi, pm).passed for c in
                             (check_cocycle, check_A2, check_J, check_Jprime, check_BC))
        const = len(set(extract_local(pi, max_n=pm, probe_mass=pm).c.values())) <= 1
        bad = (jp and not a2) or (a1 and a2 and not j) or (bc != jp) or (jp and a1 and not const)
        violations += bad
        print(f"{k},{kind},{a1},{a2},{j},{jp},{bc},{const}" + (",VIOLATION" if bad else ""))
    print(f"# {args.count} kernels, {violations} implication violations")
    return 1 if violations else 0


if __name__ == "__main__":
    raise SystemExit(main())
