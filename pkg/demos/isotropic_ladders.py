"""Static vs adaptive fidelity ladders for isotropic pairs.

Compares the two ways of composing the reference 4->1 block: the static
scheme squares its copy cost each round (4^i), the adaptive scheme feeds
three fresh copies per round (3i + 1). Also shows the 16->1 composition
as two explicit stages of the same map.
"""

from fractions import Fraction

from dloccsim.protocols import (
    copies_consumed,
    iso_input_fidelity,
    oracle_iso_4to1,
    oracle_iso_dynamic,
    oracle_iso_iterative,
)


def main():
    p = 0.7
    f0 = iso_input_fidelity(p)
    print(f"isotropic source at p = {p}, input fidelity {f0}")
    print(f"(exact rational: {iso_input_fidelity(Fraction(7, 10))})\n")

    print(f"{'round':>5} {'static':>10} {'copies':>7} {'adaptive':>10} {'copies':>7}")
    for i in range(1, 5):
        print(
            f"{i:>5} {oracle_iso_iterative(i, p):>10.6f} {copies_consumed('iterative', i):>7}"
            f" {oracle_iso_dynamic(i, p):>10.6f} {copies_consumed('dynamic', i):>7}"
        )

    # 16 -> 1 written as two explicit stages of the one-step map
    stage1 = oracle_iso_4to1(f0, f0)
    stage2 = oracle_iso_4to1(stage1, stage1)
    print(f"\n16->1 as two stages: {f0:.6f} -> {stage1:.6f} -> {stage2:.6f}")
    print(f"direct two-round value: {oracle_iso_iterative(2, p):.6f}")

    # the adaptive ladder overtakes the static one per copy consumed
    print("\nfidelity per copy budget (adaptive rounds until 16 copies):")
    i = 1
    while copies_consumed("dynamic", i) <= 16:
        print(f"  {copies_consumed('dynamic', i):>3} copies -> {oracle_iso_dynamic(i, p):.6f}")
        i += 1


if __name__ == "__main__":
    main()
