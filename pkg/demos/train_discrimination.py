"""Adaptive discrimination of two noisy Bell hypotheses.

Alice measures her half and phones the outcome to Bob, who rotates his
guess measurement accordingly. Training the small conditioned circuit
family approaches the collective-measurement (Helstrom) bound copy by
copy.
"""

from dloccsim.experiments import (
    helstrom_bound,
    noisy_bell_pair,
    train_discrimination_chain,
)


def main():
    # noiseless hypotheses are orthogonal: one copy should suffice
    clean0 = noisy_bell_pair("dephasing", 1.0)
    clean1 = noisy_bell_pair("dephasing", 1.0, minus=True)
    pt = train_discrimination_chain(clean0, clean1, copies=(1,), seed=0,
                                    max_iters=150, restarts=2, patience=25)[0]
    print(f"noiseless hypotheses, 1 copy: trained {pt.success:.6f} "
          f"(bound {pt.helstrom:.6f})\n")

    # dephased hypotheses overlap, so the bound sits below 1
    s0 = noisy_bell_pair("dephasing", 0.2)
    s1 = noisy_bell_pair("dephasing", 0.2, minus=True)
    print("dephasing p = 0.2:")
    print(f"{'copies':>7} {'trained':>9} {'bound':>9}")
    for pt in train_discrimination_chain(s0, s1, copies=(1, 2), seed=0,
                                         max_iters=60, restarts=1, patience=15):
        print(f"{pt.n_copies:>7} {pt.success:>9.6f} {pt.helstrom:>9.6f}")

    # unequal priors shift both the trained value and the bound
    pri = (0.8, 0.2)
    pt = train_discrimination_chain(s0, s1, copies=(1,), seed=0, max_iters=60,
                                    restarts=1, priors=pri, patience=15)[0]
    print(f"\npriors {pri}: trained {pt.success:.6f} "
          f"(bound {helstrom_bound(s0, s1, 1, pri):.6f})")


if __name__ == "__main__":
    main()
