"""Distilling qutrit isotropic pairs with a trained Givens/controlled-sum chain.

Each round merges one fresh copy into the running pair using two Givens
layers around a controlled sum per party, then postselects the measured
qutrits on zero. A short training run already beats the input fidelity.
"""

from dloccsim.experiments import train_qutrit_chain
from dloccsim.train import OptimizerConfig


def main():
    p = 0.7
    f_in = p + (1 - p) / 9
    print(f"qutrit isotropic source at p = {p}: input fidelity {f_in:.6f}")

    for n in (2, 3):
        cfg = OptimizerConfig(step_size=0.1, max_iters=120, restarts=1, rng_seed=3,
                              target_loss=1 - (f_in + 0.02), patience=25)
        fid, report = train_qutrit_chain(n, p, cfg)
        print(f"{n} copies: trained fidelity {fid:.6f} "
              f"({len(report.loss_trace)} iterations)")


if __name__ == "__main__":
    main()
