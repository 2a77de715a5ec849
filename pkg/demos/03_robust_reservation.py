"""From a noisy prediction to a bandwidth reservation, step by step.

Given a_hat predicted key frames out of F and the channel quality triple
(p, q, lambda), the posterior over the true count is a sum of two binomials.
The reservation covers its epsilon-quantile, mapped to Hz and resource
blocks.  The last section checks the calibration promise empirically: the
fraction of slots whose realized demand fits the reservation should sit
near epsilon.
"""

from marprov.config import ChannelSettings, ExperimentConfig
from marprov.provisioning import (
    ChannelParams,
    RadioConfig,
    bandwidth_for_k,
    k_star,
    posterior_cdf_table,
    tnr,
    tpr,
)
from marprov.simulator import run_experiment


def main():
    c = ChannelParams(p=0.85, q=0.9, lam=0.3)
    F = 10
    a_hat = 4
    print(f"channel: p={c.p} q={c.q} lambda={c.lam}")
    print(f"TPR (predicted positive is real) = {tpr(c):.4f}")
    print(f"TNR (predicted negative is real) = {tnr(c):.4f}")
    print()

    print(f"posterior CDF of the true key count, given {a_hat} of {F} predicted:")
    table = posterior_cdf_table(a_hat, F, c)
    for k, g in enumerate(table):
        marker = ""
        if k > 0 and table[k - 1] < 0.8 <= g:
            marker = "  <- k* at eps=0.8"
        print(f"  P(K <= {k:2d}) = {g:.6f}{marker}")
    print()

    print("reservation level vs reliability target:")
    r = RadioConfig()
    for eps in (0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99):
        ks = k_star(a_hat, F, c, eps)
        hz, rb = bandwidth_for_k(ks, r)
        print(f"  eps={eps:4.2f}: k*={ks:2d} -> {hz / 1e6:7.2f} MHz = {rb:4d} RBs")
    print()

    print("empirical calibration (Bernoulli truth through the channel, F=400):")
    for eps in (0.6, 0.8, 0.9):
        cfg = ExperimentConfig(
            kind="channel",
            F=400,
            slots=4000,
            seed=0,
            radio=RadioConfig(epsilon=eps),
            channel=ChannelSettings(lambdas=(0.3,), p=0.85, q=0.9, params="true"),
        )
        uc, _ = run_experiment(cfg)
        print(f"  eps={eps}: realized coverage = {uc.timely_slot_fraction:.4f}")


if __name__ == "__main__":
    main()
