"""Recompute, at 40 digits, the reference constants frozen in the unit tests."""

from mpmath import e, exp, log, mp, mpf

mp.dps = 40


def sig(x):
    return 1 / (1 + exp(-x))


def lse(xs):
    return log(sum(exp(mpf(x)) for x in xs))


def kl(s, t):
    p, q = sig(2 * mpf(s)), sig(2 * mpf(t))
    return p * log(p / q) + (1 - p) * log((1 - p) / (1 - q))


VALUES = {
    "log_sum_exp([1, -1, 0.5])": lse([1, -1, 0.5]),
    "log1p_sum_exp([-1, 2])": lse([0, -1, 2]),
    "softplus(-1)": log(1 + exp(-1)),
    "sigmoid(-40)": sig(-40),
    "sigmoid(1.386294)": sig(mpf("1.386294")),
    "zlpr(y=[1,1,0], s=[1,-1,0.5])": log(1 + exp(-1) + e) + log(1 + exp(mpf("0.5"))),
    # log_sum_exp(-s0, -s_pos) + log_sum_exp(s0, s_neg)
    "tlpr(y=[1,0], s=[0,0], s0=1)": log(exp(-1) + 1) + log(e + 1),
    "soft_zlpr(p=[.5,.25], s=[0,1])": log(1 + mpf("0.5") + mpf("0.25") / e) + log(1 + mpf("0.5") + mpf("0.75") * e),
    "bce(y=[1,1,0], s=[1,-1,0.5])": log(1 + exp(-1)) + log(1 + e) + log(1 + exp(mpf("0.5"))),
    "focal(y=[1], s=[0], gamma=2)": log(2) / 4,
    "sigmoid(-2), sigmoid(2)": (sig(-2), sig(2)),
    "kl([0], [1])": kl(0, 1),
    "symmetric([0], [1])": kl(0, 1) + kl(1, 0),
}

if __name__ == "__main__":
    for name, value in VALUES.items():
        print(f"{name:<34} {value}")
