"""Three hand-fixed 20-draw bootstrap fixtures and a loop-by-loop re-evaluation of the test."""
import math
from fractions import Fraction

from diffbound.inference import BootstrapDraws

FIXTURES = {
    "balanced": BootstrapDraws(
        w1=[1.92, 2.10, 1.75, 2.31, 2.04, 1.88, 2.22, 1.97, 2.45, 1.69,
            2.08, 1.81, 2.17, 2.00, 1.93, 2.36, 1.72, 2.12, 1.99, 2.27],
        w2=[3.95, 4.21, 3.80, 4.42, 4.05, 3.71, 4.30, 4.11, 3.89, 4.58,
            4.02, 3.66, 4.25, 3.98, 4.14, 3.84, 4.37, 4.07, 3.93, 4.19],
        sigma1_hat=0.19, sigma2_hat=0.24, n=400, seed=1, estimate1=2.03, estimate2=4.06),
    "skewed": BootstrapDraws(
        w1=[0.10, 0.12, 0.15, 0.11, 0.95, 0.13, 0.09, 0.14, 0.40, 0.12,
            0.08, 0.16, 0.11, 0.70, 0.13, 0.10, 0.12, 0.25, 0.14, 0.11],
        w2=[0.60, 0.55, 0.62, 0.58, 0.61, 0.20, 0.59, 0.57, 0.63, 0.60,
            0.56, 0.64, 0.58, 0.35, 0.61, 0.59, 0.62, 0.57, 0.60, 0.58],
        sigma1_hat=0.05, sigma2_hat=0.03, n=150, seed=2, estimate1=0.13, estimate2=0.59),
    "crossing": BootstrapDraws(
        w1=[3.10, 2.85, 3.40, 2.95, 3.22, 3.05, 2.70, 3.31, 2.99, 3.15,
            3.48, 2.88, 3.02, 3.26, 2.79, 3.12, 3.37, 2.93, 3.08, 3.19],
        w2=[2.60, 2.95, 2.41, 2.77, 3.05, 2.52, 2.88, 2.66, 2.35, 2.99,
            2.71, 2.58, 2.83, 2.47, 3.11, 2.62, 2.74, 2.91, 2.55, 2.80],
        sigma1_hat=0.35, sigma2_hat=0.40, n=60, seed=3, estimate1=3.08, estimate2=2.72),
}

LEVELS = [(0.05, 0.005), (0.2, 0.05), (0.1, 0.01)]


def taus_for(bd):
    lo = min(min(bd.w1), min(bd.w2)) - 1.0
    hi = max(max(bd.w1), max(bd.w2)) + 1.0
    return [lo + (hi - lo) * k / 120 for k in range(121)]


def _quantile(values, level):
    """Smallest v with #{x <= v} / L >= level, comparing with exact rationals."""
    ordered = sorted(values)
    L = len(ordered)
    for v in ordered:
        if Fraction(sum(1 for x in ordered if x <= v), L) >= level:
            return v
    return ordered[-1]


def reference_accept(bd, tau, alpha, beta):
    L = len(bd.w1)
    rn = math.sqrt(bd.n)
    s1, s2 = bd.sigma1_hat, bd.sigma2_hat
    a, b = Fraction(str(alpha)), Fraction(str(beta))
    # moment draws and their means
    W1 = [float(w) - tau for w in bd.w1]
    W2 = [tau - float(w) for w in bd.w2]
    W1bar = sum(W1) / L
    W2bar = sum(W2) / L
    # first-stage critical value
    M = [max(rn * (W1[j] - W1bar) / s1, rn * (W2[j] - W2bar) / s2) for j in range(L)]
    B = _quantile(M, 1 - b)
    # moment selection
    u1 = W1bar + s1 * B / rn
    u2 = W2bar + s2 * B / rn
    lam1, lam2 = min(u1, 0.0), min(u2, 0.0)
    # second-stage statistic, recentred draws shifted by lambda
    J = [max(rn * (W1bar - W1[j] + lam1) / s1, rn * (W2bar - W2[j] + lam2) / s2)
         for j in range(L)]
    c = _quantile(J, 1 - a + b)
    # test statistic and decision
    T = max(rn * W1bar / s1, rn * W2bar / s2)
    return T <= c or (u1 <= 0 and u2 <= 0)


def compare_all(accept_fn):
    """Count decisions and mismatches of ``accept_fn`` against the reference."""
    total = mismatches = 0
    for bd in FIXTURES.values():
        for alpha, beta in LEVELS:
            for tau in taus_for(bd):
                total += 1
                if bool(accept_fn(bd, tau, alpha, beta)) != reference_accept(bd, tau, alpha, beta):
                    mismatches += 1
    return total, mismatches
