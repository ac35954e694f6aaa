"""Independent high-precision reference values for the Mittag-Leffler tests.

Sums the defining power series in multiprecision arithmetic, with enough
working digits to absorb the cancellation for large negative arguments.
Values printed here are frozen into the Rust test suites.
"""
import mpmath as mp


def ml(alpha, beta, z, dps=None):
    alpha, beta, z = mp.mpf(alpha), mp.mpf(beta), mp.mpf(z)
    # largest term ~ exp(|z|^(1/alpha)); add digits accordingly
    extra = int(float(abs(z)) ** (1.0 / float(alpha)) / 2.3) + 40
    with mp.workdps(dps or extra):
        s = mp.mpf(0)
        k = 0
        while True:
            t = z**k * mp.rgamma(alpha * k + beta)
            s += t
            if k > 10 and abs(t) < mp.mpf(10) ** (-(extra + 5)) * max(abs(s), mp.mpf(10) ** -300):
                break
            k += 1
        return +s


if __name__ == "__main__":
    mp.mp.dps = 30
    cases = [
        ("E_{0.5,1}(-2) = e^4 erfc 2", mp.e**4 * mp.erfc(2)),
        ("E_{0.5,1}(-2) series", ml(0.5, 1, -2)),
        ("E_{0.75,1}(-100)", ml(0.75, 1, -100)),
        ("E_{0.75,0.75}(-2)", ml(0.75, 0.75, -2)),
        ("E_{0.75,1}(-2)", ml(0.75, 1, -2)),
        ("E_{0.75,0.75}(-2*2^0.75)", ml(0.75, 0.75, -2 * mp.mpf(2) ** 0.75)),
        ("E_{0.6,0.6}(-30)", ml(0.6, 0.6, -30)),
        ("E_{0.9,0.9}(-20)", ml(0.9, 0.9, -20)),
        ("E_{0.95,1.95}(-7)", ml(0.95, 1.95, -7)),
        ("E_{0.3,1}(-5)", ml(0.3, 1, -5)),
        ("E_{0.8,1.8}(-60)", ml(0.8, 1.8, -60)),
        ("E_{0.75,2.75}(-3)", ml(0.75, 2.75, -3)),
        ("E_{1,2.5}(-10)", ml(1, 2.5, -10)),
        ("E_{1,0.5}(-4)", ml(1, 0.5, -4)),
        ("E_{0.75,0.75}(0.9)", ml(0.75, 0.75, 0.9)),
        ("E_{0.99985,0.3}(-1.6)", ml(0.99985, 0.3, -1.6)),
        ("E_{0.999,1}(-20)", ml(0.999, 1, -20)),
        ("E_{0.995,0.995}(-45)", ml(0.995, 0.995, -45)),
        ("1/Gamma(0.75)", mp.rgamma(0.75)),
        ("1/Gamma(1.75)", mp.rgamma(1.75)),
    ]
    for name, v in cases:
        print(f"{name:32s} {mp.nstr(v, 20)}")
