"""Arbitrary-precision reference values frozen into tests/special_functions.rs."""

import mpmath as mp

mp.mp.dps = 40

XS = [-15, -10, -5, -1, 0, 1, 5, 10]
for x in XS:
    x = mp.mpf(x)
    print("ai", int(x), mp.nstr(mp.airyai(x), 20), mp.nstr(mp.airyai(x, 1), 20))

for x in [-10, -2, 0, 1, 3, 8]:
    x = mp.mpf(x)
    up = mp.quad(mp.airyai, [x, 0, mp.inf]) if x < 0 else mp.quad(mp.airyai, [x, mp.inf])
    # int_x^inf Ai^2 = Ai'(x)^2 - x Ai(x)^2
    sq = mp.airyai(x, 1) ** 2 - x * mp.airyai(x) ** 2
    print("tail", int(x), mp.nstr(up, 20), mp.nstr(sq, 20))

# oscillatory tail; sum between consecutive zeros of Ai
neg = mp.quadosc(lambda x: mp.airyai(-x), [0, mp.inf], zeros=lambda n: -mp.airyaizero(n))
print("neg_integral", mp.nstr(neg, 20))
for u in [0.5, 1.5, 3.7, 10.25]:
    print("gamma", u, mp.nstr(mp.gamma(u), 20))
print("beta", mp.nstr(mp.beta(0.5, 1), 20), mp.nstr(mp.beta(1, 1.5), 20))
