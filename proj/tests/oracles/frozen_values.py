"""Regenerates the high-precision reference values frozen into the C++ tests.

Runs with mpmath at 50 digits, independently of the C++ code paths:
collinear equilibria come from mpmath.findroot on the symmetric reduced
gradient, ring radii from findroot on the scalar balance equation.
"""
import mpmath as mp

mp.mp.dps = 50


def carbon():
    eps, sig, b, k, q = map(mp.mpf, ("0.3", "0.35", "0.13", "255224", "0"))
    A = 4 * eps * sig**6 / (k * b**8)
    B = 4 * eps * sig**12 / (k * b**14)
    C = q / (k * b**3)
    return A, B, C


def U(x):
    return x - 2 * mp.sqrt(x)


def W(x, A, B, C):
    return B / x**6 - A / x**3 + C / mp.sqrt(x)


def energy(xs, A, B, C):
    n = len(xs)
    e = mp.mpf(0)
    for i in range(n):
        for j in range(i + 1, n):
            d2 = (xs[j] - xs[i]) ** 2
            if j == i + 1:
                e += U(d2)
            e += W(d2, A, B, C)
    return e


def collinear(n, A, B, C):
    h = n // 2
    odd = n % 2

    def expand(r):
        half = ([mp.mpf(0)] if odd else []) + list(r)
        return [-v for v in reversed(half[odd:])] + half

    def Up(x):
        return 1 - 1 / mp.sqrt(x)

    def Wp(x):
        return -6 * B / x**7 + 3 * A / x**4 - C / (2 * x ** mp.mpf("1.5"))

    def grad(*r):
        xs = expand(list(r))
        g = [mp.mpf(0)] * n
        for i in range(n):
            for j in range(i + 1, n):
                d = xs[j] - xs[i]
                f1 = Wp(d * d) + (Up(d * d) if j == i + 1 else 0)
                g[j] += 2 * d * f1
                g[i] -= 2 * d * f1
        return [g[n - h + i] for i in range(h)]

    start = [(i + (0.5 if not odd else 1.0)) for i in range(h)]
    r = mp.findroot(grad, start, maxsteps=200)
    return expand([r[i] for i in range(h)]) if h > 1 else expand([r])


def ring_radius(n, A, B, C):
    z = 2 * mp.pi / n
    s = [2 * mp.sin(k * mp.pi / n) for k in range(n)]

    def Wp(x):
        return -6 * B / x**7 + 3 * A / x**4 - C / (2 * x ** mp.mpf("1.5"))

    def S(a):
        return 1 / (a * s[1]) - sum(Wp(a * a * s[k] ** 2) * s[k] ** 2 for k in range(1, n)) / (2 * s[1] ** 2) - 1

    return mp.findroot(S, 1.0)


if __name__ == "__main__":
    A, B, C = carbon()
    print("carbon A", mp.nstr(A, 25), "B", mp.nstr(B, 25), "C", C)
    equi = [mp.mpf(i) - mp.mpf("2.5") for i in range(6)]
    print("E equispaced n=6 carbon", mp.nstr(energy(equi, A, B, C), 25))
    for name, (a, b) in {"exact": (A, B), "rounded": (mp.mpf("0.1"), mp.mpf(40))}.items():
        xs = collinear(6, a, b, 0)
        print(name, "collinear n=6", [mp.nstr(v, 20) for v in xs[3:]])
        xs5 = collinear(5, a, b, 0)
        print(name, "collinear n=5", [mp.nstr(v, 20) for v in xs5[2:]])
        print(name, "ring n=6 radius", mp.nstr(ring_radius(6, a, b, 0), 20))
