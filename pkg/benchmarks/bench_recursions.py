"""Compare the compiled recursion kernels against the pure-Python fallback.

Run: python benchmarks/bench_recursions.py
"""

import timeit

import numpy as np

from dpdmon import _recursions_py as pure

try:
    from dpdmon import _recursions as compiled
except ImportError:
    compiled = None


def _time(fn, repeat=5, number=10):
    return min(timeit.Timer(fn).repeat(repeat, number)) / number


def main():
    rng = np.random.default_rng(12345)
    nobs = 10_000
    theta = np.array([0.2, 0.2, 0.6])
    x = rng.standard_normal(nobs)
    eps = rng.standard_normal(nobs)
    x2l = np.array([1.0])
    s2l = np.array([1.0])
    ds2l = np.zeros((1, 3))
    G = rng.standard_normal((nobs, 3))

    cases = [
        ("garch_path", lambda mod: mod.garch_path(theta, 1, 1, x, x2l, s2l, ds2l)),
        ("garch_simulate", lambda mod: mod.garch_simulate(theta, 1, 1, eps, x2l, s2l)),
        ("kahan_cumsum", lambda mod: mod.kahan_cumsum(G)),
    ]

    print(f"nobs = {nobs}, GARCH(1,1)")
    for name, call in cases:
        t_pure = _time(lambda: call(pure))
        line = f"{name:16s} pure {1e3 * t_pure:9.3f} ms"
        if compiled is not None:
            t_comp = _time(lambda: call(compiled))
            line += f"   compiled {1e3 * t_comp:8.4f} ms   speedup {t_pure / t_comp:8.1f}x"
            out_p, out_c = call(pure), call(compiled)
            if not isinstance(out_p, tuple):
                out_p, out_c = (out_p,), (out_c,)
            same = all(np.array_equal(a, b) for a, b in zip(out_p, out_c))
            line += f"   bitwise match: {same}"
        else:
            line += "   (extension not built)"
        print(line)


if __name__ == "__main__":
    main()
