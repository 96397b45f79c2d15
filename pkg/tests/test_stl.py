import numpy as np
import pytest

from decaf.stl import (And, Always, Atom, Eventually, Not, Or, ParseError,
                       Trace, Until, parse, robustness, verdict)


def make_trace(dt=1.0, **channels):
    n = len(next(iter(channels.values())))
    return Trace(times=np.arange(n) * dt, channels={k: np.asarray(v, float)
                                                    for k, v in channels.items()})


def const_trace(name, value, n=12, dt=1.0):
    return make_trace(dt=dt, **{name: np.full(n, float(value))})


class TestParse:
    def test_at_requirement(self):
        phi = parse("always[0,10] (RPM < 4750)")
        assert isinstance(phi, Always)
        assert (phi.a, phi.b) == (0.0, 10.0)
        assert phi.child == Atom("RPM", "<", 4750.0)

    def test_acc_requirement(self):
        phi = parse("always[0,50] (d_rel >= 50)")
        assert isinstance(phi, Always)
        assert phi.child == Atom("d_rel", ">=", 50.0)

    def test_redundant_parens(self):
        assert parse("((x > 0))") == parse("x > 0")

    def test_print_parse_fixed_point(self):
        texts = [
            "always[0,10] (RPM < 4750)",
            "(x > 0) and (y <= 1.5) or not (z >= -2)",
            "(a < 1) until[2,5] (b > 3)",
            "eventually[0,3] ((x > 0) -> (y < 1))",
        ]
        for text in texts:
            phi = parse(text)
            assert parse(str(phi)) == phi

    def test_syntax_errors_carry_position(self):
        for bad in ["always (x > 0)", "x >", "x ! 3", "(x > 0", "x > 0 y",
                    "always[5,2] (x > 0)", "x = 3"]:
            with pytest.raises(ParseError):
                parse(bad)


class TestRobustness:
    def test_constant_margin(self):
        tr = const_trace("RPM", 4700.0)
        assert robustness(parse("always[0,10] (RPM < 4750)"), tr) == 50.0

    def test_worst_case_margin(self):
        rpm = np.full(12, 4000.0)
        rpm[5] = 4800.0
        tr = make_trace(RPM=rpm)
        assert robustness(parse("always[0,10] (RPM < 4750)"), tr) == -50.0

    def test_atom_forms(self):
        tr = const_trace("x", 3.0)
        assert robustness(parse("x >= 1"), tr) == 2.0
        assert robustness(parse("x > 1"), tr) == 2.0
        assert robustness(parse("x <= 1"), tr) == -2.0
        assert robustness(parse("x < 10"), tr) == 7.0

    def test_min_max_laws(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            tr = make_trace(x=rng.normal(size=8), y=rng.normal(size=8))
            a, b = parse("x > 0"), parse("y > 0")
            ra, rb = robustness(a, tr), robustness(b, tr)
            assert robustness(And(a, b), tr) == min(ra, rb)
            assert robustness(Or(a, b), tr) == max(ra, rb)

    def test_negation_antisymmetry(self):
        rng = np.random.default_rng(1)
        phi = parse("always[0,3] (x > 0.5)")
        for _ in range(20):
            tr = make_trace(x=rng.normal(size=10))
            assert robustness(Not(phi), tr) == -robustness(phi, tr)

    def test_atom_monotone_in_channel(self):
        rng = np.random.default_rng(2)
        phi = parse("s >= 1")
        for _ in range(20):
            x = rng.normal(size=6)
            bump = np.abs(rng.normal(size=6))
            assert robustness(phi, make_trace(s=x + bump)) >= \
                robustness(phi, make_trace(s=x))

    def test_trace_too_short(self):
        tr = const_trace("x", 0.0, n=5)
        with pytest.raises(ValueError):
            robustness(parse("always[0,10] (x > 0)"), tr)

    def test_unknown_channel(self):
        with pytest.raises(KeyError):
            robustness(parse("nope > 0"), const_trace("x", 0.0))

    def test_t0_offset(self):
        x = np.array([0.0, 0, 0, 5, 5, 5, 5, 5])
        tr = make_trace(x=x)
        assert robustness(parse("always[0,3] (x > 1)"), tr, t0=3.0) == 4.0
        assert robustness(parse("always[0,3] (x > 1)"), tr, t0=0.0) == -1.0


# independent recursive-definition oracle --------------------------------

def oracle_rho(phi, tr, i):
    times, dt = tr.times, tr.dt
    n = len(times)

    def in_window(j, a, b):
        t = times[j] - times[i]
        return a - 1e-12 <= t <= b + 1e-12

    name = type(phi).__name__
    if name == "Atom":
        s = tr.channels[phi.signal][i]
        return s - phi.bound if phi.op in (">", ">=") else phi.bound - s
    if name == "Not":
        return -oracle_rho(phi.child, tr, i)
    if name == "And":
        return min(oracle_rho(phi.left, tr, i), oracle_rho(phi.right, tr, i))
    if name == "Or":
        return max(oracle_rho(phi.left, tr, i), oracle_rho(phi.right, tr, i))
    if name == "Implies":
        return max(-oracle_rho(phi.left, tr, i), oracle_rho(phi.right, tr, i))
    if name == "Always":
        vals = [oracle_rho(phi.child, tr, j) for j in range(i, n)
                if in_window(j, phi.a, phi.b)]
        return min(vals) if vals else float("inf")
    if name == "Eventually":
        vals = [oracle_rho(phi.child, tr, j) for j in range(i, n)
                if in_window(j, phi.a, phi.b)]
        return max(vals) if vals else float("-inf")
    if name == "Until":
        best = float("-inf")
        for j in range(i, n):
            if not in_window(j, phi.a, phi.b):
                continue
            left_prefix = [oracle_rho(phi.left, tr, k) for k in range(i, j)]
            prefix = min(left_prefix) if left_prefix else float("inf")
            best = max(best, min(oracle_rho(phi.right, tr, j), prefix))
        return best
    raise TypeError(name)


def random_formula(rng, depth, channels):
    if depth == 0 or rng.random() < 0.3:
        return Atom(str(rng.choice(channels)),
                    str(rng.choice(["<", "<=", ">", ">="])),
                    float(rng.normal()))
    kind = rng.choice(["not", "and", "or", "always", "eventually", "until"])
    if kind == "not":
        return Not(random_formula(rng, depth - 1, channels))
    if kind in ("and", "or"):
        cls = And if kind == "and" else Or
        return cls(random_formula(rng, depth - 1, channels),
                   random_formula(rng, depth - 1, channels))
    a = float(rng.integers(0, 3))
    b = a + float(rng.integers(0, 4))
    if kind == "until":
        return Until(a, b, random_formula(rng, depth - 1, channels),
                     random_formula(rng, depth - 1, channels))
    cls = Always if kind == "always" else Eventually
    return cls(a, b, random_formula(rng, depth - 1, channels))


class TestOracleEquivalence:
    def test_random_formulas_match_oracle(self):
        rng = np.random.default_rng(17)
        for _ in range(200):
            n = int(rng.integers(12, 30))
            tr = make_trace(x=rng.normal(size=n), y=rng.normal(size=n))
            phi = random_formula(rng, int(rng.integers(1, 4)), ["x", "y"])
            if phi.horizon() > tr.end:
                continue
            got = robustness(phi, tr)
            want = oracle_rho(phi, tr, 0)
            assert got == pytest.approx(want, abs=1e-9)


# Boolean-semantics soundness --------------------------------------------

def oracle_bool(phi, tr, i):
    name = type(phi).__name__
    times = tr.times
    n = len(times)

    def in_window(j, a, b):
        t = times[j] - times[i]
        return a - 1e-12 <= t <= b + 1e-12

    if name == "Atom":
        s = tr.channels[phi.signal][i]
        return {"<": s < phi.bound, "<=": s <= phi.bound,
                ">": s > phi.bound, ">=": s >= phi.bound}[phi.op]
    if name == "Not":
        return not oracle_bool(phi.child, tr, i)
    if name == "And":
        return oracle_bool(phi.left, tr, i) and oracle_bool(phi.right, tr, i)
    if name == "Or":
        return oracle_bool(phi.left, tr, i) or oracle_bool(phi.right, tr, i)
    if name == "Implies":
        return (not oracle_bool(phi.left, tr, i)) or oracle_bool(phi.right, tr, i)
    if name == "Always":
        return all(oracle_bool(phi.child, tr, j) for j in range(i, n)
                   if in_window(j, phi.a, phi.b))
    if name == "Eventually":
        return any(oracle_bool(phi.child, tr, j) for j in range(i, n)
                   if in_window(j, phi.a, phi.b))
    if name == "Until":
        for j in range(i, n):
            if not in_window(j, phi.a, phi.b):
                continue
            if oracle_bool(phi.right, tr, j) and \
                    all(oracle_bool(phi.left, tr, k) for k in range(i, j)):
                return True
        return False
    raise TypeError(name)


class TestSoundness:
    def test_sign_agrees_with_boolean_semantics(self):
        rng = np.random.default_rng(23)
        for _ in range(150):
            n = int(rng.integers(10, 25))
            tr = make_trace(x=rng.normal(size=n), y=rng.normal(size=n))
            phi = random_formula(rng, int(rng.integers(1, 4)), ["x", "y"])
            if phi.horizon() > tr.end:
                continue
            rho = robustness(phi, tr)
            if rho > 0:
                assert oracle_bool(phi, tr, 0)
            elif rho < 0:
                assert not oracle_bool(phi, tr, 0)


class TestVerdict:
    def test_negative_fails(self):
        assert verdict(-0.1) == "fail"

    def test_zero_passes(self):
        assert verdict(0.0) == "pass"

    def test_positive_passes(self):
        assert verdict(50.0) == "pass"

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            verdict(float("nan"))


class TestTrace:
    def test_rejects_nonuniform_sampling(self):
        with pytest.raises(ValueError):
            Trace(times=np.array([0.0, 1.0, 3.0]), channels={"x": np.zeros(3)})

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            Trace(times=np.arange(3.0), channels={"x": np.array([0.0, np.nan, 0.0])})

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            Trace(times=np.arange(3.0), channels={"x": np.zeros(4)})
