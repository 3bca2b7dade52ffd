"""Shared spec builders and strategies for the test suite."""
import numpy as np
from hypothesis import strategies as st

from coexist import band_spec, check_hypotheses, constant_spec

# criterion number -> (passed, title, detail); printed in the terminal summary
ACCEPTANCE_LOG = {}


def symmetric_spec(**overrides):
    """The running example: a0=b0=3, a1=b2=2, a2=b1=0.5, chi=0.1."""
    kw = dict(chi1=0.1, chi2=0.1)
    kw.update(overrides)
    return constant_spec(3.0, 2.0, 0.5, 3.0, 0.5, 2.0, **kw)


def h7_band_spec(**overrides):
    """a0 = b0 = 3 +/- 0.5 sin t, a1 = b2 = 2, a2 = b1 = 0.5, chi = 0.05."""
    kw = dict(realize="time", chi1=0.05, chi2=0.05)
    kw.update(overrides)
    return band_spec((2.5, 3.5), (2, 2), (0.5, 0.5), (2.5, 3.5), (0.5, 0.5), (2, 2), **kw)


def _band(rng, lo, hi, spread):
    a = rng.uniform(lo, hi)
    return a, a * (1.0 + rng.uniform(0.0, spread))


def random_spec(rng, chemotaxis=True):
    """Space-heterogeneous spec with random coefficient bands."""
    consts = {}
    if chemotaxis:
        consts = dict(chi1=rng.uniform(0, 0.5), chi2=rng.uniform(0, 0.5), k=rng.uniform(0.5, 2),
                      l=rng.uniform(0.5, 2), d3=rng.uniform(0.5, 2))
    return band_spec(_band(rng, 1, 5, 0.3), _band(rng, 1, 4, 0.3), _band(rng, 0.01, 1.5, 0.3),
                     _band(rng, 1, 5, 0.3), _band(rng, 0.01, 1.5, 0.3), _band(rng, 1, 4, 0.3), **consts)


def sample_specs(seed, count, accept, chemotaxis=True, max_tries=100_000):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(max_tries):
        spec = random_spec(rng, chemotaxis)
        if accept(spec):
            out.append(spec)
            if len(out) == count:
                return out
    raise RuntimeError("rejection sampling exhausted")


def h5_specs(seed, count):
    return sample_specs(seed, count, lambda s: check_hypotheses(s).h5)


def chi_zero_specs(seed, count):
    return sample_specs(seed, count, lambda s: check_hypotheses(s).cond_1_5, chemotaxis=False)


positive = st.floats(min_value=0.05, max_value=5.0, allow_nan=False, allow_infinity=False)
small = st.floats(min_value=0.0, max_value=1.0, allow_nan=False, allow_infinity=False)


@st.composite
def bands(draw, lo=0.05, hi=5.0):
    a = draw(st.floats(min_value=lo, max_value=hi))
    spread = draw(st.floats(min_value=0.0, max_value=0.5))
    return a, a * (1.0 + spread)


@st.composite
def specs(draw, chemotaxis=True):
    consts = {}
    if chemotaxis:
        consts = dict(chi1=draw(small), chi2=draw(small), k=draw(positive), l=draw(positive),
                      d3=draw(positive))
    return band_spec(draw(bands()), draw(bands()), draw(bands(0.01, 2.0)), draw(bands()),
                     draw(bands(0.01, 2.0)), draw(bands()), **consts)
