"""Hypothesis strategies shared by the test modules."""
from hypothesis import strategies as st

from sirhawkes.kernels import Family, KernelSpec

pos = st.floats(0.05, 5.0)


@st.composite
def kernels(draw, families=tuple(Family)):
    fam = draw(st.sampled_from(list(families)))
    kappa = draw(pos)
    if fam is Family.QEXP:
        return KernelSpec(fam, kappa, draw(st.floats(1.05, 4.0)))
    if fam is Family.POWERLAW:
        return KernelSpec(fam, kappa, draw(st.floats(0.1, 3.0)), draw(st.floats(0.1, 5.0)))
    return KernelSpec(fam, kappa, draw(pos))


@st.composite
def event_times(draw, min_size=2, max_size=25):
    gaps = draw(st.lists(st.floats(1e-3, 3.0), min_size=min_size - 1, max_size=max_size - 1))
    out, t = [0.0], 0.0
    for g in gaps:
        t += g
        out.append(t)
    return out
