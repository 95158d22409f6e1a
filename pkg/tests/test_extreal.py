import math

import pytest

from hotwall.extreal import INF, XR, ZERO, as_xr


def test_zero_times_inf_is_zero():
    assert ZERO * INF == ZERO
    assert INF * ZERO == ZERO
    assert XR(0.0) * XR(math.inf) == XR(0.0)


def test_basic_arithmetic():
    assert XR(2.0) + XR(3.0) == XR(5.0)
    assert XR(2.0) * XR(3.0) == XR(6.0)
    assert XR(2.0) + INF == INF
    assert XR(2.0) * INF == INF


def test_sub_conventions():
    assert XR(5.0).sub(XR(3.0)) == XR(2.0)
    assert INF.sub(INF) == ZERO
    assert INF.sub(XR(3.0)) == INF
    with pytest.raises(ValueError):
        XR(1.0).sub(XR(2.0))


def test_ordering():
    assert XR(1.0) < INF
    assert XR(1.0) <= XR(1.0)
    assert INF <= INF
    assert not (INF < INF)


def test_domain():
    with pytest.raises(ValueError):
        XR(-1.0)
    with pytest.raises(ValueError):
        XR(math.nan)


def test_as_xr():
    assert as_xr(2) == XR(2.0)
    assert as_xr(XR(3.0)) is not None
    assert float(as_xr(math.inf)) == math.inf
