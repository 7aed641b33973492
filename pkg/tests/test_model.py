import io
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bayestree.model import (
    Dataset, DivergenceClass, ModelParams, NodeAddress, compactify, dump_dataset,
    load_dataset, partition,
)

unit_points = st.lists(
    st.floats(min_value=0.0, max_value=1.0, exclude_max=True, allow_nan=False), max_size=40
)


def test_params_defaults_and_u():
    p = ModelParams()
    assert (p.s, p.alpha, p.u) == (0.5, 1.0, 0.5)
    assert ModelParams(s=0.3).u + 0.3 == 1.0


@pytest.mark.parametrize("kw", [{"s": -0.1}, {"s": 1.1}, {"alpha": 0.0}, {"alpha": -1.0},
                                {"alpha": math.inf}, {"s": math.nan}])
def test_params_rejects_bad_values(kw):
    with pytest.raises(ValueError):
        ModelParams(**kw)


def test_load_dataset_sorts_and_groups():
    d = load_dataset(io.StringIO("0.5\n0.25\n0.5\n"))
    assert d.points.tolist() == [0.25, 0.5, 0.5]
    assert d.n == 3
    assert d.multiplicities == [(0.25, 1), (0.5, 2)]


def test_load_dataset_empty_comments_blank():
    assert load_dataset(io.StringIO("")).n == 0
    d = load_dataset(io.StringIO("# header\n\n0.1  # trailing\n   \n"))
    assert d.points.tolist() == [0.1]


def test_load_dataset_rejects_one():
    with pytest.raises(ValueError, match="outside"):
        load_dataset(io.StringIO("1.0\n"))


def test_load_dataset_reports_line_number():
    with pytest.raises(ValueError, match="line 3"):
        load_dataset(io.StringIO("0.1\n0.2\nabc\n"))


def test_load_dataset_with_compactification():
    d = load_dataset(io.StringIO("2\n4\ninf\n"), compactify_mode="reciprocal")
    assert d.points.tolist() == [0.0, 0.25, 0.5]
    with pytest.raises(ValueError, match="line 1"):
        load_dataset(io.StringIO("0.5\n"), compactify_mode="reciprocal")


def test_dump_load_roundtrip_is_bit_exact():
    rng = np.random.default_rng(5)
    d = Dataset(rng.random(50))
    buf = io.StringIO()
    dump_dataset(d, buf)
    assert load_dataset(io.StringIO(buf.getvalue())) == d


def test_negative_zero_groups_with_zero():
    d = Dataset([-0.0, 0.0])
    assert d.multiplicities == [(0.0, 2)]


@pytest.mark.parametrize("bad", [[1.0], [-0.1], [math.nan], [math.inf]])
def test_dataset_domain(bad):
    with pytest.raises(ValueError):
        Dataset(bad)


def test_compactify_examples():
    assert compactify(2.0, "reciprocal") == 0.5
    assert compactify(math.inf, "reciprocal") == 0.0
    assert compactify(0.0, "rational") == 0.5
    assert compactify(-math.inf, "rational") == 0.0


@pytest.mark.parametrize("x, mode", [(1.0, "reciprocal"), (0.5, "reciprocal"), (math.inf, "rational"),
                                     (math.nan, "rational"), (1.0, "other")])
def test_compactify_domain_errors(x, mode):
    with pytest.raises(ValueError):
        compactify(x, mode)


@given(st.floats(min_value=-1e6, max_value=1e6))
def test_rational_compactify_inverts_the_map(x):
    y = compactify(x, "rational")
    assert 0.0 < y < 1.0
    back = (2 * y - 1) / (y * (1 - y))
    assert back == pytest.approx(x, rel=1e-9, abs=1e-9)


@given(st.floats(min_value=-1e12, max_value=1e12), st.floats(min_value=-1e12, max_value=1e12))
def test_rational_compactify_increasing(a, b):
    if a < b:
        assert compactify(a, "rational") <= compactify(b, "rational")
    if a < b and abs(b - a) > 1e-6 * max(1.0, abs(a), abs(b)) and max(abs(a), abs(b)) < 1e6:
        assert compactify(a, "rational") < compactify(b, "rational")


@given(st.floats(min_value=1.0, max_value=1e300, exclude_min=True),
       st.floats(min_value=1.0, max_value=1e300, exclude_min=True))
def test_reciprocal_compactify_decreasing(a, b):
    if a < b:
        assert compactify(a, "reciprocal") >= compactify(b, "reciprocal")
        assert Fraction(compactify(a, "reciprocal")) > 0


def test_partition_examples():
    left, right = partition(Dataset([0.25, 0.5, 0.75]))
    assert left.points.tolist() == [0.5]
    assert right.points.tolist() == [0.0, 0.5]
    left, right = partition(Dataset([]))
    assert left.n == right.n == 0
    left, right = partition(Dataset([0.5, 0.5]))
    assert left.n == 0 and right.points.tolist() == [0.0, 0.0]


@given(unit_points)
def test_partition_preserves_points_and_multiplicities(pts):
    d = Dataset(pts)
    left, right = partition(d)
    assert left.n + right.n == d.n
    back = sorted([x / 2 for x in left.points] + [(x + 1) / 2 for x in right.points])
    assert back == d.points.tolist()
    mults = sorted(m for _, m in d.multiplicities)
    assert sorted(m for _, m in left.multiplicities + right.multiplicities) == mults


@settings(max_examples=50)
@given(unit_points, st.integers(min_value=0, max_value=6))
def test_counts_over_a_level_sum_to_n(pts, l):
    d = Dataset(pts)
    total = sum(d.count(NodeAddress(format(i, f"0{l}b") if l else "")) for i in range(2**l))
    assert total == d.n


@given(unit_points, st.text(alphabet="01", max_size=8))
def test_counts_add_over_children(pts, bits):
    d = Dataset(pts)
    z = NodeAddress(bits)
    a, b = z.children()
    assert d.count(z) == d.count(a) + d.count(b)


def test_node_address_geometry():
    z = NodeAddress("101")
    assert z.depth == 3
    assert z.interval() == (Fraction(5, 8), Fraction(6, 8))
    a, b = z.children()
    assert a.width() == b.width() == z.width() / 2
    assert a.interval()[0] == z.interval()[0] and b.interval()[1] == z.interval()[1]
    assert NodeAddress("").interval() == (0, 1)
    assert NodeAddress.of_point(0.7, 3).bits == "101"
    assert NodeAddress.of_point(0.5, 1).bits == "1"
    with pytest.raises(ValueError):
        NodeAddress("012")


def test_divergence_class_truthiness():
    assert not DivergenceClass()
    assert DivergenceClass(((0.3, 3),)).to_list() == [[0.3, 3]]
