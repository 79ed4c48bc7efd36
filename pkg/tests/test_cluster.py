import pytest
from hypothesis import given, settings, strategies as st

from elasticpool.cluster import Cluster, ClusterConfig, MisuseError


def test_grants_lowest_ids_first():
    c = Cluster(ClusterConfig(total_slices=8))
    assert [s.slice_id for s in c.request_slices(3)] == [0, 1, 2]
    c.release_slice(1)
    assert [s.slice_id for s in c.request_slices(2)] == [1, 3]


def test_partial_grant_when_short():
    c = Cluster(ClusterConfig(total_slices=4))
    c.request_slices(3)
    assert len(c.request_slices(5)) == 1
    assert c.request_slices(1) == []


def test_request_must_be_positive():
    c = Cluster(ClusterConfig(total_slices=4))
    with pytest.raises(ValueError):
        c.request_slices(0)


def test_utilization_ratio():
    c = Cluster(ClusterConfig(total_slices=8))
    c.request_slices(6)
    assert c.utilization() == 0.75


def test_double_release_and_unknown_slice_are_misuse():
    c = Cluster(ClusterConfig(total_slices=4))
    (s,) = c.request_slices(1)
    c.release_slice(s.slice_id)
    with pytest.raises(MisuseError):
        c.release_slice(s.slice_id)
    with pytest.raises(MisuseError):
        c.release_slice(99)


def test_watermarks_are_edge_triggered():
    c = Cluster(ClusterConfig(total_slices=10, admin_high_watermark=0.9,
                              admin_low_watermark=0.1))
    granted = c.request_slices(9)
    assert c.events.select("cluster_watermark") == []   # exactly at 0.9 is not above
    extra = c.request_slices(1)
    ups = c.events.select("cluster_watermark", direction="above")
    assert len(ups) == 1 and ups[0]["utilization"] == 1.0
    c.release_slice(extra[0].slice_id)
    (again,) = c.request_slices(1)
    assert len(c.events.select("cluster_watermark", direction="above")) == 2
    for s in granted:
        c.release_slice(s.slice_id)
    assert c.events.select("cluster_watermark", direction="below") == []  # 0.1 is not below
    c.release_slice(again.slice_id)
    downs = c.events.select("cluster_watermark", direction="below")
    assert len(downs) == 1


def test_bad_config_rejected():
    with pytest.raises(ValueError):
        ClusterConfig(total_slices=0).validate()
    with pytest.raises(ValueError):
        ClusterConfig(admin_low_watermark=0.95, admin_high_watermark=0.9).validate()


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.booleans(), st.integers(1, 5)), max_size=40))
def test_slices_are_conserved(ops):
    c = Cluster(ClusterConfig(total_slices=12))
    held = []
    for grab, n in ops:
        if grab:
            got = c.request_slices(n)
            assert len(got) == min(n, 12 - len(held))
            held.extend(s.slice_id for s in got)
        elif held:
            c.release_slice(held.pop(n % len(held)))
        assert c.granted_count() + c.free_count() == 12
        assert c.granted_count() == len(held) == len(set(held))
