import numpy as np

from dstlab.rng import RngStreams, derive_seed, stream


def test_same_name_same_stream():
    a = stream(1, "shuffle", "net1").integers(0, 1000, size=20)
    b = stream(1, "shuffle", "net1").integers(0, 1000, size=20)
    assert np.array_equal(a, b)


def test_different_names_different_streams():
    a = stream(1, "shuffle", "net1").integers(0, 1000, size=20)
    b = stream(1, "shuffle", "net2").integers(0, 1000, size=20)
    c = stream(1, "mixup", "net1").integers(0, 1000, size=20)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_different_master_seeds_differ():
    a = stream(1, "noise").integers(0, 1000, size=20)
    b = stream(2, "noise").integers(0, 1000, size=20)
    assert not np.array_equal(a, b)


def test_derive_seed_deterministic_and_name_sensitive():
    assert derive_seed(1, "noise") == derive_seed(1, "noise")
    assert derive_seed(1, "noise") != derive_seed(1, "shuffle")
    assert derive_seed(1, "noise") != derive_seed(2, "noise")


def test_derive_seed_pinned_value():
    # Frozen regression value: a change here silently relabels every
    # dataset ever generated from a master seed, so it must not move.
    assert derive_seed(1, "noise") == 1867302726


def test_from_master_builds_distinct_streams():
    streams = RngStreams.from_master(7)
    draws = [
        gen.integers(0, 2**62)
        for gen in (
            streams.init_net1,
            streams.init_net2,
            streams.shuffle[0],
            streams.shuffle[1],
            streams.mixup[0],
            streams.mixup[1],
            streams.wrong_branch[0],
            streams.wrong_branch[1],
        )
    ]
    assert len(set(int(d) for d in draws)) == len(draws)


def test_streams_are_mutually_independent():
    # Consuming one stream must not shift a sibling stream's draws.
    fresh = stream(3, "mixup", "net1").uniform(size=5)
    streams = RngStreams.from_master(3)
    streams.shuffle[0].uniform(size=1000)
    streams.wrong_branch[1].uniform(size=137)
    assert np.array_equal(streams.mixup[0].uniform(size=5), fresh)
