"""Tests for counter-based noise addressing"""

import numpy as np
import pytest

from kinetics.exceptions import ModelValidationError
from kinetics.noise import NoiseRole, NoiseStream


def test_same_address_same_variates():
    a = NoiseStream(42).for_replica(3, NoiseRole.DYNAMICS)
    b = NoiseStream(42).for_replica(3, NoiseRole.DYNAMICS)
    assert np.array_equal(a.block(17, 5, 2), b.block(17, 5, 2))


def test_steps_are_random_access():
    """Reading step 9 first or last gives the same block"""
    stream = NoiseStream(7)
    late = stream.block(9, 4, 1)
    for step in range(9):
        stream.block(step, 4, 1)
    assert np.array_equal(stream.block(9, 4, 1), late)


def test_address_does_not_depend_on_particle_count():
    stream = NoiseStream(1)
    assert np.array_equal(stream.block(3, 10, 2)[:4], stream.block(3, 4, 2))


def test_single_variate_matches_block():
    stream = NoiseStream(99).spawn(0, 1)
    block = stream.block(5, 6, 3)
    assert stream.variate(4, 5, 2, 3) == block[4, 2]


def test_streams_differ_by_step_replica_and_role():
    root = NoiseStream(5)
    base = root.for_replica(0, NoiseRole.DYNAMICS).block(0, 8, 1)
    assert not np.array_equal(base, root.for_replica(0, NoiseRole.DYNAMICS).block(1, 8, 1))
    assert not np.array_equal(base, root.for_replica(1, NoiseRole.DYNAMICS).block(0, 8, 1))
    assert not np.array_equal(base, root.for_replica(0, NoiseRole.INITIAL).block(0, 8, 1))


def test_variates_are_standard_normal():
    z = NoiseStream(2024).block(0, 100_000, 1).ravel()
    assert np.isfinite(z).all()
    assert abs(z.mean()) < 4 / np.sqrt(z.size)
    assert abs(z.var() - 1.0) < 4 * np.sqrt(2.0 / z.size)


@pytest.mark.parametrize("seed", [-1, 2 ** 64])
def test_seed_must_fit_in_64_bits(seed):
    with pytest.raises(ModelValidationError):
        NoiseStream(seed)


def test_negative_step_rejected():
    with pytest.raises(ModelValidationError):
        NoiseStream(1).block(-1, 2, 1)
