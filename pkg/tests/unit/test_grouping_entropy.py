"""Unit tests for the joint-entropy analysis of direction groupings."""

import numpy as np
import pytest

from dcpkit.core.descriptors import SamplingGeometry, directional_codes
from dcpkit.core.errors import ConfigError
from dcpkit.services.grouping_entropy import (
    DUAL_CROSS,
    EmptyCorpusError,
    canonicalize,
    entropy_scan,
    enumerate_groupings,
    joint_entropy,
    mode_id,
    radius_sweep,
    shannon_entropy,
    subset_entropy,
)


@pytest.mark.unit
class TestGroupings:
    def test_thirty_five_distinct_partitions(self):
        modes = enumerate_groupings()
        assert len(modes) == 35
        keys = {(m.subset_a, m.subset_b) for m in modes}
        assert len(keys) == 35
        for m in modes:
            assert 0 in m.subset_a
            assert set(m.subset_a).isdisjoint(m.subset_b)
            assert set(m.subset_a) | set(m.subset_b) == set(range(8))

    def test_ids_are_positions(self):
        assert [m.canonical_id for m in enumerate_groupings()] == list(range(35))

    def test_dual_cross_mode(self):
        dual = [m for m in enumerate_groupings() if m.is_dual_cross]
        assert len(dual) == 1
        assert (dual[0].subset_a, dual[0].subset_b) == DUAL_CROSS
        assert mode_id((1, 3, 5, 7), (6, 4, 2, 0)) == dual[0].canonical_id == 20

    def test_canonicalize_rejects_non_partitions(self):
        with pytest.raises(ConfigError):
            canonicalize((0, 1, 2), (3, 4, 5, 6, 7))
        with pytest.raises(ConfigError):
            canonicalize((0, 1, 2, 3), (3, 4, 5, 6))


@pytest.mark.unit
class TestEntropy:
    def test_shannon_entropy_bits(self):
        assert shannon_entropy([1, 1, 1, 1]) == pytest.approx(2.0)
        assert shannon_entropy([5, 0, 0]) == 0.0
        assert shannon_entropy([]) == 0.0

    def test_constant_image_has_zero_entropy(self, constant_image):
        g = SamplingGeometry(1.0, 2.0)
        for m in enumerate_groupings():
            assert joint_entropy(constant_image, g, m.subset_a) == 0.0
            assert joint_entropy(constant_image, g, m.subset_b) == 0.0

    def test_permutation_invariant(self, random_image):
        g = SamplingGeometry(2.0, 3.0)
        assert joint_entropy(random_image, g, (0, 2, 4, 6)) == pytest.approx(
            joint_entropy(random_image, g, (6, 0, 4, 2)), abs=1e-12
        )

    def test_subadditive_and_bounded(self, random_image):
        g = SamplingGeometry(2.0, 3.0)
        codes = directional_codes(random_image, g)
        marginals = [shannon_entropy(np.bincount(codes[d].ravel(), minlength=4)) for d in range(8)]
        for m in enumerate_groupings():
            for subset in (m.subset_a, m.subset_b):
                h = subset_entropy(codes, subset)
                assert 0.0 <= h <= 8.0
                assert h <= sum(marginals[d] for d in subset) + 1e-9

    def test_invalid_subset(self, random_image):
        with pytest.raises(ConfigError):
            joint_entropy(random_image, SamplingGeometry(), (0, 0, 1, 2))


@pytest.mark.unit
class TestEntropyScan:
    def test_report_shape(self, random_images):
        report = entropy_scan(random_images[:4], SamplingGeometry(1.0, 2.0))
        assert report.corpus_size == 4
        assert len(report.per_mode) == 35
        assert sorted(report.ranking) == list(range(35))
        assert report.dual_cross_id == 20
        values = [report.per_mode[i] for i in report.ranking]
        assert values == sorted(values, reverse=True)
        assert all(0.0 <= v <= 16.0 for v in values)

    def test_thread_count_invariant(self, random_images):
        g = SamplingGeometry(2.0, 3.0)
        one = entropy_scan(random_images, g, threads=1)
        many = entropy_scan(random_images, g, threads=4)
        assert one.model_dump_json() == many.model_dump_json()

    def test_empty_corpus(self):
        with pytest.raises(EmptyCorpusError):
            entropy_scan([], SamplingGeometry())

    def test_radius_sweep_keeps_order(self, random_images):
        reports = radius_sweep(random_images[:2], [(2.0, 3.0), (1.0, 2.0)])
        assert [r.radii for r in reports] == [(2.0, 3.0), (1.0, 2.0)]
