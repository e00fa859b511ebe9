"""Unit tests for MD-DCPs blocks and the MDML feature vectors."""

import numpy as np
import pytest

from dcpkit.core.errors import ConfigError
from dcpkit.core.imaging import MDML_180, GrayImage, normalize_to_preset
from dcpkit.models.enums import FeatureName, GeometryKind
from dcpkit.models.schemas import ExperimentConfig
from dcpkit.services.representation import (
    HOLISTIC_CROPS,
    ComponentSpec,
    GeometryError,
    MdDcpsConfig,
    Rect,
    build_holistic,
    build_landmark_feature,
    build_mdml,
    default_components,
    encode_face,
    feature_from_face,
    md_dcps_region,
    patch_indices,
)

EXPECTED_LENGTHS = {
    FeatureName.H1: 165_888,
    FeatureName.H2: 81 * 2048,
    FeatureName.H3: 688_128,
    FeatureName.C1: 10 * 16 * 2048,
    FeatureName.C2: 12 * 16 * 2048,
    FeatureName.C3: 11 * 16 * 2048,
    FeatureName.C4: 11 * 16 * 2048,
    FeatureName.C5: 9 * 16 * 2048,
    FeatureName.C6: 18 * 16 * 2048,
}


@pytest.fixture
def md_cfg() -> MdDcpsConfig:
    return MdDcpsConfig()


@pytest.fixture
def canvas(rng) -> GrayImage:
    return GrayImage(rng.integers(0, 256, size=MDML_180.output_size).astype(np.float64))


@pytest.mark.unit
class TestComponents:
    def test_h3_landmarks(self):
        h3 = default_components()[FeatureName.H3]
        assert h3.landmark_indices == (
            0, 2, 4, 5, 7, 9, 19, 22, 25, 28, 10, 13, 14, 16, 18, 31, 34, 37, 40, 43, 46,
        )

    def test_component_counts(self):
        counts = {n: len(s.landmark_indices) for n, s in default_components().items()}
        assert counts == {
            FeatureName.H3: 21,
            FeatureName.C1: 10,
            FeatureName.C2: 12,
            FeatureName.C3: 11,
            FeatureName.C4: 11,
            FeatureName.C5: 9,
            FeatureName.C6: 18,
        }

    def test_wrong_count_rejected(self):
        with pytest.raises(ConfigError):
            ComponentSpec(FeatureName.C5, tuple(range(8)))

    @pytest.mark.parametrize("indices", [(), (1, 1, 2), (0, 49)])
    def test_invalid_indices_rejected(self, indices):
        with pytest.raises(ConfigError):
            ComponentSpec(FeatureName.C1, indices)

    def test_block_length(self, md_cfg):
        assert md_cfg.block_length == 2048
        assert MdDcpsConfig(include_unfiltered=True).block_length == 2560

    def test_from_experiment(self):
        cfg = MdDcpsConfig.from_experiment(ExperimentConfig.from_preset("mdml180"))
        assert (cfg.r_in, cfg.r_ex) == (2.0, 3.0)
        assert cfg.photometric is True


@pytest.mark.unit
class TestGeometry:
    def test_crop_sizes(self):
        h1, h2 = HOLISTIC_CROPS[FeatureName.H1], HOLISTIC_CROPS[FeatureName.H2]
        assert (h1.height, h1.width) == (122, 110)
        assert (h2.height, h2.width) == (105, 82)

    def test_h2_inside_h1(self):
        assert HOLISTIC_CROPS[FeatureName.H1].contains(HOLISTIC_CROPS[FeatureName.H2])

    def test_patch_indices_clip_at_border(self):
        rows, cols = patch_indices((10.5, 3.2), 40, 180, 162)
        assert len(rows) == len(cols) == 40
        assert rows[0] == 0 and rows[-1] == 3 + 20 - 1
        assert cols[0] == 0 and cols[-1] == 11 + 20 - 1

    def test_patch_indices_interior(self):
        rows, cols = patch_indices((80.0, 90.4), 40, 180, 162)
        assert rows.tolist() == list(range(70, 110))
        assert cols.tolist() == list(range(60, 100))


@pytest.mark.unit
class TestMdDcps:
    def test_region_block(self, canvas, md_cfg):
        block = md_dcps_region(canvas, md_cfg, Rect(10, 20, 29, 59))
        assert block.shape == (2048,)
        per_plane = block.reshape(8, 256).sum(axis=1)
        assert np.all(per_plane == 20 * 40)

    def test_constant_image_fills_the_all_ones_code(self, md_cfg):
        flat = GrayImage(np.full((40, 40), 90.0))
        block = md_dcps_region(flat, md_cfg, Rect(5, 5, 14, 14)).reshape(8, 256)
        assert np.all(block[:, 255] == 100)
        assert block[:, :255].sum() == 0

    def test_region_outside_image(self, canvas, md_cfg):
        with pytest.raises(GeometryError):
            md_dcps_region(canvas, md_cfg, Rect(0, 0, 180, 10))

    def test_holistic_length_and_mass(self, canvas, md_cfg):
        h1 = build_holistic(canvas, FeatureName.H1, md_cfg)
        assert len(h1) == EXPECTED_LENGTHS[FeatureName.H1]
        assert np.all(h1.values >= 0)
        # squares recover counts: every crop pixel counted once per block plane
        assert np.sum(h1.values**2) == pytest.approx(122 * 110 * 8)

    def test_holistic_needs_mdml_canvas(self, md_cfg):
        with pytest.raises(GeometryError):
            build_holistic(GrayImage(np.zeros((128, 128))), FeatureName.H1, md_cfg)

    def test_holistic_rejects_component_names(self, canvas, md_cfg):
        with pytest.raises(ConfigError):
            build_holistic(canvas, FeatureName.C1, md_cfg)


@pytest.mark.unit
class TestMdmlFeatures:
    def test_landmark_feature_length_and_mass(self, face_image, template_landmarks, md_cfg):
        aff, lm = normalize_to_preset(face_image, template_landmarks, MDML_180, GeometryKind.AFFINE)
        h3 = build_landmark_feature(aff, lm, default_components()[FeatureName.H3], md_cfg)
        assert len(h3) == EXPECTED_LENGTHS[FeatureName.H3]
        assert np.sum(h3.values**2) == pytest.approx(21 * 40 * 40 * 8)

    def test_build_mdml_names_and_lengths(self, face_image, template_landmarks, md_cfg):
        features = build_mdml(face_image, template_landmarks, md_cfg)
        assert list(features) == list(FeatureName)
        assert {n: len(v) for n, v in features.items()} == EXPECTED_LENGTHS

    def test_encoded_face_matches_direct_builders(self, face_image, template_landmarks, md_cfg):
        face = encode_face(face_image, template_landmarks, md_cfg)
        sim, _ = normalize_to_preset(
            face_image, template_landmarks, MDML_180, GeometryKind.SIMILARITY
        )
        np.testing.assert_array_equal(
            feature_from_face(face, FeatureName.H2, md_cfg).values,
            build_holistic(sim, FeatureName.H2, md_cfg).values,
        )

    def test_thread_count_invariant(self, face_image, template_landmarks, md_cfg):
        one = build_mdml(face_image, template_landmarks, md_cfg, threads=1)
        many = build_mdml(face_image, template_landmarks, md_cfg, threads=4)
        for name in FeatureName:
            np.testing.assert_array_equal(one[name].values, many[name].values)

    def test_feature_values_are_read_only(self, face_image, template_landmarks, md_cfg):
        h1 = build_mdml(face_image, template_landmarks, md_cfg)[FeatureName.H1]
        with pytest.raises(ValueError):
            h1.values[0] = 1.0
