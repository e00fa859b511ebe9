"""Unit tests for identification, verification metrics, flipping and role splits."""

import csv

import numpy as np
import pytest
from sklearn.metrics import roc_auc_score

from dcpkit.core.errors import DimensionError, InputError, MissingInputsError
from dcpkit.core.imaging import GrayImage
from dcpkit.models.enums import Role
from dcpkit.models.schemas import DatasetManifest, EvalReport
from dcpkit.services.evaluation import (
    DegenerateEvalError,
    GallerySet,
    PairList,
    ProbeSet,
    Scorer,
    auc_from_roc,
    flip_augment,
    identify,
    kfold_accuracy,
    rank_identities,
    resolve_inputs,
    roc_points,
    split_roles,
    verify,
    vr_at_far,
    write_roc_csv,
)
from dcpkit.services.pipelines import LoadedEntry


def loaded(key, subject, role=None) -> LoadedEntry:
    return LoadedEntry(
        key=key, subject=subject, role=role, image=GrayImage(np.zeros((2, 2))), landmarks=None
    )


# ============================================================================
# Identification
# ============================================================================


@pytest.mark.unit
class TestIdentification:
    def test_rank_rates(self):
        gallery = GallerySet(("g0", "g1", "g2"), ("a", "b", "c"))
        probes = ProbeSet(("p0", "p1", "p2"), ("a", "b", "c"))
        sim = np.array([[0.9, 0.1, 0.2], [0.8, 0.5, 0.1], [0.7, 0.6, 0.3]])
        rank_k, missing = rank_identities(sim, gallery, probes, k_max=3)
        assert rank_k == {1: pytest.approx(1 / 3), 2: pytest.approx(2 / 3), 3: 1.0}
        assert missing == []

    def test_ties_go_to_lowest_gallery_index(self):
        gallery = GallerySet(("g0", "g1"), ("a", "b"))
        sim = np.array([[0.5, 0.5]])
        assert rank_identities(sim, gallery, ProbeSet(("p",), ("a",)), 1)[0][1] == 1.0
        assert rank_identities(sim, gallery, ProbeSet(("p",), ("b",)), 1)[0][1] == 0.0

    def test_missing_subject_counts_as_miss(self):
        gallery = GallerySet(("g0",), ("a",))
        probes = ProbeSet(("p0", "p1"), ("a", "z"))
        rank_k, missing = rank_identities(np.ones((2, 1)), gallery, probes, k_max=2)
        assert rank_k == {1: 0.5, 2: 0.5}
        assert missing == ["p1"]

    def test_shape_checked(self):
        with pytest.raises(DimensionError):
            rank_identities(np.ones((2, 2)), GallerySet(("g",), ("a",)), ProbeSet(("p",), ("a",)))

    def test_gallery_subjects_unique(self):
        with pytest.raises(InputError):
            GallerySet(("g0", "g1"), ("a", "a"))

    def test_distance_scorer_is_negated(self):
        gallery = GallerySet(("g0", "g1"), ("a", "b"))
        probes = ProbeSet(("p0",), ("b",))
        l1 = lambda p, g: np.abs(p[:, None, 0] - g[None, :, 0])  # noqa: E731
        scorer = Scorer("l1", l1, higher_is_better=False)
        report = identify(gallery, probes, np.array([[0.0], [5.0]]), np.array([[4.0]]), scorer, 2)
        assert report.rank1 == 1.0
        assert (report.n_gallery, report.n_probes) == (2, 1)


# ============================================================================
# Verification
# ============================================================================


@pytest.mark.unit
class TestVerificationMetrics:
    def test_auc_matches_reference(self, rng):
        labels = rng.random(1000) < 0.4
        scores = rng.normal(size=1000) + labels
        auc = auc_from_roc(roc_points(labels, scores))
        assert auc == pytest.approx(roc_auc_score(labels, scores), abs=1e-9)

    def test_auc_with_ties_matches_reference(self, rng):
        labels = rng.random(500) < 0.5
        scores = np.round(rng.normal(size=500) + labels, 1)
        auc = auc_from_roc(roc_points(labels, scores))
        assert auc == pytest.approx(roc_auc_score(labels, scores), abs=1e-9)

    def test_roc_endpoints(self):
        roc = roc_points(np.array([True, False, True]), np.array([0.9, 0.1, 0.4]))
        assert roc[0] == (0.0, 0.0)
        assert roc[-1] == (1.0, 1.0)
        fars = [p[0] for p in roc]
        assert fars == sorted(fars)

    def test_vr_at_far_reads_largest_far_not_above_target(self):
        roc = [(0.0, 0.0), (0.0, 0.5), (0.1, 0.8), (0.3, 1.0), (1.0, 1.0)]
        assert vr_at_far(roc, 0.0) == 0.5
        assert vr_at_far(roc, 0.2) == 0.8
        assert vr_at_far(roc, 0.3) == 1.0

    def test_kfold_accuracy_separable(self):
        labels = np.array([True, False] * 10)
        scores = np.where(labels, 1.0, -1.0)
        folds = np.arange(20) % 5
        assert kfold_accuracy(labels, scores, folds) == [1.0] * 5

    def test_verify_report(self, rng):
        labels = np.array([True, False] * 50)
        scores = rng.normal(size=100) + 3.0 * labels
        report = verify(labels, scores, far_targets=(0.01, 0.1), n_folds=10, seed=1)
        assert report.protocol == "verification"
        assert report.n_pairs == 100
        assert set(report.vr_at_far) == {"0.01", "0.1"}
        assert len(report.fold_accuracies) == 10
        assert report.accuracy_se == pytest.approx(
            np.std(report.fold_accuracies, ddof=1) / np.sqrt(10)
        )

    def test_verify_seeded_folds_are_deterministic(self, rng):
        labels = rng.random(60) < 0.5
        scores = rng.normal(size=60) + labels
        a = verify(labels, scores, seed=4)
        b = verify(labels, scores, seed=4)
        assert a.fold_accuracies == b.fold_accuracies

    def test_verify_explicit_folds(self):
        labels = [True, False, True, False]
        report = verify(labels, [1.0, 0.0, 1.0, 0.0], folds=[0, 0, 1, 1])
        assert report.fold_accuracies == [1.0, 1.0]

    def test_too_few_pairs_skip_folds(self):
        report = verify([True, False], [1.0, 0.0], n_folds=10)
        assert report.fold_accuracies == []
        assert report.accuracy_mean is None

    def test_single_class(self):
        with pytest.raises(DegenerateEvalError):
            verify([True, True], [0.1, 0.2])

    def test_non_finite_scores(self):
        with pytest.raises(DegenerateEvalError):
            verify([True, False], [np.nan, 0.2])

    def test_roc_csv(self, tmp_path):
        report = EvalReport(protocol="verification", roc=[(0.0, 0.0), (0.5, 0.75), (1.0, 1.0)])
        path = write_roc_csv(report, tmp_path / "out" / "roc.csv")
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["far", "vr"]
        assert [tuple(map(float, r)) for r in rows[1:]] == report.roc


@pytest.mark.unit
class TestPairList:
    def test_from_manifest(self):
        manifest = DatasetManifest.model_validate(
            {
                "entries": [
                    {"key": "a", "image": "a.pgm", "subject": "s1"},
                    {"key": "b", "image": "b.pgm", "subject": "s1"},
                ],
                "pairs": [{"a": "a", "b": "b", "same": True, "fold": 0}],
            }
        )
        pairs = PairList.from_manifest(manifest)
        assert (pairs.a, pairs.b, pairs.same, pairs.folds) == (("a",), ("b",), (True,), (0,))

    def test_non_contiguous_folds(self):
        with pytest.raises(InputError):
            PairList(("a", "b"), ("c", "d"), (True, False), folds=(0, 2))


# ============================================================================
# Flipping And Roles
# ============================================================================


@pytest.mark.unit
class TestFlipAugment:
    def test_double_flip_is_identity(self, face_image, template_landmarks):
        img, lm = flip_augment(*flip_augment(face_image, template_landmarks))
        np.testing.assert_array_equal(img.data, face_image.data)
        np.testing.assert_allclose(lm.points, template_landmarks.points)

    def test_landmarks_are_relabelled(self, face_image, template_landmarks):
        _, lm = flip_augment(face_image, template_landmarks)
        # point 0 of the flipped set is the reflection of point 9
        assert lm.points[0, 0] == pytest.approx(161 - template_landmarks.points[9, 0])
        assert lm.points[0, 1] == pytest.approx(template_landmarks.points[9, 1])

    def test_flipped_template_keeps_eye_order(self, face_image, template_landmarks):
        _, lm = flip_augment(face_image, template_landmarks)
        assert lm.points[19:25, 0].mean() < lm.points[25:31, 0].mean()


@pytest.mark.unit
class TestSplitRoles:
    def test_train_entries_take_precedence(self):
        entries = [
            loaded("t", "x", Role.TRAIN),
            loaded("g", "a", Role.GALLERY),
            loaded("p", "a", Role.PROBE),
        ]
        train, gallery, probes = split_roles(entries)
        assert [e.key for e in train] == ["t"]
        assert [e.key for e in gallery] == ["g"]
        assert [e.key for e in probes] == ["p"]

    def test_gallery_trains_without_train_role(self):
        entries = [loaded("g", "a", Role.GALLERY), loaded("p", "a", Role.PROBE)]
        train, gallery, _ = split_roles(entries)
        assert train == gallery

    def test_first_image_per_subject_is_gallery(self):
        entries = [loaded("a1", "a"), loaded("b1", "b"), loaded("a2", "a")]
        _, gallery, probes = split_roles(entries)
        assert [e.key for e in gallery] == ["a1", "b1"]
        assert [e.key for e in probes] == ["a2"]


@pytest.mark.unit
class TestResolveInputs:
    def test_lists_every_missing_file(self, tmp_path):
        (tmp_path / "a.pgm").write_bytes(b"")
        manifest = DatasetManifest.model_validate(
            {
                "entries": [
                    {"key": "a", "image": "a.pgm", "landmarks": "a.pts", "subject": "s"},
                    {"key": "b", "image": "b.pgm", "subject": "s"},
                ]
            }
        )
        with pytest.raises(MissingInputsError) as exc:
            resolve_inputs(manifest, tmp_path)
        assert sorted(exc.value.missing) == sorted(
            [str(tmp_path / "a.pts"), str(tmp_path / "b.pgm")]
        )


@pytest.mark.unit
def test_verify_auc_equals_pairwise_estimate(rng):
    labels = rng.random(1000) < 0.5
    scores = rng.normal(size=1000) + 0.8 * labels
    same, diff = scores[labels], scores[~labels]
    wins = (same[:, None] > diff[None, :]).sum() + 0.5 * (same[:, None] == diff[None, :]).sum()
    assert verify(labels, scores).auc == pytest.approx(wins / (len(same) * len(diff)), abs=1e-9)
