"""Pytest configuration and fixtures."""

from pathlib import Path

import numpy as np
import pytest

from dcpkit.core.imaging import GrayImage, LandmarkSet
from dcpkit.services.synthesis import TEMPLATE_LANDMARKS, SyntheticCorpus, synth_corpus

# ============================================================================
# Randomness
# ============================================================================


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator; every test that draws data starts from the same state."""
    return np.random.default_rng(12345)


@pytest.fixture
def random_image(rng: np.random.Generator) -> GrayImage:
    """32x32 image of independent uniform 8-bit intensities."""
    return GrayImage(rng.integers(0, 256, size=(32, 32)).astype(np.float64))


@pytest.fixture
def random_images(rng: np.random.Generator) -> list[GrayImage]:
    return [GrayImage(rng.integers(0, 256, size=(32, 32)).astype(np.float64)) for _ in range(10)]


@pytest.fixture
def constant_image() -> GrayImage:
    return GrayImage(np.full((24, 24), 77.0))


# ============================================================================
# Faces
# ============================================================================


@pytest.fixture
def template_landmarks() -> LandmarkSet:
    return LandmarkSet(TEMPLATE_LANDMARKS)


@pytest.fixture
def face_image(rng: np.random.Generator) -> GrayImage:
    """Smooth 180x162 raster on which the template landmarks sit."""
    yy, xx = np.mgrid[0:180, 0:162].astype(np.float64)
    base = 128.0 + 40.0 * np.sin(xx / 9.0) * np.cos(yy / 11.0)
    return GrayImage(np.clip(base + rng.normal(0.0, 4.0, base.shape), 0, 255))


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory) -> SyntheticCorpus:
    """Four identities, three images each, written to disk with a manifest."""
    out = tmp_path_factory.mktemp("corpus")
    return synth_corpus(seed=7, n_ids=4, n_per_id=3, variation=["noise"], out_dir=out, n_folds=2)


@pytest.fixture(scope="session")
def small_manifest(small_corpus: SyntheticCorpus) -> Path:
    return small_corpus.root / "manifest.json"


# ============================================================================
# Configuration Fixtures
# ============================================================================


@pytest.fixture(autouse=True)
def reset_settings():
    """Start and end every test with an empty settings cache."""
    from dcpkit.config import get_settings

    # dcpkit.config fills the cache at import time
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


# ============================================================================
# Markers
# ============================================================================


def pytest_configure(config):
    """Configure pytest with custom markers."""
    config.addinivalue_line("markers", "unit: mark test as a unit test")
    config.addinivalue_line("markers", "integration: mark test as an integration test")
    config.addinivalue_line("markers", "e2e: mark test as an end-to-end test")
    config.addinivalue_line("markers", "slow: mark test as slow running")
