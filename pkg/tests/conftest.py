import pytest

from clipsmith.config import load_config
from clipsmith.fixtures import make_fixture
from clipsmith.media import Transcoder


@pytest.fixture(scope="session")
def media_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("media")


@pytest.fixture(scope="session")
def fixture_60s(media_dir):
    """60 s bars+tone source used by the duration/fade acceptance tests."""
    return make_fixture(media_dir / "tone60.avi", duration=60.0)


@pytest.fixture(scope="session")
def fixture_short(media_dir):
    """12 s voiced source for fast per-module media tests."""
    return make_fixture(media_dir / "tone12.avi", duration=12.0)


@pytest.fixture(scope="session")
def fixture_silent(media_dir):
    """Audio stream present but silent (no speech)."""
    return make_fixture(media_dir / "silent20.avi", duration=20.0, amplitude=0.0)


@pytest.fixture(scope="session")
def fixture_noaudio(media_dir):
    """No audio stream at all (voiceover-free path)."""
    return make_fixture(media_dir / "mute20.avi", duration=20.0, with_audio=False)


@pytest.fixture(scope="session")
def base_cfg():
    return load_config(path="/nonexistent-config.yaml", overrides={"mock": True})


@pytest.fixture(scope="session")
def tool(base_cfg):
    return Transcoder.from_config(base_cfg)
