import numpy as np
import pytest

from freesense.config import PipelineConfig, SynthSection
from freesense.pca import ComponentSet
from freesense.trace import CsiTrace


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def make_components():
    """ComponentSet straight from a pairs x p x N waveform array."""

    def _make(waveforms):
        waveforms = np.asarray(waveforms, dtype=np.float64)
        if waveforms.ndim == 1:
            waveforms = waveforms[None, None, :]
        pairs, p, _ = waveforms.shape
        return ComponentSet(waveforms, np.zeros((pairs, p)), np.zeros((pairs, p, p)))

    return _make


@pytest.fixture
def make_trace(rng):
    def _make(n_frames=64, n_tx=2, n_rx=3, n_subcarriers=30, fs=1000.0):
        frames = rng.uniform(0.0, 20.0, size=(n_frames, n_tx * n_rx, n_subcarriers))
        return CsiTrace(fs, n_tx, n_rx, n_subcarriers, frames.astype(np.float32))

    return _make


@pytest.fixture
def small_synth() -> SynthSection:
    return SynthSection(subjects=2, samples_per_subject=3, separation=1.0, n_tx=1, n_rx=2)


@pytest.fixture
def config() -> PipelineConfig:
    return PipelineConfig()
