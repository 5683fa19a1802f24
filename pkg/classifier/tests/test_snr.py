import numpy as np
import pytest

from annotation.records import AudioClip
from classifier.evaluation.snr import SNR_COLUMNS, plot_snr_profile, snr_profile, write_snr_csv
from classifier.features.lld import FrameSpec
from pipeline.exceptions import PreconditionError
from pipeline.utils.table_loader import TableBatchLoader

SR = 16000
SPEC = FrameSpec(fft_size=512)


def _noise(seconds, seed, sr=SR):
    rng = np.random.default_rng(seed)
    return AudioClip(0.05 * rng.standard_normal(int(seconds * sr)), sr)


def _tone_in_noise(seconds, seed, freq=1000.0):
    noise = _noise(seconds, seed)
    t = np.arange(len(noise)) / SR
    return AudioClip(noise.samples + 0.5 * np.sin(2 * np.pi * freq * t), SR)


def test_bins_run_from_zero_to_max_hz():
    profile = snr_profile([_noise(0.5, 0)], [_noise(0.5, 1)], max_hz=2000.0, spec=SPEC)
    assert len(profile.bin_hz) == int(2000.0 // (SR / 512)) + 1
    assert profile.bin_hz[0] == 0.0
    assert profile.bin_hz[1] == pytest.approx(31.25)


def test_peak_sits_at_the_tone_frequency():
    signal = [_tone_in_noise(0.4, seed) for seed in range(3)]
    background = [_noise(0.4, seed) for seed in range(10, 13)]
    profile = snr_profile(signal, background, max_hz=2000.0, spec=SPEC)
    assert profile.peak_hz == pytest.approx(1000.0, abs=SR / 512)
    assert np.max(profile.diff_db) > 20.0


def test_identical_groups_have_a_flat_zero_profile():
    chunks = [_noise(0.3, 4), _noise(0.2, 5)]
    profile = snr_profile(chunks, chunks, spec=SPEC)
    assert np.allclose(profile.diff_db, 0.0)


@pytest.mark.parametrize("db_of_mean", [False, True])
def test_chunk_order_does_not_change_the_profile(db_of_mean):
    chunks = [_noise(0.3, seed) for seed in range(4)]
    forward = snr_profile(chunks, chunks[:1], spec=SPEC, db_of_mean=db_of_mean)
    backward = snr_profile(chunks[::-1], chunks[:1], spec=SPEC, db_of_mean=db_of_mean, jobs=3)
    assert np.allclose(forward.signal_db, backward.signal_db, atol=1e-9)


def test_db_of_mean_is_never_below_mean_of_db():
    chunks = [_tone_in_noise(0.3, 6), _noise(0.3, 7)]
    mean_db = snr_profile(chunks, chunks, spec=SPEC)
    db_of_mean = snr_profile(chunks, chunks, spec=SPEC, db_of_mean=True)
    assert np.all(db_of_mean.signal_db >= mean_db.signal_db - 1e-9)


def test_chunks_shorter_than_a_frame_are_padded():
    short = AudioClip(np.ones(100) * 0.1, SR)
    profile = snr_profile([short], [_noise(0.1, 8)], spec=SPEC)
    assert np.all(np.isfinite(profile.signal_db))


def test_invalid_inputs():
    clip = _noise(0.2, 9)
    with pytest.raises(PreconditionError):
        snr_profile([], [clip], spec=SPEC)
    with pytest.raises(PreconditionError):
        snr_profile([clip], [_noise(0.2, 9, sr=8000)], spec=SPEC)
    with pytest.raises(PreconditionError):
        snr_profile([clip], [clip], max_hz=9000.0, spec=SPEC)


def test_profile_csv_and_plot(tmp_path):
    profile = snr_profile([_tone_in_noise(0.3, 1)], [_noise(0.3, 2)], spec=SPEC)
    csv_path = tmp_path / "snr.csv"
    assert write_snr_csv(profile, csv_path) == len(profile.bin_hz)
    assert TableBatchLoader(csv_path).fieldnames() == SNR_COLUMNS

    png_path = tmp_path / "snr.png"
    plot_snr_profile(profile, png_path, title="tone")
    assert png_path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
