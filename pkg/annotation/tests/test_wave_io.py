import numpy as np
import pytest
from scipy.io import wavfile

from annotation.records import AudioClip
from annotation.utils.wave_io import read_wave, read_wave_header, wave_duration, write_wave
from pipeline.exceptions import PreconditionError, UnsupportedEncodingError, WaveFormatError


def test_pcm16_decode_encode_is_bit_exact(tmp_path):
    pcm = np.array([-32768, -1, 0, 1, 12345, 32767], dtype=np.int16)
    source = tmp_path / "source.wav"
    wavfile.write(source, 8000, pcm)

    clip = read_wave(source)
    assert clip.sample_rate == 8000
    assert clip.source_id == "source"
    assert clip.samples[0] == -1.0 and clip.samples[-1] == 32767 / 32768

    copy = tmp_path / "copy.wav"
    result = write_wave(clip, copy)
    assert result.samples_written == len(pcm) and result.clipped_samples == 0
    assert np.array_equal(wavfile.read(copy)[1], pcm)


def test_out_of_range_samples_are_clamped_and_counted(tmp_path):
    result = write_wave(AudioClip(np.array([0.0, 1.5, -2.0, 0.25]), 16000), tmp_path / "loud.wav")
    assert result.clipped_samples == 2
    decoded = wavfile.read(tmp_path / "loud.wav")[1]
    assert decoded.tolist() == [0, 32767, -32768, 8192]


def test_float32_and_stereo_inputs(tmp_path):
    stereo = np.array([[0.5, -0.5], [0.25, 0.75]], dtype=np.float32)
    path = tmp_path / "stereo.wav"
    wavfile.write(path, 22050, stereo)
    clip = read_wave(path)
    assert clip.samples.tolist() == [0.0, 0.5]


def test_int32_pcm_is_an_unsupported_encoding(tmp_path):
    path = tmp_path / "wide.wav"
    wavfile.write(path, 16000, np.zeros(10, dtype=np.int32))
    with pytest.raises(UnsupportedEncodingError) as excinfo:
        read_wave(path)
    assert excinfo.value.encoding == "PCM 32-bit"


def test_non_riff_file_is_rejected(tmp_path):
    path = tmp_path / "notes.wav"
    path.write_bytes(b"not a wave file at all")
    with pytest.raises(WaveFormatError):
        read_wave(path)


def test_header_and_duration_without_decoding(tmp_path):
    path = tmp_path / "tone.wav"
    write_wave(AudioClip(np.zeros(24000), 16000), path)
    header = read_wave_header(path)
    assert (header.channels, header.sample_rate, header.bits_per_sample) == (1, 16000, 16)
    assert wave_duration(path) == pytest.approx(1.5)


def test_empty_clip_cannot_be_written(tmp_path):
    with pytest.raises(PreconditionError):
        write_wave(AudioClip(np.zeros(0), 16000), tmp_path / "empty.wav")


def test_float_samples_are_clipped_to_full_scale(tmp_path, caplog):
    path = tmp_path / "hot.wav"
    wavfile.write(path, 8000, np.array([-1.5, -0.25, 0.5, 2.0], dtype=np.float32))
    with caplog.at_level("WARNING", logger="annotation.utils.wave_io"):
        clip = read_wave(path)
    assert clip.samples.tolist() == [-1.0, -0.25, 0.5, 1.0]
    assert "clipped 2 float sample(s)" in caplog.text
