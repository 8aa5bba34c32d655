"""Conversion pipeline, embedding pooling, vocoders, and external adapters."""

import sys

import numpy as np
import pytest

from conftest import sphere_embedding

from recsynvc.audioio import load_waveform, save_waveform
from recsynvc.checkpoint import load_checkpoint
from recsynvc.converter import (
    average_embedding,
    convert,
    load_model,
    read_embedding,
    speaker_encoder_adapter,
    vocode,
    vocode_external,
    vocode_native,
)
from recsynvc.errors import (
    AdapterError,
    DimensionMismatchError,
    EmptyInputError,
    ExtraEmbeddingError,
    VoiceConversionError,
    ZeroMeanVectorError,
)
from recsynvc.featureio import write_features
from recsynvc.recognizer import mel_upstream, recognize, resample_features
from recsynvc.synthesizer import forward_free_running
from recsynvc.trainer import denormalize, normalize
from recsynvc.types import FeatureSequence, MelSpectrogram, Waveform, LOG_MEL_FLOOR


def _source_wave(toy_corpus):
    record = toy_corpus["manifest"].records[0]
    return load_waveform(record.wav_path, target_rate=24000)


class TestConvert:
    def test_output_shape_and_floor(self, toy_corpus, quick_checkpoint, audio):
        wave = _source_wave(toy_corpus)
        mel = convert(wave, load_checkpoint(quick_checkpoint["path"]),
                      mel_upstream(audio))
        assert mel.frames.shape[1] == 80
        assert np.min(mel.frames) >= LOG_MEL_FLOOR

    def test_equals_manually_chained_modules(self, toy_corpus,
                                             quick_checkpoint, audio):
        # the one-call pipeline is exactly recognize -> resample -> normalize
        # -> decode -> denormalize, with no hidden extras
        wave = _source_wave(toy_corpus)
        ckpt = load_checkpoint(quick_checkpoint["path"])
        spec = mel_upstream(audio)
        mel = convert(wave, ckpt, spec, dropout_seed=3)

        params, stats, audio_cfg, _ = load_model(ckpt)
        content = resample_features(recognize(wave, spec, audio_cfg),
                                    audio_cfg.frame_shift_ms)
        x = normalize(content.frames.astype(np.float64),
                      stats["input_mean"], stats["input_std"])
        y = forward_free_running(params, x, dropout_seed=3)
        y = denormalize(y, stats["target_mean"], stats["target_std"])
        expected = np.maximum(y, LOG_MEL_FLOOR)
        assert np.array_equal(mel.frames, expected)

    def test_embedding_argument_contract(self, toy_corpus, quick_checkpoint,
                                         audio):
        wave = _source_wave(toy_corpus)
        ckpt = load_checkpoint(quick_checkpoint["path"])
        emb = sphere_embedding("nope", dim=16)
        with pytest.raises(ExtraEmbeddingError):
            convert(wave, ckpt, mel_upstream(audio), s=emb)

    def test_upstream_dim_must_match_checkpoint(self, toy_corpus,
                                                quick_checkpoint, audio):
        from recsynvc.recognizer import external_upstream

        wave = _source_wave(toy_corpus)
        ckpt = load_checkpoint(quick_checkpoint["path"])
        spec = external_upstream("ssl_stub", 7, 20.0, "/tmp")
        with pytest.raises(DimensionMismatchError):
            convert(wave, ckpt, spec)


class TestAverageEmbedding:
    def test_mean_then_renormalize(self):
        e1 = sphere_embedding("a")
        e2 = sphere_embedding("b")
        avg = average_embedding([e1, e2])
        mean = (e1.vector + e2.vector) / 2.0
        np.testing.assert_allclose(avg.vector, mean / np.linalg.norm(mean),
                                   atol=1e-12)

    def test_idempotent_on_single_item(self):
        e = sphere_embedding("solo")
        np.testing.assert_allclose(average_embedding([e]).vector, e.vector,
                                   atol=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(EmptyInputError):
            average_embedding([])

    def test_dim_mismatch_rejected(self):
        with pytest.raises(DimensionMismatchError):
            average_embedding([sphere_embedding("a", dim=8),
                               sphere_embedding("b", dim=16)])

    def test_cancelling_vectors_rejected(self):
        e = sphere_embedding("x")
        from recsynvc.types import SpeakerEmbedding

        opposite = SpeakerEmbedding(vector=-e.vector)
        with pytest.raises(ZeroMeanVectorError):
            average_embedding([e, opposite])


class TestVocodeNative:
    def _mel(self, audio, toy_corpus):
        from recsynvc.recognizer import extract_mel

        return extract_mel(_source_wave(toy_corpus), audio)

    def test_length_and_range(self, audio, toy_corpus):
        mel = self._mel(audio, toy_corpus)
        wave = vocode_native(mel, audio)
        assert wave.sample_rate == audio.sample_rate
        assert len(wave) == len(mel) * audio.hop_length
        assert np.max(np.abs(wave.samples)) <= 1.0

    def test_reconstructs_audible_energy(self, audio, toy_corpus):
        mel = self._mel(audio, toy_corpus)
        wave = vocode_native(mel, audio)
        assert np.sqrt(np.mean(wave.samples ** 2)) > 1e-3

    def test_deterministic(self, audio, toy_corpus):
        mel = self._mel(audio, toy_corpus)
        a = vocode_native(mel, audio)
        b = vocode_native(mel, audio)
        assert np.array_equal(a.samples, b.samples)


class TestVocodeExternal:
    def test_stub_round_trip(self, audio, toy_corpus, stub_vocoder, tmp_path):
        from recsynvc.recognizer import extract_mel

        mel = extract_mel(_source_wave(toy_corpus), audio)
        wave = vocode_external(mel, stub_vocoder, audio)
        assert wave.sample_rate == audio.sample_rate
        assert len(wave) == len(mel) * audio.hop_length

    def test_dispatcher(self, audio, toy_corpus, stub_vocoder):
        from recsynvc.recognizer import extract_mel

        mel = extract_mel(_source_wave(toy_corpus), audio)
        command = " ".join([sys.executable, str(stub_vocoder[1])])
        wave = vocode(mel, audio, vocoder=f"external:{command}")
        assert len(wave) == len(mel) * audio.hop_length
        with pytest.raises(VoiceConversionError):
            vocode(mel, audio, vocoder="wavenet")

    def test_failing_command_raises_with_stderr(self, audio, toy_corpus,
                                                failing_adapter):
        from recsynvc.recognizer import extract_mel

        mel = extract_mel(_source_wave(toy_corpus), audio)
        with pytest.raises(AdapterError) as err:
            vocode_external(mel, failing_adapter, audio)
        assert "stub exploded" in err.value.stderr


class TestSpeakerEncoderAdapter:
    def test_returns_unit_embedding(self, toy_corpus, stub_speaker_encoder):
        record = toy_corpus["manifest"].records[0]
        emb = speaker_encoder_adapter(record.wav_path, stub_speaker_encoder)
        assert emb.dim == 16
        assert np.linalg.norm(emb.vector) == pytest.approx(1.0)

    def test_cache_hit_spawns_nothing(self, toy_corpus, tmp_path):
        # counting wrapper: each real invocation appends to a side file
        counter = tmp_path / "count.txt"
        script = tmp_path / "counting_encoder.py"
        script.write_text(
            "import sys\n"
            "import numpy as np\n"
            "from pathlib import Path\n"
            "from recsynvc.featureio import write_features\n"
            "from recsynvc.types import FeatureSequence\n"
            f"Path({str(counter)!r}).open('a').write('x')\n"
            "vec = np.ones(4, dtype=np.float32) / 2.0\n"
            "write_features(sys.argv[2], FeatureSequence(frames=vec[None, :], "
            "frame_shift_ms=10.0))\n"
        )
        command = [sys.executable, str(script)]
        cache = tmp_path / "cache"
        record = toy_corpus["manifest"].records[0]
        a = speaker_encoder_adapter(record.wav_path, command,
                                    cache_dir=cache, utt_id=record.utt_id)
        b = speaker_encoder_adapter(record.wav_path, command,
                                    cache_dir=cache, utt_id=record.utt_id)
        assert counter.read_text() == "x"  # exactly one spawn
        assert np.array_equal(a.vector, b.vector)

    def test_accepts_in_memory_waveform(self, stub_speaker_encoder):
        wave = Waveform(samples=np.full(2400, 0.1), sample_rate=24000)
        emb = speaker_encoder_adapter(wave, stub_speaker_encoder)
        assert emb.dim == 16

    def test_expected_dim_enforced(self, toy_corpus, stub_speaker_encoder):
        record = toy_corpus["manifest"].records[0]
        with pytest.raises(DimensionMismatchError):
            speaker_encoder_adapter(record.wav_path, stub_speaker_encoder,
                                    expected_dim=32)

    def test_failing_encoder(self, toy_corpus, failing_adapter):
        record = toy_corpus["manifest"].records[0]
        with pytest.raises(AdapterError):
            speaker_encoder_adapter(record.wav_path, failing_adapter)


class TestReadEmbedding:
    def test_reads_single_row(self, tmp_path):
        vec = np.array([[0.6, 0.8]], dtype=np.float32)
        path = tmp_path / "e.s3vc"
        write_features(path, FeatureSequence(frames=vec, frame_shift_ms=10.0))
        emb = read_embedding(path)
        np.testing.assert_allclose(emb.vector, [0.6, 0.8], atol=1e-7)

    def test_normalizes_raw_vector(self, tmp_path):
        vec = np.array([[3.0, 4.0]], dtype=np.float32)
        path = tmp_path / "e.s3vc"
        write_features(path, FeatureSequence(frames=vec, frame_shift_ms=10.0))
        assert np.linalg.norm(read_embedding(path).vector) == pytest.approx(1.0)

    def test_multi_row_rejected(self, tmp_path):
        path = tmp_path / "e.s3vc"
        write_features(path, FeatureSequence(frames=np.ones((2, 3), dtype=np.float32),
                                             frame_shift_ms=10.0))
        with pytest.raises(DimensionMismatchError):
            read_embedding(path)

    def test_expected_dim(self, tmp_path):
        path = tmp_path / "e.s3vc"
        write_features(path, FeatureSequence(frames=np.ones((1, 3), dtype=np.float32),
                                             frame_shift_ms=10.0))
        with pytest.raises(DimensionMismatchError):
            read_embedding(path, expected_dim=4)


def test_save_then_vocode_native_survives_round_trip(audio, toy_corpus,
                                                     tmp_path):
    # converted mel -> native vocoder -> wav file -> loadable waveform
    from recsynvc.recognizer import extract_mel

    mel = extract_mel(_source_wave(toy_corpus), audio)
    wave = vocode_native(mel, audio)
    path = tmp_path / "out.wav"
    save_waveform(path, wave)
    back = load_waveform(path)
    assert len(back) == len(wave)
