"""Value-object invariants: construction, validation, immutability."""

import numpy as np
import pytest

from recsynvc.errors import (
    EmptyManifestError,
    NonFiniteInputError,
    SingleSpeakerError,
    VoiceConversionError,
)
from recsynvc.types import (
    DatasetManifest,
    FeatureSequence,
    MelSpectrogram,
    SpeakerEmbedding,
    UtteranceRecord,
    Waveform,
    LOG_MEL_FLOOR,
    N_MELS,
)


class TestWaveform:
    def test_basic_properties(self):
        wave = Waveform(samples=np.zeros(2400), sample_rate=24000)
        assert len(wave) == 2400
        assert wave.duration == pytest.approx(0.1)
        assert wave.samples.dtype == np.float64

    def test_samples_are_readonly(self):
        wave = Waveform(samples=np.zeros(10), sample_rate=24000)
        with pytest.raises(ValueError):
            wave.samples[0] = 1.0

    def test_rejects_empty_and_2d(self):
        with pytest.raises(VoiceConversionError):
            Waveform(samples=np.zeros(0), sample_rate=24000)
        with pytest.raises(VoiceConversionError):
            Waveform(samples=np.zeros((4, 2)), sample_rate=24000)

    def test_rejects_nan_and_overrange(self):
        with pytest.raises(NonFiniteInputError):
            Waveform(samples=np.array([0.0, np.nan]), sample_rate=24000)
        with pytest.raises(VoiceConversionError):
            Waveform(samples=np.array([0.0, 1.5]), sample_rate=24000)

    def test_rejects_unknown_rate(self):
        with pytest.raises(VoiceConversionError):
            Waveform(samples=np.zeros(10), sample_rate=12345)

    def test_tiny_excursions_are_clipped(self):
        wave = Waveform(samples=np.array([1.0 + 5e-7, -1.0 - 5e-7]),
                        sample_rate=24000)
        assert np.max(np.abs(wave.samples)) <= 1.0


class TestFeatureSequence:
    def test_stores_float32(self):
        seq = FeatureSequence(frames=np.ones((3, 4), dtype=np.float64),
                              frame_shift_ms=10.0)
        assert seq.frames.dtype == np.float32
        assert seq.dim == 4
        assert len(seq) == 3

    def test_frame_shift_is_float32_exact(self):
        # shift survives a float32 round trip unchanged
        seq = FeatureSequence(frames=np.zeros((1, 1)), frame_shift_ms=20.123)
        assert seq.frame_shift_ms == float(np.float32(20.123))

    def test_rejects_empty_and_nonfinite(self):
        with pytest.raises(VoiceConversionError):
            FeatureSequence(frames=np.zeros((0, 4)), frame_shift_ms=10.0)
        with pytest.raises(NonFiniteInputError):
            FeatureSequence(frames=np.array([[np.inf]]), frame_shift_ms=10.0)
        with pytest.raises(VoiceConversionError):
            FeatureSequence(frames=np.zeros((1, 1)), frame_shift_ms=0.0)


class TestMelSpectrogram:
    def test_shape_and_floor_enforced(self):
        frames = np.full((5, N_MELS), LOG_MEL_FLOOR)
        mel = MelSpectrogram(frames=frames)
        assert len(mel) == 5
        with pytest.raises(VoiceConversionError):
            MelSpectrogram(frames=np.zeros((5, N_MELS - 1)))
        with pytest.raises(VoiceConversionError):
            MelSpectrogram(frames=np.full((5, N_MELS), LOG_MEL_FLOOR - 1.0))

    def test_as_features_round_trip(self):
        frames = np.full((4, N_MELS), LOG_MEL_FLOOR + 1.0)
        mel = MelSpectrogram(frames=frames)
        seq = mel.as_features()
        assert seq.dim == N_MELS
        assert seq.frame_shift_ms == mel.frame_shift_ms


class TestSpeakerEmbedding:
    def test_requires_unit_norm(self):
        SpeakerEmbedding(vector=np.array([1.0, 0.0]))
        with pytest.raises(VoiceConversionError):
            SpeakerEmbedding(vector=np.array([1.0, 1.0]))

    def test_from_raw_normalizes(self):
        emb = SpeakerEmbedding.from_raw(np.array([3.0, 4.0]))
        assert np.linalg.norm(emb.vector) == pytest.approx(1.0)
        assert emb.dim == 2

    def test_from_raw_rejects_zero(self):
        with pytest.raises(VoiceConversionError):
            SpeakerEmbedding.from_raw(np.zeros(8))


class TestManifest:
    def _record(self, utt, spk):
        return UtteranceRecord(utt_id=utt, speaker_id=spk, wav_path=f"{utt}.wav")

    def test_duplicate_utt_id_rejected(self):
        recs = [self._record("u1", "A"), self._record("u1", "A")]
        with pytest.raises(VoiceConversionError):
            DatasetManifest(records=tuple(recs), role="target_speaker")

    def test_target_speaker_role_constraints(self):
        with pytest.raises(EmptyManifestError):
            DatasetManifest(records=(), role="target_speaker")
        recs = (self._record("u1", "A"), self._record("u2", "B"))
        with pytest.raises(VoiceConversionError):
            DatasetManifest(records=recs, role="target_speaker")

    def test_multi_speaker_needs_two(self):
        recs = (self._record("u1", "A"), self._record("u2", "A"))
        with pytest.raises(SingleSpeakerError):
            DatasetManifest(records=recs, role="multi_speaker")

    def test_speakers_sorted(self):
        recs = (self._record("u1", "B"), self._record("u2", "A"))
        manifest = DatasetManifest(records=recs, role="multi_speaker")
        assert manifest.speakers == ("A", "B")

    def test_record_validation(self):
        with pytest.raises(VoiceConversionError):
            UtteranceRecord(utt_id="", speaker_id="A", wav_path="x.wav")
        with pytest.raises(VoiceConversionError):
            UtteranceRecord(utt_id="u", speaker_id="", wav_path="x.wav")
