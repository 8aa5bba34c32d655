"""End-to-end conversion: recognize -> decode -> denormalize -> vocode.

Conversion is self-contained given a checkpoint: the decoder weights, the
normalization statistics, and the audio settings all travel inside it.  The
source speaker's identity enters only through the waveform itself.

Vocoding has a native fallback (iterative phase reconstruction from the mel
via the pseudo-inverse filterbank) and an external adapter path for neural
vocoders.  External tools are one process per call:

* vocoder: ``cmd <mel.s3vc> <out.wav>`` -- reads the binary feature file,
  writes RIFF/PCM.
* speaker encoder: ``cmd <in.wav> <out.s3vc>`` -- writes a 1 x E feature
  file; results are cached per utt_id with atomic write-then-rename.
"""

from __future__ import annotations

import shlex
import subprocess
import tempfile
from pathlib import Path

import numpy as np

from .audioio import load_waveform, save_waveform
from .checkpoint import Checkpoint, load_checkpoint
from .config import AudioConfig
from .dsp import griffin_lim, mel_filterbank
from .errors import (
    AdapterError,
    DimensionMismatchError,
    EmptyInputError,
    ExtraEmbeddingError,
    MissingEmbeddingError,
    NonFiniteInputError,
    ZeroMeanVectorError,
)
from .featureio import read_features, write_features, feature_path
from .recognizer import UpstreamSpec, recognize, resample_features
from .synthesizer import DecoderConfig, ModelParameters, forward_free_running
from .trainer import denormalize, normalize
from .types import (
    LOG_MEL_FLOOR,
    FeatureSequence,
    MelSpectrogram,
    SpeakerEmbedding,
    Waveform,
)

_STATS_PREFIX = "stats."


def load_model(checkpoint) -> tuple[ModelParameters, dict, AudioConfig, dict]:
    """Split a checkpoint into decoder parameters, stats, audio config, meta."""
    if not isinstance(checkpoint, Checkpoint):
        checkpoint = load_checkpoint(checkpoint)
    meta = checkpoint.meta
    config = DecoderConfig.from_dict(meta["decoder"])
    stats = {}
    tensors = {}
    for name, tensor in checkpoint.tensors.items():
        if name.startswith(_STATS_PREFIX):
            stats[name[len(_STATS_PREFIX):]] = tensor
        else:
            tensors[name] = tensor.copy()
    params = ModelParameters(config=config, tensors=tensors,
                             seed=int(meta.get("seed", 0)))
    audio = AudioConfig(**meta["audio"])
    return params, stats, audio, meta


def convert(source, checkpoint, spec: UpstreamSpec,
            s: SpeakerEmbedding | None = None,
            dropout_seed: int = 0) -> MelSpectrogram:
    """Convert one source utterance into the target voice's mel spectrogram.

    ``source`` is a Waveform or an UtteranceRecord; ``s`` must be given
    exactly when the checkpointed model is speaker-conditioned.
    """
    params, stats, audio, _ = load_model(checkpoint)
    config = params.config
    if spec.feature_dim != config.input_dim:
        raise DimensionMismatchError(
            f"upstream produces {spec.feature_dim}-dim features but the "
            f"checkpoint was trained on {config.input_dim}-dim input"
        )
    if config.speaker_conditioned and s is None:
        raise MissingEmbeddingError("this checkpoint needs a target embedding")
    if not config.speaker_conditioned and s is not None:
        raise ExtraEmbeddingError(
            "target embedding supplied to a single-target checkpoint"
        )
    content = recognize(source, spec, audio)
    content = resample_features(content, audio.frame_shift_ms)
    frames = normalize(content.frames, stats["input_mean"], stats["input_std"])
    out = forward_free_running(params, frames, embedding=s,
                               dropout_seed=dropout_seed)
    mel = denormalize(out, stats["target_mean"], stats["target_std"])
    return MelSpectrogram(np.maximum(mel, LOG_MEL_FLOOR))


def average_embedding(embeddings) -> SpeakerEmbedding:
    """Mean of unit embeddings, re-normalized to the unit sphere."""
    embeddings = list(embeddings)
    if not embeddings:
        raise EmptyInputError("cannot average an empty list of embeddings")
    vectors = []
    dim = None
    for e in embeddings:
        vec = e.vector if isinstance(e, SpeakerEmbedding) else np.asarray(e, dtype=np.float64)
        if dim is None:
            dim = vec.size
        elif vec.size != dim:
            raise DimensionMismatchError(
                f"embedding dims disagree: {dim} vs {vec.size}"
            )
        vectors.append(vec)
    mean = np.mean(vectors, axis=0)
    norm = float(np.linalg.norm(mean))
    if norm < 1e-8:
        raise ZeroMeanVectorError(
            "embeddings average to (near) zero; cannot renormalize"
        )
    return SpeakerEmbedding(mean / norm)


# --- vocoding -------------------------------------------------------------------

def vocode_native(mel, audio: AudioConfig) -> Waveform:
    """Iterative phase reconstruction from the mel, no external model.

    Output length is trimmed to T x hop samples; amplitude is scaled down
    when the peak exceeds 1 (never boosted, so silence stays silent).
    """
    frames = mel.frames if isinstance(mel, MelSpectrogram) else np.asarray(mel, dtype=np.float64)
    if not np.all(np.isfinite(frames)):
        raise NonFiniteInputError("mel contains non-finite values")
    energies = np.exp(frames)
    fb = mel_filterbank(audio.sample_rate, audio.win_length, audio.n_mels,
                        audio.fmin, audio.fmax)
    # energies ~ |S| @ fb.T; invert with the pseudo-inverse, clip negatives
    magnitudes = np.maximum(energies @ np.linalg.pinv(fb).T, 0.0)
    wave = griffin_lim(magnitudes, audio.win_length, audio.hop_length,
                       n_iters=audio.griffin_lim_iters)
    wave = wave[: frames.shape[0] * audio.hop_length]
    peak = float(np.max(np.abs(wave))) if wave.size else 0.0
    if peak > 1.0:
        wave = wave / peak
    return Waveform(wave, audio.sample_rate)


def _command_list(command) -> list[str]:
    if isinstance(command, (str, Path)):
        return shlex.split(str(command))
    return [str(c) for c in command]


def vocode_external(mel, command, audio: AudioConfig) -> Waveform:
    """Run an external vocoder process on one mel spectrogram.

    The adapter receives the mel as a binary feature file and must write a
    RIFF/PCM wav to the given output path.  Its output is resampled to the
    working rate when it uses a different one.
    """
    frames = mel.frames if isinstance(mel, MelSpectrogram) else np.asarray(mel, dtype=np.float64)
    seq = FeatureSequence(frames.astype(np.float32), audio.frame_shift_ms,
                          source_name="mel")
    with tempfile.TemporaryDirectory(prefix="vocoder_") as tmp:
        mel_path = Path(tmp) / "input.s3vc"
        wav_path = Path(tmp) / "output.wav"
        write_features(mel_path, seq)
        proc = subprocess.run(
            _command_list(command) + [str(mel_path), str(wav_path)],
            capture_output=True, text=True,
        )
        if proc.returncode != 0:
            raise AdapterError(
                f"vocoder exited with status {proc.returncode}", proc.stderr
            )
        if not wav_path.exists():
            raise AdapterError("vocoder wrote no output file", proc.stderr)
        try:
            return load_waveform(wav_path, target_rate=audio.sample_rate)
        except Exception as exc:
            raise AdapterError(f"vocoder output unreadable: {exc}", proc.stderr)


def vocode(mel, audio: AudioConfig, vocoder: str = "native") -> Waveform:
    """Dispatch on a vocoder selector: "native" or "external:<command>"."""
    if vocoder == "native":
        return vocode_native(mel, audio)
    if vocoder.startswith("external:"):
        return vocode_external(mel, vocoder[len("external:"):], audio)
    raise AdapterError(f"unknown vocoder selector {vocoder!r}")


# --- speaker encoder --------------------------------------------------------------

def speaker_encoder_adapter(wave_or_path, command, cache_dir=None,
                            utt_id: str | None = None,
                            expected_dim: int | None = None) -> SpeakerEmbedding:
    """Extract a speaker embedding via an external encoder process.

    With ``cache_dir`` and ``utt_id`` set, a previously extracted embedding is
    reused without spawning anything; fresh results are cached atomically.
    """
    if cache_dir is not None and utt_id is not None:
        cached = feature_path(cache_dir, utt_id)
        if cached.exists():
            return read_embedding(cached, expected_dim)

    with tempfile.TemporaryDirectory(prefix="spkenc_") as tmp:
        tmp = Path(tmp)
        if isinstance(wave_or_path, Waveform):
            wav_path = tmp / "input.wav"
            save_waveform(wav_path, wave_or_path)
        else:
            wav_path = Path(wave_or_path)
        out_path = tmp / "embedding.s3vc"
        proc = subprocess.run(
            _command_list(command) + [str(wav_path), str(out_path)],
            capture_output=True, text=True,
        )
        if proc.returncode != 0:
            raise AdapterError(
                f"speaker encoder exited with status {proc.returncode}", proc.stderr
            )
        if not out_path.exists():
            raise AdapterError("speaker encoder wrote no output file", proc.stderr)
        embedding = read_embedding(out_path, expected_dim)
        if cache_dir is not None and utt_id is not None:
            Path(cache_dir).mkdir(parents=True, exist_ok=True)
            seq = read_features(out_path)
            write_features(feature_path(cache_dir, utt_id), seq)
        return embedding


def read_embedding(path, expected_dim=None) -> SpeakerEmbedding:
    seq = read_features(path)
    if len(seq) != 1:
        raise DimensionMismatchError(
            f"{path}: expected a single embedding row, got {len(seq)} frames"
        )
    vec = np.asarray(seq.frames[0], dtype=np.float64)
    if expected_dim is not None and vec.size != expected_dim:
        raise DimensionMismatchError(
            f"{path}: embedding dim {vec.size} != expected {expected_dim}"
        )
    return SpeakerEmbedding.from_raw(vec)
