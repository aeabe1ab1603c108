"""Speech synthesizer adapters used by the dataset builder.

The bundled pseudo-speech adapter turns each transcript character into a
fixed number of 80-dim feature frames derived from a seeded hash of the
character, plus small seeded noise.  It stands in for real TTS at desk scale:
deterministic, fast, and with audio duration an affine function of transcript
length.  External TTS engines plug in behind the same call shape as thin
process-boundary clients producing waveform files.
"""

from __future__ import annotations

import shlex
import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol, Union

import numpy as np

from .features import N_MELS, FrameFeatures
from .util import stable_hash_hex, stable_hash_int


@dataclass(frozen=True)
class VoiceConfig:
    """One vocal identity; the seed shifts the per-character patterns."""

    name: str = "voice0"
    seed: int = 0


class SynthesizerAdapter(Protocol):
    name: str
    deterministic: bool
    concurrency_safe: bool

    def synth(
        self, text: str, voice: VoiceConfig, seed: int = 0
    ) -> Union[FrameFeatures, str]: ...


class PseudoSpeechSynthesizer:
    """Deterministic text-to-features adapter (no external TTS dependency).

    ``subspace_dim`` controls acoustic confusability: with a low-rank
    character subspace, distinct characters share feature directions and can
    only be disambiguated in context, which is what makes the task
    speech-like rather than a lookup table.
    """

    name = "pseudo"
    deterministic = True
    concurrency_safe = True

    def __init__(
        self,
        frames_per_char: int = 4,
        noise_scale: float = 0.05,
        frame_rate: float = 100.0,
        subspace_dim: Optional[int] = None,
    ):
        if frames_per_char < 1:
            raise ValueError("frames_per_char must be >= 1")
        if subspace_dim is not None and not 1 <= subspace_dim <= N_MELS:
            raise ValueError(f"subspace_dim must be in [1, {N_MELS}]")
        self.frames_per_char = frames_per_char
        self.noise_scale = noise_scale
        self.frame_rate = frame_rate
        self.subspace_dim = subspace_dim
        self._char_cache: dict[tuple[str, int], np.ndarray] = {}
        self._basis_cache: dict[int, np.ndarray] = {}

    def _basis(self, voice_seed: int) -> np.ndarray:
        basis = self._basis_cache.get(voice_seed)
        if basis is None:
            rng = np.random.default_rng(stable_hash_int("basis", voice_seed))
            basis = rng.normal(0.0, 1.0, size=(self.subspace_dim, N_MELS))
            basis /= np.linalg.norm(basis, axis=1, keepdims=True)
            self._basis_cache[voice_seed] = basis
        return basis

    def _char_pattern(self, ch: str, voice_seed: int) -> np.ndarray:
        key = (ch, voice_seed)
        pattern = self._char_cache.get(key)
        if pattern is None:
            rng = np.random.default_rng(stable_hash_int("char", ch, voice_seed))
            if self.subspace_dim is None:
                pattern = rng.normal(0.0, 1.0, size=N_MELS)
            else:
                coeff = rng.normal(0.0, 1.0, size=self.subspace_dim)
                pattern = coeff @ self._basis(voice_seed) * np.sqrt(N_MELS / self.subspace_dim)
            self._char_cache[key] = pattern
        return pattern

    def synth(self, text: str, voice: VoiceConfig, seed: int = 0) -> FrameFeatures:
        if not text:
            text = " "  # silence placeholder; features need >= 1 frame
        base = np.stack([self._char_pattern(ch, voice.seed) for ch in text])
        frames = np.repeat(base, self.frames_per_char, axis=0)
        if self.noise_scale > 0:
            rng = np.random.default_rng(
                stable_hash_int("noise", text, voice.name, voice.seed, seed)
            )
            frames = frames + rng.normal(0.0, self.noise_scale, size=frames.shape)
        return FrameFeatures(frames=frames, frame_rate=self.frame_rate)

    def duration_of(self, text: str) -> float:
        """Affine in transcript length by construction."""
        return max(len(text), 1) * self.frames_per_char / self.frame_rate


class ExternalCommandSynthesizer:
    """Thin client around an external TTS command.

    The command template receives ``{text}`` and ``{out}`` placeholders and
    must write a waveform file to ``{out}``.  Outputs are cached by content
    hash so repeated builds do not re-invoke the engine.
    """

    deterministic = False
    concurrency_safe = False

    def __init__(self, command: str, cache_dir: Union[str, Path], name: Optional[str] = None):
        self.command = command
        self.cache_dir = Path(cache_dir)
        self.name = name or f"external:{shlex.split(command)[0]}"

    def synth(self, text: str, voice: VoiceConfig, seed: int = 0) -> str:
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        out = self.cache_dir / f"{stable_hash_hex(text, voice.name, voice.seed)[:24]}.wav"
        if not out.exists():
            cmd = [
                part.format(text=text, out=str(out), voice=voice.name)
                for part in shlex.split(self.command)
            ]
            subprocess.run(cmd, check=True, capture_output=True)
            if not out.exists():
                raise RuntimeError(f"external synthesizer produced no file at {out}")
        return str(out)
