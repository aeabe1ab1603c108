"""Frame-level acoustic features at the model's input boundary."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

N_MELS = 80


@dataclass(frozen=True, eq=False)
class FrameFeatures:
    """Log-mel style features: [time, 80] matrix plus the frame rate."""

    frames: np.ndarray
    frame_rate: float = 100.0

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        object.__setattr__(self, "frames", frames)
        if frames.ndim != 2 or frames.shape[1] != N_MELS:
            raise ValueError(f"expected [time, {N_MELS}] features, got shape {frames.shape}")
        if frames.shape[0] < 1:
            raise ValueError("features must contain at least one frame")
        if not np.all(np.isfinite(frames)):
            raise ValueError("features contain non-finite values")
        if self.frame_rate <= 0:
            raise ValueError("frame rate must be positive")

    @property
    def duration(self) -> float:
        return self.frames.shape[0] / self.frame_rate
