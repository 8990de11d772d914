from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ConfigError


@dataclass(frozen=True)
class Utterance:
    start: float
    end: float
    text: str
    is_gap: bool = False


@dataclass(frozen=True)
class FineClip:
    index: int
    start: float
    end: float
    text: str
    is_gap: bool = False

    @property
    def midpoint(self) -> float:
        return (self.start + self.end) / 2.0


@dataclass(frozen=True)
class MidSegment:
    index: int
    start: float
    end: float
    transcript: str = ""
    media_ref: str | None = None
    fine_clip_indices: tuple[int, ...] = ()

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class SegmentAnnotation:
    segment_index: int
    visual_keypoints: tuple[str, ...]
    audio_keypoints: tuple[str, ...]
    keywords: tuple[str, ...]
    description: str
    embedding_desc: tuple[float, ...]
    # one per keypoint, visual first then audio
    embedding_keypoints: tuple[tuple[float, ...], ...]

    @property
    def keypoints(self) -> tuple[str, ...]:
        return self.visual_keypoints + self.audio_keypoints


@dataclass(frozen=True)
class SegmentationConfig:
    merge_threshold_s: float = 30.0
    max_duration_s: float = 120.0
    overlap_s: float = 2.5
    gap_fill_threshold_s: float = 5.0
    no_speech_window_s: float = 30.0

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if not 0 < self.overlap_s < self.merge_threshold_s <= self.max_duration_s:
            raise ConfigError(
                "segmentation requires 0 < overlap_s < merge_threshold_s <= max_duration_s, got "
                f"overlap_s={self.overlap_s}, merge_threshold_s={self.merge_threshold_s}, "
                f"max_duration_s={self.max_duration_s}"
            )
        if self.gap_fill_threshold_s < 0:
            raise ConfigError("gap_fill_threshold_s must be non-negative")
        if self.no_speech_window_s <= self.overlap_s:
            raise ConfigError("no_speech_window_s must exceed overlap_s")

    @property
    def split_stride_s(self) -> float:
        return self.merge_threshold_s - self.overlap_s


@dataclass(frozen=True)
class HierarchicalMemory:
    video_id: str
    duration: float
    fine_clips: tuple[FineClip, ...]
    mid_segments: tuple[MidSegment, ...]
    annotations: tuple[SegmentAnnotation, ...]
    global_description: str
    embedding_dim: int
    build_config: SegmentationConfig = field(default_factory=SegmentationConfig)

    def __post_init__(self) -> None:
        if len(self.annotations) != len(self.mid_segments):
            raise ValueError(
                f"{len(self.annotations)} annotations for {len(self.mid_segments)} mid segments"
            )
        if self.embedding_dim <= 0:
            raise ValueError("embedding_dim must be positive")

    @property
    def n_mid(self) -> int:
        return len(self.mid_segments)

    @property
    def n_fine(self) -> int:
        return len(self.fine_clips)

    def segment(self, index: int) -> MidSegment:
        """Return the mid segment with 1-based ``index``."""
        if not 1 <= index <= len(self.mid_segments):
            raise IndexError(f"segment index {index} outside 1..{len(self.mid_segments)}")
        return self.mid_segments[index - 1]

    def annotation(self, index: int) -> SegmentAnnotation:
        if not 1 <= index <= len(self.annotations):
            raise IndexError(f"segment index {index} outside 1..{len(self.annotations)}")
        return self.annotations[index - 1]
