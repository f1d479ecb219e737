"""Frame ingestion, feature extraction, and frame-to-frame distances.

A video enters the pipeline either as a directory of image files (frame
order is the lexicographic filename order) or as a container file that an
external decoder command expands into such a directory. Frames are sampled
uniformly with a configurable stride, then each sampled frame is described
by a fixed-dimension feature vector from a registered extractor.
"""

import concurrent.futures
import dataclasses
import os
import shlex
import subprocess
import tempfile
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from PIL import Image

from .errors import ConfigError, ContractError, EmptyInputError, InputError

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg")


@dataclasses.dataclass(frozen=True)
class Frame:
    """One uniformly sampled frame.

    index is the position in the sampled sequence; source_index is the
    frame number in the original container.
    """

    index: int
    source_index: int
    timestamp_s: float
    image_ref: Optional[str] = None


@dataclasses.dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    is_zero: bool = False

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    @staticmethod
    def raw(values: Sequence[float]) -> "FeatureVector":
        vec = np.asarray(values, dtype=np.float64)
        return FeatureVector(values=vec, is_zero=bool(np.linalg.norm(vec) == 0.0))

    @staticmethod
    def normalized(values: Sequence[float]) -> "FeatureVector":
        """L2-normalize; an all-zero input stays zero and is flagged."""
        vec = np.asarray(values, dtype=np.float64)
        if not np.all(np.isfinite(vec)):
            raise ContractError("feature vector has non-finite entries")
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            return FeatureVector(values=vec, is_zero=True)
        return FeatureVector(values=vec / norm, is_zero=False)


@dataclasses.dataclass
class FrameSet:
    frames: List[Frame]
    features: Optional[List[FeatureVector]] = None
    total_duration_s: float = 0.0

    def __len__(self) -> int:
        return len(self.frames)


def _hist768(image: Image.Image) -> np.ndarray:
    """Default extractor: 8x8x8 RGB histogram + 16x16 gray thumbnail."""
    rgb = np.asarray(image.convert("RGB"), dtype=np.int64)
    bins = rgb // 32
    idx = bins[..., 0] * 64 + bins[..., 1] * 8 + bins[..., 2]
    hist = np.bincount(idx.ravel(), minlength=512).astype(np.float64)
    hist /= float(idx.size)
    thumb = image.convert("L").resize((16, 16), Image.BILINEAR)
    gray = np.asarray(thumb, dtype=np.float64).ravel() / 255.0
    return np.concatenate([hist, gray])


EXTRACTORS: Dict[str, Callable[[Image.Image], np.ndarray]] = {
    "hist768": _hist768,
}


def register_extractor(name: str, fn: Callable[[Image.Image], np.ndarray]) -> None:
    EXTRACTORS[name] = fn


def get_extractor(name: str) -> Callable[[Image.Image], np.ndarray]:
    try:
        return EXTRACTORS[name]
    except KeyError:
        raise ConfigError("unknown extractor: %r" % (name,))


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 and nb == 0.0:
        return 0.0
    if na == 0.0 or nb == 0.0:
        return 1.0
    d = 1.0 - float(np.dot(a, b)) / (na * nb)
    return max(d, 0.0)


def _euclidean(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b))


def _absdiff(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sum(np.abs(a - b)))


METRICS: Dict[str, Callable[[np.ndarray, np.ndarray], float]] = {
    "cosine": _cosine,
    "euclidean": _euclidean,
    "absdiff": _absdiff,
}


def get_metric(name: str) -> Callable[[np.ndarray, np.ndarray], float]:
    try:
        return METRICS[name]
    except KeyError:
        raise ConfigError("unknown metric: %r" % (name,))


def frame_distance(a: FeatureVector, b: FeatureVector, metric: str = "cosine") -> float:
    if a.dim != b.dim:
        raise ContractError(
            "feature dimension mismatch: %d vs %d" % (a.dim, b.dim)
        )
    # d(x, x) = 0 must hold exactly, not merely to rounding.
    if np.array_equal(a.values, b.values):
        return 0.0
    return get_metric(metric)(a.values, b.values)


def _list_image_files(directory: str) -> List[str]:
    try:
        names = os.listdir(directory)
    except OSError as exc:
        raise InputError("cannot list %s: %s" % (directory, exc))
    picked = [
        n for n in sorted(names) if n.lower().endswith(IMAGE_EXTENSIONS)
    ]
    return [os.path.join(directory, n) for n in picked]


def _ingest_directory(directory: str, stride: int, fps: float) -> FrameSet:
    paths = _list_image_files(directory)
    n_source = len(paths)
    if n_source == 0:
        raise EmptyInputError("no decodable frames in %s" % (directory,))
    frames = []
    for k, src in enumerate(range(0, n_source, stride)):
        frames.append(
            Frame(
                index=k,
                source_index=src,
                timestamp_s=src / fps,
                image_ref=paths[src],
            )
        )
    return FrameSet(frames=frames, total_duration_s=n_source / fps)


def ingest(
    source: str,
    stride: int = 5,
    synthetic_fps: float = 30.0,
    decoder_cmd: Optional[str] = None,
) -> FrameSet:
    """Sample every stride-th source frame from a directory or container.

    Container files are expanded by decoder_cmd, a command template with
    {input} and {output} placeholders that must write an image directory.
    """
    if stride < 1:
        raise ContractError("stride must be >= 1")
    if synthetic_fps <= 0:
        raise ContractError("synthetic_fps must be > 0")
    if os.path.isdir(source):
        return _ingest_directory(source, stride, synthetic_fps)
    if os.path.isfile(source):
        if not decoder_cmd:
            raise InputError(
                "source %s is a container file but no decoder_cmd is configured"
                % (source,)
            )
        out_dir = tempfile.mkdtemp(prefix="halluscan-frames-")
        argv = [
            part.format(input=source, output=out_dir)
            for part in shlex.split(decoder_cmd)
        ]
        try:
            proc = subprocess.run(argv, capture_output=True, text=True)
        except OSError as exc:
            raise InputError("decoder command failed to start: %s" % (exc,))
        if proc.returncode != 0:
            raise InputError(
                "decoder exited with %d: %s" % (proc.returncode, proc.stderr.strip())
            )
        return _ingest_directory(out_dir, stride, synthetic_fps)
    raise InputError("source does not exist: %s" % (source,))


def _features_for(path: str, extract: Callable[[Image.Image], np.ndarray]) -> np.ndarray:
    with Image.open(path) as img:
        return extract(img)


def extract_features(
    fs: FrameSet, extractor: str = "hist768", workers: int = 1
) -> FrameSet:
    """Attach one L2-normalized FeatureVector per frame.

    Results are written back by frame index, so worker count never changes
    the output.
    """
    if not fs.frames:
        raise ContractError("frame set is empty")
    extract = get_extractor(extractor)
    refs = []
    for frame in fs.frames:
        if frame.image_ref is None:
            raise ContractError(
                "frame %d has no image to extract features from" % (frame.index,)
            )
        refs.append(frame.image_ref)

    raw: List[Optional[np.ndarray]] = [None] * len(refs)
    failures: List[str] = []

    def work(i: int) -> None:
        try:
            raw[i] = _features_for(refs[i], extract)
        except Exception as exc:  # noqa: BLE001 - aggregated below
            failures.append("frame %d (%s): %s" % (i, refs[i], exc))

    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, range(len(refs))))
    else:
        for i in range(len(refs)):
            work(i)
    if failures:
        raise InputError(
            "feature extraction failed for %d frame(s): %s"
            % (len(failures), "; ".join(sorted(failures)))
        )

    features = [FeatureVector.normalized(vec) for vec in raw]
    dims = {fv.dim for fv in features}
    if len(dims) != 1:
        raise ContractError("extractor produced mixed dimensions: %s" % (sorted(dims),))
    return FrameSet(
        frames=fs.frames, features=features, total_duration_s=fs.total_duration_s
    )


def synthetic_frameset(vectors: Sequence[Sequence[float]], fps: float = 1.0) -> FrameSet:
    """Build an image-free FrameSet from raw feature rows. Test scaffolding."""
    frames = [
        Frame(index=i, source_index=i, timestamp_s=i / fps, image_ref=None)
        for i in range(len(vectors))
    ]
    features = [FeatureVector.raw(v) for v in vectors]
    return FrameSet(
        frames=frames,
        features=features,
        total_duration_s=max(len(vectors), 1) / fps,
    )
