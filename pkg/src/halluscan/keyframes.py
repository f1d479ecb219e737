"""Keyframe selection by density peaks and detail-frame mining.

Each frame i gets a local density rho_i (how many neighbours sit within a
cutoff distance d_c, or a Gaussian-weighted mass), a relative distance
delta_i (how far the nearest denser frame is; the densest frame takes the
maximum distance instead), and a score gamma_i = rho_i * delta_i. The m
frames with the largest gamma become keyframes. Between consecutive
anchor frames, an anchor walk collects detail frames whose distance to the
running anchor exceeds tau_d.
"""

import dataclasses
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from .errors import ContractError, ValidationError
from .frames import FrameSet, frame_distance

KERNELS = ("gaussian", "cutoff")


@dataclasses.dataclass(frozen=True)
class DensityStats:
    rho: np.ndarray
    delta: np.ndarray
    gamma: np.ndarray

    def validate(self) -> "DensityStats":
        n = self.rho.shape[0]
        if self.delta.shape[0] != n or self.gamma.shape[0] != n:
            raise ValidationError("rho, delta, gamma must share one length")
        for name, arr in (("rho", self.rho), ("delta", self.delta), ("gamma", self.gamma)):
            if not np.all(np.isfinite(arr)):
                raise ValidationError("%s has non-finite entries" % (name,))
        if np.max(np.abs(self.gamma - self.rho * self.delta), initial=0.0) > 1e-12:
            raise ValidationError("gamma does not equal rho * delta")
        return self


@dataclasses.dataclass(frozen=True)
class KeyframeSet:
    indices: Tuple[int, ...]
    m: int

    def validate(self) -> "KeyframeSet":
        if len(self.indices) != self.m:
            raise ValidationError("keyframe count disagrees with m")
        if list(self.indices) != sorted(set(self.indices)):
            raise ValidationError("keyframe indices must be strictly increasing")
        return self


@dataclasses.dataclass(frozen=True)
class KeyframeCluster:
    keyframe_index: int
    detail_indices: Tuple[int, ...]
    cluster_id: int

    def frame_indices(self) -> Tuple[int, ...]:
        """All member frames, keyframe included, in index order."""
        return tuple(sorted((self.keyframe_index,) + self.detail_indices))

    def validate(self) -> "KeyframeCluster":
        if self.keyframe_index in self.detail_indices:
            raise ValidationError("keyframe may not appear among its detail frames")
        if list(self.detail_indices) != sorted(set(self.detail_indices)):
            raise ValidationError("detail indices must be strictly increasing")
        return self


@dataclasses.dataclass(frozen=True)
class ClusterSet:
    clusters: Tuple[KeyframeCluster, ...]

    def validate(self) -> "ClusterSet":
        seen = set()
        for cluster in self.clusters:
            cluster.validate()
            for d in cluster.detail_indices:
                if d in seen:
                    raise ValidationError("detail frame %d assigned twice" % (d,))
                seen.add(d)
        return self


def pairwise_distances(fs: FrameSet, metric: str = "cosine") -> np.ndarray:
    """Materialize the full symmetric distance matrix d_ij."""
    if fs.features is None:
        raise ContractError("frame set has no features")
    n = len(fs.features)
    out = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(i + 1, n):
            d = frame_distance(fs.features[i], fs.features[j], metric)
            out[i, j] = d
            out[j, i] = d
    return out


def choose_dc(distances: np.ndarray, neighbor_fraction: float = 0.02) -> float:
    """Lower quantile (linear interpolation) of the off-diagonal distances."""
    n = distances.shape[0]
    if n < 2:
        raise ContractError("d_c needs at least two frames")
    if not 0.0 < neighbor_fraction < 1.0:
        raise ContractError("neighbor_fraction must lie in (0, 1)")
    iu = np.triu_indices(n, k=1)
    offdiag = distances[iu]
    dc = float(np.quantile(offdiag, neighbor_fraction))
    if dc <= 0.0:
        dc = 1e-9
    return dc


def local_density(distances: np.ndarray, d_c: float, kernel: str = "gaussian") -> np.ndarray:
    if d_c <= 0:
        raise ContractError("d_c must be > 0")
    if kernel == "cutoff":
        # strict d_ij < d_c; the diagonal zero counts itself, so subtract it
        return ((distances < d_c).sum(axis=1) - 1).astype(np.float64)
    if kernel == "gaussian":
        w = np.exp(-((distances / d_c) ** 2))
        np.fill_diagonal(w, 0.0)
        return w.sum(axis=1)
    raise ContractError("unknown kernel: %r" % (kernel,))


def relative_distance(distances: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """delta_i = min distance to a strictly denser frame, else the row max."""
    n = distances.shape[0]
    if rho.shape[0] != n:
        raise ContractError("rho length disagrees with the distance matrix")
    delta = np.zeros(n, dtype=np.float64)
    for i in range(n):
        denser = rho > rho[i]
        if np.any(denser):
            delta[i] = float(distances[i, denser].min())
        else:
            delta[i] = float(distances[i].max())
    return delta


def density_stats(
    distances: np.ndarray, d_c: float, kernel: str = "gaussian"
) -> DensityStats:
    rho = local_density(distances, d_c, kernel)
    delta = relative_distance(distances, rho)
    return DensityStats(rho=rho, delta=delta, gamma=rho * delta).validate()


def select_keyframes(stats: DensityStats, m: int) -> KeyframeSet:
    """The m frames with the largest gamma; ties resolved to lower index."""
    n = stats.gamma.shape[0]
    if m < 1:
        raise ContractError("m must be >= 1")
    if m > n:
        raise ContractError("m=%d exceeds the frame count %d" % (m, n))
    order = np.lexsort((np.arange(n), -stats.gamma))
    chosen = sorted(int(i) for i in order[:m])
    return KeyframeSet(indices=tuple(chosen), m=m).validate()


def auto_m(stats: DensityStats, max_m: int = 8) -> int:
    """Pick m at the largest gap of the descending-sorted gamma sequence."""
    gamma = np.sort(stats.gamma)[::-1]
    n = gamma.shape[0]
    if n == 1:
        return 1
    limit = min(max_m, n - 1)
    gaps = gamma[:limit] - gamma[1 : limit + 1]
    return int(np.argmax(gaps)) + 1


def build_index_set(keyframes: KeyframeSet, n: int) -> Tuple[int, ...]:
    """H: the first frame, every keyframe, and the last frame, sorted."""
    if n < 1:
        raise ContractError("frame count must be >= 1")
    members = {0, n - 1} | set(keyframes.indices)
    return tuple(sorted(members))


def extract_detail_frames(
    fs: FrameSet,
    H: Sequence[int],
    tau_d: float,
    metric: str = "cosine",
) -> Tuple[int, ...]:
    """Anchor walk between consecutive H members.

    For a pair (i, j) with d(f_i, f_j) > tau_d, walk the interior frames
    keeping an anchor t (initially i); every frame farther than tau_d from
    the anchor is kept as a detail frame and becomes the new anchor.
    """
    if fs.features is None:
        raise ContractError("frame set has no features")
    n = len(fs.features)
    if tau_d <= 0:
        raise ContractError("tau_d must be > 0")
    if len(H) == 0 or list(H) != sorted(set(H)):
        raise ContractError("H must be sorted and duplicate-free")
    if H[0] != 0 or H[-1] != n - 1:
        raise ContractError("H must start at the first frame and end at the last")

    feats = fs.features
    details: List[int] = []
    for a, b in zip(H, H[1:]):
        if frame_distance(feats[a], feats[b], metric) <= tau_d:
            continue
        anchor = a
        for t in range(a + 1, b):
            if frame_distance(feats[anchor], feats[t], metric) > tau_d:
                details.append(t)
                anchor = t
    return tuple(details)


def build_clusters(
    keyframes: KeyframeSet, details: Iterable[int], H: Sequence[int]
) -> ClusterSet:
    """Assign each detail frame to the keyframe owning its H segment.

    A segment between consecutive keyframes belongs to the earlier one; the
    leading segment (before the first keyframe) belongs to the first
    keyframe and the trailing segment to the last.
    """
    kset = set(keyframes.indices)
    details = sorted(details)
    if kset & set(details):
        raise ContractError("detail frames overlap keyframes")
    owners = {k: [] for k in keyframes.indices}
    first_kf = keyframes.indices[0]
    segments = list(zip(H, H[1:]))
    for d in details:
        segment = next(((a, b) for a, b in segments if a < d < b), None)
        if segment is None:
            raise ContractError("detail frame %d lies outside every H segment" % (d,))
        a, _ = segment
        owners[a if a in kset else first_kf].append(d)
    clusters = tuple(
        KeyframeCluster(
            keyframe_index=k, detail_indices=tuple(owners[k]), cluster_id=cid
        )
        for cid, k in enumerate(keyframes.indices)
    )
    return ClusterSet(clusters=clusters).validate()
