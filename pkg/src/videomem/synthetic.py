"""Synthetic streams: deterministic stand-ins for the encoder stack.

A scenario is a labelled frame sequence. Every content label owns a visual
anchor matrix (token means form an orthonormal set, so distinct labels are
far apart), a geometry anchor, a camera anchor pose, and a semantic anchor.
Frames embed as anchor + seeded per-frame noise; with noise_scale = 0 a
revisited label reproduces its tokens and camera exactly. The semantic
embedding is an exact relevance oracle: its normalized similarity to the
question vector equals the frame's planted relevance strength.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .config import POSE_DIM, Dims
from .geometry_fusion import FrameInputs
from .jsonio import canonical_dumps
from .rng import stream

SCENARIO_FORMAT_VERSION = 1


@dataclass(frozen=True)
class FrameSpec:
    content_label: int
    relevance_strength: float
    camera_pose: tuple[float, float, float]
    noise_scale: float

    def __post_init__(self):
        if not (0.0 <= self.relevance_strength <= 1.0):
            raise ValueError("relevance_strength must lie in [0, 1]")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be >= 0")
        if len(self.camera_pose) != POSE_DIM:
            raise ValueError(f"camera_pose must have {POSE_DIM} components")
        object.__setattr__(self, "camera_pose", tuple(float(v) for v in self.camera_pose))


@dataclass(frozen=True)
class Scenario:
    """A deterministic frame stream with planted question relevance."""

    seed: int
    length: int
    frames: tuple[FrameSpec, ...]
    question_label: str
    relevant_indices: frozenset[int]

    def __post_init__(self):
        if self.length != len(self.frames):
            raise ValueError("length must match the number of frames")
        if not self.relevant_indices <= set(range(1, self.length + 1)):
            raise ValueError("relevant indices must reference frames 1..length")
        object.__setattr__(self, "relevant_indices", frozenset(self.relevant_indices))

    def frame_labels(self) -> dict[int, int]:
        """1-based frame index -> content label."""
        return {t + 1: f.content_label for t, f in enumerate(self.frames)}

    def to_json_obj(self) -> dict:
        return {
            "format_version": SCENARIO_FORMAT_VERSION,
            "seed": self.seed,
            "length": self.length,
            "question_label": self.question_label,
            "relevant_indices": sorted(self.relevant_indices),
            "frames": [
                {
                    "content_label": f.content_label,
                    "relevance_strength": f.relevance_strength,
                    "camera_pose": list(f.camera_pose),
                    "noise_scale": f.noise_scale,
                }
                for f in self.frames
            ],
        }

    def checksum(self) -> str:
        blob = canonical_dumps(self.to_json_obj(), float_repr=True)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def scenario_from_json_obj(data: dict) -> Scenario:
    if data.get("format_version") != SCENARIO_FORMAT_VERSION:
        raise ValueError(f"unsupported scenario format_version {data.get('format_version')!r}")
    frames = tuple(
        FrameSpec(
            content_label=f["content_label"],
            relevance_strength=f["relevance_strength"],
            camera_pose=tuple(f["camera_pose"]),
            noise_scale=f["noise_scale"],
        )
        for f in data["frames"]
    )
    return Scenario(
        seed=data["seed"],
        length=data["length"],
        frames=frames,
        question_label=data["question_label"],
        relevant_indices=frozenset(data["relevant_indices"]),
    )


def gen_scenario(seed: int, length: int, n_labels: int, relevant_fraction: float,
                 revisit_rate: float, noise_scale: float = 0.0,
                 question_label: str = "q") -> Scenario:
    """Random labelled stream with planted relevant labels.

    Each frame either revisits a previously seen label (probability
    ``revisit_rate``, forced once all labels have appeared) or introduces a
    fresh one. ceil(relevant_fraction * n_labels) labels are relevant;
    their frames get relevance strength 1, all others 0. Camera poses are
    each label's anchor pose plus a random-walk deviation scaled by
    ``noise_scale``.
    """
    if length < 1 or n_labels < 1:
        raise ValueError("length and n_labels must be >= 1")
    if not (0.0 <= relevant_fraction <= 1.0) or not (0.0 <= revisit_rate <= 1.0):
        raise ValueError("relevant_fraction and revisit_rate must lie in [0, 1]")
    if noise_scale < 0:
        raise ValueError("noise_scale must be >= 0")
    rng = stream(seed, "scenario")
    n_relevant = math.ceil(relevant_fraction * n_labels)
    relevant_labels = set(rng.permutation(n_labels)[:n_relevant].tolist())
    anchor_poses = label_poses(seed, n_labels)
    fresh = list(rng.permutation(n_labels))
    seen: list[int] = []
    walk = np.cumsum(rng.normal(0.0, 0.2, size=(length, POSE_DIM)), axis=0)
    frames = []
    for t in range(length):
        revisit = bool(seen) and (not fresh or rng.uniform() < revisit_rate)
        if revisit:
            label = int(seen[int(rng.integers(len(seen)))])
        else:
            label = int(fresh.pop(0))
            seen.append(label)
        pose = tuple(anchor_poses[label] + noise_scale * walk[t])
        frames.append(
            FrameSpec(
                content_label=label,
                relevance_strength=1.0 if label in relevant_labels else 0.0,
                camera_pose=pose,
                noise_scale=noise_scale,
            )
        )
    relevant_indices = frozenset(
        t + 1 for t, f in enumerate(frames) if f.content_label in relevant_labels
    )
    return Scenario(seed=seed, length=length, frames=tuple(frames),
                    question_label=question_label, relevant_indices=relevant_indices)


def gen_separable_scenario(seed: int, length: int, n_planted: int,
                           n_distractor_labels: int = 4,
                           question_label: str = "q") -> Scenario:
    """Noise-free stream where exactly ``n_planted`` labels are relevant.

    Each planted label appears exactly once, spread over the first three
    quarters of the stream so a chronological tail holds few of them; all
    other frames revisit a small distractor pool at relevance 0.
    """
    if n_planted < 1 or length < 4 * n_planted // 3 + 1:
        raise ValueError("stream too short to spread the planted frames")
    span = max(n_planted, (3 * length) // 4)
    positions = sorted({1 + (i * span) // n_planted for i in range(n_planted)})
    if len(positions) != n_planted:
        raise ValueError("stream too short to give each planted label its own frame")
    n_labels = n_planted + n_distractor_labels
    anchor_poses = label_poses(seed, n_labels)
    rng = stream(seed, "separable")
    planted_iter = iter(range(n_planted))
    frames = []
    for t in range(1, length + 1):
        if t in positions:
            label = next(planted_iter)
            strength = 1.0
        else:
            label = n_planted + int(rng.integers(n_distractor_labels))
            strength = 0.0
        frames.append(
            FrameSpec(
                content_label=label,
                relevance_strength=strength,
                camera_pose=tuple(anchor_poses[label]),
                noise_scale=0.0,
            )
        )
    return Scenario(seed=seed, length=length, frames=tuple(frames),
                    question_label=question_label,
                    relevant_indices=frozenset(positions))


@lru_cache(maxsize=32)
def _label_basis(seed: int, dim: int) -> np.ndarray:
    """Orthonormal rows used as label token-mean anchors."""
    g = stream(seed, "label-basis", dim).normal(size=(dim, dim))
    q, r = np.linalg.qr(g)
    q = q * np.sign(np.diag(r))  # fix QR sign ambiguity
    q = q.T.copy()
    q.setflags(write=False)
    return q


def label_mean(seed: int, label: int, dim: int) -> np.ndarray:
    basis = _label_basis(seed, dim)
    if not (0 <= label < dim):
        raise ValueError(
            f"label {label} does not fit the {dim}-row anchor basis; keep n_labels <= feature_dim"
        )
    return basis[label]


def label_poses(seed: int, n_labels: int) -> np.ndarray:
    rng = stream(seed, "label-poses")
    xy = rng.uniform(-5.0, 5.0, size=(n_labels, POSE_DIM - 1))
    heading = rng.uniform(-math.pi, math.pi, size=(n_labels, 1))
    return np.concatenate([xy, heading], axis=1)


@lru_cache(maxsize=4096)
def _visual_anchor(seed: int, label: int, tokens: int, dim: int) -> np.ndarray:
    """Label-anchored base matrix whose token mean is exactly the label mean."""
    x = stream(seed, "visual-anchor", label).normal(0.0, 0.5, size=(tokens, dim))
    x = x - x.mean(axis=0, keepdims=True)
    x = x + label_mean(seed, label, dim)
    x.setflags(write=False)
    return x


@lru_cache(maxsize=4096)
def _geometry_anchor(seed: int, label: int, tokens: int, dim: int) -> np.ndarray:
    x = stream(seed, "geom-anchor", label).normal(0.0, 0.5, size=(tokens, dim))
    x.setflags(write=False)
    return x


def encode_camera(pose, geom_dim: int) -> np.ndarray:
    """Camera token: raw pose in the leading channels, smooth features after."""
    pose = np.asarray(pose, dtype=np.float64).reshape(-1)
    if pose.shape[0] != POSE_DIM or geom_dim < POSE_DIM + 1:
        raise ValueError("pose/geom_dim mismatch")
    token = np.zeros((1, geom_dim))
    token[0, :POSE_DIM] = pose
    phase = 0.7 * pose[0] + 1.3 * pose[1] + 2.1 * pose[2]
    extra = np.arange(1, geom_dim - POSE_DIM + 1)
    token[0, POSE_DIM:] = np.sin(extra * phase)
    return token


def decode_camera(token) -> np.ndarray:
    """Recover the raw pose from an encoded camera token."""
    token = np.asarray(token, dtype=np.float64).reshape(-1)
    return token[:POSE_DIM].copy()


def embed_frame(spec: FrameSpec, frame_index: int, dims: Dims, seed: int) -> FrameInputs:
    """Token matrices for one frame.

    Visual tokens are the label anchor plus per-frame noise of magnitude
    noise_scale; geometry tokens are the label's geometry anchor shifted by
    the encoded camera pose; the camera token encodes the pose exactly.
    """
    visual = _visual_anchor(seed, spec.content_label, dims.visual_tokens, dims.feature_dim)
    if spec.noise_scale > 0:
        noise = stream(seed, "frame-noise", frame_index).normal(
            size=(dims.visual_tokens, dims.feature_dim)
        )
        visual = visual + spec.noise_scale * noise
    camera = encode_camera(spec.camera_pose, dims.geom_dim)
    geometry = (
        _geometry_anchor(seed, spec.content_label, dims.geom_tokens, dims.geom_dim) + camera
    )
    return FrameInputs(
        visual=visual,
        geometry=geometry,
        camera=camera,
        frame_index=frame_index,
        grid_h=dims.grid_h,
        grid_w=dims.grid_w,
    )


def _semantic_anchor(seed: int, key: str, dim: int) -> np.ndarray:
    v = stream(seed, "semantic", key).normal(size=dim)
    return v / np.linalg.norm(v)


def question_vector(seed: int, question_label: str, dim: int) -> np.ndarray:
    """Unit pooled question vector."""
    return _semantic_anchor(seed, f"question:{question_label}", dim)


def semantic_embedding(spec: FrameSpec, question_label: str, dims: Dims,
                       seed: int) -> np.ndarray:
    """Semantic vector whose normalized question similarity is exact.

    Built so cos(vector, question) = 2 * relevance_strength - 1: strength 1
    is collinear with the question anchor, strength 0 sits at its antipode,
    and intermediate strengths interpolate along a per-label orthogonal
    direction.
    """
    d = dims.feature_dim
    q_hat = question_vector(seed, question_label, d)
    raw = _semantic_anchor(seed, f"content:{spec.content_label}", d)
    ortho = raw - (raw @ q_hat) * q_hat
    norm = np.linalg.norm(ortho)
    if norm < 1e-9:
        fallback = np.zeros(d)
        fallback[int(np.argmin(np.abs(q_hat)))] = 1.0
        ortho = fallback - (fallback @ q_hat) * q_hat
        norm = np.linalg.norm(ortho)
    d_hat = ortho / norm
    c = 2.0 * spec.relevance_strength - 1.0
    return c * q_hat + math.sqrt(max(0.0, 1.0 - c * c)) * d_hat
