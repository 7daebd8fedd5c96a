"""Sliding window of recent dense frame features with camera-aware readout.

The bank keeps the last ``capacity`` (feature, camera) pairs in temporal
order. Reads attend over the concatenation of all buffered tokens; each
entry contributes a scalar key bias and a scalar value gate derived from
the difference between the current camera token and the entry's camera
token, so the readout is modulated by how far the viewpoint has moved.
Reads always happen against the pre-write buffer; writes return a new bank.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import Matrix, Mlp, as_matrix, attention, mlp_forward


@dataclass(frozen=True)
class ContextEntry:
    feature: Matrix
    camera: Matrix
    frame_index: int


@dataclass(frozen=True)
class ContextBankParams:
    """Camera-delta MLPs (d_g -> 1 each) and d->d attention projections."""

    mlp_key_bias: Mlp
    mlp_value_gate: Mlp
    proj_q: Matrix
    proj_k: Matrix
    proj_v: Matrix
    head_count: int = 1

    def __post_init__(self):
        for name in ("proj_q", "proj_k", "proj_v"):
            m = as_matrix(getattr(self, name), name)
            m.setflags(write=False)
            object.__setattr__(self, name, m)
        d = self.proj_q.shape[0]
        for name in ("proj_q", "proj_k", "proj_v"):
            if getattr(self, name).shape != (d, d):
                raise ValueError(f"{name} must be {d}x{d}")
        if self.mlp_key_bias.out_dim != 1 or self.mlp_value_gate.out_dim != 1:
            raise ValueError("camera-delta MLPs must produce scalars")
        if self.mlp_key_bias.in_dim != self.mlp_value_gate.in_dim:
            raise ValueError("camera-delta MLPs must share their input width")
        if self.mlp_value_gate.output_activation != "sigmoid":
            raise ValueError("value gate needs a sigmoid output")


def camera_delta_signals(cam_now: Matrix, cam_entry: Matrix,
                         p: ContextBankParams) -> tuple[float, float]:
    """Scalar (key bias, value gate) from the camera-feature difference.

    The bias is unbounded; the gate is sigmoid-squashed into (0, 1).
    """
    cam_now = as_matrix(cam_now, "current camera token")
    cam_entry = as_matrix(cam_entry, "stored camera token")
    if cam_now.shape != cam_entry.shape:
        raise ValueError("camera token shapes differ")
    delta = cam_now - cam_entry
    b = float(mlp_forward(p.mlp_key_bias, delta)[0, 0])
    a = float(mlp_forward(p.mlp_value_gate, delta)[0, 0])
    return b, a


@dataclass(frozen=True)
class ContextBank:
    """Bounded, temporally ordered window of recent calibrated frames."""

    entries: tuple[ContextEntry, ...]
    capacity: int

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")
        if len(self.entries) > self.capacity:
            raise ValueError("window holds more entries than its capacity")
        indices = [e.frame_index for e in self.entries]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise ValueError("frame indices must be strictly increasing")

    @classmethod
    def empty(cls, capacity: int) -> "ContextBank":
        return cls(entries=(), capacity=capacity)

    def frame_indices(self) -> tuple[int, ...]:
        return tuple(e.frame_index for e in self.entries)

    def read(self, feature: Matrix, camera: Matrix, p: ContextBankParams,
             modulated: bool = True) -> Matrix:
        """Attention readout over the buffered tokens.

        Keys get each entry's scalar bias added to every channel; values are
        scaled by each entry's scalar gate. With ``modulated=False`` the
        signals degenerate to bias 0 and gate 1 (plain cross-attention).
        An empty window reads as a zero matrix.
        """
        feature = as_matrix(feature, "query feature")
        if not self.entries:
            return np.zeros((feature.shape[0], p.proj_q.shape[1]))
        q = feature @ p.proj_q
        keys, values = [], []
        for e in self.entries:
            if modulated:
                b, a = camera_delta_signals(camera, e.camera, p)
            else:
                b, a = 0.0, 1.0
            keys.append(e.feature @ p.proj_k + b)
            values.append((e.feature @ p.proj_v) * a)
        return attention(q, np.vstack(keys), np.vstack(values), p.head_count)

    def write(self, feature: Matrix, camera: Matrix, frame_index: int) -> "ContextBank":
        """Append a frame, dropping the oldest entry past capacity."""
        if self.entries and frame_index <= self.entries[-1].frame_index:
            raise ValueError(
                f"frame index {frame_index} is not past the newest stored "
                f"index {self.entries[-1].frame_index}"
            )
        feature = as_matrix(feature, "feature")
        camera = as_matrix(camera, "camera")
        entries = self.entries + (ContextEntry(feature, camera, frame_index),)
        if len(entries) > self.capacity:
            entries = entries[1:]
        return ContextBank(entries=entries, capacity=self.capacity)
