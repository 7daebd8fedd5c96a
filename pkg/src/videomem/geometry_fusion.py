"""Camera-guided geometry fusion.

Each frame arrives as visual tokens, geometry tokens, and a single camera
token. The camera conditions the geometry (a per-token bias and a
reliability gate), the visual tokens attend to that conditioned geometry,
and a camera-driven SwiGLU channel gate decides how much of the resulting
residual is injected back into the visual stream. The output is the
geometry-aware frame feature consumed by both memory banks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import Matrix, Mlp, as_matrix, attention, mlp_forward, silu


@dataclass(frozen=True)
class FrameInputs:
    """Raw per-frame token matrices plus grid layout.

    visual is (N_v, d) with N_v == grid_h * grid_w, geometry is (N_g, d_g),
    and camera is a single (1, d_g) token.
    """

    visual: Matrix
    geometry: Matrix
    camera: Matrix
    frame_index: int
    grid_h: int
    grid_w: int

    def __post_init__(self):
        v = as_matrix(self.visual, "visual tokens")
        g = as_matrix(self.geometry, "geometry tokens")
        c = as_matrix(self.camera, "camera token")
        if v.shape[0] < 1 or g.shape[0] < 1:
            raise ValueError("need at least one visual and one geometry token")
        if v.shape[0] != self.grid_h * self.grid_w:
            raise ValueError(
                f"{v.shape[0]} visual tokens do not tile a {self.grid_h}x{self.grid_w} grid"
            )
        if c.shape != (1, g.shape[1]):
            raise ValueError(f"camera token must be (1, {g.shape[1]}), got {c.shape}")
        for m in (v, g, c):
            m.setflags(write=False)
        object.__setattr__(self, "visual", v)
        object.__setattr__(self, "geometry", g)
        object.__setattr__(self, "camera", c)


@dataclass(frozen=True)
class GeometryFusionParams:
    """Projections and MLPs for the fusion block.

    proj_g / proj_c lift geometry and camera tokens from d_g to d;
    mlp_bias maps the 2d concatenation to a d-wide conditioning bias;
    mlp_gate maps the lifted geometry to a per-token reliability gate in
    (0, 1); proj_q/k/v/o are the d->d attention projections; and
    proj_camera_gate maps the camera token to 2d for the SwiGLU gate.
    """

    proj_g: Matrix
    proj_c: Matrix
    mlp_bias: Mlp
    mlp_gate: Mlp
    proj_q: Matrix
    proj_k: Matrix
    proj_v: Matrix
    proj_o: Matrix
    proj_camera_gate: Matrix
    head_count: int = 1

    def __post_init__(self):
        fields = ["proj_g", "proj_c", "proj_q", "proj_k", "proj_v", "proj_o", "proj_camera_gate"]
        for name in fields:
            m = as_matrix(getattr(self, name), name)
            m.setflags(write=False)
            object.__setattr__(self, name, m)
        d = self.proj_g.shape[1]
        d_g = self.proj_g.shape[0]
        if self.proj_c.shape != (d_g, d):
            raise ValueError("proj_c must match proj_g's dimensions")
        for name in ("proj_q", "proj_k", "proj_v", "proj_o"):
            if getattr(self, name).shape != (d, d):
                raise ValueError(f"{name} must be {d}x{d}")
        if self.mlp_bias.in_dim != 2 * d or self.mlp_bias.out_dim != d:
            raise ValueError("mlp_bias must map 2d -> d")
        if self.mlp_gate.in_dim != d or self.mlp_gate.out_dim != 1:
            raise ValueError("mlp_gate must map d -> 1")
        if self.mlp_gate.output_activation != "sigmoid":
            raise ValueError("mlp_gate needs a sigmoid output")
        if self.proj_camera_gate.shape[0] != d_g or self.proj_camera_gate.shape[1] % 2 != 0:
            raise ValueError("proj_camera_gate must map d_g to an even width")
        if self.proj_camera_gate.shape[1] != 2 * d:
            raise ValueError("proj_camera_gate must map d_g -> 2d")

    @property
    def feature_dim(self) -> int:
        return self.proj_g.shape[1]

    @property
    def geom_dim(self) -> int:
        return self.proj_g.shape[0]


@dataclass(frozen=True)
class CalibratedFrame:
    """Geometry-aware frame feature plus the state the banks need."""

    feature: Matrix
    camera: Matrix
    frame_index: int
    grid_h: int
    grid_w: int


def geometry_bias_gate(f_g: Matrix, f_c: Matrix, p: GeometryFusionParams):
    """Camera-conditioned bias and geometry-only reliability gate.

    Returns (bias, gate): bias is (N_g, d) from the MLP over the lifted
    geometry concatenated with the camera feature replicated along N_g;
    gate is (N_g, 1) with values strictly inside (0, 1).
    """
    f_g = as_matrix(f_g, "geometry tokens")
    f_c = as_matrix(f_c, "camera token")
    g = f_g @ p.proj_g
    c = f_c @ p.proj_c
    cam = np.broadcast_to(c, g.shape)
    bias = mlp_forward(p.mlp_bias, np.concatenate([g, cam], axis=1))
    gate = mlp_forward(p.mlp_gate, g)
    return bias, gate


def geometry_residual(f_v: Matrix, f_g: Matrix, bias: Matrix, gate: Matrix,
                      p: GeometryFusionParams) -> Matrix:
    """Visual tokens attending to biased, reliability-gated geometry."""
    f_v = as_matrix(f_v, "visual tokens")
    f_g = np.asarray(f_g, dtype=np.float64)
    if f_g.ndim != 2 or f_g.shape[0] == 0:
        raise ValueError("no geometry tokens")
    g = f_g @ p.proj_g
    q = f_v @ p.proj_q
    k = g @ p.proj_k + bias
    v = (g @ p.proj_v + bias) * gate
    return attention(q, k, v, p.head_count)


def camera_channel_gate(f_c: Matrix, p: GeometryFusionParams) -> Matrix:
    """SwiGLU channel gate from the camera token: split halves, a * silu(b)."""
    z = as_matrix(f_c, "camera token") @ p.proj_camera_gate
    half = z.shape[1] // 2
    return z[:, :half] * silu(z[:, half:])


def fuse_geometry(inputs: FrameInputs, p: GeometryFusionParams) -> CalibratedFrame:
    """Full fusion: visual + camera_gate * (W_o @ geometry residual)."""
    bias, gate = geometry_bias_gate(inputs.geometry, inputs.camera, p)
    residual = geometry_residual(inputs.visual, inputs.geometry, bias, gate, p)
    g_c = camera_channel_gate(inputs.camera, p)
    feature = inputs.visual + g_c * (residual @ p.proj_o)
    return CalibratedFrame(
        feature=feature,
        camera=inputs.camera,
        frame_index=inputs.frame_index,
        grid_h=inputs.grid_h,
        grid_w=inputs.grid_w,
    )
