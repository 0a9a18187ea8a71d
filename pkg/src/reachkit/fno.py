"""Fourier-spectral operator inference from a weight file.

The network maps a 2D obstacle field plus broadcast heading/horizon
channels to a 2D value slice:

  channels [g, x, y, theta, t]  ->  lift (pointwise)  ->  B spectral
  blocks (rfft2, keep the (k1, k2) low-mode corner, multiply by a complex
  tensor, irfft2, add pointwise W v + b, ReLU except on the final block)
  ->  project (pointwise).

Coordinate channels are normalized to [-1, 1] over the local domain, the
heading channel is theta/pi and the horizon channel t/T. The final block
omits the activation so outputs can go negative. Both this module and any
trainer exporting weights must follow docs/fnow_format.md exactly.

Weight file ("FNOW"): magic, version u32, then B, d_v, d_a, d_y, k1, k2
(u32 each), then f32 little-endian arrays in declaration order: lift
matrix row-major, lift bias, per layer W row-major, W bias, R real then
imaginary in (k1, k2, d_v_in, d_v_out) order, projection matrix,
projection bias.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .grid import FormatError

FNOW_MAGIC = b"FNOW"
FNOW_VERSION = 1


@dataclass
class SpectralWeights:
    lift_w: np.ndarray       # (d_v, d_a)
    lift_b: np.ndarray       # (d_v,)
    layers_w: list           # B x (d_v, d_v)
    layers_b: list           # B x (d_v,)
    layers_r: list           # B x complex (k1, k2, d_v, d_v)
    proj_w: np.ndarray       # (d_y, d_v)
    proj_b: np.ndarray       # (d_y,)

    def __post_init__(self):
        arrays = [self.lift_w, self.lift_b, self.proj_w, self.proj_b,
                  *self.layers_w, *self.layers_b]
        for a in arrays:
            if not np.all(np.isfinite(a)):
                raise ValueError("non-finite weight entries")
        for r in self.layers_r:
            if not np.all(np.isfinite(r.real)) or not np.all(np.isfinite(r.imag)):
                raise ValueError("non-finite spectral entries")

    @property
    def n_layers(self):
        return len(self.layers_w)

    @property
    def d_v(self):
        return self.lift_w.shape[0]

    @property
    def d_a(self):
        return self.lift_w.shape[1]

    @property
    def d_y(self):
        return self.proj_w.shape[0]

    @property
    def modes(self):
        return self.layers_r[0].shape[:2]


def random_weights(rng, n_layers=4, d_v=16, d_a=5, d_y=1, modes=(8, 8),
                   scale=None):
    """Seeded random initialization (matches the usual 1/(d_v_in*d_v_out))."""
    if scale is None:
        scale = 1.0 / (d_v * d_v)
    k1, k2 = modes

    def mat(sh, s):
        return rng.uniform(-s, s, sh).astype(np.float32).astype(np.float64)

    lift_s = (6.0 / (d_a + d_v)) ** 0.5
    proj_s = (6.0 / (d_v + d_y)) ** 0.5
    return SpectralWeights(
        lift_w=mat((d_v, d_a), lift_s),
        lift_b=np.zeros(d_v),
        layers_w=[mat((d_v, d_v), (6.0 / (2 * d_v)) ** 0.5) for _ in range(n_layers)],
        layers_b=[np.zeros(d_v) for _ in range(n_layers)],
        layers_r=[(mat((k1, k2, d_v, d_v), scale)
                   + 1j * mat((k1, k2, d_v, d_v), scale))
                  for _ in range(n_layers)],
        proj_w=mat((d_y, d_v), proj_s),
        proj_b=np.zeros(d_y),
    )


def fno_forward(w: SpectralWeights, g_slice, theta, t, horizon) -> np.ndarray:
    """Evaluate one (theta, t) value slice from a 2D obstacle field.

    ``g_slice`` is (nx, ny) sampled on a uniform grid spanning the local
    domain; the grid must resolve the retained modes (dims >= 2 * modes).
    """
    g_slice = np.asarray(g_slice, dtype=np.float64)
    if g_slice.ndim != 2:
        raise ValueError("g_slice must be 2D")
    nx, ny = g_slice.shape
    k1, k2 = w.modes
    if k1 > nx // 2 + 1 or k2 > ny // 2 + 1:
        raise ValueError(f"grid {g_slice.shape} too coarse for modes {w.modes}")
    if w.d_a != 5:
        raise ValueError("expected 5 input channels")

    # coordinate channels span [-1, 1] across the local domain
    xn = np.linspace(-1.0, 1.0, nx)[:, None] * np.ones((1, ny))
    yn = np.ones((nx, 1)) * np.linspace(-1.0, 1.0, ny)[None, :]
    chans = np.stack([
        g_slice,
        xn,
        yn,
        np.full((nx, ny), theta / np.pi),
        np.full((nx, ny), t / horizon),
    ])  # (d_a, nx, ny)

    v = np.tensordot(w.lift_w, chans, axes=(1, 0)) + w.lift_b[:, None, None]
    for b in range(w.n_layers):
        vf = np.fft.rfft2(v, axes=(-2, -1))
        kept = vf[:, :k1, :k2]
        mixed = np.einsum("cxy,xyco->oxy", kept, w.layers_r[b], optimize=True)
        out_ft = np.zeros_like(vf)
        out_ft[:, :k1, :k2] = mixed
        spec = np.fft.irfft2(out_ft, s=(nx, ny), axes=(-2, -1))
        v = (np.tensordot(w.layers_w[b], v, axes=(1, 0))
             + w.layers_b[b][:, None, None] + spec)
        if b < w.n_layers - 1:
            v = np.maximum(v, 0.0)
    out = np.tensordot(w.proj_w, v, axes=(1, 0)) + w.proj_b[:, None, None]
    return out[0]


# ---------------------------------------------------------------------------
# FNOW weight file IO
# ---------------------------------------------------------------------------

def save_weights(w: SpectralWeights, path):
    k1, k2 = w.modes
    with open(path, "wb") as f:
        f.write(FNOW_MAGIC)
        f.write(struct.pack("<I", FNOW_VERSION))
        f.write(struct.pack("<6I", w.n_layers, w.d_v, w.d_a, w.d_y, k1, k2))

        def arr(a):
            f.write(np.ascontiguousarray(a, dtype="<f4").tobytes())

        arr(w.lift_w)
        arr(w.lift_b)
        for b in range(w.n_layers):
            arr(w.layers_w[b])
            arr(w.layers_b[b])
            arr(w.layers_r[b].real)
            arr(w.layers_r[b].imag)
        arr(w.proj_w)
        arr(w.proj_b)


def load_weights(path) -> SpectralWeights:
    with open(path, "rb") as f:
        magic = f.read(4)
        if len(magic) < 4 or magic != FNOW_MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {FNOW_MAGIC!r}")
        head = f.read(4)
        if len(head) < 4:
            raise FormatError("truncated FNOW file: missing version")
        (version,) = struct.unpack("<I", head)
        if version != FNOW_VERSION:
            raise FormatError(f"unsupported FNOW version {version}")
        meta = f.read(24)
        if len(meta) < 24:
            raise FormatError("truncated FNOW file: missing header")
        n_layers, d_v, d_a, d_y, k1, k2 = struct.unpack("<6I", meta)

        def arr(shape, what):
            count = int(np.prod(shape))
            buf = f.read(4 * count)
            if len(buf) != 4 * count:
                raise FormatError(f"truncated FNOW file: missing {what}")
            return np.frombuffer(buf, dtype="<f4").astype(np.float64).reshape(shape)

        lift_w = arr((d_v, d_a), "lift matrix")
        lift_b = arr((d_v,), "lift bias")
        layers_w, layers_b, layers_r = [], [], []
        for b in range(n_layers):
            layers_w.append(arr((d_v, d_v), f"layer {b} pointwise matrix"))
            layers_b.append(arr((d_v,), f"layer {b} pointwise bias"))
            r_re = arr((k1, k2, d_v, d_v), f"layer {b} spectral real part")
            r_im = arr((k1, k2, d_v, d_v), f"layer {b} spectral imaginary part")
            layers_r.append(r_re + 1j * r_im)
        proj_w = arr((d_y, d_v), "projection matrix")
        proj_b = arr((d_y,), "projection bias")
        if f.read(1):
            raise FormatError("trailing bytes after projection bias")
    return SpectralWeights(lift_w=lift_w, lift_b=lift_b, layers_w=layers_w,
                           layers_b=layers_b, layers_r=layers_r,
                           proj_w=proj_w, proj_b=proj_b)
