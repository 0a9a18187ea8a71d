"""Spectral operator in torch, forward-matched to the inference side.

Conventions are pinned by docs/fnow_format.md in the main repository:
channels [g, x, y, theta/pi, t/T] with coordinates spanning [-1, 1] over
the grid, rfft2 low-mode corner [0:k1, 0:k2] with a single complex tensor
per layer, ReLU on every block except the last, pointwise lift/projection.
"""

import torch
import torch.nn as nn


class SpectralLayer(nn.Module):
    def __init__(self, d_v, k1, k2):
        super().__init__()
        self.k1, self.k2 = k1, k2
        scale = 1.0 / (d_v * d_v)
        self.r_re = nn.Parameter(scale * (2 * torch.rand(k1, k2, d_v, d_v) - 1))
        self.r_im = nn.Parameter(scale * (2 * torch.rand(k1, k2, d_v, d_v) - 1))
        self.w = nn.Parameter(torch.empty(d_v, d_v))
        self.b = nn.Parameter(torch.zeros(d_v))
        nn.init.xavier_uniform_(self.w)

    def forward(self, v):
        # v: (batch, d_v, nx, ny)
        nx, ny = v.shape[-2:]
        vf = torch.fft.rfft2(v, dim=(-2, -1))
        kept = vf[:, :, :self.k1, :self.k2]
        r = torch.complex(self.r_re, self.r_im)
        mixed = torch.einsum("bcxy,xyco->boxy", kept, r)
        out_ft = torch.zeros_like(vf)
        out_ft[:, :, :self.k1, :self.k2] = mixed
        spec = torch.fft.irfft2(out_ft, s=(nx, ny), dim=(-2, -1))
        point = torch.einsum("oc,bcxy->boxy", self.w, v) \
            + self.b[None, :, None, None]
        return point + spec


class ReachOperator(nn.Module):
    D_A = 5

    def __init__(self, n_layers=4, d_v=64, modes=(12, 12), horizon=8.0):
        super().__init__()
        self.horizon = horizon
        self.lift_w = nn.Parameter(torch.empty(d_v, self.D_A))
        self.lift_b = nn.Parameter(torch.zeros(d_v))
        nn.init.xavier_uniform_(self.lift_w)
        self.layers = nn.ModuleList(
            SpectralLayer(d_v, *modes) for _ in range(n_layers))
        self.proj_w = nn.Parameter(torch.empty(1, d_v))
        self.proj_b = nn.Parameter(torch.zeros(1))
        nn.init.xavier_uniform_(self.proj_w)

    def make_channels(self, g, theta, t):
        """g: (batch, nx, ny); theta/t: (batch,) -> (batch, 5, nx, ny)."""
        batch, nx, ny = g.shape
        xn = torch.linspace(-1.0, 1.0, nx, dtype=g.dtype)[None, :, None]
        yn = torch.linspace(-1.0, 1.0, ny, dtype=g.dtype)[None, None, :]
        chans = torch.stack([
            g,
            xn.expand(batch, nx, ny),
            yn.expand(batch, nx, ny),
            (theta / torch.pi)[:, None, None].expand(batch, nx, ny),
            (t / self.horizon)[:, None, None].expand(batch, nx, ny),
        ], dim=1)
        return chans

    def forward(self, g, theta, t):
        v = torch.einsum("ca,baxy->bcxy", self.lift_w,
                         self.make_channels(g, theta, t)) \
            + self.lift_b[None, :, None, None]
        last = len(self.layers) - 1
        for i, layer in enumerate(self.layers):
            v = layer(v)
            if i != last:
                v = torch.relu(v)
        return (torch.einsum("oc,bcxy->boxy", self.proj_w, v)
                + self.proj_b[None, :, None, None])[:, 0]


def mixed_loss(pred, target, lam=0.5):
    """(1 - lam) * per-sample sup error + lam * per-sample RMS error."""
    err = pred - target
    flat = err.flatten(1)
    sup = flat.abs().max(dim=1).values
    l2 = torch.sqrt((flat ** 2).mean(dim=1))
    return ((1.0 - lam) * sup + lam * l2).mean()
