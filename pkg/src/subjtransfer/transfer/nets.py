"""1-D convolutional generator and critic over [batch, channels, time] trials."""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn


class ResidualBlock(nn.Module):
    def __init__(self, width: int, kernel: int = 3):
        super().__init__()
        self.conv1 = nn.Conv1d(width, width, kernel, padding=kernel // 2)
        self.conv2 = nn.Conv1d(width, width, kernel, padding=kernel // 2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.conv2(F.leaky_relu(self.conv1(x), 0.2))


class Generator(nn.Module):
    """Encoder / residual blocks / decoder with an input-to-output skip.

    The final projection is zero-initialised, so a freshly built generator is
    exactly the identity map. Time length is padded up to a multiple of 4 for
    the two stride-2 stages and cropped back afterwards.
    """

    def __init__(self, n_channels: int, n_samples: int, hidden: int = 16, n_res: int = 2):
        super().__init__()
        self.n_channels, self.n_samples = n_channels, n_samples
        h = hidden
        self.encoder = nn.Sequential(
            nn.Conv1d(n_channels, h, 7, padding=3),
            nn.LeakyReLU(0.2),
            nn.Conv1d(h, 2 * h, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2),
            nn.Conv1d(2 * h, 2 * h, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2),
        )
        self.blocks = nn.Sequential(*[ResidualBlock(2 * h) for _ in range(n_res)])
        self.decoder = nn.Sequential(
            nn.ConvTranspose1d(2 * h, 2 * h, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2),
            nn.ConvTranspose1d(2 * h, h, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2),
        )
        self.project = nn.Conv1d(h, n_channels, 7, padding=3)
        nn.init.zeros_(self.project.weight)
        nn.init.zeros_(self.project.bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        check_shape(x, self.n_channels, self.n_samples)
        p = x.shape[-1]
        pad = (-p) % 4
        z = F.pad(x, (0, pad)) if pad else x
        z = self.project(self.decoder(self.blocks(self.encoder(z))))
        return x + z[..., :p]


class Critic(nn.Module):
    """Four stride-2 conv layers, time-average, linear head.

    ``raw`` is the unconstrained score; calling the module applies softplus so
    the output is strictly positive and ``log`` is defined.
    """

    def __init__(self, n_channels: int, n_samples: int, hidden: int = 16):
        super().__init__()
        self.n_channels, self.n_samples = n_channels, n_samples
        widths = [n_channels, hidden, 2 * hidden, 4 * hidden, 4 * hidden]
        layers: list[nn.Module] = []
        for cin, cout in zip(widths[:-1], widths[1:]):
            layers += [nn.Conv1d(cin, cout, 4, stride=2, padding=1), nn.LeakyReLU(0.2)]
        self.features = nn.Sequential(*layers)
        self.head = nn.Linear(widths[-1], 1)

    def raw(self, x: torch.Tensor) -> torch.Tensor:
        check_shape(x, self.n_channels, self.n_samples)
        return self.head(self.features(x).mean(dim=-1)).squeeze(-1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return F.softplus(self.raw(x))

    def log_score(self, x: torch.Tensor) -> torch.Tensor:
        """log(softplus(raw)) without underflow for very negative scores."""
        h = self.raw(x)
        hc = h.clamp(min=-20.0)
        return torch.log(F.softplus(hc)) + (h - hc)


def check_shape(x: torch.Tensor, c: int, p: int) -> None:
    if x.dim() != 3 or x.shape[1] != c or x.shape[2] != p:
        raise ValueError(f"expected input [n, {c}, {p}], got {list(x.shape)}")

