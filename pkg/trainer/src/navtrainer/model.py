"""Regression backbones: a small residual CNN and an optional wide ResNet.

Both take the 3-channel image pair stack through a freshly initialized
first convolution and end in a fully connected head with one output per
error component.
"""

from __future__ import annotations

from torch import nn


class ResidualBlock(nn.Module):
    def __init__(self, c_in: int, c_out: int, stride: int = 1):
        super().__init__()
        self.conv1 = nn.Conv2d(c_in, c_out, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(c_out)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(c_out)
        self.skip = None
        if stride != 1 or c_in != c_out:
            self.skip = nn.Sequential(
                nn.Conv2d(c_in, c_out, 1, stride=stride, bias=False),
                nn.BatchNorm2d(c_out),
            )
        self.act = nn.ReLU(inplace=True)

    def forward(self, x):
        identity = x if self.skip is None else self.skip(x)
        out = self.act(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return self.act(out + identity)


class SmallResidualRegressor(nn.Module):
    """Desk-scale backbone: three residual stages and a spatial-aware head.

    The head flattens the final feature map instead of pooling it away;
    the regression target (image displacement/defocus) lives in the
    spatial arrangement of the pair differences.
    """

    def __init__(self, n_outputs: int, input_hw=(80, 80), in_channels: int = 3):
        super().__init__()
        self.stem = nn.Sequential(
            nn.Conv2d(in_channels, 16, 5, stride=2, padding=2, bias=False),
            nn.BatchNorm2d(16),
            nn.ReLU(inplace=True),
        )
        self.stage1 = ResidualBlock(16, 32, stride=2)
        self.stage2 = ResidualBlock(32, 64, stride=2)
        self.stage3 = ResidualBlock(64, 64)

        def down(n):  # conv output size at stride 2 with same-style padding
            return (n - 1) // 2 + 1

        h, w = input_hw
        for _ in range(3):
            h, w = down(h), down(w)
        final = nn.Linear(128, n_outputs)
        # zero-initialized head: training starts at the predict-zero benchmark
        nn.init.zeros_(final.weight)
        nn.init.zeros_(final.bias)
        self.head = nn.Sequential(
            nn.Flatten(),
            nn.Linear(64 * h * w, 128),
            nn.ReLU(inplace=True),
            nn.Dropout(0.1),
            final,
        )

    def forward(self, x):
        x = self.stem(x)
        x = self.stage1(x)
        x = self.stage2(x)
        x = self.stage3(x)
        return self.head(x)


def wide_resnet_regressor(n_outputs: int, pretrained: bool = False,
                          freeze_backbone: bool = False) -> nn.Module:
    """Wide-ResNet-50-2 with a reinitialized first conv and an m-output head."""
    from torchvision.models import wide_resnet50_2

    weights = "IMAGENET1K_V2" if pretrained else None
    net = wide_resnet50_2(weights=weights)
    if freeze_backbone:
        for p in net.parameters():
            p.requires_grad_(False)
    # fresh input convolution and regression head, always trainable
    net.conv1 = nn.Conv2d(3, 64, kernel_size=7, stride=2, padding=3, bias=False)
    net.fc = nn.Linear(net.fc.in_features, n_outputs)
    nn.init.zeros_(net.fc.weight)
    nn.init.zeros_(net.fc.bias)
    return net


def build_model(backbone: str, n_outputs: int, input_hw=(80, 80),
                pretrained: bool = False, freeze_backbone: bool = False) -> nn.Module:
    if backbone == "small":
        return SmallResidualRegressor(n_outputs, input_hw=input_hw)
    if backbone == "wide50":
        return wide_resnet_regressor(n_outputs, pretrained, freeze_backbone)
    raise ValueError(f"unknown backbone {backbone!r}, expected 'small' or 'wide50'")
