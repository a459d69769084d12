"""Convolutional backbones.

``vgg19`` loads ImageNet-pretrained weights (requires the torchvision weight
cache or network access) and is the backbone to use on real data.
``vgg19-seeded`` builds the same architecture with weights drawn from a
fixed torch seed: no download, fully deterministic, suitable for offline
runs and tests. Both stop at the final max-pooling stage, which maps a
256x256 RGB input to an 8x8x512 feature map (32768 values).

Feature rows are flattened in (row, col, channel) row-major order:
``flat_index = (row * width + col) * channels + channel``.
"""

from __future__ import annotations

import numpy as np
import torch
import torchvision
from PIL import Image

BACKBONES = ("vgg19", "vgg19-seeded")
_SEED = 0

# Standard ImageNet input normalization used by the VGG family.
_MEAN = torch.tensor([0.485, 0.456, 0.406]).view(3, 1, 1)
_STD = torch.tensor([0.229, 0.224, 0.225]).view(3, 1, 1)


class BackboneError(RuntimeError):
    pass


class Backbone:
    def __init__(self, name: str):
        if name not in BACKBONES:
            raise BackboneError(f"unknown backbone {name!r}; expected one of {BACKBONES}")
        self.name = name
        if name == "vgg19":
            try:
                weights = torchvision.models.VGG19_Weights.IMAGENET1K_V1
                model = torchvision.models.vgg19(weights=weights)
            except Exception as exc:
                raise BackboneError(
                    "could not obtain pretrained vgg19 weights (offline?); "
                    "use the 'vgg19-seeded' backbone or populate the torch cache"
                ) from exc
        else:
            torch.manual_seed(_SEED)
            model = torchvision.models.vgg19(weights=None)
        self._features = model.features.eval()
        for p in self._features.parameters():
            p.requires_grad_(False)

    def embed(self, image: Image.Image, target_size: tuple[int, int]) -> np.ndarray:
        """RGB-convert, Lanczos-resize, normalize, run the conv stack, and
        flatten the feature map in (row, col, channel) order."""
        rgb = image.convert("RGB").resize(target_size, Image.LANCZOS)
        array = np.asarray(rgb, dtype=np.float32) / 255.0  # (H, W, 3)
        tensor = torch.from_numpy(array).permute(2, 0, 1)
        tensor = (tensor - _MEAN) / _STD
        with torch.no_grad():
            feature_map = self._features(tensor.unsqueeze(0))[0]  # (C, h, w)
        flat = feature_map.permute(1, 2, 0).reshape(-1)  # (row, col, channel)
        return flat.numpy().astype(np.float64)
