"""Datasets the exporter can iterate, all with a fixed canonical order.

``synthetic`` needs no files or network: per-split Gaussian images whose
values depend only on (seed, split name, index).  ``folder:PATH`` wraps
torchvision ImageFolder; ``cifar10``/``cifar100`` expect pre-downloaded
data under --data-root (download is never attempted).
"""

from __future__ import annotations

import zlib
from pathlib import Path

import torch
from torch.utils.data import Dataset

import torchvision.datasets
import torchvision.transforms as T


class SyntheticImages(Dataset):
    """Deterministic random images; labels cycle over the class range."""

    def __init__(self, n: int, image_size: int, classes: int, seed: int, split: str):
        g = torch.Generator().manual_seed(seed + zlib.crc32(split.encode()))
        self.images = torch.randn(n, 3, image_size, image_size, generator=g)
        self.labels = torch.arange(n) % classes

    def __len__(self):
        return self.images.shape[0]

    def __getitem__(self, i):
        return self.images[i], int(self.labels[i])


def build_dataset(spec: str, split: str, *, n: int, image_size: int,
                  classes: int, seed: int, data_root: str) -> Dataset:
    if spec == "synthetic":
        return SyntheticImages(n=n, image_size=image_size, classes=classes,
                               seed=seed, split=split)
    transform = T.Compose([T.Resize((image_size, image_size)), T.ToTensor()])
    if spec.startswith("folder:"):
        root = Path(spec.split(":", 1)[1])
        if not root.is_dir():
            raise ValueError(f"folder dataset root does not exist: {root}")
        return torchvision.datasets.ImageFolder(str(root), transform=transform)
    if spec in ("cifar10", "cifar100"):
        cls = torchvision.datasets.CIFAR10 if spec == "cifar10" else torchvision.datasets.CIFAR100
        return cls(root=data_root, train=(split == "train"),
                   transform=transform, download=False)
    raise ValueError(f"unknown dataset {spec!r}; expected synthetic, folder:PATH, "
                     "cifar10, or cifar100")
