"""Model construction and penultimate-feature capture.

"Penultimate features" means the input to the final classification layer,
located as the last ``nn.Linear`` in module order.  That covers the
torchvision CNN/transformer families (resnet*, densenet*, vgg*, vit_*,
swin_*, ...); models whose head is not a Linear are rejected with a clear
error rather than guessed at.
"""

from __future__ import annotations

import torch
from torch import nn
import torchvision.models


class ToyCnn(nn.Module):
    """Tiny deterministic classifier used for tests and smoke runs."""

    def __init__(self, classes: int = 10, hidden: int = 32):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(3, 8, kernel_size=3, padding=1),
            nn.ReLU(),
            nn.AdaptiveAvgPool2d(4),
            nn.Flatten(),
            nn.Linear(8 * 16, hidden),
            nn.ReLU(),
        )
        self.head = nn.Linear(hidden, classes)

    def forward(self, x):
        return self.head(self.body(x))


def build_model(name: str, weights: str = "none", classes: int = 10) -> nn.Module:
    """Instantiate a registry model in eval mode with deterministic init.

    ``weights='none'`` gives seeded random initialization (no download);
    ``weights='default'`` asks torchvision for the published checkpoint.
    """
    torch.manual_seed(0)
    if name == "toy-cnn":
        model = ToyCnn(classes=classes)
    else:
        available = torchvision.models.list_models()
        if name not in available:
            raise ValueError(f"unknown model {name!r}; not 'toy-cnn' and not in "
                             f"the torchvision registry ({len(available)} entries)")
        weights_arg = None if weights == "none" else "DEFAULT"
        model = torchvision.models.get_model(name, weights=weights_arg)
    model.eval()
    return model


def find_classifier_head(model: nn.Module) -> nn.Linear:
    head = None
    for module in model.modules():
        if isinstance(module, nn.Linear):
            head = module
    if head is None:
        raise ValueError(f"{type(model).__name__} has no nn.Linear head; "
                         "cannot define penultimate features")
    return head


class FeatureTap:
    """Captures the flattened input of the classifier head during forward."""

    def __init__(self, model: nn.Module):
        self.model = model
        self.head = find_classifier_head(model)
        self.last: torch.Tensor | None = None
        self._handle = self.head.register_forward_pre_hook(self._grab)

    def _grab(self, module, inputs):
        self.last = inputs[0].detach().reshape(inputs[0].shape[0], -1)

    @torch.no_grad()
    def run(self, batch: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """(features, logits) for one batch."""
        logits = self.model(batch)
        if self.last is None:
            raise RuntimeError("classifier head was never reached in forward()")
        return self.last, logits.detach()

    def close(self) -> None:
        self._handle.remove()
