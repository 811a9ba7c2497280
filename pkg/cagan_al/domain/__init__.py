# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Value types shared by every stage of the pipeline."""

from .auc_report import AucReport
from .class_distribution import ClassDistribution
from .image_sample import ImageSample, Provenance
from .manifest import DatasetManifest, ManifestEntry, Split
from .mask_latent import MaskLatent, MaskSource

__all__ = [
    "AucReport",
    "ClassDistribution",
    "DatasetManifest",
    "ImageSample",
    "ManifestEntry",
    "MaskLatent",
    "MaskSource",
    "Provenance",
    "Split",
]
