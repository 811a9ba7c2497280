# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Class-aware generative adversarial active learning at desk scale.

The package contains the toy-corpus data layer, the lung segmenter and its
latent code, the class-aware GAN, the Bayesian informativeness scorer, the
task classifier, the active-learning loop and the experiment harness.
"""
