# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Closed-form checks run by ``cagan-al selftest``.

Each check evaluates a library function on an input whose answer is known by
hand (or by a brute-force oracle) and compares within a fixed tolerance. The
suite needs no data, no checkpoints and finishes in seconds on a CPU.
"""

from __future__ import annotations

from collections import Counter
from collections.abc import Callable, Iterator
from dataclasses import dataclass
import itertools
import logging
import math

import numpy as np
import torch

from ..cagan.losses import (
    LossWeights,
    adv_loss_wgan_gp,
    cls_loss_fake,
    cls_loss_real,
    content_loss,
    gradient_penalty,
)
from ..cagan.nmi import normalized_mutual_information, quantize_bins
from ..classifier.evaluation import auc
from ..config import DataConfig
from ..data.toy_corpus import build_toy_samples
from ..uncertainty.scoring import ScoredSample, combine_variance, entropy_score, rank_by_informativeness

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one selftest check."""

    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def _close(name: str, got: float, want: float, tol: float) -> CheckResult:
    return CheckResult(name, abs(got - want) <= tol, f"got {got:.12g}, want {want:.12g} (tol {tol:g})")


def _image(seed: int, side: int = 8) -> torch.Tensor:
    rng = np.random.default_rng(seed)
    return torch.from_numpy(rng.random((1, 1, side, side)))


def check_content_loss_identity() -> CheckResult:
    x = _image(0)
    weights = LossWeights(w_perc=0.0)
    got = float(content_loss(x, x.clone(), None, weights, soft=False))
    return _close("content_loss(x, x)", got, 1.0 / (2.0 + weights.nmi_eps), 1e-6)


def check_content_loss_constant() -> CheckResult:
    x = torch.full((1, 1, 8, 8), 0.5, dtype=torch.float64)
    got = float(content_loss(x, x.clone(), None, LossWeights(w_perc=0.0), soft=False))
    return CheckResult("content_loss(constant, constant) finite", math.isfinite(got), f"got {got:g}")


def check_adv_symmetric() -> CheckResult:
    d = torch.randn(2, 1, 4, 4, dtype=torch.float64, generator=torch.Generator().manual_seed(1))
    got = float(adv_loss_wgan_gp(d, d.clone(), 0.0, LossWeights()))
    return _close("adv loss with equal patch maps", got, 0.0, 1e-12)


def check_gp_unit_gradient() -> CheckResult:
    w = torch.randn(16, dtype=torch.float64, generator=torch.Generator().manual_seed(2))
    w = w / w.norm()

    def critic(v: torch.Tensor) -> torch.Tensor:
        return (v.reshape(v.shape[0], -1) * w).sum(dim=1)

    real = torch.rand(4, 1, 4, 4, dtype=torch.float64, generator=torch.Generator().manual_seed(3))
    got = float(gradient_penalty(critic, real, torch.zeros_like(real)))
    return _close("gradient penalty of a unit-norm linear critic", got, 0.0, 1e-6)


def check_adv_closed_form() -> CheckResult:
    def critic(v: torch.Tensor) -> torch.Tensor:
        return 2.0 * v

    real = torch.ones(1, 1, dtype=torch.float64)
    fake = torch.zeros(1, 1, dtype=torch.float64)
    gp = gradient_penalty(critic, real, fake, alpha=torch.full((1, 1), 0.5, dtype=torch.float64))
    got = float(adv_loss_wgan_gp(critic(real), critic(fake), gp, LossWeights(lambda_gp=10.0)))
    return _close("adv loss of D(x)=2x, real=1, fake=0", got, -8.0, 1e-6)


def check_cls_uniform_exclusive() -> CheckResult:
    logits = torch.zeros(1, 4, dtype=torch.float64)
    labels = torch.tensor([[0.0, 0.0, 1.0, 0.0]], dtype=torch.float64)
    got = float(cls_loss_real(logits, labels, "exclusive"))
    return _close("cls loss, uniform logits, exclusive, C=4", got, math.log(4.0), 1e-9)


def check_cls_uniform_multilabel() -> CheckResult:
    logits = torch.zeros(1, 4, dtype=torch.float64)
    labels = torch.tensor([[1.0, 0.0, 1.0, 0.0]], dtype=torch.float64)
    got = float(cls_loss_fake(logits, labels, "multilabel"))
    return _close("cls loss, p=0.5, multilabel, C=4", got, math.log(2.0), 1e-9)


def check_cls_certain() -> CheckResult:
    logits = torch.tensor([[-1e4, 1e4, -1e4]], dtype=torch.float64)
    labels = torch.tensor([[0.0, 1.0, 0.0]], dtype=torch.float64)
    got = float(cls_loss_real(logits, labels, "exclusive"))
    return _close("cls loss with certain correct prediction", got, 0.0, 1e-9)


def check_variance_hand_case() -> CheckResult:
    got = float(combine_variance([[0.0], [2.0]], [[0.0], [0.0]])[0])
    return _close("combined variance of passes {0, 2}", got, 1.0, 1e-12)


def check_variance_oracle() -> CheckResult:
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(50):
        passes = int(rng.integers(2, 30))
        p = rng.random((passes, 3))
        s2 = rng.random((passes, 3)) * 0.1
        got = combine_variance(p, s2)
        mean = p.sum(axis=0) / passes
        oracle = ((p - mean) ** 2).sum(axis=0) / passes + s2.sum(axis=0) / passes
        worst = max(worst, float(np.abs(got - oracle).max()))
    return CheckResult("combined variance vs two-pass oracle", worst <= 1e-12, f"max deviation {worst:.3g}")


def check_entropy() -> CheckResult:
    exclusive = entropy_score([0.25] * 4, "exclusive")
    multilabel = entropy_score([0.5] * 4, "multilabel")
    one_hot = entropy_score([0.0, 1.0, 0.0, 0.0], "exclusive")
    deviation = max(abs(exclusive - math.log(4.0)), abs(multilabel - math.log(2.0)), abs(one_hot))
    return CheckResult("entropy of uniform and one-hot predictions", deviation <= 1e-12, f"deviation {deviation:.3g}")


def check_ranking() -> CheckResult:
    scored = [ScoredSample("a", 0.9), ScoredSample("b", 0.1), ScoredSample("c", 0.5)]
    result = rank_by_informativeness(scored, 2, tie_seed=0)
    over = rank_by_informativeness(scored, 5, tie_seed=0)
    passed = result.ids == ("a", "c") and over.truncated and len(over.ids) == 3
    return CheckResult("ranking by informativeness", passed, f"top-2 {list(result.ids)}, truncated {over.truncated}")


def _pairwise_auc(scores: np.ndarray, labels: np.ndarray) -> float | None:
    pos = scores[labels]
    neg = scores[~labels]
    if not len(pos) or not len(neg):
        return None
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p, n in itertools.product(pos, neg))
    return wins / (len(pos) * len(neg))


def check_auc_oracle() -> CheckResult:
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(200):
        size = int(rng.integers(2, 60))
        scores = rng.integers(0, 10, size).astype(np.float64)
        labels = rng.random(size) < 0.4
        got, want = auc(scores, labels), _pairwise_auc(scores, labels)
        if (got is None) != (want is None):
            return CheckResult("rank AUC vs pairwise oracle", False, "definedness differs")
        if got is not None and want is not None:
            worst = max(worst, abs(got - want))
    return CheckResult("rank AUC vs pairwise oracle", worst <= 1e-12, f"max deviation {worst:.3g}")


def _brute_nmi(x: np.ndarray, y: np.ndarray, bins: int) -> float:
    qx = quantize_bins(x, bins).ravel().tolist()
    qy = quantize_bins(y, bins).ravel().tolist()
    total = len(qx)

    def entropy(counter: Counter[object]) -> float:
        return -math.fsum(c / total * math.log(c / total) for c in sorted(counter.values()))

    hxy = entropy(Counter(zip(qx, qy, strict=True)))
    return 0.0 if hxy == 0.0 else (entropy(Counter(qx)) + entropy(Counter(qy))) / hxy


def check_nmi_oracle() -> CheckResult:
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(100):
        bins = int(rng.choice([2, 4, 64]))
        x = rng.random((4, 4))
        y = rng.random((4, 4))
        worst = max(worst, abs(normalized_mutual_information(x, y, bins) - _brute_nmi(x, y, bins)))
    identity = normalized_mutual_information(x, x, 64)
    passed = worst <= 1e-12 and abs(identity - 2.0) <= 1e-12
    return CheckResult("NMI vs joint-histogram oracle", passed, f"max deviation {worst:.3g}, NMI(x, x) {identity:.12g}")


def check_toy_determinism() -> CheckResult:
    config = DataConfig(num_patients=3, images_per_patient=2, side=32)
    _, first = build_toy_samples(config, seed=7)
    _, second = build_toy_samples(config, seed=7)
    same = len(first) == len(second) and all(
        a.id == b.id and a.labels == b.labels and np.array_equal(a.pixels, b.pixels)
        for a, b in zip(first, second, strict=True)
    )
    return CheckResult("toy corpus determinism", same, f"{len(first)} images")


CHECKS: tuple[Callable[[], CheckResult], ...] = (
    check_content_loss_identity,
    check_content_loss_constant,
    check_adv_symmetric,
    check_gp_unit_gradient,
    check_adv_closed_form,
    check_cls_uniform_exclusive,
    check_cls_uniform_multilabel,
    check_cls_certain,
    check_variance_hand_case,
    check_variance_oracle,
    check_entropy,
    check_ranking,
    check_auc_oracle,
    check_nmi_oracle,
    check_toy_determinism,
)


def run_selftest() -> Iterator[CheckResult]:
    """Run every check; an exception inside a check counts as a failure."""
    for check in CHECKS:
        try:
            yield check()
        except Exception as exc:  # pylint: disable=broad-exception-caught
            logger.debug("selftest check %s raised", check.__name__, exc_info=True)
            yield CheckResult(check.__name__, False, f"raised {type(exc).__name__}: {exc}")
