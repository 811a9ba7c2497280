"""Unit tests for the class-aware GAN loss terms."""

from __future__ import annotations

import math

import pytest
import torch

from cagan_al.cagan.losses import (
    LossWeights,
    adv_loss_wgan_gp,
    classification_loss,
    cls_loss_fake,
    cls_loss_real,
    content_loss,
    gradient_penalty,
)
from cagan_al.cagan.networks import Discriminator, per_sample_critic
from cagan_al.config import CaganConfig
from cagan_al.errors import ConfigurationError, NumericError, ShapeError
from cagan_al.seeding import torch_seeded


def _rand(*shape: int, seed: int = 0) -> torch.Tensor:
    return torch.rand(*shape, dtype=torch.float64, generator=torch.Generator().manual_seed(seed))


def test_weights_come_from_config() -> None:
    """Every weight of the cagan section reaches the loss."""
    weights = LossWeights.from_config(CaganConfig(lambda_cls=2.0, w_nmi=0.5))
    assert weights.lambda_cls == 2.0
    assert weights.w_nmi == 0.5
    assert weights.as_dict()["lambda_gp"] == 10.0


def test_negative_weight_is_rejected() -> None:
    """Loss weights are non-negative and the NMI guard is positive."""
    with pytest.raises(ConfigurationError) as excinfo:
        LossWeights(w_mse=-1.0)
    assert excinfo.value.field == "w_mse"
    with pytest.raises(ConfigurationError):
        LossWeights(nmi_eps=0.0)


def test_adv_loss_is_mean_difference_minus_penalty() -> None:
    """The adversarial term is mean(real) - mean(fake) - lambda_gp * gp."""
    real = torch.tensor([[1.0, 3.0]], dtype=torch.float64)
    fake = torch.tensor([[0.0, 1.0]], dtype=torch.float64)
    got = adv_loss_wgan_gp(real, fake, 0.25, LossWeights(lambda_gp=4.0))
    assert float(got) == pytest.approx(2.0 - 0.5 - 1.0)


def test_adv_loss_names_the_non_finite_head() -> None:
    """NaN patch maps are reported with the head that produced them."""
    good = torch.zeros(1, 2)
    bad = torch.tensor([[0.0, float("nan")]])
    with pytest.raises(NumericError) as excinfo:
        adv_loss_wgan_gp(good, bad, 0.0, LossWeights())
    assert excinfo.value.head == "d_src_fake"
    with pytest.raises(NumericError) as excinfo:
        adv_loss_wgan_gp(good, good, float("inf"), LossWeights())
    assert excinfo.value.head == "gp"


def test_adv_loss_rejects_mismatched_maps() -> None:
    """Real and fake patch maps share one shape."""
    with pytest.raises(ShapeError):
        adv_loss_wgan_gp(torch.zeros(1, 4), torch.zeros(1, 2), 0.0, LossWeights())


def test_gradient_penalty_of_linear_critic() -> None:
    """A linear critic with weight norm 3 has penalty (3 - 1)^2 wherever it is evaluated."""
    w = _rand(9, seed=1)
    w = 3.0 * w / w.norm()

    def critic(v: torch.Tensor) -> torch.Tensor:
        return (v.reshape(v.shape[0], -1) * w).sum(dim=1)

    penalty = gradient_penalty(critic, _rand(5, 1, 3, 3, seed=2), _rand(5, 1, 3, 3, seed=3))
    assert float(penalty) == pytest.approx(4.0)


def test_gradient_penalty_trains_the_critic() -> None:
    """The penalty keeps a graph back to the critic parameters."""
    layer = torch.nn.Linear(4, 1).double()

    def critic(v: torch.Tensor) -> torch.Tensor:
        return layer(v.reshape(v.shape[0], -1))

    penalty = gradient_penalty(critic, _rand(3, 4, seed=4), _rand(3, 4, seed=5))
    penalty.backward()
    assert layer.weight.grad is not None
    assert torch.isfinite(layer.weight.grad).all()


def test_gradient_penalty_matches_finite_differences() -> None:
    """Autograd gradients of the penalty agree with central differences."""
    real = _rand(2, 3, seed=6)
    fake = _rand(2, 3, seed=7)
    alpha = torch.full((2, 1), 0.3, dtype=torch.float64)

    def penalty_of(weight: torch.Tensor) -> torch.Tensor:
        def critic(v: torch.Tensor) -> torch.Tensor:
            return torch.tanh(v @ weight).sum(dim=1)

        return gradient_penalty(critic, real, fake, alpha=alpha)

    weight = _rand(3, 2, seed=8).requires_grad_(True)
    (analytic,) = torch.autograd.grad(penalty_of(weight), weight)
    step = 1e-6
    numeric = torch.zeros_like(weight)
    for index in range(weight.numel()):
        bump = torch.zeros(weight.numel(), dtype=torch.float64)
        bump[index] = step
        bump = bump.reshape(weight.shape)
        upper = float(penalty_of((weight + bump).detach().requires_grad_(True)))
        lower = float(penalty_of((weight - bump).detach().requires_grad_(True)))
        numeric.view(-1)[index] = (upper - lower) / (2 * step)
    assert torch.allclose(analytic, numeric, atol=1e-6)


def test_per_sample_critic_averages_each_patch_map() -> None:
    """A patch map reduces to its per-sample mean; flat critic values pass through."""
    patches = torch.arange(8, dtype=torch.float64).reshape(2, 1, 2, 2)
    assert per_sample_critic(patches).tolist() == [1.5, 5.5]
    flat = torch.tensor([0.25, -1.0], dtype=torch.float64)
    assert per_sample_critic(flat).tolist() == [0.25, -1.0]


def test_gradient_penalty_rejects_mismatched_batches() -> None:
    """Real and fake batches share one shape."""
    with pytest.raises(ShapeError):
        gradient_penalty(lambda v: v, torch.zeros(2, 3), torch.zeros(3, 3))


def test_classification_loss_matches_finite_differences() -> None:
    """Both label modes have analytic gradients that pass gradcheck."""
    labels = torch.tensor([[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]], dtype=torch.float64)
    logits = _rand(2, 3, seed=9).requires_grad_(True)
    assert torch.autograd.gradcheck(lambda z: classification_loss(z, labels, "multilabel"), (logits,))
    exclusive = torch.tensor([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0]], dtype=torch.float64)
    assert torch.autograd.gradcheck(lambda z: classification_loss(z, exclusive, "exclusive"), (logits,))


def test_real_and_fake_class_terms_agree_on_equal_inputs() -> None:
    """Real and fake class terms differ only in which network they train."""
    logits = _rand(4, 3, seed=10)
    labels = torch.tensor([[1.0, 0.0, 0.0]] * 4, dtype=torch.float64)
    assert float(cls_loss_real(logits, labels)) == pytest.approx(float(cls_loss_fake(logits, labels)))


def test_classification_loss_rejects_width_mismatch() -> None:
    """The class head must emit one logit per label bit."""
    with pytest.raises(ShapeError):
        cls_loss_real(torch.zeros(2, 3), torch.zeros(2, 4))


def test_content_loss_is_minimal_for_identical_images() -> None:
    """A different target raises the content loss above its identity value."""
    x = _rand(2, 1, 8, 8, seed=11)
    weights = LossWeights(w_perc=0.0)
    identity = float(content_loss(x, x.clone(), None, weights, bins=16, soft=False))
    assert identity == pytest.approx(1.0 / (2.0 + weights.nmi_eps))
    other = float(content_loss(x, _rand(2, 1, 8, 8, seed=12), None, weights, bins=16, soft=False))
    assert other > identity


def test_content_loss_includes_perceptual_term() -> None:
    """The perceptual distance is added with weight w_perc."""
    x = _rand(1, 1, 4, 4, seed=13)
    y = x + 0.1

    def features(v: torch.Tensor) -> torch.Tensor:
        return 2.0 * v

    only_perc = LossWeights(w_mse=0.0, w_nmi=0.0, w_perc=1.0)
    assert float(content_loss(x, y, features, only_perc)) == pytest.approx(0.04)
    without = LossWeights(w_mse=0.0, w_nmi=0.0, w_perc=0.0)
    assert float(content_loss(x, y, features, without)) == pytest.approx(0.0)


def test_soft_content_loss_is_differentiable() -> None:
    """The training form backpropagates into the generated image."""
    x = _rand(2, 1, 8, 8, seed=14).requires_grad_(True)
    y = _rand(2, 1, 8, 8, seed=15)
    loss = content_loss(x, y, None, LossWeights(w_perc=0.0), bins=8)
    loss.backward()
    assert x.grad is not None
    assert torch.isfinite(x.grad).all()
    assert math.isfinite(float(loss))


def test_content_loss_rejects_shape_mismatch() -> None:
    """Generated and base images must have the same shape."""
    with pytest.raises(ShapeError):
        content_loss(torch.zeros(1, 1, 4, 4), torch.zeros(1, 1, 8, 8), None, LossWeights())


def test_critic_source_head_matches_finite_differences() -> None:
    """The realness map of a small critic has correct input gradients."""
    with torch_seeded(0):
        critic = Discriminator(8, 2, base_channels=2, norm="none").double()
    x = _rand(2, 1, 8, 8, seed=16).requires_grad_(True)
    assert torch.autograd.gradcheck(critic.critic, (x,), eps=1e-6, atol=1e-5, rtol=1e-3)


def test_generator_objective_matches_finite_differences() -> None:
    """Adversarial, class and soft content terms together have correct gradients in the generated image."""
    bins = 8
    weights = LossWeights(w_perc=0.0)
    with torch_seeded(1):
        critic = Discriminator(8, 2, base_channels=2, norm="none").double()
    x = _rand(2, 1, 8, 8, seed=17)
    real_map = critic.critic(x).detach()
    targets = torch.eye(2, dtype=torch.float64)
    # Pixels sit between histogram kernel centres, away from the kinks of the soft NMI.
    draws = torch.Generator().manual_seed(18)
    levels = torch.randint(1, bins, (2, 1, 8, 8), generator=draws).double()
    jitter = (torch.rand(2, 1, 8, 8, dtype=torch.float64, generator=draws) - 0.5) * 0.4
    fake = ((levels + jitter) / bins).requires_grad_(True)

    def objective(v: torch.Tensor) -> torch.Tensor:
        src, logits = critic(v)
        assert logits is not None
        adv = adv_loss_wgan_gp(real_map, src, 0.0, weights)
        content = content_loss(x, v, None, weights, bins=bins)
        return adv + weights.lambda_cls * cls_loss_fake(logits, targets) + weights.lambda_content * content

    assert torch.autograd.gradcheck(objective, (fake,), eps=1e-6, atol=1e-5, rtol=1e-3)
