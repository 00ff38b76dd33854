"""Adversarial, gradient-penalty and cycle-consistency losses.

Critics are any callables mapping a [n, c, p] batch to n strictly positive
scores. A critic exposing ``log_score`` (see :class:`nets.Critic`) is used
for the log terms directly so very small scores do not underflow.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import torch

Net = Callable[[torch.Tensor], torch.Tensor]

CRITIC_OBJECTIVES = ("log-score", "wgan-linear")
GP_MODES = ("real-pair", "real-fake")


class LossError(ValueError):
    pass


def log_critic(critic: Net, x: torch.Tensor, objective: str = "log-score") -> torch.Tensor:
    """Per-trial critic term: log D(x), or the raw score for ``wgan-linear``."""
    if objective == "wgan-linear":
        return critic.raw(x) if hasattr(critic, "raw") else critic(x)
    if objective != "log-score":
        raise LossError(f"unknown critic objective {objective!r}")
    if hasattr(critic, "log_score"):
        return critic.log_score(x)
    d = critic(x)
    if not torch.all(d > 0):
        raise LossError("critic output <= 0; log is undefined (positive head required)")
    return torch.log(d)


def _penalty_score(critic: Net, x: torch.Tensor, objective: str) -> torch.Tensor:
    if objective == "wgan-linear" and hasattr(critic, "raw"):
        return critic.raw(x)
    return critic(x)


@dataclass
class AdversarialTerms:
    fake_a: torch.Tensor  # E log D_A(G_B(x_b))
    real_a: torch.Tensor  # E log D_A(x_a)
    fake_b: torch.Tensor  # E log D_B(G_A(x_a))
    real_b: torch.Tensor  # E log D_B(x_b)
    penalty: torch.Tensor

    @property
    def log_terms(self) -> torch.Tensor:
        return self.fake_a - self.real_a + self.fake_b - self.real_b

    @property
    def total(self) -> torch.Tensor:
        return self.log_terms + self.penalty


def interpolate(x_from: torch.Tensor, x_to: torch.Tensor, generator: torch.Generator | None = None) -> torch.Tensor:
    """eps * x_from + (1 - eps) * x_to, one eps ~ U[0, 1] per pair."""
    if x_from.shape != x_to.shape:
        raise LossError(f"pairing needs equal batches, got {list(x_from.shape)} and {list(x_to.shape)}")
    eps = torch.rand(
        (x_from.shape[0],) + (1,) * (x_from.dim() - 1), generator=generator, dtype=x_from.dtype, device=x_from.device
    )
    return eps * x_from + (1 - eps) * x_to


def input_grad_norm(critic: Net, x_hat: torch.Tensor, objective: str = "log-score", create_graph: bool = True) -> torch.Tensor:
    x_hat = x_hat.detach().requires_grad_(True)
    out = _penalty_score(critic, x_hat, objective)
    (grad,) = torch.autograd.grad(out.sum(), x_hat, create_graph=create_graph)
    return grad.flatten(1).norm(2, dim=1)


def gradient_penalty(
    critic_a: Net,
    critic_b: Net,
    batch_a: torch.Tensor,
    batch_b: torch.Tensor,
    lambda_gp: float,
    generator: torch.Generator | None = None,
    objective: str = "log-score",
    x_hat: torch.Tensor | None = None,
    x_hat_b: torch.Tensor | None = None,
) -> torch.Tensor:
    """lambda * E[(|grad D_A(x_hat)| - 1)^2 + (|grad D_B(x_hat)| - 1)^2].

    By default x_hat interpolates between paired trials of domain A and
    domain B and both critics are evaluated at the same points. Passing
    ``x_hat``/``x_hat_b`` overrides the sample points (``x_hat_b`` gives
    critic B its own points, as in the real-vs-fake variant).
    """
    if batch_a.shape[0] == 0 or batch_b.shape[0] == 0:
        raise LossError("empty batch")
    if batch_a.shape != batch_b.shape:
        raise LossError(f"batch-size mismatch: {list(batch_a.shape)} vs {list(batch_b.shape)}")
    if lambda_gp == 0:
        return batch_a.new_zeros(())
    if x_hat is None:
        x_hat = interpolate(batch_a, batch_b, generator)
    if x_hat_b is None:
        x_hat_b = x_hat
    norm_a = input_grad_norm(critic_a, x_hat, objective)
    norm_b = input_grad_norm(critic_b, x_hat_b, objective)
    return lambda_gp * ((norm_a - 1) ** 2 + (norm_b - 1) ** 2).mean()


def adversarial_loss(
    gen_a2b: Net,
    gen_b2a: Net,
    critic_a: Net,
    critic_b: Net,
    batch_a: torch.Tensor,
    batch_b: torch.Tensor,
    lambda_gp: float = 10.0,
    generator: torch.Generator | None = None,
    objective: str = "log-score",
    gp_mode: str = "real-pair",
) -> AdversarialTerms:
    if batch_a.shape[0] == 0 or batch_b.shape[0] == 0:
        raise LossError("empty batch")
    fake_a = gen_b2a(batch_b)
    fake_b = gen_a2b(batch_a)
    terms_fake_a, terms_real_a = _paired_means(critic_a, fake_a, batch_a, objective)
    terms_fake_b, terms_real_b = _paired_means(critic_b, fake_b, batch_b, objective)
    if gp_mode == "real-pair":
        gp = gradient_penalty(critic_a, critic_b, batch_a, batch_b, lambda_gp, generator, objective)
    elif gp_mode == "real-fake":
        gp = gradient_penalty(
            critic_a, critic_b, batch_a, batch_b, lambda_gp, generator, objective,
            x_hat=interpolate(batch_a, fake_a.detach(), generator),
            x_hat_b=interpolate(batch_b, fake_b.detach(), generator),
        )
    else:
        raise LossError(f"unknown gp_mode {gp_mode!r}")
    return AdversarialTerms(terms_fake_a, terms_real_a, terms_fake_b, terms_real_b, gp)


def _paired_means(critic: Net, fake: torch.Tensor, real: torch.Tensor, objective: str) -> tuple[torch.Tensor, torch.Tensor]:
    # one critic call on the stacked batch; cheaper than two for small nets
    scores = log_critic(critic, torch.cat([fake, real]), objective)
    return scores[: len(fake)].mean(), scores[len(fake) :].mean()


def cycle_loss(gen_a2b: Net, gen_b2a: Net, batch_a: torch.Tensor, batch_b: torch.Tensor) -> torch.Tensor:
    """Mean absolute reconstruction error, A->B->A plus B->A->B."""
    if batch_a.shape[0] == 0 or batch_b.shape[0] == 0:
        raise LossError("empty batch")
    rec_a = gen_b2a(gen_a2b(batch_a))
    rec_b = gen_a2b(gen_b2a(batch_b))
    if rec_a.shape != batch_a.shape or rec_b.shape != batch_b.shape:
        raise LossError("generator changed the trial shape")
    return (rec_a - batch_a).abs().mean() + (rec_b - batch_b).abs().mean()


@dataclass
class LossBreakdown:
    adversarial: AdversarialTerms
    cycle: torch.Tensor
    alpha_cyc: float

    @property
    def total(self) -> torch.Tensor:
        return self.adversarial.total + self.alpha_cyc * self.cycle


def total_loss(
    gen_a2b: Net,
    gen_b2a: Net,
    critic_a: Net,
    critic_b: Net,
    batch_a: torch.Tensor,
    batch_b: torch.Tensor,
    lambda_gp: float = 10.0,
    alpha_cyc: float = 10.0,
    generator: torch.Generator | None = None,
    objective: str = "log-score",
    gp_mode: str = "real-pair",
) -> LossBreakdown:
    adv = adversarial_loss(gen_a2b, gen_b2a, critic_a, critic_b, batch_a, batch_b, lambda_gp, generator, objective, gp_mode)
    cyc = cycle_loss(gen_a2b, gen_b2a, batch_a, batch_b)
    return LossBreakdown(adv, cyc, alpha_cyc)


def critic_step_loss(terms: AdversarialTerms) -> torch.Tensor:
    """Critics minimise the adversarial loss (fake terms down, real terms up, penalty down)."""
    return terms.total


def generator_step_loss(gen_a2b: Net, gen_b2a: Net, critic_a: Net, critic_b: Net,
                        batch_a: torch.Tensor, batch_b: torch.Tensor, alpha_cyc: float,
                        objective: str = "log-score") -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Generators push the fake log terms up while keeping cycles consistent.

    Returns (loss to minimise, fake-term sum, cycle loss).
    """
    n = len(batch_a)
    fake_a = gen_b2a(batch_b)
    fake_b, rec_b = gen_a2b(torch.cat([batch_a, fake_a])).split([n, len(fake_a)])
    rec_a = gen_b2a(fake_b)
    fake_terms = log_critic(critic_a, fake_a, objective).mean() + log_critic(critic_b, fake_b, objective).mean()
    cyc = (rec_a - batch_a).abs().mean() + (rec_b - batch_b).abs().mean()
    return -fake_terms + alpha_cyc * cyc, fake_terms, cyc
