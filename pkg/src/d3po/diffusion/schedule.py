"""Noise schedule and every per-step coefficient derived from it.

Cosine signal schedule: alpha_bar(t) = f(t)/f(0) with
f(t) = cos^2(((t/T + s)/(1 + s)) * pi/2).  Per-step betas are clipped to
[1e-8, 0.999] and alpha_bar is then *recomputed* as the cumulative product of
the clipped alphas, so all stored arrays stay mutually consistent.

Arrays have length T+1 and are indexed by diffusion time t in 0..T, where
t=0 is clean data (alpha_bar[0] = 1).  Entries at index 0 of per-step arrays
(beta, sigma, ...) are placeholders and never read.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ScheduleConfig:
    n_steps: int = 20
    cosine_s: float = 0.008
    eta: float = 1.0          # scales the reverse-step noise
    sigma_min: float = 1e-4   # floor keeping every step's density proper

    def to_dict(self) -> dict:
        return {
            "n_steps": self.n_steps,
            "cosine_s": self.cosine_s,
            "eta": self.eta,
            "sigma_min": self.sigma_min,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScheduleConfig":
        return cls(**d)


BETA_MIN = 1e-8
BETA_MAX = 0.999


class Schedule:
    """All coefficient arrays for a fixed step count, indexed by diffusion t."""

    def __init__(self, cfg: ScheduleConfig):
        if cfg.n_steps < 1:
            raise ValueError("need at least one step")
        self.cfg = cfg
        T, s = cfg.n_steps, cfg.cosine_s

        t = np.arange(T + 1, dtype=np.float64)
        f = np.cos(((t / T + s) / (1.0 + s)) * (np.pi / 2.0)) ** 2
        ab_raw = f / f[0]
        beta = np.zeros(T + 1)
        beta[1:] = np.clip(1.0 - ab_raw[1:] / ab_raw[:-1], BETA_MIN, BETA_MAX)
        alpha = 1.0 - beta
        alpha[0] = 1.0
        alpha_bar = np.cumprod(alpha)

        self.beta = beta
        self.alpha = alpha
        self.alpha_bar = alpha_bar
        self.sqrt_ab = np.sqrt(alpha_bar)
        self.sqrt_1mab = np.sqrt(1.0 - alpha_bar)

        # reverse-step mean from predicted noise: mu = c_xt[t]*x_t - c_eps[t]*eps
        self.c_xt = np.ones(T + 1)
        self.c_eps = np.zeros(T + 1)
        self.c_xt[1:] = 1.0 / np.sqrt(alpha[1:])
        self.c_eps[1:] = beta[1:] / (np.sqrt(1.0 - alpha_bar[1:]) * np.sqrt(alpha[1:]))

        # forward-posterior mean: mu_tilde = post_x0[t]*x0 + post_xt[t]*x_t
        self.post_x0 = np.zeros(T + 1)
        self.post_xt = np.zeros(T + 1)
        self.post_x0[1:] = np.sqrt(alpha_bar[:-1]) * beta[1:] / (1.0 - alpha_bar[1:])
        self.post_xt[1:] = np.sqrt(alpha[1:]) * (1.0 - alpha_bar[:-1]) / (1.0 - alpha_bar[1:])

        # reverse-step noise scale: eta^2 * beta_tilde, floored
        beta_tilde = np.zeros(T + 1)
        beta_tilde[1:] = (1.0 - alpha_bar[:-1]) / (1.0 - alpha_bar[1:]) * beta[1:]
        self.sigma = np.maximum(cfg.sigma_min, cfg.eta * np.sqrt(beta_tilde))
        self.sigma[0] = cfg.sigma_min
        self.log_sigma = np.log(self.sigma)

    @property
    def T(self) -> int:
        return self.cfg.n_steps

    def marginal(self, x0: np.ndarray, eps: np.ndarray, t: np.ndarray) -> np.ndarray:
        """x_t = sqrt(ab_t) x0 + sqrt(1-ab_t) eps, rows at per-row times t."""
        t = np.asarray(t)
        return self.sqrt_ab[t][:, None] * x0 + self.sqrt_1mab[t][:, None] * eps

    def posterior_mean(self, x0: np.ndarray, xt: np.ndarray, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t)
        return self.post_x0[t][:, None] * x0 + self.post_xt[t][:, None] * xt
