"""Seeded instance generators used by the test suite and the CLI demos."""

from __future__ import annotations

import numpy as np

from .prob_core import Channel, JointDistribution


def random_joint(rng: np.random.Generator, n_x: int = 2, n_y: int = 2) -> JointDistribution:
    """Joint law drawn uniformly from the simplex over (a, x, y)."""
    return JointDistribution(rng.dirichlet(np.ones(2 * n_x * n_y)).reshape(2, n_x, n_y))


def random_classifier(rng: np.random.Generator, n_x: int = 2, n_y: int = 2) -> Channel:
    return Channel(rng.dirichlet(np.ones(n_y), size=n_x))


def random_instance(rng: np.random.Generator, n_x: int = 2, n_y: int = 2) -> tuple[JointDistribution, Channel]:
    return random_joint(rng, n_x, n_y), random_classifier(rng, n_x, n_y)


def fair_joint(rng: np.random.Generator, n_x: int = 2, n_y: int = 2) -> JointDistribution:
    """Joint law with X independent of A given Y, so every classifier is already fair."""
    p_ay = rng.dirichlet(np.ones(2 * n_y)).reshape(2, n_y)
    x_given_y = rng.dirichlet(np.ones(n_x), size=n_y)  # [y, x]
    return JointDistribution(np.einsum("ay,yx->axy", p_ay, x_given_y))


def saturated_classifier(rng: np.random.Generator, n_x: int, x0: int = 0, x1: int = 1) -> Channel:
    """Binary classifier with W(1|x0) = 0 and W(1|x1) = 1; other rows random."""
    p1 = rng.uniform(0.05, 0.95, size=n_x)
    p1[x0], p1[x1] = 0.0, 1.0
    return Channel(np.column_stack([1.0 - p1, p1]))


def biased_instance(rng: np.random.Generator, n_x: int | None = None) -> tuple[JointDistribution, Channel]:
    """Binary instance where an informative classifier favours the majority group.

    Each feature carries a latent score that drives both the label and a
    sigmoid classifier; the minority group is tilted toward low scores.
    Roughly one draw in eight is proper, follows the minority-underprivileged
    convention and has a witness feature, so callers filter.
    """
    n_x = int(rng.integers(3, 7)) if n_x is None else n_x
    score = np.sort(rng.uniform(0.05, 0.95, size=n_x))
    tilt = rng.uniform(0.3, 1.5)
    x_given_a = np.exp(np.outer([0.0, -tilt], score)) * rng.dirichlet(np.full(n_x, 2.0), size=2)
    x_given_a /= x_given_a.sum(axis=1, keepdims=True)
    minority = rng.uniform(0.15, 0.45)
    p_a = np.array([1.0 - minority, minority])
    y1 = np.clip(score[None, :] + rng.normal(0.0, 0.1, size=(2, n_x)), 0.02, 0.98)
    p = np.empty((2, n_x, 2))
    p[:, :, 1] = p_a[:, None] * x_given_a * y1
    p[:, :, 0] = p_a[:, None] * x_given_a * (1.0 - y1)
    sharpness = rng.uniform(4.0, 12.0)
    w1 = 1.0 / (1.0 + np.exp(-sharpness * (score - 0.5 + rng.normal(0.0, 0.05, size=n_x))))
    return JointDistribution(p / p.sum()), Channel(np.column_stack([1.0 - w1, w1]))


def undercut_instance() -> tuple[JointDistribution, Channel]:
    """Classifier that outputs 1 on the bulk of the feature space.

    X = 0 and X = 1 carry almost all the mass and are both mapped to 1, yet
    X = 0 is mostly labelled 0.  Rerouting X = 0 to the rare feature X = 2,
    the only one the classifier labels 0, lowers the distortion below that of
    the unprocessed classifier.
    """
    p_x = np.array([0.45, 0.45, 0.10])
    y1_given_x = np.array([0.1, 0.9, 0.5])
    p_a = np.array([0.7, 0.3])
    p = np.empty((2, 3, 2))
    for a in range(2):
        p[a, :, 1] = p_a[a] * p_x * y1_given_x
        p[a, :, 0] = p_a[a] * p_x * (1.0 - y1_given_x)
    w = Channel(np.array([[0.0, 1.0], [0.0, 1.0], [1.0, 0.0]]))
    return JointDistribution(p), w
