"""Gradient training of BQC circuits against MMD targets.

Two modes: ``learn_theta`` fits the likelihood blocks with the prior frozen,
``learn_gamma`` fits the prior blocks with the likelihood frozen.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .circuits import AnsatzLayout, Circuit, ParameterSet, basis_prep, build_likelihood_ansatz, run
from .distribution import DiscreteDistribution, total_variation
from .errors import ConfigurationError, NumericalError, ValidationError
from .loss import (
    ConditionalTarget,
    KernelSpec,
    LossValue,
    adjoint_gradient,
    make_objective,
    shift_gradient,
)
from .probability import RegisterSplit, data_marginal, joint_table
from .statevector import EXACT, sample_probs

log = logging.getLogger(__name__)

LEARN_THETA = "learn_theta"
LEARN_GAMMA = "learn_gamma"
SGD = "sgd"
ADAM = "adam"


@dataclass
class TrainConfig:
    mode: str = LEARN_THETA
    max_iters: int = 3000
    tolerance: float = 1e-5
    learning_rate: float = 0.1
    optimizer: str = ADAM
    shots: int | str = EXACT
    seed: int = 0
    kernel: KernelSpec = field(default_factory=KernelSpec)
    init_scale: float = 0.1
    # "auto" uses the adjoint sweep for exact probabilities and parameter shift with shots
    gradient: str = "auto"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.mode not in (LEARN_THETA, LEARN_GAMMA):
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        if self.optimizer not in (SGD, ADAM):
            raise ConfigurationError(f"unknown optimizer {self.optimizer!r}")
        if self.gradient not in ("auto", "shift", "adjoint"):
            raise ConfigurationError(f"unknown gradient route {self.gradient!r}")
        if self.max_iters < 1:
            raise ConfigurationError("max_iters must be >= 1")
        if not 0 <= self.init_scale < np.inf:
            raise ConfigurationError(f"init_scale must be finite and >= 0, got {self.init_scale}")
        if not self.tolerance >= 0 or not 0 < self.learning_rate < np.inf:
            raise ConfigurationError("tolerance must be >= 0 and learning_rate finite and > 0")
        if self.shots != EXACT and (not isinstance(self.shots, int) or self.shots < 1):
            raise ConfigurationError(f"shots must be a positive integer or {EXACT!r}")
        if isinstance(self.kernel, dict):
            self.kernel = KernelSpec(**self.kernel)

    @property
    def trainable(self) -> str:
        return "theta" if self.mode == LEARN_THETA else "gamma"

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["kernel"] = self.kernel.to_dict()
        return d


@dataclass
class TrainReport:
    loss_history: list
    final_params: ParameterSet
    final_data_marginal: DiscreteDistribution
    final_prior: DiscreteDistribution | None
    metrics: dict
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.loss_history)

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "final_loss": self.loss_history[-1],
            "metrics": self.metrics,
            "final_params": self.final_params.to_dict(),
            "final_data_marginal": self.final_data_marginal.probs.tolist(),
            "final_prior": None if self.final_prior is None else self.final_prior.probs.tolist(),
        }


class Adam:
    def __init__(self, size, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.b1 * self.m + (1 - self.b1) * grad
        self.v = self.b2 * self.v + (1 - self.b2) * grad ** 2
        m_hat = self.m / (1 - self.b1 ** self.t)
        v_hat = self.v / (1 - self.b2 ** self.t)
        return -self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class Sgd:
    def __init__(self, size, lr):
        self.lr = lr

    def step(self, grad: np.ndarray) -> np.ndarray:
        return -self.lr * grad


def make_optimizer(config: TrainConfig, size: int):
    if config.optimizer == ADAM:
        return Adam(size, config.learning_rate, config.beta1, config.beta2, config.eps)
    return Sgd(size, config.learning_rate)


def _check_mode(params: ParameterSet, config: TrainConfig) -> None:
    want_frozen = "gamma" if config.mode == LEARN_THETA else "theta"
    if not params.frozen(want_frozen) or params.frozen(config.trainable):
        raise ConfigurationError(
            f"mode {config.mode} needs {want_frozen} frozen and {config.trainable} unfrozen "
            f"(got gamma_frozen={params.gamma_frozen}, theta_frozen={params.theta_frozen})")


def _route(config: TrainConfig) -> str:
    if config.gradient != "auto":
        if config.gradient == "adjoint" and config.shots != EXACT:
            raise ConfigurationError("the adjoint route needs exact probabilities")
        return config.gradient
    return "adjoint" if config.shots == EXACT else "shift"


def _loss_and_grad(circuit, params, objective, split, config, rng) -> LossValue:
    if _route(config) == "adjoint":
        return adjoint_gradient(circuit, params, objective, split)
    return shift_gradient(circuit, params, objective, split, config.shots, rng)


def _initial_vector(config: TrainConfig, size: int) -> np.ndarray:
    rng = np.random.default_rng(config.seed)
    return rng.uniform(-config.init_scale, config.init_scale, size)


def _optimize(terms, params: ParameterSet, config: TrainConfig):
    """Shared loop; ``terms`` is a list of ``(circuit, objective, split)`` whose losses add."""
    name = config.trainable
    opt = make_optimizer(config, params[name].size)
    history, converged = [], False
    for it in range(config.max_iters):
        rng = None if config.shots == EXACT else np.random.default_rng([config.seed, it])
        value, grad = 0.0, np.zeros(params[name].size)
        for circuit, objective, split in terms:
            lv = _loss_and_grad(circuit, params, objective, split, config, rng)
            value += lv.value
            grad += lv.gradient
        if not (np.isfinite(value) and np.all(np.isfinite(grad))):
            raise NumericalError(f"non-finite loss or gradient at iteration {it}")
        history.append(float(value))
        if value <= config.tolerance:
            converged = True
            break
        setattr(params, name, params[name] + opt.step(grad))
    return history, converged


def train(circuit: Circuit, params: ParameterSet, target, config: TrainConfig,
          split: RegisterSplit | None = None, *, reinit: bool = True) -> TrainReport:
    """Minimize the MMD loss of ``circuit`` against ``target``.

    The trainable vector is redrawn uniformly from ``[-init_scale, init_scale]``
    with ``config.seed`` unless ``reinit`` is false. ``target`` is a data
    distribution, or a :class:`ConditionalTarget` for per-latent fitting.
    """
    _check_mode(params, config)
    split = split or RegisterSplit(circuit.num_data_qubits, circuit.num_ancilla_qubits)
    if split.num_qubits != circuit.num_qubits:
        raise ValidationError("register split does not match the circuit")
    name = config.trainable
    size = circuit.slot_counts()[name]
    params = params.copy()
    if reinit:
        setattr(params, name, _initial_vector(config, size))
    elif params[name].size != size:
        raise ValidationError(f"{name} has {params[name].size} entries, circuit needs {size}")
    if not isinstance(target, ConditionalTarget):
        target = DiscreteDistribution(target)
    other = "gamma" if name == "theta" else "theta"
    frozen_before = params[other].copy()

    objective = make_objective(target, config.kernel, split)
    history, converged = _optimize([(circuit, objective, split)], params, config)
    if not np.array_equal(frozen_before, params[other]):
        raise AssertionError("frozen parameters changed during training")

    metric_target = _marginal_target(circuit, params, split, target)
    metrics = evaluate(circuit, params, split, metric_target)
    state = run(circuit, params)
    prior = None
    if split.m:
        prior = DiscreteDistribution(joint_table(state, split).sum(axis=0))
    log.info("trained %s: %d iterations, final loss %.3e, valid mass %.4f",
             name, len(history), history[-1], metrics["valid_mass"])
    return TrainReport(history, params, data_marginal(state, split), prior, metrics, converged)


def _marginal_target(circuit, params, split, target) -> np.ndarray:
    if not isinstance(target, ConditionalTarget):
        return np.asarray(target, dtype=float)
    J = joint_table(run(circuit, params), split)
    k = len(target.components)
    w = J[:, :k].sum(axis=0)
    T = np.stack([c.probs for c in target.components], axis=1)
    return T @ (w / w.sum())


def evaluate(circuit: Circuit, params: ParameterSet, split: RegisterSplit | None, target,
             shots=EXACT, seed: int = 0) -> dict:
    """Valid mass (mass on the target's support), total variation and learned prior.

    With finite ``shots`` the ``empirical_*`` entries are computed from one
    batch of samples drawn with ``seed``.
    """
    split = split or RegisterSplit(circuit.num_data_qubits, circuit.num_ancilla_qubits)
    t = np.asarray(target, dtype=float)
    J = joint_table(run(circuit, params), split)
    p = J.sum(axis=1)
    support = t > 0
    out = {
        "valid_mass": float(p[support].sum()),
        "total_variation": total_variation(p, t),
        "prior": J.sum(axis=0).tolist() if split.m else [],
    }
    if shots != EXACT:
        counts = sample_probs(J.reshape(-1), shots, np.random.default_rng(seed)).reshape(J.shape)
        q = counts.sum(axis=1) / shots
        out["empirical_valid_mass"] = float(q[support].sum())
        out["empirical_total_variation"] = total_variation(q, t)
        out["empirical_prior"] = (counts.sum(axis=0) / shots).tolist() if split.m else []
    return out


def pretrain_likelihood(layout: AnsatzLayout, component_targets, config: TrainConfig) -> ParameterSet:
    """Fit the likelihood blocks so that ``P(x | lambda_i)`` matches ``component_targets[i]``.

    Each component is fitted on its own copy of the circuit with the ancillas
    clamped to ``|lambda_i>``; the per-component losses are summed and share
    one ``theta``. The returned set has ``theta`` frozen and a zero ``gamma``
    sized for ``layout``'s prior blocks, ready for prior learning.
    """
    targets = [c if isinstance(c, DiscreteDistribution) else DiscreteDistribution(c)
               for c in component_targets]
    if len(targets) != layout.num_latents:
        raise ValidationError(f"need {layout.num_latents} component targets, got {len(targets)}")
    lik = build_likelihood_ansatz(layout)
    split = RegisterSplit(layout.n, layout.m)
    terms = [(basis_prep(i, layout.n, layout.m) + lik, make_objective(t, config.kernel, split), split)
             for i, t in enumerate(targets)]
    cfg = replace(config, mode=LEARN_THETA)
    params = ParameterSet(theta=_initial_vector(cfg, lik.slot_counts()["theta"]), gamma_frozen=True)
    history, _ = _optimize(terms, params, cfg)
    log.info("likelihood fit: %d iterations, final loss %.3e; per-component TV %s",
             len(history), history[-1], np.round(component_tv(layout, params, targets), 4).tolist())
    return ParameterSet(np.zeros(layout.prior_layers * layout.m), params.theta,
                        gamma_frozen=False, theta_frozen=True)


def component_tv(layout: AnsatzLayout, params: ParameterSet, component_targets) -> list:
    """Total variation between each clamped ``P(x | lambda_i)`` and its target."""
    lik = build_likelihood_ansatz(layout)
    split = RegisterSplit(layout.n, layout.m)
    out = []
    for i, t in enumerate(component_targets):
        p = data_marginal(run(basis_prep(i, layout.n, layout.m) + lik, params), split)
        out.append(total_variation(p, t))
    return out
