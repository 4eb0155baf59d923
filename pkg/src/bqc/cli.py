"""Command-line entry point: ``train``, ``sample``, ``inspect`` and ``verify``.

Exit codes: 0 success, 1 failed verification, 2 configuration error,
3 numerical failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .circuits import (
    AnsatzLayout,
    Circuit,
    ParameterSet,
    build_bqc,
    build_qcbm_baseline,
    dumps,
    loads,
    run,
)
from .datasets import BasGrid, GaussianSpec, MixtureSpec, bas_patterns, bas_target, discretized_gaussian, \
    mixture_target, point_mass, write_distribution_csv
from .errors import BQCError, ConditioningError, ConfigurationError, NumericalError, ValidationError
from .loss import ConditionalTarget, KernelSpec
from .probability import RegisterSplit, data_marginal, joint_table, likelihood, posterior, prior
from .statevector import EXACT, sample_probs
from .trainer import LEARN_GAMMA, LEARN_THETA, TrainConfig, component_tv, pretrain_likelihood, train

log = logging.getLogger("bqc")

BAS_GENERATE = "bas_generate"
LEARN_PRIOR = "learn_prior"
QCBM_BASELINE = "qcbm_baseline"
EXPERIMENTS = (BAS_GENERATE, LEARN_PRIOR, QCBM_BASELINE)
MODEL_FORMAT_VERSION = 1

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3, 4

# keys each experiment accepts besides the common ones
_COMMON = {"experiment", "train", "output_dir"}
_ALLOWED = {
    BAS_GENERATE: {"grid", "layout", "loss", "prior"},
    LEARN_PRIOR: {"layout", "mixture", "pretrain"},
    QCBM_BASELINE: {"grid", "layers"},
}
_REQUIRED = {
    BAS_GENERATE: {"grid", "layout"},
    LEARN_PRIOR: {"layout", "mixture"},
    QCBM_BASELINE: {"grid", "layers"},
}


# --------------------------------------------------------------------------
# experiment configuration


@dataclass
class ExperimentConfig:
    experiment: str
    train: TrainConfig = field(default_factory=TrainConfig)
    output_dir: str = "runs/experiment"
    grid: BasGrid | None = None
    layout: AnsatzLayout | None = None
    loss: str = "marginal"
    prior: list | str = "uniform"
    mixture: MixtureSpec | None = None
    pretrain: TrainConfig | None = None
    layers: int | None = None

    def to_dict(self) -> dict:
        d = {"experiment": self.experiment, "output_dir": self.output_dir, "train": self.train.to_dict()}
        if self.grid is not None:
            d["grid"] = {"rows": self.grid.rows, "cols": self.grid.cols}
        if self.experiment == BAS_GENERATE:
            d.update(layout=self.layout.to_dict(), loss=self.loss, prior=self.prior)
        if self.experiment == LEARN_PRIOR:
            d["layout"] = self.layout.to_dict()
            d["mixture"] = [{"weight": w, "mean": g.mean, "sigma": g.sigma} for w, g in self.mixture.components]
            d["pretrain"] = self.pretrain.to_dict()
        if self.experiment == QCBM_BASELINE:
            d["layers"] = self.layers
        return d


def _strict(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigurationError(f"'{where}' must be an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigurationError(f"unknown key(s) in '{where}': {', '.join(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigurationError(f"bad '{where}': {exc}") from None
    except ValidationError as exc:
        raise ConfigurationError(f"bad '{where}': {exc}") from None


def _train_config(data, where: str, **forced) -> TrainConfig:
    data = dict(data or {})
    for k, v in forced.items():
        if data.get(k, v) != v:
            raise ConfigurationError(f"'{where}.{k}' must be {v!r} for this experiment")
        data[k] = v
    if isinstance(data.get("kernel"), dict):
        data["kernel"] = _strict(KernelSpec, {k: tuple(v) if k == "bandwidths" else v
                                              for k, v in data["kernel"].items()}, f"{where}.kernel")
    return _strict(TrainConfig, data, where)


def parse_config(data: dict, default_output: str = "runs/experiment") -> ExperimentConfig:
    """Validate a raw JSON object; errors name the offending key."""
    if not isinstance(data, dict):
        raise ConfigurationError("config must be a JSON object")
    kind = data.get("experiment")
    if kind not in EXPERIMENTS:
        raise ConfigurationError(f"'experiment' must be one of {', '.join(EXPERIMENTS)}, got {kind!r}")
    unknown = sorted(set(data) - _COMMON - _ALLOWED[kind])
    if unknown:
        raise ConfigurationError(f"unknown key(s) for {kind}: {', '.join(unknown)}")
    missing = sorted(_REQUIRED[kind] - set(data))
    if missing:
        raise ConfigurationError(f"missing required key(s) for {kind}: {', '.join(missing)}")

    cfg = ExperimentConfig(kind, output_dir=str(data.get("output_dir", default_output)))
    mode = LEARN_GAMMA if kind == LEARN_PRIOR else LEARN_THETA
    cfg.train = _train_config(data.get("train"), "train", mode=mode)
    if "grid" in data:
        cfg.grid = _strict(BasGrid, data["grid"], "grid")
    if "layout" in data:
        cfg.layout = _strict(AnsatzLayout, data["layout"], "layout")

    if kind == BAS_GENERATE:
        npix, K = cfg.grid.num_pixels, len(bas_patterns(cfg.grid))
        if cfg.layout.n != npix:
            raise ConfigurationError(f"'layout.n' is {cfg.layout.n} but grid has {npix} pixels")
        if cfg.layout.num_latents != K:
            raise ConfigurationError(f"'layout.num_latents' must equal the {K} BAS patterns")
        cfg.loss = data.get("loss", "marginal")
        if cfg.loss not in ("marginal", "conditional"):
            raise ConfigurationError(f"'loss' must be 'marginal' or 'conditional', got {cfg.loss!r}")
        cfg.prior = data.get("prior", "uniform")
        if cfg.prior != "uniform":
            try:
                p = np.asarray(cfg.prior, dtype=float)
            except (TypeError, ValueError):
                raise ConfigurationError("'prior' must be 'uniform' or a list of numbers") from None
            if p.shape != (K,) or np.any(p < 0) or abs(p.sum() - 1) > 1e-9:
                raise ConfigurationError(f"'prior' must be {K} nonnegative numbers summing to 1")
            cfg.prior = p.tolist()

    if kind == LEARN_PRIOR:
        comps = data["mixture"]
        if not isinstance(comps, list) or not comps:
            raise ConfigurationError("'mixture' must be a nonempty list of {weight, mean, sigma}")
        parsed = []
        for i, c in enumerate(comps):
            if not isinstance(c, dict) or set(c) != {"weight", "mean", "sigma"}:
                raise ConfigurationError(f"'mixture[{i}]' needs exactly the keys weight, mean, sigma")
            try:
                parsed.append((c["weight"], GaussianSpec(c["mean"], c["sigma"], cfg.layout.n)))
            except ValidationError as exc:
                raise ConfigurationError(f"bad 'mixture[{i}]': {exc}") from None
        try:
            cfg.mixture = MixtureSpec(tuple(parsed))
        except ValidationError as exc:
            raise ConfigurationError(f"bad 'mixture': {exc}") from None
        if len(parsed) != cfg.layout.num_latents:
            raise ConfigurationError(f"'mixture' has {len(parsed)} components for "
                                     f"{cfg.layout.num_latents} latents")
        cfg.pretrain = _train_config(data.get("pretrain"), "pretrain", mode=LEARN_THETA)

    if kind == QCBM_BASELINE:
        layers = data["layers"]
        if isinstance(layers, bool) or not isinstance(layers, int) or layers < 1:
            raise ConfigurationError(f"'layers' must be a positive integer, got {layers!r}")
        cfg.layers = layers
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON: {exc}") from None
    return parse_config(data, default_output=str(Path("runs") / path.stem))


# --------------------------------------------------------------------------
# experiments


def bas_setup(cfg: ExperimentConfig):
    K = cfg.layout.num_latents
    pri = np.ones(K) / K if cfg.prior == "uniform" else np.asarray(cfg.prior)
    circuit = build_bqc(cfg.layout, prior=pri)
    params = ParameterSet(theta=np.zeros(circuit.slot_counts()["theta"]), gamma_frozen=True)
    if cfg.loss == "conditional":
        size = 2 ** cfg.layout.n
        target = ConditionalTarget([point_mass(i, size) for i in bas_patterns(cfg.grid)])
    else:
        target = bas_target(cfg.grid)
    return circuit, params, target


def qcbm_setup(cfg: ExperimentConfig):
    circuit = build_qcbm_baseline(cfg.grid.num_pixels, cfg.layers)
    params = ParameterSet(theta=np.zeros(circuit.slot_counts()["theta"]), gamma_frozen=True)
    return circuit, params, bas_target(cfg.grid)


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Train as configured and write all artifacts; returns the report dict."""
    t0 = time.perf_counter()
    extra = {}
    if cfg.experiment == BAS_GENERATE:
        circuit, params, target = bas_setup(cfg)
    elif cfg.experiment == QCBM_BASELINE:
        circuit, params, target = qcbm_setup(cfg)
    else:
        comps = [discretized_gaussian(g) for _, g in cfg.mixture.components]
        params = pretrain_likelihood(cfg.layout, comps, cfg.pretrain)
        extra["component_tv"] = component_tv(cfg.layout, params, comps)
        extra["target_prior"] = cfg.mixture.weights.tolist()
        circuit = build_bqc(cfg.layout)
        target = mixture_target(cfg.mixture)

    report = train(circuit, params, target, cfg.train)
    out = report.to_dict()
    out.update(extra)
    out["experiment"] = cfg.experiment
    out["wall_clock_seconds"] = time.perf_counter() - t0
    write_artifacts(Path(cfg.output_dir), cfg, circuit, report, out)
    return out


def model_document(circuit: Circuit, params: ParameterSet, layout: AnsatzLayout | None, experiment: str) -> dict:
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "experiment": experiment,
        "layout": None if layout is None else layout.to_dict(),
        "circuit": dumps(circuit),
        "params": params.to_dict(),
    }


def load_model(path):
    with open(Path(path)) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise OSError(f"{path}: unreadable model file: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise OSError(f"{path}: not a model file (format_version {MODEL_FORMAT_VERSION} expected)")
    try:
        return loads(doc["circuit"]), ParameterSet.from_dict(doc["params"])
    except (KeyError, ValidationError) as exc:
        raise OSError(f"{path}: corrupt model file: {exc}") from None


def write_artifacts(out_dir: Path, cfg: ExperimentConfig, circuit: Circuit, report, report_dict: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "report.json", "w") as fh:
        json.dump(report_dict, fh, indent=2)
    with open(out_dir / "model.json", "w") as fh:
        json.dump(model_document(circuit, report.final_params, cfg.layout, cfg.experiment), fh, indent=2)
    with open(out_dir / "config.resolved.json", "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2)
    write_distribution_csv(out_dir / "distribution.csv", report.final_data_marginal)
    with open(out_dir / "loss_history.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "loss"])
        for i, v in enumerate(report.loss_history):
            w.writerow([i, f"{v:.16e}"])


# --------------------------------------------------------------------------
# commands


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    if args.output_dir:
        cfg.output_dir = args.output_dir
    rep = run_experiment(cfg)
    m = rep["metrics"]
    print(f"{cfg.experiment}: {rep['iterations']} iterations, final loss {rep['final_loss']:.6g}, "
          f"valid_mass {m['valid_mass']:.6f}, total_variation {m['total_variation']:.6f}")
    if rep.get("final_prior") is not None:
        print("prior: " + " ".join(f"{p:.6f}" for p in rep["final_prior"]))
    print(f"artifacts written to {cfg.output_dir}")
    return EXIT_OK


def sample_histogram(circuit: Circuit, params: ParameterSet, shots: int, seed: int) -> np.ndarray:
    """Counts of each data-register outcome from ``shots`` measurements."""
    split = RegisterSplit(circuit.num_data_qubits, circuit.num_ancilla_qubits)
    p = data_marginal(run(circuit, params), split).probs
    return sample_probs(p, shots, np.random.default_rng(seed))


def cmd_sample(args) -> int:
    if args.shots < 1:
        raise ConfigurationError("--shots must be >= 1")
    circuit, params = load_model(args.model)
    counts = sample_histogram(circuit, params, args.shots, args.seed)
    with open(Path(args.out), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["outcome", "count", "frequency"])
        for x, c in enumerate(counts):
            w.writerow([x, int(c), f"{c / args.shots:.16e}"])
    print(f"{args.shots} shots over {counts.size} outcomes written to {args.out}")
    return EXIT_OK


def cmd_inspect(args) -> int:
    circuit, params = load_model(args.model)
    split = RegisterSplit(circuit.num_data_qubits, circuit.num_ancilla_qubits)
    state = run(circuit, params)
    out = sys.stdout
    if split.m == 0:
        print("no ancilla register: data distribution only", file=out)
        pri = None
    else:
        pri = prior(state, split).probs
        print("# prior P(lambda)", file=out)
        print("latent,probability", file=out)
        for i, p in enumerate(pri):
            print(f"{i},{p:.12g}", file=out)
        print(f"# likelihood P(x|lambda): outcomes with probability >= {args.min_prob:g}", file=out)
        print("latent,outcome,probability", file=out)
        for i in range(2 ** split.m):
            try:
                lik = likelihood(state, split, i).probs
            except ConditioningError:
                print(f"{i},,undefined (P(lambda={i}) is zero)", file=out)
                continue
            for x in np.flatnonzero(lik >= args.min_prob):
                print(f"{i},{x},{lik[x]:.12g}", file=out)
    if args.posterior_x is not None:
        if not 0 <= args.posterior_x < 2 ** split.n:
            raise ConfigurationError(f"--posterior-x must lie in [0, {2 ** split.n})")
        if pri is None:
            raise ConfigurationError("posterior needs an ancilla register")
        print(f"# posterior P(lambda|x={args.posterior_x})", file=out)
        print("latent,probability", file=out)
        try:
            post = posterior(state, split, args.posterior_x).probs
        except ConditioningError:
            print(f",undefined (P(x={args.posterior_x}) is zero)", file=out)
        else:
            for i, p in enumerate(post):
                print(f"{i},{p:.12g}", file=out)
    marg = joint_table(state, split).sum(axis=1)
    print(f"# data marginal: {np.count_nonzero(marg >= args.min_prob)} outcomes with probability "
          f">= {args.min_prob:g}", file=out)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_checks
    results = run_checks()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}" + (f": {detail}" if detail else ""))
    failed = [name for name, ok, _ in results if not ok]
    if failed:
        print(f"{len(failed)} check(s) failed: {', '.join(failed)}")
        return EXIT_VERIFY
    print(f"all {len(results)} checks passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bqc", description="Bayesian quantum circuit experiments")
    ap.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run the experiment described by a JSON config")
    p.add_argument("config")
    p.add_argument("--output-dir", help="override the config's output_dir")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", help="measure a trained model and write a histogram CSV")
    p.add_argument("model")
    p.add_argument("--shots", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("inspect", help="print prior, likelihoods and a posterior of a trained model")
    p.add_argument("model")
    p.add_argument("--posterior-x", type=int)
    p.add_argument("--min-prob", type=float, default=1e-3)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("verify", help="run the fast self-check suite")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    threads = os.environ.get("BQC_THREADS")
    try:
        if threads is not None:
            if not threads.isdigit() or int(threads) < 1:
                raise ConfigurationError(f"BQC_THREADS must be a positive integer, got {threads!r}")
            from threadpoolctl import threadpool_limits
            with threadpool_limits(limits=int(threads)):
                return args.func(args)
        return args.func(args)
    except (ConfigurationError, ValidationError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except BQCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
