"""Command-line front end: dataset generation, corruption, filtering,
training, evaluation, circuit verification, and experiment presets.

Every command is a deterministic function of its flags, optional config
file, and seed; outputs are CSV/JSON only.  Exit codes: 0 success, 2 config
error, 3 validation error, 4 I/O error, 5 threshold failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import circuit, datagen
from .datagen import (BENCHMARK_NAMES, ConfigError, CorruptionPolicy,
                      ModelSpec, benchmark, corrupt, generate_hmm,
                      generate_hqmm, load_hmm, load_obs, save_hmm, save_obs)
from .entropy_filter import rcr_ef
from .models import (DensityMatrix, StackedKraus, batch_loglik, load_model,
                     model_from_dict, save_model)
from .rotate import SolverConfig
from .trainers import TrainConfig, train_em, train_ila, train_rila

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VALIDATION = 3
EXIT_IO = 4
EXIT_THRESHOLD = 5

# Offset between the train-set seed and the validation-set seed of one run.
VAL_SEED_OFFSET = 1_000_003
PROP1_TOL = 1e-10


def resolve_model(name_or_path: str) -> ModelSpec:
    """A benchmark name, a Kraus model file, or a classical-spec file."""
    if name_or_path in BENCHMARK_NAMES:
        return benchmark(name_or_path)
    path = Path(name_or_path)
    if not path.exists():
        raise ConfigError(f"unknown model {name_or_path!r}")
    with open(path) as fh:
        doc = json.load(fh)
    if "kraus" in doc:
        kappa, rho0 = model_from_dict(doc)
        return ModelSpec(name=path.stem, kind="hqmm", kraus=kappa, rho0=rho0)
    if "A" in doc:
        spec = datagen.HmmSpec(A=np.array(doc["A"]), C=np.array(doc["C"]),
                               x0=np.array(doc["x0"]))
        n = spec.n
        return ModelSpec(name=path.stem, kind="hmm", hmm=spec,
                         rho0=DensityMatrix.pure(n))
    raise ConfigError(f"{name_or_path}: not a recognized model file")


def _train_config(args) -> TrainConfig:
    solver = SolverConfig(
        kind="pattern_search" if args.solver == "pattern" else "fd_local",
        max_evals=args.max_evals)
    return TrainConfig(
        b=args.b, B=args.batches, I=args.iters, P=args.proposals, C=args.c,
        objective="l1" if args.objective == "l1" else "regular",
        lam=getattr(args, "lam", 0.01), solver=solver, seed=args.seed,
        resample="paper_literal" if args.resample == "literal" else "softmax",
        chain_proposals=args.chain_proposals,
        keep_high_score=args.keep_high_s,
        em_restarts=args.em_restarts)


def cmd_generate(args) -> int:
    model = resolve_model(args.model)
    model.check()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if model.kind == "hqmm":
        train = generate_hqmm(model, args.n, args.t, args.seed)
        val = generate_hqmm(model, args.val, args.t, args.seed + VAL_SEED_OFFSET)
        save_model(out / "model.json", model.kraus, model.rho0)
    else:
        train = generate_hmm(model.hmm, args.n, args.t, args.seed)
        val = generate_hmm(model.hmm, args.val, args.t,
                           args.seed + VAL_SEED_OFFSET)
        save_hmm(out / "model.json", model.hmm)
    save_obs(out / "train.csv", train)
    save_obs(out / "val.csv", val)
    print(f"wrote {args.n}x{args.t} train and {args.val}x{args.t} "
          f"validation matrices to {out}")
    return EXIT_OK


def cmd_corrupt(args) -> int:
    obs = load_obs(args.data)
    policy = CorruptionPolicy(gamma=args.gamma, value=args.value,
                              seed=args.seed)
    out = corrupt(obs, policy, m=args.m)
    save_obs(args.out, out)
    changed = int((out != obs).any(axis=1).sum())
    print(f"corrupted {changed} of {obs.shape[0]} rows -> {args.out}")
    return EXIT_OK


def cmd_filter(args) -> int:
    obs = load_obs(args.data)
    filtered, stats = rcr_ef(obs, args.c, keep_high_score=args.keep_high_s)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_obs(out / "filtered.csv", filtered)
    stats.write_csv(out / "filter_report.csv")
    removed = obs.shape[0] - filtered.shape[0]
    print(f"removed {removed} rows; report at {out / 'filter_report.csv'}")
    return EXIT_OK


def cmd_train(args) -> int:
    train_obs = load_obs(args.data)
    val_obs = load_obs(args.val)
    cfg = _train_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.trainer == "em":
        record = train_em(train_obs, val_obs, args.states, cfg)
        save_hmm(out / "model_best.json", record.hmm_best)
    else:
        model = resolve_model(args.model)
        if model.kind == "hqmm":
            n, m, w = model.kraus.n, model.kraus.m, model.kraus.w
            rho0 = model.rho0
        else:
            n, m, w = model.hmm.n, model.hmm.m, 1
            rho0 = DensityMatrix.pure(n)
        if int(max(train_obs.max(), val_obs.max())) > m:
            raise ConfigError("data alphabet exceeds the model's output count")
        init_rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence((args.seed, 1))))
        kappa_init = StackedKraus.random(n, m, w, init_rng)
        if args.trainer == "ila":
            record = train_ila(train_obs, val_obs, kappa_init, rho0, cfg)
        else:
            record, fstats, trace = train_rila(train_obs, val_obs, kappa_init,
                                               rho0, cfg)
            fstats.write_csv(out / "filter_report.csv")
            trace.write_csv(out / "resample_trace.csv")
        save_model(out / "model_best.json", record.kappa_best, rho0)

    record.write_iterations_csv(out / "iterations.csv")
    summary = record.summary()
    summary["trainer"] = args.trainer
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=1)
    print(f"train LL {record.train_ll_sum:.4f} (mean {record.train_ll_mean:.6f}) "
          f"| validation LL {record.val_ll_sum:.4f} "
          f"(mean {record.val_ll_mean:.6f})")
    return EXIT_OK


def cmd_eval(args) -> int:
    model = resolve_model(args.model)
    obs = load_obs(args.data)
    if int(obs.max()) > model.m:
        raise ConfigError("data alphabet exceeds the model's output count")
    if model.kind == "hqmm":
        total = batch_loglik(model.kraus, model.rho0, obs)
    else:
        total = model.hmm.batch_forward_loglik(obs)
    if total == float("-inf"):
        print("loglik: -inf (data contains a zero-probability transition)")
    else:
        print(f"loglik sum {total:.6f} | per-observation mean "
              f"{total / obs.size:.6f}")
    return EXIT_OK


def cmd_prop1(args) -> int:
    if args.trials < 1:
        raise ConfigError("trials must be >= 1")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(args.seed)))
    max_dev = 0.0
    max_trace_dev = 0.0
    for _ in range(args.trials):
        inst = circuit.random_instance(rng)
        res = circuit.circuit_posterior(inst)
        post, denom = circuit.classical_posterior(inst)
        max_dev = max(max_dev, float(np.abs(res.diag - post).max()))
        max_trace_dev = max(max_trace_dev, abs(res.prob - denom))
    print(f"trials {args.trials} | max posterior deviation {max_dev:.3e} "
          f"| max trace deviation {max_trace_dev:.3e}")
    return EXIT_OK if max_dev < PROP1_TOL else EXIT_THRESHOLD


# ---------------------------------------------------------------------------
# Presets: the full benchmark grid with pinned seeds
# ---------------------------------------------------------------------------

_PRESET_MODELS = {"m2010": "m2010_24", "s2018": "s2018_26", "hmm88": "hmm_88"}
_PRESET_SEED = 2024


def preset_names() -> list[str]:
    names = []
    for short in _PRESET_MODELS:
        for data in ("clean", "corrupt"):
            for trainer in ("ila", "rila", "em"):
                for b in (4, 8):
                    for obj in ("", "-l1"):
                        names.append(f"{short}-{data}-{trainer}-b{b}{obj}")
    return names


def cmd_preset(args) -> int:
    name = args.name
    if name not in preset_names():
        raise ConfigError(f"unknown preset {name!r}; see 'hqml preset --list'")
    short, data, trainer, rest = name.split("-", 3)
    b_batches = int(rest.split("-")[0][1:])
    objective = "l1" if rest.endswith("-l1") else "regular"
    model = benchmark(_PRESET_MODELS[short])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    seed = args.seed if args.seed is not None else _PRESET_SEED
    if model.kind == "hqmm":
        train = generate_hqmm(model, 30, 100, seed)
        val = generate_hqmm(model, 5, 100, seed + VAL_SEED_OFFSET)
        save_model(out / "model.json", model.kraus, model.rho0)
    else:
        train = generate_hmm(model.hmm, 30, 100, seed)
        val = generate_hmm(model.hmm, 5, 100, seed + VAL_SEED_OFFSET)
        save_hmm(out / "model.json", model.hmm)
    corrupted = data == "corrupt"
    if corrupted:
        train = corrupt(train, CorruptionPolicy(gamma=1 / 3, value=4,
                                                seed=seed), m=model.m)
    save_obs(out / "train.csv", train)
    save_obs(out / "val.csv", val)

    cfg = TrainConfig(b=5, B=b_batches, I=6, P=10, C=10 if corrupted else 0,
                      objective=objective, seed=seed,
                      solver=SolverConfig(max_evals=args.max_evals),
                      em_restarts=8 if corrupted else 5)
    t0 = time.perf_counter()
    if trainer == "em":
        record = train_em(train, val, model.hmm.n if model.kind == "hmm" else
                          model.kraus.n, cfg)
        save_hmm(out / "model_best.json", record.hmm_best)
    else:
        if model.kind == "hqmm":
            n, m, w, rho0 = (model.kraus.n, model.kraus.m, model.kraus.w,
                             model.rho0)
        else:
            n, m, w, rho0 = model.hmm.n, model.hmm.m, 1, DensityMatrix.pure(
                model.hmm.n)
        init_rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence((seed, 1))))
        kappa_init = StackedKraus.random(n, m, w, init_rng)
        if trainer == "ila":
            # Budget-matched: the plain trainer gets I*P iterations so its
            # solver-call count equals the robust trainer's.
            record = train_ila(train, val, kappa_init, rho0,
                               replace(cfg, I=cfg.I * cfg.P))
        else:
            record, fstats, trace = train_rila(train, val, kappa_init, rho0,
                                               cfg)
            fstats.write_csv(out / "filter_report.csv")
            trace.write_csv(out / "resample_trace.csv")
        save_model(out / "model_best.json", record.kappa_best, rho0)
    record.write_iterations_csv(out / "iterations.csv")
    summary = record.summary()
    summary.update({"preset": name, "seed": seed,
                    "wall_time_total": time.perf_counter() - t0})
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=1)
    print(f"{name}: train LL {record.train_ll_sum:.4f} | validation LL "
          f"{record.val_ll_sum:.4f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--b", type=int, default=5, help="batch size")
    p.add_argument("--batches", type=int, default=4)
    p.add_argument("--iters", type=int, default=6)
    p.add_argument("--proposals", type=int, default=10)
    p.add_argument("--c", type=int, default=0, help="rows to filter out")
    p.add_argument("--objective", choices=("regular", "l1"), default="regular")
    p.add_argument("--lambda", dest="lam", type=float, default=0.01)
    p.add_argument("--solver", choices=("pattern", "fd"), default="pattern")
    p.add_argument("--max-evals", type=int, default=120)
    p.add_argument("--resample", choices=("softmax", "literal"),
                   default="softmax")
    p.add_argument("--chain-proposals", action=argparse.BooleanOptionalAction,
                   default=True,
                   help="feed each accepted proposal into the next one")
    p.add_argument("--keep-high-s", action="store_true")
    p.add_argument("--em-restarts", type=int, default=5)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="hqml",
        description="Quantum sequential-model simulation and robust learning")
    ap.add_argument("--config", help="JSON file of flat (optionally dotted) "
                                     "keys used as flag defaults")
    ap.add_argument("--threads", type=int, default=1,
                    help="worker cap; results are thread-count independent")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample train/validation matrices")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, default=30)
    p.add_argument("--t", type=int, default=100)
    p.add_argument("--val", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("corrupt", help="replace a fraction of rows")
    p.add_argument("--data", required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--value", type=int, default=4)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("filter", help="entropy-filter anomalous rows")
    p.add_argument("--data", required=True)
    p.add_argument("--c", type=int, required=True)
    p.add_argument("--keep-high-s", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("train", help="run a trainer on data files")
    p.add_argument("--data", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--model", help="benchmark name or model file "
                                   "(dims and initial state)")
    p.add_argument("--trainer", choices=("ila", "rila", "em"), required=True)
    p.add_argument("--states", type=int, default=8,
                   help="hidden states for the EM baseline")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="log-likelihood of data under a model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("prop1", help="circuit-vs-classical posterior sweep")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_prop1)

    p = sub.add_parser("preset", help="run a pinned benchmark experiment")
    p.add_argument("name", nargs="?", default=None)
    p.add_argument("--list", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--max-evals", type=int, default=120)
    p.add_argument("--out", default="preset_out")
    p.set_defaults(func=cmd_preset)

    return ap


def _apply_config_file(ap: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Load --config (flat dotted keys) as parser defaults; flags override."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    path = argv[idx + 1]
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config file: {err}") from err
    defaults = {}
    for key, value in doc.items():
        dest = key.rsplit(".", 1)[-1].replace("-", "_")
        defaults[dest] = value
    for action in ap._subparsers._group_actions[0].choices.values():
        known = {a.dest for a in action._actions}
        action.set_defaults(**{k: v for k, v in defaults.items() if k in known})
    return argv


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        argv = _apply_config_file(ap, argv)
        args = ap.parse_args(argv)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        if args.command == "preset" and (args.name is None or args.list):
            print("\n".join(preset_names()))
            return EXIT_OK
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, IndexError) as err:
        print(f"validation error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
