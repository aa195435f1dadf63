"""Command-line entry point: ``tcilab <subcommand> [options]``.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

Every subcommand resolves an experiment configuration (JSON file, then flag
overrides) and works inside ``<output-root>/<config-hash>/`` with the
subdirectories ``dataset``, ``checkpoints``, ``reports`` and ``plots``.
``manifest.json`` in that directory lists the sha256 of every artifact.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .evaluation import MetricsReport, evaluate_decoder, evaluate_encoder, history_sweep
from .experiments import (
    ABLATION_VARIANTS,
    TrainedPair,
    early_prediction_curve,
    history_experiment,
    records_of,
    run_ablation,
    run_table,
)
from .model.checkpoint import load_model, module_hash, save_checkpoint
from .model.data import Scaler
from .model.networks import get_variant
from .sim.priors import ConfigError, load_priors
from .sim.simulate import SimConfig, dataset_hash, file_sha256, generate_dataset, load_manifest, load_records, save_dataset
from .svg import history_chart, line_chart
from .training import (
    DecoderBundle,
    EncoderBundle,
    HyperParams,
    TrainReport,
    build_decoder_dataset,
    hyperparameter_search,
    train_decoder,
    train_encoder,
)

log = logging.getLogger("tcilab")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2
SIM_KEYS = {f.name for f in fields(SimConfig)} - {"priors"}


class RuntimeFailure(RuntimeError):
    """Anything that should end the process with exit code 2."""


@dataclass
class ExperimentConfig:
    sim: SimConfig = field(default_factory=SimConfig)
    hp: HyperParams = field(default_factory=HyperParams)
    grid: dict | None = None
    grid_budget: int | None = None
    seeds: list = field(default_factory=lambda: [0])
    output_root: str = "runs"

    def validate(self) -> None:
        self.sim.validate()
        self.hp.validate()
        get_variant(self.hp.variant)
        if not self.seeds:
            raise ConfigError("seed list must be nonempty")
        if self.grid is not None and not self.grid:
            raise ConfigError("hyperparameter grid is empty")

    def to_dict(self) -> dict:
        return {"sim": self.sim.to_dict(), "hp": self.hp.to_dict(), "grid": self.grid,
                "grid_budget": self.grid_budget, "seeds": list(self.seeds)}

    def config_hash(self) -> str:
        """The run directory is keyed by the dataset-defining settings only, so
        several training configurations can share one simulated dataset."""
        return self.sim.fingerprint()

    def hp_tag(self) -> str:
        blob = json.dumps(self.hp.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:8]

    def run_dir(self) -> Path:
        return Path(self.output_root) / self.config_hash()


# --------------------------------------------------------------------------- configuration


def _read_config_file(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None


def build_config(args) -> ExperimentConfig:
    """File values first, then flags (flags win)."""
    doc = _read_config_file(args.config) if args.config else {}
    unknown = set(doc) - {"sim", "hp", "grid", "grid_budget", "seeds", "output_root", "priors"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    sim_d = dict(doc.get("sim", {}))
    bad = set(sim_d) - SIM_KEYS
    if bad:
        raise ConfigError(f"unknown simulation keys: {sorted(bad)}")
    hp = HyperParams.from_dict(dict(doc.get("hp", {})))
    seeds = list(doc.get("seeds", [0]))
    grid = doc.get("grid")
    grid_budget = doc.get("grid_budget")

    flag_sim = {"gamma_c": args.gamma_c, "gamma_r": args.gamma_r, "tau": args.tau, "horizon": args.horizon,
                "n_train": args.train, "n_val": args.val, "n_test": args.test}
    if args.gamma is not None:
        flag_sim["gamma_c"] = flag_sim["gamma_c"] if flag_sim["gamma_c"] is not None else args.gamma
        flag_sim["gamma_r"] = flag_sim["gamma_r"] if flag_sim["gamma_r"] is not None else args.gamma
    sim_d.update({k: v for k, v in flag_sim.items() if v is not None})
    if args.seed is not None:
        sim_d["seed"] = args.seed
    if args.literal_chemo:
        sim_d["literal_chemo"] = True
    sim = SimConfig(**sim_d)
    if doc.get("priors"):
        sim.priors = load_priors(doc["priors"])

    flag_hp = {"epochs_enc": args.epochs_enc, "epochs_dec": args.epochs_dec, "batch_enc": args.batch_enc,
               "batch_dec": args.batch_dec, "learning_rate": args.lr, "beta_enc": args.beta_enc,
               "beta_dec": args.beta_dec, "variant": args.variant, "imbalance": args.imbalance,
               "mlp_hidden": args.mlp_hidden, "recurrent_hidden_enc": args.hidden}
    hp = replace(hp, **{k: v for k, v in flag_hp.items() if v is not None})
    if hp.variant:
        hp = replace(hp, variant=get_variant(hp.variant).label)
    if args.seeds:
        seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    elif args.seed is not None:
        seeds = [args.seed]
    if getattr(args, "grid", None):
        grid = _read_config_file(args.grid)
    if getattr(args, "budget", None) is not None:
        grid_budget = args.budget
    root = args.output_root or os.environ.get("TCILAB_OUTPUT_ROOT") or doc.get("output_root") or "runs"
    cfg = ExperimentConfig(sim=sim, hp=hp, grid=grid, grid_budget=grid_budget, seeds=seeds, output_root=root)
    cfg.validate()
    return cfg


def _jobs(args) -> int:
    if args.jobs is not None:
        return max(1, args.jobs)
    return max(1, int(os.environ.get("TCILAB_JOBS", "1")))


# --------------------------------------------------------------------------- run manifest


class Run:
    """A run directory and its manifest of artifact hashes."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.root = cfg.run_dir()
        self.manifest_path = self.root / "manifest.json"
        if self.manifest_path.exists():
            self.manifest = json.loads(self.manifest_path.read_text())
        else:
            self.manifest = {"config_hash": cfg.config_hash(), "config": {"sim": cfg.sim.to_dict()},
                             "tool_version": __version__, "created": _now(), "artifacts": {},
                             "dataset_hash": None, "checkpoints": {}}

    def path(self, *parts) -> Path:
        return self.root.joinpath(*parts)

    def ensure(self) -> None:
        try:
            for sub in ("dataset", "checkpoints", "reports", "plots"):
                self.path(sub).mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise RuntimeFailure(f"cannot create run directory {self.root}: {exc}") from exc

    def register(self, path: Path) -> str:
        digest = file_sha256(path)
        self.manifest["artifacts"][str(path.relative_to(self.root))] = digest
        return digest

    def write_text(self, rel: str, text: str) -> Path:
        path = self.path(rel)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text)
        except OSError as exc:
            raise RuntimeFailure(f"cannot write {path}: {exc}") from exc
        self.register(path)
        return path

    def save(self) -> None:
        self.manifest["updated"] = _now()
        self.manifest_path.write_text(json.dumps(self.manifest, indent=2, sort_keys=True))

    def verify(self, prefix: str = "") -> list[str]:
        """Paths (under ``prefix``) whose current hash differs from the manifest."""
        bad = []
        for rel, digest in sorted(self.manifest["artifacts"].items()):
            if not rel.startswith(prefix):
                continue
            p = self.path(rel)
            if not p.exists():
                bad.append(f"{rel}: missing")
            elif file_sha256(p) != digest:
                bad.append(f"{rel}: hash mismatch")
        return bad


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S%z")


def _require_dataset(run: Run) -> None:
    ds = run.path("dataset")
    expected = ds / "train.jsonl"
    if not expected.exists():
        raise RuntimeFailure(f"dataset not found: expected {expected}; run `tcilab simulate` with the same options first")
    bad = run.verify("dataset/")
    if bad:
        raise RuntimeFailure("dataset does not match the run manifest, refusing to continue: " + "; ".join(bad))


def _ckpt_names(variant: str, seed: int, hp_tag: str) -> tuple[str, str]:
    tag = f"{variant.replace('+', 'p')}_s{seed}_{hp_tag}"
    return f"checkpoints/encoder_{tag}.json", f"checkpoints/decoder_{tag}.json"


def load_encoder_bundle(path) -> EncoderBundle:
    model, man = load_model(path)
    hp = HyperParams.from_dict(man["hp"])
    return EncoderBundle(model=model, scaler=Scaler(**man["scaler"]), marginals=np.asarray(man["marginals"]),
                         hp=hp, report=TrainReport(seed=man["seed"], selected_epoch=man["training_step"],
                                                   checkpoint_hash=module_hash(model)))


def load_pair(run: Run, variant: str, seed: int, tau: int) -> TrainedPair:
    enc_rel, dec_rel = _ckpt_names(variant, seed, run.cfg.hp_tag())
    enc_path = run.path(enc_rel)
    if not enc_path.exists():
        raise RuntimeFailure(f"checkpoint not found: {enc_path}; run `tcilab train` first")
    bad = run.verify(enc_rel) + (run.verify(dec_rel) if tau > 1 else [])
    if bad:
        raise RuntimeFailure("checkpoint does not match the run manifest, refusing to evaluate: " + "; ".join(bad))
    enc = load_encoder_bundle(enc_path)
    if tau < 2:
        return TrainedPair(enc, None)
    dec_path = run.path(dec_rel)
    if not dec_path.exists():
        raise RuntimeFailure(f"decoder checkpoint not found: {dec_path}; train without --encoder-only")
    dec_model, man = load_model(dec_path)
    if man["encoder_hash"] != enc.report.checkpoint_hash:
        raise RuntimeFailure(f"{dec_path} was trained on a different encoder than {enc_path}")
    if man["tau"] != tau:
        raise RuntimeFailure(f"{dec_path} was trained for tau={man['tau']}, run asks for tau={tau}")
    dec = DecoderBundle(model=dec_model, encoder_hash=man["encoder_hash"], tau=man["tau"],
                        hp=HyperParams.from_dict(man["hp"]), report=TrainReport(seed=man["seed"]))
    return TrainedPair(enc, dec)


def _emit(run: Run, name: str, report: MetricsReport) -> None:
    run.write_text(f"reports/{name}.csv", report.to_csv())
    run.write_text(f"reports/{name}.json", report.to_json())
    print(report.to_csv(), end="")


# --------------------------------------------------------------------------- subcommands


def cmd_simulate(cfg: ExperimentConfig, args) -> int:
    run = Run(cfg)
    run.ensure()
    dataset = generate_dataset(cfg.sim, jobs=_jobs(args))
    out = run.path("dataset")
    try:
        save_dataset(dataset, out)
    except OSError as exc:
        raise RuntimeFailure(str(exc)) from exc
    for name in ("train.jsonl", "val.jsonl", "test.jsonl", "manifest.json"):
        run.register(out / name)
    run.manifest["dataset_hash"] = dataset_hash(out)
    run.save()
    print(f"dataset {run.manifest['dataset_hash']} written to {out}")
    return EXIT_OK


def cmd_train(cfg: ExperimentConfig, args) -> int:
    run = Run(cfg)
    _require_dataset(run)
    ds = run.path("dataset")
    train, val = load_records(ds, "train"), load_records(ds, "val")
    hp = cfg.hp
    tau = cfg.sim.tau
    if cfg.grid:
        hp, board = hyperparameter_search(cfg.grid, train, val, base=hp, budget=cfg.grid_budget,
                                          seed=cfg.seeds[0], tau=None if args.encoder_only else tau, jobs=_jobs(args))
    else:
        board = None
    rows = []
    for seed in cfg.seeds:
        enc = train_encoder(train, val, hp, seed)
        enc_rel, dec_rel = _ckpt_names(hp.variant, seed, cfg.hp_tag())
        path = run.path(enc_rel)
        save_checkpoint(enc.model, path, enc.manifest())
        run.register(path)
        run.manifest["checkpoints"][enc_rel] = enc.report.checkpoint_hash
        run.write_text(f"reports/train_{Path(enc_rel).stem}.json", json.dumps(enc.report.to_dict(), indent=2))
        row = {"config_id": 0, **{k: getattr(hp, k) for k in sorted(cfg.grid or {})},
               "val_nrmse": min(enc.report.val_series), "wallclock": enc.report.wallclock, "seed": seed}
        if not args.encoder_only and tau > 1:
            dec = train_decoder(enc, build_decoder_dataset(enc, train, tau), build_decoder_dataset(enc, val, tau),
                                hp, seed)
            path = run.path(dec_rel)
            save_checkpoint(dec.model, path, dec.manifest())
            run.register(path)
            run.manifest["checkpoints"][dec_rel] = dec.report.checkpoint_hash
            run.write_text(f"reports/train_{Path(dec_rel).stem}.json", json.dumps(dec.report.to_dict(), indent=2))
            row["val_nrmse"] = min(dec.report.val_series)
            row["wallclock"] += dec.report.wallclock
        rows.append(row)
        print(f"seed {seed}: validation NRMSE {row['val_nrmse']:.4f}%")
    if board is None:
        board = rows
    run.write_text(f"reports/leaderboard_{cfg.hp_tag()}.csv", MetricsReport("leaderboard", board).to_csv())
    run.write_text(f"reports/train_config_{cfg.hp_tag()}.json", json.dumps(hp.to_dict(), indent=2, sort_keys=True))
    run.save()
    return EXIT_OK


def _base_for_experiments(cfg: ExperimentConfig) -> SimConfig:
    return cfg.sim


def cmd_evaluate(cfg: ExperimentConfig, args) -> int:
    run = Run(cfg)
    if args.table is not None:
        run.ensure()
        rep = run_table(args.table, _base_for_experiments(cfg), cfg.hp, seed=cfg.seeds[0],
                        **({"seeds": tuple(cfg.seeds)} if args.table == 3 else {}))
        _emit(run, f"table{args.table}", rep)
        run.save()
        return EXIT_OK
    if args.sweep == "history":
        run.ensure()
        gamma = args.gamma if args.gamma is not None else cfg.sim.gamma_c
        curves = history_experiment(cfg.sim, cfg.hp, gamma, cfg.sim.tau, seed=cfg.seeds[0])
        rows = [{**r, "method": m} for m, c in curves.items() for r in c.rows]
        name = f"history_gamma{gamma:g}_tau{cfg.sim.tau}"
        _emit(run, name, MetricsReport(name, rows))
        run.write_text(f"plots/{name}.svg", history_chart(curves, f"NRMSE % vs history length, gamma={gamma:g}, "
                                                                  f"tau={cfg.sim.tau}"))
        run.save()
        return EXIT_OK

    _require_dataset(run)
    test = load_records(run.path("dataset"), "test")
    tau = cfg.sim.tau
    variant = cfg.hp.variant
    pairs = {seed: load_pair(run, variant, seed, tau) for seed in cfg.seeds}  # fail before writing anything
    rows, curves = [], {}
    for seed, pair in pairs.items():
        enc_row = evaluate_encoder(pair.encoder, test).rows[0]
        rows.append({"variant": variant, "seed": seed, "gamma_c": cfg.sim.gamma_c, "gamma_r": cfg.sim.gamma_r,
                     **{f"encoder_{k}": v for k, v in enc_row.items() if k != "tau"}})
        if tau > 1:
            dec_row = evaluate_decoder(pair.encoder, pair.decoder, test, tau).rows[0]
            rows[-1].update(dec_row)
        dec = pair.decoder.model if pair.decoder is not None else None
        curves[f"{variant} seed {seed}"] = history_sweep(pair.encoder, dec, test, tau)
    name = f"eval_{variant.replace('+', 'p')}_{cfg.hp_tag()}"
    _emit(run, name, MetricsReport(name, rows))
    hist_rows = [{**r, "curve": c} for c, rep in curves.items() for r in rep.rows]
    run.write_text(f"reports/{name}_history.csv", MetricsReport("history", hist_rows).to_csv())
    run.write_text(f"plots/{name}_history.svg", history_chart(curves, f"NRMSE % vs history length, tau={tau}"))
    run.save()
    return EXIT_OK


def cmd_ablate(cfg: ExperimentConfig, args) -> int:
    run = Run(cfg)
    run.ensure()
    variants = [get_variant(v).label for v in (args.variants.split(",") if args.variants else ABLATION_VARIANTS)]
    datasets = {s: generate_dataset(replace(cfg.sim, seed=int(s))) for s in cfg.seeds}
    per_seed = []
    for v in variants:
        for s in cfg.seeds:
            per_seed += run_ablation(v, cfg.sim, cfg.hp, seeds=(s,), dataset=datasets[s]).rows
    table = [{"variant": v, "tau": cfg.sim.tau, "gamma_c": cfg.sim.gamma_c, "gamma_r": cfg.sim.gamma_r,
              "nrmse_pct": float(np.mean([r["nrmse_pct"] for r in per_seed if r["variant"] == v])),
              "n_seeds": len(cfg.seeds)} for v in variants]
    _emit(run, "ablation", MetricsReport("ablation", table, extra={"per_seed": per_seed}))
    run.write_text("reports/ablation_per_seed.csv", MetricsReport("ablation_per_seed", per_seed).to_csv())
    run.save()
    return EXIT_OK


def cmd_sweep(cfg: ExperimentConfig, args) -> int:
    run = Run(cfg)
    run.ensure()
    gammas = [float(g) for g in args.gammas.split(",")]
    methods = [get_variant(m).label for m in args.methods.split(",")]
    curves = {m: early_prediction_curve(cfg.sim, cfg.hp, gammas, cfg.sim.tau, seed=cfg.seeds[0], method=m,
                                        max_history=args.max_history) for m in methods}
    rows = [{**r, "method": m} for m, c in curves.items() for r in c.rows]
    name = f"early_prediction_tau{cfg.sim.tau}"
    _emit(run, name, MetricsReport(name, rows, extra={"gammas": gammas}))
    series = {m: ([r["history"] for r in c.rows], [r["nrmse_pct"] for r in c.rows]) for m, c in curves.items()}
    run.write_text(f"plots/{name}.svg", line_chart(series, title=f"Early prediction mean NRMSE %, tau={cfg.sim.tau}",
                                                   xlabel="history length (days)", ylabel="NRMSE %"))
    run.save()
    return EXIT_OK


def cmd_verify(cfg: ExperimentConfig, args) -> int:
    run = Run(cfg)
    if not run.manifest_path.exists():
        raise RuntimeFailure(f"no run manifest at {run.manifest_path}")
    bad = run.verify()
    on_disk = {str(p.relative_to(run.root)) for p in run.root.rglob("*") if p.is_file() and p != run.manifest_path}
    stray = sorted(on_disk - set(run.manifest["artifacts"]))
    bad += [f"{p}: not referenced by the manifest" for p in stray]
    if run.manifest.get("dataset_hash") and run.path("dataset", "train.jsonl").exists():
        if dataset_hash(run.path("dataset")) != run.manifest["dataset_hash"]:
            bad.append("dataset hash differs from manifest")
    if bad:
        for line in bad:
            print(line, file=sys.stderr)
        raise RuntimeFailure(f"{len(bad)} artifact(s) failed verification")
    print(f"{len(run.manifest['artifacts'])} artifacts verified in {run.root}")
    return EXIT_OK


def cmd_report(cfg: ExperimentConfig, args) -> int:
    run = Run(cfg)
    if not run.manifest_path.exists():
        raise RuntimeFailure(f"no run manifest at {run.manifest_path}")
    summary = {"config_hash": run.manifest["config_hash"], "dataset_hash": run.manifest.get("dataset_hash"),
               "checkpoints": run.manifest.get("checkpoints", {}), "reports": {}}
    for rel in sorted(run.manifest["artifacts"]):
        if rel.startswith("reports/") and rel.endswith(".json") and "/train_" not in rel:
            doc = json.loads(run.path(rel).read_text())
            if isinstance(doc, dict) and "rows" in doc:
                summary["reports"][rel] = doc["rows"]
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "train": cmd_train, "evaluate": cmd_evaluate, "ablate": cmd_ablate,
            "sweep": cmd_sweep, "verify": cmd_verify, "report": cmd_report}


# --------------------------------------------------------------------------- argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("experiment")
    g.add_argument("--config", help="JSON config file (flags override it)")
    g.add_argument("--gamma-c", type=float)
    g.add_argument("--gamma-r", type=float)
    g.add_argument("--gamma", type=float, help="sets both gamma_c and gamma_r unless given separately")
    g.add_argument("--tau", type=int)
    g.add_argument("--horizon", type=int)
    g.add_argument("--seed", type=int, help="simulation seed and single training seed")
    g.add_argument("--seeds", help="comma-separated training seeds")
    g.add_argument("--train", type=int, help="number of training patients")
    g.add_argument("--val", type=int)
    g.add_argument("--test", type=int)
    g.add_argument("--literal-chemo", action="store_true", help="concentration without carry-over decay")
    g.add_argument("--variant", help="full, Y_only, Y+D or Y+G")
    g.add_argument("--epochs-enc", type=int)
    g.add_argument("--epochs-dec", type=int)
    g.add_argument("--batch-enc", type=int)
    g.add_argument("--batch-dec", type=int)
    g.add_argument("--lr", type=float)
    g.add_argument("--beta-enc", type=float)
    g.add_argument("--beta-dec", type=float)
    g.add_argument("--mlp-hidden", type=int)
    g.add_argument("--hidden", type=int, help="encoder recurrent width")
    g.add_argument("--imbalance", choices=("ce", "entropy"))
    g.add_argument("--output-root", help="defaults to $TCILAB_OUTPUT_ROOT or ./runs")
    g.add_argument("--jobs", type=int, help="worker processes (default $TCILAB_JOBS or 1)")
    g.add_argument("-v", "--verbose", action="store_true")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tcilab", description="Temporal counterfactual inference laboratory")
    parser.add_argument("--version", action="version", version=f"tcilab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub_p = {name: sub.add_parser(name, help=(fn.__doc__ or name).strip()) for name, fn in COMMANDS.items()}
    for p in sub_p.values():
        _common(p)
    sub_p["train"].add_argument("--encoder-only", action="store_true", help="skip the decoder stage")
    sub_p["train"].add_argument("--grid", help="JSON file mapping hyperparameter names to candidate lists")
    sub_p["train"].add_argument("--budget", type=int, help="cap on grid configurations")
    sub_p["evaluate"].add_argument("--table", type=int, choices=(1, 2, 3, 6))
    sub_p["evaluate"].add_argument("--sweep", choices=("history",))
    sub_p["ablate"].add_argument("--variants", help="comma-separated subset (default: all four)")
    sub_p["sweep"].add_argument("--gammas", default="6,7,8,9,10")
    sub_p["sweep"].add_argument("--methods", default="full,Y_only")
    sub_p["sweep"].add_argument("--max-history", type=int)
    return parser


cmd_simulate.__doc__ = "simulate a dataset with ground-truth counterfactuals"
cmd_train.__doc__ = "train encoder then decoder (or grid search)"
cmd_evaluate.__doc__ = "evaluate checkpoints, or reproduce a table layout or history sweep"
cmd_ablate.__doc__ = "train and score ablation variants on matched seeds"
cmd_sweep.__doc__ = "early-prediction curves averaged over several gammas"
cmd_verify.__doc__ = "re-hash every artifact against the run manifest"
cmd_report.__doc__ = "print a JSON summary of a run"


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = build_config(args)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, TypeError) as exc:
        print(f"tcilab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RuntimeFailure, FileNotFoundError, OSError, RuntimeError, ValueError) as exc:
        print(f"tcilab: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
