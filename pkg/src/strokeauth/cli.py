"""Command-line entry point for the verification pipeline.

Subcommands cover the operator loop: import raw data, generate synthetic
corpora, train a comparator, evaluate a protocol, serve the HTTP API.
Every artifact-producing command writes a sidecar run manifest
(<output>.manifest.json) recording the command, configuration digest,
seed, input digests, outputs, and wall-clock timestamps. Manifests carry
the nondeterministic facts (timing); report/dataset artifacts themselves
stay byte-reproducible.

Relative paths are resolved against $STROKEAUTH_DATA_DIR when it is set.
"""

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    FORMAT_NAME,
    FORMAT_VERSION,
    IMPORT_PRESETS,
    SplitSpec,
    export_dataset,
    import_dataset,
    make_split,
)
from .errors import StrokeAuthError
from .evalproto import ProtocolConfig, run_protocol
from .rnn.model import ModelConfig, SiameseModel
from .rnn.train import TrainConfig, train
from .scorers import enumerate_training_pairs, get_scorer, pairs_to_examples
from .synth import PRESET_CONFIGS, SynthConfig, generate_synthetic

ENV_DATA_DIR = "STROKEAUTH_DATA_DIR"


def _resolve(path: str) -> Path:
    p = Path(path)
    base = os.environ.get(ENV_DATA_DIR)
    if base and not p.is_absolute():
        return Path(base) / p
    return p


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


@dataclass
class RunManifest:
    """Provenance sidecar written next to every produced artifact."""

    command: str
    config: dict
    seed: int
    inputs: dict = field(default_factory=dict)  # path -> sha256
    outputs: list = field(default_factory=list)
    started_at: str = ""
    finished_at: str = ""
    package_version: str = __version__

    @property
    def config_digest(self) -> str:
        canon = json.dumps(self.config, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def write(self, out_path: Path) -> Path:
        payload = asdict(self)
        payload["config_digest"] = self.config_digest
        manifest_path = Path(str(out_path) + ".manifest.json")
        manifest_path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
        return manifest_path


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S%z")


def _emit(args, human: str, payload: dict) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, sort_keys=True))
    else:
        print(human)


# -- subcommands ------------------------------------------------------------


def cmd_import(args) -> int:
    started = _now()
    src = _resolve(args.input)
    fmt = args.format
    if fmt != "canonical" and fmt not in IMPORT_PRESETS:
        mapping_path = _resolve(fmt)
        if not mapping_path.is_file():
            raise StrokeAuthError(
                f"format {fmt!r} is neither a preset nor a mapping file"
            )
        fmt = json.loads(mapping_path.read_text())
    result = import_dataset(src, fmt)
    out = _resolve(args.out)
    export_dataset(result.dataset, out)
    manifest = RunManifest(
        command="import",
        config={"input": str(src), "format": str(args.format), "out": str(out)},
        seed=0,
        inputs={str(src): _sha256(src)} if src.is_file() else {},
        outputs=[str(out)],
        started_at=started,
        finished_at=_now(),
    )
    manifest.write(out)
    for ref, reason in result.quarantined:
        print(f"quarantined {ref}: {reason}", file=sys.stderr)
    _emit(
        args,
        f"imported {result.imported_count} samples "
        f"({len(result.quarantined)} quarantined of {result.parsed_count} parsed) -> {out}",
        {
            "imported": result.imported_count,
            "quarantined": len(result.quarantined),
            "parsed": result.parsed_count,
            "out": str(out),
        },
    )
    return 0


def _synth_config(args) -> SynthConfig:
    if args.preset:
        base = PRESET_CONFIGS[args.preset]
    else:
        base = SynthConfig()
    overrides = {}
    for name in (
        "n_users",
        "sessions",
        "samples_per_cell",
        "prototype_jitter",
        "inter_user_spread",
        "intra_user_noise",
        "session_drift",
        "nuisance_noise",
        "time_jitter",
        "tempo_jitter",
        "orientation_jitter",
        "points",
        "seed",
    ):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if args.characters is not None:
        overrides["characters"] = tuple(args.characters)
    return replace(base, **overrides)


def cmd_synth(args) -> int:
    started = _now()
    out = _resolve(args.out)
    if args.n_users == 0:
        # An empty corpus is representable; warn rather than fail.
        print("warning: n_users=0 produces an empty dataset", file=sys.stderr)
        out.write_text(
            json.dumps(
                {
                    "format": FORMAT_NAME,
                    "version": FORMAT_VERSION,
                    "provenance": {"generator": "synthetic", "n_users": 0},
                    "count": 0,
                },
                sort_keys=True,
            )
            + "\n"
        )
        config = {"n_users": 0, "out": str(out)}
        dataset_len = 0
    else:
        cfg = _synth_config(args)
        dataset, _ = generate_synthetic(cfg)
        export_dataset(dataset, out)
        config = {**asdict(cfg), "characters": list(cfg.characters), "out": str(out)}
        dataset_len = len(dataset)
    manifest = RunManifest(
        command="synth",
        config=config,
        seed=args.seed if args.seed is not None else config.get("seed", 0),
        outputs=[str(out)],
        started_at=started,
        finished_at=_now(),
    )
    manifest.write(out)
    _emit(
        args,
        f"wrote {dataset_len} synthetic samples -> {out}",
        {"samples": dataset_len, "out": str(out)},
    )
    return 0


def _load_dataset(path: Path):
    result = import_dataset(path, "canonical")
    for ref, reason in result.quarantined:
        print(f"quarantined {ref}: {reason}", file=sys.stderr)
    return result.dataset


def _split_spec(args) -> SplitSpec:
    required = tuple(args.required_sessions) if args.required_sessions else None
    if args.dev_count:
        return SplitSpec(
            kind="first_n", dev_count=args.dev_count, val_fraction=args.val_fraction,
            required_sessions=required,
        )
    return SplitSpec(
        kind="fraction", dev_fraction=args.dev_fraction,
        val_fraction=args.val_fraction, required_sessions=required,
    )


def cmd_train(args) -> int:
    started = _now()
    dataset_path = _resolve(args.dataset)
    dataset = _load_dataset(dataset_path)
    split = make_split(dataset, _split_spec(args), seed=args.seed)

    state_path = Path(str(_resolve(args.checkpoint_out)) + ".train.json")
    epochs_done = 0
    if args.resume:
        model = SiameseModel.load(_resolve(args.resume))
        resume_state = Path(str(_resolve(args.resume)) + ".train.json")
        if resume_state.exists():
            epochs_done = json.loads(resume_state.read_text()).get("epochs_completed", 0)
    else:
        mcfg = ModelConfig(
            branch_blocks=args.branch_blocks,
            merge_blocks=args.merge_blocks,
            top_blocks=args.top_blocks,
            seed=args.seed,
        )
        model = SiameseModel(mcfg)

    scorer = get_scorer(args.scorer, model=model)
    train_triples = enumerate_training_pairs(
        split.dev_train,
        seed=args.seed,
        max_genuine_per_cell=args.max_genuine_per_cell,
        impostors_per_genuine=args.impostors_per_genuine,
    )
    val_triples = enumerate_training_pairs(
        split.dev_val,
        seed=args.seed + 1,
        max_genuine_per_cell=args.max_genuine_per_cell,
        impostors_per_genuine=args.impostors_per_genuine,
    )
    cache = {}
    train_examples = pairs_to_examples(train_triples, scorer, cache)
    val_examples = pairs_to_examples(val_triples, scorer, cache)

    tcfg = TrainConfig(
        learning_rate=args.lr,
        weight_decay=args.weight_decay,
        batch_size=args.batch_size,
        epochs=args.epochs,
        early_stop_patience=args.patience,
        shuffle_seed=args.seed,
    )
    result = train(model, train_examples, val_examples, tcfg)
    for record in result.log:
        print(
            f"epoch {epochs_done + record.epoch}: "
            f"train {record.train_loss:.6f} val {record.val_loss:.6f}"
        )

    out = _resolve(args.checkpoint_out)
    model.save(out)
    state_path.write_text(
        json.dumps(
            {
                "epochs_completed": epochs_done + len(result.log),
                "best_val_loss": result.best_val_loss,
            },
            sort_keys=True,
        )
        + "\n"
    )
    manifest = RunManifest(
        command="train",
        config={
            "scorer": args.scorer,
            "dataset": str(dataset_path),
            "model": asdict(model.config),
            "train": asdict(tcfg),
            "train_pairs": len(train_examples),
            "val_pairs": len(val_examples),
        },
        seed=args.seed,
        inputs={str(dataset_path): _sha256(dataset_path)},
        outputs=[str(out), str(state_path)],
        started_at=started,
        finished_at=_now(),
    )
    manifest.write(out)
    _emit(
        args,
        f"trained {args.scorer}: best val loss {result.best_val_loss:.6f} "
        f"(epoch {epochs_done + result.best_epoch}) -> {out}",
        {
            "best_val_loss": result.best_val_loss,
            "best_epoch": epochs_done + result.best_epoch,
            "epochs_completed": epochs_done + len(result.log),
            "checkpoint": str(out),
        },
    )
    return 0


def cmd_eval(args) -> int:
    started = _now()
    dataset_path = _resolve(args.dataset)
    dataset = _load_dataset(dataset_path)
    if args.dev_count or args.dev_fraction != 0.8 or args.required_sessions:
        target = make_split(dataset, _split_spec(args), seed=args.seed).eval
    else:
        target = dataset

    model = None
    inputs = {str(dataset_path): _sha256(dataset_path)}
    if args.scorer in ("rnn", "ta_rnn"):
        if not args.checkpoint:
            raise StrokeAuthError(f"scorer {args.scorer} requires --checkpoint")
        ckpt = _resolve(args.checkpoint)
        model = SiameseModel.load(ckpt)
        inputs[str(ckpt)] = _sha256(ckpt)
    scorer = get_scorer(args.scorer, model=model)

    password = tuple(args.password) if args.password else tuple(target.labels())
    if args.password_length:
        password = password[: args.password_length]
    pcfg = ProtocolConfig(
        enroll_count=args.enroll_count,
        enroll_sessions=tuple(args.enroll_sessions),
        test_session=args.test_session,
        scorer=args.scorer,
        password=password,
        split=f"dev_count={args.dev_count}" if args.dev_count else "full",
        seed=args.seed,
        impostor_selection=args.impostor_selection,
        det_points=args.det_points,
    )
    report = run_protocol(target, scorer, pcfg)

    out = _resolve(args.report_out)
    out.write_text(report.to_json() + "\n")
    outputs = [str(out)]
    if args.csv_out:
        csv_path = _resolve(args.csv_out)
        csv_path.write_text(report.to_csv())
        outputs.append(str(csv_path))
    manifest = RunManifest(
        command="eval",
        config=pcfg.to_dict(),
        seed=args.seed,
        inputs=inputs,
        outputs=outputs,
        started_at=started,
        finished_at=_now(),
    )
    manifest.write(out)

    fused_full = report.fused[str(len(password))]["eer"]
    per_char = {label: report.per_character[label]["eer"] for label in password}
    _emit(
        args,
        "per-character EER: "
        + ", ".join(f"{label}={eer * 100:.2f}%" for label, eer in per_char.items())
        + f"; fused({len(password)}) {fused_full * 100:.2f}% -> {out}",
        {"per_character_eer": per_char, "fused_eer": fused_full, "report": str(out)},
    )
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import build_app

    app = build_app(
        store_path=_resolve(args.store),
        checkpoint=_resolve(args.checkpoint) if args.checkpoint else None,
        scorer_name=args.scorer,
        threshold=args.threshold,
        calibration_report=_resolve(args.calibration) if args.calibration else None,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="strokeauth",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_import = sub.add_parser("import", help="import raw stroke data to the canonical format")
    p_import.add_argument("--input", required=True, help="source file or directory")
    p_import.add_argument(
        "--format",
        default="canonical",
        help="'canonical', a preset name, or a JSON mapping file",
    )
    p_import.add_argument("--out", required=True, help="canonical dataset output path")
    p_import.add_argument("--json", action="store_true", help="machine-readable summary")
    p_import.set_defaults(func=cmd_import)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument("--preset", choices=sorted(PRESET_CONFIGS), help="named benchmark config")
    p_synth.add_argument("--n-users", dest="n_users", type=int, default=None)
    p_synth.add_argument("--characters", nargs="+", default=None)
    p_synth.add_argument("--sessions", type=int, default=None)
    p_synth.add_argument("--samples-per-cell", dest="samples_per_cell", type=int, default=None)
    p_synth.add_argument("--prototype-jitter", dest="prototype_jitter", type=float, default=None)
    p_synth.add_argument("--inter-user-spread", dest="inter_user_spread", type=float, default=None)
    p_synth.add_argument("--intra-user-noise", dest="intra_user_noise", type=float, default=None)
    p_synth.add_argument("--session-drift", dest="session_drift", type=float, default=None)
    p_synth.add_argument("--nuisance-noise", dest="nuisance_noise", type=float, default=None)
    p_synth.add_argument("--time-jitter", dest="time_jitter", type=float, default=None)
    p_synth.add_argument("--tempo-jitter", dest="tempo_jitter", type=float, default=None)
    p_synth.add_argument(
        "--orientation-jitter", dest="orientation_jitter", type=float, default=None
    )
    p_synth.add_argument("--points", type=int, default=None)
    p_synth.add_argument("--seed", type=int, default=None)
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--json", action="store_true", help="machine-readable summary")
    p_synth.set_defaults(func=cmd_synth)

    p_train = sub.add_parser("train", help="train a learned comparator")
    p_train.add_argument("--dataset", required=True, help="canonical dataset path")
    p_train.add_argument("--scorer", choices=("rnn", "ta_rnn"), default="ta_rnn")
    p_train.add_argument("--checkpoint-out", dest="checkpoint_out", required=True)
    p_train.add_argument("--resume", help="checkpoint to continue from")
    p_train.add_argument("--branch-blocks", dest="branch_blocks", type=int, default=42)
    p_train.add_argument("--merge-blocks", dest="merge_blocks", type=int, default=84)
    p_train.add_argument("--top-blocks", dest="top_blocks", type=int, default=168)
    p_train.add_argument("--lr", type=float, default=0.001)
    p_train.add_argument("--weight-decay", dest="weight_decay", type=float, default=0.0)
    p_train.add_argument("--batch-size", dest="batch_size", type=int, default=32)
    p_train.add_argument("--epochs", type=int, default=200)
    p_train.add_argument("--patience", type=int, default=20)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--dev-count", dest="dev_count", type=int, default=0)
    p_train.add_argument("--dev-fraction", dest="dev_fraction", type=float, default=0.8)
    p_train.add_argument("--val-fraction", dest="val_fraction", type=float, default=0.2)
    p_train.add_argument(
        "--required-sessions", dest="required_sessions", type=int, nargs="+", default=None
    )
    p_train.add_argument(
        "--max-genuine-per-cell", dest="max_genuine_per_cell", type=int, default=None
    )
    p_train.add_argument(
        "--impostors-per-genuine", dest="impostors_per_genuine", type=float, default=1.0
    )
    p_train.add_argument("--json", action="store_true", help="machine-readable summary")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="run the verification protocol")
    p_eval.add_argument("--dataset", required=True)
    p_eval.add_argument("--scorer", choices=("dtw", "sw_dtw", "rnn", "ta_rnn"), default="dtw")
    p_eval.add_argument("--checkpoint", help="model checkpoint for learned scorers")
    p_eval.add_argument("--enroll-count", dest="enroll_count", type=int, default=4)
    p_eval.add_argument(
        "--enroll-sessions", dest="enroll_sessions", type=int, nargs="+", default=[1]
    )
    p_eval.add_argument("--test-session", dest="test_session", type=int, default=2)
    p_eval.add_argument("--password", nargs="+", default=None, help="character labels in order")
    p_eval.add_argument(
        "--password-length",
        dest="password_length",
        type=int,
        default=0,
        help="evaluate only the first N password characters",
    )
    p_eval.add_argument("--dev-count", dest="dev_count", type=int, default=0)
    p_eval.add_argument("--dev-fraction", dest="dev_fraction", type=float, default=0.8)
    p_eval.add_argument("--val-fraction", dest="val_fraction", type=float, default=0.2)
    p_eval.add_argument(
        "--required-sessions", dest="required_sessions", type=int, nargs="+", default=None
    )
    p_eval.add_argument(
        "--impostor-selection",
        dest="impostor_selection",
        choices=("first", "random"),
        default="first",
    )
    p_eval.add_argument("--det-points", dest="det_points", type=int, default=64)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--report-out", dest="report_out", required=True)
    p_eval.add_argument("--csv-out", dest="csv_out", help="optional flat score table")
    p_eval.add_argument("--json", action="store_true", help="machine-readable summary")
    p_eval.set_defaults(func=cmd_eval)

    p_serve = sub.add_parser("serve", help="run the HTTP verification service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--store", default="strokeauth-store.json")
    p_serve.add_argument("--checkpoint", help="learned-scorer checkpoint")
    p_serve.add_argument("--scorer", choices=("dtw", "sw_dtw", "rnn", "ta_rnn"), default="dtw")
    p_serve.add_argument("--threshold", type=float, default=None)
    p_serve.add_argument(
        "--calibration",
        help="JSON file of genuine/impostor score lists to calibrate the threshold from",
    )
    p_serve.set_defaults(func=cmd_serve)

    parser.add_argument(
        "--threads",
        type=int,
        default=0,
        help="cap internal parallelism (pipeline currently runs single-threaded)",
    )
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StrokeAuthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
