"""``sidecar-mtl`` command line.

Exit codes: 0 ok, 1 usage or invalid configuration, 2 data/checkpoint
problem, 3 numeric failure (diverged training, impossible CTC target).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import tensor as T
from .backbone import Backbone, BackboneConfig, freeze
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import FIELD_TYPES, ConfigError, RunConfig, load_config, parse_value
from .diarize import to_rttm
from .evaluate import diarize_recording, evaluate
from .metrics import evaluation_report
from .mixer import STYLES, make_corpus, read_manifest, write_manifest
from .objectives import CTCError
from .sidecar import MultiTalkerModel, Sidecar, SidecarConfig, param_report
from .train import TrainingDivergence, adapt_diarization, pretrain_single_talker, train_sidecar

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

COMMANDS = ("gen-data", "pretrain", "train-sidecar", "adapt-diar", "eval-asr", "eval-der", "diarize",
            "param-report")
ALIASES = {"n_speakers": ["--speakers"], "lam": ["--lambda"]}


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    defaults = RunConfig()
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of RunConfig fields; flags override it")
    group = common.add_argument_group("run configuration")
    for key in FIELD_TYPES:
        default = getattr(defaults, key)
        shown = json.dumps(default) if isinstance(default, tuple) else repr(default)
        extra = f" (one of {', '.join(STYLES)})" if key == "style" else ""
        group.add_argument(f"--{key.replace('_', '-')}", *ALIASES.get(key, []), dest=key,
                           default=argparse.SUPPRESS, metavar=FIELD_TYPES[key].upper(),
                           help=f"default: {shown}{extra}")
    parser = _Parser(prog="sidecar-mtl", description="Frozen-backbone multi-talker ASR and diarization.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    helps = {
        "gen-data": "write a synthetic corpus (manifest, SDTN audio, RTTM) to --out",
        "pretrain": "CTC-pretrain the single-talker backbone on --train-data, freeze, save to --checkpoint-dir",
        "train-sidecar": "train Sidecar + branch on --train-data with a frozen --backbone-checkpoint",
        "adapt-diar": "diarization-only adaptation of --checkpoint on segmented conversations",
        "eval-asr": "permutation-minimised token error rate of --checkpoint on --eval-data",
        "eval-der": "DER (with --collar) of --checkpoint on --eval-data, no segmenting",
        "diarize": "stitched long-recording diarization of --audio (SDTN) to RTTM",
        "param-report": "per-component parameter counts (--scale toy|paper)",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name], description=helps[name])
    return parser


def parse_config(ns: argparse.Namespace) -> RunConfig:
    overrides = {k: parse_value(k, v) for k, v in vars(ns).items() if k in FIELD_TYPES}
    return load_config(ns.config, overrides)


def _require(cfg: RunConfig, *keys: str) -> None:
    missing = [f"--{k.replace('_', '-')}" for k in keys if not getattr(cfg, k)]
    if missing:
        raise UsageError(f"missing required option(s): {', '.join(missing)}")


def _manifest(path: str):
    try:
        return read_manifest(path)
    except (FileNotFoundError, KeyError, ValueError, OSError) as exc:
        raise DataError(f"cannot read corpus {path}: {exc}") from None


def _checkpoint(path: str):
    try:
        return load_checkpoint(path)
    except (FileNotFoundError, CheckpointError, KeyError, OSError) as exc:
        raise DataError(f"cannot load checkpoint {path}: {exc}") from None


def _model(cfg: RunConfig) -> MultiTalkerModel:
    bb, sc = _checkpoint(cfg.checkpoint)
    if sc is None:
        raise DataError(f"{cfg.checkpoint} holds no Sidecar; run train-sidecar first")
    return MultiTalkerModel(bb, sc)


def _check_speakers(model: MultiTalkerModel, corpus) -> None:
    S = model.sidecar.config.n_speakers
    bad = [m.mixture_id for m in corpus if m.n_speakers != S]
    if bad:
        raise DataError(f"checkpoint expects {S} speakers but {len(bad)} corpus items differ (e.g. {bad[0]})")


def _emit(cfg: RunConfig, text: str) -> None:
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)


def _log_path(cfg: RunConfig, name: str):
    if cfg.log_path:
        return cfg.log_path
    return str(Path(cfg.checkpoint_dir) / name) if cfg.checkpoint_dir else None


def cmd_gen_data(cfg: RunConfig) -> None:
    _require(cfg, "out")
    corpus = make_corpus(cfg.style, cfg.count, n_speakers=cfg.n_speakers, seed=cfg.seed,
                         conversation_seconds=cfg.conversation_seconds, vocab_size=len(cfg.vocab))
    path = write_manifest(corpus, cfg.out, cfg.vocab)
    print(json.dumps({"manifest": str(path), "count": len(corpus), "style": cfg.style}))


def cmd_pretrain(cfg: RunConfig) -> None:
    _require(cfg, "train_data", "checkpoint_dir")
    data = _manifest(cfg.train_data)
    single = [m for m in data if m.n_speakers == 1]
    if not single:
        raise DataError(f"{cfg.train_data} has no single-speaker items")
    Path(cfg.checkpoint_dir).mkdir(parents=True, exist_ok=True)
    backbone = Backbone(cfg.backbone_config(), seed=cfg.seed)
    _, losses = pretrain_single_talker(backbone, single, cfg.optim_config(), _log_path(cfg, "pretrain.jsonl"))
    freeze(backbone)
    save_checkpoint(cfg.checkpoint_dir, backbone)
    print(json.dumps({"checkpoint": cfg.checkpoint_dir, "steps": len(losses),
                      "final_loss": losses[-1] if losses else None}))


def cmd_train_sidecar(cfg: RunConfig) -> None:
    _require(cfg, "train_data", "backbone_checkpoint", "checkpoint_dir")
    data = _manifest(cfg.train_data)
    backbone, _ = _checkpoint(cfg.backbone_checkpoint)
    if not backbone.frozen:
        raise DataError(f"{cfg.backbone_checkpoint} is not a frozen backbone")
    model = MultiTalkerModel(backbone, Sidecar(cfg.sidecar_config(), seed=cfg.seed))
    _check_speakers(model, data)
    Path(cfg.checkpoint_dir).mkdir(parents=True, exist_ok=True)
    history = train_sidecar(model, data, cfg.lam, cfg.optim_config(), _log_path(cfg, "train.jsonl"))
    save_checkpoint(cfg.checkpoint_dir, backbone, model.sidecar)
    print(json.dumps({"checkpoint": cfg.checkpoint_dir, "steps": len(history),
                      "backbone_hash": backbone.parameter_hash()}))


def cmd_adapt_diar(cfg: RunConfig) -> None:
    _require(cfg, "train_data", "checkpoint", "checkpoint_dir")
    data = _manifest(cfg.train_data)
    model = _model(cfg)
    _check_speakers(model, data)
    Path(cfg.checkpoint_dir).mkdir(parents=True, exist_ok=True)
    history = adapt_diarization(model, data, cfg.segment_plan(), cfg.optim_config(), _log_path(cfg, "adapt.jsonl"))
    save_checkpoint(cfg.checkpoint_dir, model.backbone, model.sidecar)
    print(json.dumps({"checkpoint": cfg.checkpoint_dir, "steps": len(history)}))


def _evaluate(cfg: RunConfig) -> dict:
    _require(cfg, "checkpoint", "eval_data")
    data = _manifest(cfg.eval_data)
    model = _model(cfg)
    _check_speakers(model, data)
    return evaluate(model, data, collar=cfg.collar)


def cmd_eval_asr(cfg: RunConfig) -> None:
    res = _evaluate(cfg)
    rows = [{k: r[k] for k in ("id", "wer", "errors", "ref_words", "perm")} for r in res["per_utterance"]]
    _emit(cfg, json.dumps(evaluation_report(res["wer"], None, rows), indent=2) + "\n")


def cmd_eval_der(cfg: RunConfig) -> None:
    res = _evaluate(cfg)
    if res["der"].scored_speech_seconds <= 0:
        raise DataError("no scored reference speech in corpus (collar too wide?)")
    rows = [{k: r[k] for k in ("id", "der_scored", "der_errors")} for r in res["per_utterance"]]
    report = evaluation_report(None, res["der"], rows)
    report["collar"] = cfg.collar
    _emit(cfg, json.dumps(report, indent=2) + "\n")


def cmd_diarize(cfg: RunConfig) -> None:
    _require(cfg, "checkpoint", "audio")
    try:
        wav = T.load(cfg.audio)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read audio {cfg.audio}: {exc}") from None
    if wav.ndim != 1:
        raise DataError(f"{cfg.audio}: expected mono samples, got shape {wav.shape}")
    model = _model(cfg)
    timeline, _, segs = diarize_recording(model, wav, cfg.segment_plan(), return_details=True)
    print(f"{len(segs)} segment(s) processed", file=sys.stderr)
    _emit(cfg, to_rttm(timeline, Path(cfg.audio).stem))


def cmd_param_report(cfg: RunConfig) -> None:
    if cfg.scale == "paper":
        bb_cfg = BackboneConfig.paper_scale()
        sc_cfg = SidecarConfig(n_speakers=cfg.n_speakers)
    else:
        bb_cfg, sc_cfg = cfg.backbone_config(), cfg.sidecar_config()
    report = param_report(sc_cfg, bb_cfg)
    report["extra_speaker_delta"] = sc_cfg.bottleneck_channels * sc_cfg.io_channels
    report["n_speakers"] = sc_cfg.n_speakers
    _emit(cfg, json.dumps(report, indent=2) + "\n")


HANDLERS = {
    "gen-data": cmd_gen_data, "pretrain": cmd_pretrain, "train-sidecar": cmd_train_sidecar,
    "adapt-diar": cmd_adapt_diar, "eval-asr": cmd_eval_asr, "eval-der": cmd_eval_der,
    "diarize": cmd_diarize, "param-report": cmd_param_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if not ns.command:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        cfg = parse_config(ns)
        HANDLERS[ns.command](cfg)
    except (UsageError, ConfigError) as exc:
        print(f"sidecar-mtl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"sidecar-mtl: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingDivergence, CTCError, FloatingPointError) as exc:
        print(f"sidecar-mtl: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"sidecar-mtl: I/O error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
