"""``fame`` command-line entry point.

Exit status: 0 success, 1 validation or input failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .errors import FameError
from .metrics import compute_eer, eer_report, parse_scores
from .submission import (BundleLayout, format_report, load_keys, make_bundle, score_archive,
                         validate_only)
from .trials import SPLITS, parse_ground_truth, parse_trial_list

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _read_json(path, section=None) -> dict:
    if path is None:
        return {}
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if section and isinstance(doc.get(section), dict):
        return doc[section]
    return doc


def _emit(args, payload: dict, text: str) -> None:
    if args.json:
        print(json.dumps(payload, sort_keys=True, indent=2))
    else:
        print(text)


def _layout(args) -> BundleLayout:
    if args.languages:
        return BundleLayout(tuple(args.languages))
    return BundleLayout.for_split(args.split)


def cmd_eer(args) -> int:
    scores = parse_scores(Path(args.scores).read_bytes())
    truth = parse_ground_truth(Path(args.truth).read_bytes())
    result = compute_eer(scores, truth)
    report = eer_report(result)
    text = f"EER {result.eer:.4f}  ({result.display}%)  threshold {result.threshold!r}"
    if result.n_ignored:
        text += f"\nwarning: {result.n_ignored} scored id(s) not in the ground truth were ignored"
    _emit(args, report, text)
    return EXIT_OK


def cmd_validate(args) -> int:
    layout = _layout(args)
    keys = load_keys(args.keys, layout)
    report = validate_only(Path(args.bundle).read_bytes(), layout, keys.id_index())
    lines = ["ok" if report.ok else "invalid"]
    lines += [f"error: {e}" for e in report.errors]
    lines += [f"warning: {w}" for w in report.warnings]
    _emit(args, report.to_dict(), "\n".join(lines))
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_score(args) -> int:
    layout = _layout(args)
    keys = load_keys(args.keys, layout)
    report = score_archive(Path(args.bundle).read_bytes(), layout, keys)
    _emit(args, report.to_dict(), format_report(report))
    return EXIT_OK


def cmd_synth(args) -> int:
    from .synth import SynthConfig, generate, write_dataset

    settings = _read_json(args.config, "synth")
    if args.seed is not None:
        settings["seed"] = args.seed
    dataset = generate(SynthConfig.from_dict(settings))
    paths = write_dataset(dataset, args.out)
    payload = {k: str(v) for k, v in paths.items()}
    payload.update(train_speakers=len(dataset.train_speakers), test_speakers=len(dataset.test_speakers),
                   languages=list(dataset.languages))
    _emit(args, payload, f"wrote synthetic dataset to {args.out} "
                         f"({len(dataset.train_speakers)} train / {len(dataset.test_speakers)} test speakers)")
    return EXIT_OK


def cmd_train(args) -> int:
    from .embeddings import read_table
    from .fop import save_checkpoint
    from .synth import score_trials, train_language

    data = Path(args.data)
    table = read_table(data / "embeddings.txt")
    split = json.loads((data / "split.json").read_text(encoding="utf-8"))
    languages = tuple(split["languages"])
    settings = _read_json(args.fop_config, "fop")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    models, payload, lines = {}, {"models": {}}, []
    for lang in args.language or languages:
        t0 = time.perf_counter()
        result, config = train_language(table, lang, split["train_speakers"], settings)
        path = out / f"model_{lang}.json"
        save_checkpoint(result.model, config, path,
                        extra={"train_language": lang, "train_speakers": split["train_speakers"]})
        models[lang] = result.model
        final = result.trace[-1] if result.trace else None
        payload["models"][lang] = {"checkpoint": str(path),
                                   "final_l_ce": final.l_ce if final else None,
                                   "final_l_oc": final.l_oc if final else None}
        lines.append(f"{lang}: trained in {time.perf_counter() - t0:.1f}s -> {path}")
    if args.bundle:
        layout = BundleLayout(languages)
        missing = [l for l in languages if l not in models]
        if missing:
            raise FameError(f"a bundle needs models for both languages; missing {missing}")
        files = {}
        for lang, cond in layout.configurations:
            trials = parse_trial_list((data / f"trials_{lang}.txt").read_bytes(), lang, cond)
            model = models[layout.train_language(lang, cond)]
            files[(lang, cond)] = score_trials(model, table, trials)
        Path(args.bundle).write_bytes(make_bundle(files, layout))
        payload["bundle"] = str(args.bundle)
        lines.append(f"wrote submission bundle {args.bundle}")
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK


def cmd_grid(args) -> int:
    from .synth import SynthConfig, run_grid_experiment

    settings = _read_json(args.synth_config, "synth")
    if args.seed is not None:
        settings["seed"] = args.seed
    experiment = run_grid_experiment(SynthConfig.from_dict(settings), _read_json(args.fop_config, "fop"))
    _emit(args, experiment.grid.to_dict(), experiment.grid.format_table())
    return EXIT_OK


def cmd_serve(args) -> int:  # pragma: no cover - long-running
    from dataclasses import replace

    from .service.app import serve
    from .service.config import load_config

    config = load_config(args.config)
    if args.port is not None:
        config = replace(config, port=args.port)
    if args.host is not None:
        config = replace(config, host=args.host)
    if args.data_dir is not None:
        config = replace(config, data_dir=Path(args.data_dir))
    serve(config)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fame", description="Scoring, validation and baseline tools for face-voice association.")
    sub = parser.add_subparsers(dest="command", required=True)

    def bundle_args(p):
        p.add_argument("--bundle", required=True, help="submission zip")
        p.add_argument("--keys", required=True, help="directory with trials_*/truth_* files")
        p.add_argument("--split", choices=sorted(SPLITS), default="V1-EU")
        p.add_argument("--languages", nargs=2, metavar=("A", "B"), help="override the split's languages")

    p = sub.add_parser("eer", help="equal error rate of one score file")
    p.add_argument("--scores", required=True)
    p.add_argument("--truth", required=True)
    p.set_defaults(func=cmd_eer)

    p = sub.add_parser("validate", help="check a bundle without scoring it")
    bundle_args(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("score", help="score a submission bundle")
    bundle_args(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--config", help="JSON synth config")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train baseline models on a dataset directory")
    p.add_argument("--data", required=True, help="directory written by 'fame synth'")
    p.add_argument("--fop-config", help="JSON baseline hyper-parameters")
    p.add_argument("--language", action="append", help="train only this language (repeatable)")
    p.add_argument("--out", required=True, help="checkpoint directory")
    p.add_argument("--bundle", help="also write a scored submission zip here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("grid", help="train/test grid on synthetic data")
    p.add_argument("--synth-config")
    p.add_argument("--fop-config")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("serve", help="run the submission service")
    p.add_argument("--config")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--data-dir")
    p.set_defaults(func=cmd_serve)

    for action in sub.choices.values():
        action.add_argument("--json", action="store_true", help="machine-readable output")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FameError, OSError, ValueError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"fame {args.command}: error: {msg}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
