"""Command-line front end.

Subcommands: convert (JSON annotations to the line format), gen-synth
(write a synthetic corpus), train (split, train one variant, write model
+ log + curve figure), eval (score saved models, write table/CSV/chart),
and tag (label plain text line by line).

Exit codes: 0 success, 1 runtime or data failure, 2 usage, configuration,
or input-parsing error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .data import (
    SplitSpec,
    build_vocab,
    convert_json_corpus,
    generate_synthetic_corpus,
    parse_conll,
    split_dataset,
    write_conll,
)
from .errors import ConfigError, EvaluationError, ParseError, SeqTagError
from .evaluate import accumulate_counts, comparison_csv, render_comparison_table, weighted_average
from .model import ModelConfig, TaggerModel, VARIANTS, load_model, save_model, train

# keys accepted in a run-config file: the model hyperparameters plus paths
# and the split seed
_CONFIG_TYPES = {
    "variant": str,
    "embedding_dim": int,
    "hidden_dim": int,
    "learning_rate": float,
    "epochs": int,
    "seed": int,
    "kernel_width": int,
    "conv_channels": int,
    "corpus": str,
    "output_dir": str,
    "split_seed": int,
}


def parse_config_file(text: str) -> dict:
    """Parse ``key = value`` lines; blank lines and # comments are fine,
    unknown keys and untypable values are not."""
    out = {}
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"config line {lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _CONFIG_TYPES:
            raise ConfigError(
                f"config line {lineno}: unknown key {key!r}; valid keys: "
                + ", ".join(sorted(_CONFIG_TYPES))
            )
        try:
            out[key] = _CONFIG_TYPES[key](value)
        except ValueError:
            raise ConfigError(
                f"config line {lineno}: bad value {value!r} for {key}"
            ) from None
    return out


def _resolve_train_settings(args) -> dict:
    """Merge defaults, config file, and flags (flags win)."""
    settings: dict = {
        "variant": "bigru_cnn_crf",
        "embedding_dim": 128,
        "hidden_dim": 128,
        "learning_rate": 0.005,
        "epochs": 20,
        "seed": 0,
        "kernel_width": 3,
        "conv_channels": 128,
        "corpus": None,
        "output_dir": ".",
        "split_seed": 0,
    }
    if args.config is not None:
        settings.update(parse_config_file(Path(args.config).read_text(encoding="utf-8")))
    for flag, key in [
        ("variant", "variant"),
        ("embedding_dim", "embedding_dim"),
        ("hidden_dim", "hidden_dim"),
        ("learning_rate", "learning_rate"),
        ("epochs", "epochs"),
        ("seed", "seed"),
        ("kernel_width", "kernel_width"),
        ("conv_channels", "conv_channels"),
        ("data", "corpus"),
        ("output_dir", "output_dir"),
        ("split_seed", "split_seed"),
    ]:
        value = getattr(args, flag)
        if value is not None:
            settings[key] = value
    if settings["corpus"] is None:
        raise ConfigError("no training corpus given (use --data or the corpus config key)")
    return settings


# ---------------------------------------------------------------------------
# subcommands


def _cmd_convert(args) -> int:
    text = Path(args.input).read_text(encoding="utf-8")
    sentences = convert_json_corpus(text)
    Path(args.output).write_text(write_conll(sentences), encoding="utf-8")
    tokens = sum(len(s) for s in sentences)
    tag_types = sorted({t for s in sentences for t in s.tags})
    print(f"wrote {args.output}: {len(sentences)} sentences, {tokens} tokens, "
          f"{len(tag_types)} tag types")
    return 0


def _cmd_gen_synth(args) -> int:
    if args.sentences < 1:
        raise ConfigError(f"--sentences must be >= 1, got {args.sentences}")
    if args.tags < 2:
        raise ConfigError(f"--tags must be >= 2, got {args.tags}")
    if args.vocab_size < args.tags:
        raise ConfigError(
            f"--vocab-size must be >= --tags, got {args.vocab_size} < {args.tags}"
        )
    sentences = generate_synthetic_corpus(
        args.seed, args.sentences, args.vocab_size, args.tags
    )
    Path(args.output).write_text(write_conll(sentences), encoding="utf-8")
    print(f"wrote {args.output}: {len(sentences)} sentences, "
          f"{sum(len(s) for s in sentences)} tokens, {args.tags} tag types")
    return 0


def _cmd_train(args) -> int:
    settings = _resolve_train_settings(args)
    config = ModelConfig(
        variant=settings["variant"],
        embedding_dim=settings["embedding_dim"],
        hidden_dim=settings["hidden_dim"],
        learning_rate=settings["learning_rate"],
        epochs=settings["epochs"],
        seed=settings["seed"],
        kernel_width=settings["kernel_width"],
        conv_channels=settings["conv_channels"],
    )
    config.validate()

    out_dir = Path(settings["output_dir"])
    model_path = (
        Path(args.model_out) if args.model_out is not None
        else out_dir / f"{config.variant}.model"
    )
    # create the destination before training so a bad path fails in
    # seconds, not after the last epoch
    model_path.parent.mkdir(parents=True, exist_ok=True)
    settings["model_out"] = str(model_path)
    print("resolved configuration:")
    for key in sorted(settings):
        print(f"  {key} = {settings[key]}")

    sentences = parse_conll(Path(settings["corpus"]).read_text(encoding="utf-8"))
    train_set, val_set, test_set = split_dataset(
        sentences, SplitSpec(seed=settings["split_seed"])
    )
    print(f"split: {len(train_set)} train / {len(val_set)} val / {len(test_set)} test")
    # token ids come from the training split only; the tag inventory covers
    # the whole corpus so a rare tag in val/test cannot crash encoding
    vocab = build_vocab(train_set, tag_source=sentences)
    model = TaggerModel(config, vocab)
    print(f"{config.variant}: {model.parameter_count()} parameters, "
          f"{vocab.num_tokens} tokens, {vocab.num_tags} tags")

    def show(epoch: int, loss: float, f1: float, acc: float) -> None:
        print(f"epoch {epoch}/{config.epochs} loss {loss:.6f} "
              f"val_f1 {f1:.2f} val_acc {acc:.2f}")

    report = train(model, train_set, val_set, on_epoch=show)
    save_model(model, model_path)

    log_path = Path(str(model_path) + ".train.log")
    lines = ["# training log"]
    lines += [f"# {key} = {settings[key]}" for key in sorted(settings)]
    for i, loss in enumerate(report.epoch_losses):
        lines.append(
            f"epoch {i + 1} loss {loss:.6f} val_f1 {report.val_f1[i]:.2f} "
            f"val_acc {report.val_accuracy[i]:.2f}"
        )
    lines.append(f"# best_epoch {report.best_epoch} best_val_f1 {report.best_val_f1:.2f}")
    log_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    from .report import save_training_curves  # heavy import, only when needed

    figure_path = Path(str(model_path) + ".train.png")
    save_training_curves(report, figure_path, title=config.variant)
    print(f"wrote {model_path}, {log_path}, {figure_path}")
    print(f"best epoch {report.best_epoch} with val_f1 {report.best_val_f1:.2f}")
    return 0


def _cmd_eval(args) -> int:
    sentences = parse_conll(Path(args.data).read_text(encoding="utf-8"))
    if not sentences:
        raise ConfigError(f"{args.data}: no sentences to evaluate")
    gold = [s.tags for s in sentences]
    data_tags = {t for tags in gold for t in tags}
    rows = []
    seen_names: dict[str, int] = {}
    for model_path in args.models:
        model = load_model(model_path)
        missing = data_tags - set(model.vocab.id_to_tag)
        if missing:
            raise EvaluationError(
                f"{model_path}: data carries tags unknown to the model: {sorted(missing)}"
            )
        predictions = [model.predict(s.tokens) for s in sentences]
        report = weighted_average(accumulate_counts(gold, predictions))
        name = model.config.variant
        seen_names[name] = seen_names.get(name, 0) + 1
        if seen_names[name] > 1:
            name = f"{name}#{seen_names[name]}"
        rows.append((name, report))

    table = render_comparison_table(rows)
    print(table, end="")

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "comparison.csv"
    csv_path.write_text(comparison_csv(rows), encoding="utf-8")

    from .report import save_comparison_chart

    chart_path = save_comparison_chart(rows, out_dir / "comparison.png")
    print(f"wrote {csv_path}, {chart_path}")
    return 0


def _cmd_tag(args) -> int:
    model = load_model(args.model)
    if args.input is None or args.input == "-":
        stream = sys.stdin
        close = False
    else:
        stream = open(args.input, encoding="utf-8")
        close = True
    try:
        for lineno, line in enumerate(stream, start=1):
            tokens = line.split()
            if not tokens:
                print(f"warning: line {lineno} is empty, skipped", file=sys.stderr)
                continue
            tags = model.predict(tokens)
            for tok, tag in zip(tokens, tags):
                sys.stdout.write(f"{tok} {tag}\n")
            sys.stdout.write("\n")
            sys.stdout.flush()
    finally:
        if close:
            stream.close()
    return 0


# ---------------------------------------------------------------------------
# parser


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqtag",
        description="Train, evaluate, and apply sequence taggers with a CRF output layer.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert a JSON annotation corpus to the line format")
    p.add_argument("--input", "-i", required=True, help="JSON corpus document")
    p.add_argument("--output", "-o", required=True, help="destination file")
    p.set_defaults(func=_cmd_convert)

    p = sub.add_parser("gen-synth", help="generate a synthetic token-encodes-tag corpus")
    p.add_argument("--output", "-o", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sentences", type=int, default=2000)
    p.add_argument("--vocab-size", type=int, default=100)
    p.add_argument("--tags", type=int, default=5)
    p.set_defaults(func=_cmd_gen_synth)

    p = sub.add_parser("train", help="split a corpus, train one variant, save the model")
    p.add_argument("--data", "-d", help="corpus in the line format")
    p.add_argument("--config", "-c", help="key=value run configuration file")
    p.add_argument("--variant", choices=VARIANTS)
    p.add_argument("--model-out", help="model file path (default <output-dir>/<variant>.model)")
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--embedding-dim", dest="embedding_dim", type=int)
    p.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--kernel-width", dest="kernel_width", type=int)
    p.add_argument("--conv-channels", dest="conv_channels", type=int)
    p.add_argument("--split-seed", dest="split_seed", type=int)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="score saved models on a labeled corpus")
    p.add_argument("models", nargs="+", help="model files to compare")
    p.add_argument("--data", "-d", required=True, help="labeled corpus in the line format")
    p.add_argument("--out-dir", dest="out_dir", default=".",
                   help="where comparison.csv and comparison.png go")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("tag", help="tag plain text, one space-tokenized sentence per line")
    p.add_argument("--model", "-m", required=True)
    p.add_argument("--input", "-i", help="text file (default: stdin)")
    p.set_defaults(func=_cmd_tag)

    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as e:  # argparse already printed the message
        return int(e.code or 0)
    try:
        return args.func(args)
    except (ParseError, ConfigError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (SeqTagError, ValueError, IndexError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
