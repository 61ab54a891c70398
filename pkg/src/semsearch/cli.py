"""Command-line surface: index building, ad-hoc search, evaluation runs,
paragraph-vector training, and embedding-file utilities.

Every command exits 0 on success and prints a one-line ``error: ...``
diagnostic with exit code 1 on failure; argparse itself exits 2 on bad
flags.  All randomness is controlled by ``--seed``.  The ``eval`` command
also accepts a flat ``key=value`` config file; explicit flags win over file
values, and unknown keys are rejected.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .embeddings import (
    EmbeddingTable,
    load_text_vectors,
    load_word2vec_binary,
    save_text_vectors,
)
from .engine import (
    BACKEND_KINDS,
    EMBEDDING_KINDS,
    PV_KINDS,
    BackendSpec,
    build_index,
    load_index,
    rank,
    save_index,
)
from .errors import ConfigError, SemsearchError
from .evaluation import (
    evaluate,
    format_report_table,
    load_trials,
    write_ranks_csv,
    write_report_csv,
)
from .pipeline import build_corpus, default_stoplist, load_stoplist
from .pv import PvConfig, save_pv, train_pv

__all__ = ["main", "entry_point"]

STOPLIST_ENV = "SEMSEARCH_STOPLIST"


def _stops(path: str | None) -> frozenset[str]:
    path = path or os.environ.get(STOPLIST_ENV)
    return load_stoplist(path) if path else default_stoplist()


def _read_corpus(path, stops, blank_lines: bool):
    raw = Path(path).read_text(encoding="utf-8")
    corpus = build_corpus(raw, stops, blank_lines=blank_lines)
    if not corpus:
        raise ConfigError(f"{path}: no statements found")
    return corpus


def _add_embedding_args(parser):
    parser.add_argument("--embeddings", help="word-vector file for wcd/wmd kinds")
    parser.add_argument(
        "--embedding-format",
        choices=("auto", "binary", "text", "text_header"),
        default=None,
        help="vector file layout (auto: .bin suffix means binary)",
    )
    parser.add_argument("--ngrams", help="character n-gram table for OOV synthesis")
    parser.add_argument("--metric", choices=("cosine_distance", "euclidean"),
                        default=None)


def _add_pv_args(parser):
    parser.add_argument("--pv-dim", type=int, default=None)
    parser.add_argument("--pv-window", type=int, default=None)
    parser.add_argument("--pv-negative", type=int, default=None)
    parser.add_argument("--pv-epochs", type=int, default=None)
    parser.add_argument("--pv-alpha", type=float, default=None)
    parser.add_argument("--pv-alpha-min", type=float, default=None)
    parser.add_argument("--pv-min-count", type=int, default=None)


def _add_corpus_args(parser):
    parser.add_argument("--corpus", help="text file, one statement per paragraph")
    parser.add_argument("--stoplist", help=f"stoplist file (default: "
                        f"${STOPLIST_ENV} or the packaged list)")
    parser.add_argument(
        "--blank-line-paragraphs",
        action="store_const", const=True, default=None,
        help="split only on blank lines so single newlines stay inside a statement",
    )


def _pv_config(values, mode: str, seed: int) -> PvConfig:
    base = PvConfig(mode=mode, seed=seed)
    return PvConfig(
        mode=mode,
        dim=values("pv_dim", base.dim),
        window=values("pv_window", base.window),
        negative=values("pv_negative", base.negative),
        epochs=values("pv_epochs", base.epochs),
        alpha=values("pv_alpha", base.alpha),
        alpha_min=values("pv_alpha_min", base.alpha_min),
        min_count=values("pv_min_count", base.min_count),
        seed=seed,
    )


def _args_getter(args):
    def values(name, default):
        got = getattr(args, name, None)
        return default if got is None else got

    return values


def _backend_spec(kind: str, values, seed: int) -> BackendSpec:
    if kind not in BACKEND_KINDS:
        raise ConfigError(f"unknown backend kind {kind!r}")
    kw = {"kind": kind, "seed": seed}
    if kind in EMBEDDING_KINDS:
        kw["embeddings"] = values("embeddings", None)
        kw["embedding_format"] = values("embedding_format", "auto")
        kw["ngrams"] = values("ngrams", None)
        kw["metric"] = values("metric", "cosine_distance")
    if kind in PV_KINDS:
        kw["pv"] = _pv_config(values, kind, seed)
    if kind == "lsa":
        kw["k_latent"] = values("k_latent", 100)
    if kind == "wmd_pruned":
        kw["prefetch"] = values("prefetch", 40)
    return BackendSpec(**kw)


def _one_line(text: str) -> str:
    return " ".join(text.split())


def cmd_index(args) -> int:
    values = _args_getter(args)
    if not args.corpus:
        raise ConfigError("index needs --corpus")
    stops = _stops(args.stoplist)
    corpus = _read_corpus(args.corpus, stops,
                          bool(args.blank_line_paragraphs))
    spec = _backend_spec(args.backend, values, args.seed)
    index = build_index(corpus, spec, stops)
    save_index(index, args.out)
    print(f"indexed {len(corpus)} statements with backend {spec.kind} -> {args.out}")
    return 0


def cmd_search(args) -> int:
    index = load_index(args.index)
    result = rank(index, args.query, k=args.k)
    if args.dropped and result.dropped:
        print(f"dropped {result.dropped} query token(s)")
    for pos, (sid, score) in enumerate(result.hits, start=1):
        line = f"{pos:>3}  {score:+.6f}  #{sid}"
        if not args.ids_only:
            line += f"  {_one_line(index.statement(sid).raw)}"
        print(line)
    return 0


def cmd_train_pv(args) -> int:
    values = _args_getter(args)
    if not args.corpus:
        raise ConfigError("train-pv needs --corpus")
    stops = _stops(args.stoplist)
    corpus = _read_corpus(args.corpus, stops,
                          bool(args.blank_line_paragraphs))
    config = _pv_config(values, args.mode, args.seed)
    model = train_pv(corpus, config)
    save_pv(model, args.out)
    print(f"trained {config.mode} on {len(model.doc_ids)} statements "
          f"(vocab {len(model.tokens)}, dim {model.representation_dim()}) "
          f"-> {args.out}")
    return 0


_CONFIG_CASTS = {
    "corpus": str, "trials": str, "stoplist": str, "backends": str,
    "embeddings": str, "embedding_format": str, "ngrams": str, "metric": str,
    "k": int, "k_latent": int, "prefetch": int,
    "pv_dim": int, "pv_window": int, "pv_negative": int, "pv_epochs": int,
    "pv_alpha": float, "pv_alpha_min": float, "pv_min_count": int,
    "seed": int, "jobs": int, "out": str, "format": str,
    "blank_line_paragraphs": None,  # bool, cast handled explicitly
}


def _parse_bool(key: str, text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ConfigError(f"config key {key}: expected true/false, got {text!r}")


def _load_config(path) -> dict:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if not sep or not key or not val:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            if key not in _CONFIG_CASTS:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            if key in values:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            cast = _CONFIG_CASTS[key]
            if cast is None:
                values[key] = _parse_bool(key, val)
            else:
                try:
                    values[key] = cast(val)
                except ValueError:
                    raise ConfigError(
                        f"{path}:{lineno}: bad value for {key!r}: {val!r}"
                    ) from None
    return values


def cmd_eval(args) -> int:
    config = _load_config(args.config) if args.config else {}

    def values(name, default):
        got = getattr(args, name, None)
        if got is not None:
            return got
        return config.get(name, default)

    corpus_path = values("corpus", None)
    trials_path = values("trials", None)
    if not corpus_path or not trials_path:
        raise ConfigError("eval needs --corpus and --trials (flag or config)")
    seed = values("seed", 0)
    stops = _stops(values("stoplist", None))
    corpus = _read_corpus(corpus_path, stops,
                          bool(values("blank_line_paragraphs", False)))
    trials = load_trials(trials_path, corpus)
    kinds = [b.strip() for b in values("backends", "wmd").split(",") if b.strip()]
    if not kinds:
        raise ConfigError("no backends selected")
    specs = [(kind, _backend_spec(kind, values, seed)) for kind in kinds]
    reports = evaluate(corpus, trials, specs, stops,
                       k=values("k", 20), jobs=values("jobs", 1))
    out_dir = Path(values("out", "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    write_report_csv(reports, out_dir / "report.csv")
    write_ranks_csv(reports, out_dir / "ranks.csv")
    if values("format", "table") == "csv":
        sys.stdout.write((out_dir / "report.csv").read_text(encoding="utf-8"))
    else:
        sys.stdout.write(format_report_table(reports))
    return 0


def _load_table(path: str, fmt: str) -> EmbeddingTable:
    if fmt == "auto":
        fmt = "binary" if path.endswith(".bin") else "text"
    if fmt == "binary":
        return load_word2vec_binary(path)
    return load_text_vectors(path, has_header=(fmt == "text_header"))


def cmd_embeddings_inspect(args) -> int:
    table = _load_table(args.path, args.embedding_format or "auto")
    print(f"{args.path}: {len(table)} tokens, dim {table.dim}")
    if table.duplicates:
        print(f"duplicate tokens (first kept): {len(table.duplicates)}")
    for token in table.tokens()[: args.limit]:
        vec = table.lookup(token)
        head = " ".join(f"{float(v):.4f}" for v in vec[:4])
        print(f"  {token}  [{head}{' ...' if table.dim > 4 else ''}]")
    return 0


def cmd_embeddings_filter(args) -> int:
    table = _load_table(args.src, args.embedding_format or "auto")
    wanted = set()
    if args.tokens:
        wanted.update(t.strip() for t in args.tokens.split(",") if t.strip())
    if args.tokens_from:
        with open(args.tokens_from, encoding="utf-8") as fh:
            wanted.update(line.strip() for line in fh if line.strip())
    if not wanted:
        raise ConfigError("filter needs --tokens and/or --tokens-from")
    kept = [t for t in table.tokens() if t in wanted]
    if not kept:
        raise ConfigError("no requested token exists in the table")
    subset = EmbeddingTable(
        dim=table.dim,
        vocab={t: i for i, t in enumerate(kept)},
        vectors=np.vstack([table.lookup(t) for t in kept]),
    )
    save_text_vectors(subset, args.dst, has_header=True)
    print(f"kept {len(kept)} of {len(table)} tokens -> {args.dst}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semsearch",
        description="statement retrieval over interchangeable similarity backends",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_index = sub.add_parser("index", help="build and persist a search index")
    _add_corpus_args(p_index)
    p_index.add_argument("--backend", choices=BACKEND_KINDS, default="wmd")
    p_index.add_argument("--out", required=True, help="output index file")
    p_index.add_argument("--k-latent", type=int, default=None, dest="k_latent")
    p_index.add_argument("--prefetch", type=int, default=None)
    p_index.add_argument("--seed", type=int, default=0)
    _add_embedding_args(p_index)
    _add_pv_args(p_index)
    p_index.set_defaults(func=cmd_index)

    p_search = sub.add_parser("search", help="rank statements for one query")
    p_search.add_argument("--index", required=True, help="index file from `index`")
    p_search.add_argument("--query", required=True)
    p_search.add_argument("--k", type=int, default=20)
    p_search.add_argument("--ids-only", action="store_true",
                          help="omit statement text")
    p_search.add_argument("--dropped", action="store_true",
                          help="report dropped query tokens")
    p_search.set_defaults(func=cmd_search)

    p_eval = sub.add_parser("eval", help="run query-variation trials")
    _add_corpus_args(p_eval)
    p_eval.add_argument("--trials", help="trial file")
    p_eval.add_argument("--backends",
                        help="comma-separated backend kinds (default wmd)")
    p_eval.add_argument("--config", help="flat key=value config file")
    p_eval.add_argument("--k", type=int, default=None)
    p_eval.add_argument("--k-latent", type=int, default=None, dest="k_latent")
    p_eval.add_argument("--prefetch", type=int, default=None)
    p_eval.add_argument("--seed", type=int, default=None)
    p_eval.add_argument("--jobs", type=int, default=None,
                        help="worker threads; 1 (default) is bit-reproducible")
    p_eval.add_argument("--out", help="directory for report.csv and ranks.csv")
    p_eval.add_argument("--format", choices=("table", "csv"), default=None)
    _add_embedding_args(p_eval)
    _add_pv_args(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_train = sub.add_parser("train-pv", help="train paragraph vectors")
    _add_corpus_args(p_train)
    p_train.add_argument("--mode", choices=PV_KINDS, default="pv_dm")
    p_train.add_argument("--out", required=True, help="output model file")
    p_train.add_argument("--seed", type=int, default=0)
    _add_pv_args(p_train)
    p_train.set_defaults(func=cmd_train_pv)

    p_emb = sub.add_parser("embeddings", help="vector-file utilities")
    emb_sub = p_emb.add_subparsers(dest="subcommand", required=True)

    p_inspect = emb_sub.add_parser("inspect", help="summarize a vector file")
    p_inspect.add_argument("path")
    p_inspect.add_argument("--embedding-format",
                           choices=("auto", "binary", "text", "text_header"),
                           default=None)
    p_inspect.add_argument("--limit", type=int, default=10,
                           help="how many tokens to list")
    p_inspect.set_defaults(func=cmd_embeddings_inspect)

    p_filter = emb_sub.add_parser(
        "filter", help="restrict a vector file to chosen tokens"
    )
    p_filter.add_argument("src")
    p_filter.add_argument("dst")
    p_filter.add_argument("--embedding-format",
                          choices=("auto", "binary", "text", "text_header"),
                          default=None)
    p_filter.add_argument("--tokens", help="comma-separated token list")
    p_filter.add_argument("--tokens-from", help="file with one token per line")
    p_filter.set_defaults(func=cmd_embeddings_filter)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        if code is None:
            return 0
        return code if isinstance(code, int) else 2
    try:
        return args.func(args)
    except SemsearchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry_point() -> None:
    sys.exit(main())
