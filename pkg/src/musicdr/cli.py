"""Command-line surface: reproducible batch commands over the toolkit.

Every sampling command requires an explicit --seed (no wall-clock
defaults) and prints the effective seed, so two runs with the same inputs
produce byte-identical outputs. Exit codes: 0 success, 2 usage error,
1 data/provider error with a one-line diagnostic.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import corpus as corpus_mod
from . import densevec, evaluation, gpl, pairs as pairs_mod, ranker, tfidf
from .wire import WireProvider

PROVIDER_ADDR_ENV = "DR_PROVIDER_ADDR"


class CliError(Exception):
    """Data or provider failure surfaced as exit code 1."""


class UsageError(CliError):
    """Bad invocation (missing/invalid arguments); exit code 2."""


def _load_config(path: str | None) -> dict[str, str]:
    if path is None:
        return {}
    config: dict[str, str] = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise CliError(f"{path}:{line_no}: expected key=value")
        key, _, value = stripped.partition("=")
        config[key.strip()] = value.strip()
    return config


def _apply_config(args: argparse.Namespace, config: dict[str, str]) -> None:
    # Flags win; config fills only unset values.
    for key, value in config.items():
        attr = key.replace("-", "_")
        if getattr(args, attr, None) is None:
            setattr(args, attr, value)


def _require_seed(args: argparse.Namespace) -> int:
    if args.seed is None:
        raise UsageError("--seed is required (sampling commands have no implicit seed)")
    seed = int(args.seed)
    print(f"seed: {seed}")
    return seed


def _provider_address(args: argparse.Namespace) -> str:
    addr = getattr(args, "provider_addr", None) or os.environ.get(PROVIDER_ADDR_ENV)
    if not addr:
        raise CliError(
            f"wire provider needs --provider-addr or {PROVIDER_ADDR_ENV} "
            "(tcp:HOST:PORT or stdio:COMMAND)"
        )
    return addr


def _make_encoder(args: argparse.Namespace):
    name = args.encoder
    if name == "mock":
        return densevec.MockEmbedder()
    if name == "tfidf":
        return tfidf.TfIdfEncoder()
    if name == "wire":
        return WireProvider.from_address(_provider_address(args))
    raise CliError(f"unknown encoder {name!r}")


def _make_scorer(args: argparse.Namespace):
    name = args.scorer
    if name == "mock":
        return densevec.MockScorer()
    if name == "wire":
        return WireProvider.from_address(_provider_address(args))
    raise CliError(f"unknown scorer {name!r}")


def _make_retrievers(args: argparse.Namespace, keys_source) -> list:
    indexes = []
    for name in args.retrievers.split(","):
        name = name.strip()
        if not name:
            continue
        sub = argparse.Namespace(**vars(args))
        sub.encoder = name
        indexes.append(ranker.build_index(keys_source, _make_encoder(sub)))
    if not indexes:
        raise CliError("--retrievers must name at least one encoder")
    return indexes


def _cmd_ingest(args: argparse.Namespace) -> int:
    tracks = corpus_mod.load_corpus(args.corpus)
    keys = set(corpus_mod.iter_unique_keys(tracks))
    print(f"tracks: {len(tracks)}")
    print(f"unique keys: {len(keys)}")
    if args.out:
        corpus_mod.dump_corpus(tracks, args.out)
        print(f"wrote {args.out}")
    return 0


def _cmd_pairs(args: argparse.Namespace) -> int:
    seed = _require_seed(args)
    tracks = corpus_mod.load_corpus(args.corpus)
    generated = pairs_mod.generate_pairs(tracks, seed)
    pairs_mod.dump_pairs(generated, args.out)
    print(f"pairs: {len(generated)} -> {args.out}")
    return 0


def _cmd_samples(args: argparse.Namespace) -> int:
    seed = _require_seed(args)
    tracks = corpus_mod.load_corpus(args.corpus)
    samples = evaluation.make_test_samples(tracks, seed, n_samples=args.n_samples)
    evaluation.dump_test_samples(samples, args.out)
    print(f"samples: {len(samples)} x {len(samples[0])} -> {args.out}")
    return 0


def _cmd_stats(args: argparse.Namespace) -> int:
    loaded = pairs_mod.load_pairs(args.pairs)
    stats = evaluation.dataset_stats(loaded)
    payload = {
        "n_requests": stats.n_requests,
        "n_unique_keys": stats.n_unique_keys,
        "mean_shared_ratio": stats.mean_shared_ratio,
    }
    if args.json:
        print(json.dumps(payload, ensure_ascii=False))
    else:
        print(f"requests: {stats.n_requests}")
        print(f"unique keys: {stats.n_unique_keys}")
        print(f"mean shared-word ratio: {stats.mean_shared_ratio:.4f}")
    return 0


def _cmd_index(args: argparse.Namespace) -> int:
    tracks = corpus_mod.load_corpus(args.corpus)
    sets = [track.descriptor_set() for track in tracks]
    encoder = _make_encoder(args)
    index = ranker.build_index(sets, encoder)
    if isinstance(index, ranker.DenseDescriptorIndex):
        densevec.save_matrix(index.matrix, args.out)
    elif isinstance(index, tfidf.SparseDescriptorIndex):
        tfidf.save_model(index.model, args.out)
    else:
        raise CliError(f"cannot persist index of type {type(index).__name__}")
    print(f"index: {len(index.keys)} keys -> {args.out}")
    return 0


def _cmd_rank(args: argparse.Namespace) -> int:
    if args.k < 1:
        raise UsageError("--k must be >= 1")
    encoder = _make_encoder(args)
    if args.index:
        if args.encoder == "tfidf":
            raise UsageError("--index applies to dense indexes; tfidf ranks from --corpus")
        matrix = densevec.load_matrix(args.index)
        index = ranker.DenseDescriptorIndex(matrix.ids, matrix, encoder)
    else:
        if not args.corpus:
            raise UsageError("rank needs --corpus or --index")
        tracks = corpus_mod.load_corpus(args.corpus)
        index = ranker.build_index([t.descriptor_set() for t in tracks], encoder)
    results = ranker.rank(args.request, index, args.k)
    if args.json:
        print(json.dumps([{"key": k, "score": s} for k, s in results], ensure_ascii=False))
    else:
        for position, (key, score) in enumerate(results, 1):
            print(f"{position:3d}  {score: .6f}  {key}")
    return 0


def _cmd_mine(args: argparse.Namespace) -> int:
    loaded = pairs_mod.load_pairs(args.pairs)
    indexes = _make_retrievers(args, [pair.descriptor_set for pair in loaded])
    per_k = args.per_retriever_k or -(-args.total // len(indexes))
    with open(args.out, "w", encoding="utf-8") as fh:
        for pair in loaded:
            negatives = gpl.mine_negatives(
                pair.request, pair.descriptor_set.key, indexes, per_k, args.total
            )
            fh.write(
                json.dumps(
                    {"query": pair.request, "pos": pair.descriptor_set.key, "negs": negatives},
                    ensure_ascii=False,
                )
            )
            fh.write("\n")
    print(f"mined: {len(loaded)} queries -> {args.out}")
    return 0


def _cmd_label(args: argparse.Namespace) -> int:
    scorer = _make_scorer(args)
    n_triples = 0
    with open(args.mined, encoding="utf-8") as src, open(args.out, "w", encoding="utf-8") as dst:
        for line in src:
            if not line.strip():
                continue
            obj = json.loads(line)
            for neg in obj["negs"]:
                margin = gpl.margin_label(obj["query"], obj["pos"], neg, scorer)
                triple = gpl.TrainingTriple(
                    request=obj["query"], positive_key=obj["pos"], negative_key=neg, margin=margin
                )
                dst.write(gpl.triple_to_json(triple))
                dst.write("\n")
                n_triples += 1
    print(f"triples: {n_triples} -> {args.out}")
    return 0


def _cmd_triples(args: argparse.Namespace) -> int:
    seed = _require_seed(args)
    loaded = pairs_mod.load_pairs(args.pairs)
    indexes = _make_retrievers(args, [pair.descriptor_set for pair in loaded])
    scorer = _make_scorer(args)
    triples = gpl.generate_triples(loaded, indexes, scorer, args.total, seed)
    gpl.dump_triples(triples, args.out)
    print(f"triples: {len(triples)} -> {args.out}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    if args.k < 1:
        raise UsageError("--k must be >= 1")
    seed = _require_seed(args)
    tracks = corpus_mod.load_corpus(args.corpus)
    samples = evaluation.make_test_samples(tracks, seed, n_samples=args.n_samples)
    if args.samples_out:
        evaluation.dump_test_samples(samples, args.samples_out)
    encoder = _make_encoder(args)
    report = evaluation.evaluate(encoder, samples, k=args.k)
    print(evaluation.report_to_json(report))
    print(evaluation.format_report_table({args.encoder: report}))
    if args.json_out:
        Path(args.json_out).write_text(evaluation.report_to_json(report) + "\n", encoding="utf-8")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="musicdr",
        description="Descriptor-level retrieval: pair generation, GPL triples, Recall@k",
    )
    parser.add_argument("--config", help="optional key=value config file (flags win)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, **kwargs) -> argparse.ArgumentParser:
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(func=func)
        return p

    p = add("ingest", _cmd_ingest, help="validate a corpus file, print stats")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", help="re-emit the corpus in canonical JSONL")

    p = add("pairs", _cmd_pairs, help="generate (request, descriptor set) pairs")
    p.add_argument("--corpus", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)

    p = add("samples", _cmd_samples, help="emit the resampled test sets")
    p.add_argument("--corpus", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--n-samples", type=int, default=evaluation.DEFAULT_N_SAMPLES)
    p.add_argument("--out", required=True)

    p = add("stats", _cmd_stats, help="dataset statistics over a pairs file")
    p.add_argument("--pairs", required=True)
    p.add_argument("--json", action="store_true")

    p = add("index", _cmd_index, help="build and persist a descriptor index")
    p.add_argument("--corpus", required=True)
    p.add_argument("--encoder", choices=("mock", "tfidf", "wire"), required=True)
    p.add_argument("--provider-addr")
    p.add_argument("--out", required=True)

    p = add("rank", _cmd_rank, help="rank one request against an index")
    p.add_argument("--corpus")
    p.add_argument("--index", help="dense matrix file from the index command")
    p.add_argument("--encoder", choices=("mock", "tfidf", "wire"), required=True)
    p.add_argument("--provider-addr")
    p.add_argument("--request", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--json", action="store_true")

    p = add("mine", _cmd_mine, help="mine hard negatives for a pairs file")
    p.add_argument("--pairs", required=True)
    p.add_argument("--retrievers", default="mock,tfidf", help="comma list of encoders")
    p.add_argument("--per-retriever-k", type=int)
    p.add_argument("--total", type=int, default=30)
    p.add_argument("--provider-addr")
    p.add_argument("--out", required=True)

    p = add("label", _cmd_label, help="margin-label mined negatives")
    p.add_argument("--mined", required=True)
    p.add_argument("--scorer", choices=("mock", "wire"), required=True)
    p.add_argument("--provider-addr")
    p.add_argument("--out", required=True)

    p = add("triples", _cmd_triples, help="mine + label in one pass")
    p.add_argument("--pairs", required=True)
    p.add_argument("--retrievers", default="mock,tfidf")
    p.add_argument("--scorer", choices=("mock", "wire"), default="mock")
    p.add_argument("--total", type=int, default=30)
    p.add_argument("--seed", type=int)
    p.add_argument("--provider-addr")
    p.add_argument("--out", required=True)

    p = add("eval", _cmd_eval, help="run the Recall@k protocol")
    p.add_argument("--corpus", required=True)
    p.add_argument("--encoder", choices=("mock", "tfidf", "wire"), required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--k", type=int, default=evaluation.DEFAULT_K)
    p.add_argument("--n-samples", type=int, default=evaluation.DEFAULT_N_SAMPLES)
    p.add_argument("--provider-addr")
    p.add_argument("--samples-out", help="also write the test sets as JSONL")
    p.add_argument("--json-out", help="also write the report JSON to a file")

    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(args, _load_config(args.config))
        return args.func(args)
    except UsageError as exc:
        print(f"musicdr: error: {exc}", file=sys.stderr)
        return 2
    except CliError as exc:
        print(f"musicdr: error: {exc}", file=sys.stderr)
        return 1
    except (corpus_mod.CorpusError, densevec.MatrixFormatError, densevec.ProviderUnavailable,
            densevec.DimMismatch, densevec.NonFiniteValue) as exc:
        print(f"musicdr: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"musicdr: error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"musicdr: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
