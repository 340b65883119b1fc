"""Command-line interface mirroring the service API for offline use.

All commands operate on a workspace data directory (``--data``, or the
RISKVEC_DATA environment variable, default ``./riskvec_data``) so that CLI
runs and the HTTP service produce identical artifacts for identical inputs
and seeds. The default training seed comes from RISKVEC_SEED.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import evaluate
from .corpus import ingest_labeled, read_categories, read_corpus
from .embedding import Hyperparams
from .server import ApiError, Workspace, create_app


def _add_hp_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--arch", choices=("dm", "dbow"), default="dm", help="architecture")
    parser.add_argument("--objective", choices=("neg", "hs"), default="neg", help="training objective")
    parser.add_argument("-k", "--negative", type=int, default=10, help="negative samples per observation")
    parser.add_argument("--subsample", type=float, default=1e-6, help="subsampling threshold (0 disables)")
    parser.add_argument("--window", type=int, default=10, help="context window on each side")
    parser.add_argument("--dim", type=int, default=100, help="vector size")
    parser.add_argument("--min-count", type=int, default=5, help="ignore words rarer than this")
    parser.add_argument("--combine", choices=("concat", "mean"), default="concat", help="context combination (DM)")
    parser.add_argument("--epochs", type=int, default=20, help="training epochs")
    parser.add_argument("--lr-start", type=float, default=0.025)
    parser.add_argument("--lr-end", type=float, default=0.0001)
    parser.add_argument("--seed", type=int, default=None, help="training seed (default from RISKVEC_SEED)")


def hyperparams_from_args(args, default_seed: int) -> Hyperparams:
    return Hyperparams(
        architecture=args.arch,
        objective=args.objective,
        negative=args.negative,
        subsample=args.subsample,
        window=args.window,
        dim=args.dim,
        min_count=args.min_count,
        combine=args.combine,
        epochs=args.epochs,
        lr_start=args.lr_start,
        lr_end=args.lr_end,
        seed=args.seed if args.seed is not None else default_seed,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="riskvec", description=__doc__)
    parser.add_argument(
        "--data",
        default=os.environ.get("RISKVEC_DATA", "./riskvec_data"),
        help="workspace data directory",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="seed the training store from a labeled corpus")
    p.add_argument("--corpus", required=True, help="newline-delimited JSON paragraph records")
    p.add_argument("--categories", required=True, help="category registry file, one name per line")

    for name in ("train", "retrain"):
        p = sub.add_parser(name, help="train category models from the training store")
        p.add_argument("--category", help="one category (default: all registered)")
        p.add_argument("--clf", default="svm_linear",
                       choices=("svm_linear", "svm_rbf", "nb_gaussian", "nb_bernoulli"))
        p.add_argument("--c-value", type=float, default=1.0, help="SVM regularization C")
        _add_hp_flags(p)

    p = sub.add_parser("sweep", help="grid-sweep one hyperparameter end to end")
    p.add_argument("--param", required=True, help="parameter to sweep (k, subsample, window, dim, c, ...)")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--corpus", required=True, help="labeled corpus to split and sweep on")
    p.add_argument("--categories", required=True, help="category registry file")
    p.add_argument("--category", required=True, help="category to evaluate")
    p.add_argument("--ratios", default="0.8,0.1,0.1", help="train,validation,test split ratios")
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--infer-epochs", type=int, default=20)
    p.add_argument("--out", help="path prefix; writes <out>.txt and <out>.csv")
    _add_hp_flags(p)

    p = sub.add_parser("analyze", help="analyze a document against published models")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--doc-id", help="already-uploaded document id")
    src.add_argument("--file", help="plain-text document to upload and analyze")
    p.add_argument("--title", default="", help="document title when uploading")
    p.add_argument("--categories", help="comma-separated categories (default: all registered)")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--infer-epochs", type=int, default=50)
    p.add_argument("--json", action="store_true", help="emit the raw findings payload")

    p = sub.add_parser("review", help="accept or reject a finding")
    p.add_argument("--finding", required=True)
    p.add_argument("--verdict", required=True, choices=("accept", "reject"))
    p.add_argument("--comment", default="")

    p = sub.add_parser("export", help="export a document's findings report")
    p.add_argument("--doc", required=True)
    p.add_argument("--format", default="csv", choices=("csv", "text"))
    p.add_argument("--out", help="output file (default stdout)")

    p = sub.add_parser("serve", help="run the HTTP API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def _parse_value(raw: str):
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            continue
    return raw


def _cmd_ingest(ws: Workspace, args) -> int:
    result = ws.ingest_corpus(args.corpus, args.categories)
    print(
        f"ingested {result['paragraphs']} paragraphs into "
        f"{result['records']} records over {len(result['categories'])} categories"
    )
    return 0


def _cmd_train(ws: Workspace, args) -> int:
    hp = hyperparams_from_args(args, ws.default_seed)
    targets = [args.category] if args.category else ws.categories()
    if not targets:
        print("no categories registered; run ingest first", file=sys.stderr)
        return 1
    for category in targets:
        version = ws.retrain_category(category, hp, args.clf, {"c": args.c_value})
        print(f"{category}: published v{version}")
    return 0


def _cmd_sweep(ws: Workspace, args) -> int:
    records = read_corpus(args.corpus)
    categories = read_categories(args.categories)
    ratios = tuple(float(r) for r in args.ratios.split(","))
    split = ingest_labeled(records, categories, ratios, seed=args.split_seed)
    values = [_parse_value(v) for v in args.values.split(",")]
    base_hp = hyperparams_from_args(args, ws.default_seed)
    report = evaluate.sweep(
        {args.param: values},
        split,
        args.category,
        base_hp=base_hp,
        base_seed=base_hp.seed,
        infer_epochs=args.infer_epochs,
    )
    text = report.to_text()
    if args.out:
        with open(f"{args.out}.txt", "w", encoding="utf-8") as fh:
            fh.write(text)
        with open(f"{args.out}.csv", "w", encoding="utf-8") as fh:
            fh.write(report.to_csv())
        print(f"wrote {args.out}.txt and {args.out}.csv")
    else:
        print(text, end="")
    return 0


def _cmd_analyze(ws: Workspace, args) -> int:
    if args.file:
        with open(args.file, encoding="utf-8") as fh:
            text = fh.read()
        doc = ws.upload_document(text, args.title or os.path.basename(args.file))
        doc_id = doc["doc_id"]
        print(f"uploaded {doc_id} ({len(doc['paragraphs'])} paragraphs)", file=sys.stderr)
    else:
        doc_id = args.doc_id
    categories = args.categories.split(",") if args.categories else None
    payload = ws.analyze(doc_id, categories, args.threshold, args.infer_epochs)
    if args.json:
        print(json.dumps(payload, indent=2, ensure_ascii=False))
        return 0
    total = sum(len(v) for v in payload["findings"].values())
    print(f"document {doc_id}: {total} findings")
    for category in sorted(payload["findings"]):
        for f in payload["findings"][category]:
            print(f"  [{category}] p={f['probability']:.4f} {f['finding_id']} {f['paragraph_id']}")
    for w in payload["warnings"]:
        print(f"  warning: {w['paragraph_id']} ({w['category']}): {w['reason']}", file=sys.stderr)
    return 0


def _cmd_review(ws: Workspace, args) -> int:
    updated = ws.review(args.finding, args.verdict, args.comment)
    print(f"{updated['finding_id']}: {updated['status']}")
    return 0


def _cmd_export(ws: Workspace, args) -> int:
    content = ws.export(args.doc, args.format)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(content)
        print(f"wrote {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(content)
    return 0


def _cmd_serve(ws: Workspace, args) -> int:
    import uvicorn

    uvicorn.run(create_app(ws), host=args.host, port=args.port)
    return 0


COMMANDS = {
    "ingest": _cmd_ingest,
    "train": _cmd_train,
    "retrain": _cmd_train,
    "sweep": _cmd_sweep,
    "analyze": _cmd_analyze,
    "review": _cmd_review,
    "export": _cmd_export,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    seed_env = os.environ.get("RISKVEC_SEED")
    ws = Workspace(args.data, default_seed=int(seed_env) if seed_env else 1)
    try:
        return COMMANDS[args.command](ws, args)
    except ApiError as exc:
        print(f"error [{exc.code}]: {exc.message}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
