"""Command-line front end.

Subcommands::

    tabeval score    preds.jsonl --out report.json [--jobs N]
    tabeval perturb  gt.jsonl --kind shift|content [--levels ...] [--emit-csv f.csv]
    tabeval curate   raw.jsonl --out curated.jsonl --report filter.json --rejects bad.jsonl
    tabeval split    curated.jsonl --k 5000 --out-prefix data/balanced
    tabeval import   PubTabNet_2.0.0.jsonl --format pubtabnet --out gt.jsonl

Exit codes: 0 success, 1 usage/precondition error, 2 I/O error,
3 ground truth that fails to parse.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Iterable, Optional

from . import curation
from .adjacency import adjacency_f1
from .perturbation import (
    DEFAULT_LEVELS,
    EmptyCorpus,
    PerturbationKind,
    run_sweep,
    synthetic_corpus,
)
from .table_model import Complexity, Mode, TableParseError, classify_complexity, detokenize, parse_table
from .teds import exact_structure_match, teds

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_GT_PARSE = 3


class InputError(Exception):
    """Unreadable or malformed input file."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which would collide with the I/O code
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------
# JSON output with fixed key order and 4-decimal floats

def dumps(obj: Any, indent: int = 2, _level: int = 0) -> str:
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise ValueError(f"cannot serialize {obj}")
        return f"{obj:.4f}"
    if isinstance(obj, (int, str)):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k), ensure_ascii=False)}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, str, bool)) or v is None for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_output(text: str, path: Optional[str]) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text, encoding="utf-8")


def read_jsonl(path: str) -> list[dict]:
    try:
        handle = sys.stdin if path == "-" else open(path, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    records = []
    with handle:
        for lineno, line in enumerate(handle, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(record, dict):
                raise InputError(f"{path}:{lineno}: expected a JSON object")
            records.append(record)
    return records


def write_jsonl(records: Iterable[dict], path: Optional[str]) -> None:
    text = "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records)
    write_output(text, path)


# --------------------------------------------------------------------------
# score

def score_sample(record: dict) -> dict:
    """Score one ``{id, gt_html, pred_html}`` record.

    Ground truth is parsed strictly and the prediction leniently. A prediction
    that cannot be parsed at all scores zero on every metric.
    """
    result: dict[str, Any] = {"id": record["id"]}
    try:
        gt = parse_table(record["gt_html"], Mode.STRICT)
    except TableParseError as exc:
        result.update(teds=None, adjacency_f1=None, exact_structure_match=None,
                      complexity=None, parse_status="gt_failed", error=str(exc))
        return result
    complexity = classify_complexity(gt).value
    pred_html = record.get("pred_html")
    try:
        if pred_html is None:
            raise TableParseError("missing prediction")
        pred = parse_table(pred_html, Mode.LENIENT)
        rel = adjacency_f1(gt, pred)
        result.update(
            teds=teds(gt, pred).value,
            adjacency_f1={"p": rel.precision, "r": rel.recall, "f1": rel.f1},
            exact_structure_match=exact_structure_match(gt, pred),
            complexity=complexity,
            parse_status="ok",
        )
    except (TableParseError, ValueError):
        result.update(
            teds=0.0,
            adjacency_f1={"p": 0.0, "r": 0.0, "f1": 0.0},
            exact_structure_match=False,
            complexity=complexity,
            parse_status="failed" if pred_html is not None else "missing",
        )
    return result


def _mean(values: list[float]) -> Optional[float]:
    return math.fsum(values) / len(values) if values else None


def aggregate(records: list[dict]) -> dict:
    scored = [r for r in records if r["parse_status"] != "gt_failed"]
    simple = [r["teds"] for r in scored if r["complexity"] == Complexity.SIMPLE.value]
    complex_ = [r["teds"] for r in scored if r["complexity"] == Complexity.COMPLEX.value]
    everything = [r["teds"] for r in scored]
    matches = [1.0 if r["exact_structure_match"] else 0.0 for r in scored]
    return {
        "teds": {"simple": _mean(simple), "complex": _mean(complex_), "all": _mean(everything)},
        "adjacency_f1": _mean([r["adjacency_f1"]["f1"] for r in scored]),
        "exact_match_rate": _mean(matches),
        "counts": {
            "simple": len(simple),
            "complex": len(complex_),
            "all": len(scored),
            "pred_failed": sum(r["parse_status"] in ("failed", "missing") for r in scored),
            "gt_failed": len(records) - len(scored),
        },
    }


def _map(func, items: list, jobs: int) -> list:
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(func, items, chunksize=max(1, len(items) // (4 * jobs))))
    return [func(x) for x in items]


def cmd_score(args) -> int:
    records = read_jsonl(args.input)
    for lineno, record in enumerate(records, 1):
        if "id" not in record or "gt_html" not in record:
            raise InputError(f"{args.input}: record {lineno} lacks id or gt_html")
    results = _map(score_sample, records, args.jobs)
    samples = [{k: v for k, v in r.items() if k != "error"} for r in results]
    report = {"samples": samples, "aggregate": aggregate(results)}
    write_output(dumps(report) + "\n", args.out)
    failed = [r for r in results if r["parse_status"] == "gt_failed"]
    if failed:
        for r in failed:
            print(f"ground truth of {r['id']} does not parse: {r['error']}", file=sys.stderr)
        return EXIT_GT_PARSE
    return EXIT_OK


# --------------------------------------------------------------------------
# perturb

def cmd_perturb(args) -> int:
    skipped: list[dict] = []
    if args.synthetic:
        trees = synthetic_corpus(args.synthetic, args.seed)
        ids = [f"synthetic-{i}" for i in range(len(trees))]
    else:
        if args.input is None:
            raise InputError("perturb needs an input file or --synthetic N")
        trees, ids = [], []
        for record in read_jsonl(args.input):
            try:
                trees.append(parse_table(record["gt_html"], Mode.STRICT))
                ids.append(str(record["id"]))
            except (KeyError, TableParseError) as exc:
                skipped.append({"id": str(record.get("id")), "reason": f"unparseable: {exc}"})
    try:
        result = run_sweep(trees, args.kind, args.levels, args.seed, args.jobs)
    except EmptyCorpus as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    skipped.extend({"id": ids[i], "reason": "spanning cells"} for i in result.skipped)
    report = result.to_dict()
    report["skipped"] = skipped
    write_output(dumps(report) + "\n", args.out)
    if args.emit_csv:
        rows = result.csv_rows()
        Path(args.emit_csv).parent.mkdir(parents=True, exist_ok=True)
        with open(args.emit_csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(rows[0])
            for level, t, f, c in rows[1:]:
                writer.writerow([f"{level:.2f}", f"{t:.4f}", f"{f:.4f}", c])
    return EXIT_OK


# --------------------------------------------------------------------------
# curate

def _load_stats(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read corpus stats {path}: {exc}") from exc
    return {
        "char_counts": Counter(data["char_counts"]),
        "idf": (int(data["n_docs"]), Counter(data["df"])),
    }


def cmd_curate(args) -> int:
    records = read_jsonl(args.input)
    samples, rejects = [], []
    seen: set[str] = set()
    for record in records:
        try:
            sample = curation.CorpusSample.from_dict(record)
            if sample.id in seen:
                raise ValueError(f"duplicate id {sample.id!r}")
            parse_table(sample.gt_html, Mode.LENIENT)
        except (ValueError, TypeError) as exc:
            rejects.append({"record": record, "reason": str(exc)})
            continue
        seen.add(sample.id)
        samples.append(sample)

    stats = _load_stats(args.corpus_stats) if args.corpus_stats else {}
    kept, report = curation.filter_tables(samples, **stats)
    if args.save_corpus_stats:
        counts, (n_docs, df) = curation.corpus_statistics(samples)
        write_output(dumps({
            "n_docs": n_docs,
            "df": dict(sorted(df.items())),
            "char_counts": dict(sorted(counts.items())),
        }) + "\n", args.save_corpus_stats)

    out = []
    for sample in kept:
        curated = curation.CorpusSample(**{**sample.__dict__, "gt_html": curation.curate_html(sample.gt_html)})
        out.append(curated.to_dict())
    write_jsonl(out, args.out)
    report_dict = report.to_dict()
    report_dict["rejected"] = len(rejects)
    write_output(dumps(report_dict) + "\n", args.report)
    if rejects:
        if args.rejects:
            write_jsonl(rejects, args.rejects)
        else:
            for r in rejects:
                print(f"rejected: {r['reason']}", file=sys.stderr)
    return EXIT_OK


# --------------------------------------------------------------------------
# split

def cmd_split(args) -> int:
    samples = [curation.CorpusSample.from_dict(r) for r in read_jsonl(args.input)]
    prefix = args.out_prefix
    if args.mode == "partition":
        parts = curation.random_partition(samples, seed=args.seed)
        for name, part in parts.items():
            write_jsonl([dict(s.to_dict(), split=name) for s in part], f"{prefix}.{name}.jsonl")
        return EXIT_OK
    try:
        drawn = curation.sample_balanced(samples, 2 * args.k, args.seed)
    except curation.InsufficientSamples as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    complex_, simple = drawn[: 2 * args.k], drawn[2 * args.k:]
    dev = complex_[: args.k] + simple[: args.k]
    test = complex_[args.k:] + simple[args.k:]
    write_jsonl([dict(s.to_dict(), split="dev") for s in dev], f"{prefix}.dev.jsonl")
    write_jsonl([dict(s.to_dict(), split="test") for s in test], f"{prefix}.test.jsonl")
    return EXIT_OK


# --------------------------------------------------------------------------
# import

def pubtabnet_to_html(record: dict) -> str:
    structure = list(record["html"]["structure"]["tokens"])
    cells = [c.get("tokens", []) for c in record["html"]["cells"]]
    if not structure or structure[0] != "<table>":
        structure = ["<table>", *structure, "</table>"]
    return detokenize(structure, cells)


def cmd_import(args) -> int:
    out = []
    for lineno, record in enumerate(read_jsonl(args.input), 1):
        try:
            item = {"id": str(record["filename"]), "gt_html": pubtabnet_to_html(record)}
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"{args.input}: record {lineno} is not PubTabNet format ({exc})") from exc
        if record.get("split"):
            item["split"] = record["split"]
        out.append(item)
    write_jsonl(out, args.out)
    return EXIT_OK


# --------------------------------------------------------------------------

def _levels(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid level list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--jobs", type=int, default=1, help="worker processes (output is identical for any value)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, help="output path (default: stdout)")

    parser = _Parser(prog="tabeval", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("score", parents=[common], help="score predictions with TEDS and adjacency F1")
    p.add_argument("input", help="JSONL with id, gt_html, pred_html")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("perturb", parents=[common], help="metric response to perturbations")
    p.add_argument("input", nargs="?", help="JSONL with id, gt_html")
    p.add_argument("--kind", choices=[k.value for k in PerturbationKind], required=True)
    p.add_argument("--levels", type=_levels, default=list(DEFAULT_LEVELS))
    p.add_argument("--synthetic", type=int, default=0, metavar="N",
                   help="use N synthetic dense tables instead of an input file")
    p.add_argument("--emit-csv", default=None, metavar="PATH")
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("curate", parents=[common], help="filter and normalize an annotation corpus")
    p.add_argument("input")
    p.add_argument("--report", default=None, help="FilterReport JSON path (default: stdout)")
    p.add_argument("--rejects", default=None, help="JSONL for malformed samples")
    p.add_argument("--corpus-stats", default=None, metavar="PATH",
                   help="use character counts and document frequencies from PATH")
    p.add_argument("--save-corpus-stats", default=None, metavar="PATH",
                   help="write this corpus's character counts and document frequencies")
    p.set_defaults(func=cmd_curate)

    p = sub.add_parser("split", parents=[common], help="balanced dev/test draw or 60/20/20 partition")
    p.add_argument("input")
    p.add_argument("--k", type=int, default=5000, help="samples per complexity class and split")
    p.add_argument("--mode", choices=["balanced", "partition"], default="balanced")
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("import", parents=[common], help="convert an external annotation format")
    p.add_argument("input")
    p.add_argument("--format", choices=["pubtabnet"], default="pubtabnet")
    p.set_defaults(func=cmd_import)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
