"""Command-line entry point: ``tabx eval|perturb|bench|sweep|aggregate``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from decimal import Decimal
from typing import Optional, Sequence

from . import bench
from .llm import LlmClient, LlmConfig, ProviderError
from .perturb import BANDS, DEFAULT_MIX, KINDS, ManifestError, PerturbError, generate_benchmark, load_manifest, write_benchmark
from .pipeline import dump_document, evaluate_paths, load_document
from .rubric import PROFILES, RubricError, WeightConfig, aggregate_stats, load_weights
from .table import TableError, read_table, with_source

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_PROVIDER = 0, 1, 2, 3
TABLE_EXTS = (".csv", ".md", ".markdown", ".json")

log = logging.getLogger("tabx")


class InputError(Exception):
    pass


def _weights(arg: Optional[str]) -> WeightConfig:
    if not arg:
        return WeightConfig.paper_default()
    try:
        return load_weights(arg)
    except (OSError, RubricError) as e:
        raise InputError(f"cannot load weights {arg!r}: {e}") from None


def _client(args) -> Optional[LlmClient]:
    if getattr(args, "llm", "off") == "off":
        return None
    return LlmClient(LlmConfig.from_env(replay=args.replay))


def _write(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- eval ---------------------------------------------------------------------------------------


def render_markdown(doc: dict) -> str:
    r = doc["rubric"]
    s = r["structure_descriptor"]
    lines = [
        f"# Table evaluation ({doc['version']})", "",
        f"- ground truth: `{doc['inputs']['gt']['path']}`",
        f"- candidate: `{doc['inputs']['cand']['path']}`",
        f"- error score: **{r['score_decimal']}** (0 means no discrepancy)",
        f"- transposed candidate: {doc['alignment']['transposed']}", "",
        "| | rows | columns | cells |", "|---|---|---|---|",
    ]
    for key in ("missing", "extra", "exact"):
        lines.append(f"| {key} | {s[key]['rows']} | {s[key]['columns']} | {s[key]['cells']} |")
    if r["granular_differences"]:
        lines += ["", "| gt cell | cand cell | type | class | magnitude | note |",
                  "|---|---|---|---|---|---|"]
        for g in r["granular_differences"]:
            lines.append(f"| ({g['gt_row']},{g['gt_col']}) | ({g['cand_row']},{g['cand_col']}) | "
                         f"{g['data_type']} | {g['classification']} | {g['magnitude']:.6g} | "
                         f"{g['note'] or ''} |")
    lines += ["", "| baseline | value |", "|---|---|"]
    lines += [f"| {k} | {v:.4f} |" for k, v in sorted(doc["baselines"].items())]
    return "\n".join(lines) + "\n"


def cmd_eval(args) -> int:
    weights = _weights(args.weights)
    try:
        doc = evaluate_paths(args.gt, args.cand, args.format, weights=weights,
                             client=_client(args), llm=args.llm)
    except (TableError, OSError) as e:
        log.error("cannot read input: %s", e)
        return EXIT_INPUT
    except ProviderError as e:
        log.error("provider error: %s", e)
        return EXIT_PROVIDER
    _write(render_markdown(doc) if args.pretty else dump_document(doc), args.out)
    return EXIT_OK


# -- perturb ------------------------------------------------------------------------------------


def parse_mix(text: Optional[str]) -> dict:
    if not text:
        return dict(DEFAULT_MIX)
    mix = {}
    for part in text.split(","):
        band, _, value = part.partition("=")
        band = band.strip().capitalize()
        if band not in BANDS:
            raise InputError(f"unknown difficulty band {band!r}")
        try:
            mix[band] = float(value)
        except ValueError:
            raise InputError(f"bad mix weight {value!r}") from None
    return mix


def read_clean_dir(path: str, fmt: Optional[str] = None) -> list:
    try:
        names = sorted(n for n in os.listdir(path) if n.lower().endswith(TABLE_EXTS))
    except OSError as e:
        raise InputError(f"cannot list {path}: {e}") from None
    if not names:
        raise InputError(f"no tables in {path}")
    tables = []
    for n in names:
        try:
            t = read_table(os.path.join(path, n), fmt)
        except (TableError, OSError) as e:
            raise InputError(f"{n}: {e}") from None
        tables.append(with_source(t, os.path.splitext(n)[0]))
    return tables


def cmd_perturb(args) -> int:
    cleans = read_clean_dir(args.input, args.format)
    mix = parse_mix(args.mix)
    kinds = args.kinds.split(",") if args.kinds else None
    try:
        cases = generate_benchmark(cleans, args.per_table, mix, args.seed, kinds)
    except PerturbError as e:
        raise InputError(str(e)) from None
    meta = {"seed": args.seed, "per_table": args.per_table, "mix": mix,
            "kinds": kinds or sorted(KINDS)}
    write_benchmark(cases, args.out, meta)
    log.info("wrote %d cases to %s", len(cases), args.out)
    return EXIT_OK


# -- bench / sweep ------------------------------------------------------------------------------


def _bench_docs(args, weights: WeightConfig) -> list[dict]:
    if args.from_reports:
        docs = bench.load_reports(args.from_reports)
        if args.bench and os.path.exists(os.path.join(args.bench, "manifest.json")):
            bench.check_reports_match(docs, load_manifest(args.bench))
        return docs
    if not args.bench:
        raise InputError("a benchmark directory or --from-reports is required")
    return bench.evaluate_benchmark(args.bench, weights, args.jobs)


def _rankings(path: str) -> dict:
    try:
        return bench.load_rankings(path)
    except ValueError as e:
        raise InputError(f"bad rankings file: {e}") from None


def cmd_bench(args) -> int:
    weights = _weights(args.weights)
    docs = _bench_docs(args, weights)
    os.makedirs(args.out, exist_ok=True)
    bench.write_csv(os.path.join(args.out, "per_case.csv"), bench.PER_CASE_HEADER,
                    bench.per_case_rows(docs))
    bench.write_csv(os.path.join(args.out, "detection.csv"), bench.DETECTION_HEADER,
                    bench.detection_rows(docs))
    if args.rankings:
        rankings = _rankings(args.rankings)
        bench.write_csv(os.path.join(args.out, "correlations.csv"), bench.CORRELATION_HEADER,
                        bench.correlation_rows(docs, rankings, args.rbo_p))
    if args.write_reports:
        bench.write_reports(docs, os.path.join(args.out, "reports"))
    return EXIT_OK


def cmd_sweep(args) -> int:
    weights = _weights(args.weights)
    docs = _bench_docs(args, weights)
    try:
        lows = [Decimal(x) for x in args.low]
    except ArithmeticError:
        raise InputError(f"bad --low value in {args.low}") from None
    rankings = _rankings(args.rankings) if args.rankings else None
    try:
        header, rows = bench.sweep_rows(docs, lows, weights, rankings, args.rbo_p)
    except RubricError as e:
        raise InputError(str(e)) from None
    text = bench.write_csv(None, header, rows)
    _write(text, args.out)
    return EXIT_OK


# -- aggregate ----------------------------------------------------------------------------------


def _report_paths(paths: Sequence[str]) -> list[str]:
    out = []
    for p in paths:
        if os.path.isdir(p):
            out += [os.path.join(p, n) for n in sorted(os.listdir(p)) if n.endswith(".json")]
        else:
            out.append(p)
    return out


def cmd_aggregate(args) -> int:
    try:
        docs = [load_document(p) for p in _report_paths(args.reports)]
    except (OSError, ValueError) as e:
        raise InputError(str(e)) from None
    if not docs:
        raise InputError("no reports given")
    stats = aggregate_stats([d["rubric"] for d in docs])
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        bench.write_csv(os.path.join(args.out, "by_type.csv"), ("data_type", "EI", "MI", "partial"),
                        [[t, v["EI"], v["MI"], v["partial"]] for t, v in stats.by_type.items()])
        bench.write_csv(os.path.join(args.out, "structure.csv"), ("entity", "MI", "EI", "EM"),
                        [[e, v["MI"], v["EI"], v["EM"]] for e, v in stats.structure.items()])
    else:
        sys.stdout.write(json.dumps(stats.to_dict(), sort_keys=True, indent=2) + "\n")
    return EXIT_OK


# -- parser -------------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tabx", description="Rubric-based evaluation of generated tables.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def llm_flags(sp) -> None:
        sp.add_argument("--llm", choices=("off", "on", "strict"), default="off",
                        help="model-assisted refinement (off by default)")
        sp.add_argument("--replay", choices=("off", "prefer", "strict"), default=None,
                        help="transcript cache mode (default from TABX_LLM_REPLAY)")

    def weight_flag(sp) -> None:
        sp.add_argument("--weights", help=f"key=value weights file or profile ({', '.join(PROFILES)})")

    e = sub.add_parser("eval", help="score one candidate table against a ground truth")
    e.add_argument("gt")
    e.add_argument("cand")
    e.add_argument("--format", choices=("csv", "markdown", "json"))
    weight_flag(e)
    llm_flags(e)
    e.add_argument("--pretty", action="store_true", help="markdown summary instead of JSON")
    e.add_argument("-o", "--out")
    e.set_defaults(func=cmd_eval)

    pt = sub.add_parser("perturb", help="generate a seeded perturbation benchmark")
    pt.add_argument("input", help="directory of clean tables")
    pt.add_argument("-o", "--out", required=True)
    pt.add_argument("--seed", type=int, default=0)
    pt.add_argument("--per-table", type=int, default=5)
    pt.add_argument("--mix", help="e.g. Easy=0.44,Medium=0.34,Hard=0.22")
    pt.add_argument("--kinds", help="comma-separated subset of perturbation kinds")
    pt.add_argument("--format", choices=("csv", "markdown", "json"))
    pt.set_defaults(func=cmd_perturb)

    def bench_flags(sp) -> None:
        sp.add_argument("bench", nargs="?", help="benchmark directory with manifest.json")
        sp.add_argument("--from-reports", help="re-use report documents instead of re-evaluating")
        sp.add_argument("--rankings", help="JSON rankings (group -> case ids, best first)")
        sp.add_argument("--rbo-p", type=float, default=0.9)
        sp.add_argument("--jobs", type=int, default=1)
        sp.add_argument("--seed", type=int, default=0, help="accepted for symmetry; scoring is deterministic")
        weight_flag(sp)

    b = sub.add_parser("bench", help="score a benchmark and summarize detection/correlation")
    bench_flags(b)
    b.add_argument("-o", "--out", required=True, help="output directory for CSV files")
    b.add_argument("--write-reports", action="store_true")
    b.set_defaults(func=cmd_bench)

    s = sub.add_parser("sweep", help="rescore a benchmark under the 64 weight toggles")
    bench_flags(s)
    s.add_argument("--low", nargs="+", default=["0", "0.25"])
    s.add_argument("-o", "--out")
    s.set_defaults(func=cmd_sweep)

    a = sub.add_parser("aggregate", help="mean per-type and row/column statistics over reports")
    a.add_argument("reports", nargs="+")
    a.add_argument("-o", "--out", help="directory for CSV output (JSON to stdout otherwise)")
    a.set_defaults(func=cmd_aggregate)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, ManifestError, TableError, OSError) as e:
        log.error("%s", e)
        return EXIT_INPUT
    except ProviderError as e:
        log.error("provider error: %s", e)
        return EXIT_PROVIDER


if __name__ == "__main__":
    sys.exit(main())
