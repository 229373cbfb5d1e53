"""Command-line pipeline: ingest -> perturb -> evaluate -> report.

Stages talk through files so each one can be rerun on its own.  Exit codes:
0 success, 1 usage error, 2 data error, 3 adapter protocol error.

Environment overrides: CRSADV_KB, CRSADV_LEXICON, CRSADV_OUT_DIR.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .adapter import PROTOCOL_VERSION, AdapterError, RecommendRequest, parse_adapter_spec, run_requests
from .corpus import CORPUS_SCHEMA, LOADERS, CorpusError, dump_corpus, extract_instances, load_corpus, split
from .knowledge import KBError, load_kb
from .lexicon import LexiconError, bundled_lexicon, load_lexicon
from .metrics import DEFAULT_CUTOFFS, failed_score, read_scores_csv, score, write_scores_csv
from .perturb import CAT2_MODES, PERTURBED_SCHEMA, SCENARIOS, dump_perturbed, load_perturbed, normalize_scenario, perturb_corpus
from .report import (DEFAULT_SHIFT_THRESHOLD, DEFAULT_TOLERANCE, REPORT_SCHEMA, UnpairedInstances,
                     compare, render)

logger = logging.getLogger("crsadv")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_ADAPTER = 0, 1, 2, 3
SCHEMAS = {
    "corpus": CORPUS_SCHEMA,
    "perturbed": PERTURBED_SCHEMA,
    "scores": 1,
    "report": REPORT_SCHEMA,
    "lexicon": 1,
    "kb": 1,
    "adapter-protocol": PROTOCOL_VERSION,
}


class UsageError(Exception):
    pass


class AdapterFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _env(name, default=None):
    return os.environ.get(name) or default


def _cutoffs(text: str) -> list[int]:
    try:
        values = sorted({int(x) for x in text.split(",") if x.strip()})
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad cutoff list {text!r}") from None
    if not values or values[0] < 1:
        raise argparse.ArgumentTypeError("cutoffs must be positive integers")
    return values


def _scenario_list(name: str) -> list[str]:
    if name == "all":
        return list(SCENARIOS)
    try:
        return [normalize_scenario(name)]
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _lexicon(args):
    path = args.lexicon or _env("CRSADV_LEXICON")
    return load_lexicon(path) if path else bundled_lexicon()


def _kb(args):
    path = args.kb or _env("CRSADV_KB")
    return load_kb(path) if path else None


def _out_dir(args) -> Path:
    out = Path(args.out_dir or _env("CRSADV_OUT_DIR", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- commands ------------------------------------------------------------------

def cmd_ingest(args) -> int:
    kb = _kb(args)
    dialogues = LOADERS[args.format](args.input, kb)
    dump_corpus(dialogues, args.out)
    n_turns = sum(len(d.turns) for d in dialogues)
    print(f"wrote {len(dialogues)} dialogues ({n_turns} utterances) to {args.out}")
    return EXIT_OK


def _instances(args):
    instances = extract_instances(load_corpus(args.corpus), last_only=args.last_only)
    if getattr(args, "split", "all") != "all":
        assign = split(instances, args.split_seed)
        instances = [i for i in instances if assign[i.instance_id] == args.split]
    return instances


def cmd_perturb(args) -> int:
    scenarios = _scenario_list(args.scenario)
    kb = _kb(args)
    if "cat1_add" in scenarios and kb is None:
        raise UsageError("cat1-add needs --kb (or CRSADV_KB)")
    lexicon = _lexicon(args)
    instances = _instances(args)
    out = _out_dir(args)
    for scenario in scenarios:
        results = perturb_corpus(instances, scenario, lexicon, kb, args.seed, args.cat2_mode,
                                 max_replacements=args.max_replacements)
        path = out / f"perturbed_{scenario}.jsonl"
        dump_perturbed(results, path, scenario, args.seed, cat2_mode=args.cat2_mode,
                       last_only=args.last_only, split=args.split)
        skipped = sum(r.skipped for r in results)
        print(f"{scenario}: {len(results)} instances ({skipped} skipped) -> {path}")
    return EXIT_OK


def _request(inst, answer_text, k):
    context = [{"speaker": t.speaker, "text": t.text}
               for i, t in enumerate(inst.context) if i != inst.answer_index]
    return RecommendRequest(inst.instance_id, context, answer_text, k)


def _score_all(pairs, factory, workers, cutoffs):
    """pairs: list of (instance, answer text or None when skipped)."""
    k = max(cutoffs)
    requests = [_request(inst, text, k) for inst, text in pairs if text is not None]
    results = run_requests(requests, factory, workers)
    scores = []
    for inst, text in pairs:
        if text is None:
            scores.append(failed_score(inst.instance_id, "skipped"))
            continue
        res = results[inst.instance_id]
        if isinstance(res, AdapterError):
            scores.append(failed_score(inst.instance_id))
        else:
            scores.append(score(inst.truth, res, cutoffs, inst.instance_id))
    return scores


def cmd_evaluate(args) -> int:
    kb = _kb(args)
    try:
        factory = parse_adapter_spec(args.adapter, kb, args.timeout)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = _out_dir(args)
    cutoffs = args.cutoffs
    runs = [("original", [(inst, inst.answer.text) for inst in _instances(args)])]
    for path in args.perturbed:
        header, results = load_perturbed(path)
        runs.append((header["scenario"],
                     [(r.base, None if r.skipped else r.answer_adv) for r in results]))
    total = failed = 0
    for name, pairs in runs:
        scores = _score_all(pairs, factory, args.workers, cutoffs)
        dest = out / f"scores_{name}.csv"
        write_scores_csv(scores, dest, cutoffs)
        n_failed = sum(s.failed for s in scores)
        total += sum(s.status != "skipped" for s in scores)
        failed += n_failed
        print(f"{name}: {len(scores)} instances, {n_failed} failed -> {dest}")
    if failed:
        print(f"warning: {failed} of {total} adapter requests failed", file=sys.stderr)
        if failed == total:
            raise AdapterFailure("every adapter request failed")
    return EXIT_OK


def cmd_report(args) -> int:
    src = Path(args.scores_dir or args.out_dir or _env("CRSADV_OUT_DIR", "."))
    original_path = src / "scores_original.csv"
    if not original_path.exists():
        raise FileNotFoundError(f"{original_path} not found")
    original, cutoffs = read_scores_csv(original_path)
    reports = []
    for scenario in SCENARIOS:
        path = src / f"scores_{scenario}.csv"
        if not path.exists():
            continue
        adversarial, _ = read_scores_csv(path)
        reports.append(compare(original, adversarial, scenario, cutoffs,
                               args.tolerance, args.shift_threshold))
    if not reports:
        raise FileNotFoundError(f"no scores_<scenario>.csv files in {src}")
    out = _out_dir(args)
    for fmt, name in (("json", "report.json"), ("csv", "report.csv"), ("markdown", "report.md")):
        (out / name).write_text(render(reports, fmt), encoding="utf-8")
    print(render(reports, "markdown"))
    return EXIT_OK


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="crsadv", description="Adversarial robustness benchmark for conversational recommenders")
    p.add_argument("--version", action="store_true", help="print tool and file-format versions")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    ing = sub.add_parser("ingest", help="normalize a REDIAL or OpenDialKG export")
    ing.add_argument("input")
    ing.add_argument("--format", required=True, choices=sorted(LOADERS))
    ing.add_argument("--out", required=True)
    ing.add_argument("--kb", help="knowledge base JSON; drops ground truth outside it")
    ing.set_defaults(func=cmd_ingest)

    def instance_opts(sp):
        sp.add_argument("--corpus", required=True, help="normalized corpus (JSON lines)")
        sp.add_argument("--last-only", action="store_true",
                        help="only the last recommendation turn of each dialogue")
        sp.add_argument("--split", default="all", choices=["all", "train", "valid", "test"])
        sp.add_argument("--split-seed", type=int, default=0)
        sp.add_argument("--kb")
        sp.add_argument("--out-dir")

    per = sub.add_parser("perturb", help="write adversarial answers for one or all scenarios")
    instance_opts(per)
    per.add_argument("--scenario", required=True,
                     help="cat1-change | cat1-add | cat2-change | cat2-add | all")
    per.add_argument("--seed", type=int, default=0)
    per.add_argument("--lexicon")
    per.add_argument("--cat2-mode", default="auto", choices=CAT2_MODES)
    per.add_argument("--max-replacements", type=int, default=None,
                     help="cap on cat1-change substitutions per answer (default: all)")
    per.set_defaults(func=cmd_perturb)

    ev = sub.add_parser("evaluate", help="score a recommender on original and perturbed answers")
    instance_opts(ev)
    ev.add_argument("--perturbed", nargs="*", default=[], help="perturbed_<scenario>.jsonl files")
    ev.add_argument("--adapter", default="builtin", help='builtin | cmd:"<command>" | http:<url>')
    ev.add_argument("--cutoffs", type=_cutoffs, default=list(DEFAULT_CUTOFFS))
    ev.add_argument("--workers", type=int, default=1)
    ev.add_argument("--timeout", type=float, default=30.0)
    ev.set_defaults(func=cmd_evaluate)

    rep = sub.add_parser("report", help="compare score files and write report.{json,csv,md}")
    rep.add_argument("--scores-dir")
    rep.add_argument("--out-dir")
    rep.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE)
    rep.add_argument("--shift-threshold", type=float, default=DEFAULT_SHIFT_THRESHOLD)
    rep.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.version:
        print(f"crsadv {__version__}")
        for name, version in SCHEMAS.items():
            print(f"{name} {version}")
        return EXIT_OK
    if not args.command:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    if getattr(args, "workers", 1) < 1:
        parser.error("--workers must be >= 1")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"crsadv: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AdapterFailure as exc:
        print(f"crsadv: adapter error: {exc}", file=sys.stderr)
        return EXIT_ADAPTER
    except UnpairedInstances as exc:
        print(f"crsadv: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (CorpusError, KBError, LexiconError, OSError, ValueError, KeyError) as exc:
        print(f"crsadv: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
