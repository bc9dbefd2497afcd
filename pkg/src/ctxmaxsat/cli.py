"""Experiment driver: ``ctxmaxsat {generate,learn,evaluate,encode-milp,trends}``.

Settings come from three layers: built-in defaults, an optional YAML config
(``--config``), and command-line flags, later layers winning. Exit codes are
0 on success, 1 for invalid input, 2 for runtime failures and 3 when an
external MILP solver fails.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from ctxmaxsat import __version__, kernels
from ctxmaxsat.core import (
    TOP,
    ContextualExample,
    Dataset,
    ParseError,
    StructureError,
    deserialize_dataset,
    deserialize_model,
    serialize_dataset,
    serialize_model,
)
from ctxmaxsat.datagen import GenerationError, GenSpec, generate
from ctxmaxsat.metrics import report
from ctxmaxsat.milp import (
    ExternalSolverError,
    build_encoding,
    detect_mismatch,
    emit_lp,
    learn_milp,
    solve_external,
)
from ctxmaxsat.sls import SlsConfig, learn, score
from ctxmaxsat.solver import CapacityError

log = logging.getLogger("ctxmaxsat")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_SOLVER = 0, 1, 2, 3

EVAL_COLUMNS = ["seed", "n", "m_hard", "m_soft", "contexts", "strategy", "cutoff", "score",
                "accuracy", "infeasibility", "regret", "elapsed"]
TREND_COLUMNS = ["suite", "level", "seed", "n", "m", "examples", "score", "score_fraction",
                 "accuracy", "infeasibility", "regret", "steps", "elapsed"]
SUMMARY_COLUMNS = ["suite", "level", "runs", "score_fraction_mean", "score_fraction_std",
                   "accuracy_mean", "accuracy_std", "infeasibility_mean", "infeasibility_std",
                   "regret_mean", "regret_std"]

# desk-scale suite levels: (label, overrides of the generation section)
SUITES: dict[str, list[tuple[str, dict]]] = {
    "neg-type": [("infeasible", {"neg_split": 1.0}),
                 ("sub-optimal", {"neg_split": 0.0}),
                 ("both", {"neg_split": 0.5})],
    "noise": [(str(p), {"noise_p": p}) for p in (0.0, 0.05, 0.1, 0.2)],
    "context-ablation": [("with-context", {}), ("without-context", {})],
    "scaling": [(f"n={n}", {"n": n}) for n in (6, 8, 10)],
}
SUITE_DEFAULTS = {"n": 8, "m_hard": 5, "m_soft": 5, "context_count": 50}


class ConfigError(ValueError):
    pass


def code_identity() -> str:
    return f"ctxmaxsat {__version__} kernels={kernels.BACKEND}"


# ---------------------------------------------------------------------------
# configuration


@dataclass
class LearnerSettings:
    kind: str = "sls"
    m: int | None = None
    max_clause_len: int | None = None
    strategy: str = "walksat"
    cutoff_time: float = 60.0
    cutoff_score: int | None = None
    max_steps: int | None = None
    restart_probability: float = 0.01
    walk_probability: float = 0.1
    seed: int = 0

    def sls_config(self) -> SlsConfig:
        return SlsConfig(strategy=self.strategy, restart_probability=self.restart_probability,
                         walk_probability=self.walk_probability, cutoff_score=self.cutoff_score,
                         cutoff_time=self.cutoff_time, max_steps=self.max_steps, seed=self.seed)


@dataclass
class MilpSettings:
    backend: str = "auto"
    max_rounds: int = 3
    command: str | None = None
    timeout: float | None = None


@dataclass
class MetricSettings:
    regret_samples: int = 1000
    r_max: float | None = None


@dataclass
class ExperimentConfig:
    generation: GenSpec = field(default_factory=GenSpec)
    learner: LearnerSettings = field(default_factory=LearnerSettings)
    milp: MilpSettings = field(default_factory=MilpSettings)
    metrics: MetricSettings = field(default_factory=MetricSettings)
    output: str = "out"
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])

    def to_dict(self) -> dict:
        """Everything that determines results; the output location is left out."""
        doc = dataclasses.asdict(self)
        doc.pop("output")
        return doc

    def digest(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


_SECTIONS = {"generation": GenSpec, "learner": LearnerSettings, "milp": MilpSettings,
             "metrics": MetricSettings}


def _section(cls, values: dict, where: str):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    try:
        return cls(**values)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"{where}: {err}") from None


def load_config(path: str | Path | None, overrides: dict[str, dict] | None = None,
                base: dict[str, dict] | None = None) -> ExperimentConfig:
    """Defaults, then ``base``, then the YAML document at ``path``, then ``overrides``."""
    doc: dict[str, Any] = {}
    if path is not None:
        try:
            doc = yaml.safe_load(Path(path).read_text()) or {}
        except yaml.YAMLError as err:
            raise ConfigError(f"{path}: {err}") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: config must be a mapping")
    unknown = sorted(set(doc) - set(_SECTIONS) - {"output", "seeds"})
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
    merged: dict[str, Any] = {}
    for name in _SECTIONS:
        sec = dict((base or {}).get(name, {}))
        got = doc.get(name) or {}
        if not isinstance(got, dict):
            raise ConfigError(f"section {name} must be a mapping")
        sec.update(got)
        sec.update({k: v for k, v in (overrides or {}).get(name, {}).items() if v is not None})
        merged[name] = _section(_SECTIONS[name], sec, name)
    top = {k: v for k, v in (overrides or {}).get("top", {}).items() if v is not None}
    output = top.get("output", doc.get("output", "out"))
    seeds = top.get("seeds", doc.get("seeds", [0, 1, 2, 3, 4]))
    if not isinstance(seeds, list) or not all(isinstance(s, int) for s in seeds):
        raise ConfigError("seeds must be a list of integers")
    return ExperimentConfig(merged["generation"], merged["learner"], merged["milp"],
                            merged["metrics"], str(output), seeds)


# ---------------------------------------------------------------------------
# file helpers


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _read_model(path: str):
    return deserialize_model(Path(path).read_text())


def _read_dataset(path: str) -> Dataset:
    return deserialize_dataset(Path(path).read_text())


def _manifest(cfg: ExperimentConfig, command: str, seed: int, **extra) -> str:
    doc = {"command": command, "code": code_identity(), "config_digest": cfg.digest(),
           "config": cfg.to_dict(), "seed": seed, **extra}
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def append_rows(path: Path, columns: list[str], rows: list[dict]) -> None:
    """Append rows, writing the header only when the file is new or empty."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fresh = not path.exists() or path.stat().st_size == 0
    with path.open("a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
        if fresh:
            w.writeheader()
        w.writerows(rows)


def _fmt(x: Any) -> Any:
    if isinstance(x, float):
        return format(x, ".6g")
    return "" if x is None else x


# ---------------------------------------------------------------------------
# generate


def cmd_generate(args, cfg: ExperimentConfig) -> int:
    spec = cfg.generation
    truth, data = generate(spec, jobs=args.jobs)
    out = Path(cfg.output)
    _write(out / "truth.json", serialize_model(truth))
    _write(out / "data.jsonl", serialize_dataset(data))
    _write(out / "manifest.json", _manifest(cfg, "generate", spec.seed,
                                            examples=len(data), contexts=len(data.contexts())))
    kinds: dict[str, int] = {}
    for ex in data.examples:
        kinds[ex.kind or "unknown"] = kinds.get(ex.kind or "unknown", 0) + 1
    per_ctx = {len([e for e in data.examples if e.context == c]) for c in data.contexts()}
    print(f"wrote {len(data)} examples in {len(data.contexts())} contexts to {out}")
    print(f"examples per context: {sorted(per_ctx)}")
    print("kinds: " + ", ".join(f"{k}={v}" for k, v in sorted(kinds.items())))
    if data.metadata.get("flags"):
        print(f"fallback flags in {len(data.metadata['flags'])} context(s)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# learn


def _resolve_m(cfg: ExperimentConfig, data: Dataset) -> int:
    if cfg.learner.m is not None:
        return cfg.learner.m
    spec = data.metadata.get("spec")
    if isinstance(spec, dict) and "m_hard" in spec and "m_soft" in spec:
        return int(spec["m_hard"]) + int(spec["m_soft"])
    raise ConfigError("number of clauses unknown: pass --m or set learner.m")


def cmd_learn(args, cfg: ExperimentConfig) -> int:
    data = _read_dataset(args.dataset)
    m = _resolve_m(cfg, data)
    out = Path(cfg.output)
    ls = cfg.learner
    if ls.kind == "milp":
        res = _run_milp(data, m, cfg)
        if res.model is None:
            print("MILP encoding infeasible; no model written", file=sys.stderr)
            return EXIT_RUNTIME
        _write(out / "model.json", serialize_model(res.model))
        final = score(res.model, data)
        _write(out / "manifest.json", _manifest(
            cfg, "learn", ls.seed, learner="milp", m=m, score=final, examples=len(data),
            rounds=res.rounds, status=res.status, perfect=final == len(data)))
        print(f"milp: score {final}/{len(data)} after {res.rounds} refinement round(s)")
        return EXIT_OK
    res = learn(data, m, ls.max_clause_len, ls.sls_config())
    timing = not args.no_timing
    lines = ["step,elapsed_ms,score,best_score,wp"]
    for r in res.trace:
        ms = format(r.elapsed_ms, ".3f") if timing else "0"
        lines.append(f"{r.step},{ms},{r.current_score},{r.best_score},{r.wp:.6g}")
    _write(out / "model.json", serialize_model(res.model))
    _write(out / "trace.csv", "\n".join(lines) + "\n")
    _write(out / "manifest.json", _manifest(
        cfg, "learn", ls.seed, learner="sls", strategy=ls.strategy, m=m, score=res.score,
        examples=len(data), steps=res.steps, restarts=res.restarts, stopped=res.stopped,
        perfect=res.score == len(data), fallbacks=res.fallbacks,
        elapsed=round(res.elapsed, 3) if timing else 0.0))
    print(f"{ls.strategy}: score {res.score}/{len(data)} in {res.steps} steps ({res.stopped})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# evaluate


def cmd_evaluate(args, cfg: ExperimentConfig) -> int:
    learned = _read_model(args.learned)
    truth = _read_model(args.truth)
    if learned.n != truth.n:
        raise ConfigError(f"n mismatch: learned n={learned.n}, truth n={truth.n}")
    data = _read_dataset(args.dataset) if args.dataset else None
    if data is not None and data.n != truth.n:
        raise ConfigError(f"n mismatch: dataset n={data.n}, truth n={truth.n}")
    manifest: dict = {}
    mpath = Path(args.manifest) if args.manifest else Path(args.learned).parent / "manifest.json"
    if mpath.exists():
        manifest = json.loads(mpath.read_text())
    seed = args.seed if args.seed is not None else manifest.get("seed", 0)
    rep = report(learned, truth, data, cfg.metrics.regret_samples, seed)
    spec = (data.metadata.get("spec") if data is not None else None) or {}
    learner = manifest.get("config", {}).get("learner", {})
    row = {
        "seed": seed, "n": truth.n,
        "m_hard": spec.get("m_hard", sum(truth.hard)),
        "m_soft": spec.get("m_soft", truth.m - sum(truth.hard)),
        "contexts": len(data.contexts()) if data is not None else "",
        "strategy": manifest.get("strategy", manifest.get("learner", "")),
        "cutoff": learner.get("cutoff_time", ""),
        "score": rep.training_score_fraction, "accuracy": rep.global_accuracy,
        "infeasibility": rep.infeasibility, "regret": rep.regret_mean,
        "elapsed": manifest.get("elapsed", ""),
    }
    append_rows(Path(args.csv), EVAL_COLUMNS, [{k: _fmt(v) for k, v in row.items()}])
    print(", ".join(f"{k}={_fmt(row[k])}" for k in ("score", "accuracy", "infeasibility",
                                                   "regret")))
    for f in rep.flags:
        print(f"flag: {f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# encode-milp


def _run_milp(data: Dataset, m: int, cfg: ExperimentConfig):
    ms = cfg.milp
    if ms.command:
        def backend(problem):
            return solve_external(problem, ms.command, timeout=ms.timeout)
        return learn_milp(data, m, backend, ms.max_rounds)
    return learn_milp(data, m, ms.backend, ms.max_rounds)


def _violation_doc(v) -> dict:
    return {"context": v.context.to_ints(), "x_prime": list(v.x_prime.bits),
            "x_plus": list(v.x_plus.bits), "example": v.example}


def cmd_encode_milp(args, cfg: ExperimentConfig) -> int:
    data = _read_dataset(args.dataset)
    m = _resolve_m(cfg, data)
    problem = build_encoding(data, m)
    _write(Path(args.out), emit_lp(problem))
    sizes = problem.family_sizes()
    print(f"wrote {args.out}: {len(problem.variables)} variables, "
          f"{len(problem.constraints)} constraints in {len(sizes)} families")
    stem = Path(args.out).with_suffix("")
    if args.check:
        found = detect_mismatch(_read_model(args.check), data)
        doc = {"model": args.check, "mismatches": [_violation_doc(v) for v in found]}
        _write(Path(f"{stem}.check.json"), json.dumps(doc, indent=1) + "\n")
        for v in found:
            print(f"mismatch in context {v.context!r}: x'={v.x_prime!r} beats x+={v.x_plus!r}")
    if not (cfg.milp.command or args.solve):
        return EXIT_OK
    res = _run_milp(data, m, cfg)
    if res.model is None:
        print("MILP encoding infeasible", file=sys.stderr)
        return EXIT_RUNTIME
    _write(Path(f"{stem}.model.json"), serialize_model(res.model))
    mismatch = [{"round": r, **_violation_doc(v)}
                for r, found in enumerate(res.violations) for v in found]
    doc = {"status": res.status, "rounds": res.rounds, "score": score(res.model, data),
           "examples": len(data), "mismatches": mismatch}
    _write(Path(f"{stem}.report.json"), json.dumps(doc, indent=1) + "\n")
    print(f"{res.status}: score {doc['score']}/{len(data)}, {len(mismatch)} mismatch record(s)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# trends


def strip_contexts(data: Dataset) -> Dataset:
    exs = [ContextualExample(TOP, ex.assignment, ex.label, ex.kind) for ex in data.examples]
    return data.with_examples(exs, contexts_stripped=True)


def run_trial(task: tuple) -> dict:
    """One (suite, level, seed) repetition; module-level so worker processes can run it."""
    suite, level, seed, gen, learner, regret_samples, timing = task
    spec = GenSpec(**{**gen, "seed": seed})
    truth, data = generate(spec)
    train = strip_contexts(data) if level == "without-context" else data
    ls = LearnerSettings(**{**learner, "seed": seed})
    m = ls.m if ls.m is not None else spec.m_hard + spec.m_soft
    res = learn(train, m, ls.max_clause_len, ls.sls_config())
    rep = report(res.model, truth, data, regret_samples, seed)
    return {"suite": suite, "level": level, "seed": seed, "n": spec.n, "m": m,
            "examples": len(data), "score": score(res.model, data),
            "score_fraction": rep.training_score_fraction, "accuracy": rep.global_accuracy,
            "infeasibility": rep.infeasibility, "regret": rep.regret_mean, "steps": res.steps,
            "elapsed": res.elapsed if timing else 0.0}


def summarize(rows: list[dict]) -> list[dict]:
    out = []
    levels = list(dict.fromkeys((r["suite"], r["level"]) for r in rows))
    for suite, level in levels:
        grp = [r for r in rows if r["suite"] == suite and r["level"] == level]
        agg = {"suite": suite, "level": level, "runs": len(grp)}
        for key in ("score_fraction", "accuracy", "infeasibility", "regret"):
            vals = np.array([r[key] for r in grp if r[key] is not None], dtype=float)
            agg[f"{key}_mean"] = float(vals.mean()) if len(vals) else None
            agg[f"{key}_std"] = float(vals.std()) if len(vals) else None
        out.append(agg)
    return out


def run_suite(suite: str, cfg: ExperimentConfig, jobs: int = 1,
              timing: bool = True) -> tuple[list[dict], list[dict]]:
    if suite not in SUITES:
        raise ConfigError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")
    gen = cfg.generation.to_dict()
    gen.pop("seed")
    learner = dataclasses.asdict(cfg.learner)
    tasks = [(suite, label, seed, {**gen, **over}, learner, cfg.metrics.regret_samples, timing)
             for label, over in SUITES[suite] for seed in cfg.seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run_trial, tasks))
    else:
        rows = [run_trial(t) for t in tasks]
    return rows, summarize(rows)


def cmd_trends(args, cfg: ExperimentConfig) -> int:
    rows, summary = run_suite(args.suite, cfg, args.jobs, not args.no_timing)
    out = Path(cfg.output)
    append_rows(out / f"{args.suite}.csv", TREND_COLUMNS,
                [{k: _fmt(v) for k, v in r.items()} for r in rows])
    append_rows(out / f"{args.suite}-summary.csv", SUMMARY_COLUMNS,
                [{k: _fmt(v) for k, v in r.items()} for r in summary])
    _write(out / f"{args.suite}-manifest.json", _manifest(cfg, f"trends {args.suite}", cfg.seeds[0]
                                                          if cfg.seeds else 0, seeds=cfg.seeds))
    for agg in summary:
        print(f"{agg['level']:>16}  score {agg['score_fraction_mean']:.3f}  "
              f"accuracy {agg['accuracy_mean']:.3f}  runs {agg['runs']}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ctxmaxsat", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=code_identity())
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp, out_default=True):
        sp.add_argument("--config", help="YAML experiment config")
        if out_default:
            sp.add_argument("--out", dest="output", help="output directory")

    def generation(sp):
        sp.add_argument("--n", type=int)
        sp.add_argument("--m-hard", type=int)
        sp.add_argument("--m-soft", type=int)
        sp.add_argument("--contexts", dest="context_count", type=int)
        sp.add_argument("--context-len", type=int)
        sp.add_argument("--pos", dest="pos_per_context", type=int)
        sp.add_argument("--neg", dest="neg_per_context", type=int)

    g = sub.add_parser("generate", help="sample a ground-truth model and dataset")
    common(g)
    generation(g)
    g.add_argument("--seed", type=int)
    g.add_argument("--neg-split", type=float, help="fraction of negatives that are infeasible")
    g.add_argument("--noise", dest="noise_p", type=float)
    g.add_argument("--jobs", type=int, default=1)

    lr = sub.add_parser("learn", help="learn a model from a dataset")
    common(lr)
    lr.add_argument("dataset")
    lr.add_argument("--learner", dest="kind", choices=["sls", "milp"])
    lr.add_argument("--m", type=int)
    lr.add_argument("--strategy", choices=["walksat", "novelty", "novelty+", "adaptive-novelty+"])
    lr.add_argument("--cutoff-time", type=float)
    lr.add_argument("--cutoff-score", type=int)
    lr.add_argument("--max-steps", type=int, help="step budget; makes runs reproducible")
    lr.add_argument("--seed", type=int)
    lr.add_argument("--no-timing", action="store_true", help="zero all wall-clock fields")

    ev = sub.add_parser("evaluate", help="append an evaluation row to a CSV file")
    common(ev, out_default=False)
    ev.add_argument("learned")
    ev.add_argument("truth")
    ev.add_argument("--dataset")
    ev.add_argument("--manifest", help="learn manifest (default: next to the learned model)")
    ev.add_argument("--csv", default="results.csv")
    ev.add_argument("--seed", type=int)
    ev.add_argument("--regret-samples", type=int)

    em = sub.add_parser("encode-milp", help="write the MILP encoding, optionally solve it")
    common(em, out_default=False)
    em.add_argument("dataset")
    em.add_argument("--m", type=int)
    em.add_argument("--out", required=True, help="LP file path")
    em.add_argument("--solver-cmd", dest="command",
                    help="command template with {lp} and {solution} placeholders")
    em.add_argument("--solve", action="store_true", help="solve with a built-in backend")
    em.add_argument("--backend", choices=["auto", "exhaustive", "highs"])
    em.add_argument("--max-rounds", type=int)
    em.add_argument("--check", metavar="MODEL", help="report mismatches of an existing model")

    tr = sub.add_parser("trends", help="run a desk-scale experiment suite")
    common(tr)
    tr.add_argument("suite", choices=sorted(SUITES))
    generation(tr)
    tr.add_argument("--seeds", type=int, nargs="+")
    tr.add_argument("--cutoff-time", type=float)
    tr.add_argument("--max-steps", type=int)
    tr.add_argument("--strategy", choices=["walksat", "novelty", "novelty+", "adaptive-novelty+"])
    tr.add_argument("--jobs", type=int, default=1)
    tr.add_argument("--no-timing", action="store_true")
    return p


def _overrides(args) -> dict[str, dict]:
    a = vars(args)
    pick = lambda cls: {f.name: a[f.name] for f in dataclasses.fields(cls) if f.name in a}
    ov = {"generation": pick(GenSpec), "learner": pick(LearnerSettings),
          "milp": pick(MilpSettings), "metrics": pick(MetricSettings),
          "top": {"output": a.get("output"), "seeds": a.get("seeds")}}
    if args.cmd == "encode-milp":
        ov["top"]["output"] = None  # --out names the LP file here
    return ov


COMMANDS = {"generate": cmd_generate, "learn": cmd_learn, "evaluate": cmd_evaluate,
            "encode-milp": cmd_encode_milp, "trends": cmd_trends}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        base = {"generation": SUITE_DEFAULTS} if args.cmd == "trends" else None
        cfg = load_config(args.config, _overrides(args), base)
        return COMMANDS[args.cmd](args, cfg)
    except ExternalSolverError as err:
        print(f"error: {err}", file=sys.stderr)
        if err.output:
            print(err.output, file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, ParseError, StructureError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except (GenerationError, CapacityError, OSError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
