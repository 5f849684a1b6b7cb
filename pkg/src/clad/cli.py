"""Command-line experiment driver.

    clad run      --scenario synthetic --out runs/syn
    clad stage    extract --scenario mnist:CUR --out runs/cur
    clad ablate   --scenario mnist:CUR --grid grid.json --out runs/ablate
    clad report   runs/cur

Configuration precedence, lowest to highest: the preset named by ``--scenario``
(or by a ``"preset"`` key in the config file; ``synthetic`` when neither is
given), the JSON file passed with ``--config``, then the individual flags.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .config import STAGES, ExperimentConfig, preset_for
from .detector import read_scores_csv, write_scores_csv
from .evaluation import (
    ABLATION_COLUMNS, AblationRow, EvaluationReport, ScoredTestSet, ablation_sweep, auroc, evaluate,
    one_class_baseline,
)
from .pipeline import (
    StageError, effective_config, load_scenario, scenario_spec, stage_classify, stage_cluster,
    stage_extract, stage_score,
)
from .selflabel import PseudoLabels
from .store import (
    load_autoencoder, load_classifier, load_refined, save_autoencoder, save_classifier,
    save_refined,
)

logger = logging.getLogger("clad")

AUTOENCODER = "autoencoder.npz"
CLUSTERS = "clusters.npz"
PSEUDO_LABELS = "pseudo_labels.csv"
CLASSIFIER = "classifier.npz"
SCORES = "scores.csv"
BASELINE = "baseline_scores.csv"
REPORT = "report.json"
CONFIG = "config.json"
TIMINGS = "timings.json"

UPSTREAM = {
    "extract": (),
    "cluster": (AUTOENCODER,),
    "classify": (CLUSTERS, PSEUDO_LABELS),
    "score": (CLASSIFIER,),
    "evaluate": (SCORES,),
}

DEFAULT_CLUSTER_COUNTS = tuple(range(2, 21, 2))
DEFAULT_HIDDEN_DIMS = tuple(range(10, 101, 10))


# -- configuration -------------------------------------------------------------------

def resolve_config(scenario=None, config_path=None, seed=None, out=None, clusters=None,
                   hidden_dim=None, temperature=None, epsilon=None) -> ExperimentConfig:
    data = {}
    if config_path is not None:
        with open(config_path) as fh:
            data = json.load(fh)
    preset = data.pop("preset", None)
    cfg = preset_for(scenario or preset or "synthetic")
    cfg = ExperimentConfig.from_dict(data, base=cfg)
    return cfg.with_overrides(n_clusters=clusters, hidden_dim=hidden_dim, temperature=temperature,
                              epsilon=epsilon, seed=seed, out_dir=out)


# -- stages ---------------------------------------------------------------------------

class _Context:
    """Per-invocation cache so chained stages load the scenario once."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.out = Path(cfg.out_dir)
        self._scenario = None

    @property
    def scenario(self):
        if self._scenario is None:
            self._scenario, _ = load_scenario(self.cfg.scenario, self.cfg.seed)
        return self._scenario

    def path(self, name) -> Path:
        return self.out / name


def _record_timing(ctx: _Context, stage: str, seconds: float) -> dict:
    path = ctx.path(TIMINGS)
    timings = json.loads(path.read_text()) if path.exists() else {}
    timings[stage] = seconds
    path.write_text(json.dumps(timings, indent=2, sort_keys=True) + "\n")
    return timings


def _write_baseline(path, evidence, labels) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_index", "evidence", "true_binary_label"])
        for i, (a, y) in enumerate(zip(evidence, labels)):
            w.writerow([i, repr(float(a)), int(y)])


def _read_baseline(path) -> ScoredTestSet:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return ScoredTestSet(np.array([float(r["evidence"]) for r in rows]),
                         np.array([int(r["true_binary_label"]) for r in rows]))


def _composition(labels, n_train=None) -> dict:
    n = int(labels.size)
    n_abnormal = int(labels.sum())
    comp = {"n_test": n, "n_test_normal": n - n_abnormal, "n_test_abnormal": n_abnormal,
            "abnormal_ratio": n_abnormal / n if n else 0.0}
    if n_train is not None:
        comp["n_train"] = n_train
    return comp


def _do_stage(ctx: _Context, stage: str) -> Path:
    cfg = ctx.cfg
    if stage == "extract":
        ae = stage_extract(ctx.scenario, cfg)
        save_autoencoder(ctx.path(AUTOENCODER), ae)
        return ctx.path(AUTOENCODER)
    if stage == "cluster":
        ae = load_autoencoder(ctx.path(AUTOENCODER))
        refined, labels = stage_cluster(ctx.scenario, ae, cfg)
        save_refined(ctx.path(CLUSTERS), refined)
        labels.to_csv(ctx.path(PSEUDO_LABELS))
        logger.info("pseudo-label counts %s", labels.counts().tolist())
        return ctx.path(CLUSTERS)
    if stage == "classify":
        refined = load_refined(ctx.path(CLUSTERS))
        labels = PseudoLabels.from_csv(ctx.path(PSEUDO_LABELS), refined.clusters.n_clusters)
        clf = stage_classify(ctx.scenario, labels, refined.autoencoder, cfg)
        save_classifier(ctx.path(CLASSIFIER), clf)
        return ctx.path(CLASSIFIER)
    if stage == "score":
        clf = load_classifier(ctx.path(CLASSIFIER))
        sc = ctx.scenario
        write_scores_csv(ctx.path(SCORES), stage_score(sc, clf, cfg), sc.y_test)
        if ctx.path(AUTOENCODER).exists():
            ae = load_autoencoder(ctx.path(AUTOENCODER))
            base = one_class_baseline(ae, sc.x_train, sc.x_test, sc.y_test)
            _write_baseline(ctx.path(BASELINE), base.evidence, base.labels)
        return ctx.path(SCORES)
    if stage == "evaluate":
        scores, labels = read_scores_csv(ctx.path(SCORES))
        scored = ScoredTestSet.from_scores(scores, labels)
        extra = {"scenario": scenario_spec(cfg.scenario).to_dict(), "n_labels": None}
        n_train = None
        if ctx.path(PSEUDO_LABELS).exists() and ctx.path(CLUSTERS).exists():
            k = load_refined(ctx.path(CLUSTERS)).clusters.n_clusters
            pl = PseudoLabels.from_csv(ctx.path(PSEUDO_LABELS), k)
            extra["n_labels"] = k
            extra["pseudo_label_counts"] = pl.counts().tolist()
            n_train = int(pl.labels.size)
        if ctx.path(BASELINE).exists():
            extra["baseline_auroc"] = auroc(_read_baseline(ctx.path(BASELINE)))
        timings = _record_timing(ctx, "evaluate", 0.0)
        report = evaluate(scored, effective_config(cfg), float(sum(timings.values())),
                          _composition(labels, n_train), extra)
        report.to_json(ctx.path(REPORT))
        return ctx.path(REPORT)
    raise ValueError(f"unknown stage {stage!r}; expected one of {', '.join(STAGES)}")


def _run_stage(ctx: _Context, stage: str) -> Path:
    if stage not in UPSTREAM:
        raise StageError(stage, f"unknown stage; expected one of {', '.join(STAGES)}")
    for name in UPSTREAM[stage]:
        if not ctx.path(name).exists():
            raise StageError(stage, f"missing upstream artifact {ctx.path(name)}")
    ctx.out.mkdir(parents=True, exist_ok=True)
    ctx.cfg.to_json(ctx.path(CONFIG))
    logger.info("stage %s -> %s", stage, ctx.out)
    start = time.perf_counter()
    try:
        path = _do_stage(ctx, stage)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(stage, f"{type(exc).__name__}: {exc}") from exc
    if stage != "evaluate":
        _record_timing(ctx, stage, time.perf_counter() - start)
    return path


def run_stage(stage: str, cfg: ExperimentConfig) -> Path:
    """Run one stage reading upstream artifacts from, and writing to, ``cfg.out_dir``."""
    return _run_stage(_Context(cfg), stage)


def run_pipeline(cfg: ExperimentConfig) -> EvaluationReport:
    """All stages in order; artifacts of completed stages stay on disk if a later one fails."""
    ctx = _Context(cfg)
    timings = ctx.path(TIMINGS)
    if timings.exists():
        timings.unlink()
    for stage in STAGES:
        _run_stage(ctx, stage)
    return EvaluationReport.from_json(ctx.path(REPORT))


# -- ablation ------------------------------------------------------------------------

def default_grid() -> list[tuple[int, int]]:
    """Cluster counts 2..20 at the default hidden size, then hidden sizes 10..100 at K=10."""
    settings = [(k, 100) for k in DEFAULT_CLUSTER_COUNTS]
    settings += [(10, d) for d in DEFAULT_HIDDEN_DIMS if (10, d) not in settings]
    return settings


def load_grid(path) -> list[tuple[int, int]]:
    """``{"settings": [[K, dim], ...]}`` or ``{"clusters": [...], "hidden_dims": [...]}``."""
    with open(path) as fh:
        data = json.load(fh)
    if "settings" in data:
        return [(int(k), int(d)) for k, d in data["settings"]]
    clusters = data.get("clusters", [10])
    dims = data.get("hidden_dims", [100])
    return [(int(k), int(d)) for k in clusters for d in dims]


def read_ablation_csv(path) -> dict[tuple[int, int], AblationRow]:
    path = Path(path)
    if not path.exists():
        return {}
    with open(path, newline="") as fh:
        rows = [AblationRow(int(r["n_clusters"]), int(r["hidden_dim"]), float(r["auroc"]),
                            float(r["runtime_seconds"])) for r in csv.DictReader(fh)]
    return {(r.n_clusters, r.hidden_dim): r for r in rows}


def run_ablation(cfg: ExperimentConfig, settings=None) -> list[AblationRow]:
    """Sweep the settings, appending each finished row to ``ablation.csv``.

    Rows already present in that file are not rerun, so an interrupted sweep
    picks up where it stopped.
    """
    settings = default_grid() if settings is None else list(settings)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = out / "ablation.csv"
    completed = read_ablation_csv(table)
    if not table.exists():
        table.write_text(",".join(ABLATION_COLUMNS) + "\n")
    scenario, _ = load_scenario(cfg.scenario, cfg.seed)

    def append(row):
        with open(table, "a", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerow(
                [row.n_clusters, row.hidden_dim, repr(row.auroc), repr(row.runtime_seconds)])
        logger.info("K=%d hidden=%d auroc=%.4f", row.n_clusters, row.hidden_dim, row.auroc)

    try:
        return ablation_sweep(scenario, None, None, cfg, completed=completed, on_row=append,
                              settings=settings)
    except StageError:
        raise
    except Exception as exc:
        raise StageError("ablate", str(exc)) from exc


# -- report --------------------------------------------------------------------------

def format_report(report: EvaluationReport) -> str:
    comp = report.composition
    lines = [f"AUROC            {report.auroc:.4f}"]
    if "baseline_auroc" in report.extra:
        lines.append(f"baseline AUROC   {report.extra['baseline_auroc']:.4f}")
    spec = report.extra.get("scenario", {})
    if spec:
        lines.append(f"scenario         {spec.get('dataset')}:{spec.get('name')} "
                     f"normal={spec.get('normal_labels')}")
    if comp:
        lines.append(f"test set         {comp.get('n_test')} "
                     f"({comp.get('n_test_normal')} normal, {comp.get('n_test_abnormal')} abnormal)")
    if report.extra.get("n_labels") is not None:
        lines.append(f"pseudo-labels    L={report.extra['n_labels']} "
                     f"counts={report.extra.get('pseudo_label_counts')}")
    det = report.config.get("detector", {})
    lines.append(f"detector         T={det.get('temperature')} eps={det.get('epsilon')}")
    lines.append(f"seed             {report.config.get('seed')}")
    lines.append(f"runtime          {report.runtime_seconds:.1f} s")
    return "\n".join(lines)


# -- entry point ---------------------------------------------------------------------

def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON experiment file")
    p.add_argument("--scenario", help="synthetic | mnist:<name> | vectors:<dataset>:<name>")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--clusters", type=int, help="number of clusters K")
    p.add_argument("--hidden-dim", type=int, help="latent feature size")
    p.add_argument("--temperature", type=float)
    p.add_argument("--epsilon", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clad", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_config_flags(sub.add_parser("run", help="run the full pipeline"))
    p = sub.add_parser("stage", help="run one stage against artifacts in --out")
    p.add_argument("stage", choices=STAGES)
    _add_config_flags(p)
    p = sub.add_parser("ablate", help="sweep cluster counts and hidden sizes")
    p.add_argument("--grid", help="JSON grid file; default sweeps K 2..20 and hidden 10..100")
    _add_config_flags(p)
    p = sub.add_parser("report", help="summarize a report.json")
    p.add_argument("path", help="run directory or report file")
    return parser


def _config_from_args(args) -> ExperimentConfig:
    return resolve_config(args.scenario, args.config, args.seed, args.out, args.clusters,
                          args.hidden_dim, args.temperature, args.epsilon)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            path = Path(args.path)
            report = EvaluationReport.from_json(path / REPORT if path.is_dir() else path)
            print(format_report(report))
            return 0
        try:
            cfg = _config_from_args(args)
        except (OSError, ValueError, TypeError) as exc:
            raise StageError("config", str(exc)) from exc
        if args.command == "run":
            report = run_pipeline(cfg)
            print(format_report(report))
        elif args.command == "stage":
            print(run_stage(args.stage, cfg))
        else:
            settings = load_grid(args.grid) if args.grid else None
            rows = run_ablation(cfg, settings)
            print(",".join(ABLATION_COLUMNS))
            for r in rows:
                print(f"{r.n_clusters},{r.hidden_dim},{r.auroc:.6f},{r.runtime_seconds:.1f}")
        return 0
    except StageError as exc:
        print(f"clad: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"clad: error: [{args.command}] {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
