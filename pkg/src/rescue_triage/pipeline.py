"""End-to-end pipeline: corpus -> features -> selection -> tuning -> report.

Stages run in the fixed order synth/ingest, wordcount, extract-features,
select-features, tune, rfecv, evaluate, llm-compare. Every stage writes its
artifacts as plain files under the output directory so any stage can be
rerun in isolation; a run manifest records seeds, versions and artifact
hashes. A failing stage halts the run with its name while earlier artifacts
stay on disk.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import __version__
from .featselect import filter_select, rfecv
from .ingest import IngestConfig, ingest_tables, load_csv
from .learners import DEFAULT_SEARCH_SPACES, ModelKind, save_model, train
from .llm import (
    EndpointConfig,
    TEMPLATE_DEFAULT,
    build_prompt,
    compare,
    prompt_values_from_vector,
    query_many,
    transcript_verdicts,
)
from .records import (
    Dataset,
    FeatureVector,
    Label,
    check_unique_case_ids,
    record_to_dict,
    to_feature_vector,
    write_jsonl,
    VITAL_FEATURE_NAMES,
)
from .synthgen import GeneratorConfig, default_config, generate
from .textfeat import default_lexicons, extract_features, load_lexicon_file, note_tokens, word_count
from .tuning import (
    CvSpec,
    SearchSpec,
    evaluate_all,
    search,
    split_train_test,
    write_metrics_csv,
    write_roc_csv,
)

log = logging.getLogger(__name__)

STAGES = (
    "synth",
    "wordcount",
    "extract_features",
    "select_features",
    "tune",
    "rfecv",
    "evaluate",
    "llm_compare",
)


class PipelineError(RuntimeError):
    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"stage {stage!r}: {message}")


@dataclass(frozen=True)
class PipelineConfig:
    """File-driven configuration for run_pipeline; seeds propagate everywhere."""

    seed: int = 42
    out_dir: str = "out"
    lexicon_path: Optional[str] = None
    generator: Optional[GeneratorConfig] = None
    input_csvs: tuple[str, ...] = ()
    ingest: Optional[IngestConfig] = None
    min_count: int = 50
    filter_threshold: float = 3.0
    search_mode: str = "grid"
    search_budget: int = 20
    cv_folds: int = 5
    stratified: bool = True
    rfecv_folds: int = 5
    split_ratio: float = 0.8
    llm_mode: str = "stub"  # stub | transcript | endpoint | off
    llm_transcript: Optional[str] = None
    llm_endpoint: Optional[EndpointConfig] = None
    llm_cases: int = 6

    def __post_init__(self):
        object.__setattr__(self, "input_csvs", tuple(self.input_csvs))
        if self.llm_mode not in ("stub", "transcript", "endpoint", "off"):
            raise ValueError(f"unknown llm_mode {self.llm_mode!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        d = dict(d)
        if d.get("generator"):
            d["generator"] = GeneratorConfig.from_dict(d["generator"])
        if d.get("ingest"):
            d["ingest"] = IngestConfig.from_dict(d["ingest"])
        if d.get("llm_endpoint"):
            d["llm_endpoint"] = EndpointConfig(**d["llm_endpoint"])
        return cls(**d)

    def to_dict(self) -> dict:
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        if self.generator is not None:
            d["generator"] = self.generator.to_dict()
        if self.ingest is not None:
            d["ingest"] = {k: getattr(self.ingest, k) for k in self.ingest.__dataclass_fields__}
        if self.llm_endpoint is not None:
            d["llm_endpoint"] = {
                k: getattr(self.llm_endpoint, k) for k in self.llm_endpoint.__dataclass_fields__
            }
        d["input_csvs"] = list(self.input_csvs)
        return d

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def validate_config(cfg: PipelineConfig) -> None:
    """Reject broken configs before any compute; errors name the config stage."""
    if cfg.lexicon_path is not None and not Path(cfg.lexicon_path).exists():
        raise PipelineError("config", f"lexicon path {cfg.lexicon_path!r} does not exist")
    for p in cfg.input_csvs:
        if not Path(p).exists():
            raise PipelineError("config", f"input csv {p!r} does not exist")
    if cfg.llm_mode == "transcript":
        if not cfg.llm_transcript or not Path(cfg.llm_transcript).exists():
            raise PipelineError("config", f"llm transcript {cfg.llm_transcript!r} does not exist")
    if cfg.llm_mode == "endpoint" and cfg.llm_endpoint is None:
        raise PipelineError("config", "llm_mode 'endpoint' needs llm_endpoint settings")


def _load_lexicons(cfg: PipelineConfig):
    if cfg.lexicon_path is None:
        return default_lexicons()
    return load_lexicon_file(cfg.lexicon_path)


def feature_rows_to_dataset(rows: list[dict]) -> Dataset:
    vectors = [FeatureVector.from_dict(r["features"]) for r in rows]
    labels = [Label(r["label"]) for r in rows]
    return Dataset.from_vectors(vectors, labels, [r["case_id"] for r in rows])


def _stub_response(fv: FeatureVector) -> str:
    """Canned deterministic responder used when no model endpoint exists.

    A plumbing stand-in, not a model: answers true when any text flag is set.
    """
    flags = (fv.preillness, fv.intoxication, fv.alcoholism, fv.mental_abnormality, fv.psychiatric_symptoms)
    return "true" if any(f == 1.0 for f in flags) else "false"


def run_pipeline(cfg: PipelineConfig) -> dict:
    """Execute all stages; returns the manifest dict (also written to disk)."""
    validate_config(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "roc").mkdir(exist_ok=True)

    # config, seeds and input hashes make the run reproducible from the manifest
    manifest: dict = {
        "package_version": __version__,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "input_hashes": {p: _sha256(Path(p)) for p in cfg.input_csvs},
        "stages": [],
        "artifacts": {},
    }
    manifest_path = out / "manifest.json"

    def finish_stage(name: str, status: str, artifacts: list[Path], t0: float, **extra):
        entry = {
            "name": name,
            "status": status,
            "artifacts": [str(p.relative_to(out)) for p in artifacts],
            "elapsed_s": round(time.perf_counter() - t0, 3),
        }
        entry.update(extra)
        manifest["stages"].append(entry)
        for p in artifacts:
            manifest["artifacts"][str(p.relative_to(out))] = _sha256(p)
        manifest_path.write_text(json.dumps(manifest, indent=2), encoding="utf-8")

    def fail(name: str, exc: Exception, t0: float) -> PipelineError:
        finish_stage(name, "failed", [], t0, error=str(exc))
        return PipelineError(name, str(exc))

    categories, lexicons = _load_lexicons(cfg)

    # stage 1: synth (or ingest of raw CSVs)
    t0 = time.perf_counter()
    corpus_path = out / "corpus.jsonl"
    truth_path = out / "truth.csv"
    try:
        if cfg.input_csvs:
            tables = [load_csv(p) for p in cfg.input_csvs]
            records, row_errors = ingest_tables(tables, cfg.ingest or IngestConfig())
            for idx, err in row_errors:
                log.warning("ingest: dropped row %d: %s", idx, err)
        else:
            gen_cfg = cfg.generator or default_config(seed=cfg.seed)
            records = generate(gen_cfg)
        check_unique_case_ids(records)
        write_jsonl(corpus_path, records, record_to_dict)
        with open(truth_path, "w", encoding="utf-8") as fh:
            fh.write("case_id,label\n")
            for r in records:
                fh.write(f"{r.case_id},{r.label.value}\n")
    except Exception as exc:
        raise fail("synth", exc, t0)
    finish_stage(
        "synth", "ok", [corpus_path, truth_path], t0,
        records=len(records), mode="csv" if cfg.input_csvs else "synthetic",
    )

    # stage 2: wordcount
    t0 = time.perf_counter()
    wc_path = out / "word_counts.csv"
    try:
        corpus_tokens = [note_tokens(r.notes) for r in records]
        counts = word_count(corpus_tokens, lexicons, min_count=cfg.min_count)
        with open(wc_path, "w", encoding="utf-8") as fh:
            fh.write("word,count\n")
            for w, c in counts.items():
                fh.write(f"{w},{c}\n")
    except Exception as exc:
        raise fail("wordcount", exc, t0)
    finish_stage("wordcount", "ok", [wc_path], t0, words=len(counts))

    # stage 3: extract features
    t0 = time.perf_counter()
    features_path = out / "features.jsonl"
    try:
        rows = []
        skipped = 0
        for r in records:
            if r.vitals is None or not r.vitals.complete:
                skipped += 1
                continue
            tf = extract_features(r, categories, lexicons)
            fv = to_feature_vector(r.vitals, tf)
            rows.append({"case_id": r.case_id, "label": r.label.value, "features": fv.to_dict()})
        write_jsonl(features_path, rows)
    except Exception as exc:
        raise fail("extract_features", exc, t0)
    finish_stage("extract_features", "ok", [features_path], t0, rows=len(rows), skipped=skipped)

    # stage 4: filter selection
    t0 = time.perf_counter()
    selection_path = out / "selection_report.json"
    try:
        labeled = [r for r in rows if r["label"] != Label.UNKNOWN.value]
        psy = [FeatureVector.from_dict(r["features"]) for r in labeled if r["label"] == Label.PSYCHIATRIC.value]
        non = [FeatureVector.from_dict(r["features"]) for r in labeled if r["label"] == Label.NON_PSYCHIATRIC.value]
        report = filter_select(psy, non, threshold=cfg.filter_threshold)
        selection_path.write_text(json.dumps(report.to_dict(), indent=2), encoding="utf-8")
        model_features = list(VITAL_FEATURE_NAMES) + list(report.selected)
    except Exception as exc:
        raise fail("select_features", exc, t0)
    finish_stage("select_features", "ok", [selection_path], t0, selected=list(report.selected))

    # shared split for tune, rfecv and evaluate
    data = feature_rows_to_dataset(labeled).select(model_features)
    train_set, test_set = split_train_test(data, cfg.split_ratio, cfg.seed, cfg.stratified)
    cv = CvSpec(folds=cfg.cv_folds, stratified=cfg.stratified, seed=cfg.seed)

    # stage 5: hyperparameter search per model kind
    t0 = time.perf_counter()
    leaderboard_path = out / "leaderboard.json"
    try:
        per_kind = {}
        for kind in ModelKind:
            spec = SearchSpec(cfg.search_mode, DEFAULT_SEARCH_SPACES[kind], cfg.search_budget, cfg.seed)
            per_kind[kind] = search(kind, spec, cv, train_set, model_seed=cfg.seed)
        winner_kind = max(per_kind, key=lambda k: per_kind[k].leaderboard[0].mean_score)
        winner = per_kind[winner_kind].best
        payload = {
            "winner": {"spec": winner.to_dict(), "cv_accuracy": per_kind[winner_kind].leaderboard[0].mean_score},
            "per_kind": {
                k.value: [
                    {
                        "hyperparameters": e.spec.hyperparameters,
                        "mean_accuracy": e.mean_score,
                        "fold_accuracies": list(e.fold_scores),
                    }
                    for e in per_kind[k].leaderboard
                ]
                for k in per_kind
            },
        }
        leaderboard_path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    except Exception as exc:
        raise fail("tune", exc, t0)
    finish_stage("tune", "ok", [leaderboard_path], t0, winner=winner.to_dict())

    # stage 6: RFECV on the tuned winner
    t0 = time.perf_counter()
    rfecv_path = out / "rfecv_report.json"
    try:
        rfe = rfecv(train_set, winner, CvSpec(folds=cfg.rfecv_folds, stratified=cfg.stratified, seed=cfg.seed))
        rfecv_path.write_text(json.dumps(rfe.to_dict(), indent=2), encoding="utf-8")
    except Exception as exc:
        raise fail("rfecv", exc, t0)
    finish_stage("rfecv", "ok", [rfecv_path], t0, best_features=list(rfe.best_features))

    # stage 7: evaluate every kind's tuned spec on the held-out test split
    t0 = time.perf_counter()
    table_path = out / "metrics_table.csv"
    best_model_path = out / "best_model.json"
    try:
        final = data.select(rfe.best_features)
        specs = [per_kind[k].best for k in ModelKind]
        eval_rows = evaluate_all(specs, final, cfg.split_ratio, cfg.seed, cfg.stratified)
        write_metrics_csv(eval_rows, table_path)
        roc_paths = []
        for row in eval_rows:
            if row.report is not None:
                p = out / "roc" / f"roc_{row.name.replace('-', '').lower()}.csv"
                write_roc_csv(row.report.roc_points, p)
                roc_paths.append(p)
        final_train, _ = split_train_test(final, cfg.split_ratio, cfg.seed, cfg.stratified)
        best_model = train(winner, final_train.X, final_train.y, feature_names=final.feature_names)
        save_model(best_model, best_model_path)
    except Exception as exc:
        raise fail("evaluate", exc, t0)
    finish_stage("evaluate", "ok", [table_path, best_model_path, *roc_paths], t0)

    # stage 8: zero-shot comparison on a small case sample
    t0 = time.perf_counter()
    llm_path = out / "llm_agreement.json"
    if cfg.llm_mode == "off":
        finish_stage("llm_compare", "skipped", [], t0)
    else:
        try:
            test_cases = _pick_llm_cases(test_set, cfg.llm_cases)
            # rebuild full vectors for the sampled ids so prompts show all keys
            by_id = {r["case_id"]: FeatureVector.from_dict(r["features"]) for r in labeled}
            row_of = {cid: i for i, cid in enumerate(final.case_ids)}
            ids = [test_set.case_ids[i] for i in test_cases]
            vectors = [by_id[i] for i in ids]
            prompts = [build_prompt(prompt_values_from_vector(v), TEMPLATE_DEFAULT) for v in vectors]
            ml_preds = [int(best_model.predict(final.X[row_of[i]])) for i in ids]
            if cfg.llm_mode == "stub":
                verdicts = transcript_verdicts([_stub_response(v) for v in vectors])
            elif cfg.llm_mode == "transcript":
                canned = json.loads(Path(cfg.llm_transcript).read_text(encoding="utf-8"))
                verdicts = transcript_verdicts([str(t) for t in canned][: len(prompts)])
            else:
                verdicts = query_many(prompts, cfg.llm_endpoint, max_in_flight=1)
            refs = [int(test_set.y[i]) for i in test_cases]
            agreement = compare(ml_preds, verdicts, ids, reference_labels=refs)
            payload = agreement.to_dict()
            payload["prompts"] = prompts
            llm_path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
        except Exception as exc:
            raise fail("llm_compare", exc, t0)
        finish_stage("llm_compare", "ok", [llm_path], t0, mismatches=agreement.mismatch_count)

    return manifest


def _pick_llm_cases(test_set: Dataset, n_cases: int) -> list[int]:
    """First half positives, then negatives, by test-set order."""
    pos = [i for i in range(len(test_set)) if test_set.y[i] == 1]
    neg = [i for i in range(len(test_set)) if test_set.y[i] == 0]
    half = n_cases // 2
    return pos[:half] + neg[: n_cases - half]
