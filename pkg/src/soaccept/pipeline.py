"""Staged batch pipeline over a content-addressed work directory.

Each stage reads its predecessor's files, writes its own, and records a
sha256 fingerprint of both in ``manifest.json``.  Rerunning a stage in
isolation is safe: stale or missing prerequisites fail fast with a
message naming the stage to rerun.  Nothing in the work directory
carries a timestamp, so two runs with the same inputs and settings are
byte-identical.

Work directory layout::

    dataset.jsonl            retained question/answer records
    ingest_report.json       retention and discard counts
    features.csv             one feature row per answer
    feature_stats.json       extraction counters
    tfidf.json               corpus term frequencies (reused by rank)
    selection.json           correlation/info-gain pruning report
    models/<sampler>/        model.rf.json, model.mlp.json, scaler.json,
                             medians.json, split.json [, search.json]
    report/<sampler>/        report.md, roc.csv, roc.svg, metrics.json
    manifest.json            per-stage config + file fingerprints
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .features import (
    FEATURE_NAMES,
    build_pair_corpus,
    extract_matrix,
    fit_tfidf,
    load_tfidf,
    read_features_csv,
    save_tfidf,
    write_features_csv,
)
from .forest import (
    RfParams,
    fit_forest,
    forest_predict_proba,
    load_forest,
    save_forest,
)
from .ingest import (
    AnswerEntry,
    DecodeError,
    IngestFilter,
    PostRow,
    QARecord,
    UserRow,
    build_dataset,
    decode_post,
    decode_user,
    parse_timestamp,
    read_dataset,
    stream_rows,
    write_dataset,
)
from .learners import (
    SearchSpace,
    SplitSpec,
    normalized_importance_report,
    random_search,
    split_indices,
)
from .metrics import EvalReport, emit_report, evaluate_model
from .mlp import MlpConfig, fit_mlp, load_mlp, mlp_predict_proba, save_mlp
from .resample import ResamplePlan, Scaler, apply_plan, standardize
from .seeding import derive_seed
from .selection import select_features, write_selection_report


class ConfigError(Exception):
    """Bad configuration: unknown key, wrong type, out-of-range value."""


class DataError(Exception):
    """Input data cannot produce a usable result (empty, degenerate)."""


class StageError(Exception):
    """A prerequisite stage has not run, or its artifacts went stale."""


# ---------------------------------------------------------------------------
# configuration

DEFAULT_CONFIG = {
    "posts": None,
    "users": None,
    "workdir": "workdir",
    "seed": 0,
    "threads": 1,
    "filter": {
        "tags": ["java", "javascript"],
        "years": [2014, 2016],
        "require_accepted": True,
    },
    "selection": {"r_threshold": 0.7, "ig_threshold": 0.4, "mi_k": 3},
    "split": {"train_fraction": 0.7},
    "resample": {"method": "smote", "k": 5, "target_ratio": 1.0, "beta": 1.0},
    "forest": {
        "n_estimators": 200,
        "max_depth": 60,
        "min_samples_split": 8,
        "min_samples_leaf": 3,
        "max_features": "sqrt",
        "bootstrap": True,
    },
    "mlp": {
        "hidden": [64, 64, 32, 32, 16],
        "learning_rate": 0.01,
        "batch_size": 32,
        "epochs": 50,
    },
    "search": {
        "enabled": False,
        "n_iterations": 100,
        "cv_folds": 4,
        "n_estimators": list(range(100, 1300, 100)),
        "max_depth": [10, 21, 32, 43, 54, 65, 76, 87, 98, 110],
        "min_samples_split": [2, 3, 5, 8, 10],
        "min_samples_leaf": [1, 2, 3, 5],
        "max_features": ["sqrt", "auto"],
        "bootstrap": [True],
    },
    "evaluate": {"importance_rounds": 5},
}


def _merge_config(base: dict, override: dict, prefix: str = "") -> dict:
    """Overlay `override` onto a deep copy of `base`, rejecting unknown keys."""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        path = f"{prefix}{key}"
        if key not in base:
            raise ConfigError(f"unknown configuration key: {path}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{path} must be an object")
            merged[key] = _merge_config(base[key], value, prefix=f"{path}.")
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _parse_set_value(text: str):
    # JSON first; bare words fall back to strings, comma runs to lists
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        if "," in text:
            return [_parse_set_value(item) for item in text.split(",")]
        return text


def apply_set_overrides(data: dict, assignments) -> dict:
    """Apply `key.path=value` strings on top of a config dict."""
    out = copy.deepcopy(data)
    for raw in assignments:
        key, sep, value = raw.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set needs key=value, got {raw!r}")
        node = out
        parts = key.split(".")
        probe = DEFAULT_CONFIG
        for part in parts[:-1]:
            if not isinstance(probe.get(part), dict):
                raise ConfigError(f"unknown configuration key: {key}")
            probe = probe[part]
            node = node.setdefault(part, {})
        if parts[-1] not in probe:
            raise ConfigError(f"unknown configuration key: {key}")
        parsed = _parse_set_value(value)
        # a single bare word for a list-typed key means a one-element list
        if isinstance(probe[parts[-1]], list) and not isinstance(parsed, list):
            parsed = [parsed]
        node[parts[-1]] = parsed
    return out


def _as_int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path} must be an integer")
    return value


def _as_float(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path} must be a number")
    return float(value)


def _as_bool(value, path: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"{path} must be true or false")
    return value


def _as_str_list(value, path: str) -> list:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{path} must be a non-empty list of strings")
    for item in value:
        if not isinstance(item, str):
            raise ConfigError(f"{path} must be a non-empty list of strings")
    return list(value)


@dataclass(frozen=True)
class RunConfig:
    """Validated pipeline settings; seeds for each stage derive from `seed`."""

    posts: str | None
    users: str | None
    workdir: str
    seed: int
    threads: int
    tags: tuple
    years: tuple
    require_accepted: bool
    r_threshold: float
    ig_threshold: float
    mi_k: int
    train_fraction: float
    resample_method: str
    resample_k: int
    target_ratio: float
    beta: float
    forest: dict = field(compare=False)
    mlp: dict = field(compare=False)
    search: dict = field(compare=False)
    importance_rounds: int = 5

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        d = _merge_config(DEFAULT_CONFIG, data)
        for key in ("posts", "users"):
            if d[key] is not None and not isinstance(d[key], str):
                raise ConfigError(f"{key} must be a file path string")
        if not isinstance(d["workdir"], str) or not d["workdir"]:
            raise ConfigError("workdir must be a non-empty path string")
        years = d["filter"]["years"]
        if not isinstance(years, list) or len(years) != 2:
            raise ConfigError("filter.years must be [first, last]")
        cfg = cls(
            posts=d["posts"],
            users=d["users"],
            workdir=d["workdir"],
            seed=_as_int(d["seed"], "seed"),
            threads=_as_int(d["threads"], "threads"),
            tags=tuple(_as_str_list(d["filter"]["tags"], "filter.tags")),
            years=(_as_int(years[0], "filter.years"), _as_int(years[1], "filter.years")),
            require_accepted=_as_bool(
                d["filter"]["require_accepted"], "filter.require_accepted"
            ),
            r_threshold=_as_float(d["selection"]["r_threshold"], "selection.r_threshold"),
            ig_threshold=_as_float(
                d["selection"]["ig_threshold"], "selection.ig_threshold"
            ),
            mi_k=_as_int(d["selection"]["mi_k"], "selection.mi_k"),
            train_fraction=_as_float(
                d["split"]["train_fraction"], "split.train_fraction"
            ),
            resample_method=d["resample"]["method"],
            resample_k=_as_int(d["resample"]["k"], "resample.k"),
            target_ratio=_as_float(d["resample"]["target_ratio"], "resample.target_ratio"),
            beta=_as_float(d["resample"]["beta"], "resample.beta"),
            forest=copy.deepcopy(d["forest"]),
            mlp=copy.deepcopy(d["mlp"]),
            search=copy.deepcopy(d["search"]),
            importance_rounds=_as_int(
                d["evaluate"]["importance_rounds"], "evaluate.importance_rounds"
            ),
        )
        if cfg.threads < 1:
            raise ConfigError("threads must be >= 1")
        if cfg.importance_rounds < 1:
            raise ConfigError("evaluate.importance_rounds must be >= 1")
        # building every stage object up front surfaces bad values at load
        # time instead of deep inside a run
        try:
            cfg.ingest_filter()
            cfg.split_spec()
            cfg.resample_plan()
            cfg.rf_params()
            cfg.mlp_config()
            cfg.search_space()
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        return cfg

    def ingest_filter(self) -> IngestFilter:
        return IngestFilter(
            tags_any_of=frozenset(self.tags),
            year_range=self.years,
            require_accepted=self.require_accepted,
        )

    def split_spec(self) -> SplitSpec:
        return SplitSpec(
            train_fraction=self.train_fraction,
            seed=derive_seed(self.seed, "split"),
        )

    def resample_plan(self) -> ResamplePlan:
        return ResamplePlan(
            method=self.resample_method,
            k=self.resample_k,
            target_ratio=self.target_ratio,
            beta=self.beta,
            seed=derive_seed(self.seed, "resample"),
        )

    def rf_params(self) -> RfParams:
        return RfParams(seed=derive_seed(self.seed, "forest"), **self.forest)

    def mlp_config(self) -> MlpConfig:
        d = dict(self.mlp)
        d["hidden"] = tuple(d.get("hidden", ()))
        return MlpConfig(seed=derive_seed(self.seed, "mlp"), **d)

    def search_space(self) -> SearchSpace | None:
        d = dict(self.search)
        if not _as_bool(d.pop("enabled"), "search.enabled"):
            return None
        grids = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
        return SearchSpace(seed=derive_seed(self.seed, "search"), **grids)

    def canonical_dict(self) -> dict:
        """The full settings tree with normalized value types."""
        return {
            "posts": self.posts,
            "users": self.users,
            "workdir": self.workdir,
            "seed": self.seed,
            "threads": self.threads,
            "filter": {
                "tags": list(self.tags),
                "years": list(self.years),
                "require_accepted": self.require_accepted,
            },
            "selection": {
                "r_threshold": self.r_threshold,
                "ig_threshold": self.ig_threshold,
                "mi_k": self.mi_k,
            },
            "split": {"train_fraction": self.train_fraction},
            "resample": {
                "method": self.resample_method,
                "k": self.resample_k,
                "target_ratio": self.target_ratio,
                "beta": self.beta,
            },
            "forest": copy.deepcopy(self.forest),
            "mlp": {
                "hidden": [int(h) for h in self.mlp["hidden"]],
                "learning_rate": float(self.mlp["learning_rate"]),
                "batch_size": int(self.mlp["batch_size"]),
                "epochs": int(self.mlp["epochs"]),
            },
            "search": copy.deepcopy(self.search),
            "evaluate": {"importance_rounds": self.importance_rounds},
        }


def load_config(
    path=None,
    sets=(),
    seed: int | None = None,
    threads: int | None = None,
    workdir: str | None = None,
    posts: str | None = None,
    users: str | None = None,
) -> RunConfig:
    """Config file, then --set overrides, then dedicated flags; all optional."""
    data: dict = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
    data = apply_set_overrides(data, sets)
    for key, value in (
        ("seed", seed),
        ("threads", threads),
        ("workdir", workdir),
        ("posts", posts),
        ("users", users),
    ):
        if value is not None:
            data[key] = value
    return RunConfig.from_dict(data)


# ---------------------------------------------------------------------------
# work directory and manifest

@dataclass(frozen=True)
class Paths:
    root: Path
    sampler: str

    @property
    def dataset(self) -> Path:
        return self.root / "dataset.jsonl"

    @property
    def ingest_report(self) -> Path:
        return self.root / "ingest_report.json"

    @property
    def features_csv(self) -> Path:
        return self.root / "features.csv"

    @property
    def feature_stats(self) -> Path:
        return self.root / "feature_stats.json"

    @property
    def tfidf(self) -> Path:
        return self.root / "tfidf.json"

    @property
    def selection(self) -> Path:
        return self.root / "selection.json"

    @property
    def models_dir(self) -> Path:
        return self.root / "models" / self.sampler

    @property
    def report_dir(self) -> Path:
        return self.root / "report" / self.sampler

    @property
    def manifest(self) -> Path:
        return self.root / "manifest.json"

    def rel(self, path: Path) -> str:
        return path.relative_to(self.root).as_posix()


def paths_for(cfg: RunConfig) -> Paths:
    return Paths(root=Path(cfg.workdir), sampler=cfg.resample_method)


def _np_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_np_default)
        fh.write("\n")


def _read_json(path: Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


_STAGE_ORDER = ("ingest", "features", "select", "train", "evaluate")

# first artifact of each stage, used in dependency error messages
_STAGE_HINT = {
    "ingest": "dataset.jsonl",
    "features": "features.csv",
    "select": "selection.json",
    "train": "trained models",
    "evaluate": "evaluation report",
}


def _fingerprint(stage: str, cfg: RunConfig) -> str:
    d = cfg.canonical_dict()
    if stage == "ingest":
        part = {"filter": d["filter"]}
    elif stage == "features":
        part = {}  # extraction has no tunables; freshness rides on dataset.jsonl
    elif stage == "select":
        part = {"selection": d["selection"]}
    elif stage == "train":
        part = {
            "seed": d["seed"],
            "split": d["split"],
            "resample": d["resample"],
            "forest": d["forest"],
            "mlp": d["mlp"],
            "search": d["search"],
        }
    elif stage == "evaluate":
        part = {
            "seed": d["seed"],
            "evaluate": d["evaluate"],
            "sampler": d["resample"]["method"],
        }
    else:
        raise ValueError(f"unknown stage: {stage}")
    text = json.dumps(part, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _load_manifest(p: Paths) -> dict:
    if not p.manifest.exists():
        return {"schema_version": 1, "stages": {}}
    manifest = _read_json(p.manifest)
    if manifest.get("schema_version") != 1:
        raise StageError(
            f"manifest schema {manifest.get('schema_version')!r} is not supported"
        )
    return manifest


def _record_stage(cfg: RunConfig, stage: str, inputs: dict, outputs) -> None:
    p = paths_for(cfg)
    manifest = _load_manifest(p)
    manifest["stages"][stage] = {
        "config": _fingerprint(stage, cfg),
        "inputs": {label: _sha256_file(path) for label, path in sorted(inputs.items())},
        "outputs": {p.rel(path): _sha256_file(path) for path in sorted(outputs)},
    }
    _write_json(p.manifest, manifest)


def _resolve_input(cfg: RunConfig, p: Paths, stage: str, label: str) -> Path | None:
    if stage == "ingest":
        # source dumps are external; they are only comparable while the
        # config still points at them, and the work directory stays
        # self-contained without them (dataset.jsonl is pinned below)
        source = {"posts": cfg.posts, "users": cfg.users}.get(label)
        if source is None or not Path(source).exists():
            return None
        return Path(source)
    return p.root / label


def _verify_chain(cfg: RunConfig, priors, requester: str) -> None:
    p = paths_for(cfg)
    manifest = _load_manifest(p)
    stages = manifest["stages"]
    for prior in priors:
        entry = stages.get(prior)
        if entry is None:
            raise StageError(
                f"stage '{requester}' needs {_STAGE_HINT[prior]}; run {prior} first"
            )
        if entry.get("config") != _fingerprint(prior, cfg):
            raise StageError(
                f"settings for stage '{prior}' changed after it ran; run {prior} first"
            )
        for label, want in entry.get("inputs", {}).items():
            src = _resolve_input(cfg, p, prior, label)
            if src is None:
                continue
            if not src.exists():
                raise StageError(f"input {label} of stage '{prior}' is missing; run {prior} first")
            if _sha256_file(src) != want:
                raise StageError(f"{label} changed after stage '{prior}' ran; run {prior} first")
        for rel, want in entry.get("outputs", {}).items():
            out = p.root / rel
            if not out.exists():
                raise StageError(f"{rel} is missing; run {prior} first")
            if _sha256_file(out) != want:
                raise StageError(f"{rel} was modified after stage '{prior}' ran; run {prior} first")


def ensure_fresh(cfg: RunConfig, stage: str) -> None:
    """Fail with the stage to rerun when any prerequisite is absent or stale."""
    idx = _STAGE_ORDER.index(stage)
    _verify_chain(cfg, _STAGE_ORDER[:idx], requester=stage)


# ---------------------------------------------------------------------------
# stages

def cmd_ingest(cfg: RunConfig) -> dict:
    """Posts + users XML -> dataset.jsonl + ingest_report.json."""
    if not cfg.posts or not cfg.users:
        raise ConfigError('ingest needs "posts" and "users" file paths in the config')
    p = paths_for(cfg)
    p.root.mkdir(parents=True, exist_ok=True)

    posts = []
    try:
        with open(cfg.posts, "rb") as fh:
            for attrs in stream_rows(fh):
                posts.append(decode_post(attrs))
        users = {}
        with open(cfg.users, "rb") as fh:
            for attrs in stream_rows(fh):
                row = decode_user(attrs)
                users[row.id] = row
    except OSError as exc:
        raise DataError(f"cannot read input file: {exc}") from exc

    records, report = build_dataset(posts, users, cfg.ingest_filter())
    if not records:
        raise DataError("no questions survived the ingest filters")
    write_dataset(records, p.dataset)
    _write_json(p.ingest_report, {"schema_version": 1, **report})
    _record_stage(
        cfg,
        "ingest",
        inputs={"posts": Path(cfg.posts), "users": Path(cfg.users)},
        outputs=[p.dataset, p.ingest_report],
    )
    return report


def cmd_features(cfg: RunConfig) -> dict:
    """dataset.jsonl -> features.csv + tfidf.json + feature_stats.json."""
    ensure_fresh(cfg, "features")
    p = paths_for(cfg)
    records = read_dataset(p.dataset)
    if not records:
        raise DataError("dataset.jsonl holds no records")
    tfidf = fit_tfidf(build_pair_corpus(records))
    matrix = extract_matrix(records, tfidf_model=tfidf)
    if matrix.x.shape[0] == 0:
        raise DataError("every answer row was dropped during extraction")
    write_features_csv(matrix, p.features_csv)
    save_tfidf(tfidf, p.tfidf)
    stats = {
        "schema_version": 1,
        "n_rows": int(matrix.x.shape[0]),
        "n_questions": int(np.unique(matrix.question_ids).size),
        "n_accepted": int(matrix.y.sum()),
        "stats": matrix.stats,
    }
    _write_json(p.feature_stats, stats)
    _record_stage(
        cfg,
        "features",
        inputs={"dataset.jsonl": p.dataset},
        outputs=[p.features_csv, p.tfidf, p.feature_stats],
    )
    return stats


def cmd_select(cfg: RunConfig) -> dict:
    """features.csv -> selection.json (correlation + info-gain pruning)."""
    ensure_fresh(cfg, "select")
    p = paths_for(cfg)
    matrix = read_features_csv(p.features_csv)
    try:
        result, corr, ig = select_features(
            matrix.x,
            matrix.y,
            matrix.names,
            r_threshold=cfg.r_threshold,
            ig_threshold=cfg.ig_threshold,
            k=cfg.mi_k,
        )
    except ValueError as exc:
        raise DataError(f"feature selection failed: {exc}") from exc
    write_selection_report(
        p.selection, result, corr, ig, cfg.r_threshold, cfg.ig_threshold
    )
    _record_stage(
        cfg,
        "select",
        inputs={"features.csv": p.features_csv},
        outputs=[p.selection],
    )
    return _read_json(p.selection)


def _retained_columns(matrix, selection: dict):
    retained = selection.get("retained", [])
    if not retained:
        raise DataError("feature selection retained no features; lower the thresholds")
    try:
        cols = [matrix.names.index(name) for name in retained]
    except ValueError as exc:
        raise DataError(f"selection.json names an unknown feature: {exc}") from exc
    return retained, cols


def cmd_train(cfg: RunConfig) -> dict:
    """features.csv + selection.json -> fitted models under models/<sampler>/."""
    ensure_fresh(cfg, "train")
    p = paths_for(cfg)
    matrix = read_features_csv(p.features_csv)
    selection = _read_json(p.selection)
    retained, cols = _retained_columns(matrix, selection)
    x = matrix.x[:, cols]
    y = matrix.y.astype(np.int8)

    spec = cfg.split_spec()
    try:
        train_idx, test_idx = split_indices(len(y), spec)
    except ValueError as exc:
        raise DataError(f"cannot split {len(y)} rows: {exc}") from exc
    x_train, y_train = x[train_idx], y[train_idx]
    plan = cfg.resample_plan()

    search_result = None
    space = cfg.search_space()
    if space is not None:
        search_result = random_search(x_train, y_train, space, plan)
        params = search_result.best
    else:
        params = cfg.rf_params()

    x_res, y_res = apply_plan(x_train, y_train, plan)
    forest = fit_forest(x_res, y_res, params, threads=cfg.threads)
    forest.feature_names = tuple(retained)
    z_res, scaler = standardize(x_res)
    mlp = fit_mlp(z_res, y_res, cfg.mlp_config())

    # medians of the raw training split, for imputing unobserved features
    # at ranking time; computed over all columns, not just the retained ones
    medians = np.median(matrix.x[train_idx], axis=0)

    p.models_dir.mkdir(parents=True, exist_ok=True)
    rf_path = p.models_dir / "model.rf.json"
    mlp_path = p.models_dir / "model.mlp.json"
    save_forest(forest, rf_path)
    save_mlp(mlp, mlp_path)
    scaler_path = p.models_dir / "scaler.json"
    _write_json(
        scaler_path,
        {
            "schema_version": 1,
            "kind": "scaler",
            "names": list(retained),
            "mean": scaler.mean.tolist(),
            "sd": scaler.sd.tolist(),
        },
    )
    medians_path = p.models_dir / "medians.json"
    _write_json(
        medians_path,
        {
            "schema_version": 1,
            "kind": "medians",
            "names": list(FEATURE_NAMES),
            "values": medians.tolist(),
        },
    )
    split_path = p.models_dir / "split.json"
    _write_json(
        split_path,
        {
            "schema_version": 1,
            "train_fraction": spec.train_fraction,
            "train": train_idx.tolist(),
            "test": test_idx.tolist(),
        },
    )
    outputs = [rf_path, mlp_path, scaler_path, medians_path, split_path]
    if search_result is not None:
        search_path = p.models_dir / "search.json"
        _write_json(
            search_path,
            {
                "schema_version": 1,
                "best": {
                    "n_estimators": params.n_estimators,
                    "max_depth": params.max_depth,
                    "min_samples_split": params.min_samples_split,
                    "min_samples_leaf": params.min_samples_leaf,
                    "max_features": params.max_features,
                    "bootstrap": params.bootstrap,
                },
                "trials": search_result.trials,
            },
        )
        outputs.append(search_path)
    _record_stage(
        cfg,
        "train",
        inputs={"features.csv": p.features_csv, "selection.json": p.selection},
        outputs=outputs,
    )
    return {
        "train_rows": int(len(train_idx)),
        "test_rows": int(len(test_idx)),
        "resampled_rows": int(len(y_res)),
        "oob_error": forest.oob_error,
        "mlp_final_loss": mlp.loss_history[-1] if mlp.loss_history else None,
        "searched": search_result is not None,
    }


def _load_scaler(path: Path) -> Scaler:
    payload = _read_json(path)
    if payload.get("schema_version") != 1 or payload.get("kind") != "scaler":
        raise StageError(f"{path} is not a scaler artifact; run train first")
    return Scaler(
        mean=np.asarray(payload["mean"], dtype=np.float64),
        sd=np.asarray(payload["sd"], dtype=np.float64),
    )


def cmd_evaluate(cfg: RunConfig) -> EvalReport:
    """Held-out metrics + importance rankings -> report/<sampler>/."""
    ensure_fresh(cfg, "evaluate")
    p = paths_for(cfg)
    matrix = read_features_csv(p.features_csv)
    selection = _read_json(p.selection)
    retained, cols = _retained_columns(matrix, selection)
    x = matrix.x[:, cols]
    y = matrix.y.astype(np.int8)

    split = _read_json(p.models_dir / "split.json")
    test_idx = np.asarray(split["test"], dtype=np.int64)
    train_rows = len(split["train"])
    x_test, y_test = x[test_idx], y[test_idx]

    forest = load_forest(p.models_dir / "model.rf.json")
    mlp = load_mlp(p.models_dir / "model.mlp.json")
    scaler = _load_scaler(p.models_dir / "scaler.json")
    z_test = scaler.transform(x_test)

    rf_scores = forest_predict_proba(forest, x_test)
    mlp_scores = mlp_predict_proba(mlp, z_test)
    sampler = cfg.resample_method
    evals = (
        evaluate_model("random-forest", sampler, y_test, rf_scores),
        evaluate_model("mlp", sampler, y_test, mlp_scores),
    )
    importance = normalized_importance_report(
        tuple(retained),
        forest,
        mlp,
        z_test,
        y_test,
        seed=derive_seed(cfg.seed, "importance"),
        n_rounds=cfg.importance_rounds,
    )
    report = EvalReport(
        evals=evals,
        importance=importance,
        info_gain_bits=selection.get("info_gain_bits"),
        meta={
            "sampler": sampler,
            "seed": cfg.seed,
            "train_rows": train_rows,
            "test_rows": int(len(test_idx)),
            "retained_features": len(retained),
        },
    )
    written = emit_report(report, p.report_dir)
    _record_stage(
        cfg,
        "evaluate",
        inputs={
            "features.csv": p.features_csv,
            "selection.json": p.selection,
            p.rel(p.models_dir / "model.rf.json"): p.models_dir / "model.rf.json",
            p.rel(p.models_dir / "model.mlp.json"): p.models_dir / "model.mlp.json",
            p.rel(p.models_dir / "scaler.json"): p.models_dir / "scaler.json",
            p.rel(p.models_dir / "split.json"): p.models_dir / "split.json",
        },
        outputs=list(written),
    )
    return report


def cmd_run(cfg: RunConfig) -> dict:
    """All five stages in order against one work directory."""
    ingest_report = cmd_ingest(cfg)
    feature_stats = cmd_features(cfg)
    selection = cmd_select(cfg)
    train_summary = cmd_train(cfg)
    cmd_evaluate(cfg)
    p = paths_for(cfg)
    return {
        "questions": ingest_report["questions_retained"],
        "answers": ingest_report["answers_retained"],
        "feature_rows": feature_stats["n_rows"],
        "retained_features": len(selection["retained"]),
        "train": train_summary,
        "report_dir": str(p.report_dir),
    }


# ---------------------------------------------------------------------------
# ranking new candidates

def _candidate_ts(value, what: str) -> int | None:
    if value is None:
        return None
    if isinstance(value, bool):
        raise DataError(f"{what} must be an ISO-8601 string or epoch milliseconds")
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        try:
            return parse_timestamp(value)
        except DecodeError as exc:
            raise DataError(f"{what}: {exc}") from exc
    raise DataError(f"{what} must be an ISO-8601 string or epoch milliseconds")


def _candidate_record(payload: dict) -> tuple[QARecord, list]:
    """Build a pseudo question/answer record from a rank request.

    Returns the record plus, per answer, the names of features that were
    not observable in the request and must be median-imputed.
    """
    question = payload.get("question")
    answers = payload.get("answers")
    if not isinstance(question, dict) or not isinstance(question.get("body"), str):
        raise DataError('rank input needs a "question" object with a "body" string')
    if not isinstance(answers, list):
        raise DataError('rank input needs an "answers" list')
    if not answers:
        raise DataError("no candidate answers to rank")

    q_ts = _candidate_ts(question.get("creation_ts"), "question.creation_ts")
    view_count = question.get("view_count")
    q_row = PostRow(
        id=0,
        post_type="question",
        creation_ts=q_ts if q_ts is not None else 0,
        body=question["body"],
        view_count=view_count
        if isinstance(view_count, int) and not isinstance(view_count, bool)
        else None,
        tags=list(question.get("tags", [])),
    )

    entries = []
    imputed: list = []
    for i, answer in enumerate(answers):
        if not isinstance(answer, dict) or not isinstance(answer.get("body"), str):
            raise DataError(f'answers[{i}] needs a "body" string')
        missing = set()
        a_ts = _candidate_ts(answer.get("creation_ts"), f"answers[{i}].creation_ts")
        if q_ts is None or a_ts is None or a_ts < q_ts:
            # no usable pair of clocks; park the answer at the question
            # instant and let the median fill Timelag
            a_ts = q_row.creation_ts
            missing.add("Timelag")
        score = answer.get("score")
        if not isinstance(score, int) or isinstance(score, bool):
            score = 0
            missing.add("Score")
        comment_count = answer.get("comment_count")
        if not isinstance(comment_count, int) or isinstance(comment_count, bool):
            comment_count = 0
            missing.add("CommentCount")
        reputation = answer.get("reputation")
        if not isinstance(reputation, int) or isinstance(reputation, bool):
            reputation = 0
            missing.add("Reputation")
        signup_ts = _candidate_ts(
            answer.get("user_creation_ts"), f"answers[{i}].user_creation_ts"
        )
        if signup_ts is None or signup_ts > a_ts:
            signup_ts = a_ts
            missing.add("SignUpDateTimeLag")
        if q_row.view_count is None:
            missing.add("ViewCount")
        entries.append(
            AnswerEntry(
                post=PostRow(
                    id=i + 1,
                    post_type="answer",
                    creation_ts=a_ts,
                    score=score,
                    body=answer["body"],
                    parent_id=0,
                    comment_count=comment_count,
                ),
                user=UserRow(id=i + 1, reputation=reputation, creation_ts=signup_ts),
                accepted=False,
            )
        )
        imputed.append(sorted(missing))
    return QARecord(question=q_row, answers=entries), imputed


def cmd_rank(cfg: RunConfig, input_path, model_kind: str = "rf") -> dict:
    """Score new candidate answers with the persisted artifacts.

    Candidates are ranked by predicted acceptance probability, ties kept
    in input order.  Features the request cannot supply (vote score and
    view counts accrue after posting; timestamps may be unknown) fall
    back to the training-split medians and are listed per candidate.
    """
    if model_kind not in ("rf", "mlp"):
        raise ConfigError(f"model must be 'rf' or 'mlp', got {model_kind!r}")
    _verify_chain(cfg, ("ingest", "features", "select", "train"), requester="rank")
    p = paths_for(cfg)

    try:
        with open(input_path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read rank input: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"rank input is not valid JSON: {exc}") from exc
    record, imputed = _candidate_record(payload)

    tfidf = load_tfidf(p.tfidf)
    matrix = extract_matrix([record], tfidf_model=tfidf)
    n = len(record.answers)
    if matrix.x.shape[0] != n:
        raise DataError("candidate rows were dropped during extraction")

    medians = _read_json(p.models_dir / "medians.json")
    median_of = dict(zip(medians["names"], medians["values"]))
    col_of = {name: j for j, name in enumerate(matrix.names)}
    for i, names in enumerate(imputed):
        for name in names:
            matrix.x[i, col_of[name]] = median_of[name]

    selection = _read_json(p.selection)
    retained, cols = _retained_columns(matrix, selection)
    x = matrix.x[:, cols]
    if model_kind == "rf":
        forest = load_forest(p.models_dir / "model.rf.json")
        scores = forest_predict_proba(forest, x)
    else:
        mlp = load_mlp(p.models_dir / "model.mlp.json")
        scaler = _load_scaler(p.models_dir / "scaler.json")
        scores = mlp_predict_proba(mlp, scaler.transform(x))

    order = sorted(range(n), key=lambda i: (-scores[i], i))
    return {
        "schema_version": 1,
        "model": model_kind,
        "sampler": cfg.resample_method,
        "candidates": [
            {
                "index": i,
                "probability": float(scores[i]),
                "imputed": imputed[i],
            }
            for i in order
        ],
    }
