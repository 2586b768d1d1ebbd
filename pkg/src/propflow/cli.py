"""Pipeline driver: generate -> balance -> tune -> train -> evaluate -> explain.

One JSON config plus one master seed determine every artifact. Stages write
fixed filenames into the output directory and maintain a manifest of sha256
digests and per-stage wall clock, so a finished run is self-describing and a
re-run with the same config and seed is byte-identical (timing aside).
"""

import argparse
import hashlib
import json
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path

from . import __version__
from .boosting import BoostParams, GradientBoostedEnsemble, train
from .dataset import (
    GeneratorConfig,
    generate_synthetic,
    load_csv,
    load_schema_sidecar,
    write_csv,
    write_schema_sidecar,
)
from .explain import (
    CartConfig,
    extract_rules,
    fit_shap_cart,
    importance_ranking,
    rules_report,
    shap_matrix,
)
from .hpo import SearchSpace, tune
from .metrics import cross_validate
from .resample import AdasynConfig, HybridConfig, NearmissConfig, hybrid_balance
from .seeding import stream_seed

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_STAGE = 4

DATASET_CSV = "dataset.csv"
BALANCED_CSV = "balanced.csv"
BALANCE_AUDIT_JSON = "balance_audit.json"
TUNE_RESULT_JSON = "tune_result.json"
MODEL_JSON = "model.json"
METRICS_JSON = "metrics.json"
SHAP_CSV = "shap.csv"
IMPORTANCE_JSON = "importance.json"
CART_JSON = "cart.json"
RULES_TXT = "rules.txt"
MANIFEST_JSON = "manifest.json"

STAGE_ORDER = ("generate", "balance", "tune", "train", "evaluate", "explain")


class ConfigError(Exception):
    """Malformed or inconsistent configuration (exit 2)."""


class DataError(Exception):
    """Missing, corrupt, or mismatched stage inputs (exit 3)."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PipelineConfig:
    seed: int
    out: str
    generator: GeneratorConfig
    dataset_path: str
    resample: HybridConfig
    space: SearchSpace
    budget: int
    tune_cv: int
    eval_k: int
    threshold: float
    cart_max_depth: int
    cart_min_leaf: int
    cart_cv_folds: int


def _check_keys(d: dict, allowed, ctx: str) -> None:
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise ConfigError(f"{ctx}: unknown key(s): {', '.join(extra)}")


def _section(raw: dict, key: str) -> dict:
    val = raw.get(key, {})
    if not isinstance(val, dict):
        raise ConfigError(f"'{key}' must be an object")
    return val

def _as_int(v, ctx: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{ctx} must be an integer")
    return v


def _as_float(v, ctx: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{ctx} must be a number")
    return float(v)


def _as_bounds(v, ctx: str, integer: bool) -> tuple:
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise ConfigError(f"{ctx} must be a [lower, upper] pair")
    if integer:
        return (_as_int(v[0], ctx), _as_int(v[1], ctx))
    return (_as_float(v[0], ctx), _as_float(v[1], ctx))


def parse_config(raw: dict, seed_override=None, out_override=None) -> PipelineConfig:
    """Validate the full key set; unknown keys anywhere are hard errors."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    _check_keys(
        raw,
        ("seed", "out", "generator", "dataset", "resample", "search", "evaluate", "explain"),
        "config",
    )

    seed = seed_override if seed_override is not None else raw.get("seed")
    if seed is None:
        raise ConfigError("a master seed is required ('seed' key or --seed flag)")
    seed = _as_int(seed, "seed")
    if not (0 <= seed < 2**64):
        raise ConfigError("seed must fit in an unsigned 64-bit integer")

    out = out_override if out_override is not None else raw.get("out")
    if out is not None and not isinstance(out, str):
        raise ConfigError("'out' must be a string path")

    if ("generator" in raw) == ("dataset" in raw):
        raise ConfigError("exactly one of 'generator' or 'dataset' is required")

    # anything a dataclass rejects (bad prevalence, inverted bounds, ...) is a
    # config problem, so surface it as ConfigError here rather than at stage time
    try:
        generator = None
        if "generator" in raw:
            g = _section(raw, "generator")
            _check_keys(g, ("n", "prevalence", "noise_sd", "intercept", "coefficients"), "generator")
            if "n" not in g:
                raise ConfigError("generator: 'n' is required")
            kwargs = {"n": _as_int(g["n"], "generator.n"), "seed": seed}
            if "prevalence" in g:
                kwargs["prevalence"] = _as_float(g["prevalence"], "generator.prevalence")
            if "noise_sd" in g:
                kwargs["noise_sd"] = _as_float(g["noise_sd"], "generator.noise_sd")
            if "intercept" in g:
                kwargs["intercept"] = _as_float(g["intercept"], "generator.intercept")
            if "coefficients" in g:
                c = g["coefficients"]
                if not isinstance(c, (list, tuple)):
                    raise ConfigError("generator.coefficients must be a list")
                kwargs["coefficients"] = tuple(_as_float(v, "generator.coefficients") for v in c)
            generator = GeneratorConfig(**kwargs)

        dataset_path = None
        if "dataset" in raw:
            dsec = _section(raw, "dataset")
            _check_keys(dsec, ("path",), "dataset")
            if "path" not in dsec or not isinstance(dsec["path"], str):
                raise ConfigError("dataset: 'path' (string) is required")
            dataset_path = dsec["path"]

        rsec = _section(raw, "resample")
        _check_keys(rsec, ("adasyn", "nearmiss", "alpha"), "resample")
        asec = _section(rsec, "adasyn")
        _check_keys(asec, ("k_neighbors", "beta"), "resample.adasyn")
        akw = {}
        if "k_neighbors" in asec:
            akw["k_neighbors"] = _as_int(asec["k_neighbors"], "resample.adasyn.k_neighbors")
        if "beta" in asec:
            akw["beta"] = _as_float(asec["beta"], "resample.adasyn.beta")
        nsec = _section(rsec, "nearmiss")
        _check_keys(nsec, ("variant", "k_neighbors", "target_count"), "resample.nearmiss")
        nkw = {}
        if "variant" in nsec:
            nkw["variant"] = _as_int(nsec["variant"], "resample.nearmiss.variant")
        if "k_neighbors" in nsec:
            nkw["k_neighbors"] = _as_int(nsec["k_neighbors"], "resample.nearmiss.k_neighbors")
        if nsec.get("target_count") is not None:
            nkw["target_count"] = _as_int(nsec["target_count"], "resample.nearmiss.target_count")
        alpha = _as_float(rsec.get("alpha", 0.01), "resample.alpha")
        resample = HybridConfig(AdasynConfig(**akw), NearmissConfig(**nkw), alpha)

        ssec = _section(raw, "search")
        _check_keys(
            ssec,
            ("budget", "cv", "n_trees", "max_depth", "learning_rate", "min_split_gain"),
            "search",
        )
        skw = {}
        for axis, integer in (
            ("n_trees", True),
            ("max_depth", True),
            ("learning_rate", False),
            ("min_split_gain", False),
        ):
            if axis in ssec:
                skw[axis] = _as_bounds(ssec[axis], f"search.{axis}", integer)
        space = SearchSpace(**skw)
        budget = _as_int(ssec.get("budget", 32), "search.budget")
        if budget < 1:
            raise ConfigError("search.budget must be positive")
        tune_cv = _as_int(ssec.get("cv", 10), "search.cv")
        if tune_cv < 2:
            raise ConfigError("search.cv must be at least 2")

        esec = _section(raw, "evaluate")
        _check_keys(esec, ("k", "threshold"), "evaluate")
        eval_k = _as_int(esec.get("k", 100), "evaluate.k")
        if eval_k < 2:
            raise ConfigError("evaluate.k must be at least 2")
        threshold = _as_float(esec.get("threshold", 0.5), "evaluate.threshold")
        if not (0.0 < threshold < 1.0):
            raise ConfigError("evaluate.threshold must lie in (0,1)")

        xsec = _section(raw, "explain")
        _check_keys(xsec, ("max_depth", "min_leaf", "cv_folds"), "explain")
        cart_max_depth = _as_int(xsec.get("max_depth", 4), "explain.max_depth")
        cart_min_leaf = _as_int(xsec.get("min_leaf", 20), "explain.min_leaf")
        cart_cv_folds = _as_int(xsec.get("cv_folds", 10), "explain.cv_folds")
        CartConfig(cart_max_depth, cart_min_leaf, cart_cv_folds)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc

    return PipelineConfig(
        seed=seed,
        out=out,
        generator=generator,
        dataset_path=dataset_path,
        resample=resample,
        space=space,
        budget=budget,
        tune_cv=tune_cv,
        eval_k=eval_k,
        threshold=threshold,
        cart_max_depth=cart_max_depth,
        cart_min_leaf=cart_min_leaf,
        cart_cv_folds=cart_cv_folds,
    )


def canonical_dict(cfg: PipelineConfig) -> dict:
    """Fully resolved config with defaults materialized; 'out' is excluded so
    the digest identifies the experiment, not where it was written."""
    gen = None
    if cfg.generator is not None:
        gen = {
            "n": cfg.generator.n,
            "prevalence": cfg.generator.prevalence,
            "noise_sd": cfg.generator.noise_sd,
            "intercept": cfg.generator.intercept,
            "coefficients": list(cfg.generator.coefficients),
        }
    return {
        "seed": cfg.seed,
        "generator": gen,
        "dataset": {"path": cfg.dataset_path} if cfg.dataset_path else None,
        "resample": {
            "adasyn": {
                "k_neighbors": cfg.resample.adasyn.k_neighbors,
                "beta": cfg.resample.adasyn.beta,
            },
            "nearmiss": {
                "variant": cfg.resample.nearmiss.variant,
                "k_neighbors": cfg.resample.nearmiss.k_neighbors,
                "target_count": cfg.resample.nearmiss.target_count,
            },
            "alpha": cfg.resample.alpha,
        },
        "search": {
            "budget": cfg.budget,
            "cv": cfg.tune_cv,
            "n_trees": list(cfg.space.n_trees),
            "max_depth": list(cfg.space.max_depth),
            "learning_rate": list(cfg.space.learning_rate),
            "min_split_gain": list(cfg.space.min_split_gain),
        },
        "evaluate": {"k": cfg.eval_k, "threshold": cfg.threshold},
        "explain": {
            "max_depth": cfg.cart_max_depth,
            "min_leaf": cfg.cart_min_leaf,
            "cv_folds": cfg.cart_cv_folds,
        },
    }


def config_digest(cfg: PipelineConfig) -> str:
    blob = json.dumps(canonical_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def load_manifest(out_dir) -> dict:
    path = Path(out_dir) / MANIFEST_JSON
    if not path.exists():
        return {"tool_version": __version__, "config_digest": None, "stages": {}}
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: manifest is not valid JSON: {exc}") from exc


def update_manifest(out_dir, digest: str, stage: str, inputs: dict, outputs: dict, wall: float):
    manifest = load_manifest(out_dir)
    if manifest.get("config_digest") not in (None, digest):
        # a different experiment lived here; its stage records no longer apply
        manifest = {"stages": {}}
    manifest["tool_version"] = __version__
    manifest["config_digest"] = digest
    stages = manifest.get("stages", {})
    stages[stage] = {"inputs": inputs, "outputs": outputs, "wall_clock_s": wall}
    manifest["stages"] = {s: stages[s] for s in STAGE_ORDER if s in stages}
    text = json.dumps(manifest, indent=2)
    (Path(out_dir) / MANIFEST_JSON).write_text(text + "\n", encoding="utf-8")


def verify_manifest(out_dir) -> dict:
    """Recompute every recorded digest; raise DataError on any mismatch."""
    out = Path(out_dir)
    manifest = load_manifest(out)
    for stage, rec in manifest.get("stages", {}).items():
        for role in ("inputs", "outputs"):
            for name, want in rec.get(role, {}).items():
                p = Path(name)
                if not p.is_absolute():
                    p = out / name
                if not p.exists():
                    raise DataError(f"manifest {stage}/{role}: missing file {name}")
                got = file_digest(p)
                if got != want:
                    raise DataError(
                        f"manifest {stage}/{role}: digest mismatch for {name}: "
                        f"recorded {want[:12]}.., recomputed {got[:12]}.."
                    )
    return manifest


def _check_recorded(manifest: dict, name: str, digest: str) -> None:
    for stage, rec in manifest.get("stages", {}).items():
        want = rec.get("outputs", {}).get(name)
        if want is not None and want != digest:
            raise DataError(
                f"{name} no longer matches the digest recorded by stage '{stage}'"
            )


# ---------------------------------------------------------------------------
# artifact i/o
# ---------------------------------------------------------------------------


def _write_json_artifact(path: Path, payload: dict, digest: str) -> None:
    body = {"config_digest": digest}
    body.update(payload)
    path.write_text(json.dumps(body, indent=2) + "\n", encoding="utf-8")


def _read_json_artifact(path: Path, digest: str) -> dict:
    if not path.exists():
        raise DataError(f"missing stage input: {path.name} (run the earlier stages first)")
    try:
        body = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path.name}: not valid JSON: {exc}") from exc
    recorded = body.pop("config_digest", None)
    if recorded != digest:
        raise DataError(
            f"{path.name} was produced by a different config "
            f"(digest {str(recorded)[:12]}.. != {digest[:12]}..)"
        )
    return body


def _load_csv_with_sidecar(path: Path):
    sidecar = Path(str(path) + ".schema.json")
    if sidecar.exists():
        return load_csv(path, schema=load_schema_sidecar(sidecar))
    return load_csv(path)


def _write_csv_with_sidecar(ds, path: Path) -> list:
    """Sidecar keeps feature kinds across reload; interpolated synthetic rows
    would otherwise demote count columns to continuous and desync schemas."""
    write_csv(ds, path)
    sidecar = Path(str(path) + ".schema.json")
    write_schema_sidecar(ds.schema, sidecar)
    return [path.name, sidecar.name]


def _source_dataset(cfg: PipelineConfig, out: Path, manifest: dict):
    """The raw dataset a stage starts from: the configured CSV, or the
    generate stage's artifact. Returns (dataset, {name: digest})."""
    if cfg.dataset_path is not None:
        path = Path(cfg.dataset_path)
        if not path.exists():
            raise DataError(f"dataset path does not exist: {path}")
        try:
            ds = _load_csv_with_sidecar(path)
        except (ValueError, OSError) as exc:
            raise DataError(str(exc)) from exc
        return ds, {str(path): file_digest(path)}
    path = out / DATASET_CSV
    if not path.exists():
        raise DataError(f"missing {DATASET_CSV}; run the generate stage first")
    digest = file_digest(path)
    _check_recorded(manifest, DATASET_CSV, digest)
    try:
        ds = _load_csv_with_sidecar(path)
    except (ValueError, OSError) as exc:
        raise DataError(str(exc)) from exc
    return ds, {DATASET_CSV: digest}


def _best_params(out: Path, digest: str) -> BoostParams:
    body = _read_json_artifact(out / TUNE_RESULT_JSON, digest)
    try:
        return BoostParams.from_dict(body["best"]["params"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{TUNE_RESULT_JSON}: malformed best-trial record: {exc}") from exc


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------


def stage_generate(cfg: PipelineConfig, out: Path, digest: str, manifest: dict):
    if cfg.generator is None:
        raise ConfigError("generate requires 'generator' settings in the config")
    ds = generate_synthetic(cfg.generator)
    names = _write_csv_with_sidecar(ds, out / DATASET_CSV)
    return {}, {n: file_digest(out / n) for n in names}


def stage_balance(cfg: PipelineConfig, out: Path, digest: str, manifest: dict):
    ds, inputs = _source_dataset(cfg, out, manifest)
    adasyn_cfg = replace(cfg.resample.adasyn, seed=cfg.seed)
    balanced, audit = hybrid_balance(ds, adasyn_cfg, cfg.resample.nearmiss, cfg.resample.alpha)
    names = _write_csv_with_sidecar(balanced, out / BALANCED_CSV)
    _write_json_artifact(out / BALANCE_AUDIT_JSON, audit.to_dict(), digest)
    names.append(BALANCE_AUDIT_JSON)
    return inputs, {n: file_digest(out / n) for n in names}


def stage_tune(cfg: PipelineConfig, out: Path, digest: str, manifest: dict):
    ds, inputs = _source_dataset(cfg, out, manifest)
    result = tune(
        ds,
        space=cfg.space,
        budget=cfg.budget,
        cv=cfg.tune_cv,
        seed=cfg.seed,
        resample=cfg.resample,
        threshold=cfg.threshold,
    )
    _write_json_artifact(out / TUNE_RESULT_JSON, result.to_dict(), digest)
    return inputs, {TUNE_RESULT_JSON: file_digest(out / TUNE_RESULT_JSON)}


def stage_train(cfg: PipelineConfig, out: Path, digest: str, manifest: dict):
    path = out / BALANCED_CSV
    if not path.exists():
        raise DataError(f"missing {BALANCED_CSV}; run the balance stage first")
    bal_digest = file_digest(path)
    _check_recorded(manifest, BALANCED_CSV, bal_digest)
    try:
        balanced = _load_csv_with_sidecar(path)
    except (ValueError, OSError) as exc:
        raise DataError(str(exc)) from exc
    params = _best_params(out, digest)
    inputs = {
        BALANCED_CSV: bal_digest,
        TUNE_RESULT_JSON: file_digest(out / TUNE_RESULT_JSON),
    }
    model = train(balanced, params, seed=stream_seed(cfg.seed, "trial", 0))
    _write_json_artifact(out / MODEL_JSON, model.to_dict(), digest)
    return inputs, {MODEL_JSON: file_digest(out / MODEL_JSON)}


def stage_evaluate(cfg: PipelineConfig, out: Path, digest: str, manifest: dict):
    ds, inputs = _source_dataset(cfg, out, manifest)
    params = _best_params(out, digest)
    inputs[TUNE_RESULT_JSON] = file_digest(out / TUNE_RESULT_JSON)
    summary = cross_validate(
        ds,
        params,
        k=cfg.eval_k,
        seed=cfg.seed,
        resample=cfg.resample,
        threshold=cfg.threshold,
    )
    _write_json_artifact(out / METRICS_JSON, summary.to_dict(), digest)
    print(summary.table())
    return inputs, {METRICS_JSON: file_digest(out / METRICS_JSON)}


def stage_explain(cfg: PipelineConfig, out: Path, digest: str, manifest: dict):
    ds, inputs = _source_dataset(cfg, out, manifest)
    model_body = _read_json_artifact(out / MODEL_JSON, digest)
    inputs[MODEL_JSON] = file_digest(out / MODEL_JSON)
    try:
        model = GradientBoostedEnsemble.from_dict(model_body)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{MODEL_JSON}: malformed model record: {exc}") from exc

    sm = shap_matrix(model, ds)
    sm.to_csv(out / SHAP_CSV)
    ranked = importance_ranking(sm)
    _write_json_artifact(out / IMPORTANCE_JSON, {"ranking": ranked.to_dict()}, digest)
    cart_cfg = CartConfig(cfg.cart_max_depth, cfg.cart_min_leaf, cfg.cart_cv_folds, seed=cfg.seed)
    tree = fit_shap_cart(sm, ds.labels, cart_cfg)
    _write_json_artifact(out / CART_JSON, tree.to_dict(), digest)
    rules = extract_rules(tree)
    (out / RULES_TXT).write_text(rules_report(rules) + "\n", encoding="utf-8")
    names = (SHAP_CSV, IMPORTANCE_JSON, CART_JSON, RULES_TXT)
    return inputs, {n: file_digest(out / n) for n in names}


STAGE_FNS = {
    "generate": stage_generate,
    "balance": stage_balance,
    "tune": stage_tune,
    "train": stage_train,
    "evaluate": stage_evaluate,
    "explain": stage_explain,
}


def run_stages(cfg: PipelineConfig, out: Path, names) -> None:
    digest = config_digest(cfg)
    out.mkdir(parents=True, exist_ok=True)
    for name in names:
        manifest = load_manifest(out)
        if manifest.get("config_digest") not in (None, digest):
            manifest = {"stages": {}}
        t0 = time.perf_counter()
        inputs, outputs = STAGE_FNS[name](cfg, out, digest, manifest)
        update_manifest(out, digest, name, inputs, outputs, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _emit_error(stage: str, code: int, exc: Exception) -> None:
    record = {
        "error": {
            "stage": stage,
            "exit_code": code,
            "type": type(exc).__name__,
            "message": str(exc),
        }
    }
    print(json.dumps(record), file=sys.stderr)


def _set_threads(n) -> None:
    import numba

    if n is None:
        return
    numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="propflow",
        description="Rare-event propensity pipeline: balance, tune, train, evaluate, explain.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "generate": "draw the synthetic dataset described by the config",
        "balance": "oversample + undersample the dataset and audit distributions",
        "tune": "search boosting hyperparameters by cross-validated PR-AUC",
        "train": "fit the final ensemble on the balanced dataset",
        "evaluate": "cross-validate the tuned ensemble and report metrics",
        "explain": "attribute predictions, rank features, fit the rule surrogate",
        "run-all": "run every stage in order",
    }
    for name in (*STAGE_ORDER, "run-all"):
        sp = sub.add_parser(name, help=helps[name])
        sp.add_argument("--config", required=True, help="path to the JSON config")
        sp.add_argument("--out", default=None, help="output directory (overrides config)")
        sp.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
        sp.add_argument("--threads", type=int, default=None, help="kernel thread count")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG

    try:
        try:
            raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        cfg = parse_config(raw, seed_override=args.seed, out_override=args.out)
        if cfg.out is None:
            raise ConfigError("an output directory is required ('out' key or --out flag)")
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be positive")
    except ConfigError as exc:
        _emit_error("config", EXIT_CONFIG, exc)
        return EXIT_CONFIG

    _set_threads(args.threads)
    if args.command == "run-all":
        names = [s for s in STAGE_ORDER if s != "generate" or cfg.generator is not None]
    else:
        names = [args.command]

    current = names[0]
    try:
        for current in names:
            run_stages(cfg, Path(cfg.out), [current])
    except ConfigError as exc:
        _emit_error(current, EXIT_CONFIG, exc)
        return EXIT_CONFIG
    except DataError as exc:
        _emit_error(current, EXIT_DATA, exc)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - any stage fault maps to exit 4
        _emit_error(current, EXIT_STAGE, exc)
        return EXIT_STAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
