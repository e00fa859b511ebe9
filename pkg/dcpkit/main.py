"""dcpkit command-line entry point.

Every subcommand prints one JSON document on stdout; logs go to stderr.
Library errors are reported as ``{"error": code, "message": ...}`` on stderr
and mapped to exit codes 2 (config), 3 (input) and 4 (numeric).
"""

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from dcpkit import __version__
from dcpkit.config import get_settings
from dcpkit.core.descriptors import SamplingGeometry, encode_descriptor, regional_histograms
from dcpkit.core.errors import ConfigError, DcpkitError, InputError
from dcpkit.core.filtering import fdg_filter, tt_normalize
from dcpkit.core.imaging import load_landmarks, load_pgm, save_pgm
from dcpkit.models.enums import (
    DescriptorKind,
    FeatureName,
    FusionMode,
    HistogramMetric,
    Interpolation,
    PipelineName,
    Preset,
)
from dcpkit.models.schemas import DatasetManifest, ExperimentConfig, FDGBank, TTParams
from dcpkit.services.benchmark import parameter_sweep, time_descriptors
from dcpkit.services.evaluation import load_entries, run_protocol, split_roles
from dcpkit.services.grouping_entropy import entropy_scan, radius_sweep
from dcpkit.services.learning import fusion_fit, pca_fit, pca_project, plda_fit
from dcpkit.services.pipelines import MdmlPipeline
from dcpkit.services.representation import MdDcpsConfig, build_mdml
from dcpkit.services.synthesis import gaussian_field_corpus, synth_corpus
from dcpkit.utils.file_handlers import BlockContainer, load_artifact, save_artifact
from dcpkit.utils.logger import setup_logger
from dcpkit.utils.parallel import resolve_threads

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")

# ``represent`` names the face protocol; both map onto the MDML canvas
REPRESENT_PRESETS = {
    "feret": Preset.MDML180,
    "lfw": Preset.LFW_LIKE,
    Preset.MDML180.value: Preset.MDML180,
    Preset.LFW_LIKE.value: Preset.LFW_LIKE,
}


# ============================================================================
# Argument helpers
# ============================================================================


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from e


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from e


def _str_list(text: str) -> List[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _radius_pairs(text: str) -> List[Tuple[float, float]]:
    """``2:3,4:6`` -> [(2.0, 3.0), (4.0, 6.0)]."""
    pairs = []
    for item in _str_list(text):
        try:
            r_in, r_ex = item.split(":")
            pairs.append((float(r_in), float(r_ex)))
        except ValueError as e:
            raise argparse.ArgumentTypeError(f"expected R_IN:R_EX pairs, got {item!r}") from e
    return pairs


def _experiment_config(args: argparse.Namespace, **overrides: Any) -> ExperimentConfig:
    """
    Preset (or --config file) defaults, then explicit flags, then the global seed.

    Overrides whose value is None are left at the preset default.
    """
    settings = get_settings()
    values: Dict[str, Any] = {}
    preset = getattr(args, "preset", None)
    config_path = getattr(args, "config", None)
    if config_path is not None:
        base = ExperimentConfig.load(config_path)
        values = base.model_dump(exclude={"preset"})
        preset = preset or base.preset
    values.update({k: v for k, v in overrides.items() if v is not None})
    if args.seed is not None:
        values["seed"] = args.seed
    elif config_path is None:
        values["seed"] = settings.SEED
    return ExperimentConfig.from_preset(preset or settings.DEFAULT_PRESET, **values)


# ============================================================================
# Subcommands
# ============================================================================


def cmd_filter(args: argparse.Namespace) -> Dict[str, Any]:
    img = load_pgm(args.image)
    out_dir = Path(args.out_dir) if args.out_dir else Path(args.image).parent
    stem = Path(args.image).stem
    try:
        if args.op == "tt":
            params = TTParams(
                gamma=args.gamma,
                sigma1=args.sigma1,
                sigma2=args.sigma2,
                alpha=args.alpha,
                tau=args.tau,
            )
            outputs = [save_pgm(tt_normalize(img, params), out_dir / f"{stem}_tt.pgm")]
        else:
            bank = FDGBank(
                orientations=tuple(math.radians(a) for a in args.orientations), sigma=args.sigma
            )
            outputs = [
                save_pgm(filtered, out_dir / f"{stem}_fdg{k}.pgm")
                for k, filtered in enumerate(fdg_filter(img, bank))
            ]
    except ValidationError as e:
        raise ConfigError(f"Invalid filter parameters: {e}") from e
    return {"op": args.op, "outputs": [str(p) for p in outputs]}


def cmd_encode(args: argparse.Namespace) -> Dict[str, Any]:
    cfg = _experiment_config(
        args,
        descriptor=args.descriptor,
        r_in=args.rin,
        r_ex=args.rex,
        grid_n=args.grid,
        lbp_radius=args.lbp_radius,
        ltp_threshold=args.ltp_threshold,
        interpolation=args.interpolation,
        histogram_normalize=args.normalize or None,
    )
    img = load_pgm(args.image)
    cm = encode_descriptor(
        img,
        cfg.descriptor,
        r_in=cfg.r_in,
        r_ex=cfg.r_ex,
        lbp_radius=cfg.lbp_radius,
        ltp_threshold=cfg.ltp_threshold,
        interpolation=cfg.interpolation,
    )
    feature = regional_histograms(cm, cfg.grid_n, cfg.histogram_normalize)
    values = feature.values.astype(np.float32 if feature.normalized else np.uint32)

    out = Path(args.out) if args.out else Path(args.image).with_suffix(".feat")
    save_artifact(
        BlockContainer(
            blocks={"histograms": values},
            header={**feature.layout(), "source": str(args.image)},
        ),
        out,
        config_hash=cfg.config_hash(),
        seed=cfg.seed,
    )
    return {
        "output": str(out),
        "descriptor": cfg.descriptor.value,
        "length": int(values.size),
        "config_hash": cfg.config_hash(),
    }


def cmd_represent(args: argparse.Namespace) -> Dict[str, Any]:
    preset = REPRESENT_PRESETS[args.preset]
    cfg = ExperimentConfig.from_preset(
        preset, seed=args.seed if args.seed is not None else get_settings().SEED
    )
    features = build_mdml(
        load_pgm(args.image),
        load_landmarks(args.landmarks),
        MdDcpsConfig.from_experiment(cfg),
        holistic_grid=cfg.holistic_grid,
        threads=resolve_threads(args.threads),
    )
    blocks = {name.value: vec.values for name, vec in features.items()}
    lengths = {name: int(v.size) for name, v in blocks.items()}
    save_artifact(
        BlockContainer(blocks=blocks, header={"names": list(blocks), "lengths": lengths}),
        Path(args.out),
        config_hash=cfg.config_hash(),
        seed=cfg.seed,
    )
    return {"output": str(args.out), "lengths": lengths, "config_hash": cfg.config_hash()}


def cmd_entropy_scan(args: argparse.Namespace) -> Dict[str, Any]:
    seed = args.seed if args.seed is not None else get_settings().SEED
    if args.corpus:
        paths = sorted(Path(args.corpus).glob("*.pgm"))
        if not paths:
            raise InputError(f"No .pgm images in {args.corpus}")
        corpus = [load_pgm(p) for p in paths]
        source = str(args.corpus)
    else:
        corpus = gaussian_field_corpus(args.fields, args.size, args.length_scale, seed)
        source = (
            f"gaussian-fields(n={args.fields}, size={args.size}, "
            f"length_scale={args.length_scale})"
        )

    threads = resolve_threads(args.threads)
    interpolation = Interpolation(args.interpolation)
    if args.sweep:
        r_ins, r_exs = args.sweep
        if len(r_ins) != len(r_exs):
            raise ConfigError("--sweep needs as many R_in values as R_ex values")
        reports = radius_sweep(corpus, list(zip(r_ins, r_exs)), threads, interpolation)
        return {"source": source, "reports": [r.model_dump(mode="json") for r in reports]}

    report = entropy_scan(corpus, SamplingGeometry(args.rin, args.rex, interpolation), threads)
    return {"source": source, **report.model_dump(mode="json")}


def _training_matrix(args: argparse.Namespace) -> Tuple[np.ndarray, List[str], ExperimentConfig]:
    """Training rows and labels from a block file or from a manifest plus feature name."""
    cfg = _experiment_config(args)
    if args.features:
        container = load_artifact(args.features)
        if args.block not in container.blocks:
            raise InputError(f"{args.features} has no block {args.block!r}")
        X = np.atleast_2d(container.blocks[args.block])
        labels = [str(v) for v in container.header.get("labels", [])]
        return X, labels, cfg

    manifest_path = Path(args.manifest)
    manifest = DatasetManifest.load(manifest_path)
    threads = resolve_threads(args.threads)
    train, _, _ = split_roles(load_entries(manifest, manifest_path.parent, threads))
    pipeline = MdmlPipeline(cfg, threads, "wpca")
    X = pipeline.feature_matrix(train, FeatureName(args.feature))
    return X, [e.subject for e in train], cfg


def _clipped_dim(requested: int, X: np.ndarray) -> int:
    return max(1, min(requested, X.shape[0] - 1, X.shape[1]))


def cmd_train_wpca(args: argparse.Namespace) -> Dict[str, Any]:
    X, _, cfg = _training_matrix(args)
    model = pca_fit(X, _clipped_dim(args.dim or cfg.pca_dim, X), truncate_to_rank=True)
    save_artifact(model, Path(args.out), config_hash=cfg.config_hash(), seed=cfg.seed)
    return {
        "output": str(args.out),
        "d_in": model.d_in,
        "d_out": model.d_out,
        "n_samples": int(X.shape[0]),
        "config_hash": cfg.config_hash(),
    }


def cmd_train_plda(args: argparse.Namespace) -> Dict[str, Any]:
    X, labels, cfg = _training_matrix(args)
    if len(labels) != X.shape[0]:
        raise InputError(f"Need one label per training row, got {len(labels)} for {X.shape[0]}")
    pca = pca_fit(X, _clipped_dim(args.pca_dim or cfg.pca_dim, X), truncate_to_rank=True)
    Y = pca_project(pca, X)
    d_h = min(args.dh or cfg.plda_dh, pca.d_out)
    d_w = min(args.dw or cfg.plda_dw, pca.d_out)
    model = plda_fit(Y, labels, d_h, d_w, args.iters or cfg.plda_iters, cfg.seed)

    out = Path(args.out)
    pca_out = out.with_name(f"{out.stem}_pca.model")
    save_artifact(pca, pca_out, config_hash=cfg.config_hash(), seed=cfg.seed)
    save_artifact(model, out, config_hash=cfg.config_hash(), seed=cfg.seed)
    return {
        "output": str(out),
        "pca_output": str(pca_out),
        "dim": model.dim,
        "d_h": model.d_h,
        "d_w": model.d_w,
        "log_likelihoods": list(model.log_likelihoods),
        "config_hash": cfg.config_hash(),
    }


def _read_scores_csv(path: Path) -> Tuple[np.ndarray, np.ndarray]:
    """Header row, one column per scorer, label (0/1) in the last column."""
    try:
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except FileNotFoundError as e:
        raise InputError(f"Scores file not found: {path}") from e
    except ValueError as e:
        raise InputError(f"Scores file {path} is not numeric CSV: {e}") from e
    if table.shape[1] < 2:
        raise InputError(f"Scores file {path} needs score columns and a label column")
    return table[:, :-1], table[:, -1] > 0.5


def cmd_train_fusion(args: argparse.Namespace) -> Dict[str, Any]:
    cfg = _experiment_config(args, fusion=args.mode, fusion_c=args.c)
    scores, labels = _read_scores_csv(Path(args.scores))
    model = fusion_fit(scores, labels, cfg.fusion_c, cfg.fusion, args.iters)
    save_artifact(model, Path(args.out), config_hash=cfg.config_hash(), seed=cfg.seed)
    return {
        "output": str(args.out),
        "mode": model.mode.value,
        "weights": [float(w) for w in model.weights],
        "bias": float(model.bias),
        "config_hash": cfg.config_hash(),
    }


def _run_protocol(args: argparse.Namespace, protocol: str) -> Dict[str, Any]:
    cfg = _experiment_config(
        args,
        pipeline=args.pipeline,
        descriptor=args.descriptor,
        metric=args.metric,
        grid_n=args.grid,
        r_in=args.rin,
        r_ex=args.rex,
        fusion=args.fusion,
    )
    report, _ = run_protocol(
        Path(args.manifest),
        cfg,
        protocol,
        Path(args.artifacts) if args.artifacts else None,
        resolve_threads(args.threads),
        Path(args.roc_csv) if getattr(args, "roc_csv", None) else None,
    )
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(report.model_dump_json(indent=2), encoding="utf-8")
    return report.model_dump(mode="json")


def cmd_identify(args: argparse.Namespace) -> Dict[str, Any]:
    return _run_protocol(args, "identification")


def cmd_verify(args: argparse.Namespace) -> Dict[str, Any]:
    return _run_protocol(args, "verification")


def cmd_benchmark(args: argparse.Namespace) -> Dict[str, Any]:
    seed = args.seed if args.seed is not None else get_settings().SEED
    if not args.sweep:
        return time_descriptors(
            args.descriptor,
            size=args.size,
            seed=seed,
            repeats=args.repeats,
            r_in=args.rin,
            r_ex=args.rex,
            grid_n=args.grid,
        )
    corpus = synth_corpus(seed, args.ids, args.per_id, args.variation)
    rows = parameter_sweep(
        corpus,
        args.descriptor,
        args.grids,
        args.radii,
        base=_experiment_config(args),
        threads=resolve_threads(args.threads),
    )
    return {"n_ids": args.ids, "n_per_id": args.per_id, "sweep": rows}


def cmd_synth_corpus(args: argparse.Namespace) -> Dict[str, Any]:
    seed = args.seed if args.seed is not None else get_settings().SEED
    corpus = synth_corpus(
        seed,
        args.ids,
        args.per_id,
        args.variation,
        out_dir=Path(args.out),
        noise_sigma=args.noise_sigma,
        n_folds=args.folds,
        n_train_ids=args.train_ids,
    )
    return {
        "root": str(corpus.root),
        "manifest": str(Path(args.out) / "manifest.json"),
        "n_images": len(corpus.images),
        "n_pairs": len(corpus.manifest.pairs),
        "seed": seed,
    }


# ============================================================================
# Parser
# ============================================================================


def _config_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument(
        "--preset",
        choices=[p.value for p in Preset],
        default=None,
        help="Experiment preset (default: DCPKIT_DEFAULT_PRESET)",
    )
    parent.add_argument("--config", type=Path, default=None, help="JSON experiment config file")
    return parent


def _add_radii(
    p: argparse.ArgumentParser, defaults: Tuple[Optional[float], Optional[float]]
) -> None:
    def suffix(v: Optional[float]) -> str:
        return f" (default: {v})" if v is not None else " (default: preset)"

    p.add_argument(
        "--rin", type=float, default=defaults[0], help="Inner sampling radius" + suffix(defaults[0])
    )
    p.add_argument(
        "--rex", type=float, default=defaults[1], help="Outer sampling radius" + suffix(defaults[1])
    )


def _add_training_inputs(p: argparse.ArgumentParser) -> None:
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--features", type=Path, help="Block file holding a (n, d) training matrix")
    source.add_argument(
        "--manifest", type=Path, help="Dataset manifest; training entries are encoded"
    )
    p.add_argument("--block", default="X", help="Block name in --features (default: X)")
    p.add_argument(
        "--feature",
        choices=[f.value for f in FeatureName],
        default=FeatureName.H1.value,
        help="MDML feature to train on with --manifest (default: H1)",
    )
    p.add_argument("--out", type=Path, required=True, help="Output .model file")


def _add_protocol_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", type=Path, required=True, help="Dataset manifest JSON")
    p.add_argument(
        "--pipeline",
        choices=[n.value for n in PipelineName],
        default=None,
        help="Matching pipeline (default: descriptor)",
    )
    p.add_argument("--descriptor", choices=[d.value for d in DescriptorKind], default=None)
    p.add_argument("--metric", choices=[m.value for m in HistogramMetric], default=None)
    p.add_argument("--grid", type=int, default=None, help="Regions per side (default: preset)")
    _add_radii(p, (None, None))
    p.add_argument("--fusion", choices=[m.value for m in FusionMode], default=None)
    p.add_argument("--out", type=Path, default=None, help="Also write the report JSON here")
    p.add_argument(
        "--artifacts", type=Path, default=None, help="Directory for features, models and run.json"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dcpkit",
        description="Dual-Cross Pattern descriptors, MDML features and face matching.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--threads", type=int, default=None, help="Worker threads (default: DCPKIT_THREADS)"
    )
    parser.add_argument("--seed", type=int, default=None, help="Global seed (default: DCPKIT_SEED)")
    parser.add_argument(
        "--log-level",
        choices=LOG_LEVELS,
        default=None,
        help="Logging level (default: DCPKIT_LOG_LEVEL)",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    config_parent = _config_parent()

    p = sub.add_parser("filter", help="TT photometric normalization or FDG filtering")
    p.add_argument("image", type=Path, help="Input PGM")
    p.add_argument("--op", choices=["tt", "fdg"], required=True)
    p.add_argument("--sigma", type=float, default=1.0, help="FDG Gaussian sigma (default: 1.0)")
    p.add_argument(
        "--orientations",
        type=_float_list,
        default=[0.0, 45.0, 90.0, 135.0],
        help="FDG directions in degrees (default: 0,45,90,135)",
    )
    p.add_argument("--gamma", type=float, default=0.2, help="TT gamma (default: 0.2)")
    p.add_argument("--sigma1", type=float, default=1.4, help="TT inner DoG sigma (default: 1.4)")
    p.add_argument("--sigma2", type=float, default=2.0, help="TT outer DoG sigma (default: 2.0)")
    p.add_argument(
        "--alpha", type=float, default=0.1, help="TT equalization exponent (default: 0.1)"
    )
    p.add_argument("--tau", type=float, default=10.0, help="TT clip threshold (default: 10.0)")
    p.add_argument(
        "--out-dir", type=Path, default=None, help="Output directory (default: next to input)"
    )
    p.set_defaults(handler=cmd_filter)

    p = sub.add_parser(
        "encode", parents=[config_parent], help="Regional code histograms of one image"
    )
    p.add_argument("image", type=Path, help="Input PGM")
    p.add_argument("--descriptor", choices=[d.value for d in DescriptorKind], default=None)
    _add_radii(p, (None, None))
    p.add_argument("--grid", type=int, default=None, help="Regions per side (default: preset)")
    p.add_argument(
        "--lbp-radius", type=float, default=None, help="LBP-family radius (default: --rin)"
    )
    p.add_argument("--ltp-threshold", type=float, default=None, help="LTP threshold (default: 5)")
    p.add_argument("--interpolation", choices=[i.value for i in Interpolation], default=None)
    p.add_argument("--normalize", action="store_true", help="L1-normalize every region histogram")
    p.add_argument("--out", type=Path, default=None, help="Output .feat (default: <image>.feat)")
    p.set_defaults(handler=cmd_encode)

    p = sub.add_parser("represent", help="Nine MDML feature vectors of one face")
    p.add_argument("--image", type=Path, required=True)
    p.add_argument("--landmarks", type=Path, required=True, help="49-point landmark file")
    p.add_argument(
        "--preset", choices=list(REPRESENT_PRESETS), default="feret", help="(default: feret)"
    )
    p.add_argument("--out", type=Path, required=True, help="Output .mdml")
    p.set_defaults(handler=cmd_represent)

    p = sub.add_parser("entropy-scan", help="Joint entropy of the 35 direction groupings")
    p.add_argument(
        "--corpus", type=Path, default=None, help="Directory of PGMs (default: Gaussian fields)"
    )
    p.add_argument("--fields", type=int, default=50, help="Generated fields (default: 50)")
    p.add_argument("--size", type=int, default=128, help="Generated field side (default: 128)")
    p.add_argument(
        "--length-scale", type=float, default=4.0, help="Field correlation length (default: 4)"
    )
    _add_radii(p, (4.0, 6.0))
    p.add_argument(
        "--sweep",
        nargs=2,
        type=_float_list,
        metavar=("RIN_LIST", "REX_LIST"),
        default=None,
        help="Comma-separated radii, paired in order",
    )
    p.add_argument(
        "--interpolation",
        choices=[i.value for i in Interpolation],
        default=Interpolation.BILINEAR.value,
    )
    p.set_defaults(handler=cmd_entropy_scan)

    p = sub.add_parser("train-wpca", parents=[config_parent], help="Fit a PCA/WPCA model")
    _add_training_inputs(p)
    p.add_argument(
        "--dim", type=int, default=None, help="Output dimension (default: preset, clipped)"
    )
    p.set_defaults(handler=cmd_train_wpca)

    p = sub.add_parser("train-plda", parents=[config_parent], help="Fit PCA followed by PLDA")
    _add_training_inputs(p)
    p.add_argument(
        "--pca-dim", type=int, default=None, help="PCA dimension (default: preset, clipped)"
    )
    p.add_argument(
        "--dh", type=int, default=None, help="Identity subspace dimension (default: 100)"
    )
    p.add_argument(
        "--dw", type=int, default=None, help="Within-identity subspace dimension (default: 100)"
    )
    p.add_argument("--iters", type=int, default=None, help="EM iterations (default: 50)")
    p.set_defaults(handler=cmd_train_plda)

    p = sub.add_parser("train-fusion", parents=[config_parent], help="Learn score fusion weights")
    p.add_argument(
        "--scores", type=Path, required=True, help="CSV with score columns and a 0/1 label last"
    )
    p.add_argument("--mode", choices=[m.value for m in FusionMode], default=FusionMode.LINEAR.value)
    p.add_argument("--c", type=float, default=None, help="Hinge loss cost (default: preset)")
    p.add_argument("--iters", type=int, default=1000, help="Subgradient iterations (default: 1000)")
    p.add_argument("--out", type=Path, required=True, help="Output .model file")
    p.set_defaults(handler=cmd_train_fusion)

    p = sub.add_parser(
        "identify", parents=[config_parent], help="Closed-set identification protocol"
    )
    _add_protocol_args(p)
    p.set_defaults(handler=cmd_identify)

    p = sub.add_parser("verify", parents=[config_parent], help="Pair verification protocol")
    _add_protocol_args(p)
    p.add_argument("--roc-csv", type=Path, default=None, help="Write ROC samples as CSV")
    p.set_defaults(handler=cmd_verify)

    p = sub.add_parser(
        "benchmark", parents=[config_parent], help="Encoder timing or parameter sweep"
    )
    p.add_argument(
        "--descriptor", type=_str_list, default=["dcp", "lbp"], help="(default: dcp,lbp)"
    )
    p.add_argument("--size", type=int, default=1000, help="Noise image side (default: 1000)")
    p.add_argument("--repeats", type=int, default=3, help="Timed runs, best kept (default: 3)")
    _add_radii(p, (4.0, 6.0))
    p.add_argument("--grid", type=int, default=8, help="Regions per side (default: 8)")
    p.add_argument(
        "--sweep", action="store_true", help="Rank-1 sweep on a synthetic corpus instead"
    )
    p.add_argument("--ids", type=int, default=10, help="Sweep corpus identities (default: 10)")
    p.add_argument(
        "--per-id", type=int, default=3, help="Sweep corpus images per identity (default: 3)"
    )
    p.add_argument(
        "--variation",
        type=_str_list,
        default=["illumination-ramp", "noise"],
        help="Sweep corpus variations (default: illumination-ramp,noise)",
    )
    p.add_argument("--grids", type=_int_list, default=[7, 8, 9, 10], help="(default: 7,8,9,10)")
    p.add_argument(
        "--radii",
        type=_radius_pairs,
        default=[(2.0, 3.0), (3.0, 5.0), (4.0, 6.0), (5.0, 7.0)],
        help="R_IN:R_EX pairs (default: 2:3,3:5,4:6,5:7)",
    )
    p.set_defaults(handler=cmd_benchmark)

    p = sub.add_parser("synth-corpus", help="Write a deterministic synthetic face corpus")
    p.add_argument("--ids", type=int, default=20, help="Identities (default: 20)")
    p.add_argument("--per-id", type=int, default=5, help="Images per identity (default: 5)")
    p.add_argument(
        "--train-ids", type=int, default=0, help="Extra training-only identities (default: 0)"
    )
    p.add_argument(
        "--variation",
        type=_str_list,
        default=[],
        help="Comma list of noise, illumination-ramp, small-pose-jitter (default: none)",
    )
    p.add_argument("--noise-sigma", type=float, default=3.0, help="Additive noise sd (default: 3)")
    p.add_argument("--folds", type=int, default=10, help="Verification folds (default: 10)")
    p.add_argument("--out", type=Path, required=True, help="Output directory")
    p.set_defaults(handler=cmd_synth_corpus)

    return parser


def parse_args(argv: Sequence[str]) -> argparse.Namespace:
    return build_parser().parse_args(argv)


def _emit_error(code: str, message: str) -> None:
    print(json.dumps({"error": code, "message": message}), file=sys.stderr)


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    logger = setup_logger(level=args.log_level)
    handler: Callable[[argparse.Namespace], Dict[str, Any]] = args.handler
    try:
        if args.threads is not None and args.threads < 1:
            raise ConfigError(f"--threads must be at least 1, got {args.threads}")
        result = handler(args)
    except DcpkitError as e:
        logger.debug("Command failed", exc_info=True)
        _emit_error(e.code, str(e))
        return e.exit_code
    except ValidationError as e:
        _emit_error(ConfigError.code, str(e))
        return ConfigError.exit_code
    except OSError as e:
        _emit_error(InputError.code, str(e))
        return InputError.exit_code

    print(json.dumps(result, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
