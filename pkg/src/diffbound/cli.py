"""Command-line pipeline: gen-data, train, bound, validate, sample.

Every command reads one config (file plus --set overrides), writes its
artifacts under --out, and drops a manifest recording the resolved config,
its hash, and the checksums of everything written.  Outputs contain no
timestamps or environment state, so a rerun with the same config is
byte-identical.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .bound import check_contraction, check_iterated_contraction, lambda_sweep, reports_to_csv
from .checkpoint import CheckpointError, load_model, save_model
from .config import ConfigError, ExperimentConfig, derived_rng, load_config, render_config
from .data import SampleSet, save_sample_set
from .denoiser import generate, init_model
from .schedule import schedule_to_csv
from .trainer import TrainingDiverged, loss_trace_to_csv, train
from .transport import exact_w1, sliced_w1_lower, trivial_coupling_upper
from . import figures

__all__ = ["main", "cmd_gen_data", "cmd_train", "cmd_bound", "cmd_validate", "cmd_sample"]


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_manifest(out: Path, verb: str, cfg: ExperimentConfig, artifacts: list[Path]) -> None:
    resolved = render_config(cfg)
    manifest = {
        "tool": "diffbound",
        "version": __version__,
        "command": verb,
        "config_sha256": hashlib.sha256(resolved.encode()).hexdigest(),
        "config": cfg.to_dict(),
        "seeds": {
            "data": cfg.seed_data,
            "train": cfg.seed_train,
            "bound": cfg.seed_bound,
            "validate": cfg.seed_validate,
        },
        "artifacts": {p.name: _sha256(p) for p in artifacts},
    }
    _write_json(out / f"{verb}.manifest.json", manifest)


def _ensure_out(out: Path) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gen_data(cfg: ExperimentConfig, out: Path) -> int:
    out = _ensure_out(out)
    rng = derived_rng(cfg.seed_data)
    data = replace(cfg.draw_data(cfg.n_train, rng), seed=cfg.seed_data)
    csv_path = out / "data.csv"
    save_sample_set(data, csv_path)
    written = [csv_path, csv_path.with_suffix(".meta.json")]
    if cfg.plots:
        fig_path = out / "data.png"
        figures.scatter_points(data.points, fig_path, data.domain_box, "training data")
        written.append(fig_path)
    _write_manifest(out, "gen-data", cfg, written)
    print(f"wrote {csv_path} ({data.n} points)")
    return 0


def _train_model(cfg: ExperimentConfig):
    data = cfg.draw_data(cfg.n_train, derived_rng(cfg.seed_data))
    schedule = cfg.build_schedule()
    model0 = init_model(
        schedule,
        data.domain_box,
        hidden=cfg.hidden,
        time_embed_dim=cfg.time_embed_dim,
        activation=cfg.activation,
        rng=derived_rng(cfg.seed_train, 0),
    )
    model, trace = train(model0, data, cfg.train_config())
    return model, trace


def cmd_train(cfg: ExperimentConfig, out: Path) -> int:
    out = _ensure_out(out)
    model, trace = _train_model(cfg)
    ckpt = out / "model.ckpt"
    checksum = save_model(model, ckpt)
    loss_csv = out / "loss.csv"
    loss_csv.write_text(loss_trace_to_csv(trace))
    sched_csv = out / "schedule.csv"
    sched_csv.write_text(schedule_to_csv(model.schedule))
    written = [ckpt, loss_csv, sched_csv]
    if cfg.plots:
        fig_path = out / "loss.png"
        figures.loss_curve(trace, fig_path)
        written.append(fig_path)
    _write_manifest(out, "train", cfg, written)
    print(f"wrote {ckpt} (checksum {checksum[:12]}..., final loss {trace[-1]:.4f})")
    return 0


def _load_checkpoint(cfg: ExperimentConfig, path: Path):
    model = load_model(path)
    ref = cfg.build_schedule()
    if model.schedule.T != ref.T or not np.array_equal(model.schedule.alphas, ref.alphas) \
            or not np.array_equal(model.schedule.sigmas, ref.sigmas):
        raise CheckpointError(
            f"{path}: checkpoint schedule does not match the configured schedule "
            f"(T={model.schedule.T} vs {ref.T}); pass the config the model was trained with"
        )
    return model


def _run_sweep(cfg: ExperimentConfig, model):
    sample = cfg.draw_data(cfg.bound_n, derived_rng(cfg.seed_bound, 0))
    meta = {
        "seed_bound": cfg.seed_bound,
        "sample_stream": [cfg.seed_bound, 0],
        "engine_stream": [cfg.seed_bound, 1],
    }
    return lambda_sweep(
        model,
        sample,
        cfg.lambda_list(),
        cfg.delta,
        derived_rng(cfg.seed_bound, 1),
        k_source=cfg.k_source,
        mode=cfg.mode,
        mc=cfg.mc_config(),
        k1_mode=cfg.k1_mode,
        extra_meta=meta,
    )


def cmd_bound(cfg: ExperimentConfig, out: Path, checkpoint: Path) -> int:
    out = _ensure_out(out)
    model = _load_checkpoint(cfg, checkpoint)
    reports = _run_sweep(cfg, model)
    csv_path = out / "bound.csv"
    csv_path.write_text(reports_to_csv(reports))
    json_path = out / "bound.json"
    _write_json(json_path, [r.to_json_dict() for r in reports])
    written = [csv_path, json_path]
    if cfg.plots:
        fig_path = out / "sweep.png"
        figures.sweep_figure(reports, fig_path)
        written.append(fig_path)
    _write_manifest(out, "bound", cfg, written)
    for r in reports:
        print(f"lambda={r.lam:g}: total={r.total:.4f} "
              f"(recon={r.term_recon:.4f} kl={r.term_kl:.4f} pac={r.term_pac:.4f} "
              f"cross={r.term_cross:.3g} sigma={r.term_sigma:.3g})")
    return 0


def cmd_validate(cfg: ExperimentConfig, out: Path, checkpoint: Path) -> int:
    out = _ensure_out(out)
    model = _load_checkpoint(cfg, checkpoint)

    mu = cfg.draw_data(cfg.validate_n_exact, derived_rng(cfg.seed_validate, 0))
    gen = generate(model, derived_rng(cfg.seed_validate, 1), n=cfg.validate_n_exact)
    est_exact = exact_w1(mu.points, gen)
    est_sliced = sliced_w1_lower(mu.points, gen, cfg.validate_projections, derived_rng(cfg.seed_validate, 2))
    est_trivial = trivial_coupling_upper(mu.points, gen)

    reports = _run_sweep(cfg, model)
    best = min(reports, key=lambda r: r.total)
    slack = 3.0 * best.total_se
    margin_sliced = best.total + slack - est_sliced.value
    margin_exact = best.total + slack - est_exact.value
    w1_ok = margin_sliced >= 0.0 and margin_exact >= 0.0

    steps = list(cfg.validate_steps) if cfg.validate_steps else list(range(1, model.schedule.T + 1))
    rng_con = derived_rng(cfg.seed_validate, 3)
    contraction = [
        check_contraction(model, t, cfg.validate_trials, rng_con, cfg.validate_noise,
                          probe_pairs=cfg.probe_pairs, probe_scales=cfg.probe_scales)
        for t in steps
    ]
    iterated = check_iterated_contraction(
        model, cfg.validate_trials, derived_rng(cfg.seed_validate, 4), cfg.validate_chains,
        probe_pairs=cfg.probe_pairs, probe_scales=cfg.probe_scales,
    )
    all_ok = w1_ok and all(c.passed for c in contraction) and iterated.passed

    report = {
        "passed": all_ok,
        "w1": {
            "n_points": cfg.validate_n_exact,
            "exact": est_exact.value,
            "sliced_lower": est_sliced.value,
            "trivial_upper": est_trivial.value,
            "bound_min_total": best.total,
            "bound_min_lambda": best.lam,
            "bound_total_se": best.total_se,
            "margin_vs_sliced": margin_sliced,
            "margin_vs_exact": margin_exact,
            "passed": w1_ok,
        },
        "contraction": {
            "steps": steps,
            "passed": all(c.passed for c in contraction),
            "worst_margin": max(c.worst_margin for c in contraction),
            "checks": [
                {"t": c.t, "kind": c.kind, "passed": c.passed, "worst_margin": c.worst_margin}
                for c in contraction
            ],
        },
        "iterated": {
            "passed": iterated.passed,
            "worst_margin": iterated.worst_margin,
            "prod_k": iterated.details["prod_k"],
            "sigma_weight": iterated.details["sigma_weight"],
        },
        "bound_totals": {repr(r.lam): r.total for r in reports},
    }
    json_path = out / "validity.json"
    _write_json(json_path, report)
    written = [json_path]
    if cfg.plots:
        fig_path = out / "validity.png"
        figures.validity_figure(
            reports,
            {"exact": est_exact, "lower_bound": est_sliced, "upper_bound": est_trivial},
            fig_path,
        )
        written.append(fig_path)
    _write_manifest(out, "validate", cfg, written)
    print(f"W1 exact={est_exact.value:.4f} sliced={est_sliced.value:.4f} "
          f"trivial={est_trivial.value:.4f} vs bound min total={best.total:.4f}")
    print(f"validity: {'PASS' if all_ok else 'FAIL'} (details in {json_path})")
    return 0 if all_ok else 1


def cmd_sample(cfg: ExperimentConfig, out: Path, checkpoint: Path, n: int | None = None) -> int:
    out = _ensure_out(out)
    model = _load_checkpoint(cfg, checkpoint)
    n = int(n) if n is not None else cfg.sample_n
    if n < 1:
        raise ConfigError("sample count must be >= 1")
    pts = generate(model, derived_rng(cfg.seed_validate, 9), n=n)
    ss = SampleSet(pts, "model", {"checkpoint": checkpoint.name, "n": n},
                   cfg.seed_validate, model.domain_box)
    csv_path = out / "samples.csv"
    save_sample_set(ss, csv_path)
    written = [csv_path, csv_path.with_suffix(".meta.json")]
    if cfg.plots:
        fig_path = out / "samples.png"
        figures.scatter_points(pts, fig_path, model.domain_box, "model samples")
        written.append(fig_path)
    _write_manifest(out, "sample", cfg, written)
    print(f"wrote {csv_path} ({n} samples)")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diffbound",
        description="Train tiny diffusion models and certify Wasserstein bounds on them.",
    )
    parser.add_argument("--version", action="version", version=f"diffbound {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True)
    specs = {
        "gen-data": "draw the training distribution and write it as CSV",
        "train": "train the denoiser and write a checkpoint",
        "bound": "evaluate the certified W1 bound over the lambda grid",
        "validate": "check the bound against empirical W1 and the contraction tests",
        "sample": "generate points from a trained model",
    }
    for verb, help_text in specs.items():
        p = sub.add_parser(verb, help=help_text)
        p.add_argument("--config", type=Path, default=None, help="config file; defaults used when omitted")
        p.add_argument("--set", dest="sets", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config key (repeatable)")
        p.add_argument("--out", type=Path, required=True, help="output directory")
        if verb in ("bound", "validate", "sample"):
            p.add_argument("--checkpoint", type=Path, default=None,
                           help="model checkpoint (default: <out>/model.ckpt)")
        if verb == "sample":
            p.add_argument("--n", type=int, default=None, help="number of samples (default: sample.n)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, tuple(args.sets))
        out = Path(args.out)
        if args.verb == "gen-data":
            return cmd_gen_data(cfg, out)
        if args.verb == "train":
            return cmd_train(cfg, out)
        ckpt = args.checkpoint if args.checkpoint is not None else out / "model.ckpt"
        if args.verb == "bound":
            return cmd_bound(cfg, out, ckpt)
        if args.verb == "validate":
            return cmd_validate(cfg, out, ckpt)
        return cmd_sample(cfg, out, ckpt, args.n)
    except (ConfigError, CheckpointError, TrainingDiverged) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
