"""Command-line pipeline: generate, noise, train, predict, spectrum,
compare, validate.

Every command takes ``--config PATH`` plus optional ``key=value``
overrides, echoes its resolved configuration, and writes versioned text
files.  Exit status: 0 success, 1 usage/configuration error, 2 numerical
failure.  ``OPDYN_THREADS`` caps the linear-algebra thread pool.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path


def _cap_threads():
    cap = os.environ.get("OPDYN_THREADS")
    if cap:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, cap)


_cap_threads()

import numpy as np  # noqa: E402  (thread caps must precede the import)

from . import exact, noise as noise_mod, spectra, trajio  # noqa: E402
from .config import ConfigError, RunConfig  # noqa: E402
from .odeint import StepFailure  # noqa: E402
from .pauli import TruncationPolicy  # noqa: E402
from .training import (  # noqa: E402
    TrainingDiverged,
    load_checkpoint,
    predict,
    save_checkpoint,
    train,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2


def _echo(config: RunConfig) -> None:
    print(config.echo())


def cmd_generate(config: RunConfig, args) -> int:
    spec = config.tfim()
    observable = config.observable()
    policy = config.truncation()
    grid = config.generation_grid()
    if config["truncation.sweep"]:
        terms = [p for _, p in observable.terms]
        for radius in range(spec.n_sites // 2 + 1):
            swept = TruncationPolicy(
                mode="window", window_radius=radius,
                symmetry_filter=policy.symmetry_filter,
            )
            from .pauli import truncated_basis
            print(f"radius {radius}: {len(truncated_basis(swept, terms))} strings")
    traj = exact.generate_trajectory(spec, observable, policy, grid)
    traj.meta["seed"] = str(config["seed"])
    print(f"basis size {len(traj.basis)} ({policy.describe()})")
    trajio.write_trajectory(traj, args.out)
    print(f"wrote {args.out}")
    if args.plot:
        from .plots import plot_trajectory

        plot_trajectory(traj, Path(args.out).with_suffix(".png"))
    return EXIT_OK


def cmd_noise(config: RunConfig, args) -> int:
    traj = trajio.read_trajectory(args.infile)
    noisy = noise_mod.apply_noise(traj, config.noise())
    trajio.write_trajectory(noisy, args.out)
    print(f"wrote {args.out}")
    if args.plot:
        from .plots import plot_trajectory

        plot_trajectory(noisy, Path(args.out).with_suffix(".png"))
    return EXIT_OK


def cmd_train(config: RunConfig, args) -> int:
    traj = trajio.read_trajectory(args.infile)
    net = config.network(input_dim=len(traj.basis))
    tconf = config.train_config()
    solver = config.solver()
    params = None
    if config["io.checkpoint"]:
        prev_spec, params, _ = load_checkpoint(config["io.checkpoint"])
        if prev_spec != net:
            raise ConfigError("checkpoint network spec differs from configuration")
        print(f"resuming from {config['io.checkpoint']}")
    params, history = train(traj, net, tconf, solver, params=params)
    best_val = min(h[2] for h in history)
    meta = {
        "seed": str(tconf.seed),
        "epochs_run": str(len(history)),
        "best_val_loss": repr(best_val),
        "basis": " ".join(traj.basis.labels),
    }
    save_checkpoint(args.out, net, params, meta)
    hist_path = Path(str(args.out) + ".history")
    hist_path.write_text(
        "\n".join(f"{e} {tr:.17g} {vl:.17g}" for e, tr, vl in history) + "\n"
    )
    print(f"trained {len(history)} epochs, best validation loss {best_val:.3e}")
    print(f"wrote {args.out} and {hist_path}")
    return EXIT_OK


def cmd_predict(config: RunConfig, args) -> int:
    ckpt_path = config["io.checkpoint"]
    if not ckpt_path:
        raise ConfigError("predict needs io.checkpoint")
    net, params, _ = load_checkpoint(ckpt_path)
    traj = trajio.read_trajectory(args.infile)
    t0 = config["predict.t0"]
    idx = np.argmin(np.abs(traj.times - t0))
    if abs(traj.times[idx] - t0) > 1e-9:
        raise ConfigError(
            f"t0={t0} is not a grid point of the input trajectory "
            f"(span [{traj.times[0]:g}, {traj.times[-1]:g}])"
        )
    grid = config.prediction_grid()
    # provenance meta keeps the file name only, so identical runs in
    # different directories produce identical bytes
    pred = predict(net, params, traj.coeffs[idx], t0, grid, config.solver(),
                   basis=traj.basis, meta={"source": Path(args.infile).name})
    trajio.write_trajectory(pred, args.out)
    print(f"wrote {args.out}")
    if args.plot:
        from .plots import plot_trajectory

        plot_trajectory(pred, Path(args.out).with_suffix(".png"))
    return EXIT_OK


def _spectrum_of(traj, config: RunConfig):
    spec = config.tfim()
    observable = config.observable()
    series = spectra.assemble_two_point(traj, spec, observable)
    return spectra.fft_spectrum(traj.times, series, config["spectrum.window"])


def cmd_spectrum(config: RunConfig, args) -> int:
    traj = trajio.read_trajectory(args.infile)
    spectrum = _spectrum_of(traj, config)
    peaks = spectra.find_peaks(spectrum, config["spectrum.threshold_fraction"])
    meta = {"source": Path(args.infile).name}
    if spectrum.resolution > config["spectrum.min_resolution"]:
        meta["low_resolution"] = "true"
        print(f"warning: resolution {spectrum.resolution:.3g} is too coarse "
              "to separate nearby lines")
    spectra.write_spectrum(spectrum, args.out, meta)
    peaks_path = Path(str(args.out) + ".peaks")
    spectra.write_peaks(peaks, peaks_path, meta)
    print(f"wrote {args.out} and {peaks_path}")
    if args.plot:
        from .plots import plot_spectrum

        lines = exact.exact_spectral_lines(config.tfim(), config.observable())
        plot_spectrum(spectrum, peaks, Path(args.out).with_suffix(".png"), lines)
    return EXIT_OK


def cmd_compare(config: RunConfig, args) -> int:
    traj = trajio.read_trajectory(args.infile)
    variants = [v.strip() for v in config["compare.variants"].split(",") if v.strip()]
    if not variants:
        raise ConfigError("compare.variants is empty")
    spec = config.tfim()
    observable = config.observable()
    solver = config.solver()
    tconf = config.train_config()
    grid = config.prediction_grid()
    t0 = config["predict.t0"]
    idx = int(np.argmin(np.abs(traj.times - t0)))
    if abs(traj.times[idx] - t0) > 1e-9:
        raise ConfigError("predict.t0 is not a grid point of the input trajectory")
    evolver = exact.ExactEvolver(spec, observable, traj.basis)
    exact_h = evolver.coefficient_matrix(grid)
    scale = np.linalg.norm(exact_h, axis=1)
    scale[scale == 0] = 1.0

    drifts = {}
    spectra_by_variant = {}
    for variant in variants:
        net = config.network(input_dim=len(traj.basis), variant=variant)
        params, history = train(traj, net, tconf, solver)
        pred = predict(net, params, traj.coeffs[idx], t0, grid, solver,
                       basis=traj.basis)
        drifts[variant] = np.linalg.norm(pred.coeffs - exact_h, axis=1) / scale
        spectra_by_variant[variant] = _spectrum_of(pred, config)
        print(f"{variant}: trained {len(history)} epochs, "
              f"final drift {drifts[variant][-1]:.3e}")

    lines = ["opdyn-compare v1",
             "variants=" + ",".join(variants),
             f"t0={t0:.17g}",
             "columns t " + " ".join(f"drift_{v}" for v in variants)]
    for j, t in enumerate(grid):
        row = [f"{t:.17g}"] + [f"{drifts[v][j]:.17g}" for v in variants]
        lines.append(" ".join(row))
    if len(variants) >= 2:
        comp = spectra.compare_spectra(
            spectra_by_variant[variants[0]], spectra_by_variant[variants[1]],
            config["spectrum.threshold_fraction"])
        for fa, fb, delta in comp.matched:
            lines.append(f"peak_delta {fa:.17g} {fb:.17g} {delta:.17g}")
        for fa in comp.unmatched_a:
            lines.append(f"peak_only_{variants[0]} {fa:.17g}")
        for fb in comp.unmatched_b:
            lines.append(f"peak_only_{variants[1]} {fb:.17g}")
    Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"wrote {args.out}")
    if args.plot:
        from .plots import plot_drift

        plot_drift(grid, drifts, Path(args.out).with_suffix(".png"))
    return EXIT_OK


def cmd_validate(config: RunConfig, args) -> int:
    from .validate import run_validation

    if args.infile:
        try:
            traj = trajio.read_trajectory(args.infile)
        except (ValueError, OSError) as exc:
            print(f"FAIL trajectory-schema: {exc}")
            return EXIT_NUMERICAL
        print(f"PASS trajectory-schema ({len(traj.times)} rows, "
              f"{len(traj.basis)} columns)")
        return EXIT_OK
    ok = run_validation(config)
    return EXIT_OK if ok else EXIT_NUMERICAL


COMMANDS = {
    "generate": (cmd_generate, True),
    "noise": (cmd_noise, True),
    "train": (cmd_train, True),
    "predict": (cmd_predict, True),
    "spectrum": (cmd_spectrum, True),
    "compare": (cmd_compare, True),
    "validate": (cmd_validate, False),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opdyn",
        description="Operator-dynamics learning pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, needs_out) in COMMANDS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="configuration file")
        p.add_argument("--in", dest="infile", default=None, help="input file")
        p.add_argument("--out", default=None, help="output file")
        p.add_argument("--plot", action="store_true",
                       help="render a figure next to the output file")
        p.add_argument("overrides", nargs="*", metavar="key=value",
                       help="configuration overrides")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler, needs_out = COMMANDS[args.command]
    try:
        config = RunConfig.load(args.config, args.overrides)
        if needs_out and not args.out:
            raise ConfigError(f"{args.command} requires --out")
        if args.command in ("noise", "train", "predict", "spectrum", "compare") \
                and not args.infile:
            raise ConfigError(f"{args.command} requires --in")
        _echo(config)
        return handler(config, args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (StepFailure, TrainingDiverged, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
