"""Command-line interface: ``markovcs <subcommand> [options]``.

Subcommands: density, sample, recon, certify, bounds, experiment, psnr.
Options may also come from a flat ``key=value`` file given with
``--config``; flags win over the file. Exit codes: 0 success,
2 validation error, 3 capacity guard, 4 numerical failure.
"""

import argparse
import logging
import math
import os
import sys

import numpy as np

from ._errors import CapacityError, MarkovCSError, ValidationError
from .certify import (
    W_LIMIT,
    GAMMA_LIMIT,
    bound_report,
    empirical_W,
    gamma,
    monte_carlo_tail,
)
from .chains import GridGraph, build_metropolis, mix_kernel, spectral_gap
from .density import compute_density, load_density, save_density
from .estimators import L1Reconstructor, MarkovChainSampler, VariableDensitySampler
from .experiment import ExperimentConfig, quantize, run_experiment
from .io import format_value, read_keyvalue, read_pgm, write_keyvalue, write_pgm
from .recon import psnr
from .schemes import generate_until, load_scheme, save_scheme, scheme_from_trajectory
from .transforms import MeasurementSystem, dft2, materialize_matrix

log = logging.getLogger("markovcs")


def _merged(args, keys):
    """Config-file values overridden by explicitly given flags."""
    values = read_keyvalue(args.config) if getattr(args, "config", None) else {}
    values = {k: v for k, v in values.items() if k in keys}
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            values[k] = v
    return values


def _get(values, key, cast, default=None):
    v = values.get(key)
    if v is None or v == "":
        return default
    try:
        return cast(v)
    except (TypeError, ValueError):
        raise ValidationError(f"bad value for {key}: {v!r}") from None


def _grid(values):
    image = values.get("image")
    if image and image != "phantom":
        return read_pgm(image)[0].shape
    return (_get(values, "rows", int, 256), _get(values, "cols", int, 256))


def _system(values, shape):
    return MeasurementSystem(shape, values.get("wavelet") or None)


def _density(values, system):
    path = values.get("density")
    if path:
        return load_density(path, expect=system)
    return compute_density(system)


# ---------------------------------------------------------------------------


def cmd_density(values):
    system = _system(values, _grid(values))
    dens = compute_density(system)
    out = values.get("out") or "density.bin"
    save_density(dens, out)
    load_density(out, expect=system)
    print(f"wrote {out}: n={dens.n} L={dens.L!r} wavelet={system.wavelet}")
    return 0


def cmd_sample(values):
    system = _system(values, _grid(values))
    generator = values.get("generator") or "markov"
    alpha = _get(values, "alpha", float, 0.01)
    seed = _get(values, "seed", int, 0)
    if generator == "iid":
        sampler = VariableDensitySampler(wavelet=system.wavelet)
    elif generator in ("markov", "second-order"):
        persistence = _get(values, "persistence", float, 0.9) if generator == "second-order" else 0.0
        sampler = MarkovChainSampler(alpha=alpha, persistence=persistence,
                                     connectivity=_get(values, "connectivity", int, 4),
                                     wavelet=system.wavelet)
    else:
        raise ValidationError(f"unknown generator {generator!r}")
    sampler.fit(system)
    if values.get("density"):
        sampler.density_ = _density(values, system)
        if hasattr(sampler, "graph_"):
            sampler.kernel_ = mix_kernel(build_metropolis(sampler.graph_, sampler.density_),
                                         sampler.alpha)
    steps = _get(values, "steps", int)
    if steps:
        scheme = scheme_from_trajectory(sampler.sample(steps, seed))
    else:
        scheme = generate_until(sampler, _get(values, "coverage", float, 0.2), seed)
    out = values.get("out") or "scheme"
    save_scheme(scheme, out)
    meta = scheme.metadata()
    print(" ".join(f"{k}={format_value(v)}" for k, v in meta.items()))
    return 0


def cmd_recon(values):
    if not values.get("image") or not values.get("scheme"):
        raise ValidationError("recon needs --image and --scheme")
    reference, maxval = read_pgm(values["image"])
    scheme = load_scheme(values["scheme"])
    if reference.shape != scheme.shape:
        raise ValidationError(f"image {reference.shape} and scheme {scheme.shape} differ")
    system = MeasurementSystem(reference.shape, values.get("wavelet") or None, scheme.mask)
    y = dft2(reference).ravel()[scheme.mask]
    rec = L1Reconstructor(max_iter=_get(values, "max_iter", int, 500),
                          tol=_get(values, "tol", float, 1e-8),
                          relaxation=_get(values, "relaxation", float, 1.0),
                          threshold_scale=_get(values, "threshold_scale", float, 1e-2))
    rec.fit(system, y)
    image = quantize(rec.image_, maxval)
    out = values.get("out") or "recon.pgm"
    write_pgm(out, image, maxval)
    report = {"iterations": rec.n_iter_, "converged": rec.converged_,
              "residual": rec.residual_, "objective": rec.objective_,
              "psnr": psnr(reference, image)}
    write_keyvalue(os.path.splitext(out)[0] + "_report.txt", report)
    print(" ".join(f"{k}={format_value(v)}" for k, v in report.items()))
    if not math.isfinite(rec.residual_):
        return 4
    return 0


def cmd_certify(values):
    if not values.get("scheme"):
        raise ValidationError("certify needs --scheme")
    scheme = load_scheme(values["scheme"])
    system = _system(values, scheme.shape)
    if system.n > W_LIMIT:
        raise CapacityError(f"certification limited to {W_LIMIT} sites, got {system.n}")
    dens = _density(values, system)
    s = _get(values, "s", int, 1)
    eta = _get(values, "eta", float, 0.1)
    t = _get(values, "t", float, 1.0 / (2 * s))
    alpha = scheme.trajectory.alpha
    A = materialize_matrix(MeasurementSystem(system.shape, system.wavelet))
    _, report = empirical_W(scheme.trajectory, system, dens, A=A)
    if alpha < 1:
        kernel = mix_kernel(build_metropolis(GridGraph(system.shape,
                                                       _get(values, "connectivity", int, 4)),
                                             dens), alpha)
        gap = spectral_gap(kernel)
    else:
        gap = 1.0
    weyl_ok = gap >= alpha - 1e-10
    log.info("spectral gap %r, Weyl bound gap >= alpha=%r: %s", gap, alpha, weyl_ok)
    bounds = bound_report(system.n, dens.L, s, eta, t, gap, scheme.m)
    cert = report.as_dict()
    cert.update({"n": system.n, "L": dens.L, "alpha": alpha, "spectral_gap": gap,
                 "weyl_bound_holds": weyl_ok,
                 "m_min_iid": bounds.m_min_iid, "m_min_markov": bounds.m_min_markov})
    if system.n <= GAMMA_LIMIT:
        g = gamma(A[scheme.mask])
        cert.update({"gamma": g.value, "s_max": g.s_max, "gamma_converged": g.converged,
                     "certifies_s": g.certifies(s)})
    out = values.get("out") or "certify"
    write_keyvalue(out + "_cert.txt", cert)
    write_keyvalue(out + "_bounds.txt", bounds.as_dict())
    print(" ".join(f"{k}={format_value(v)}" for k, v in cert.items()))
    return 0


def cmd_bounds(values):
    n = _get(values, "n", int)
    L = _get(values, "L", float)
    if n is None or L is None:
        if values.get("rows") or values.get("image"):
            system = _system(values, _grid(values))
            dens = compute_density(system)
            n, L = system.n, dens.L
        else:
            raise ValidationError("bounds needs --n and --L, or a grid (--rows/--cols)")
    s = _get(values, "s", int, 1)
    rep = bound_report(n, L, s, _get(values, "eta", float, 0.1),
                       _get(values, "t", float, 1.0 / (2 * s)), _get(values, "gap", float, 1.0),
                       _get(values, "m", int, 1000))
    out = values.get("out")
    if out:
        write_keyvalue(out, rep.as_dict())
    for k, v in rep.as_dict().items():
        print(f"{k}={format_value(v)}")
    replicates = _get(values, "replicates", int)
    if replicates:
        system = _system(values, _grid(values))
        dens = compute_density(system)
        alpha = _get(values, "alpha", float, 1.0)
        gen = dens if alpha >= 1 else mix_kernel(build_metropolis(GridGraph(system.shape), dens),
                                                 alpha)
        tgrid = np.linspace(0.05, 1.0, 20)
        curve = monte_carlo_tail(gen, system, dens, _get(values, "m", int, 1000), tgrid,
                                 replicates, _get(values, "seed", int, 0))
        path = values.get("tail_out") or "tail.csv"
        with open(path, "w") as fh:
            fh.write("t,empirical,bound\n")
            for row in curve.rows():
                fh.write(",".join(format_value(v) for v in row) + "\n")
        print(f"wrote {path}; violations beyond 3 sigma: {curve.violations().size}")
    return 0


def cmd_experiment(values):
    cfg = ExperimentConfig.from_mapping({k: v for k, v in values.items()
                                         if k in ExperimentConfig.keys()})
    rows = run_experiment(cfg)
    for alpha in cfg.alphas:
        vals = [r["psnr"] for r in rows if r["alpha"] == float(alpha)]
        print(f"alpha={alpha!r} mean_psnr={np.mean(vals):.3f} std={np.std(vals):.3f}")
    return 0


def cmd_psnr(values):
    if not values.get("reference") or not values.get("image"):
        raise ValidationError("psnr needs --reference and --image")
    ref, _ = read_pgm(values["reference"])
    img, _ = read_pgm(values["image"])
    print(format_value(psnr(ref, img)))
    return 0


# ---------------------------------------------------------------------------

_COMMON = ["rows", "cols", "wavelet", "image", "out", "density"]
_OPTIONS = {
    "density": _COMMON,
    "sample": _COMMON + ["generator", "alpha", "persistence", "connectivity", "seed",
                         "coverage", "steps"],
    "recon": _COMMON + ["scheme", "max_iter", "tol", "relaxation", "threshold_scale"],
    "certify": _COMMON + ["scheme", "s", "eta", "t", "connectivity"],
    "bounds": _COMMON + ["n", "L", "s", "eta", "t", "gap", "m", "alpha", "replicates",
                         "seed", "tail_out"],
    "experiment": ExperimentConfig.keys(),
    "psnr": ["reference", "image"],
}
_COMMANDS = {
    "density": cmd_density,
    "sample": cmd_sample,
    "recon": cmd_recon,
    "certify": cmd_certify,
    "bounds": cmd_bounds,
    "experiment": cmd_experiment,
    "psnr": cmd_psnr,
}
_HELP = {
    "density": "compute and cache the sampling density",
    "sample": "draw a sampling scheme",
    "recon": "reconstruct an image from a scheme",
    "certify": "certify a scheme (W_m, bounds, gamma)",
    "bounds": "evaluate tail bounds and measurement counts",
    "experiment": "run the alpha sweep",
    "psnr": "PSNR between two PGM images",
}


def build_parser():
    parser = argparse.ArgumentParser(prog="markovcs", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, keys in _OPTIONS.items():
        p = sub.add_parser(name, help=_HELP[name])
        p.add_argument("--config", help="key=value configuration file")
        p.add_argument("-v", "--verbose", action="store_true")
        for key in keys:
            flags = [f"--{key}"]
            if "_" in key:
                flags.append(f"--{key.replace('_', '-')}")
            p.add_argument(*flags, dest=key, default=None)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    values = _merged(args, _OPTIONS[args.command])
    try:
        return _COMMANDS[args.command](values)
    except MarkovCSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
