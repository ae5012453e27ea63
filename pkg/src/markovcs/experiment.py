"""Experiment configuration and the alpha-sweep driver.

Each cell ``(alpha, rep)`` of a sweep draws its own scheme with the seed
``derive_seed(master_seed, "experiment", "alpha=<alpha>", "rep=<rep>")``,
reconstructs, and writes into its own directory, so the outputs do not
depend on how cells are scheduled across worker processes.
"""

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from ._errors import MarkovCSError, ValidationError
from .estimators import L1Reconstructor, MarkovChainSampler
from .io import format_value, read_keyvalue, read_pgm, write_keyvalue, write_pgm
from .phantom import shepp_logan
from .recon import psnr
from .rng import derive_seed
from .schemes import generate_until, save_scheme
from .transforms import MeasurementSystem, dft2

__all__ = ["ExperimentConfig", "load_reference", "quantize", "run_cell", "run_experiment"]

log = logging.getLogger(__name__)


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


@dataclass
class ExperimentConfig:
    """Flat experiment configuration; every field is a config-file key."""

    image: str = "phantom"
    rows: int = 256
    cols: int = 256
    wavelet: str = ""
    coverage: float = 0.2
    alphas: list = field(default_factory=lambda: [1.0, 0.1, 0.001])
    repetitions: int = 10
    seed: int = 0
    generator: str = "markov"
    persistence: float = 0.9
    connectivity: int = 4
    max_iter: int = 500
    tol: float = 1e-8
    relaxation: float = 1.0
    threshold_scale: float = 1e-2
    output: str = "results"
    jobs: int = 1

    _PARSERS = {"alphas": _floats}

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not 0.0 < self.coverage <= 1.0:
            raise ValidationError(f"coverage must lie in (0, 1], got {self.coverage}")
        if self.repetitions < 1:
            raise ValidationError("repetitions must be at least 1")
        if not self.alphas or any(not 0.0 <= a <= 1.0 for a in self.alphas):
            raise ValidationError(f"alpha values must lie in [0, 1], got {self.alphas}")
        if self.generator not in ("markov", "second-order"):
            raise ValidationError(f"generator must be 'markov' or 'second-order'")
        if self.jobs < 1:
            raise ValidationError("jobs must be at least 1")
        return self

    @classmethod
    def keys(cls):
        return [f.name for f in fields(cls)]

    @classmethod
    def from_mapping(cls, mapping):
        """Build from string (or typed) values, ignoring ``None``."""
        kwargs = {}
        types = {f.name: f.type for f in fields(cls)}
        for key, value in mapping.items():
            if value is None:
                continue
            if key not in types:
                raise ValidationError(f"unknown configuration key {key!r}")
            parse = cls._PARSERS.get(key, types[key])
            try:
                kwargs[key] = parse(value)
            except (TypeError, ValueError):
                raise ValidationError(f"bad value for {key}: {value!r}") from None
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path, overrides=None):
        values = read_keyvalue(path)
        values.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls.from_mapping(values)

    def wavelet_spec(self):
        return self.wavelet or None

    def to_file(self, path):
        write_keyvalue(path, asdict(self))


def quantize(pixels, maxval=65535):
    """Round intensities in [0, 1] to the levels of a PGM with ``maxval``."""
    return np.rint(np.clip(pixels, 0.0, 1.0) * maxval) / maxval


def load_reference(config):
    """Reference image and its PGM maxval (the phantom is treated as 16-bit)."""
    if config.image == "phantom":
        return quantize(shepp_logan((config.rows, config.cols))), 65535
    return read_pgm(config.image)


def _sampler(config, shape, alpha):
    persistence = config.persistence if config.generator == "second-order" else 0.0
    return MarkovChainSampler(alpha=alpha, persistence=persistence,
                              connectivity=config.connectivity,
                              wavelet=config.wavelet_spec()).fit(shape)


def _reconstructor(config):
    return L1Reconstructor(max_iter=config.max_iter, tol=config.tol,
                           relaxation=config.relaxation,
                           threshold_scale=config.threshold_scale)


def cell_dir(config, alpha, rep):
    return os.path.join(config.output, "cells", f"alpha={float(alpha)!r}", f"rep={rep}")


def run_cell(config, reference, maxval, alpha, rep, sampler=None):
    """Sample, reconstruct and score one cell; writes its files and returns a row."""
    seed = derive_seed(config.seed, "experiment", f"alpha={float(alpha)!r}", f"rep={rep}")
    out = cell_dir(config, alpha, rep)
    os.makedirs(out, exist_ok=True)
    sampler = sampler or _sampler(config, reference.shape, alpha)
    scheme = generate_until(sampler, config.coverage, seed)
    save_scheme(scheme, os.path.join(out, "scheme"))
    system = MeasurementSystem(reference.shape, sampler.system_.wavelet, scheme.mask)
    y = dft2(reference).ravel()[scheme.mask]
    rec = _reconstructor(config).fit(system, y)
    image = quantize(rec.image_, maxval)
    value = psnr(reference, image)
    write_pgm(os.path.join(out, "recon.pgm"), image, maxval)
    report = {
        "alpha": float(alpha), "rep": rep, "seed": seed, "m": scheme.m,
        "m_distinct": scheme.m_distinct, "jumps": scheme.jump_count,
        "iterations": rec.n_iter_, "converged": rec.converged_,
        "residual": rec.residual_, "objective": rec.objective_, "psnr": value,
    }
    write_keyvalue(os.path.join(out, "report.txt"), report)
    return report


def _run_alpha(args):
    config, reference, maxval, alpha = args
    sampler = _sampler(config, reference.shape, alpha)
    rows = []
    for rep in range(config.repetitions):
        try:
            rows.append(run_cell(config, reference, maxval, alpha, rep, sampler))
        except MarkovCSError as exc:
            log.error("cell alpha=%r rep=%d failed: %s", alpha, rep, exc)
            rows.append({"alpha": float(alpha), "rep": rep, "psnr": math.nan,
                         "error": f"{type(exc).__name__}: {exc}"})
    return rows


def run_experiment(config):
    """Run the full sweep and write ``results.csv`` and ``summary.txt``.

    Returns the list of per-cell rows in ``(alpha, rep)`` order.
    """
    os.makedirs(config.output, exist_ok=True)
    reference, maxval = load_reference(config)
    config.to_file(os.path.join(config.output, "config.txt"))
    write_pgm(os.path.join(config.output, "reference.pgm"), reference, maxval)
    tasks = [(config, reference, maxval, a) for a in config.alphas]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            per_alpha = list(pool.map(_run_alpha, tasks))
    else:
        per_alpha = [_run_alpha(t) for t in tasks]
    rows = [row for group in per_alpha for row in group]
    with open(os.path.join(config.output, "results.csv"), "w") as fh:
        fh.write("alpha,rep,psnr\n")
        for row in rows:
            fh.write(f"{format_value(row['alpha'])},{row['rep']},{format_value(row['psnr'])}\n")
    summary = {"cells": len(rows), "failures": sum("error" in r for r in rows)}
    for alpha, group in zip(config.alphas, per_alpha):
        vals = np.array([r["psnr"] for r in group], dtype=np.float64)
        key = f"alpha:{float(alpha)!r}"
        summary[f"{key}.mean_psnr"] = float(np.mean(vals))
        summary[f"{key}.std_psnr"] = float(np.std(vals))
    for r in rows:
        if "error" in r:
            summary[f"error.alpha:{r['alpha']!r}.rep:{r['rep']}"] = r["error"]
    write_keyvalue(os.path.join(config.output, "summary.txt"), summary)
    return rows
