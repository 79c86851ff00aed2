"""Turn a config dict into samplers, run them and persist the results."""

import csv
import json
import math
from pathlib import Path
import zlib

import numpy as np

from .. import diagnostics as dg
from ..gibbs import run_gibbs
from ..hyper import HyperConfig
from ..models import GammaMarginalShapeModel, PoissonGammaModel
from ..predictive import PredictiveTask, predict_joint, predict_sequential
from ..prior import DdcrpPrior, DecaySpec
from ..proposals import BirthProposalConfig, IndependenceSpec, ResampleConfig
from ..rjmcmc import RjConfig, run_rjmcmc
from ..trace import ChainSettings, TraceStore, array_digest
from .config import config_digest, dumps_toml
from .data import load_csv_dataset, old_faithful, simulate_poisson_dataset, write_dataset_csv
from .errors import ConfigError, DataError, NumericError


def substream(seed, name):
    """Independent generator for a named purpose (``data``, ``chain0``, ``predict`` ...)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(zlib.crc32(name.encode()),))
    return np.random.default_rng(ss)


def build_model(cfg):
    m = cfg["model"]
    if m["name"] == "poisson":
        return PoissonGammaModel(m["a"], m["b"])
    return GammaMarginalShapeModel(m["shape_a"], m["shape_b"], m["rate_a"], m["rate_b"])


def build_decay(cfg):
    p = cfg["prior"]
    extra = (p["window"],) if p["decay"] == "window" else ()
    return DecaySpec(p["decay"], p["s"], extra)


def build_hyper(cfg):
    h = cfg["hyper"]
    return HyperConfig(h["infer_alpha"], (h["alpha_a"], h["alpha_b"]), h["infer_s"], (h["s_a"], h["s_b"]),
                       h["s_step"])


def build_rj_config(cfg):
    r = cfg["rj"]
    try:
        indep = None
        if r["birth"] == "independence":
            indep = IndependenceSpec(r["independence_family"], tuple(r["independence_params"]))
        birth = BirthProposalConfig(r["birth"], r["sigma_b"], indep, r["min_size"])
        resample = ResampleConfig(r["resample"], r["resample_family"], r["sigma_r"], r["min_size"])
        return RjConfig(r["link"], birth, resample, r["param_step"], r["include_jacobian"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def chain_settings(cfg):
    r = cfg["run"]
    return ChainSettings(r["iterations"], r["burn_in"], r["thinning"], r["scan"], r["init"])


def load_data(cfg):
    d = cfg["data"]
    if d["source"] == "old-faithful":
        ds = old_faithful()
    elif d["source"] == "simulate":
        s = cfg["simulate"]
        ds = simulate_poisson_dataset(substream(cfg["run"]["seed"], "data"), s["n"], s["mu"], s["sigma"], s["lam"])
    else:
        if not d["path"]:
            raise ConfigError("data.path is required when data.source = csv")
        ds = load_csv_dataset(d["path"], d["distances"])
    try:
        build_model(cfg).validate(ds.y)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    return ds


def build_prior(cfg, distances):
    return DdcrpPrior(distances, build_decay(cfg), cfg["prior"]["alpha"])


def _metadata(cfg, ds, chain):
    return {"config_digest": config_digest(cfg), "seed": cfg["run"]["seed"], "chain": chain,
            "data_digest": array_digest(np.c_[ds.y, ds.distances]), "model_spec": build_model(cfg).describe()}


def run_chain(cfg, ds, chain=0, rng=None):
    """One chain of the configured sampler on ``ds``."""
    rng = substream(cfg["run"]["seed"], f"chain{chain}") if rng is None else rng
    model, prior = build_model(cfg), build_prior(cfg, ds.distances)
    meta = _metadata(cfg, ds, chain)
    try:
        if cfg["run"]["sampler"] == "gibbs":
            trace = run_gibbs(ds.y, prior, model, chain_settings(cfg), rng, hyper=build_hyper(cfg),
                              metadata=meta)
        else:
            trace = run_rjmcmc(ds.y, prior, model, chain_settings(cfg), build_rj_config(cfg), rng,
                               hyper=build_hyper(cfg), metadata=meta)
    except (ValueError, ZeroDivisionError, OverflowError) as exc:
        raise NumericError(f"chain {chain}: {exc}") from None
    if len(trace) and not np.all(np.isfinite(trace.log_post)):
        raise NumericError(f"chain {chain}: non-finite log posterior")
    return trace


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _k_posterior_csv(path, columns):
    keys = sorted({k for post in columns.values() for k in post})
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["K"] + list(columns))
        for k in keys:
            w.writerow([k] + [repr(columns[c].get(k, 0.0)) for c in columns])


def simulate(cfg, out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    s = cfg["simulate"]
    ds = simulate_poisson_dataset(substream(cfg["run"]["seed"], "data"), s["n"], s["mu"], s["sigma"], s["lam"])
    write_dataset_csv(ds, out / "data.csv")
    with open(out / "truth.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["z"])
        w.writerows([[int(z)] for z in ds.labels])
    return ds


def fit(cfg, out):
    """Run every chain, persist traces under ``out/chain<i>`` and a pooled report."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    ds = load_data(cfg)
    traces, report = [], {"config_digest": config_digest(cfg), "chains": []}
    for c in range(cfg["run"]["chains"]):
        trace = run_chain(cfg, ds, c)
        trace.write(out / f"chain{c}")
        traces.append(trace)
        report["chains"].append(_summary(cfg, trace))
    pooled = np.concatenate([t.K for t in traces])
    report["k_posterior"] = dg.k_posterior(pooled) if pooled.size else {}
    report["k_mode"] = dg.k_mode(pooled) if pooled.size else None
    _write_json(out / "report.json", report)
    _k_posterior_csv(out / "k_posterior.csv", {f"chain{i}": r["k_posterior"] for i, r in enumerate(report["chains"])})
    (out / "config.toml").write_text(dumps_toml(cfg))
    return traces, report


def _summary(cfg, trace):
    if len(trace) == 0:
        return {"samples": 0}
    rep = dg.summarise(trace)
    if cfg["hyper"]["infer_s"] and len(trace) > 1 and np.ptp(trace.s) > 0:
        overlap = dg.s_prior_overlap(trace.s, (cfg["hyper"]["s_a"], cfg["hyper"]["s_b"]))
        rep["s_prior_overlap_tv"] = overlap
        rep["s_weakly_identified"] = overlap < 0.1
    return rep


def tune(cfg, out):
    """ESJD(K) grid over sigma_b, or sigma_b x sigma_r when resampling is on."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    if cfg["run"]["sampler"] != "rjmcmc":
        raise ConfigError("tuning applies to the reversible-jump sampler")
    ds = load_data(cfg)
    grid = sorted(cfg["tune"]["grid"])
    points = [(b, r) for b in grid for r in grid] if cfg["rj"]["resample"] else [(b, None) for b in grid]
    rows, best = [], None
    for idx, (sb, sr) in enumerate(points):
        sub = {sec: dict(body) for sec, body in cfg.items()}
        sub["rj"]["sigma_b"] = sb
        if sr is not None:
            sub["rj"]["sigma_r"] = sr
        sub["run"].update(iterations=cfg["tune"]["chain_iterations"], burn_in=cfg["tune"]["chain_burn_in"],
                          thinning=1, chains=1)
        trace = run_chain(sub, ds, 0, substream(cfg["run"]["seed"], f"tune{idx}"))
        score = dg.esjd_k(trace) if len(trace) > 1 else float("nan")
        rows.append({"sigma_b": sb, "sigma_r": sr, "esjd_K": score})
        if math.isfinite(score) and (best is None or score > best["esjd_K"]):
            best = rows[-1]  # grid is ascending, so ties keep the smaller sigma
    with open(out / "tune.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sigma_b", "sigma_r", "esjd_K"])
        for r in rows:
            w.writerow([r["sigma_b"], "" if r["sigma_r"] is None else r["sigma_r"], repr(r["esjd_K"])])
    _write_json(out / "tune.json", {"best": best, "scores": rows})
    return best, rows


def _new_point_task(cfg, ds):
    p = cfg["predict"]
    if p["new_distances"]:
        try:
            d_new = np.loadtxt(p["new_distances"], delimiter=",", ndmin=2)
        except (OSError, ValueError) as exc:
            raise DataError(f"{p['new_distances']}: {exc}") from None
    elif p["new_x"]:
        if ds.x is None:
            raise ConfigError("predict.new_x needs a dataset with a covariate column")
        xn = np.asarray(p["new_x"], float)
        d_new = np.c_[np.abs(xn[:, None] - ds.x[None, :]), np.abs(xn[:, None] - xn[None, :])]
    else:
        raise ConfigError("set predict.new_x or predict.new_distances")
    try:
        return PredictiveTask(d_new, p["mode"], p["draws_per_sample"])
    except ValueError as exc:
        raise DataError(str(exc)) from None


def predict(cfg, out, trace_dir=None):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    ds = load_data(cfg)
    task = _new_point_task(cfg, ds)
    model, prior = build_model(cfg), build_prior(cfg, ds.distances)
    rng = substream(cfg["run"]["seed"], "predict")
    try:
        if task.mode.value == "sequential":
            if trace_dir:
                trace = read_checked_trace(cfg, trace_dir)
            else:
                trace = run_chain(cfg, ds, 0)
                trace.write(out / "chain0")
            draws = predict_sequential(trace, ds.y, task, model, prior, rng)
        else:
            if cfg["run"]["sampler"] != "rjmcmc":
                raise ConfigError("joint imputation runs the reversible-jump sampler")
            draws, trace = predict_joint(ds.y, ds.distances, task, model, prior, chain_settings(cfg),
                                         build_rj_config(cfg), substream(cfg["run"]["seed"], "chain0"),
                                         hyper=build_hyper(cfg), metadata=_metadata(cfg, ds, 0))
            trace.write(out / "chain0")
    except (ZeroDivisionError, OverflowError) as exc:
        raise NumericError(str(exc)) from None
    except ValueError as exc:
        raise DataError(str(exc)) from None
    with open(out / "predictive.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["draw", "sample", "point", "value", "source"])
        for r in range(draws.values.shape[0]):
            for l in range(draws.values.shape[1]):
                w.writerow([r, int(draws.sample[r]), l, repr(float(draws.values[r, l])), int(draws.source[r, l])])
    _write_json(out / "predictive_summary.json", {**draws.summary(), "metadata": draws.metadata})
    return draws


def read_checked_trace(cfg, trace_dir):
    try:
        trace = TraceStore.read(trace_dir)
    except (OSError, ValueError, KeyError) as exc:
        raise DataError(f"cannot read trace {trace_dir}: {exc}") from None
    want, got = config_digest(cfg), trace.metadata.get("config_digest")
    if got != want:
        raise ConfigError(f"trace {trace_dir} was produced by config {got}, not {want}")
    return trace


def diagnose(cfg, trace_dir, out=None):
    trace = read_checked_trace(cfg, trace_dir)
    if len(trace) == 0:
        raise DataError(f"trace {trace_dir} has no stored samples")
    rep = _summary(cfg, trace)
    rep["config_digest"] = trace.metadata["config_digest"]
    target = Path(out) if out else Path(trace_dir)
    target.mkdir(parents=True, exist_ok=True)
    _write_json(target / "diagnostics.json", rep)
    _k_posterior_csv(target / "k_posterior.csv", {"trace": rep["k_posterior"]})
    return rep


def compare(trace_a, trace_b, out=None):
    traces = []
    for path in (trace_a, trace_b):
        try:
            traces.append(TraceStore.read(path))
        except (OSError, ValueError, KeyError) as exc:
            raise DataError(f"cannot read trace {path}: {exc}") from None
    if any(len(t) == 0 for t in traces):
        raise DataError("both traces need stored samples")
    pa, pb = (dg.k_posterior(t) for t in traces)
    rep = {"tv_distance": dg.tv_distance(pa, pb), "a": str(trace_a), "b": str(trace_b),
           "k_posterior_a": pa, "k_posterior_b": pb}
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        _write_json(Path(out) / "compare.json", rep)
        _k_posterior_csv(Path(out) / "compare_k_posterior.csv", {"a": pa, "b": pb})
    return rep
