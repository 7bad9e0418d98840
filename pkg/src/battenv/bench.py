"""Desk-scale benchmarks of the pool primitives.

Each benchmark first checks its batched output against a serial oracle and
only then times it.  Timings are reported as median and interquartile range
over the timed repetitions; warmup calls are discarded.  Serial baselines are
same-language loops of single-environment calls, so the speedups they give
are conservative.
"""

from __future__ import annotations

import csv
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import kernel
from .checks import random_states, serial_forward
from .hfield import sample_points, stairs
from .model import SimModel, StateVector, build_chain_model, copy_model, patch_field, set_const
from .pool import BatchEnvPool, env_ids_for_fraction
from .presets import get_preset
from .rollout import rollout
from .specio import load_spec
from .svgplot import line_plot

CSV_COLUMNS = ["benchmark", "preset", "nbatch", "nthread", "metric", "median", "q1", "q3", "seed"]
GATE_ENVS = 64


class GateError(RuntimeError):
    """Batched output disagreed with the serial oracle; nothing was timed."""


@dataclass
class BenchConfig:
    preset: str = "go1-18"
    model: str | None = None
    nbatch: list[int] = field(default_factory=lambda: [32, 64, 128, 256, 512, 1024, 2048, 4096])
    nthread: int | None = None
    nstep: int = 10
    warmup: int = 5
    repeats: int = 50
    fractions: list[float] = field(default_factory=lambda: [round(0.1 * k, 1) for k in range(1, 11)])
    csv: str | None = None
    plot: str | None = None
    seed: int = 0

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.warmup < 0:
            raise ValueError("warmup must be >= 0")
        if not self.nbatch or any(n < 1 for n in self.nbatch):
            raise ValueError("nbatch entries must be >= 1")
        if any(not 0 < f <= 1 for f in self.fractions):
            raise ValueError("fractions must lie in (0, 1]")
        if self.nstep < 1:
            raise ValueError("nstep must be >= 1")

    @property
    def label(self) -> str:
        return Path(self.model).stem if self.model else self.preset

    def spec(self):
        return load_spec(self.model) if self.model else get_preset(self.preset)

    def build(self) -> SimModel:
        return build_chain_model(self.spec())


@dataclass
class BenchRecord:
    benchmark: str
    preset: str
    nbatch: int
    nthread: int
    metric: str
    median: float
    q1: float
    q3: float
    seed: int


def time_calls(fn: Callable[[], object], warmup: int, repeats: int) -> np.ndarray:
    """Wall-clock seconds of each timed call; warmup calls are not returned."""
    for _ in range(warmup):
        fn()
    out = np.empty(repeats)
    for i in range(repeats):
        t0 = time.perf_counter()
        fn()
        out[i] = time.perf_counter() - t0
    return out


def summarize(values) -> tuple[float, float, float]:
    q1, med, q3 = np.percentile(np.asarray(values, dtype=float), [25, 50, 75])
    return float(med), float(q1), float(q3)


def _record(cfg, name, nbatch, nthread, metric, values) -> BenchRecord:
    med, q1, q3 = summarize(values)
    return BenchRecord(name, cfg.label, int(nbatch), int(nthread), metric, med, q1, q3, cfg.seed)


def _ratio_record(cfg, name, nbatch, nthread, num, den) -> BenchRecord:
    # ratio of medians; the IQR columns repeat it as there is no paired sample
    r = float(np.median(num) / np.median(den))
    return BenchRecord(name, cfg.label, int(nbatch), int(nthread), "ratio", r, r, r, cfg.seed)


def _gate(ok: bool, what: str) -> None:
    if not ok:
        raise GateError(f"correctness gate failed: {what}")


def write_csv(records: list[BenchRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        w.writeheader()
        for r in records:
            w.writerow(asdict(r))


def _plot(cfg, records, metric, title, ylabel):
    if not cfg.plot:
        return
    series = {}
    for r in records:
        if r.metric == metric:
            xs, ys = series.setdefault(r.benchmark, ([], []))
            xs.append(r.nbatch)
            ys.append(r.median)
    line_plot(series, cfg.plot, title=title, xlabel="nbatch", ylabel=ylabel)


def initial_states(m: SimModel, n: int, seed: int) -> np.ndarray:
    return random_states(m, n, np.random.default_rng(seed), scale=0.05)


# -- step / forward ---------------------------------------------------------


def _step_records(cfg, m_or_models, name, nbatch, seed) -> tuple[BenchRecord, np.ndarray]:
    ref = m_or_models if isinstance(m_or_models, SimModel) else m_or_models[0]
    s0 = initial_states(ref, nbatch, seed)
    with BatchEnvPool(m_or_models, nbatch=nbatch, nthread=cfg.nthread) as pool:
        k = min(nbatch, GATE_ENVS)
        models = [m_or_models] if isinstance(m_or_models, SimModel) else list(m_or_models[:k])
        got = pool.step(s0, cfg.nstep)
        _gate(np.array_equal(got[:k], rollout(models, s0[:k], cfg.nstep).states[:, -1]), f"{name} N={nbatch}")
        t = time_calls(lambda: pool.step(s0, cfg.nstep), cfg.warmup, cfg.repeats)
        return _record(cfg, name, nbatch, pool.nthread, "steps/s", nbatch * cfg.nstep / t), t


def interleaved_times(fns: dict, warmup: int, repeats: int) -> dict:
    """Seconds per call for each function, timed round-robin (order alternates per round)."""
    keys = list(fns)
    for _ in range(warmup):
        for key in keys:
            fns[key]()
    times = {key: np.empty(repeats) for key in keys}
    for i in range(repeats):
        for key in keys if i % 2 == 0 else keys[::-1]:
            t0 = time.perf_counter()
            fns[key]()
            times[key][i] = time.perf_counter() - t0
    return times


def interleaved_throughput(m, settings, nstep, warmup, repeats, seed=0) -> dict:
    """Median env-steps/s for each ``(nbatch, nthread)`` in ``settings``.

    The pools are timed round-robin, one call each per round, so slow drift
    in machine load hits every setting alike.
    """
    pools, states = {}, {}
    try:
        for key in settings:
            n, nt = key
            pools[key] = BatchEnvPool(m, nbatch=n, nthread=nt)
            states[key] = initial_states(m, n, seed)
            k = min(n, GATE_ENVS)
            got = pools[key].step(states[key], nstep)
            _gate(np.array_equal(got[:k], rollout(m, states[key][:k], nstep).states[:, -1]),
                  f"step N={n} nthread={nt}")
        times = interleaved_times(
            {key: (lambda key=key: pools[key].step(states[key], nstep)) for key in settings}, warmup, repeats)
    finally:
        for pool in pools.values():
            pool.close()
    return {key: key[0] * nstep / times[key] for key in settings}


def bench_step(cfg: BenchConfig) -> list[BenchRecord]:
    m = cfg.build()
    records = [_step_records(cfg, m, "step", n, cfg.seed)[0] for n in cfg.nbatch]
    nmax = max(cfg.nbatch)
    nt = records[-1].nthread
    if nt > 1:
        tp = interleaved_throughput(m, [(nmax, 1), (nmax, nt)], cfg.nstep, cfg.warmup, cfg.repeats, cfg.seed)
        records.append(_ratio_record(cfg, "step_thread_speedup", nmax, nt, tp[(nmax, nt)], tp[(nmax, 1)]))
    _plot(cfg, records, "steps/s", f"step throughput ({cfg.label})", "env-steps / s")
    return records


def bench_forward(cfg: BenchConfig) -> list[BenchRecord]:
    m = cfg.build()
    records = []
    for n in cfg.nbatch:
        s0 = initial_states(m, n, cfg.seed)
        with BatchEnvPool(m, nbatch=n, nthread=cfg.nthread) as pool:
            k = min(n, GATE_ENVS)
            _gate(np.array_equal(pool.forward(s0)[:k], serial_forward([m], s0[:k])), f"forward N={n}")
            t = time_calls(lambda: pool.forward(s0), cfg.warmup, cfg.repeats)
            records.append(_record(cfg, "forward", n, pool.nthread, "forwards/s", n / t))
    _plot(cfg, records, "forwards/s", f"forward throughput ({cfg.label})", "forwards / s")
    return records


def make_variants(m: SimModel, n: int, seed: int, jitter: float = 0.2) -> list[SimModel]:
    """``n`` copies of ``m`` with independently jittered actuator gains."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        v = copy_model(m)
        u = rng.uniform(1 - jitter, 1 + jitter, m.nu)
        # zero gains cannot be scaled apart; give them a small absolute gain
        patch_field(v, "kp", np.where(m.kp == 0.0, u - (1 - jitter), m.kp * u))
        out.append(v)
    return out


def bench_variants(cfg: BenchConfig) -> list[BenchRecord]:
    """Shared-source pool vs per-env variant pool, timed in interleaved rounds."""
    m = cfg.build()
    records = []
    for n in cfg.nbatch:
        variants = make_variants(m, n, cfg.seed)
        s0 = initial_states(m, n, cfg.seed)
        with BatchEnvPool(m, nbatch=n, nthread=cfg.nthread) as shared, \
                BatchEnvPool(variants, nbatch=n, nthread=cfg.nthread) as varied:
            kps = np.stack([v.kp for v in varied.get_all_models()])
            _gate(n == 1 or len({row.tobytes() for row in kps}) > 1, "variant models are distinct")
            k = min(n, GATE_ENVS)
            _gate(np.array_equal(varied.step(s0, cfg.nstep)[:k],
                                 rollout(variants[:k], s0[:k], cfg.nstep).states[:, -1]), f"variants N={n}")
            _gate(np.array_equal(shared.step(s0, cfg.nstep)[:k],
                                 rollout(m, s0[:k], cfg.nstep).states[:, -1]), f"shared N={n}")
            ts, tv = np.empty(cfg.repeats), np.empty(cfg.repeats)
            for _ in range(cfg.warmup):
                shared.step(s0, cfg.nstep)
                varied.step(s0, cfg.nstep)
            for i in range(cfg.repeats):
                for pool, arr in ((shared, ts), (varied, tv)) if i % 2 == 0 else ((varied, tv), (shared, ts)):
                    t0 = time.perf_counter()
                    pool.step(s0, cfg.nstep)
                    arr[i] = time.perf_counter() - t0
            nt = shared.nthread
        records.append(_record(cfg, "step_shared", n, nt, "steps/s", n * cfg.nstep / ts))
        records.append(_record(cfg, "step_variants", n, nt, "steps/s", n * cfg.nstep / tv))
        # throughput ratio variant / shared
        records.append(_ratio_record(cfg, "variant_over_shared", n, nt, 1.0 / tv, 1.0 / ts))
    _plot(cfg, records, "steps/s", f"shared vs variant models ({cfg.label})", "env-steps / s")
    return records


# -- reset ------------------------------------------------------------------


def reset_payload(m: SimModel, n: int, seed: int) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    return {
        "body_mass": m.body_mass * rng.uniform(0.8, 1.2, (n, m.nbody)),
        "kp": m.kp * rng.uniform(0.8, 1.2, (n, m.nu)),
    }


def naive_reset(models: list[SimModel], ids, state, payload) -> np.ndarray:
    """One env at a time: patch, refresh, forward."""
    ws = kernel.Workspace.for_model(models[0])
    out = np.empty((len(ids), models[0].nsensordata))
    for k, e in enumerate(ids):
        m = models[e]
        for name, values in payload.items():
            patch_field(m, name, values[k])
        set_const(m)
        nq = m.nq
        out[k] = kernel.forward(m, StateVector(state[k, 0], state[k, 1 : 1 + nq], state[k, 1 + nq :]), ws)
    return out


def reset_latency(pool: BatchEnvPool, m: SimModel, ids, cfg) -> np.ndarray:
    s0 = initial_states(m, len(ids), cfg.seed)
    payload = reset_payload(m, len(ids), cfg.seed)
    return time_calls(lambda: pool.reset(ids, s0, payload), cfg.warmup, cfg.repeats)


def fraction_latencies(pool: BatchEnvPool, m: SimModel, nbatch: int, cfg) -> list[np.ndarray]:
    """Reset latency per fraction, timed in rounds that visit every fraction once."""
    jobs = []
    for f in cfg.fractions:
        ids = env_ids_for_fraction(nbatch, f)
        jobs.append((ids, initial_states(m, len(ids), cfg.seed), reset_payload(m, len(ids), cfg.seed)))
    for _ in range(cfg.warmup):
        for ids, s0, payload in jobs:
            pool.reset(ids, s0, payload)
    out = [np.empty(cfg.repeats) for _ in jobs]
    for i in range(cfg.repeats):
        for k, (ids, s0, payload) in enumerate(jobs):
            t0 = time.perf_counter()
            pool.reset(ids, s0, payload)
            out[k][i] = time.perf_counter() - t0
    return out


def linear_fit(x, y) -> tuple[float, float, float]:
    """Least-squares slope, intercept and R^2."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def bench_reset(cfg: BenchConfig) -> list[BenchRecord]:
    m = cfg.build()
    records = []
    for n in cfg.nbatch:
        with BatchEnvPool(m, nbatch=n, nthread=cfg.nthread) as pool:
            ids = np.arange(n)
            s0 = initial_states(m, n, cfg.seed)
            payload = reset_payload(m, n, cfg.seed)
            k = min(n, GATE_ENVS)
            _, sd = pool.reset(ids, s0, payload)
            oracle = naive_reset([copy_model(m) for _ in range(k)], ids[:k], s0[:k],
                                 {f: v[:k] for f, v in payload.items()})
            _gate(np.array_equal(sd[:k], oracle), f"reset N={n}")
            t = reset_latency(pool, m, ids, cfg)
            records.append(_record(cfg, "reset_full", n, pool.nthread, "ms/call", t * 1e3))

    nmax = max(cfg.nbatch)
    with BatchEnvPool(m, nbatch=nmax, nthread=cfg.nthread) as pool:
        xs, ys = [], []
        for f, t in zip(cfg.fractions, fraction_latencies(pool, m, nmax, cfg)):
            records.append(_record(cfg, f"reset_partial[f={f:.2f}]", nmax, pool.nthread, "ms/call", t * 1e3))
            xs.append(f)
            ys.append(float(np.median(t)))
        if len(xs) >= 2:
            slope, _, r2 = linear_fit(xs, ys)
            records.append(BenchRecord("reset_partial_fit_slope", cfg.label, nmax, pool.nthread,
                                       "ms/fraction", slope * 1e3, slope * 1e3, slope * 1e3, cfg.seed))
            records.append(BenchRecord("reset_partial_fit_r2", cfg.label, nmax, pool.nthread,
                                       "r2", r2, r2, r2, cfg.seed))
        ids = np.arange(nmax)
        s0 = initial_states(m, nmax, cfg.seed)
        payload = reset_payload(m, nmax, cfg.seed)
        models = [copy_model(m) for _ in range(nmax)]
        base = time_calls(lambda: naive_reset(models, ids, s0, payload), min(cfg.warmup, 1),
                          max(1, min(cfg.repeats, 5)))
        pooled = reset_latency(pool, m, ids, cfg)
        records.append(_record(cfg, "reset_full_serial", nmax, 0, "ms/call", base * 1e3))
        records.append(_ratio_record(cfg, "reset_speedup", nmax, pool.nthread, base, pooled))
    if cfg.plot:
        full = [r for r in records if r.benchmark == "reset_full"]
        line_plot({"pool reset": ([r.nbatch for r in full], [r.median for r in full])}, cfg.plot,
                  title=f"full reset latency ({cfg.label})", xlabel="nbatch", ylabel="ms / call")
    return records


# -- Jacobian / hfield ------------------------------------------------------


def serial_jacobians(m: SimModel, state: np.ndarray, site: int) -> np.ndarray:
    ws = kernel.Workspace.for_model(m)
    out = np.empty((state.shape[0], 3, m.nv))
    for e in range(state.shape[0]):
        out[e] = kernel.site_jacobian(m, StateVector(state[e, 0], state[e, 1 : 1 + m.nq], state[e, 1 + m.nq :]),
                                      site, ws)[0]
    return out


def bench_jacobian(cfg: BenchConfig) -> list[BenchRecord]:
    m = cfg.build()
    if m.nsite == 0:
        raise ValueError(f"model {cfg.label} has no sites")
    site = 0
    records = []
    for n in cfg.nbatch:
        s0 = initial_states(m, n, cfg.seed)
        with BatchEnvPool(m, nbatch=n, nthread=cfg.nthread) as pool:
            jp, _ = pool.compute_site_jacobians(s0, site, jacr=False)
            _gate(np.array_equal(jp, serial_jacobians(m, s0, site)), f"jacobian N={n}")
            t = time_calls(lambda: pool.compute_site_jacobians(s0, site, jacr=False), cfg.warmup, cfg.repeats)
            records.append(_record(cfg, "jacobian", n, pool.nthread, "ms/call", t * 1e3))
            if n == max(cfg.nbatch):
                base = time_calls(lambda: serial_jacobians(m, s0, site), min(cfg.warmup, 1),
                                  max(1, min(cfg.repeats, 5)))
                records.append(_record(cfg, "jacobian_serial", n, 0, "ms/call", base * 1e3))
                records.append(_ratio_record(cfg, "jacobian_speedup", n, pool.nthread, base, t))
    _plot(cfg, records, "ms/call", f"site Jacobian time ({cfg.label})", "ms / call")
    return records


def hfield_model(cfg: BenchConfig) -> SimModel:
    spec = cfg.spec()
    if not spec.hfields:
        spec.hfields = [stairs()]
    return build_chain_model(spec)


GRID_OFFSETS = np.stack(np.meshgrid(np.linspace(-0.3, 0.3, 4), np.linspace(-0.3, 0.3, 4)), -1).reshape(-1, 2)


def serial_hfield(m: SimModel, state, offsets, body, mode="yaw", clearance=False) -> np.ndarray:
    ws = kernel.Workspace.for_model(m)
    out = np.empty((state.shape[0], offsets.shape[0]))
    for e in range(state.shape[0]):
        kernel.kinematics(m, state[e, 1 : 1 + m.nq], ws)
        out[e] = sample_points(m.hfields[0], ws.xpos[body], ws.xmat[body], offsets, mode, clearance)
    return out


def bench_hfield(cfg: BenchConfig) -> list[BenchRecord]:
    m = hfield_model(cfg)
    label = cfg.label if cfg.spec().hfields else cfg.label + "+stairs"
    records = []
    for n in cfg.nbatch:
        s0 = initial_states(m, n, cfg.seed)
        with BatchEnvPool(m, nbatch=n, nthread=cfg.nthread) as pool:
            got = pool.sample_hfield_height(s0, 0, GRID_OFFSETS, 0, mode="yaw")
            _gate(np.array_equal(got, serial_hfield(m, s0, GRID_OFFSETS, 0)), f"hfield N={n}")
            t = time_calls(lambda: pool.sample_hfield_height(s0, 0, GRID_OFFSETS, 0, mode="yaw"),
                           cfg.warmup, cfg.repeats)
            records.append(_record(cfg, "hfield", n, pool.nthread, "ms/call", t * 1e3))
            if n == max(cfg.nbatch):
                base = time_calls(lambda: serial_hfield(m, s0, GRID_OFFSETS, 0), min(cfg.warmup, 1),
                                  max(1, min(cfg.repeats, 5)))
                records.append(_record(cfg, "hfield_serial", n, 0, "ms/call", base * 1e3))
                records.append(_ratio_record(cfg, "hfield_speedup", n, pool.nthread, base, t))
    for r in records:
        r.preset = label
    _plot(cfg, records, "ms/call", f"hfield sampling time ({label})", "ms / call")
    return records


BENCHMARKS = {
    "bench-step": bench_step,
    "bench-forward": bench_forward,
    "bench-variants": bench_variants,
    "bench-reset": bench_reset,
    "bench-jacobian": bench_jacobian,
    "bench-hfield": bench_hfield,
}
