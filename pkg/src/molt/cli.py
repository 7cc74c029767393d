"""Experiment driver: presets, key=value configs, CSV output.

Usage::

    molt table1 --out runs/t1
    molt --config my.cfg --dt 0.05
    molt ripening1d --method bdf2 --dt 10

Configs are flat ``key = value`` files (``#`` starts a comment); flags
override the file, which overrides the preset. Every run writes
``config.echo`` (a loadable config) next to its CSV output.
Exit codes: 0 ok, 2 solver non-convergence, 3 invalid config.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .adaptive import Estimator, RipeningMonitor, StepController, detect_ripening, run_adaptive
from .drivers import FCHStepper, fch_be_step, pattern_peak_count, vch_adaptive_run
from .grid import Grid1D, Grid2D
from .models import CHModel, SixthOrderModel, VCHModel, Z, ch1d_initial, ch2d_initial, vch_initial
from .steppers import Method, NonConvergence, SolverState, StepperConfig, TimeStepper

log = logging.getLogger("molt")

MODELS = ("ch1d", "ch2d", "vch2d", "fch2d")
TASKS = ("refine", "evolve", "timing")
FMT = "%.16e"
TWO_PI = 2.0 * math.pi


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    preset: str = ""
    model: str = "ch1d"
    task: str = "evolve"
    method: str = "be"
    methods: str = ""  # comma list for refinement; defaults to ``method``
    dt: float = 0.01
    dt_list: str = ""  # comma list of coarse steps for refinement
    adaptive: bool = False
    estimator: str = "bdf2"
    lte_tol: float = 1e-3
    dt0: float = 1e-3
    nx: int = 128
    ny: int = 0  # 0 means ny = nx
    eps: float = 0.18
    eta: float = 1.0
    t_final: float = 1.0
    n_tol: float = 1e-12
    n_max_it: int = 1000
    M: int = 4
    sdc_P: int = 2
    bdf2_startup: str = "be"
    stop_on_ripening: bool = True
    snapshots: str = ""  # comma list of times
    n_list: str = ""  # grid sizes for timing
    timing_sweeps: int = 20
    out: str = "out"
    seed: int = 0  # reserved; presets draw no random numbers

    def validate(self) -> "ExperimentConfig":
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        for name in ("dt", "lte_tol", "dt0", "eps", "eta", "t_final", "n_tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.nx < 4 or self.ny < 0 or 0 < self.ny < 4:
            raise ConfigError("grid sizes must be at least 4")
        if self.M not in (2, 4, 6):
            raise ConfigError("M must be 2, 4 or 6")
        if self.n_max_it < 1:
            raise ConfigError("n_max_it must be at least 1")
        try:
            methods = [Method(m) for m in self.method_list()]
            Estimator(self.estimator)
            StepperConfig(methods[0], self.n_tol, self.n_max_it, self.sdc_P, self.M, self.bdf2_startup)
            self.float_list("dt_list")
            self.float_list("snapshots")
            [int(n) for n in self.int_list("n_list")]
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.model in ("vch2d", "fch2d") and any(m is not Method.BE for m in methods):
            raise ConfigError(f"{self.model} supports method=be only")
        if self.model == "fch2d" and self.adaptive:
            raise ConfigError("fch2d runs with a fixed step")
        if self.model == "vch2d" and self.task == "evolve" and not self.adaptive:
            raise ConfigError("vch2d evolve runs are adaptive")
        if self.task == "refine" and len(self.float_list("dt_list")) < 2:
            raise ConfigError("refinement needs at least two entries in dt_list")
        if self.task == "timing" and not self.int_list("n_list"):
            raise ConfigError("timing needs n_list")
        return self

    def method_list(self) -> list[str]:
        return [m.strip() for m in (self.methods or self.method).split(",") if m.strip()]

    def float_list(self, name: str) -> list[float]:
        return [float(x) for x in getattr(self, name).split(",") if x.strip()]

    def int_list(self, name: str) -> list[int]:
        return [int(x) for x in getattr(self, name).split(",") if x.strip()]

    def echo(self) -> str:
        return "".join(f"{f.name} = {getattr(self, f.name)}\n" for f in dataclasses.fields(self))


_T1 = "0.05,0.025,0.0125,0.00625,0.003125"
_T2 = _T1 + ",0.0015625"

PRESETS: dict[str, dict] = {
    "table1": dict(model="ch1d", task="refine", methods="bdf2,sdirk2,sdc2", dt_list=_T1,
                   nx=512, t_final=1.0, n_tol=1e-12, n_max_it=2000, M=6),
    "table2": dict(model="ch1d", task="refine", methods="bdf3,sdirk3,sdc3", dt_list=_T2,
                   nx=512, t_final=1.0, n_tol=1e-12, n_max_it=2000, M=6),
    "table3": dict(model="ch1d", task="refine", methods="sdc3", sdc_P=3, dt_list=_T2,
                   nx=512, t_final=1.0, n_tol=1e-12, n_max_it=2000, M=6),
    "table2d": dict(model="ch2d", task="refine", methods="bdf2,sdirk2,sdc2",
                    dt_list="0.1,0.05,0.025,0.0125", nx=128, t_final=1.0, n_tol=1e-6,
                    n_max_it=1000, M=4),
    "ripening1d": dict(model="ch1d", method="be", dt=0.01, nx=128, t_final=9000.0,
                       n_tol=1e-11, n_max_it=600, M=6),
    "ripening1d_adaptive": dict(model="ch1d", adaptive=True, estimator="bdf2", lte_tol=1e-3,
                                dt0=1e-3, nx=128, t_final=9000.0, n_tol=1e-11, n_max_it=600, M=6),
    "ripening2d": dict(model="ch2d", method="bdf2", dt=0.05, nx=128, t_final=200.0,
                       n_tol=1e-6, n_max_it=300, M=4),
    "vch": dict(model="vch2d", adaptive=True, estimator="bdf2", lte_tol=1e-4, dt0=1e-3, nx=64,
                eps=0.32, t_final=30.0, n_tol=1e-6, n_max_it=400, M=4, stop_on_ripening=False,
                snapshots="0.5,5,10,20,24.3,30"),
    "fch": dict(model="fch2d", method="be", dt=0.1, nx=128, eps=0.18, eta=1.0, t_final=500.0,
                n_tol=1e-6, n_max_it=200, M=4, stop_on_ripening=False,
                snapshots="10,100,250,500"),
    "timing": dict(model="ch1d", task="timing", n_list="16384,32768,65536,131072", dt=0.05,
                   M=4, timing_sweeps=20),
}


def _coerce(field: dataclasses.Field, raw) -> object:
    kind = type(field.default)
    if isinstance(raw, kind):
        return raw
    text = str(raw).strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        return kind(text)
    except ValueError:
        raise ConfigError(f"bad value for {field.name}: {text!r}") from None


def build_config(preset: str | None = None, file: str | Path | None = None,
                 overrides: dict | None = None) -> ExperimentConfig:
    """Preset, then file, then explicit overrides; validated."""
    fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    values: dict[str, object] = {}

    def merge(src: dict, where: str):
        for k, v in src.items():
            if k not in fields:
                raise ConfigError(f"unknown key {k!r} in {where}")
            values[k] = _coerce(fields[k], v)

    if preset:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        merge({"preset": preset, **PRESETS[preset]}, "preset")
    if file is not None:
        merge(read_config_file(file), str(file))
    if overrides:
        merge(overrides, "overrides")
    return ExperimentConfig(**values).validate()


def read_config_file(path: str | Path) -> dict[str, str]:
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


# --- setup ------------------------------------------------------------------

def make_grid(cfg: ExperimentConfig) -> Grid1D | Grid2D:
    gx = Grid1D(0.0, TWO_PI, cfg.nx)
    if cfg.model == "ch1d":
        return gx
    return Grid2D(gx, Grid1D(0.0, TWO_PI, cfg.ny or cfg.nx))


def make_model(cfg: ExperimentConfig):
    if cfg.model in ("ch1d", "ch2d"):
        return CHModel(cfg.eps)
    if cfg.model == "vch2d":
        return VCHModel(cfg.eps)
    return SixthOrderModel(cfg.eps, cfg.eta)


def initial_state(cfg: ExperimentConfig, model, grid) -> np.ndarray:
    """Initial data in the solver variable."""
    if cfg.model == "ch1d":
        return model.from_physical(ch1d_initial(grid))
    if cfg.model == "vch2d":
        return model.from_physical(vch_initial(grid))
    return ch2d_initial(grid) + 1.0


def stepper_config(cfg: ExperimentConfig, method: str) -> StepperConfig:
    return StepperConfig(method, cfg.n_tol, cfg.n_max_it, cfg.sdc_P, cfg.M, cfg.bdf2_startup)


# --- output -----------------------------------------------------------------

def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(x) for x in row) + "\n")


def _cell(x) -> str:
    if isinstance(x, str):
        return x.replace(",", ";")
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return FMT % x


def write_matrix(path: Path, a: np.ndarray) -> None:
    np.savetxt(path, np.atleast_2d(a), fmt=FMT, delimiter=",")


def _tag(t: float) -> str:
    return f"{t:g}"


def phase_angle_cos(u: np.ndarray) -> np.ndarray:
    return np.cos(np.arctan2(u[1], u[0]))


def emit_vch_contours(u: np.ndarray, t: float, out: Path) -> Path:
    """``cos(arg(u1 + i u2))`` of a physical VCH field as a CSV matrix."""
    path = out / f"contours_t{_tag(t)}.csv"
    write_matrix(path, phase_angle_cos(u))
    return path


def periodic_region_count(mask: np.ndarray) -> int:
    """Connected components of a 2D boolean mask on the torus (4-connectivity)."""
    lab, n = ndimage.label(mask)
    if n == 0:
        return 0
    parent = list(range(n + 1))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b in ((lab[0, :], lab[-1, :]), (lab[:, 0], lab[:, -1])):
        for i, j in zip(a, b):
            if i and j:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[ri] = rj
    return len({find(i) for i in range(1, n + 1)})


def vch_region_count(u: np.ndarray) -> int:
    """Total number of periodic regions over the three phases (nearest well)."""
    phase = np.argmax(np.tensordot(Z, u, axes=(1, 0)), axis=0)
    return sum(periodic_region_count(phase == i) for i in range(3))


# --- experiments ------------------------------------------------------------

@dataclass
class RefinementRow:
    method: str
    dt: float
    error: float
    order: float
    status: str


def run_refinement(cfg: ExperimentConfig) -> list[RefinementRow]:
    """Successive max-norm differences ``|u_dt - u_dt/2|`` and observed orders."""
    model = make_model(cfg)
    grid = make_grid(cfg)
    v0 = initial_state(cfg, model, grid)
    dts = cfg.float_list("dt_list")
    levels = dts + [0.5 * dts[-1]]
    rows = []
    for method in cfg.method_list():
        sols: list[np.ndarray | str] = []
        for dt in levels:
            try:
                sols.append(TimeStepper(model, grid, stepper_config(cfg, method)).run(v0, dt, cfg.t_final).v)
            except NonConvergence as exc:
                sols.append(f"nonconvergence dt={dt:g}: {exc}")
            log.info("%s dt=%g done", method, dt)
        prev_err = math.nan
        for i, dt in enumerate(dts):
            a, b = sols[i], sols[i + 1]
            if isinstance(a, str) or isinstance(b, str):
                rows.append(RefinementRow(method, dt, math.nan, math.nan, a if isinstance(a, str) else b))
                prev_err = math.nan
                continue
            err = float(np.max(np.abs(model.to_physical(a) - model.to_physical(b))))
            order = math.log2(prev_err / err) if prev_err > 0 and err > 0 else math.nan
            rows.append(RefinementRow(method, dt, err, order, "ok"))
            prev_err = err
    return rows


@dataclass
class EvolveReport:
    t: float
    ripening_time: float | None
    steps: int
    accepts: int
    rejects: int
    iterations: int
    wall_time: float
    history: list[tuple]  # (t, dt, n_it, energy, probe)


class _Snapshots:
    def __init__(self, times, out: Path | None, model, vch: bool):
        self.pending = sorted(times)
        self.out = out
        self.model = model
        self.vch = vch

    def __call__(self, t: float, v: np.ndarray):
        while self.pending and t >= self.pending[0] * (1.0 - 1e-12):
            target = self.pending.pop(0)
            if self.out is None:
                continue
            u = self.model.to_physical(v) if hasattr(self.model, "to_physical") else v - 1.0
            if self.vch:
                emit_vch_contours(u, target, self.out)
                for c in range(2):
                    write_matrix(self.out / f"field{c + 1}_t{_tag(target)}.csv", u[c])
            else:
                write_matrix(self.out / f"field_t{_tag(target)}.csv", u)


def run_evolve(cfg: ExperimentConfig, out: Path | None = None, on_step=None) -> EvolveReport:
    """Fixed or adaptive stepping to ripening (scalar CH) or ``t_final``.

    History rows are ``(t, dt, n_it, energy, probe)``; the probe is the
    ripening-node value for CH, the periodic phase-region count for VCH and
    the Fourier peak count for the sixth-order model.
    """
    model = make_model(cfg)
    grid = make_grid(cfg)
    v0 = initial_state(cfg, model, grid)
    snaps = _Snapshots(cfg.float_list("snapshots"), out, model, cfg.model == "vch2d")
    start = time.perf_counter()

    if cfg.model == "vch2d":
        def probe(v):
            return float(vch_region_count(model.to_physical(v)))

        probes: dict[float, float] = {}

        def accept(t, v):
            probes[t] = probe(v)
            snaps(t, v)
            if on_step is not None:
                on_step(t, v)

        rep = vch_adaptive_run(model, grid, model.to_physical(v0), cfg.t_final, cfg.lte_tol,
                               cfg.n_tol, cfg.n_max_it, cfg.M, cfg.dt0, on_accept=accept)
        tr = rep.trajectory
        p = [probe(v0)] + [probes[t] for t in tr.t[1:]]
        hist = list(zip(tr.t, tr.dt, tr.n_it, tr.energy, p))
        return EvolveReport(rep.t, None, rep.accepts, rep.accepts, rep.rejects, int(sum(tr.n_it)),
                            time.perf_counter() - start, hist)

    if cfg.model == "fch2d":
        stepper = FCHStepper(model, grid, cfg.M, cfg.n_tol, cfg.n_max_it)
        state = SolverState(v0.copy())
        hist = [(0.0, 0.0, 0, model.energy(v0, grid), float(pattern_peak_count(v0 - 1.0)))]
        n = _nsteps(cfg)
        for _ in range(n):
            k = fch_be_step(state, cfg.dt, stepper)
            hist.append((state.t, cfg.dt, k, model.energy(state.v, grid),
                         float(pattern_peak_count(state.v - 1.0))))
            snaps(state.t, state.v)
            if on_step is not None:
                on_step(state.t, state.v)
        return EvolveReport(state.t, None, n, n, 0, int(sum(state.iterations)),
                            time.perf_counter() - start, hist)

    monitor = RipeningMonitor.default(grid)
    if cfg.adaptive:
        solver = TimeStepper(model, grid, stepper_config(cfg, "be")).solver
        ctrl = StepController(cfg.dt0, cfg.lte_tol, cfg.n_max_it, Estimator(cfg.estimator))

        def accept(t, v):
            snaps(t, v)
            if on_step is not None:
                on_step(t, v)

        rep = run_adaptive(model, grid, v0, ctrl, solver, t_final=cfg.t_final,
                           stop_on_ripening=cfg.stop_on_ripening, monitor=monitor, on_accept=accept)
        tr = rep.trajectory
        hist = list(zip(tr.t, tr.dt, tr.n_it, tr.energy, tr.probe))
        return EvolveReport(rep.t, rep.ripening_time, rep.accepts, rep.accepts, rep.rejects,
                            int(sum(tr.n_it)), time.perf_counter() - start, hist)

    ts = TimeStepper(model, grid, stepper_config(cfg, cfg.method))
    state = ts.initial_state(v0)
    u = model.to_physical(v0)
    detect_ripening(monitor, u, 0.0)
    hist = [(0.0, 0.0, 0, model.energy(v0, grid), monitor.probe(u))]
    ripening = None
    for _ in range(_nsteps(cfg)):
        k = ts.step(state, cfg.dt)
        u = model.to_physical(state.v)
        ripening = detect_ripening(monitor, u, state.t)
        hist.append((state.t, cfg.dt, k, model.energy(state.v, grid), monitor.probe(u)))
        snaps(state.t, state.v)
        if on_step is not None:
            on_step(state.t, state.v)
        if ripening is not None and cfg.stop_on_ripening:
            break
    return EvolveReport(state.t, ripening, state.steps, state.steps, 0, int(sum(state.iterations)),
                        time.perf_counter() - start, hist)


def _nsteps(cfg: ExperimentConfig) -> int:
    n = int(round(cfg.t_final / cfg.dt))
    if not math.isclose(n * cfg.dt, cfg.t_final, rel_tol=1e-9):
        raise ConfigError(f"t_final={cfg.t_final} is not a multiple of dt={cfg.dt}")
    return n


@dataclass
class TimingRow:
    n: int
    seconds_per_sweep: float
    ratio: float


def run_timing(cfg: ExperimentConfig, rounds: int = 7) -> list[TimingRow]:
    """CPU time of one implicit fixed-point sweep (fixed work) per grid size.

    For ``ch2d`` each entry ``n`` is an ``n x n`` grid. Only this process's CPU
    time counts. Sizes are timed in interleaved rounds so slow drifts of the
    machine hit every size alike, and the fastest round per size is kept.
    """
    model = make_model(cfg)
    sizes = cfg.int_list("n_list")
    cases = []
    for n in sizes:
        c = dataclasses.replace(cfg, nx=n, ny=0)
        grid = make_grid(c)
        v0 = (model.from_physical(ch1d_initial(grid)) if cfg.model == "ch1d"
              else ch2d_initial(grid) + 1.0)
        solver = TimeStepper(model, grid, stepper_config(c, "be")).solver
        sweep = solver.make_sweep(v0, cfg.dt)
        sweep(v0)  # warm-up: JIT and plan construction
        cases.append((sweep, v0))
    best = [math.inf] * len(sizes)
    for _ in range(rounds):
        for i, (sweep, v0) in enumerate(cases):
            w = v0
            t0 = time.process_time()
            for _ in range(cfg.timing_sweeps):
                w = sweep(w)
            best[i] = min(best[i], (time.process_time() - t0) / cfg.timing_sweeps)
    rows: list[TimingRow] = []
    for n, b in zip(sizes, best):
        rows.append(TimingRow(n, b, b / rows[-1].seconds_per_sweep if rows else math.nan))
    return rows


# --- entry point --------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(3, f"{self.prog}: error: {message}\n")


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="molt", description="Phase-field experiments with O(N) implicit solvers.")
    p.add_argument("preset_name", nargs="?", metavar="preset",
                   help=f"one of: {', '.join(sorted(PRESETS))}")
    p.add_argument("--config", help="key = value file applied after the preset")
    p.add_argument("-v", "--verbose", action="store_true")
    for f in dataclasses.fields(ExperimentConfig):
        if f.name == "preset":
            continue
        flags = [f"--{f.name.replace('_', '-')}"]
        if "_" in f.name:
            flags.append(f"--{f.name.replace('_', '')}")  # --ntol, --tfinal, ...
        p.add_argument(*flags, dest=f.name, default=None, metavar="X")
    return p


def run(cfg: ExperimentConfig) -> dict:
    """Run one experiment, writing its files under ``cfg.out``; returns the summary."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.echo").write_text(cfg.echo())
    summary: dict = {"preset": cfg.preset, "task": cfg.task, "model": cfg.model}
    if cfg.task == "refine":
        rows = run_refinement(cfg)
        write_csv(out / "refinement.csv", ["method", "dt", "error", "order", "status"],
                  [(r.method, r.dt, r.error, r.order, r.status) for r in rows])
        summary["failed_rows"] = sum(r.status != "ok" for r in rows)
    elif cfg.task == "timing":
        rows = run_timing(cfg)
        write_csv(out / "timing.csv", ["n", "cpu_seconds_per_sweep", "ratio"],
                  [(r.n, r.seconds_per_sweep, r.ratio) for r in rows])
        summary["max_ratio"] = max((r.ratio for r in rows[1:]), default=math.nan)
    else:
        rep = run_evolve(cfg, out)
        write_csv(out / "history.csv", ["t", "dt", "n_it", "energy", "probe"],
                  [(t, dt, int(k), e, p) for t, dt, k, e, p in rep.history])
        summary.update(t=rep.t, ripening_time=rep.ripening_time, steps=rep.steps,
                       accepts=rep.accepts, rejects=rep.rejects, iterations=rep.iterations,
                       wall_time=rep.wall_time)
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary


def main(argv: list[str] | None = None) -> int:
    try:
        args = make_parser().parse_args(argv)
    except SystemExit as exc:  # bad flags exit 3 via _Parser.error; --help exits 0
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {k: v for k, v in vars(args).items()
                 if v is not None and k not in ("preset_name", "config", "verbose")}
    try:
        cfg = build_config(args.preset_name, args.config, overrides)
    except (ConfigError, OSError) as exc:
        print(f"molt: invalid config: {exc}", file=sys.stderr)
        return 3
    try:
        summary = run(cfg)
    except NonConvergence as exc:
        print(f"molt: solver did not converge: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"molt: invalid config: {exc}", file=sys.stderr)
        return 3
    print(json.dumps(summary))
    return 2 if summary.get("failed_rows") else 0


if __name__ == "__main__":
    sys.exit(main())
