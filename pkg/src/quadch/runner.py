"""Experiment catalog, initial conditions, persistence, and run monitors.

This is the reproducibility surface of the package: a flat INI config fully
determines a run (including the RNG seed; the generator is the counter-based
Philox so seeds are portable across platforms), every artifact directory
echoes its config, and the energy log is written with 17 significant digits
so reruns are byte-identical.
"""

import configparser
import json
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import coarsening_slope, temporal_order
from .ch_aniso import AnisoParams, AnisoState, aniso_step, energy_aniso, init_aniso
from .ch_iso import IsoState, ModelParams, energy_iso, init_iso, iso_step
from .errors import FieldFormatError, StepFailureError
from .fixedpoint import FixedPointConfig
from .grid import Grid, GridField, get_workspace, mean, norm_h

RNG_NAME = "philox"  # numpy Philox4x32-10, counter based

_MAGIC = b"QCHF"
_FORMAT_VERSION = 1

IC_KINDS = ("two_droplet", "single_droplet", "uniform_random",
            "gaussian_perturbed", "single_mode")

TWO_DROPLET_SPOTS = ((0.8 * np.pi, 1.02 * np.pi, 0.5 * np.pi),
                     (1.57 * np.pi, 0.98 * np.pi, 0.2 * np.pi))


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


def make_initial(kind: str, params: dict, grid: Grid, seed: int) -> GridField:
    """Construct a named initial condition.

    two_droplet combines the two tanh profiles with a pointwise min, which
    places both droplet interiors at -1 inside a +1 matrix (the pointwise
    max of the raw profiles would erase disjoint droplets).
    """
    if kind not in IC_KINDS:
        raise ValueError(f"unknown initial-condition kind {kind!r}")
    x, y = grid.meshgrid()
    if kind == "two_droplet":
        eps = float(params.get("eps", 0.1))
        profiles = []
        for cx, cy, r in TWO_DROPLET_SPOTS:
            d = np.sqrt((x - cx) ** 2 + (y - cy) ** 2)
            profiles.append(np.tanh((d - r) / (1.2 * eps)))
        return GridField(np.minimum(*profiles), grid)
    if kind == "single_droplet":
        eps = float(params.get("eps", 0.1))
        cx = float(params.get("cx", np.pi))
        cy = float(params.get("cy", np.pi))
        r = float(params.get("radius", 0.5 * np.pi))
        d = np.sqrt((x - cx) ** 2 + (y - cy) ** 2)
        return GridField(np.tanh((d - r) / (1.2 * eps)), grid)
    if kind == "uniform_random":
        lo = float(params.get("lo", -1.0))
        hi = float(params.get("hi", 1.0))
        vals = _rng(seed).uniform(lo, hi, size=(grid.nx, grid.ny))
        return GridField(vals, grid)
    if kind == "gaussian_perturbed":
        u0 = float(params.get("u0", 0.0))
        delta = float(params.get("delta", 1e-3))
        vals = u0 + delta * _rng(seed).standard_normal((grid.nx, grid.ny))
        return GridField(vals, grid)
    # single_mode
    u0 = float(params.get("u0", 0.0))
    amp = float(params.get("amplitude", 1e-8))
    kx = int(params.get("kx", 1))
    ky = int(params.get("ky", 0))
    vals = u0 + amp * np.cos(kx * x + ky * y)
    return GridField(vals, grid)


# ---------------------------------------------------------------------------
# field snapshots: magic, version byte, endianness marker, nx, ny (u64),
# then row-major float64 payload
# ---------------------------------------------------------------------------


def save_field(f: GridField, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    g = f.grid
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(bytes([_FORMAT_VERSION]))
        fh.write(b"<")
        fh.write(struct.pack("<QQ", g.nx, g.ny))
        fh.write(struct.pack("<4d", g.ax, g.bx, g.ay, g.by))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def load_field(path) -> GridField:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 6 or raw[:4] != _MAGIC:
        raise FieldFormatError(f"{path}: bad magic, not a field snapshot")
    if raw[4] != _FORMAT_VERSION:
        raise FieldFormatError(f"{path}: unsupported version {raw[4]}")
    marker = raw[5:6]
    if marker not in (b"<", b">"):
        raise FieldFormatError(f"{path}: unknown endianness marker {marker!r}")
    order = marker.decode()
    head = 6
    try:
        nx, ny = struct.unpack(f"{order}QQ", raw[head:head + 16])
        bounds = struct.unpack(f"{order}4d", raw[head + 16:head + 48])
    except struct.error as exc:
        raise FieldFormatError(f"{path}: truncated header") from exc
    payload = raw[head + 48:]
    expect = nx * ny * 8
    if len(payload) != expect:
        raise FieldFormatError(
            f"{path}: payload holds {len(payload)} bytes, expected {expect}")
    vals = np.frombuffer(payload, dtype=f"{order}f8").reshape(nx, ny)
    # explicit conversion to native layout; never reinterpret foreign bytes
    vals = vals.astype("=f8")
    grid = Grid(int(nx), int(ny), *bounds)
    return GridField(vals, grid)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    name: str = "run"
    scheme: str = "iso"  # iso | aniso
    dt: float = 1e-4
    t_end: float = 0.1
    grid: Grid = field(default_factory=lambda: Grid(128, 128))
    model: ModelParams = field(default_factory=ModelParams)
    fp: FixedPointConfig = field(default_factory=FixedPointConfig)
    ic_kind: str = "two_droplet"
    ic_params: dict = field(default_factory=dict)
    seed: int = 1234
    outdir: str = "runs/run"
    log_every: int = 1
    snapshot_every: int = 0  # 0: only the first and last field
    delta_reg: float = 1e-4

    def __post_init__(self):
        if self.scheme not in ("iso", "aniso"):
            raise ValueError("scheme must be 'iso' or 'aniso'")
        if self.dt <= 0.0 or self.t_end <= self.dt:
            raise ValueError("need dt > 0 and t_end > dt")
        if self.ic_kind not in IC_KINDS:
            raise ValueError(f"unknown initial-condition kind {self.ic_kind!r}")
        if self.log_every < 1:
            raise ValueError("log_every must be >= 1")

    @property
    def n_steps(self) -> int:
        n = int(round(self.t_end / self.dt))
        if abs(n * self.dt - self.t_end) > 1e-9 * self.t_end:
            raise ValueError("t_end must be an integer multiple of dt")
        return n

    # -- INI round trip ----------------------------------------------------

    def to_ini(self, path) -> None:
        cp = configparser.ConfigParser()
        cp["experiment"] = {
            "name": self.name, "scheme": self.scheme,
            "dt": f"{self.dt:.17g}", "t_end": f"{self.t_end:.17g}",
        }
        g = self.grid
        cp["grid"] = {k: f"{v:.17g}" if isinstance(v, float) else str(v)
                      for k, v in (("nx", g.nx), ("ny", g.ny), ("ax", g.ax),
                                   ("bx", g.bx), ("ay", g.ay), ("by", g.by))}
        m = {"mobility": f"{self.model.mobility:.17g}",
             "eps": f"{self.model.eps:.17g}",
             "beta": f"{self.model.beta:.17g}"}
        if isinstance(self.model, AnisoParams):
            m["alpha"] = f"{self.model.alpha:.17g}"
            m["fold"] = self.model.fold
            m["delta_reg"] = f"{self.delta_reg:.17g}"
        cp["model"] = m
        cp["fixedpoint"] = {
            "omega": f"{self.fp.omega:.17g}",
            "fp_tol": f"{self.fp.fp_tol:.17g}",
            "max_iter": str(self.fp.max_iter),
            "divergence_factor": f"{self.fp.divergence_factor:.17g}",
        }
        ic = {"kind": self.ic_kind, "seed": str(self.seed)}
        for k, v in sorted(self.ic_params.items()):
            ic[k] = f"{v:.17g}" if isinstance(v, float) else str(v)
        cp["initial"] = ic
        cp["output"] = {
            "dir": str(self.outdir),
            "log_every": str(self.log_every),
            "snapshot_every": str(self.snapshot_every),
        }
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            cp.write(fh)

    @staticmethod
    def from_ini(path) -> "ExperimentConfig":
        cp = configparser.ConfigParser()
        read = cp.read(path)
        if not read:
            raise FileNotFoundError(path)
        exp = cp["experiment"]
        gsec = cp["grid"]
        grid = Grid(gsec.getint("nx"), gsec.getint("ny"),
                    gsec.getfloat("ax", 0.0), gsec.getfloat("bx", 2 * np.pi),
                    gsec.getfloat("ay", 0.0), gsec.getfloat("by", 2 * np.pi))
        msec = cp["model"]
        scheme = exp.get("scheme", "iso")
        if scheme == "aniso":
            model = AnisoParams(
                mobility=msec.getfloat("mobility", 1.0),
                eps=msec.getfloat("eps", 0.1),
                beta=msec.getfloat("beta", 0.0),
                alpha=msec.getfloat("alpha", 0.1),
                fold=msec.get("fold", "fourfold"))
        else:
            model = ModelParams(
                mobility=msec.getfloat("mobility", 1.0),
                eps=msec.getfloat("eps", 0.1),
                beta=msec.getfloat("beta", 0.0))
        fsec = cp["fixedpoint"] if cp.has_section("fixedpoint") else {}
        fp = FixedPointConfig(
            omega=float(fsec.get("omega", 0.9)),
            fp_tol=float(fsec.get("fp_tol", 1e-11)),
            max_iter=int(fsec.get("max_iter", 200)),
            divergence_factor=float(fsec.get("divergence_factor", 1e3)))
        isec = cp["initial"]
        ic_params = {k: _parse_scalar(v) for k, v in isec.items()
                     if k not in ("kind", "seed")}
        osec = cp["output"] if cp.has_section("output") else {}
        return ExperimentConfig(
            name=exp.get("name", "run"), scheme=scheme,
            dt=exp.getfloat("dt"), t_end=exp.getfloat("t_end"),
            grid=grid, model=model, fp=fp,
            ic_kind=isec.get("kind"), ic_params=ic_params,
            seed=isec.getint("seed"),
            outdir=str(osec.get("dir", "runs/run")),
            log_every=int(osec.get("log_every", 1)),
            snapshot_every=int(osec.get("snapshot_every", 0)),
            delta_reg=float(msec.get("delta_reg", 1e-4)))


def _parse_scalar(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def apply_overrides(cfg: ExperimentConfig, overrides) -> ExperimentConfig:
    """Apply dotted section.key=value overrides to a config."""
    for item in overrides:
        key, _, raw = item.partition("=")
        if not _:
            raise ValueError(f"override {item!r} must look like section.key=value")
        val = _parse_scalar(raw)
        sect, _, name = key.partition(".")
        if sect == "experiment":
            cfg = replace(cfg, **{name: val})
        elif sect == "grid":
            cfg = replace(cfg, grid=replace(cfg.grid, **{name: val}))
        elif sect == "model":
            if name == "delta_reg":
                cfg = replace(cfg, delta_reg=float(val))
            else:
                cfg = replace(cfg, model=replace(cfg.model, **{name: val}))
        elif sect == "fixedpoint":
            cfg = replace(cfg, fp=replace(cfg.fp, **{name: val}))
        elif sect == "initial":
            if name == "kind":
                cfg = replace(cfg, ic_kind=val)
            elif name == "seed":
                cfg = replace(cfg, seed=int(val))
            else:
                params = dict(cfg.ic_params)
                params[name] = val
                cfg = replace(cfg, ic_params=params)
        elif sect == "output":
            mapping = {"dir": "outdir", "log_every": "log_every",
                       "snapshot_every": "snapshot_every"}
            cfg = replace(cfg, **{mapping[name]: val})
        else:
            raise ValueError(f"unknown override section {sect!r}")
    return cfg


# ---------------------------------------------------------------------------
# run loop
# ---------------------------------------------------------------------------


@dataclass
class RunArtifacts:
    """Everything a run produced, in memory and on disk."""

    outdir: Path
    times: np.ndarray
    energies: np.ndarray
    masses: np.ndarray
    fp_iters: np.ndarray
    fp_residuals: np.ndarray
    snapshots: list
    monitors: dict
    results: dict
    ok: bool
    final_state: object = None
    failure: str | None = None


def _energy_of(state, model):
    if isinstance(state, AnisoState):
        return energy_aniso(state, model)
    return energy_iso(state, model)


def _casimir_error(state, ws):
    """Max-norm departure of the auxiliaries from their definitions."""
    if isinstance(state, IsoState):
        u = state.u.values
        return {"q": float(np.max(np.abs(state.q.values - 0.5 * (u * u - 1.0))))}
    ux, uy, w = state.derivs(ws)
    u = state.u.values
    y1, y2 = state.y1.values, state.y2.values
    errs = {
        "y1": float(np.max(np.abs(y1 - ux * ux))),
        "y2": float(np.max(np.abs(y2 - uy * uy))),
        "y3": float(np.max(np.abs(state.y3.values - (y1 + y2) ** 2))),
        "y5": float(np.max(np.abs(state.y5.values - (y1**2 + y2**2)))),
        "z1": float(np.max(np.abs(state.z1.values - 0.5 * (u * u - 1.0)))),
        "z2": float(np.max(np.abs(state.z2.values - state.z1.values**2))),
        "phi1": float(np.max(np.abs(state.phi1.values - w * w))),
    }
    y3 = state.y3.values
    mask = y3 >= 1e-8
    if np.any(mask):
        errs["y4_recip"] = float(
            np.max(np.abs(state.y4.values[mask] * y3[mask] - 1.0)))
    return errs


def run_experiment(cfg: ExperimentConfig) -> RunArtifacts:
    """Run a stepping experiment, writing the energy log, snapshots, and a
    provenance record; invariant monitors are evaluated every step."""
    outdir = Path(cfg.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    cfg.to_ini(outdir / "config.ini")
    (outdir / "meta.json").write_text(json.dumps(
        {"package": "quadch", "version": __version__, "rng": RNG_NAME},
        indent=2) + "\n")

    ws = get_workspace(cfg.grid)
    ic_params = dict(cfg.ic_params)
    ic_params.setdefault("eps", cfg.model.eps)
    u0 = make_initial(cfg.ic_kind, ic_params, cfg.grid, cfg.seed)
    if cfg.scheme == "aniso":
        state = init_aniso(u0, cfg.model, cfg.delta_reg)
        stepper = lambda s: aniso_step(s, cfg.dt, cfg.model, cfg.fp, ws)
    else:
        state = init_iso(u0)
        stepper = lambda s: iso_step(s, cfg.dt, cfg.model, cfg.fp, ws)

    n_steps = cfg.n_steps
    energy_tol = 10.0 * cfg.fp.fp_tol
    mass_tol = 10.0 * cfg.fp.fp_tol

    times, energies, masses, iters, residuals = [], [], [], [], []
    snapshots = []
    monitors = {
        "energy_monotone": {"ok": True, "worst_increase": 0.0, "step": None,
                            "tolerance": energy_tol},
        "mass_conservation": {"ok": True, "max_drift": 0.0,
                              "tolerance": mass_tol},
        "casimir": {"ok": True, "worst": {}},
    }

    def log_row(step, t, st):
        times.append(t)
        energies.append(_energy_of(st, cfg.model))
        masses.append(mean(st.u))
        rep = st.solve_report
        iters.append(rep.iterations if rep else 0)
        residuals.append(rep.final_residual if rep else 0.0)

    def snap(step, t, st):
        path = outdir / f"field_{step:08d}.bin"
        save_field(st.u, path)
        snapshots.append({"step": step, "t": t, "path": str(path)})

    log_row(0, 0.0, state)
    snap(0, 0.0, state)
    mass0 = masses[0]
    e_prev = energies[0]
    failure = None
    completed = 0
    try:
        for step in range(1, n_steps + 1):
            state = stepper(state)
            completed = step
            t = step * cfg.dt
            e_now = _energy_of(state, cfg.model)
            m_now = mean(state.u)
            inc = e_now - e_prev
            mono = monitors["energy_monotone"]
            if inc > mono["worst_increase"]:
                mono["worst_increase"] = inc
                mono["step"] = step
            if inc > energy_tol:
                mono["ok"] = False
            drift = abs(m_now - mass0)
            mc = monitors["mass_conservation"]
            mc["max_drift"] = max(mc["max_drift"], drift)
            if drift > mass_tol:
                mc["ok"] = False
            e_prev = e_now
            want_snap = bool(cfg.snapshot_every) and step % cfg.snapshot_every == 0
            if step % cfg.log_every == 0 or step == n_steps or want_snap:
                times.append(t)
                energies.append(e_now)
                masses.append(m_now)
                rep = state.solve_report
                iters.append(rep.iterations if rep else 0)
                residuals.append(rep.final_residual if rep else 0.0)
                cas = _casimir_error(state, ws)
                worst = monitors["casimir"]["worst"]
                for k, v in cas.items():
                    worst[k] = max(worst.get(k, 0.0), v)
            if want_snap:
                snap(step, t, state)
    except StepFailureError as exc:
        failure = f"step {completed + 1}: {exc}"
    if snapshots[-1]["step"] != completed:
        snap(completed, completed * cfg.dt, state)

    _write_energy_csv(outdir / "energy.csv", times, energies, masses, iters,
                      residuals)
    with open(outdir / "snapshots.json", "w") as fh:
        json.dump(snapshots, fh, indent=2)
    ok = all(m.get("ok", True) for m in monitors.values()) and failure is None
    results = {"monitors": monitors, "ok": ok}
    if failure:
        results["failure"] = failure
    with open(outdir / "results.json", "w") as fh:
        json.dump(results, fh, indent=2, default=float)

    return RunArtifacts(
        outdir=outdir,
        times=np.asarray(times), energies=np.asarray(energies),
        masses=np.asarray(masses), fp_iters=np.asarray(iters),
        fp_residuals=np.asarray(residuals),
        snapshots=snapshots, monitors=monitors, results=results, ok=ok,
        final_state=state, failure=failure)


def _write_energy_csv(path, times, energies, masses, iters, residuals):
    with open(path, "w") as fh:
        fh.write("t,energy,mass,fp_iters,fp_residual\n")
        for t, e, m, it, r in zip(times, energies, masses, iters, residuals):
            fh.write(f"{t:.17g},{e:.17g},{m:.17g},{it:d},{r:.17g}\n")


def read_energy_csv(path):
    """Columns of an energy log as a dict of arrays."""
    rows = np.genfromtxt(path, delimiter=",", names=True)
    rows = np.atleast_1d(rows)
    return {name: np.asarray(rows[name]) for name in rows.dtype.names}


# ---------------------------------------------------------------------------
# preset catalog
# ---------------------------------------------------------------------------


def _p_iso_two_droplet():
    return ExperimentConfig(
        name="iso_two_droplet", scheme="iso", dt=1e-4, t_end=0.5,
        model=ModelParams(mobility=1.0, eps=0.1, beta=0.0),
        ic_kind="two_droplet", seed=1, outdir="runs/iso_two_droplet",
        log_every=1, snapshot_every=1000)


def _p_spinodal(u0):
    tag = f"{u0:.2f}".replace(".", "")
    return ExperimentConfig(
        name=f"spinodal_u{tag}", scheme="iso", dt=1e-4, t_end=0.1,
        model=ModelParams(mobility=1.0, eps=0.3, beta=0.0),
        ic_kind="gaussian_perturbed",
        ic_params={"u0": u0, "delta": 1e-3}, seed=2024,
        outdir=f"runs/spinodal_u{tag}", log_every=1)


def _p_coarsening():
    return ExperimentConfig(
        name="coarsening", scheme="iso", dt=1e-4, t_end=0.5,
        model=ModelParams(mobility=1.0, eps=0.3, beta=0.0),
        ic_kind="uniform_random", seed=7, outdir="runs/coarsening",
        log_every=5)


def _p_aniso_single():
    return ExperimentConfig(
        name="aniso_single", scheme="aniso", dt=1e-4, t_end=0.01,
        model=AnisoParams(mobility=1.0, eps=0.2, beta=6e-4, alpha=0.1),
        fp=FixedPointConfig(omega=0.5, max_iter=300),
        ic_kind="single_droplet", seed=1, outdir="runs/aniso_single",
        log_every=1, snapshot_every=0)


def _p_aniso_double():
    return ExperimentConfig(
        name="aniso_double", scheme="aniso", dt=1e-4, t_end=0.5,
        model=AnisoParams(mobility=1.0, eps=0.2, beta=6e-4, alpha=0.1),
        fp=FixedPointConfig(omega=0.5, max_iter=300),
        ic_kind="two_droplet", seed=1, outdir="runs/aniso_double",
        log_every=5, snapshot_every=1000)


def _p_aniso_random():
    return ExperimentConfig(
        name="aniso_random", scheme="aniso", dt=1e-6, t_end=1e-3,
        model=AnisoParams(mobility=1.0, eps=0.2, beta=6e-4, alpha=0.1),
        fp=FixedPointConfig(omega=0.5, max_iter=300),
        ic_kind="uniform_random", seed=11, outdir="runs/aniso_random",
        log_every=5)


STEP_PRESETS = {
    "iso_two_droplet": _p_iso_two_droplet,
    "spinodal_u000": lambda: _p_spinodal(0.0),
    "spinodal_u070": lambda: _p_spinodal(0.70),
    "spinodal_u095": lambda: _p_spinodal(0.95),
    "coarsening": _p_coarsening,
    "aniso_single": _p_aniso_single,
    "aniso_double": _p_aniso_double,
    "aniso_random": _p_aniso_random,
}

SPECIAL_PRESETS = ("time_order", "dispersion_map")
PRESET_NAMES = tuple(STEP_PRESETS) + SPECIAL_PRESETS


def run_preset(name: str, overrides=(), outdir: str | None = None):
    """Run a named preset, optionally with section.key=value overrides."""
    if name in STEP_PRESETS:
        cfg = STEP_PRESETS[name]()
        if outdir is not None:
            cfg = replace(cfg, outdir=str(outdir))
        cfg = apply_overrides(cfg, overrides)
        return run_experiment(cfg)
    if name == "time_order":
        kwargs = dict(kv.split("=", 1) for kv in overrides)
        kwargs = {k: _parse_scalar(v) for k, v in kwargs.items()}
        return run_time_order(outdir or "runs/time_order", **kwargs)
    if name == "dispersion_map":
        kwargs = dict(kv.split("=", 1) for kv in overrides)
        kwargs = {k: _parse_scalar(v) for k, v in kwargs.items()}
        return run_dispersion_map(outdir or "runs/dispersion_map", **kwargs)
    raise ValueError(f"unknown preset {name!r}; known: {', '.join(PRESET_NAMES)}")


# ---------------------------------------------------------------------------
# time-order study
# ---------------------------------------------------------------------------


def run_time_order(outdir, dts=(4e-4, 2e-4, 1e-4), dt_ref=1.25e-5,
                   t_end=0.02, eps=0.3, seed=5):
    """Temporal-convergence study on a smooth isotropic run.

    Each step size is run to the common horizon and compared against the
    dt_ref reference in the discrete L2 norm; the fitted log-log slope is
    the temporal order.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    dts = tuple(float(d) for d in np.atleast_1d(dts))
    base = ExperimentConfig(
        name="time_order", scheme="iso", dt=dts[0], t_end=t_end,
        model=ModelParams(mobility=1.0, eps=eps, beta=0.0),
        fp=FixedPointConfig(fp_tol=1e-13),
        ic_kind="single_mode",
        ic_params={"u0": 0.05, "amplitude": 0.2, "kx": 1, "ky": 1},
        seed=seed, outdir=str(outdir / "ref"), log_every=10**9)
    ref = run_experiment(replace(base, dt=dt_ref, outdir=str(outdir / "ref")))
    u_ref = ref.final_state.u
    errors = []
    for d in dts:
        art = run_experiment(replace(base, dt=d,
                                     outdir=str(outdir / f"dt_{d:g}")))
        diff = GridField(art.final_state.u.values - u_ref.values, u_ref.grid)
        errors.append(norm_h(diff))
    order = temporal_order(dts, errors)
    ratios = [errors[i] / errors[i + 1] for i in range(len(errors) - 1)]
    with open(outdir / "errors.csv", "w") as fh:
        fh.write("dt,error\n")
        for d, e in zip(dts, errors):
            fh.write(f"{d:.17g},{e:.17g}\n")
    results = {"order": order, "ratios": ratios,
               "dts": list(dts), "errors": errors, "dt_ref": dt_ref,
               "ok": bool(1.8 <= order <= 2.2)}
    with open(outdir / "results.json", "w") as fh:
        json.dump(results, fh, indent=2)
    return results


# ---------------------------------------------------------------------------
# dispersion maps
# ---------------------------------------------------------------------------


def run_dispersion_map(outdir, model="iso", method="all", nk=65, kmax=8.0,
                       dt=1e-4, u0=0.0, eps=0.3, beta=0.0, mobility=1.0,
                       alpha=0.1, fold="fourfold"):
    """Write (kx, ky, value) CSV sweeps of the growth rate and the per-step
    amplification factors."""
    from .analysis import DispersionSpec, amplification, lambda_aniso
    from .ch_aniso import GammaSpec

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    gamma = GammaSpec(fold, alpha) if model == "aniso" else None
    spec = DispersionSpec(ModelParams(mobility, eps, beta), u0, gamma)
    ks = np.linspace(-kmax, kmax, int(nk))
    methods = ("exact", "EE", "IE", "IM") if method == "all" else (method,)
    files = {}
    with open(outdir / "lambda.csv", "w") as fh:
        fh.write("kx,ky,value\n")
        for kx in ks:
            for ky in ks:
                fh.write(f"{kx:.17g},{ky:.17g},"
                         f"{lambda_aniso(spec, kx, ky):.17g}\n")
    files["lambda"] = str(outdir / "lambda.csv")
    for m in methods:
        path = outdir / f"g_{m}.csv"
        with open(path, "w") as fh:
            fh.write("kx,ky,value\n")
            for kx in ks:
                for ky in ks:
                    try:
                        g = amplification(m, spec, kx, ky, dt)
                    except Exception:
                        g = float("nan")
                    fh.write(f"{kx:.17g},{ky:.17g},{g:.17g}\n")
        files[m] = str(path)
    results = {"files": files, "model": model, "dt": dt, "u0": u0,
               "eps": eps, "beta": beta, "alpha": alpha, "ok": True}
    with open(outdir / "results.json", "w") as fh:
        json.dump(results, fh, indent=2)
    return results


# ---------------------------------------------------------------------------
# parallel sweeps
# ---------------------------------------------------------------------------


def run_sweep(configs, workers: int = 2):
    """Run independent configs in parallel, one simulation per worker."""
    dirs = [cfg.outdir for cfg in configs]
    if len(set(dirs)) != len(dirs):
        raise ValueError("sweep configs must use disjoint output directories")
    import multiprocessing

    with multiprocessing.Pool(processes=workers) as pool:
        return pool.map(run_experiment, configs)
