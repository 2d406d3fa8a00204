"""``spikelab`` command-line interface.

Every run is described by a :class:`Scenario` (JSON with ``name``, ``command``,
``model``, ``options`` and ``out``).  Flags build the same object, so
``--dump-scenario`` followed by ``--scenario FILE`` reproduces a run.

Exit codes: 0 success, 1 acceptance checks failed, 2 configuration error,
3 solver failure, 4 regime mismatch.  Errors are also written to stderr as a
single JSON object.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from . import __version__
from .errors import ConfigError, DomainError, RegimeMismatch, SolverError, SpikeLabError
from .models import BRUSSELATOR, GM, SCHNAKENBERG, ModelSpec

EXIT_OK, EXIT_CHECKS, EXIT_CONFIG, EXIT_SOLVER, EXIT_REGIME = 0, 1, 2, 3, 4

COMMANDS = ("core", "spectrum", "thresholds", "phase-diagram", "simulate", "continue", "atlas", "overlay", "verify")

_SIM_OPTS = {
    "rho": (float, None),
    "L0": (float, 1.0),
    "L_end": (float, 4.5),
    "n": (int, 4096),
    "dilution": (bool, False),
    "init": (str, "composite_one_spike"),
    "snapshot_dL": (float, 0.01),
    "t_end": (float, None),
    "snapshot_dt": (float, 10.0),
    "symmetric": (bool, True),
    "rtol": (float, 1e-6),
    "atol": (float, 1e-8),
    "checkpoint_every": (float, 60.0),
    "snapshot_stride": (int, 0),
}
_ATLAS_OPTS = {
    "L_min": (float, 0.5),
    "L_max": (float, 6.0),
    "max_half_spikes": (int, 4),
    "atlas_n": (int, 1024),
    "phase": (str, "interior"),
    "stability": (bool, True),
}
OPTIONS: Dict[str, Dict[str, tuple]] = {
    "core": {"B": (float, None), "beta": (float, None)},
    "spectrum": {"B": (float, None), "beta": (float, None), "n_eigs": (int, 4)},
    "thresholds": {"K": (float, 1.0), "mode": (str, "corrected")},
    "phase-diagram": {
        "grid": (str, "40x40"),
        "x_min": (float, None),
        "x_max": (float, None),
        "y_min": (float, None),
        "y_max": (float, None),
        "eps": (float, 0.01),
        "D": (float, 2.0),
        "workers": (int, 1),
    },
    "simulate": dict(_SIM_OPTS),
    "continue": {
        "L_start": (float, 1.0),
        "L_min": (float, 0.5),
        "L_max": (float, 6.0),
        "n": (int, 2048),
        "K_spikes": (float, 1.0),
        "direction": (int, 1),
        "stability": (bool, True),
        "richardson": (bool, False),
        "measure": (str, "l2norm_v"),
        "max_points": (int, 600),
    },
    "atlas": {k.replace("atlas_", ""): v for k, v in _ATLAS_OPTS.items()},
    "overlay": {**_SIM_OPTS, **_ATLAS_OPTS, "trajectory": (str, None)},
    "verify": {"suite": (str, "goldens"), "only": (str, None)},
}
NEEDS_MODEL = {"core", "spectrum", "thresholds", "simulate", "continue", "atlas", "overlay"}
SUITES = ("goldens", "paper-goldens")  # the second name is kept as an alias
SCENARIO_FIELDS = {"name", "command", "model", "options", "out"}


@dataclass
class Scenario:
    name: str
    command: str
    model: Optional[dict] = None
    options: Dict[str, Any] = field(default_factory=dict)
    out: str = "out"

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        allowed = OPTIONS[self.command]
        unknown = set(self.options) - set(allowed)
        if unknown:
            raise ConfigError(f"unknown options for {self.command}: {sorted(unknown)}")
        opts = {}
        for key, (typ, default) in allowed.items():
            val = self.options.get(key, default)
            if val is not None:
                try:
                    val = _coerce(typ, val)
                except (TypeError, ValueError):
                    raise ConfigError(f"option {key!r} must be {typ.__name__}") from None
            opts[key] = val
        self.options = opts
        if self.command in NEEDS_MODEL:
            if self.model is None:
                raise ConfigError(f"command {self.command} needs a model")
            self.model = ModelSpec.from_dict(self.model).to_dict()
        elif self.command == "phase-diagram":
            if not isinstance(self.model, dict) or set(self.model) != {"kind"}:
                raise ConfigError("phase-diagram takes model = {'kind': family}")
            kind = str(self.model["kind"]).lower()
            if kind not in (SCHNAKENBERG, BRUSSELATOR, GM, "gierer-meinhardt", "gierer_meinhardt"):
                raise ConfigError(f"unknown family {kind!r}")
            self.model = {"kind": GM if kind.startswith("gierer") else kind}
        elif self.model is not None:
            raise ConfigError(f"command {self.command} takes no model")

    @property
    def spec(self) -> ModelSpec:
        return ModelSpec.from_dict(self.model)

    def to_dict(self):
        return {"name": self.name, "command": self.command, "model": self.model, "options": dict(self.options),
                "out": self.out}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        if not isinstance(data, dict):
            raise ConfigError("scenario must be a JSON object")
        unknown = set(data) - SCENARIO_FIELDS
        if unknown:
            raise ConfigError(f"unknown scenario fields {sorted(unknown)}")
        if "command" not in data:
            raise ConfigError("scenario needs a command")
        return cls(
            name=str(data.get("name", data["command"])),
            command=data["command"],
            model=data.get("model"),
            options=dict(data.get("options") or {}),
            out=str(data.get("out", "out")),
        )

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid scenario JSON: {exc}") from None
        return cls.from_dict(data)


def _coerce(typ, val):
    if typ is bool:
        if isinstance(val, bool):
            return val
        if isinstance(val, str) and val.lower() in ("true", "false", "1", "0", "yes", "no"):
            return val.lower() in ("true", "1", "yes")
        raise ValueError(val)
    if typ is int and isinstance(val, float) and not val.is_integer():
        raise ValueError(val)
    return typ(val)


def worker_count(requested: int) -> int:
    """Requested worker count, capped by SPIKELAB_THREADS when it is set."""
    n = max(1, int(requested))
    cap = os.environ.get("SPIKELAB_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ConfigError("SPIKELAB_THREADS must be an integer") from None
    return n


# ---------------------------------------------------------------------------
# output helpers


class _Out:
    def __init__(self, directory):
        self.dir = directory
        os.makedirs(directory, exist_ok=True)
        self.files = []

    def path(self, name):
        self.files.append(name)
        return os.path.join(self.dir, name)

    def json(self, name, obj):
        with open(self.path(name), "w") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")

    def manifest(self, sc: Scenario, extra=None):
        entries = []
        for name in sorted(set(self.files)):
            p = os.path.join(self.dir, name)
            if os.path.isfile(p):
                with open(p, "rb") as fh:
                    entries.append({"file": name, "sha256": hashlib.sha256(fh.read()).hexdigest()})
        man = {"spikelab_version": __version__, "scenario": sc.to_dict(), "outputs": entries}
        if extra:
            man.update(extra)
        with open(os.path.join(self.dir, "manifest.json"), "w") as fh:
            json.dump(man, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"not JSON serializable: {type(o)}")


def _echo(obj):
    print(json.dumps(obj, indent=2, sort_keys=True, default=_json_default))


# ---------------------------------------------------------------------------
# commands


def _core_kind(model: ModelSpec):
    if model.kind == GM:
        raise ConfigError("the core problem is defined for schnakenberg and brusselator only")
    return model.kind, (model.f if model.kind == BRUSSELATOR else None)


def _core_solution(model, opts):
    from . import core

    kind, f = _core_kind(model)
    if opts["B"] is not None and opts["beta"] is not None:
        raise ConfigError("give at most one of --B and --beta")
    if opts["B"] is not None:
        return core.solve_core(kind, f, B=opts["B"]), False
    if opts["beta"] is not None:
        return core.solve_core(kind, f, beta=opts["beta"]), False
    return core.fold_point(kind, f).solution, True


def cmd_core(sc: Scenario, out: _Out):
    import csv

    from . import core
    from .plotting import plot_core_branch

    model = sc.spec
    sol, at_fold = _core_solution(model, sc.options)
    kind, f = _core_kind(model)
    res = {"kind": kind, "f": f, "B": sol.B, "beta": sol.beta, "C": sol.C, "at_fold": at_fold,
           "residual_norm": sol.residual_norm, "tail_deviation": sol.tail_deviation}
    out.json("core.json", res)
    with open(out.path("core_profile.csv"), "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["y", "V0", "U0"])
        for y, v, u in zip(sol.y, sol.V0, sol.U0):
            wr.writerow([f"{y:.10g}", f"{v:.12g}", f"{u:.12g}"])
    branch = core.continue_core_branch(kind, f)
    branch.to_csv(out.path("core_branch.csv"))
    plot_core_branch(branch, out.path("core_branch.svg"))
    _echo(res)


def cmd_spectrum(sc: Scenario, out: _Out):
    from . import spectrum

    model = sc.spec
    sol, at_fold = _core_solution(model, sc.options)
    eig = spectrum.core_spectrum(sol, n_eigs=sc.options["n_eigs"])
    res = eig.to_dict()
    res["at_fold"] = at_fold
    if at_fold:
        res["dimple_similarity"] = spectrum.dimple_similarity(sol, eig)
    out.json("spectrum.json", res)
    eig.modes_to_csv(out.path("modes.csv"))
    from .plotting import plot_profile

    plot_profile(eig.y, {"Phi0": eig.Phi[0].real, "N0": eig.N[0].real}, out.path("modes.svg"))
    _echo(res)


def cmd_thresholds(sc: Scenario, out: _Out):
    from . import outer

    model = sc.spec
    K = sc.options["K"]
    r = outer.threshold(model, K, mode=sc.options["mode"])
    res = r.to_dict()
    res["kind"] = r.kind.lower()
    out.json("thresholds.json", res)
    outer.thresholds_to_csv([r], out.path("thresholds.csv"))
    _echo(res)


def _ranges(family):
    if family == SCHNAKENBERG:
        return (0.02, 1.5), (0.05, 2.0)
    if family == BRUSSELATOR:
        return (0.05, 0.95), (0.2, 2.0)
    return (0.0, 2.0), (0.0, 0.0)


def _pd_row(args):
    from . import outer

    family, xs, y, eps, D = args
    return outer.phase_diagram(family, xs, [y], epsilon=eps, D=D)


def cmd_phase_diagram(sc: Scenario, out: _Out):
    from . import outer

    o = sc.options
    family = sc.model["kind"]
    try:
        nx, ny = (int(s) for s in o["grid"].lower().split("x"))
    except ValueError:
        raise ConfigError("--grid must look like 50x50") from None
    if nx < 2 or ny < 1:
        raise ConfigError("grid needs at least 2 x 1 cells")
    (x0, x1), (y0, y1) = _ranges(family)
    x0 = o["x_min"] if o["x_min"] is not None else x0
    x1 = o["x_max"] if o["x_max"] is not None else x1
    y0 = o["y_min"] if o["y_min"] is not None else y0
    y1 = o["y_max"] if o["y_max"] is not None else y1
    xs = np.linspace(x0, x1, nx)
    if family == GM:
        pd = outer.phase_diagram(family, xs, epsilon=o["eps"], D=o["D"])
    else:
        ys = np.linspace(y0, y1, ny)
        workers = worker_count(o["workers"])
        jobs = [(family, xs, y, o["eps"], o["D"]) for y in ys]
        if workers > 1:
            with ProcessPoolExecutor(workers) as ex:
                rows = list(ex.map(_pd_row, jobs))
        else:
            rows = [_pd_row(j) for j in jobs]
        # critical curves over the full y range from a one-column diagram
        curves = outer.phase_diagram(family, xs[:1], ys, epsilon=o["eps"], D=o["D"]).curves
        pd = outer.PhaseDiagram(family, rows[0].x_name, rows[0].y_name, xs, ys,
                                np.vstack([r.labels for r in rows]), curves)
    pd.to_csv(out.path("phase_diagram.csv"))
    pd.to_json(out.path("phase_diagram.json"))
    pd.to_svg(out.path("phase_diagram.svg"))
    summary = {"family": family, "grid": [nx, ny]}
    if family == BRUSSELATOR:
        summary["f_c"] = outer.critical_f()
    if family == SCHNAKENBERG:
        summary["a_c(b=1)"] = outer.critical_a(1.0, o["eps"] / np.sqrt(o["D"]))
    counts = {}
    for lab in pd.labels.ravel():
        counts[lab] = counts.get(lab, 0) + 1
    summary["counts"] = dict(sorted(counts.items()))
    out.json("summary.json", summary)
    _echo(summary)


def _sim_config(model, o, checkpoint=None):
    from .pde import SimConfig

    return SimConfig(
        model,
        rho=o["rho"],
        L0=o["L0"],
        L_end=o["L_end"],
        n=o["n"],
        dilution=o["dilution"],
        init=o["init"],
        snapshot_dL=o["snapshot_dL"],
        t_end=o["t_end"],
        snapshot_dt=o["snapshot_dt"],
        symmetric=o["symmetric"],
        rtol=o["rtol"],
        atol=o["atol"],
        checkpoint=checkpoint,
        checkpoint_every=o["checkpoint_every"],
    )


def save_trajectory(traj, path):
    np.savez_compressed(path, config=json.dumps(traj.config.to_dict(), sort_keys=True), x=traj.x, t=traj.t,
                        L=traj.L, v=traj.v, u=traj.u, min_v=traj.min_v, min_u=traj.min_u)


def load_trajectory(path):
    from .pde import SimConfig, SimTrajectory

    try:
        data = np.load(path, allow_pickle=False)
    except OSError as exc:
        raise ConfigError(f"cannot read trajectory {path}: {exc}") from None
    cfg = json.loads(str(data["config"]))
    cfg["model"] = ModelSpec.from_dict(cfg["model"])
    config = SimConfig(**cfg)
    return SimTrajectory(config, data["x"], data["t"], data["L"], data["v"], data["u"],
                         float(data["min_v"]), float(data["min_u"]))


def _simulate(sc: Scenario, out: _Out):
    from . import pde

    o = sc.options
    cfg = _sim_config(sc.spec, o, checkpoint=os.path.join(out.dir, "checkpoint.npz"))

    def progress(t, L):
        print(f"t = {t:.1f}  L = {L:.4f}", file=sys.stderr, flush=True)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", pde.AmbiguousEvent)
        traj = pde.simulate_growing(cfg, progress=progress)
        events = traj.events
    events.to_csv(out.path("events.csv"))
    pde.export_heatmap(traj, out.path("heatmap_v.csv"))
    out.files.append("heatmap_v.svg")
    save_trajectory(traj, out.path("trajectory.npz"))
    if o["snapshot_stride"] > 0:
        for p in pde.write_snapshots(traj, os.path.join(out.dir, "snapshots"), o["snapshot_stride"]):
            out.files.append(os.path.relpath(p, out.dir))
    summary = {
        "events": [{"L": e.L, "kind": e.kind, "count_before": e.count_before, "count_after": e.count_after}
                   for e in events],
        "min_v": traj.min_v,
        "min_u": traj.min_u,
        "final_count": traj.counts()[-1],
        "snapshots": len(traj.t),
    }
    out.json("summary.json", summary)
    print(f"wall time {traj.wall_time:.1f} s", file=sys.stderr)
    return traj, summary


def cmd_simulate(sc: Scenario, out: _Out):
    _, summary = _simulate(sc, out)
    _echo(summary)


def cmd_continue(sc: Scenario, out: _Out):
    from . import continuation as cont
    from .plotting import plot_branches

    model, o = sc.spec, sc.options
    if o["measure"] not in ("l2norm_v", "mu", "u0v0"):
        raise ConfigError("--measure must be l2norm_v, mu or u0v0")
    if o["direction"] not in (1, -1):
        raise ConfigError("--direction must be 1 or -1")
    start = cont.steady_solve(model, o["L_start"], K_spikes=o["K_spikes"], n=o["n"])
    br = cont.continue_in_L(model, start, o["direction"], (o["L_min"], o["L_max"]), stability=o["stability"],
                            max_points=o["max_points"])
    br.to_csv(out.path("branch.csv"))
    res = br.summary()
    if o["richardson"]:
        Lr, Lc, Lf, _ = cont.richardson_fold(model, o["n"])
        res["richardson_fold"] = {"L": Lr, "L_coarse": Lc, "L_fine": Lf}
    out.json("branch.json", res)
    plot_branches([br], out.path("branch.svg"), measure=o["measure"])
    _echo(res)


def _atlas(model, o, n):
    from . import continuation as cont

    return cont.multi_branch_atlas(
        model, (o["L_min"], o["L_max"]), o["max_half_spikes"], n=n, phase=o["phase"], stability=o["stability"]
    )


def cmd_atlas(sc: Scenario, out: _Out):
    from . import continuation as cont
    from .plotting import plot_branches

    atlas = _atlas(sc.spec, sc.options, sc.options["n"])
    cont.write_atlas(atlas, out.dir)
    out.files += ["branches.csv", "atlas.json"]
    plot_branches(atlas, out.path("atlas.svg"))
    _echo({"branches": [b.summary() for b in atlas]})


def cmd_overlay(sc: Scenario, out: _Out):
    from . import continuation as cont
    from .plotting import plot_overlay

    o = sc.options
    if o["trajectory"]:
        traj = load_trajectory(o["trajectory"])
        if traj.config.model != sc.spec:
            raise ConfigError("trajectory was computed for a different model")
    else:
        traj, _ = _simulate(sc, out)
    atlas = _atlas(sc.spec, o, o["atlas_n"])
    ov = cont.overlay(traj, atlas)
    ov.to_csv(out.path("overlay.csv"))
    plot_overlay(ov, out.path("overlay.svg"))
    jumps = [{"L": r[2], "annotation": r[5]} for r in ov.trajectory() if r[5]]
    res = {"jumps": jumps, "branches": [b.branch_id for b in atlas]}
    out.json("overlay.json", res)
    _echo(res)


def cmd_verify(sc: Scenario, out: _Out):
    from . import verify

    if sc.options["suite"] not in SUITES:
        raise ConfigError(f"unknown suite {sc.options['suite']!r}")
    only = sc.options["only"].split(",") if sc.options["only"] else None
    checks = verify.run_suite(only, echo=lambda s: print(s, flush=True))
    out.json("verify.json", [c.to_dict() for c in checks])
    failed = [c for c in checks if c.status == verify.FAIL]
    print(f"{len(checks) - len(failed)}/{len(checks)} criteria without failure")
    return EXIT_CHECKS if failed else EXIT_OK


HANDLERS = {
    "core": cmd_core,
    "spectrum": cmd_spectrum,
    "thresholds": cmd_thresholds,
    "phase-diagram": cmd_phase_diagram,
    "simulate": cmd_simulate,
    "continue": cmd_continue,
    "atlas": cmd_atlas,
    "overlay": cmd_overlay,
    "verify": cmd_verify,
}


def run(sc: Scenario) -> int:
    out = _Out(sc.out)
    t0 = time.monotonic()
    code = HANDLERS[sc.command](sc, out) or EXIT_OK
    out.manifest(sc, {"exit_code": code})
    print(f"done in {time.monotonic() - t0:.1f} s; outputs in {sc.out}", file=sys.stderr)
    return code


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _fail(EXIT_CONFIG, "ConfigError", message)


def _fail(code, kind, message):
    sys.stderr.write(json.dumps({"error": kind, "message": str(message), "exit_code": code}) + "\n")
    raise SystemExit(code)


def _add_option(p, name, typ, default):
    flag = "--" + name
    if typ is bool:
        p.add_argument(flag, dest=name, action=argparse.BooleanOptionalAction, default=None)
    else:
        p.add_argument(flag, dest=name, type=typ, default=None, help=f"default {default}")


def build_parser():
    ap = _Parser(prog="spikelab", description="Spike replication and nucleation on growing domains")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    for cmd in COMMANDS:
        p = sub.add_parser(cmd)
        p.add_argument("--scenario", help="scenario JSON file; flags given as well override it")
        p.add_argument("--dump-scenario", action="store_true", help="print the scenario JSON and exit")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--name", default=None)
        if cmd != "verify":
            p.add_argument("--model", default=None, help="schnakenberg | brusselator | gm")
        if cmd in NEEDS_MODEL:
            for k in ("a", "b", "f", "kappa", "tau"):
                p.add_argument("--" + k, type=float, default=None)
            p.add_argument("--eps", type=float, default=None)
            p.add_argument("--D", dest="D_model", type=float, default=None)
        for name, (typ, default) in OPTIONS[cmd].items():
            if cmd in NEEDS_MODEL and name == "D":
                continue
            _add_option(p, name, typ, default)
    return ap


_PARAMS = {SCHNAKENBERG: ("a", "b"), BRUSSELATOR: ("a", "f"), GM: ("kappa", "tau")}


def _model_from_args(ns, base: Optional[dict]):
    kind = ns.model or (base or {}).get("kind")
    if kind is None:
        raise ConfigError("--model is required")
    kind = str(kind).lower()
    if kind.startswith("gierer"):
        kind = GM
    if kind not in _PARAMS:
        raise ConfigError(f"unknown model {kind!r}")
    same = base is not None and base.get("kind") == kind
    params = dict(base["params"]) if same else {}
    for k in _PARAMS[kind]:
        v = getattr(ns, k, None)
        if v is not None:
            params[k] = v
    for k in ("a", "b", "f", "kappa", "tau"):
        if k not in _PARAMS[kind] and getattr(ns, k, None) is not None:
            raise ConfigError(f"--{k} does not apply to {kind}")
    if kind == GM:
        params.setdefault("tau", 1.0)
    missing = [k for k in _PARAMS[kind] if k not in params]
    if missing:
        raise ConfigError(f"{kind} needs --{' --'.join(missing)}")
    eps = ns.eps if ns.eps is not None else (base["epsilon"] if same else 0.01)
    D = ns.D_model if ns.D_model is not None else (base["D"] if same else (1.0 if kind == GM else 2.0))
    return {"kind": kind, "params": params, "epsilon": eps, "D": D}


def scenario_from_args(ns) -> Scenario:
    base = {}
    if ns.scenario:
        try:
            with open(ns.scenario) as fh:
                base = Scenario.from_json(fh.read()).to_dict()
        except OSError as exc:
            raise ConfigError(f"cannot read scenario: {exc}") from None
        if base["command"] != ns.command:
            raise ConfigError(f"scenario is for {base['command']!r}, not {ns.command!r}")
    opts = dict(base.get("options", {}))
    for name in OPTIONS[ns.command]:
        if ns.command in NEEDS_MODEL and name == "D":
            continue
        v = getattr(ns, name, None)
        if v is not None:
            opts[name] = v
    if ns.command in NEEDS_MODEL:
        touched = ns.model or any(getattr(ns, k, None) is not None for k in ("a", "b", "f", "kappa", "tau", "eps"))
        model = _model_from_args(ns, base.get("model")) if touched or ns.D_model is not None or not base \
            else base["model"]
    elif ns.command == "phase-diagram":
        kind = ns.model or (base.get("model") or {}).get("kind")
        if kind is None:
            raise ConfigError("--model is required")
        model = {"kind": kind}
    else:
        model = None
    return Scenario(
        name=ns.name or base.get("name") or ns.command,
        command=ns.command,
        model=model,
        options=opts,
        out=ns.out or base.get("out") or os.path.join("out", ns.command),
    )


def main(argv=None) -> int:
    ap = build_parser()
    ns = ap.parse_args(argv)
    if not ns.command:
        ap.print_help(sys.stderr)
        return EXIT_CONFIG
    try:
        sc = scenario_from_args(ns)
        if ns.dump_scenario:
            print(sc.to_json())
            return EXIT_OK
        return run(sc)
    except (ConfigError, DomainError) as exc:
        _fail(EXIT_CONFIG, type(exc).__name__, exc)
    except RegimeMismatch as exc:
        _fail(EXIT_REGIME, type(exc).__name__, exc)
    except (SolverError, SpikeLabError) as exc:
        _fail(EXIT_SOLVER, type(exc).__name__, exc)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
