"""
Command line front end.

Subcommands ``spectrum``, ``design``, ``converge``, ``simulate`` and
``observe`` read a JSON run configuration (missing sections fall back to the
shipped default) and write CSV/JSON artifacts to ``--out``.  Data files are
deterministic; the version and wall-clock time go to a separate
``<command>.meta.json``.

Exit codes: 0 success, 1 IO error, 2 invalid configuration, 3 assumption
failure, 4 convergence criterion unmet, 5 numerical failure.
"""
from __future__ import annotations

import argparse
import copy
import csv
import datetime as _dt
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .convergence import (DiskFamily, disk_family, gap_distances, margin_criterion, minimal_order,
                          theorem_criterion, verify_eps_bound, verify_pairwise_bound,
                          verify_theorem_conv)
from .feedback import (BasisChoice, BoundedKernel, basis_eigenpairs, build_bounded_kernel,
                       closed_loop_spectrum, design_feedback)
from .observer import design_observer, observer_closed_loop_spectrum
from .plant import (BoundaryDynamics, PlantParameters, eigenfunction, find_spectrum,
                    modal_input_coefficient)
from .simulation import decay_rate, default_x0, simulate, simulate_observer
from .spectral import (DegeneracyError, GaussLegendre, RepresentationError, SimplicityError,
                       Spectrum, SpectrumLabel, StateFunction, Window)
from .target import (TargetDynamics, check_assumption_A2, check_simplicity_and_gaps,
                     desired_boundary_unbounded_coefficient, desired_spectrum)

__all__ = ["main", "RunConfig", "load_config", "ConfigError", "AssumptionFailure",
           "ConvergenceUnmet", "EXIT_OK", "EXIT_IO", "EXIT_CONFIG", "EXIT_ASSUMPTION",
           "EXIT_CONVERGENCE", "EXIT_NUMERICAL", "spectrum_rows", "write_spectrum_csv"]

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_ASSUMPTION, EXIT_CONVERGENCE, EXIT_NUMERICAL = 0, 1, 2, 3, 4, 5


class ConfigError(ValueError):
    """Configuration rejected by the schema or by a physical invariant."""


class AssumptionFailure(RuntimeError):
    """A design assumption does not hold; the report has been written."""


class ConvergenceUnmet(RuntimeError):
    """The convergence criterion never settles on the requested order range."""


def _data_text(name: str) -> str:
    return resources.files("latelump").joinpath("data", name).read_text()


def load_schema(name: str) -> dict:
    return json.loads(_data_text(name))


def default_config() -> dict:
    return json.loads(_data_text("default_config.json"))


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in ("controller_target",
                                                                                "observer_target"):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration with the derived library objects."""
    raw: dict
    plant: PlantParameters
    controller_target: TargetDynamics
    observer_target: TargetDynamics | None
    n: int
    basis: BasisChoice
    n_range: tuple
    zero_kernel: bool
    epsilon: float
    criterion: str
    margin: float
    window: Window
    quad: GaussLegendre
    grid: int
    per_disk: int
    sim: dict

    @property
    def kernel(self) -> BoundedKernel:
        if self.zero_kernel:
            return BoundedKernel(0.0, 0.0)
        return build_bounded_kernel(self.plant, self.controller_target)


def _target(spec: dict, tau: float, name: str) -> TargetDynamics:
    mu = spec["mu"]
    mu = math.exp(mu["rate"] * tau) if isinstance(mu, dict) else float(mu)
    try:
        t = TargetDynamics(tuple(spec["kappa"]), mu, tau)
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}") from exc
    if t.N != 1:
        raise ConfigError(f"{name}: the explicit control law needs a first-order polynomial (two kappa entries)")
    return t


def parse_config(data: dict) -> RunConfig:
    """
    Merge ``data`` over the default configuration, validate and build objects.

    Raises
    ------
    ConfigError
        Schema violation or a broken invariant (for instance ``|mu| >= 1``).
    """
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    base = default_config()
    if "observer_target" not in data and "controller_target" in data:
        # an explicit controller target without observer target means no observer
        base.pop("observer_target")
    raw = _merge(base, data)
    try:
        jsonschema.validate(raw, load_schema("config.schema.json"))
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"schema: {exc.message}") from exc
    try:
        p = PlantParameters(**raw["plant"])
        w = Window(**raw["window"])
        quad = GaussLegendre(**raw["quadrature"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    tc = _target(raw["controller_target"], p.tau, "controller_target")
    to = _target(raw["observer_target"], p.tau, "observer_target") if "observer_target" in raw else None
    ap, cv = raw["approximation"], raw["convergence"]
    lo, hi = ap["n_range"]
    if lo > hi:
        raise ConfigError("approximation.n_range must be increasing")
    return RunConfig(raw, p, tc, to, int(ap["n"]), BasisChoice(ap["basis"]), (int(lo), int(hi)),
                     bool(ap.get("zero_kernel", False)), float(raw["epsilon"]),
                     cv["criterion"], float(cv["margin"]), w, quad,
                     int(raw["sampling"]["grid"]), int(raw["sampling"]["per_disk"]),
                     dict(raw["simulation"]))


def load_config(path: str | os.PathLike | None) -> RunConfig:
    if path is None:
        return parse_config({})
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"not valid JSON: {exc}") from exc
    return parse_config(data)


# ---------------------------------------------------------------- formatting

def _num(x: float) -> str:
    """17 significant digits, no negative zero."""
    return format(float(x) + 0.0, ".17g")


def _c(z) -> list:
    return [_finite(complex(z).real), _finite(complex(z).imag)]


def _finite(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _clean(obj):
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats as null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _finite(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return _c(obj)
    return obj


def _write_json(path: Path, obj, schema: str | None = None) -> None:
    obj = _clean(obj)
    if schema is not None:
        jsonschema.validate(obj, load_schema(schema))
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")


def _write_meta(out: Path, command: str, cfg: RunConfig) -> None:
    meta = {"command": command, "version": __version__,
            "generated_utc": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")}
    (out / f"{command}.meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def spectrum_rows(s: Spectrum) -> list[list[str]]:
    """CSV rows ``set,index,re,im`` ordered by Re then Im ascending."""
    lams = np.asarray(s.eigenvalues, dtype=complex)
    order = np.lexsort((lams.imag, lams.real))
    return [[s.label.value, str(i), _num(lams[k].real), _num(lams[k].imag)]
            for i, k in enumerate(order)]


def write_spectrum_csv(path: Path, s: Spectrum) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["set", "index", "re", "im"])
        wr.writerows(spectrum_rows(s))


def _provenance(cfg: RunConfig) -> dict:
    w = cfg.window
    return {"window": {"re_min": w.re_min, "im_max": w.im_max, "re_max": w.re_max},
            "quadrature": {"nodes": cfg.quad.nodes, "panels": cfg.quad.panels},
            "sampling": {"grid": cfg.grid, "per_disk": cfg.per_disk},
            "version": __version__}


# ---------------------------------------------------------------- spectra

def _rho(cfg: RunConfig, observer: bool = False) -> float:
    t = cfg.observer_target if observer else cfg.controller_target
    return desired_boundary_unbounded_coefficient(t, cfg.plant)


def compute_spectrum(cfg: RunConfig, which: SpectrumLabel) -> Spectrum:
    """Spectrum of the dynamics named by ``which`` in the configured window."""
    p, w = cfg.plant, cfg.window
    which = SpectrumLabel(which)
    if which.value.startswith("Observer") and cfg.observer_target is None:
        raise ConfigError(f"{which.value} needs observer_target")
    if which is SpectrumLabel.OpenLoop:
        return find_spectrum(p, BoundaryDynamics(0.0), w, label=which)
    if which is SpectrumLabel.Intermediate:
        return find_spectrum(p, BoundaryDynamics(_rho(cfg)), w, label=which)
    if which is SpectrumLabel.Desired:
        return desired_spectrum(cfg.controller_target, w, label=which)
    if which is SpectrumLabel.ClosedLoop:
        inter = find_spectrum(p, BoundaryDynamics(_rho(cfg)), w)
        fb = design_feedback(p, cfg.controller_target, cfg.n, cfg.basis, w, cfg.kernel, cfg.quad)
        return closed_loop_spectrum(fb, w, inter)
    if which is SpectrumLabel.ObserverIntermediate:
        return find_spectrum(p, BoundaryDynamics(_rho(cfg, True)), w, label=which)
    if which is SpectrumLabel.ObserverDesired:
        return desired_spectrum(cfg.observer_target, w, label=which)
    obs = design_observer(p, cfg.observer_target, cfg.n, w, cfg.quad, zero_gain=cfg.zero_kernel)
    return observer_closed_loop_spectrum(obs, w)


def cmd_spectrum(cfg: RunConfig, which: str, out: Path) -> int:
    try:
        label = SpectrumLabel(which)
    except ValueError:
        raise ConfigError(f"unknown dynamics label {which!r}") from None
    s = compute_spectrum(cfg, label)
    write_spectrum_csv(out / f"spectrum_{label.value}.csv", s)
    return EXIT_OK


# ---------------------------------------------------------------- design

def _a1(t: TargetDynamics, w: Window) -> tuple[dict, Spectrum | None]:
    try:
        s = desired_spectrum(t, w)
    except SimplicityError as exc:
        return {"hurwitz": t.hurwitz(), "simple_ok": False, "min_gap": None,
                "details": str(exc), "ok": False}, None
    rep = check_simplicity_and_gaps(s)
    ok = t.hurwitz() and rep.simple_ok
    return {"hurwitz": t.hurwitz(), "simple_ok": rep.simple_ok, "min_gap": rep.min_gap,
            "details": rep.details, "ok": ok}, s


def _assumptions(cfg: RunConfig, t: TargetDynamics) -> tuple[dict, bool]:
    """A1 (Hurwitz polynomial, simple desired spectrum) and A2 with lemma bounds."""
    w = cfg.window
    a1, s = _a1(t, w)
    out = {"A1": a1}
    if s is None or s.eigenvalues.size == 0:
        out["A2"] = None
        return out, a1["ok"]
    pairs, _ = basis_eigenpairs(cfg.plant, t, BasisChoice.Desired, s.eigenvalues.size, w, quad=cfg.quad)
    b = np.array([modal_input_coefficient(q, cfg.plant) for q in pairs])
    rep = check_assumption_A2(s, b, w, sample_count=cfg.grid, t=t, per_disk=cfg.per_disk)
    M = rep.a2_bound_M
    eps = cfg.epsilon
    pw = verify_pairwise_bound(b, s, t)
    ev = verify_eps_bound(b, s, eps, sample_count=cfg.grid, t=t, per_disk=cfg.per_disk)
    out["A2"] = rep.to_dict()
    out["bounds"] = {
        "epsilon": eps, "M": M,
        "pairwise": {"max": pw, "bound": 3 * M, "ok": pw <= 3 * M},
        "outside_disks": {"max": ev, "bound": M * (4 + eps ** -2), "ok": ev <= M * (4 + eps ** -2)},
    }
    ok = a1["ok"] and rep.ok and out["bounds"]["pairwise"]["ok"] and out["bounds"]["outside_disks"]["ok"]
    return out, ok


def design_report(cfg: RunConfig) -> tuple[dict, bool]:
    p, w, t = cfg.plant, cfg.window, cfg.controller_target
    kern = cfg.kernel
    fb = design_feedback(p, t, cfg.n, cfg.basis, w, kern, cfg.quad)
    ctrl_assump, ok = _assumptions(cfg, t)
    rep = {
        "plant": {"alpha": p.alpha, "beta": p.beta, "gamma": p.gamma, "tau": p.tau, "v": p.v},
        "controller": {
            "kappa": list(t.kappa), "mu": t.mu, "rho": fb.rho,
            "c_plus": kern.c_plus, "c_minus": kern.c_minus,
            "n": fb.n, "basis": fb.basis.value,
            "eigenvalues": [_c(q.lam) for q in fb.pairs],
            "gains": [_c(k) for k in fb.gains],
            "assumptions": ctrl_assump,
        },
        "provenance": _provenance(cfg),
    }
    if cfg.observer_target is not None:
        to = cfg.observer_target
        obs = design_observer(p, to, cfg.n, w, cfg.quad, zero_gain=cfg.zero_kernel)
        obs_assump, ok_o = _assumptions(cfg, to)
        ok = ok and ok_o
        rep["observer"] = {
            "kappa": list(to.kappa), "mu": to.mu, "rho_o": obs.rho_o, "n": obs.n,
            "eigenvalues": [_c(z) for z in obs.eigenvalues],
            "r": [_c(z) for z in obs.r], "l": [_c(z) for z in obs.l],
            "assumptions": obs_assump,
        }
    rep["assumptions_ok"] = ok
    return rep, ok


def cmd_design(cfg: RunConfig, out: Path) -> int:
    rep, ok = design_report(cfg)
    _write_json(out / "design.json", rep, "design_report.schema.json")
    if not ok:
        raise AssumptionFailure("design assumptions violated; see design.json")
    return EXIT_OK


# ---------------------------------------------------------------- convergence

def _disks(cfg: RunConfig, t: TargetDynamics) -> DiskFamily:
    """Disks around the spectrum the design assigns (the intermediate one for a zero kernel)."""
    if cfg.zero_kernel:
        pad = 2 * t.branch_spacing
        rho = desired_boundary_unbounded_coefficient(t, cfg.plant)
        s = find_spectrum(cfg.plant, BoundaryDynamics(rho), cfg.window.enlarged(d_im=pad))
        return DiskFamily(s.eigenvalues, gap_distances(s), cfg.epsilon)
    return disk_family(t, cfg.window, cfg.epsilon)


def _criterion(cfg: RunConfig):
    return theorem_criterion if cfg.criterion == "theorem" else margin_criterion(cfg.margin)


def _controller_point(args):
    cfg, n = args
    p, w = cfg.plant, cfg.window
    inter = find_spectrum(p, BoundaryDynamics(_rho(cfg)), w)
    fb = design_feedback(p, cfg.controller_target, n, cfg.basis, w, cfg.kernel, cfg.quad)
    closed = closed_loop_spectrum(fb, w, inter)
    return verify_theorem_conv(closed, _disks(cfg, cfg.controller_target), w, n=n)


def _observer_point(args):
    cfg, n = args
    p, w = cfg.plant, cfg.window
    obs = design_observer(p, cfg.observer_target, n, w, cfg.quad, zero_gain=cfg.zero_kernel)
    closed = observer_closed_loop_spectrum(obs, w)
    return verify_theorem_conv(closed, _disks(cfg, cfg.observer_target), w, n=n)


def _sweep(cfg: RunConfig, point, jobs: int):
    ns = list(range(cfg.n_range[0], cfg.n_range[1] + 1))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            reports = dict(zip(ns, ex.map(point, [(cfg, n) for n in ns])))
    else:
        reports = {n: point((cfg, n)) for n in ns}
    return minimal_order(lambda n: reports[n], ns, _criterion(cfg))


_SWEEP_HEADER = ["n", "contained", "one_per_disk", "max_re", "hausdorff"]


def _sweep_rows(res) -> list[list[str]]:
    return [[str(r.n), str(r.contained).lower(), str(r.one_per_disk).lower(),
             _num(r.max_re_closed_loop), _num(r.hausdorff)] for r in res.trail]


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        wr.writerows(rows)


def _sweep_dict(cfg: RunConfig, res, basis: str) -> dict:
    return {"basis": basis, "epsilon": cfg.epsilon, "criterion": cfg.criterion,
            "margin": cfg.margin if cfg.criterion == "margin" else None,
            "n_range": list(cfg.n_range), "zero_kernel": cfg.zero_kernel,
            "minimal_order": res.n_eps, "first_pass": res.first_pass,
            "non_monotone": res.non_monotone,
            "reports": [r.to_dict() for r in res.trail]}


def cmd_converge(cfg: RunConfig, out: Path, jobs: int = 1) -> int:
    res = _sweep(cfg, _controller_point, jobs)
    rep = _sweep_dict(cfg, res, cfg.basis.value)
    rep["provenance"] = _provenance(cfg)
    _write_json(out / "converge.json", rep, "converge_report.schema.json")
    _write_csv(out / "converge.csv", _SWEEP_HEADER, _sweep_rows(res))
    if res.n_eps is None:
        raise ConvergenceUnmet("criterion not met at the end of the order range")
    return EXIT_OK


# ---------------------------------------------------------------- simulation

def _x0(cfg: RunConfig) -> StateFunction:
    preset = cfg.sim.get("x0", "sine")
    if preset == "sine":
        return default_x0()
    if preset == "zero":
        return StateFunction(lambda z: 0.0 * np.asarray(z), lambda z: 0.0 * np.asarray(z), 0.0)
    # first open-loop oscillation mode
    s = find_spectrum(cfg.plant, BoundaryDynamics(0.0), cfg.window)
    lam = min((z for z in s.eigenvalues if z.imag > 0), key=lambda z: z.imag)
    return eigenfunction(cfg.plant, lam)


def _rate_summary(trace, spectral_rate: float, t_start: float) -> dict:
    e = np.asarray(trace.energy)
    fitted = None
    if e.size >= 2 and np.any(e > 0):
        ts = t_start if trace.times[-1] - t_start > 2 * trace.meta["dt"] else 0.0
        fitted = decay_rate(trace, t_start=ts)
        if not math.isfinite(fitted):
            fitted = None
    gap = None
    if fitted is not None and spectral_rate != 0:
        gap = abs(fitted - spectral_rate) / abs(spectral_rate)
    drift = float(e.max() / e.min() - 1.0) if e.size and e.min() > 0 else None
    return {"fitted_rate": fitted, "spectral_rate": spectral_rate, "relative_gap": gap,
            "energy_drift": drift, "samples": int(e.size), "dt": trace.meta["dt"]}


def _trace_rows(trace) -> list[list[str]]:
    return [[_num(t), _num(e), _num(u.real), _num(u.imag)]
            for t, e, u in zip(trace.times, trace.energy, trace.control)]


def simulate_report(cfg: RunConfig):
    p, w, sim = cfg.plant, cfg.window, cfg.sim
    m, T = int(sim["cells"]), float(sim["T"])
    x0 = _x0(cfg)
    if sim.get("loop", "closed") == "open":
        trace = simulate(p, x0, T, m=m)
        spectral = float(find_spectrum(p, BoundaryDynamics(0.0), w).eigenvalues.real.max())
        n = 0
    else:
        n = int(sim.get("n", cfg.n))
        fb = design_feedback(p, cfg.controller_target, n, cfg.basis, w, cfg.kernel, cfg.quad)
        inter = find_spectrum(p, BoundaryDynamics(fb.rho), w)
        spectral = float(closed_loop_spectrum(fb, w, inter).eigenvalues.real.max())
        trace = simulate(p, x0, T, m=m, rho=fb.rho, gains=fb.gains, pairs=fb.pairs)
    summary = _rate_summary(trace, spectral, float(sim.get("t_start", 0.0)))
    summary.update({"loop": sim.get("loop", "closed"), "n": n, "basis": cfg.basis.value,
                    "cells": m, "T": T, "x0": sim.get("x0", "sine")})
    return trace, summary


def cmd_simulate(cfg: RunConfig, out: Path) -> int:
    trace, summary = simulate_report(cfg)
    _write_csv(out / "simulate.csv", ["t", "energy", "u_re", "u_im"], _trace_rows(trace))
    _write_json(out / "simulate.json", summary, "simulate_summary.schema.json")
    return EXIT_OK


# ---------------------------------------------------------------- observer

def cmd_observe(cfg: RunConfig, out: Path, jobs: int = 1) -> int:
    if cfg.observer_target is None:
        raise ConfigError("observe needs observer_target")
    res = _sweep(cfg, _observer_point, jobs)
    p, w, sim = cfg.plant, cfg.window, cfg.sim
    n = int(sim.get("n", cfg.n))
    obs = design_observer(p, cfg.observer_target, n, w, cfg.quad, zero_gain=cfg.zero_kernel)
    spectral = float(observer_closed_loop_spectrum(obs, w).eigenvalues.real.max())
    zero = StateFunction(lambda z: 0.0 * np.asarray(z), lambda z: 0.0 * np.asarray(z), 0.0)
    trace = simulate_observer(p, obs, _x0(cfg), zero, float(sim["T"]), m=int(sim["cells"]))
    summary = _rate_summary(trace, spectral, float(sim.get("t_start", 0.0)))
    summary.update({"n": n, "cells": int(sim["cells"]), "T": float(sim["T"])})
    rep = _sweep_dict(cfg, res, "ObserverIntermediate")
    rep["simulation"] = summary
    rep["provenance"] = _provenance(cfg)
    _write_json(out / "observe.json", rep, "observe_report.schema.json")
    _write_csv(out / "observe_converge.csv", _SWEEP_HEADER, _sweep_rows(res))
    _write_csv(out / "observe_trace.csv", ["t", "energy", "innovation_re", "innovation_im"],
               _trace_rows(trace))
    if res.n_eps is None:
        raise ConvergenceUnmet("observer criterion not met at the end of the order range")
    return EXIT_OK


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="latelump", description=__doc__.strip().splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration (default: shipped paper setup)")
    common.add_argument("--out", default=None,
                        help="output directory (default: $LATELUMP_OUT or the current directory)")
    sub = ap.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("spectrum", parents=[common], help="write a spectrum CSV")
    sp.add_argument("--which", required=True, help="dynamics label, e.g. Desired or ClosedLoop")
    sub.add_parser("design", parents=[common], help="gains and assumption report")
    for name, hlp in (("converge", "controller convergence sweep"),
                      ("observe", "observer convergence sweep and simulation")):
        s = sub.add_parser(name, parents=[common], help=hlp)
        s.add_argument("--n-min", type=int, default=None)
        s.add_argument("--n-max", type=int, default=None)
        s.add_argument("--jobs", type=int, default=1, help="worker processes for the sweep")
    sub.add_parser("simulate", parents=[common], help="time-domain closed loop")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if getattr(args, "n_min", None) is not None or getattr(args, "n_max", None) is not None:
            lo = args.n_min if args.n_min is not None else cfg.n_range[0]
            hi = args.n_max if args.n_max is not None else cfg.n_range[1]
            raw = copy.deepcopy(cfg.raw)
            raw["approximation"]["n_range"] = [lo, hi]
            cfg = parse_config(raw)
        out = Path(args.out or os.environ.get("LATELUMP_OUT", "."))
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "spectrum":
            code = cmd_spectrum(cfg, args.which, out)
        elif args.command == "design":
            code = cmd_design(cfg, out)
        elif args.command == "converge":
            code = cmd_converge(cfg, out, args.jobs)
        elif args.command == "simulate":
            code = cmd_simulate(cfg, out)
        else:
            code = cmd_observe(cfg, out, args.jobs)
        _write_meta(out, args.command, cfg)
        return code
    except ConfigError as exc:
        print(f"latelump: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AssumptionFailure as exc:
        print(f"latelump: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except ConvergenceUnmet as exc:
        print(f"latelump: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (ArithmeticError, SimplicityError, DegeneracyError, RepresentationError,
            np.linalg.LinAlgError) as exc:
        print(f"latelump: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"latelump: {exc}", file=sys.stderr)
        return EXIT_IO


def main(argv=None) -> None:
    sys.exit(run(argv))
