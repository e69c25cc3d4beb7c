"""Command-line front end.

Subcommands: simulate, certify, suite, reproduce-figure {1|2|3},
list-scenarios. Configuration is a strict JSON document (unknown keys are
errors); all randomness flows from the config seed (or --seed), so CSV and
report outputs are byte-identical across reruns.

Exit codes: 0 pass, 1 config error, 2 runtime termination (finite escape),
3 check failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys as _sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from . import _backend
from .certify import GridSpec, certify_decrease, check_3_3_3_4, check_property_Q, make_sampling_bound
from .dynamics import (
    Box,
    ConstantDisturbance,
    ConstantPerturbation,
    PiecewiseConstantRandomDisturbance,
    SinusoidalAbsPerturbation,
    SinusoidalDisturbance,
    TabulatedDisturbance,
    TabulatedPerturbation,
    ZeroPerturbation,
)
from .hybrid import TERMINATED_ESCAPE, TERMINATED_T_END, simulate_closed_loop
from .integrate import IntegratorConfig
from .scenarios import (
    SCENARIO_BUILDERS,
    SCENARIO_DESCRIPTIONS,
    build_jet_engine,
    build_scalar,
    jet_V,
    quadratic_x1,
)
from .setchain import (
    Band,
    BoxRegion,
    Complement,
    HalfSpace,
    Intersection,
    Region,
    Sublevel,
    UnionRegion,
    full_space,
    synthesize,
)
from .stability import run_stability_suite

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_CHECK_FAILED = 3


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


NAMED_FUNCTIONS = {
    "jet_V": jet_V,
    "x1_squared": quadratic_x1,
}


# ---------------------------------------------------------------------------
# Strict dict walking
# ---------------------------------------------------------------------------


def _require_keys(d: dict, path: str, known: set, required: set = frozenset()):
    if not isinstance(d, dict):
        raise ConfigError(path, f"expected an object, got {type(d).__name__}")
    unknown = set(d) - known
    if unknown:
        raise ConfigError(path, f"unknown keys {sorted(unknown)} (known: {sorted(known)})")
    missing = required - set(d)
    if missing:
        raise ConfigError(path, f"missing required keys {sorted(missing)}")


def _number(d: dict, key: str, path: str, default=None):
    if key not in d:
        if default is None:
            raise ConfigError(f"{path}.{key}", "missing required number")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}", f"expected a number, got {v!r}")
    return float(v)


def _integer(d: dict, key: str, path: str, default=None):
    if key not in d:
        if default is None:
            raise ConfigError(f"{path}.{key}", "missing required integer")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{path}.{key}", f"expected an integer, got {v!r}")
    return v


def _vector(d: dict, key: str, path: str, default=None):
    if key not in d:
        if default is None:
            raise ConfigError(f"{path}.{key}", "missing required vector")
        return default
    v = d[key]
    if not isinstance(v, list) or any(isinstance(c, bool) or not isinstance(c, (int, float)) for c in v):
        raise ConfigError(f"{path}.{key}", "expected a list of numbers")
    return [float(c) for c in v]


# ---------------------------------------------------------------------------
# Region descriptors
# ---------------------------------------------------------------------------


def region_from_dict(d: dict, path: str) -> Region:
    if not isinstance(d, dict) or "type" not in d:
        raise ConfigError(path, "region descriptor needs a 'type' key")
    t = d["type"]
    if t == "half_space":
        _require_keys(d, path, {"type", "normal", "offset", "strict"}, {"normal", "offset"})
        return HalfSpace(tuple(_vector(d, "normal", path)), _number(d, "offset", path),
                         strict=bool(d.get("strict", False)))
    if t == "box":
        _require_keys(d, path, {"type", "lo", "hi"}, {"lo", "hi"})
        return BoxRegion(Box(tuple(_vector(d, "lo", path)), tuple(_vector(d, "hi", path))))
    if t == "band":
        _require_keys(d, path, {"type", "axis", "half_width"}, {"axis", "half_width"})
        return Band(_integer(d, "axis", path), _number(d, "half_width", path))
    if t == "sublevel":
        _require_keys(d, path, {"type", "fn", "level", "strict"}, {"fn", "level"})
        fn = d["fn"]
        if fn not in NAMED_FUNCTIONS:
            raise ConfigError(f"{path}.fn", f"unknown function {fn!r} (known: {sorted(NAMED_FUNCTIONS)})")
        return Sublevel(NAMED_FUNCTIONS[fn], _number(d, "level", path),
                        strict=bool(d.get("strict", True)), fn_id=fn)
    if t in ("intersection", "union"):
        _require_keys(d, path, {"type", "parts"}, {"parts"})
        parts = tuple(region_from_dict(p, f"{path}.parts[{i}]") for i, p in enumerate(d["parts"]))
        return Intersection(parts) if t == "intersection" else UnionRegion(parts)
    if t == "complement":
        _require_keys(d, path, {"type", "part"}, {"part"})
        return Complement(region_from_dict(d["part"], f"{path}.part"))
    if t == "full":
        _require_keys(d, path, {"type", "dim"}, {"dim"})
        return full_space(_integer(d, "dim", path))
    raise ConfigError(f"{path}.type", f"unknown region type {t!r}")


def region_to_dict(r: Region) -> dict:
    if isinstance(r, HalfSpace):
        return {"type": "half_space", "normal": list(r.normal), "offset": r.offset,
                "strict": r.strict}
    if isinstance(r, BoxRegion):
        return {"type": "box", "lo": list(r.box.lo), "hi": list(r.box.hi)}
    if isinstance(r, Band):
        return {"type": "band", "axis": r.axis, "half_width": r.half_width}
    if isinstance(r, Sublevel):
        return {"type": "sublevel", "fn": r.fn_id, "level": r.level, "strict": r.strict}
    if isinstance(r, Intersection):
        return {"type": "intersection", "parts": [region_to_dict(p) for p in r.parts]}
    if isinstance(r, UnionRegion):
        return {"type": "union", "parts": [region_to_dict(p) for p in r.parts]}
    if isinstance(r, Complement):
        return {"type": "complement", "part": region_to_dict(r.part)}
    raise ValueError(f"region {r!r} has no serialized form")


# ---------------------------------------------------------------------------
# Config model
# ---------------------------------------------------------------------------

_SCENARIO_KEYS = {"name", "epsilon", "period", "drift", "override_controls"}
_RUN_KEYS = {"x0", "t_end", "disturbance", "schedule_perturbation", "seed"}
_INTEGRATOR_KEYS = {"rel_tol", "abs_tol", "initial_step", "max_step",
                    "blowup_norm_threshold", "max_steps", "dense_factor", "dense_cap"}
_SUITE_KEYS = {"radii", "eps_levels", "delta_levels", "trials", "t_end",
               "envelope_tol", "use_certificates"}


@dataclass
class Config:
    raw: dict

    @classmethod
    def load(cls, path: str) -> "Config":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(path, f"cannot read config: {exc}")
        return cls.parse_text(text)

    @classmethod
    def parse_text(cls, text: str) -> "Config":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"line {exc.lineno}, column {exc.colno}", exc.msg)
        return cls.parse(raw)

    @classmethod
    def parse(cls, raw: dict) -> "Config":
        _require_keys(raw, "config", {"scenario", "run", "integrator", "certify", "suite"},
                      {"scenario"})
        sc = raw["scenario"]
        _require_keys(sc, "scenario", _SCENARIO_KEYS, {"name"})
        if sc["name"] not in SCENARIO_BUILDERS:
            raise ConfigError("scenario.name",
                              f"unknown scenario {sc['name']!r} (known: {sorted(SCENARIO_BUILDERS)})")
        if "drift" in sc:
            _require_keys(sc["drift"], "scenario.drift", {"kind", "coeffs"}, {"kind"})
            if sc["drift"]["kind"] not in ("square", "poly"):
                raise ConfigError("scenario.drift.kind", "expected 'square' or 'poly'")
            if sc["drift"]["kind"] == "poly":
                _vector(sc["drift"], "coeffs", "scenario.drift")
        if "override_controls" in sc:
            oc = sc["override_controls"]
            if not isinstance(oc, dict):
                raise ConfigError("scenario.override_controls", "expected an object")
            for key, val in oc.items():
                if not key.isdigit() or int(key) < 2:
                    raise ConfigError(f"scenario.override_controls.{key}",
                                      "keys must be cell indices >= 2")
                _vector({"v": val}, "v", f"scenario.override_controls.{key}")
        if "run" in raw:
            run = raw["run"]
            _require_keys(run, "run", _RUN_KEYS)
            if "x0" in run:
                _vector(run, "x0", "run")
            if "t_end" in run:
                _number(run, "t_end", "run")
            if "seed" in run:
                _integer(run, "seed", "run")
            if "disturbance" in run:
                _parse_disturbance_schema(run["disturbance"], "run.disturbance")
            if "schedule_perturbation" in run:
                _parse_perturbation_schema(run["schedule_perturbation"],
                                           "run.schedule_perturbation")
        if "integrator" in raw:
            _require_keys(raw["integrator"], "integrator", _INTEGRATOR_KEYS)
        if "certify" in raw:
            _require_keys(raw["certify"], "certify", {"checks"}, {"checks"})
            checks = raw["certify"]["checks"]
            if not isinstance(checks, list) or not checks:
                raise ConfigError("certify.checks", "expected a nonempty list")
            for i, chk in enumerate(checks):
                _parse_check_schema(chk, f"certify.checks[{i}]")
        if "suite" in raw:
            _require_keys(raw["suite"], "suite", _SUITE_KEYS)
        return cls(raw=raw)

    def to_dict(self) -> dict:
        return self.raw

    def serialize(self) -> str:
        return json.dumps(self.raw, indent=2) + "\n"

    # -- accessors ---------------------------------------------------------

    @property
    def scenario_name(self) -> str:
        return self.raw["scenario"]["name"]

    def seed(self, override=None) -> int:
        if override is not None:
            return int(override)
        return int(self.raw.get("run", {}).get("seed", 0))

    def integrator(self) -> IntegratorConfig:
        d = self.raw.get("integrator", {})
        kw = {}
        for key in _INTEGRATOR_KEYS:
            if key in d:
                kw[key] = d[key]
        try:
            return IntegratorConfig(**kw)
        except ValueError as exc:
            raise ConfigError("integrator", str(exc))

    def build_scenario(self):
        sc = self.raw["scenario"]
        name = sc["name"]
        if name == "jet_engine_perturbed":
            scenario = build_jet_engine(epsilon=sc.get("epsilon", 0.001),
                                        sim_period=sc.get("period", 0.001))
        else:
            drift_cfg = sc.get("drift", {"kind": "square"})
            if drift_cfg["kind"] == "square":
                scenario = build_scalar()
            else:
                coeffs = [float(c) for c in drift_cfg["coeffs"]]

                def poly(x, _c=tuple(coeffs)):
                    acc = 0.0
                    p = x
                    for ck in _c:
                        acc += ck * p
                        p *= x
                    return acc

                scenario = build_scalar(poly)
        feedback = scenario.feedback
        overrides = sc.get("override_controls")
        if name == "scalar_positive_drift" and "period" in sc:
            raise ConfigError("scenario.period",
                              "the scalar scenario derives its period from the drift constant")
        if overrides:
            if name != "jet_engine_perturbed":
                raise ConfigError("scenario.override_controls",
                                  "control overrides exist for the finite jet chain only")
            controls = list(scenario.controls)
            for key, val in overrides.items():
                idx = int(key) - 2
                if not 0 <= idx < len(controls):
                    raise ConfigError(f"scenario.override_controls.{key}",
                                      f"cell index out of range 2..{len(controls) + 1}")
                controls[idx] = tuple(float(c) for c in val)
            feedback = synthesize(scenario.k_inner, scenario.theta,
                                  h_tilde=feedback.h_tilde,
                                  regions=scenario.regions, controls=controls,
                                  r=scenario.r, control_set=scenario.system.control_set)
        return scenario, feedback

    def disturbance(self, scenario, seed: int):
        d = self.raw.get("run", {}).get("disturbance")
        box = scenario.system.disturbance_box
        if d is None:
            if box.dim == 0:
                return ConstantDisturbance(box=box, value_vec=())
            return PiecewiseConstantRandomDisturbance(box=box, mesh=0.1, seed=seed)
        return _build_disturbance(d, box, seed)

    def schedule_perturbation(self):
        d = self.raw.get("run", {}).get("schedule_perturbation")
        if d is None:
            return ZeroPerturbation()
        return _build_perturbation(d)

    def x0(self, scenario) -> tuple:
        run = self.raw.get("run", {})
        if "x0" in run:
            return tuple(float(c) for c in run["x0"])
        if hasattr(scenario, "x0_default"):
            return tuple(scenario.x0_default)
        return (1.0,) * scenario.system.n

    def t_end(self, scenario) -> float:
        run = self.raw.get("run", {})
        if "t_end" in run:
            return float(run["t_end"])
        return float(getattr(scenario, "t_end_default", 20.0))


_DISTURBANCE_KINDS = {
    "constant": {"kind", "value"},
    "sinusoidal": {"kind", "axis", "amplitude", "frequency", "offset", "base"},
    "piecewise_constant_random": {"kind", "mesh", "low", "high", "seed"},
    "tabulated": {"kind", "times", "values"},
}


def _parse_disturbance_schema(d: dict, path: str):
    if not isinstance(d, dict) or "kind" not in d:
        raise ConfigError(path, "disturbance needs a 'kind' key")
    kind = d["kind"]
    if kind not in _DISTURBANCE_KINDS:
        raise ConfigError(f"{path}.kind",
                          f"unknown kind {kind!r} (known: {sorted(_DISTURBANCE_KINDS)})")
    _require_keys(d, path, _DISTURBANCE_KINDS[kind])


def _build_disturbance(d: dict, box: Box, seed: int):
    kind = d["kind"]
    if kind == "constant":
        return ConstantDisturbance(box=box, value_vec=tuple(float(c) for c in d.get("value", ())))
    if kind == "sinusoidal":
        return SinusoidalDisturbance(
            box=box, axis=int(d["axis"]), amplitude=float(d["amplitude"]),
            frequency=float(d["frequency"]), offset=float(d.get("offset", 0.0)),
            base=tuple(float(c) for c in d.get("base", ())))
    if kind == "piecewise_constant_random":
        return PiecewiseConstantRandomDisturbance(
            box=box, mesh=float(d.get("mesh", 0.1)), seed=int(d.get("seed", seed)),
            low=tuple(float(c) for c in d.get("low", ())),
            high=tuple(float(c) for c in d.get("high", ())))
    return TabulatedDisturbance(
        box=box, times=tuple(float(t) for t in d["times"]),
        values=tuple(tuple(float(c) for c in v) for v in d["values"]))


_PERTURBATION_KINDS = {
    "zero": {"kind"},
    "constant": {"kind", "value"},
    "sinusoidal_abs": {"kind"},
    "tabulated": {"kind", "times", "levels"},
}


def _parse_perturbation_schema(d: dict, path: str):
    if not isinstance(d, dict) or "kind" not in d:
        raise ConfigError(path, "schedule perturbation needs a 'kind' key")
    kind = d["kind"]
    if kind not in _PERTURBATION_KINDS:
        raise ConfigError(f"{path}.kind",
                          f"unknown kind {kind!r} (known: {sorted(_PERTURBATION_KINDS)})")
    _require_keys(d, path, _PERTURBATION_KINDS[kind])


def _build_perturbation(d: dict):
    kind = d["kind"]
    if kind == "zero":
        return ZeroPerturbation()
    if kind == "constant":
        return ConstantPerturbation(float(d["value"]))
    if kind == "sinusoidal_abs":
        return SinusoidalAbsPerturbation()
    return TabulatedPerturbation(times=tuple(float(t) for t in d["times"]),
                                 levels=tuple(float(v) for v in d["levels"]))


_CHECK_KEYS = {
    "decrease": {"check", "region", "lyapunov", "control", "level", "delta",
                 "truncation_lo", "truncation_hi", "state_nodes", "disturbance_nodes",
                 "margin_tol"},
    "property_q": {"check", "setup", "trials", "d_mesh", "time_tol"},
    "inequalities": {"check", "nodes_per_axis", "disturbance_nodes", "L_scale",
                     "margin_tol"},
    "sampling_bound": {"check", "L", "gamma", "M"},
}


def _parse_check_schema(d: dict, path: str):
    if not isinstance(d, dict) or "check" not in d:
        raise ConfigError(path, "each entry needs a 'check' key")
    kind = d["check"]
    if kind not in _CHECK_KEYS:
        raise ConfigError(f"{path}.check",
                          f"unknown check {kind!r} (known: {sorted(_CHECK_KEYS)})")
    _require_keys(d, path, _CHECK_KEYS[kind])
    if kind == "decrease":
        for req in ("region", "lyapunov", "control", "level", "delta",
                    "truncation_lo", "truncation_hi", "state_nodes"):
            if req not in d:
                raise ConfigError(f"{path}.{req}", "missing required key")
        region_from_dict(d["region"], f"{path}.region")
        if d["lyapunov"] not in NAMED_FUNCTIONS:
            raise ConfigError(f"{path}.lyapunov", f"unknown function {d['lyapunov']!r}")
    if kind == "property_q":
        if d.get("setup") not in ("omega4_to_omega2", "omega3_to_omega2", "omega2_to_A"):
            raise ConfigError(f"{path}.setup",
                              "expected one of omega4_to_omega2, omega3_to_omega2, omega2_to_A")


# ---------------------------------------------------------------------------
# Output writers
# ---------------------------------------------------------------------------


def write_trajectory_csv(traj, sys_m: int, out_path: str):
    n = traj.states.shape[1]
    header = ["t"] + [f"x_{i + 1}" for i in range(n)] + \
             [f"u_{j + 1}" for j in range(sys_m)] + ["is_sampling_instant", "cell_index"]
    interval_of = traj.interval_of_row()
    starts = set(int(s) for s in traj.seg_starts)
    lines = [",".join(header)]
    for row in range(traj.times.size):
        k = int(interval_of[row])
        vals = [repr(float(traj.times[row]))]
        vals += [repr(float(v)) for v in traj.states[row]]
        vals += [repr(float(v)) for v in traj.controls[k]]
        vals.append("1" if row in starts else "0")
        vals.append(str(int(traj.cell_indices[k])))
        lines.append(",".join(vals))
    if traj.termination != TERMINATED_T_END:
        t_term = traj.escape_time if traj.escape_time is not None else float(traj.times[-1])
        lines.append(f"# terminated: {traj.termination} t={t_term!r}")
    text = "\n".join(lines) + "\n"
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _write_report(report: dict, out_path):
    text = json.dumps(report, indent=2) + "\n"
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        _sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_simulate(cfg: Config, out_path: str, seed_override=None) -> int:
    scenario, feedback = cfg.build_scenario()
    seed = cfg.seed(seed_override)
    d_sig = cfg.disturbance(scenario, seed)
    d_tilde = cfg.schedule_perturbation()
    traj = simulate_closed_loop(scenario.system, feedback, cfg.x0(scenario), d_sig,
                                d_tilde, cfg.t_end(scenario), cfg.integrator())
    write_trajectory_csv(traj, scenario.system.m, out_path)
    return EXIT_OK if traj.termination == TERMINATED_T_END else EXIT_RUNTIME


def _run_check(chk: dict, scenario, feedback, cfg: Config, seed: int) -> dict:
    name = chk["check"]
    sys_ = scenario.system
    if name == "decrease":
        region = region_from_dict(chk["region"], "certify.region")
        if chk["lyapunov"] == "jet_V":
            lyap = scenario.lyap
        else:
            from .scenarios import X1_SQUARED

            lyap = X1_SQUARED
        grid = GridSpec(
            state_nodes=tuple(int(k) for k in chk["state_nodes"]),
            truncation=Box(tuple(chk["truncation_lo"]), tuple(chk["truncation_hi"])),
            disturbance_nodes=tuple(int(k) for k in chk.get("disturbance_nodes", ())),
        )
        res = certify_decrease(sys_, region, lyap, tuple(chk["control"]),
                               float(chk["level"]), float(chk["delta"]), grid,
                               margin_tol=float(chk.get("margin_tol", 1e-9)))
        return {"check": name, "passed": res.passed, "result": res.to_dict()}
    if name == "property_q":
        setup = chk["setup"]
        cert_level = {"omega4_to_omega2": 4, "omega3_to_omega2": 3, "omega2_to_A": 2}[setup]
        cert = scenario.certificates[cert_level]
        res = check_property_Q(
            sys_, cert.source, cert.target, cert.control, cert.dwell, cert,
            trials=int(chk.get("trials", 200)), seed=seed,
            cfg=cfg.integrator(), d_mesh=float(chk.get("d_mesh", 0.1)),
            time_tol=float(chk.get("time_tol", 1e-6)))
        return {"check": name, "setup": setup, "passed": res.ok,
                "certificate_notes": cert.notes, "result": res.to_dict()}
    if name == "inequalities":
        nodes = int(chk.get("nodes_per_axis", 41))
        box = scenario.theta.bounding
        grid = GridSpec(state_nodes=(nodes,) * sys_.n, truncation=box,
                        disturbance_nodes=tuple(int(k) for k in chk.get("disturbance_nodes", ())))
        l_scale = float(chk.get("L_scale", 1.0))
        res = check_3_3_3_4(sys_, scenario.k_inner, scenario.lyap, scenario.theta,
                            scenario.L * l_scale, scenario.gamma, scenario.M,
                            rho=lambda s: s, grid=grid,
                            margin_tol=float(chk.get("margin_tol", 1e-9)))
        return {"check": name, "L_scale": l_scale, "L_used": scenario.L * l_scale,
                "passed": res.passed, "result": res.to_dict()}
    # sampling_bound
    L = float(chk.get("L", scenario.L))
    gamma = float(chk.get("gamma", scenario.gamma))
    M = float(chk.get("M", scenario.M))
    sb = make_sampling_bound(L, gamma, M)
    return {"check": name, "passed": True, "result": {
        **sb.to_dict(),
        "simulated_period": scenario.sim_period,
        "conservatism_ratio": scenario.sim_period / sb.bound,
    }}


def cmd_certify(cfg: Config, out_path, seed_override=None) -> int:
    if "certify" not in cfg.raw:
        raise ConfigError("certify", "config has no certify section")
    scenario, feedback = cfg.build_scenario()
    seed = cfg.seed(seed_override)
    results = []
    for chk in cfg.raw["certify"]["checks"]:
        if chk["check"] in ("property_q", "inequalities", "sampling_bound") and \
                cfg.scenario_name != "jet_engine_perturbed":
            raise ConfigError("certify.checks",
                              f"check {chk['check']!r} is defined for the jet scenario")
        results.append(_run_check(chk, scenario, feedback, cfg, seed))
    report = {
        "command": "certify",
        "scenario": cfg.scenario_name,
        "seed": seed,
        "backend": _backend.backend_name(),
        "checks": results,
        "all_passed": all(r["passed"] for r in results),
    }
    _write_report(report, out_path)
    return EXIT_OK if report["all_passed"] else EXIT_CHECK_FAILED


def cmd_suite(cfg: Config, out_path, workers: int, seed_override=None) -> int:
    scenario, feedback = cfg.build_scenario()
    seed = cfg.seed(seed_override)
    d = cfg.raw.get("suite", {})
    radii = [float(v) for v in d.get("radii", [1.0, 5.0, 15.0])]
    eps_levels = [float(v) for v in d.get("eps_levels", [0.1, 0.01])]
    delta_levels = [float(v) for v in d.get("delta_levels", [0.1, 0.01])]
    trials = int(d.get("trials", 25))
    t_end = float(d.get("t_end", cfg.t_end(scenario)))
    use_certs = bool(d.get("use_certificates", cfg.scenario_name == "jet_engine_perturbed"))
    certs = scenario.certificates if (use_certs and hasattr(scenario, "certificates")) else None
    if "override_controls" in cfg.raw["scenario"]:
        certs = None  # fault-injected feedback voids the per-level envelopes
    runner = None
    pool = None
    if workers > 1:
        pool = ThreadPoolExecutor(max_workers=workers)
        runner = pool.map
    try:
        report_obj = run_stability_suite(
            scenario.system, feedback, radii, eps_levels, delta_levels, trials,
            t_end, seed, cfg=cfg.integrator(),
            envelope_tol=float(d.get("envelope_tol", 1e-9)),
            certs=certs, trial_runner=runner)
    finally:
        if pool is not None:
            pool.shutdown()
    report = {
        "command": "suite",
        "scenario": cfg.scenario_name,
        "seed": seed,
        "backend": _backend.backend_name(),
        "workers": workers,
        "report": report_obj.to_dict(),
        "all_passed": report_obj.passed,
    }
    _write_report(report, out_path)
    return EXIT_OK if report_obj.passed else EXIT_CHECK_FAILED


def cmd_reproduce_figure(figure: int, cfg, out_path: str, seed_override=None) -> int:
    epsilon = 0.001
    period = 0.001
    integ = IntegratorConfig()
    if cfg is not None:
        sc = cfg.raw["scenario"]
        if sc["name"] != "jet_engine_perturbed":
            raise ConfigError("scenario.name", "figure runs use the jet scenario")
        epsilon = sc.get("epsilon", 0.001)
        period = sc.get("period", 0.001)
        integ = cfg.integrator()
    scenario = build_jet_engine(epsilon=epsilon, sim_period=period)
    d_sig, d_tilde = scenario.figure_inputs(figure)
    traj = simulate_closed_loop(scenario.system, scenario.feedback, scenario.x0_default,
                                d_sig, d_tilde, scenario.t_end_default, integ)
    write_trajectory_csv(traj, scenario.system.m, out_path)
    return EXIT_OK if traj.termination == TERMINATED_T_END else EXIT_RUNTIME


def cmd_list_scenarios() -> int:
    for name in sorted(SCENARIO_BUILDERS):
        print(f"{name}: {SCENARIO_DESCRIPTIONS[name]}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chainstab",
                                description="sampled-data set-chain stabilization toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="closed-loop run to trajectory CSV")
    sim.add_argument("--config", required=True)
    sim.add_argument("--out", required=True)
    sim.add_argument("--seed", type=int, default=None)

    cert = sub.add_parser("certify", help="run certification checks to a report")
    cert.add_argument("--config", required=True)
    cert.add_argument("--out", default=None)
    cert.add_argument("--seed", type=int, default=None)

    suite = sub.add_parser("suite", help="Monte-Carlo stability suite")
    suite.add_argument("--config", required=True)
    suite.add_argument("--out", default=None)
    suite.add_argument("--seed", type=int, default=None)
    suite.add_argument("--workers", type=int,
                       default=int(os.environ.get("CHAINSTAB_WORKERS", "1")))

    fig = sub.add_parser("reproduce-figure", help="standard disturbance-scenario runs")
    fig.add_argument("figure", type=int, choices=(1, 2, 3))
    fig.add_argument("--config", default=None)
    fig.add_argument("--out", required=True)
    fig.add_argument("--seed", type=int, default=None)

    sub.add_parser("list-scenarios", help="list built-in scenario labels")
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "list-scenarios":
            return cmd_list_scenarios()
        if args.command == "reproduce-figure":
            cfg = Config.load(args.config) if args.config else None
            return cmd_reproduce_figure(args.figure, cfg, args.out, args.seed)
        cfg = Config.load(args.config)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.out, args.seed)
        if args.command == "certify":
            return cmd_certify(cfg, args.out, args.seed)
        if args.command == "suite":
            return cmd_suite(cfg, args.out, args.workers, args.seed)
        raise AssertionError(f"unhandled command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    _sys.exit(main())
