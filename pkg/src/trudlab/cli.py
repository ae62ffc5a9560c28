"""Config-driven command line front end.

Usage: ``trudlab <command> --config <path> [--out <dir>] [--seed <int>]``.
The config is an INI file; every key has a default (see ``DEFAULTS``) and
the effective config is echoed to ``<out>/effective_config.ini``.

Exit status: 0 when every requested check passes, 1 when a check fails,
2 for config errors, 3 for solver errors.
"""
from __future__ import annotations

import argparse
import configparser
import os
import sys
from pathlib import Path

COMMANDS = ("eigen", "evolve", "compare", "asymptotics", "audit", "battery")
THREADS_ENV = "TRUDLAB_THREADS"

DEFAULTS = {
    "domain": {
        "kind": "interval",
        "a": "0.0",
        "b": "1.0",
        "x0": "0.0",
        "x1": "1.0",
        "y0": "0.0",
        "y1": "1.0",
        "radius": "1.0",
        "n": "128",
    },
    "problem": {
        "p": "2.0",
        "initial": "eigenfield",
        "scale": "1.0",
        "csv": "",
        "T": "0.5",
        "snapshot_dt": "0.05",
        "snapshot_stride": "100",
    },
    "solver": {
        "scheme": "explicit",
        "cfl_safety": "0.9",
        "dt_max": "0.001",
        "eps": "default",
        "eig_tol": "1e-8",
        "max_iters": "400",
    },
    "checks": {
        "betas": "1.01 1.1 2.0",
        "lower_factor": "0.5",
        "constants": "0.25 0.5 0.75",
        "bumps": "6",
        "t_tail": "0.25",
        "visc_t_min": "0.0",
        "check_snapshot_dt": "auto",
    },
    "tolerances": {},
    "experiment": {"seed": "0"},
}

PROFILES = ("eigenfield", "scaled-eigenfield", "sine-bump", "random-sines", "csv")


class ConfigError(ValueError):
    def __init__(self, section, key, message):
        super().__init__(f"[{section}] {key}: {message}")


def _apply_threads():
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return None
    try:
        count = int(raw)
        if count < 1:
            raise ValueError
    except ValueError:
        raise ConfigError("environment", THREADS_ENV, f"must be a positive integer, got {raw!r}")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(count))
    return count


def load_config(path) -> configparser.ConfigParser:
    from .tolerances import DEFAULTS as TOL

    cfg = configparser.ConfigParser(interpolation=None)
    cfg.optionxform = str
    for section, values in DEFAULTS.items():
        cfg[section] = dict(values)
    cfg["tolerances"] = {k: repr(v) for k, v in TOL.items()}
    if not Path(path).is_file():
        raise ConfigError("config", "path", f"file not found: {path}")
    read = configparser.ConfigParser(interpolation=None)
    read.optionxform = str
    try:
        read.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError("config", "syntax", str(exc).splitlines()[0])
    for section in read.sections():
        if section not in cfg:
            raise ConfigError(section, "*", "unknown section")
        for key, val in read[section].items():
            if key not in cfg[section]:
                raise ConfigError(section, key, "unknown key")
            cfg[section][key] = val
    return cfg


def _get(cfg, section, key, conv, check=None, message=""):
    raw = cfg[section][key]
    try:
        val = conv(raw)
    except (TypeError, ValueError):
        raise ConfigError(section, key, f"cannot parse {raw!r}")
    if check is not None and not check(val):
        raise ConfigError(section, key, message or f"invalid value {raw!r}")
    return val


def _floats(raw):
    return [float(x) for x in raw.replace(",", " ").split()]


class Settings:
    """Validated view of an effective config."""

    def __init__(self, cfg, command):
        from .fields import check_p

        self.cfg = cfg
        self.command = command
        self.kind = _get(cfg, "domain", "kind", str, lambda k: k in ("interval", "rectangle", "disk"),
                         "must be one of interval, rectangle, disk")
        self.n = _get(cfg, "domain", "n", int, lambda n: n >= 8, "n must be at least 8")
        try:
            self.p = check_p(cfg["problem"]["p"])
        except ValueError as exc:
            raise ConfigError("problem", "p", f"{exc} (requires 1 < p)")
        self.initial = _get(cfg, "problem", "initial", str, lambda s: s in PROFILES, f"must be one of {', '.join(PROFILES)}")
        self.scale = _get(cfg, "problem", "scale", float, lambda s: 0.0 < s <= 1.0e6, "scale must be positive")
        self.T = _get(cfg, "problem", "T", float, lambda t: t > 0, "T must be positive")
        self.snapshot_dt = _get(cfg, "problem", "snapshot_dt", float, lambda t: 0 < t <= self.T,
                                "snapshot_dt must lie in (0, T]")
        self.snapshot_stride = _get(cfg, "problem", "snapshot_stride", int, lambda s: s >= 1)
        self.scheme = _get(cfg, "solver", "scheme", str, lambda s: s in ("explicit", "semi-implicit"),
                           "must be explicit or semi-implicit")
        self.cfl_safety = _get(cfg, "solver", "cfl_safety", float, lambda s: 0 < s <= 1, "must lie in (0, 1]")
        self.dt_max = _get(cfg, "solver", "dt_max", float, lambda s: s > 0, "must be positive")
        raw_eps = cfg["solver"]["eps"].strip()
        self.eps = None if raw_eps == "default" else _get(cfg, "solver", "eps", float, lambda e: e >= 0, "must be >= 0")
        self.eig_tol = _get(cfg, "solver", "eig_tol", float, lambda s: s > 0, "must be positive")
        self.max_iters = _get(cfg, "solver", "max_iters", int, lambda s: s > 0, "must be positive")
        self.betas = _get(cfg, "checks", "betas", _floats, lambda bs: bs and all(b > 1 for b in bs), "every beta must exceed 1")
        self.lower_factor = _get(cfg, "checks", "lower_factor", float, lambda f: 0 <= f <= 1, "must lie in [0, 1]")
        self.constants = _get(cfg, "checks", "constants", _floats, lambda cs: cs and all(c > 0 for c in cs),
                              "constants must be positive")
        self.bumps = _get(cfg, "checks", "bumps", int, lambda b: b >= 1, "must be positive")
        self.t_tail = _get(cfg, "checks", "t_tail", float, lambda t: 0 <= t < self.T, "must lie in [0, T)")
        self.visc_t_min = _get(cfg, "checks", "visc_t_min", float, lambda t: 0 <= t < self.T, "must lie in [0, T)")
        raw_check = cfg["checks"]["check_snapshot_dt"].strip()
        self.check_snapshot_dt = None if raw_check == "auto" else _get(
            cfg, "checks", "check_snapshot_dt", float, lambda t: 0 < t <= self.T, "must be auto or lie in (0, T]"
        )
        self.seed = _get(cfg, "experiment", "seed", int)
        self.tol = {k: _get(cfg, "tolerances", k, float, lambda v: v > 0, "must be positive") for k in cfg["tolerances"]}

    def domain(self):
        from .grid import build_disk, build_interval, build_rectangle

        c = self.cfg["domain"]
        try:
            if self.kind == "interval":
                return build_interval(float(c["a"]), float(c["b"]), self.n)
            if self.kind == "rectangle":
                return build_rectangle(float(c["x0"]), float(c["x1"]), float(c["y0"]), float(c["y1"]), self.n)
            return build_disk(float(c["radius"]), self.n)
        except ValueError as exc:
            raise ConfigError("domain", self.kind, str(exc))

    def check_dt(self, d):
        """Snapshot spacing for the viscosity and weak-residual checks.

        Both difference or integrate in time between snapshots with O(dt^2)
        error, so they need finer snapshots than plotting does.
        """
        if self.check_snapshot_dt is not None:
            return self.check_snapshot_dt
        return min(self.snapshot_dt, 0.5 * d.h)

    def check_trace(self, d, g, trace):
        """``trace`` itself, or a rerun recorded at the finer check spacing."""
        from .evolution import evolve

        dt = self.check_dt(d)
        if dt >= self.snapshot_dt:
            return trace
        return evolve(d, self.p, g, self.T, self.step_options(snapshot_dt=dt))

    def step_options(self, **over):
        from .evolution import StepOptions

        kw = dict(
            scheme=self.scheme,
            cfl_safety=self.cfl_safety,
            dt_max=self.dt_max,
            eps=self.eps,
            snapshot_stride=self.snapshot_stride,
            snapshot_dt=self.snapshot_dt,
        )
        kw.update(over)
        return StepOptions(**kw)

    def descent_options(self):
        from .eigensolver import DescentOptions

        return DescentOptions(tol=self.eig_tol, max_iters=self.max_iters)


def _initial_data(s: Settings, d, pair):
    import numpy as np

    from .io import read_field_csv

    inn = d.interior_mask
    if s.initial == "eigenfield":
        return pair.u.values.copy()
    if s.initial == "scaled-eigenfield":
        return s.scale * pair.u.values
    if s.initial == "sine-bump":
        vals = np.ones(d.shape)
        inside = d.inside_mask
        for c in d.coords():
            lo, hi = c[inside].min(), c[inside].max()
            vals = vals * np.sin(np.pi * np.clip((c - lo) / (hi - lo), 0.0, 1.0))
        return s.scale * np.where(inn, vals, 0.0)
    if s.initial == "random-sines":
        # seeded mixture between 0.5 u_p and u_p
        rng = np.random.default_rng(s.seed)
        mix = np.zeros(d.shape)
        for k in range(1, 5):
            for axis, c in enumerate(d.coords()):
                mix = mix + rng.uniform(-1.0, 1.0) * np.cos(k * np.pi * c + rng.uniform(0, 2 * np.pi)) / (k * d.dim)
        frac = 0.75 + 0.25 * np.tanh(mix)
        return s.scale * pair.u.values * frac
    path = s.cfg["problem"]["csv"]
    if not path:
        raise ConfigError("problem", "csv", "initial = csv needs a file path")
    try:
        return read_field_csv(d, path).values
    except (OSError, ValueError) as exc:
        raise ConfigError("problem", "csv", str(exc))


class Run:
    def __init__(self, settings: Settings, out: Path):
        self.s = settings
        self.out = out
        self.failed = []

    def say(self, line):
        print(line)

    def record(self, report, name):
        from .io import report_line

        line = report_line(report)
        self.say(line)
        if not report.passed:
            self.failed.append(name)
        return line


def _cmd_eigen(run: Run, d):
    from .eigensolver import solve_extremal
    from .io import eigen_summary, write_field_csv

    pair = solve_extremal(d, run.s.p, run.s.descent_options())
    line = eigen_summary(pair)
    (run.out / "eigen_summary.txt").write_text(line + "\n", encoding="ascii")
    write_field_csv(pair.u, run.out / "eigenfield.csv")
    run.say(line)
    return pair


def _cmd_evolve(run: Run, d, pair):
    from .evolution import evolve
    from .io import fmt, write_trace

    g = _initial_data(run.s, d, pair)
    trace = evolve(d, run.s.p, g, run.s.T, run.s.step_options())
    write_trace(trace, run.out / "trace")
    run.say(
        f"evolve p={fmt(run.s.p)} h={fmt(d.h)} T={fmt(run.s.T)} snapshots={len(trace)} "
        f"steps={trace.meta['steps']} scheme={trace.meta['scheme']}"
    )
    return trace, g


def _cmd_compare(run: Run, d, pair):
    from .evolution import evolve_many
    from .io import fmt, write_certificate_csv, write_report
    from .verification import check_comparison, comparison_certificate

    s = run.s
    g = _initial_data(s, d, pair)
    lo, hi = evolve_many(d, s.p, [s.lower_factor * g, g], s.T, s.step_options())
    lines = []
    for beta in s.betas:
        cert = comparison_certificate(lo, hi, beta, s.p)
        write_certificate_csv(cert, run.out / f"certificate_beta_{beta!r}.csv")
        line = (
            f"check=certificate passed={fmt(cert.passed)} beta={fmt(beta)} "
            f"max_uptick={fmt(cert.max_uptick)} tolerance={fmt(cert.tolerance)}"
        )
        run.say(line)
        lines.append(line)
        if not cert.passed:
            run.failed.append(f"certificate beta={beta}")
    report = check_comparison(lo, hi, s.p, C=s.tol.get("cmp_C"))
    lines.append(run.record(report, "comparison"))
    write_report([], run.out / "report.txt", lines)


def _cmd_asymptotics(run: Run, d, pair):
    import numpy as np

    from .evolution import decay_rate_fit, evolve
    from .io import _write_rows, fmt, write_field_csv, write_report
    from .verification import asymptotic_profile

    s = run.s
    g = _initial_data(s, d, pair)
    trace = evolve(d, s.p, g, s.T, s.step_options())
    profile, rep = asymptotic_profile(trace, pair.lam, s.p, s.t_tail, s.tol.get("asym"))
    write_field_csv(profile, run.out / "profile.csv")
    _write_rows(run.out / "increments.csv", ["t", "increment"], zip(rep.times, rep.increments))
    rate = decay_rate_fit(trace, (s.t_tail, s.T))
    target = pair.lam / (s.p - 1.0)
    ok = rep.converged and rep.profile_sup > 0
    line = (
        f"check=asymptotics passed={fmt(ok)} last_increment={fmt(rep.increments[-1])} "
        f"monotone={fmt(rep.monotone)} profile_sup={fmt(rep.profile_sup)} "
        f"decay_rate={fmt(rate)} target_rate={fmt(target)}"
    )
    run.say(line)
    if not ok:
        run.failed.append("asymptotics")
    write_report([], run.out / "report.txt", [line])
    return np.array(rep.increments)


def _cmd_audit(run: Run, d, pair):
    from .evolution import evolve
    from .io import _write_rows, write_report, write_report_csv
    from .verification import bump_battery, max_with_constant_check, viscosity_audit

    s = run.s
    g = _initial_data(s, d, pair)
    trace = evolve(d, s.p, g, s.T, s.step_options())
    lines = []
    fine = s.check_trace(d, g, trace)
    if s.p >= 2.0:
        report = viscosity_audit(fine, s.p, C=s.tol.get("visc_C"), t_min=s.visc_t_min)
        lines.append(run.record(report, "viscosity"))
        write_report_csv(report, run.out / "viscosity_violations.csv")
    else:
        run.say("check=viscosity skipped=true reason=p<2")
    battery = bump_battery(d, 0.0, s.T, s.bumps)
    vmax = float(fine.values.max())
    for c in s.constants:
        report = max_with_constant_check(fine, c * vmax, s.p, battery, s.tol.get("weak"))
        report.params["c_fraction"] = c
        lines.append(run.record(report, f"max_with_constant c={c}"))
        rows = enumerate(report.params["residuals"])
        _write_rows(run.out / f"max_with_constant_c_{c!r}.csv", ["bump", "residual"], rows)
    write_report([], run.out / "report.txt", lines)


def _cmd_battery(run: Run, d, pair):
    import numpy as np

    from .evolution import evolve, separable_trace
    from .io import fmt, write_certificate_csv, write_report, write_trace
    from .operators import weak_residual
    from .verification import (
        asymptotic_profile,
        bump_battery,
        comparison_certificate,
        sandwich_check,
        viscosity_audit,
    )

    s = run.s
    times = np.linspace(0.0, s.T, int(round(s.T / s.snapshot_dt)) + 1)
    exact = separable_trace(pair, s.p, times)
    numeric = evolve(d, s.p, pair.u, s.T, s.step_options())
    write_trace(numeric, run.out / "trace")
    lines = []
    for beta in s.betas:
        cert = comparison_certificate(exact, exact, beta, s.p)
        write_certificate_csv(cert, run.out / f"certificate_beta_{beta!r}.csv")
        line = f"check=certificate passed={fmt(cert.passed)} beta={fmt(beta)} max_uptick={fmt(cert.max_uptick)}"
        run.say(line)
        lines.append(line)
        if not cert.passed:
            run.failed.append("certificate")
    lines.append(run.record(sandwich_check(exact, pair, pair, s.p), "sandwich_exact"))
    lines.append(run.record(sandwich_check(numeric, pair, pair, s.p, C=s.tol.get("cmp_C")), "sandwich_numeric"))
    _, rep = asymptotic_profile(exact, pair.lam, s.p, s.t_tail, s.tol.get("asym"))
    line = f"check=asymptotics passed={fmt(rep.converged)} last_increment={fmt(rep.increments[-1])}"
    run.say(line)
    lines.append(line)
    if not rep.converged:
        run.failed.append("asymptotics")
    fine = s.check_trace(d, pair.u, numeric)
    if s.p >= 2.0:
        report = viscosity_audit(fine, s.p, C=s.tol.get("visc_C"), t_min=s.visc_t_min)
        lines.append(run.record(report, "viscosity"))
    battery = bump_battery(d, 0.0, s.T, s.bumps)
    worst = max(abs(weak_residual(fine, s.p, phi)) for phi in battery)
    ok = worst <= s.tol.get("weak", 1e-3)
    line = f"check=weak_residual passed={fmt(ok)} worst_abs={fmt(worst)} tolerance={fmt(s.tol.get('weak', 1e-3))}"
    run.say(line)
    lines.append(line)
    if not ok:
        run.failed.append("weak_residual")
    write_report([], run.out / "report.txt", lines)


def echo_config(cfg, settings: Settings, out: Path, threads):
    from .tolerances import table_lines

    cfg = configparser.ConfigParser(interpolation=None)
    cfg.optionxform = str
    cfg.read_dict(settings.cfg)
    cfg["experiment"]["seed"] = str(settings.seed)
    path = out / "effective_config.ini"
    with open(path, "w", newline="\n", encoding="ascii") as fh:
        fh.write(f"; command = {settings.command}\n")
        if threads is not None:
            fh.write(f"; {THREADS_ENV} = {threads}\n")
        fh.write("; tolerance table: name = default ; scaling; used by\n")
        for line in table_lines():
            fh.write(f";   {line}\n")
        cfg.write(fh)
    return path


def build_parser():
    parser = argparse.ArgumentParser(prog="trudlab", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="INI experiment config")
    parser.add_argument("--out", default=None, help="output directory (default: ./trudlab_out/<command>)")
    parser.add_argument("--seed", type=int, default=None, help="seed for randomized initial data")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        threads = _apply_threads()
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["experiment"]["seed"] = str(args.seed)
        settings = Settings(cfg, args.command)
        d = settings.domain()
    except ConfigError as exc:
        print(f"trudlab: config error: {exc}", file=sys.stderr)
        return 2

    from .eigensolver import EigenSolveError, solve_extremal
    from .evolution import EvolutionError

    out = Path(args.out) if args.out else Path("trudlab_out") / args.command
    out.mkdir(parents=True, exist_ok=True)
    echo_config(cfg, settings, out, threads)
    run = Run(settings, out)
    try:
        if args.command == "eigen":
            _cmd_eigen(run, d)
        else:
            pair = solve_extremal(d, settings.p, settings.descent_options())
            handler = {
                "evolve": lambda: _cmd_evolve(run, d, pair),
                "compare": lambda: _cmd_compare(run, d, pair),
                "asymptotics": lambda: _cmd_asymptotics(run, d, pair),
                "audit": lambda: _cmd_audit(run, d, pair),
                "battery": lambda: _cmd_battery(run, d, pair),
            }[args.command]
            handler()
    except ConfigError as exc:
        print(f"trudlab: config error: {exc}", file=sys.stderr)
        return 2
    except EigenSolveError as exc:
        print(f"trudlab: solver error: {exc}; best {exc.best.summary()}", file=sys.stderr)
        return 3
    except (EvolutionError, ValueError) as exc:
        print(f"trudlab: solver error: {exc}", file=sys.stderr)
        return 3
    if run.failed:
        print(f"trudlab: failed checks: {', '.join(run.failed)}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
