"""Command line entry point.

Subcommands: ``validate``, ``simulate``, ``compare``, ``traj``,
``photocount``, ``dfs``.  Results are written as CSV files (17 significant
digits) into ``--out``.  Exit codes: 0 success, 2 validation failure,
3 solver disagreement, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import dataclass

import numpy as np

from .cascade import jump_count_distribution, solve_state
from .liouvillian import energy_pair_violation
from .modelfile import ModelFileError, load_model
from .models import assemble, concurrence, dfs_basis
from .oracle import propagate_adaptive, propagate_expm
from .trajectories import diagonalize_channels, ensemble_average, jump_count_histogram, run_ensemble

log = logging.getLogger("qcascade")

EXIT_OK, EXIT_INVALID, EXIT_DISAGREE, EXIT_IO = 0, 2, 3, 4
MC_SIGMAS = 5.0
MC_FLOOR = 0.01


class ValidationFailure(Exception):
    pass


class Disagreement(Exception):
    pass


@dataclass
class RunConfig:
    model: str
    command: str = "simulate"
    t_max: float | None = None
    n_points: int = 50
    solver: str = "nud"
    trajectories: int = 1000
    seed: int = 0
    out: str = "."
    drop_lamb_shift: bool = False
    tol: float = 1e-8
    check: bool = False

    def __post_init__(self):
        if self.t_max is not None and self.t_max <= 0:
            raise ValueError("t_max must be positive")
        if self.n_points < 2:
            raise ValueError("need at least two time points")
        if self.trajectories < 1:
            raise ValueError("need at least one trajectory")
        if self.solver not in ("oracle", "nud", "mc", "all"):
            raise ValueError(f"unknown solver {self.solver!r}")


def _fmt(x):
    return format(float(x), ".17g")


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    log.info("wrote %s", path)


def write_state_csv(path, times, states):
    d = states.shape[-1]
    header = ["time"]
    for i in range(d):
        for j in range(d):
            header += [f"re_{i}_{j}", f"im_{i}_{j}"]
    rows = []
    for t, rho in zip(times, states):
        flat = rho.reshape(-1)
        rows.append([t] + [v for z in flat for v in (z.real, z.imag)])
    _write_csv(path, header, rows)


def write_observables_csv(path, times, states):
    d = states.shape[-1]
    pairs = [(i, j) for i in range(d) for j in range(i + 1, d)] if d <= 4 else [(i, i + 1) for i in range(d - 1)]
    header = ["time", "trace", "purity"] + [f"pop_{i}" for i in range(d)] + [f"abs_coh_{i}_{j}" for i, j in pairs]
    if d == 4:
        header.append("concurrence")
    rows = []
    for t, rho in zip(times, states):
        row = [t, np.trace(rho).real, np.trace(rho @ rho).real] + list(np.diag(rho).real)
        row += [abs(rho[i, j]) for i, j in pairs]
        if d == 4:
            herm = 0.5 * (rho + rho.conj().T)
            row.append(concurrence(herm / np.trace(herm).real, tol=1e-6))
        rows.append(row)
    _write_csv(path, header, rows)


def write_jumps_csv(path, times, probs, stderr=None):
    header = ["time"] + [f"P_{k}" for k in range(probs.shape[1])]
    if stderr is not None:
        header += [f"se_{k}" for k in range(probs.shape[1])]
    rows = []
    for i, t in enumerate(times):
        row = [t] + list(probs[i])
        if stderr is not None:
            row += list(stderr[i])
        rows.append(row)
    _write_csv(path, header, rows)


def _time_grid(cfg, system):
    t_max = cfg.t_max
    if t_max is None:
        g = system.gamma_max()
        t_max = 5.0 / g if g > 0 else 10.0
    return np.linspace(0.0, t_max, cfg.n_points)


def _require_zero_temperature(system, what):
    if not system.tensor.is_zero_temperature:
        raise ValidationFailure(
            f"{what} refused: the spectral tensor is not at zero temperature. The sector cascade and the "
            "jump unraveling require gamma(omega < 0) = 0 (zero-temperature detailed balance)."
        )


def _mc(cfg, system, times):
    _require_zero_temperature(system, "Monte Carlo unraveling")
    ch = diagonalize_channels(system.tensor, system.decomposition)
    recs = run_ensemble(system.model.initial_state, system.generator(), ch, times, cfg.trajectories, seed=cfg.seed)
    if len(recs) < 2:
        raise ValidationFailure("need at least two trajectories for an ensemble average")
    return recs, ensemble_average(recs)


def _nud(system, times, cfg):
    _require_zero_temperature(system, "sector cascade (nud)")
    return solve_state(system.model.initial_state, system.generator(), system.tensor, system.decomposition, times)


def run_checks(system, times, tol):
    """Invariant suite; returns a list of ``(name, value, limit, ok)``."""
    L = system.liouvillian.total
    d = system.model.dim
    rng = np.random.default_rng(12345)
    results = []
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    Y = (L @ X.reshape(-1, order="F")).reshape(d, d, order="F")
    results.append(("trace_preservation", abs(np.trace(Y)) / max(1.0, np.abs(X).max()), 1e-10))
    Yd = (L @ X.conj().T.reshape(-1, order="F")).reshape(d, d, order="F")
    results.append(("hermiticity_preservation", float(np.max(np.abs(Y.conj().T - Yd))), 1e-12 * max(1.0, np.abs(L).max())))
    orc = propagate_expm(system.liouvillian, system.model.initial_state, times)
    w = orc.worst()
    results += [
        ("oracle_trace", w["trace"], 1e-8),
        ("oracle_hermiticity", w["hermiticity"], 1e-9),
        ("oracle_min_eigenvalue", -w["min_eigenvalue"], 1e-8),
    ]
    ada = propagate_adaptive(system.liouvillian, system.model.initial_state, times)
    results.append(("adaptive_vs_expm", float(np.max(np.abs(ada.states - orc.states))), 1e-8))
    if system.tensor.is_zero_temperature:
        results.append(("selection_rule", energy_pair_violation(L, system.spectrum, system.decomposition.freq_tol), 1e-13 * max(1.0, np.abs(L).max())))
        sol = solve_state(system.model.initial_state, system.generator(), system.tensor, system.decomposition, times)
        results.append(("nud_vs_oracle", float(np.max(np.abs(sol.assemble() - orc.states))), tol))
    return [(n, float(v), float(lim), bool(v <= lim)) for n, v, lim in results]


def _report_checks(checks):
    for name, val, lim, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {val:.3e} (limit {lim:.1e})")
    bad = [c for c in checks if not c[3]]
    if bad:
        if any(c[0] in ("adaptive_vs_expm", "nud_vs_oracle") for c in bad):
            raise Disagreement(", ".join(c[0] for c in bad))
        raise ValidationFailure(", ".join(c[0] for c in bad))


def run(cfg):
    """Execute one configured command; returns the process exit status."""
    try:
        model = load_model(cfg.model)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ModelFileError as exc:
        print(f"error: {cfg.model}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        os.makedirs(cfg.out, exist_ok=True)
        return _dispatch(cfg, model)
    except ValidationFailure as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Disagreement as exc:
        print(f"solver disagreement: {exc}", file=sys.stderr)
        return EXIT_DISAGREE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


def _dispatch(cfg, model):
    system = assemble(model, drop_lamb_shift=cfg.drop_lamb_shift)
    for note in system.liouvillian.notes:
        log.warning(note)
    times = _time_grid(cfg, system)
    out = lambda name: os.path.join(cfg.out, name)  # noqa: E731
    cmd = cfg.command

    if cmd == "validate":
        _report_checks(run_checks(system, times, cfg.tol))
        return EXIT_OK

    if cmd == "dfs":
        _require_zero_temperature(system, "DFS search")
        Q = dfs_basis(system.decomposition, system.tensor, system.H0)
        print(f"decoherence-free subspace of dimension {Q.shape[1]}")
        for k in range(Q.shape[1]):
            print("  " + " ".join(f"{z.real:+.6f}{z.imag:+.6f}j" for z in Q[:, k]))
        header = ["index"] + [f"{p}_{i}" for i in range(Q.shape[0]) for p in ("re", "im")]
        _write_csv(out("dfs.csv"), header, [[k] + [v for z in Q[:, k] for v in (z.real, z.imag)] for k in range(Q.shape[1])])
        return EXIT_OK

    if cmd == "photocount":
        sol = _nud(system, times, cfg)
        try:
            probs = jump_count_distribution(sol)
        except ValueError as exc:
            raise ValidationFailure(str(exc)) from None
        write_jumps_csv(out("jumps.csv"), times, probs)
        return EXIT_OK

    if cmd == "traj":
        recs, (mean, se) = _mc(cfg, system, times)
        write_state_csv(out("state.csv"), times, mean)
        write_observables_csv(out("observables.csv"), times, mean)
        kmax = max(max((r.jumps_before(times[-1]) for r in recs), default=0), 0)
        hist = [jump_count_histogram(recs, t, kmax) for t in times]
        write_jumps_csv(out("jumps.csv"), times, np.array([h[0] for h in hist]), np.array([h[1] for h in hist]))
        return EXIT_OK

    solver = "all" if cmd == "compare" else cfg.solver
    if cfg.check:
        _report_checks(run_checks(system, times, cfg.tol))

    states = None
    orc = sol = mc = None
    if solver in ("oracle", "all"):
        orc = propagate_expm(system.liouvillian, model.initial_state, times)
        states = orc.states
    if solver in ("nud", "all"):
        sol = _nud(system, times, cfg)
        states = sol.assemble() if states is None else states
        try:
            write_jumps_csv(out("jumps.csv"), times, jump_count_distribution(sol))
        except ValueError:
            log.info("initial state spans several energy sectors; jumps.csv not written")
    if solver in ("mc", "all"):
        recs, mc = _mc(cfg, system, times)
        states = mc[0] if states is None else states
    write_state_csv(out("state.csv"), times, states)
    write_observables_csv(out("observables.csv"), times, states)

    if solver == "all":
        nud_err = np.max(np.abs(sol.assemble() - orc.states), axis=(1, 2))
        diff = np.abs(mc[0] - orc.states)
        mc_err = np.max(diff, axis=(1, 2))
        mc_sig = np.max(mc[1], axis=(1, 2))
        mc_ok = np.all(diff <= np.maximum(MC_SIGMAS * mc[1], MC_FLOOR), axis=(1, 2))
        _write_csv(
            out("compare.csv"),
            ["time", "nud_oracle_maxnorm", "mc_oracle_maxnorm", "mc_sigma_max"],
            zip(times, nud_err, mc_err, mc_sig),
        )
        if np.any(nud_err > cfg.tol):
            i = int(np.argmax(nud_err))
            raise Disagreement(f"NuD vs oracle {nud_err[i]:.3e} > {cfg.tol:.1e} at t={times[i]:.6g}")
        if not np.all(mc_ok):
            i = int(np.argmin(mc_ok))
            raise Disagreement(f"Monte Carlo vs oracle {mc_err[i]:.3e} outside {MC_SIGMAS:g} sigma at t={times[i]:.6g}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="qcascade", description="Zero-temperature open-system simulator.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("validate", "parse a model and run the invariant checks"),
        ("simulate", "propagate a model with the chosen solver"),
        ("compare", "run every solver and compare against the reference"),
        ("traj", "Monte Carlo jump trajectories"),
        ("photocount", "emission-count distribution from the sector cascade"),
        ("dfs", "decoherence-free subspace"),
    ]:
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--model", required=True, help="model file (YAML)")
        sp.add_argument("--t-max", type=float, default=None, help="final time (default 5 / largest rate)")
        sp.add_argument("--points", type=int, default=50, help="number of output times")
        sp.add_argument("--solver", choices=["oracle", "nud", "mc", "all"], default="nud")
        sp.add_argument("--trajectories", type=int, default=1000)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--drop-lamb-shift", action="store_true", help="evolve with H_S only, without the Lamb shift")
        sp.add_argument("--tol", type=float, default=1e-8, help="NuD vs reference tolerance")
        sp.add_argument("--check", action="store_true", help="also run the invariant suite")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = RunConfig(
            model=args.model,
            command=args.command,
            t_max=args.t_max,
            n_points=args.points,
            solver=args.solver,
            trajectories=args.trajectories,
            seed=args.seed,
            out=args.out,
            drop_lamb_shift=args.drop_lamb_shift,
            tol=args.tol,
            check=args.check,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
