"""Command-line experiment harness.

Subcommands map to the evaluation workflows: scenario generation, single
solves, solver-vs-heuristic comparison, trade-off sweeps, convergence
statistics, and the synthetic federated training demo.  All artifacts are
CSV (with a versioned comment header embedding the seed and a parameter
hash) plus SVG plots rendered from the same data.

Exit codes: 1 configuration error, 2 infeasible scenario, 3 solver
non-convergence, 4 I/O error.
"""

from __future__ import annotations

import hashlib
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import click
import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .errors import (DivergenceError, InfeasibilityError,
                     InfeasibleAccuracyError, InvalidParameterError,
                     MsFedlError)
from .fedl_sim import (contraction_envelope, learning_globals_for,
                       make_synthetic_task, run_fedl)
from .learning import fedl_constants, optimal_eta
from .orchestrator import (heuristic_equal, heuristic_proportional,
                           solve_centralized, solve_decentralized)
from .scenario import (Scenario, ScenarioConfig, generate_scenario,
                       load_scenario, save_scenario)
from .subproblems import AdmmParams

ARTIFACT_VERSION = "msfedl-csv v1"

EXIT_CONFIG = 1
EXIT_INFEASIBLE = 2
EXIT_NO_CONVERGENCE = 3
EXIT_IO = 4


class NonConvergenceError(MsFedlError):
    pass


def _param_hash(*parts) -> str:
    h = hashlib.sha256()
    for p in parts:
        h.update(repr(p).encode())
        h.update(b"\0")
    return h.hexdigest()[:12]


def _csv_header(seed, phash) -> str:
    return f"# {ARTIFACT_VERSION}\n# seed: {seed}\n# params: {phash}\n"


def _write(path, text):
    with open(path, "w") as fh:
        fh.write(text)


def _outdir(out):
    out = out or os.environ.get("MSFEDL_OUT", ".")
    os.makedirs(out, exist_ok=True)
    return out


def _load_or_generate(seed, scenario_file, ues, config):
    if (seed is None) == (scenario_file is None):
        raise InvalidParameterError(
            "exactly one scenario source required: --seed or --scenario-file")
    if scenario_file is not None:
        return load_scenario(scenario_file)
    cfg = ScenarioConfig.from_file(config) if config else None
    return generate_scenario(seed, ues, cfg)


def _admm_params(rho1, rho2, prox, alpha, eps1, eps2, max_outer):
    return AdmmParams(rho1=rho1, rho2=rho2, proximal_weight=prox,
                      relax_alpha=alpha, eps1=eps1, eps2=eps2,
                      max_outer=max_outer)


def _dispatch(scenario, mode, params, workers=1):
    if mode == "centralized":
        return solve_centralized(scenario)
    if mode == "heuristic-equal":
        return heuristic_equal(scenario)
    if mode == "heuristic-proportional":
        return heuristic_proportional(scenario)
    return solve_decentralized(scenario, params=params, mode=mode,
                               workers=workers)


def _guarded(fn):
    """Map library errors onto the documented exit codes."""
    try:
        fn()
    except (InvalidParameterError, click.ClickException) as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except (InfeasibilityError, InfeasibleAccuracyError) as exc:
        click.echo(f"infeasible: {exc}", err=True)
        sys.exit(EXIT_INFEASIBLE)
    except (NonConvergenceError, DivergenceError) as exc:
        click.echo(f"non-convergence: {exc}", err=True)
        sys.exit(EXIT_NO_CONVERGENCE)
    except OSError as exc:
        click.echo(f"I/O error: {exc}", err=True)
        sys.exit(EXIT_IO)


def source_options(fn):
    fn = click.option("--seed", type=int, default=None,
                      help="generate the scenario from this seed")(fn)
    fn = click.option("--scenario-file", type=str, default=None,
                      help="load a previously saved scenario")(fn)
    fn = click.option("--ues", type=int, default=50, show_default=True,
                      help="UE count when generating from a seed")(fn)
    fn = click.option("--config", type=str, default=None,
                      help="YAML distribution-settings file")(fn)
    return fn


def admm_options(fn):
    fn = click.option("--rho1", type=float, default=1000.0, show_default=True)(fn)
    fn = click.option("--rho2", type=float, default=10.0, show_default=True)(fn)
    fn = click.option("--prox", type=float, default=1500.0, show_default=True,
                      help="proximal damping weight")(fn)
    fn = click.option("--alpha", type=float, default=1.0, show_default=True,
                      help="dual relaxation step")(fn)
    fn = click.option("--eps1", type=float, default=1e-4, show_default=True)(fn)
    fn = click.option("--eps2", type=float, default=1e-5, show_default=True)(fn)
    fn = click.option("--max-outer", type=int, default=500, show_default=True)(fn)
    return fn


@click.group()
def main():
    """Multi-service federated-learning resource allocation experiments."""


@main.command()
@click.option("--seed", type=int, required=True)
@click.option("--ues", type=int, default=50, show_default=True)
@click.option("--config", type=str, default=None)
@click.option("--out", type=str, default=None,
              help="output directory (default $MSFEDL_OUT or .)")
def generate(seed, ues, config, out):
    """Generate a scenario and save it as YAML."""
    def body():
        cfg = ScenarioConfig.from_file(config) if config else None
        sc = generate_scenario(seed, ues, cfg)
        path = os.path.join(_outdir(out), f"scenario_seed{seed}.yaml")
        save_scenario(sc, path)
        click.echo(path)
    _guarded(body)


@main.command()
@source_options
@admm_options
@click.option("--mode", default="centralized", show_default=True,
              type=click.Choice(["centralized", "jacobi", "jacobi-early-stop",
                                 "gauss-seidel", "heuristic-equal",
                                 "heuristic-proportional"]))
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--out", type=str, default=None)
def solve(seed, scenario_file, ues, config, mode, workers, out,
          rho1, rho2, prox, alpha, eps1, eps2, max_outer):
    """Solve one scenario in one mode; write outcome, cost, and trace."""
    def body():
        sc = _load_or_generate(seed, scenario_file, ues, config)
        params = _admm_params(rho1, rho2, prox, alpha, eps1, eps2, max_outer)
        outcome = _dispatch(sc, mode, params, workers)
        odir = _outdir(out)
        phash = _param_hash(sc.seed, sc.n_ues, mode, params)
        head = _csv_header(sc.seed, phash)
        tag = f"{mode}_seed{sc.seed}"
        _write(os.path.join(odir, f"outcome_{tag}.txt"),
               outcome.to_document(sc))
        _write(os.path.join(odir, f"cost_{tag}.csv"),
               head + outcome.cost.to_csv())
        if outcome.trace.records:
            _write(os.path.join(odir, f"trace_{tag}.csv"),
                   head + outcome.trace.to_csv(outcome.mode))
        click.echo(f"{mode}: cost {outcome.cost.total:.6f} "
                   f"({outcome.iterations} iterations, {outcome.status})")
        if outcome.status != "converged":
            raise NonConvergenceError(
                f"{mode} stopped with status {outcome.status}")
    _guarded(body)


@main.command()
@source_options
@admm_options
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--out", type=str, default=None)
def compare(seed, scenario_file, ues, config, workers, out,
            rho1, rho2, prox, alpha, eps1, eps2, max_outer):
    """Centralized, both heuristics, and all decentralized modes on one
    scenario; writes a comparison table and a bar plot."""
    def body():
        sc = _load_or_generate(seed, scenario_file, ues, config)
        params = _admm_params(rho1, rho2, prox, alpha, eps1, eps2, max_outer)
        modes = ["centralized", "heuristic-equal", "heuristic-proportional",
                 "jacobi", "jacobi-early-stop", "gauss-seidel"]
        rows = []
        for mode in modes:
            oc = _dispatch(sc, mode, params, workers)
            time_total = sum(s.rounds * s.round_time for s in oc.cost.per_service)
            energy_total = sum(s.rounds * s.round_energy for s in oc.cost.per_service)
            rows.append((mode, float(oc.cost.total), float(time_total),
                         float(energy_total), oc.iterations, oc.status))
            click.echo(f"{mode}: cost {oc.cost.total:.4f} ({oc.status})")
        odir = _outdir(out)
        phash = _param_hash(sc.seed, sc.n_ues, params)
        lines = [_csv_header(sc.seed, phash)
                 + "mode,total_cost,total_time,total_energy,iterations,status\n"]
        for r in rows:
            lines.append(f"{r[0]},{r[1]!r},{r[2]!r},{r[3]!r},{r[4]},{r[5]}\n")
        path = os.path.join(odir, f"comparison_seed{sc.seed}.csv")
        _write(path, "".join(lines))
        _plot_comparison(rows, os.path.join(odir, f"comparison_seed{sc.seed}.svg"))
        click.echo(path)
        central = rows[0][1]
        for mode, cost, *_rest in rows[1:3]:
            if central > cost:
                raise NonConvergenceError(
                    f"centralized cost {central} above {mode} cost {cost}")
    _guarded(body)


def _plot_comparison(rows, path):
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.2))
    names = [r[0] for r in rows]
    for ax, (idx, title) in zip(axes, [(1, "total cost"), (2, "time"),
                                       (3, "energy")]):
        ax.bar(range(len(rows)), [r[idx] for r in rows], color="#4878d0")
        ax.set_xticks(range(len(rows)))
        ax.set_xticklabels(names, rotation=30, ha="right", fontsize=7)
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


@main.command("sweep-kappa")
@click.option("--seed", type=int, required=True)
@click.option("--ues", type=int, default=50, show_default=True)
@click.option("--config", type=str, default=None)
@click.option("--kappa3", "kappa3_values", type=float, multiple=True,
              default=(0.1, 0.2, 0.5, 1.0, 2.0), show_default=True,
              help="grid of Service-3 time/energy trade-off weights")
@click.option("--out", type=str, default=None)
def sweep_kappa(seed, ues, config, kappa3_values, out):
    """Vary the last service's trade-off weight; write per-service
    time/energy curves at the centralized optimum."""
    def body():
        base = ScenarioConfig.from_file(config) if config else ScenarioConfig()
        rows = []
        for k3 in kappa3_values:
            weights = list(base.tradeoff_weights)
            weights[-1] = float(k3)
            cfg = replace(base, tradeoff_weights=tuple(weights))
            sc = generate_scenario(seed, ues, cfg)
            oc = solve_centralized(sc)
            for svc in oc.cost.per_service:
                rows.append((k3, svc.service_id,
                             float(svc.rounds * svc.round_time),
                             float(svc.rounds * svc.round_energy)))
        odir = _outdir(out)
        phash = _param_hash(seed, ues, tuple(kappa3_values))
        lines = [_csv_header(seed, phash)
                 + "kappa3,service_id,total_time,total_energy\n"]
        for r in rows:
            lines.append(f"{r[0]!r},{r[1]},{r[2]!r},{r[3]!r}\n")
        path = os.path.join(odir, f"kappa_sweep_seed{seed}.csv")
        _write(path, "".join(lines))
        _plot_sweep(rows, os.path.join(odir, f"kappa_sweep_seed{seed}.svg"))
        click.echo(path)
    _guarded(body)


def _plot_sweep(rows, path):
    services = sorted({r[1] for r in rows})
    fig, (ax_t, ax_e) = plt.subplots(1, 2, figsize=(8, 3.2))
    for sid in services:
        pts = [(r[0], r[2], r[3]) for r in rows if r[1] == sid]
        ks = [p[0] for p in pts]
        ax_t.plot(ks, [p[1] for p in pts], marker="o", label=f"service {sid}")
        ax_e.plot(ks, [p[2] for p in pts], marker="o", label=f"service {sid}")
    for ax, title in ((ax_t, "total time [s]"), (ax_e, "total energy [J]")):
        ax.set_xlabel("kappa_3")
        ax.set_xscale("log")
        ax.set_title(title)
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


@main.command("convergence-study")
@click.option("--seed", type=int, default=1, show_default=True,
              help="master seed; per-repetition seeds are derived from it")
@click.option("--ues", type=int, default=20, show_default=True)
@click.option("--config", type=str, default=None)
@click.option("--reps", type=int, default=20, show_default=True)
@click.option("--workers", type=int, default=1, show_default=True,
              help="concurrent repetitions (determinism preserved)")
@admm_options
@click.option("--out", type=str, default=None)
def convergence_study(seed, ues, config, reps, workers, out,
                      rho1, rho2, prox, alpha, eps1, eps2, max_outer):
    """Iteration-count statistics for the three decentralized modes over
    seeded realizations."""
    def body():
        if reps < 1:
            raise InvalidParameterError("--reps must be >= 1")
        cfg = ScenarioConfig.from_file(config) if config else None
        params = _admm_params(rho1, rho2, prox, alpha, eps1, eps2, max_outer)
        modes = ["jacobi", "jacobi-early-stop", "gauss-seidel"]

        def one(rep):
            rep_seed = seed * 100000 + rep
            sc = generate_scenario(rep_seed, ues, cfg)
            cen = solve_centralized(sc)
            entries = []
            for mode in modes:
                oc = solve_decentralized(sc, params=params, mode=mode)
                gap = abs(oc.cost.total - cen.cost.total) / cen.cost.total
                entries.append((rep, rep_seed, mode, oc.iterations,
                                oc.status, float(oc.cost.total), float(gap)))
            return entries

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                chunks = list(pool.map(one, range(reps)))
        else:
            chunks = [one(rep) for rep in reps_range(reps)]
        rows = [row for chunk in chunks for row in chunk]
        rows.sort(key=lambda r: (r[0], r[2]))

        odir = _outdir(out)
        phash = _param_hash(seed, ues, reps, params)
        lines = [_csv_header(seed, phash)
                 + "rep,rep_seed,mode,iterations,status,total_cost,rel_gap\n"]
        for r in rows:
            lines.append(f"{r[0]},{r[1]},{r[2]},{r[3]},{r[4]},{r[5]!r},{r[6]!r}\n")
        path = os.path.join(odir, f"convergence_study_seed{seed}.csv")
        _write(path, "".join(lines))
        for mode in modes:
            iters = sorted(r[3] for r in rows if r[2] == mode)
            click.echo(f"{mode}: median iterations "
                       f"{iters[len(iters) // 2]} over {len(iters)} runs")
        _plot_study(rows, modes,
                    os.path.join(odir, f"convergence_study_seed{seed}.svg"))
        click.echo(path)
    _guarded(body)


def reps_range(reps):
    return range(reps)


def _plot_study(rows, modes, path):
    fig, ax = plt.subplots(figsize=(5, 3.2))
    data = [[r[3] for r in rows if r[2] == mode] for mode in modes]
    ax.boxplot(data, tick_labels=modes)
    ax.set_ylabel("iterations to convergence")
    ax.tick_params(axis="x", labelsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


@main.command("fedl-demo")
@click.option("--seed", type=int, default=3, show_default=True)
@click.option("--dim", type=int, default=10, show_default=True)
@click.option("--ues", type=int, default=5, show_default=True)
@click.option("--samples", type=int, default=40, show_default=True)
@click.option("--theta", type=float, default=0.1, show_default=True)
@click.option("--rounds", type=int, default=60, show_default=True)
@click.option("--out", type=str, default=None)
def fedl_demo(seed, dim, ues, samples, theta, rounds, out):
    """Synthetic federated training traces across a hyper-learning-rate
    grid around the closed-form optimum."""
    def body():
        task = make_synthetic_task(seed=seed, n_ues=ues, dim=dim,
                                   samples_per_ue=samples)
        consts = fedl_constants(theta, learning_globals_for(task), 1.0)
        eta_star = optimal_eta(consts)
        grid = [0.3 * eta_star, 0.6 * eta_star, eta_star, 1.3 * eta_star]
        odir = _outdir(out)
        phash = _param_hash(seed, dim, ues, samples, theta, rounds)
        traces = []
        for eta in grid:
            run = run_fedl(task, eta=eta, theta=theta, rounds=rounds)
            traces.append((eta, run))
        lines = [_csv_header(seed, phash) + "round,"
                 + ",".join(f"gap_eta_{eta!r}" for eta, _ in traces) + "\n"]
        for t in range(rounds + 1):
            lines.append(str(t) + ","
                         + ",".join(repr(float(run.loss_gaps[t]))
                                    for _, run in traces) + "\n")
        path = os.path.join(odir, f"fedl_demo_seed{seed}.csv")
        _write(path, "".join(lines))
        env = contraction_envelope(consts, eta_star,
                                   traces[2][1].loss_gaps[0], rounds)
        _plot_fedl(traces, env, eta_star,
                   os.path.join(odir, f"fedl_demo_seed{seed}.svg"))
        click.echo(f"eta* = {eta_star!r}")
        click.echo(path)
    _guarded(body)


def _plot_fedl(traces, envelope, eta_star, path):
    fig, ax = plt.subplots(figsize=(5, 3.4))
    for eta, run in traces:
        label = f"eta = {eta:.4f}" + (" (optimal)" if eta == eta_star else "")
        ax.semilogy(np.maximum(run.loss_gaps, 1e-16), label=label)
    ax.semilogy(np.maximum(envelope, 1e-16), "k--", lw=1,
                label="contraction envelope")
    ax.set_xlabel("global round")
    ax.set_ylabel("loss gap")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


if __name__ == "__main__":
    main()
