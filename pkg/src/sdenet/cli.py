"""Command-line interface: simulate | infer | eval | benchmark.

Configuration resolves in three layers: built-in defaults (documented in
--help), then a JSON config file (nested sections named after the verbs,
overridable inline with --set dotted.key=value), then explicit flags.
Outputs land under --output, defaulting to the SDENET_OUTPUT environment
variable or the current directory. Exit codes: 0 success, 2 bad
configuration, 3 bad data, 4 numerical failure.
"""

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import dataio
from .benchmark import SUITES, run_suite
from .dsf import ground_truth_topology
from .errors import ConfigError, DataError, SdenetError
from .grid import build_grid
from .metrics import binary_metrics, ranked_metrics
from .posterior import ModelConfig
from .results import impulse_score, pool_chains, summarize
from .sampler import SamplerConfig, run_chain
from .simulator import generate_random_network, generate_ring_network, simulate_sde

OUTPUT_ENV = "SDENET_OUTPUT"


# ---------------------------------------------------------------------------
# config plumbing


def _parse_set(pairs):
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigError(f"--set expects dotted.key=value, got {pair!r}")
        key, _, raw = pair.partition("=")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = out
        parts = key.strip().split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set key {key!r} clashes with a scalar")
        node[parts[-1]] = value
    return out


def _merge(base, extra):
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _merge(base[key], value)
        else:
            base[key] = value
    return base


def _load_config(args):
    cfg = {}
    if args.config:
        raw = dataio.read_json(args.config)
        if not isinstance(raw, dict):
            raise ConfigError(f"{args.config}: config must be a JSON object")
        cfg = raw
    _merge(cfg, _parse_set(args.set))
    return cfg


class _Resolver:
    """flags > config-file section > config-file top level > default."""

    def __init__(self, args, cfg, section):
        self.args = args
        self.cfg = cfg
        self.section = cfg.get(section, {})
        if not isinstance(self.section, dict):
            raise ConfigError(f"config section {section!r} must be an object")

    def __call__(self, name, default=None):
        flag = getattr(self.args, name, None)
        if flag is not None:
            return flag
        if name in self.section:
            return self.section[name]
        if name in self.cfg and not isinstance(self.cfg[name], dict):
            return self.cfg[name]
        return default


def _out_dir(resolve):
    out = resolve("output") or os.environ.get(OUTPUT_ENV) or "."
    os.makedirs(out, exist_ok=True)
    return out


def _int(x, name):
    try:
        return int(x)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be an integer, got {x!r}") from None


def _float(x, name):
    try:
        return float(x)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {x!r}") from None


# ---------------------------------------------------------------------------
# verbs


def cmd_simulate(args, cfg):
    r = _Resolver(args, cfg, "simulate")
    out = _out_dir(r)
    kind = r("kind", "random")
    if kind not in ("random", "ring"):
        raise ConfigError(f"kind must be 'random' or 'ring', got {kind!r}")
    seed = _int(r("seed", 0), "seed")
    p = _int(r("n_nodes", 6), "n_nodes")
    n_hidden = _int(r("n_hidden", 2), "n_hidden")
    rng = np.random.default_rng(seed)
    if kind == "ring":
        system = generate_ring_network(p, rng, n_hidden=n_hidden)
    else:
        system = generate_random_network(
            p + n_hidden, p, _float(r("density", 0.2), "density"), rng
        )
    m_samples = _int(r("m_samples", 100), "m_samples")
    spacing = _float(r("spacing", 1.0), "spacing")
    times = spacing * np.arange(m_samples)
    snr_db = r("snr_db", 10.0)
    snr_db = None if snr_db is None else _float(snr_db, "snr_db")
    sim = simulate_sde(
        system,
        times,
        rng,
        snr_db=snr_db,
        lam_meas=_float(r("lam_meas", 1e-3), "lam_meas"),
        dt_internal=r("dt_internal"),
    )
    u = sim.u if r("with_inputs", True) else None
    name = r("name", "dataset")
    csv_path = os.path.join(out, f"{name}.csv")
    data = dataio.TimeSeriesData(
        times=sim.times,
        z=sim.z,
        u=u,
        system=system,
        meta={
            "kind": kind,
            "seed": seed,
            "snr_db": snr_db,
            "lam_meas": sim.lam_meas,
            "adjacency": ground_truth_topology(system).astype(int).tolist(),
        },
    )
    side = dataio.save_dataset(csv_path, data)
    print(f"wrote {csv_path} and {side}")
    return 0


def _model_from(r):
    lags = r("lags")
    pseudo = r("pseudo_points")
    return ModelConfig(
        kernel=r("kernel", "TC"),
        a0=_float(r("a0", 0.001), "a0"),
        b0=_float(r("b0", 0.001), "b0"),
        a1=_float(r("a1", 1.0), "a1"),
        p_s=_float(r("p_s", 0.1), "p_s"),
        filter_a=_float(r("filter_a", 1.0), "filter_a"),
        lags=None if lags is None else _int(lags, "lags"),
        pseudo_points=None if pseudo is None else _int(pseudo, "pseudo_points"),
        pin_diagonal=bool(r("pin_diagonal", False)),
        include_inputs=bool(r("include_inputs", False)),
    )


def _sampler_from(r, seed, chain_id):
    return SamplerConfig(
        k_max=_int(r("k_max", 5000), "k_max"),
        seed=seed,
        chain_id=chain_id,
        eps_traj=_float(r("eps_traj", 0.2), "eps_traj"),
        eps_gamma=_float(r("eps_gamma", 0.3), "eps_gamma"),
        eps_beta=_float(r("eps_beta", 0.1), "eps_beta"),
        p_switch=_float(r("p_switch", 0.6), "p_switch"),
        thin=_int(r("thin", 1), "thin"),
        adapt_burnin=bool(r("adapt_burnin", False)),
        trajectory_proposal=r("trajectory_proposal", "pcn"),
        memory_cap_mb=_float(r("memory_cap_mb", 1024.0), "memory_cap_mb"),
    )


def _run_one_chain(task):
    z, grid, model, config, inputs, ckpt, every, resume = task
    return run_chain(
        z, grid, model, config,
        inputs=inputs, checkpoint_path=ckpt,
        checkpoint_every=every, resume_from=resume,
    )


def cmd_infer(args, cfg):
    r = _Resolver(args, cfg, "infer")
    out = _out_dir(r)
    dataset = r("dataset")
    if not dataset:
        raise ConfigError("infer needs --dataset")
    data = dataio.load_dataset(dataset)
    manual_dt = r("manual_dt")
    refinement = _int(r("refinement", 3), "refinement")
    grid = build_grid(
        data.times,
        refinement,
        manual_dt=None if manual_dt is None else _float(manual_dt, "manual_dt"),
    )
    model = _model_from(r)
    seed = _int(r("seed", 0), "seed")
    n_chains = _int(r("chains", 1), "chains")
    jobs = _int(r("jobs", 1), "jobs")
    name = r("name", "run")
    checkpoint_every = r("checkpoint_every")
    if checkpoint_every is not None:
        checkpoint_every = _int(checkpoint_every, "checkpoint_every")
    resume = r("resume")
    inputs = data.u if model.include_inputs else None

    tasks = []
    for c in range(n_chains):
        ckpt = os.path.join(out, f"{name}-chain{c}-checkpoint.npz")
        tasks.append(
            (data.z, grid, model, _sampler_from(r, seed, c), inputs,
             ckpt, checkpoint_every, resume if n_chains == 1 else None)
        )
    if jobs > 1 and n_chains > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            all_samples = list(pool.map(_run_one_chain, tasks))
    else:
        all_samples = [_run_one_chain(t) for t in tasks]

    burn_in = r("burn_in")
    burn_in = None if burn_in is None else _int(burn_in, "burn_in")
    if len(all_samples) == 1:
        summary = summarize(all_samples[0], burn_in=burn_in)
    else:
        summary = summarize(pool_chains(all_samples, burn_in=burn_in), burn_in=0)
    payload = dataio.summary_payload(summary)
    payload["dataset"] = os.path.abspath(dataset)
    payload["refinement"] = refinement
    payload["chains"] = n_chains
    summary_path = os.path.join(out, f"{name}-summary.json")
    dataio.write_json(summary_path, payload)
    dataio.write_edge_csv(
        os.path.join(out, f"{name}-edges.csv"),
        summary.edge_prob,
        s_map=summary.s_map,
        scores=impulse_score(summary),
    )
    dataio.write_trajectory_csv(
        os.path.join(out, f"{name}-trajectory.csv"), grid.t, summary.y_mean
    )
    rates = ", ".join(
        f"{k}={v:.3f}" for k, v in sorted(summary.acceptance_rates.items())
        if v == v and k != "numeric_rejects"
    )
    print(f"wrote {summary_path} ({summary.n_kept} kept samples; accept {rates})")
    return 0


def _truth_matrix(args, cfg, r):
    truth_file = r("truth")
    dataset = r("dataset")
    if truth_file:
        if not os.path.exists(truth_file):
            raise DataError(f"truth file not found: {truth_file}")
        info = dataio.read_json(truth_file)
        adj = info.get("adjacency") if isinstance(info, dict) else info
        if adj is None:
            raise DataError(f"{truth_file}: no 'adjacency' entry")
        return np.asarray(adj, dtype=bool)
    if dataset:
        data = dataio.load_dataset(dataset)
        if data.system is not None:
            return ground_truth_topology(data.system)
        adj = (data.meta or {}).get("adjacency")
        if adj is not None:
            return np.asarray(adj, dtype=bool)
        raise DataError(f"{dataset}: sidecar has no system or adjacency")
    raise ConfigError("eval needs --truth or --dataset for the ground truth")


def cmd_eval(args, cfg):
    r = _Resolver(args, cfg, "eval")
    out = _out_dir(r)
    summary_file = r("summary")
    if not summary_file:
        raise ConfigError("eval needs --summary (output of infer)")
    if not os.path.exists(summary_file):
        raise DataError(f"summary file not found: {summary_file}")
    payload = dataio.read_json(summary_file)
    try:
        p = int(payload["n_nodes"])
        link_prob = np.asarray(payload["link_prob"], dtype=float)[:, :p]
        s_map = np.asarray(payload["s_map"], dtype=int)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{summary_file}: not an infer summary: {exc}") from exc
    truth = _truth_matrix(args, cfg, r)
    if truth.shape != (p, p):
        raise DataError(
            f"truth is {truth.shape}, summary has {p} nodes"
        )
    include_diag = bool(r("include_diagonal", False))
    exclude = not include_diag
    counts = binary_metrics(s_map, truth, exclude_diagonal=exclude)
    ranked = ranked_metrics(link_prob, truth, exclude_diagonal=exclude)
    report = {
        "summary": os.path.abspath(summary_file),
        "n_nodes": p,
        "diagonal_excluded": exclude,
        **counts,
        **ranked,
    }
    name = r("name", "eval")
    dataio.write_json(os.path.join(out, f"{name}-metrics.json"), report)
    dataio.write_table_csv(
        os.path.join(out, f"{name}-metrics.csv"),
        ["config", "tpr", "precision", "auroc", "auprec"],
        [[
            name,
            "" if counts["tpr"] is None else counts["tpr"],
            "" if counts["precision"] is None else counts["precision"],
            ranked["auroc"],
            ranked["auprec"],
        ]],
    )
    diag_note = "diagonal excluded" if exclude else "diagonal included"
    print(f"[{diag_note}] " + ", ".join(
        f"{k}={report[k] if report[k] is not None else 'undefined'}"
        for k in ("tpr", "precision", "auroc", "auprec")
    ))
    return 0


def cmd_benchmark(args, cfg):
    r = _Resolver(args, cfg, "benchmark")
    out = _out_dir(r)
    suite = r("suite", "ring-desk")
    replicates = r("replicates")
    k_max = r("k_max")
    agg = run_suite(
        suite,
        base_seed=_int(r("seed", 0), "seed"),
        jobs=_int(r("jobs", 1), "jobs"),
        replicates=None if replicates is None else _int(replicates, "replicates"),
        k_max=None if k_max is None else _int(k_max, "k_max"),
        out_dir=out,
        progress=lambda i, n: print(f"replicate {i}/{n} done", flush=True),
    )
    print(f"suite {suite}: {agg['succeeded']}/{agg['replicates']} replicates ok")
    for key in ("auroc", "auprec", "tpr", "precision"):
        val = agg.get(f"mean_{key}")
        target = agg["targets"].get(key)
        line = f"  mean {key}: " + ("n/a" if val is None else f"{val:.4f}")
        if target is not None:
            line += f" (target {target:.2f})"
        print(line)
    print(f"  wall time: {agg['wall_s']:.1f}s; artifacts in {out}")
    return 0 if agg["succeeded"] else 4


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(sub):
    sub.add_argument("--output", help=f"output directory (default ${OUTPUT_ENV} or .)")
    sub.add_argument("--name", help="basename for output files")
    sub.add_argument("--seed", type=int, help="RNG seed (default 0)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sdenet",
        description="Bayesian inference of sparse dynamical networks from "
        "low-rate time series.",
    )
    parser.add_argument("--config", help="JSON config file (sections per verb)")
    parser.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="override a config entry, e.g. --set infer.k_max=200",
    )
    subs = parser.add_subparsers(dest="verb", required=True)

    sim = subs.add_parser("simulate", help="generate a network and a dataset")
    _add_common(sim)
    sim.add_argument("--kind", choices=["random", "ring"],
                     help="network generator (default random)")
    sim.add_argument("--n-nodes", dest="n_nodes", type=int,
                     help="measured nodes p (default 6)")
    sim.add_argument("--n-hidden", dest="n_hidden", type=int,
                     help="hidden states (default 2)")
    sim.add_argument("--density", type=float,
                     help="expected fill of A, random kind (default 0.2)")
    sim.add_argument("--m-samples", dest="m_samples", type=int,
                     help="measurement instants (default 100)")
    sim.add_argument("--spacing", type=float,
                     help="measurement spacing (default 1.0)")
    sim.add_argument("--snr-db", dest="snr_db", type=float,
                     help="process-noise SNR in dB (default 10)")
    sim.add_argument("--lam-meas", dest="lam_meas", type=float,
                     help="measurement-noise variance (default 1e-3)")
    sim.add_argument("--dt-internal", dest="dt_internal", type=float,
                     help="integrator step (default min spacing/100)")
    sim.add_argument("--with-inputs", dest="with_inputs",
                     action=argparse.BooleanOptionalAction, default=None,
                     help="record the driving input paths (default on)")

    inf = subs.add_parser("infer", help="run the sampler on a dataset")
    _add_common(inf)
    inf.add_argument("--dataset", help="dataset CSV (with JSON sidecar)")
    inf.add_argument("--refinement", type=int,
                     help="grid refinement factor (default 3)")
    inf.add_argument("--manual-dt", dest="manual_dt", type=float,
                     help="force a grid step for incommensurate spacings")
    inf.add_argument("--kernel", choices=["TC", "DC", "SS"],
                     help="impulse-response kernel (default TC)")
    inf.add_argument("--k-max", dest="k_max", type=int,
                     help="sampler iterations (default 5000)")
    inf.add_argument("--chains", type=int, help="independent chains (default 1)")
    inf.add_argument("--jobs", type=int, help="parallel chain workers (default 1)")
    inf.add_argument("--thin", type=int, help="store every n-th iteration (default 1)")
    inf.add_argument("--burn-in", dest="burn_in", type=int,
                     help="stored samples to discard (default half)")
    inf.add_argument("--lags", type=int,
                     help="impulse-response lags l (default min(N, ceil(8/dt)))")
    inf.add_argument("--pseudo-points", dest="pseudo_points", type=int,
                     help="sparse-approximation size d (default min(l, 30))")
    inf.add_argument("--filter-a", dest="filter_a", type=float,
                     help="anti-integrator filter constant (default 1.0)")
    inf.add_argument("--a0", type=float, help="variance prior shape (default 0.001)")
    inf.add_argument("--b0", type=float, help="variance prior scale (default 0.001)")
    inf.add_argument("--a1", type=float, help="kernel-scale prior rate (default 1.0)")
    inf.add_argument("--p-s", dest="p_s", type=float,
                     help="prior link probability (default 0.1)")
    inf.add_argument("--eps-traj", dest="eps_traj", type=float,
                     help="pCN step size (default 0.2)")
    inf.add_argument("--eps-gamma", dest="eps_gamma", type=float,
                     help="kernel-scale proposal sd (default 0.3)")
    inf.add_argument("--eps-beta", dest="eps_beta", type=float,
                     help="decay proposal window (default 0.1)")
    inf.add_argument("--p-switch", dest="p_switch", type=float,
                     help="probability of a switch vs update move (default 0.6)")
    inf.add_argument("--pin-diagonal", dest="pin_diagonal",
                     action=argparse.BooleanOptionalAction, default=None,
                     help="keep self-links always active (default off)")
    inf.add_argument("--include-inputs", dest="include_inputs",
                     action=argparse.BooleanOptionalAction, default=None,
                     help="model recorded inputs as known regressors (default off)")
    inf.add_argument("--trajectory-proposal", dest="trajectory_proposal",
                     choices=["pcn", "rw"],
                     help="trajectory move type (default pcn)")
    inf.add_argument("--adapt-burnin", dest="adapt_burnin",
                     action=argparse.BooleanOptionalAction, default=None,
                     help="tune eps_traj during burn-in (default off)")
    inf.add_argument("--checkpoint-every", dest="checkpoint_every", type=int,
                     help="periodic checkpoint interval (default: final only)")
    inf.add_argument("--resume", help="checkpoint file to resume from")
    inf.add_argument("--memory-cap-mb", dest="memory_cap_mb", type=float,
                     help="sample storage cap before disk spill (default 1024)")

    ev = subs.add_parser("eval", help="score an inference run against truth")
    _add_common(ev)
    ev.add_argument("--summary", help="summary JSON written by infer")
    ev.add_argument("--dataset", help="dataset CSV whose sidecar holds the truth")
    ev.add_argument("--truth", help="JSON file with an 'adjacency' matrix")
    ev.add_argument("--include-diagonal", dest="include_diagonal",
                    action=argparse.BooleanOptionalAction, default=None,
                    help="score self-links too (default off)")

    bench = subs.add_parser("benchmark", help="run a replicate suite")
    _add_common(bench)
    bench.add_argument("--suite", choices=sorted(SUITES),
                       help="suite name (default ring-desk)")
    bench.add_argument("--replicates", type=int,
                       help="override the suite replicate count")
    bench.add_argument("--k-max", dest="k_max", type=int,
                       help="override the suite chain length")
    bench.add_argument("--jobs", type=int, help="parallel replicates (default 1)")
    return parser


_DISPATCH = {
    "simulate": cmd_simulate,
    "infer": cmd_infer,
    "eval": cmd_eval,
    "benchmark": cmd_benchmark,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args)
        return _DISPATCH[args.verb](args, cfg)
    except SdenetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
