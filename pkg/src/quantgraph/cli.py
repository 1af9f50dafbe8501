"""Command-line front end: ingestion, fitting, simulation, evaluation, export."""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import click
import numpy as np

from .data import Dataset, NeighborhoodPosterior, PriorConfig, QuantileGrid, standardize
from .graph import FitReport, Graph, assemble_graph, fit_all_nodes
from .jsonio import dump_json, load_json
from .mcmc import McmcConfig
from .simulate import evaluate, gen_example1, gen_example2, per_node_residuals
from .vb import VbConfig

DEFAULT_TAUS = (0.3, 0.5, 0.7)


# ---------------------------------------------------------------- file I/O

def load_csv(path) -> Dataset:
    """Read a header + numeric-rows CSV into an unstandardized Dataset.

    Errors name the offending cell by file line and column (1-based, the
    header being line 1).
    """
    path = Path(path)
    with open(path, newline="") as fh:
        lines = [ln.rstrip("\n").rstrip("\r") for ln in fh if ln.strip() != ""]
    if len(lines) < 2:
        raise ValueError(f"{path}: fewer than 2 rows (need a header and at least one data row)")
    names = [c.strip() for c in lines[0].split(",")]
    if len(set(names)) != len(names):
        dupes = sorted({c for c in names if names.count(c) > 1})
        raise ValueError(f"{path}: duplicate column names {dupes}")
    p = len(names)
    values = np.empty((len(lines) - 1, p))
    for i, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != p:
            raise ValueError(f"{path}: row {i} has {len(cells)} cells, expected {p}")
        for j, cell in enumerate(cells, start=1):
            try:
                values[i - 2, j - 1] = float(cell)
            except ValueError:
                raise ValueError(f"{path}: non-numeric cell {cell.strip()!r} "
                                 f"at row {i}, column {j}") from None
    return Dataset(values=values, column_names=names, standardized=False)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_dataset_csv(d: Dataset, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(d.column_names) + "\n")
        for row in d.values:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_adjacency_csv(graph: Graph, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(graph.node_names) + "\n")
        for row in graph.adjacency:
            fh.write(",".join(str(int(v)) for v in row) + "\n")


def load_adjacency_csv(path) -> Graph:
    d = load_csv(path)
    adj = d.values.astype(np.int64)
    if not np.array_equal(d.values, adj):
        raise ValueError(f"{path}: adjacency entries must be 0/1 integers")
    if adj.shape[0] != adj.shape[1]:
        raise ValueError(f"{path}: adjacency must be square, got {adj.shape}")
    if not np.array_equal(adj, adj.T):
        raise ValueError(f"{path}: adjacency must be symmetric")
    ii, jj = np.nonzero(np.triu(adj, k=1))
    signs = {(int(a) + 1, int(b) + 1): "inconclusive" for a, b in zip(ii, jj)}
    return Graph(adjacency=adj, signs=signs, node_names=d.column_names)


def write_truth_edges(sim_truth: Graph, moralization_edges, path) -> None:
    """Headerless TSV of truth edges: name_i, name_j, kind."""
    moral = {tuple(sorted(e)) for e in moralization_edges}
    with open(path, "w", newline="\n") as fh:
        for (i, j) in sim_truth.edges():
            kind = "moralization" if (i, j) in moral else "direct"
            fh.write(f"{sim_truth.node_names[i - 1]}\t{sim_truth.node_names[j - 1]}\t{kind}\n")


def load_truth_edges(path, node_names) -> tuple[Graph, tuple]:
    """Rebuild a truth Graph over the given node set from an edge-list TSV."""
    index = {name: k + 1 for k, name in enumerate(node_names)}
    p = len(node_names)
    adj = np.zeros((p, p), dtype=np.int64)
    moral = []
    with open(path) as fh:
        for ln, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) < 2:
                raise ValueError(f"{path}: line {ln}: expected at least two tab-separated columns")
            a, b = parts[0], parts[1]
            if a not in index or b not in index:
                raise ValueError(f"{path}: line {ln}: unknown node name in edge {a!r} -- {b!r}")
            i, j = sorted((index[a], index[b]))
            adj[i - 1, j - 1] = adj[j - 1, i - 1] = 1
            if len(parts) >= 3 and parts[2] == "moralization":
                moral.append((i, j))
    ii, jj = np.nonzero(np.triu(adj, k=1))
    signs = {(int(a) + 1, int(b) + 1): "inconclusive" for a, b in zip(ii, jj)}
    return Graph(adjacency=adj, signs=signs, node_names=list(node_names)), tuple(moral)


def write_edges_tsv(graph: Graph, posteriors, path) -> None:
    by_node = {r.node_index: r for r in posteriors}

    def prob(of: int, in_fit_of: int) -> float:
        r = by_node[in_fit_of]
        return float(r.incl_prob[r.predictor_map.index(of)])

    with open(path, "w", newline="\n") as fh:
        fh.write("node_i\tnode_j\tsign\tincl_prob_ij\tincl_prob_ji\n")
        for (i, j) in graph.edges():
            fh.write("\t".join([
                graph.node_names[i - 1], graph.node_names[j - 1],
                graph.signs[(i, j)],
                _fmt(prob(i, in_fit_of=j)), _fmt(prob(j, in_fit_of=i)),
            ]) + "\n")


def write_dot(graph: Graph, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("graph G {\n")
        for (i, j) in graph.edges():
            fh.write(f'  "{graph.node_names[i - 1]}" -- "{graph.node_names[j - 1]}"'
                     f' [sign="{graph.signs[(i, j)]}"];\n')
        fh.write("}\n")


# ------------------------------------------------------------ run configs

@dataclass
class RunConfig:
    """Effective fit configuration after merging file values and CLI flags."""

    input: str = ""
    output: str = "."
    engine: str = "vb"
    taus: tuple = DEFAULT_TAUS
    threshold: float = 0.5
    seed: int = 0
    jobs: int = 1
    priors: PriorConfig = field(default_factory=PriorConfig)
    iterations: int = 10000
    burn_in: int = 4000
    thin: int = 1
    v_method: str = "exact"
    max_iterations: int = 500
    tolerance: float = 1e-6

    def __post_init__(self):
        taus = tuple(float(t) for t in self.taus)
        if any(not (0.0 < t < 1.0) for t in taus) or any(b <= a for a, b in zip(taus, taus[1:])):
            raise ValueError(f"taus must be strictly increasing within (0, 1), got {taus}")
        self.taus = taus
        if self.engine not in ("vb", "mcmc"):
            raise ValueError(f"engine must be 'vb' or 'mcmc', got {self.engine!r}")

    def engine_config(self):
        if self.engine == "mcmc":
            return McmcConfig(n_iterations=self.iterations, burn_in=self.burn_in,
                              thin=self.thin, seed=self.seed, v_method=self.v_method)
        return VbConfig(max_iterations=self.max_iterations, tolerance=self.tolerance,
                        seed=self.seed)

    def to_dict(self) -> dict:
        # execution details (output dir, parallelism) are recorded in
        # timings.json; including them here would break the byte-identity of
        # report.json across runs and parallelism degrees
        d = {
            "input": self.input, "engine": self.engine,
            "taus": list(self.taus), "threshold": self.threshold,
            "seed": self.seed,
            "priors": {"a0": self.priors.a0, "b0": self.priors.b0,
                       "a1": self.priors.a1, "b1": self.priors.b1,
                       "sigma_beta2": self.priors.sigma_beta2,
                       "fix_t": self.priors.fix_t},
        }
        if self.engine == "mcmc":
            d["mcmc"] = {"iterations": self.iterations, "burn_in": self.burn_in,
                         "thin": self.thin, "v_method": self.v_method}
        else:
            d["vb"] = {"max_iterations": self.max_iterations, "tolerance": self.tolerance}
        return d


_CONFIG_KEYS = {
    "input": str, "output": str, "engine": str, "taus": "taus",
    "threshold": float, "seed": int, "jobs": int,
    "a0": float, "b0": float, "a1": float, "b1": float,
    "sigma_beta2": float, "fix_t": float,
    "iterations": int, "burn_in": int, "thin": int, "v_method": str,
    "max_iterations": int, "tolerance": float,
}


def parse_config_file(path) -> dict:
    """Parse a `key = value` file; lists are comma-separated, # starts a comment."""
    out = {}
    with open(path) as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}: line {ln}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in _CONFIG_KEYS:
                raise ValueError(f"{path}: line {ln}: unknown key {key!r}")
            kind = _CONFIG_KEYS[key]
            if kind == "taus":
                out[key] = tuple(float(v) for v in value.split(","))
            else:
                out[key] = kind(value)
    return out


def build_run_config(config_path=None, **overrides) -> RunConfig:
    merged: dict = {}
    if config_path is not None:
        merged.update(parse_config_file(config_path))
    merged.update({k: v for k, v in overrides.items() if v is not None})
    prior_kwargs = {k: merged.pop(k) for k in ("a0", "b0", "a1", "b1", "sigma_beta2", "fix_t")
                    if k in merged}
    cfg = RunConfig(**merged)
    if prior_kwargs:
        cfg.priors = PriorConfig(**{**vars(cfg.priors), **prior_kwargs})
    return cfg


# ------------------------------------------------------------- fit command

def build_report_dict(report: FitReport, dataset: Dataset) -> dict:
    return {
        "config": report.config,
        "engine": report.engine,
        "n": dataset.n,
        "p": dataset.p,
        "column_names": list(dataset.column_names),
        "nodes": [r.to_dict() for r in report.posteriors],
        "edges": [{
            "node_i": report.graph.node_names[i - 1],
            "node_j": report.graph.node_names[j - 1],
            "sign": report.graph.signs[(i, j)],
        } for (i, j) in report.graph.edges()],
    }


def run_fit(cfg: RunConfig) -> FitReport:
    raw = load_csv(cfg.input)
    data = standardize(raw)
    grid = QuantileGrid.from_taus(cfg.taus)
    start = time.perf_counter()
    posteriors = fit_all_nodes(data, grid, cfg.priors, cfg.engine,
                               cfg.engine_config(), jobs=cfg.jobs)
    total = time.perf_counter() - start
    graph = assemble_graph(posteriors, threshold=cfg.threshold,
                           node_names=data.column_names)
    report = FitReport(posteriors=posteriors, graph=graph, engine=cfg.engine,
                       total_wall_time=total, config=cfg.to_dict())

    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    write_adjacency_csv(graph, out / "adjacency.csv")
    write_edges_tsv(graph, posteriors, out / "edges.tsv")
    write_dot(graph, out / "graph.dot")
    dump_json(build_report_dict(report, data), out / "report.json")
    # wall times vary run to run, so they live outside the deterministic report
    dump_json({
        "output": cfg.output,
        "jobs": cfg.jobs,
        "total_seconds": total,
        "nodes": [{"node_index": r.node_index, "seconds": r.wall_time}
                  for r in posteriors],
    }, out / "timings.json")
    return report


# ------------------------------------------------------------------- CLI

@click.group()
def main():
    """Sparse graphical models by Bayesian multi-quantile neighborhood selection."""


def _taus_option(_, __, value):
    if value is None:
        return None
    return tuple(float(v) for v in value.split(","))


@main.command("fit")
@click.option("--input", "-i", "input_", type=click.Path(exists=True, dir_okay=False),
              required=True, help="Input data CSV (header + numeric rows).")
@click.option("--out", "-o", "output", type=click.Path(file_okay=False), default=".",
              help="Output directory.")
@click.option("--engine", type=click.Choice(["vb", "mcmc"]), default=None)
@click.option("--taus", callback=_taus_option, default=None,
              help="Comma-separated quantile levels, e.g. 0.3,0.5,0.7.")
@click.option("--threshold", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--jobs", type=int, default=None, help="Concurrent node fits.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="key = value config file; flags override it.")
@click.option("--fix-t", "fix_t", type=float, default=None)
@click.option("--iterations", type=int, default=None, help="MCMC chain length.")
@click.option("--burn-in", "burn_in", type=int, default=None)
@click.option("--tolerance", type=float, default=None, help="VB stop tolerance.")
def cmd_fit(input_, output, engine, taus, threshold, seed, jobs, config_path,
            fix_t, iterations, burn_in, tolerance):
    """Fit the graph and write adjacency.csv, edges.tsv, graph.dot, report.json."""
    try:
        cfg = build_run_config(config_path, input=input_, output=output, engine=engine,
                               taus=taus, threshold=threshold, seed=seed, jobs=jobs,
                               fix_t=fix_t, iterations=iterations, burn_in=burn_in,
                               tolerance=tolerance)
        report = run_fit(cfg)
    except Exception as exc:   # noqa: BLE001 - CLI boundary
        raise click.ClickException(str(exc)) from exc
    click.echo(f"fit complete: {len(report.graph.edges())} edges among "
               f"{report.graph.p} nodes -> {cfg.output}")


@main.command("simulate")
@click.argument("spec_name", type=click.Choice(["example1", "example2", "pgtn"]))
@click.option("--n", type=int, default=None,
              help="Sample count (default 200; 100 for pgtn).")
@click.option("--seed", type=int, default=0)
@click.option("--out", "-o", type=click.Path(file_okay=False), default=".")
def cmd_simulate(spec_name, n, seed, out):
    """Generate a simulation dataset plus its ground-truth edge list."""
    try:
        if spec_name == "example1":
            sim = gen_example1(n if n is not None else 200, seed)
        elif spec_name == "example2":
            sim = gen_example2(n if n is not None else 200, seed)
        else:
            sim = gen_example2(n if n is not None else 100, seed, extra_noise_nodes=90)
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_dataset_csv(sim.dataset, out_dir / "data.csv")
        write_truth_edges(sim.truth, sim.moralization_edges, out_dir / "truth_edges.tsv")
    except Exception as exc:   # noqa: BLE001
        raise click.ClickException(str(exc)) from exc
    click.echo(f"wrote {sim.dataset.n}x{sim.dataset.p} dataset and "
               f"{len(sim.truth.edges())} truth edges -> {out}")


def parse_node_spec(spec: str, node_names) -> tuple:
    """Parse a node list like '1,2,4' / '11-20' / 'X1,X2' into 1-based indices."""
    index = {name: k + 1 for k, name in enumerate(node_names)}
    nodes = []
    for token in spec.split(","):
        token = token.strip()
        if not token:
            continue
        if "-" in token and not token.lstrip("-").isalpha():
            lo, hi = token.split("-", 1)
            nodes.extend(range(int(lo), int(hi) + 1))
        elif token.isdigit():
            nodes.append(int(token))
        elif token in index:
            nodes.append(index[token])
        else:
            raise ValueError(f"unknown node {token!r} in partition spec")
    bad = [k for k in nodes if not 1 <= k <= len(node_names)]
    if bad:
        raise ValueError(f"node indices out of range: {bad}")
    return tuple(nodes)


@main.command("eval")
@click.option("--fitted", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Fitted adjacency.csv.")
@click.option("--truth", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Truth edge-list TSV.")
@click.option("--g1", default="", help="First subgraph nodes, e.g. 1,2,4,6,7,9.")
@click.option("--g2", default="", help="Second subgraph nodes, e.g. 11-20.")
@click.option("--out", "-o", type=click.Path(dir_okay=False), default="metrics.json")
def cmd_eval(fitted, truth, g1, g2, out):
    """Compare a fitted adjacency against a truth edge list."""
    try:
        fitted_graph = load_adjacency_csv(fitted)
        truth_graph, moral = load_truth_edges(truth, fitted_graph.node_names)
        g1_nodes = parse_node_spec(g1, fitted_graph.node_names)
        g2_nodes = parse_node_spec(g2, fitted_graph.node_names)
        metrics = evaluate(fitted_graph, truth_graph, g1_nodes, g2_nodes)
        payload = {"fdr_count": metrics.fdr_count, "e1": metrics.e1,
                   "e2": metrics.e2, "e3": metrics.e3,
                   "e2_excluding_moralization": None}
        if moral:
            trimmed = truth_graph.adjacency.copy()
            for (i, j) in moral:
                trimmed[i - 1, j - 1] = trimmed[j - 1, i - 1] = 0
            ii, jj = np.nonzero(np.triu(trimmed, k=1))
            signs = {(int(a) + 1, int(b) + 1): "inconclusive" for a, b in zip(ii, jj)}
            alt = evaluate(fitted_graph,
                           Graph(adjacency=trimmed, signs=signs,
                                 node_names=truth_graph.node_names),
                           g1_nodes, g2_nodes)
            payload["e2_excluding_moralization"] = alt.e2
        dump_json(payload, out)
    except Exception as exc:   # noqa: BLE001
        raise click.ClickException(str(exc)) from exc
    click.echo(f"fdr_count={payload['fdr_count']} e1={payload['e1']} "
               f"e2={payload['e2']} e3={payload['e3']} "
               f"e2_excluding_moralization={payload['e2_excluding_moralization']}")


@main.command("diag")
@click.option("--data", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--report", "report_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--out", "-o", type=click.Path(dir_okay=False), default="residuals.csv")
def cmd_diag(data, report_path, out):
    """Mean check-loss residual of a fit, per node and quantile."""
    try:
        d = load_csv(data)
        rep = load_json(report_path)
        if rep["p"] != d.p:
            raise ValueError(f"report covers {rep['p']} nodes but data has {d.p} columns")
        posteriors = [NeighborhoodPosterior.from_dict(nd) for nd in rep["nodes"]]
        grid = QuantileGrid.from_taus(rep["config"]["taus"])
        threshold = float(rep["config"]["threshold"])
        table = per_node_residuals(standardize(d), posteriors, grid, threshold)
        with open(out, "w", newline="\n") as fh:
            fh.write("node,tau,mean_residual\n")
            for k in range(d.p):
                for l, tau in enumerate(grid.taus):
                    fh.write(f"{d.column_names[k]},{_fmt(tau)},{_fmt(table[k, l])}\n")
        overall = float(table.mean())
    except Exception as exc:   # noqa: BLE001
        raise click.ClickException(str(exc)) from exc
    click.echo(f"mean check-loss residual: {_fmt(overall)}")


if __name__ == "__main__":
    sys.exit(main())
