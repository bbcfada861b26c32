"""Command-line experiment driver.

Every experiment is described by one JSON document::

    rsb-bench sweep --config sweep.json --out results/ --threads 1 --seed 7

Outputs go to ``--out``: CSV tables with a gnuplot ``.dat`` twin, JSON
reports, and a ``<kind>.log`` sidecar holding solver residual traces. Exit
status is 0 on success, 2 for configuration errors and 3 when a solver did
not certify its result.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .channels import PhaseMixture, continuous_dephasing_kraus, correlated_dephasing
from .circuits import correlated_ec_circuit, gate_reports, teleported_gate
from .codes import single_mode_binomial, trivial_code, two_mode_binomial
from .fock import FockSpace, random_density_matrix
from .klrecovery import bare_binomial, first_order_dephasing, first_order_loss, kl_check_first_order, logical_fidelity
from .optrec import SolverOptions, SweepRecord, optimal_recovery, physical_channel
from .phasedist import PhaseGrid, default_landscape_axes, distinguishability, dual_distributions, infidelity_landscape

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3
KINDS = ("kl-check", "sweep", "sdp", "landscape", "phase-dist", "corr-demo", "gates")
FAMILIES = ("two_mode_binomial", "single_mode_binomial", "trivial")
CHANNELS = ("loss", "dephasing", "combined", "correlated")

log = logging.getLogger("rsbcodes.bench")


# ---------------------------------------------------------------- config

@dataclass
class CodeSpec:
    family: str = "two_mode_binomial"
    N: int = 2
    K: int = 2
    d: int = 2
    delta: float | None = None
    phi: float | None = None
    cutoff: int | None = None
    name: str | None = None

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if self.family == "trivial":
            return "trivial"
        return f"{self.family}_N{self.N}"

    def build(self):
        if self.family == "two_mode_binomial":
            return two_mode_binomial(self.N, self.delta, self.phi, cutoff=self.cutoff)
        if self.family == "single_mode_binomial":
            return single_mode_binomial(self.N, self.K, cutoff=self.cutoff)
        return trivial_code(self.cutoff or 2)


@dataclass
class ChannelSpec:
    kind: str = "dephasing"
    strengths: list = field(default_factory=lambda: [1e-3])
    sigma: float = 0.0
    nodes: int = 41


@dataclass
class SolverSpec:
    tol: float = 1e-8
    max_iters: int = 20000
    seed: int = 0
    dim_cap: int = 400
    path: str = "block"

    def options(self):
        return SolverOptions(tol=self.tol, max_iters=self.max_iters, seed=self.seed, dim_cap=self.dim_cap)


@dataclass
class ExperimentConfig:
    kind: str
    code: CodeSpec = field(default_factory=CodeSpec)
    codes: list = field(default_factory=list)
    channel: ChannelSpec = field(default_factory=ChannelSpec)
    solver: SolverSpec = field(default_factory=SolverSpec)
    output: str = "results"
    threads: int = 1
    points: int = 17
    grid: int = 64
    theta: list = field(default_factory=lambda: [0.0, 0.0])
    samples: int = 10

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        errors = []
        doc = dict(doc)
        known = {f.name for f in fields(cls)}
        for key in sorted(set(doc) - known):
            errors.append({"field": key, "error": "unknown field"})
        if "kind" not in doc:
            errors.append({"field": "kind", "error": "missing"})
            raise ConfigError(errors)

        def sub(klass, value, name):
            if value is None:
                return klass()
            if not isinstance(value, dict):
                errors.append({"field": name, "error": "expected an object"})
                return klass()
            names = {f.name for f in fields(klass)}
            for key in sorted(set(value) - names):
                errors.append({"field": f"{name}.{key}", "error": "unknown field"})
            return klass(**{k: v for k, v in value.items() if k in names})

        cfg = cls(
            kind=doc["kind"],
            code=sub(CodeSpec, doc.get("code"), "code"),
            codes=[sub(CodeSpec, c, f"codes[{i}]") for i, c in enumerate(doc.get("codes", []))],
            channel=sub(ChannelSpec, doc.get("channel"), "channel"),
            solver=sub(SolverSpec, doc.get("solver"), "solver"),
            **{k: doc[k] for k in ("output", "threads", "points", "grid", "theta", "samples") if k in doc},
        )
        errors.extend(cfg.validate())
        if errors:
            raise ConfigError(errors)
        return cfg

    def validate(self) -> list[dict]:
        errors = []

        def bad(name, msg):
            errors.append({"field": name, "error": msg})

        if self.kind not in KINDS:
            bad("kind", f"must be one of {list(KINDS)}")
        for name, spec in [("code", self.code)] + [(f"codes[{i}]", c) for i, c in enumerate(self.codes)]:
            if spec.family not in FAMILIES:
                bad(f"{name}.family", f"must be one of {list(FAMILIES)}")
            if not isinstance(spec.N, int) or spec.N < 1:
                bad(f"{name}.N", "must be a positive integer")
            elif spec.family == "two_mode_binomial" and spec.N % 2:
                bad(f"{name}.N", "two-mode codes need even N")
            if spec.cutoff is not None and (not isinstance(spec.cutoff, int) or spec.cutoff < 2):
                bad(f"{name}.cutoff", "must be an integer >= 2")
        ch = self.channel
        if ch.kind not in CHANNELS:
            bad("channel.kind", f"must be one of {list(CHANNELS)}")
        s = ch.strengths
        if not isinstance(s, list) or not s or not all(isinstance(x, (int, float)) for x in s):
            bad("channel.strengths", "must be a non-empty list of numbers")
        else:
            if any(x < 0 or not math.isfinite(x) for x in s):
                bad("channel.strengths", "must be finite and non-negative")
            if any(b <= a for a, b in zip(s, s[1:])):
                bad("channel.strengths", "must be strictly increasing")
        if ch.sigma < 0:
            bad("channel.sigma", "must be non-negative")
        if ch.nodes < 1:
            bad("channel.nodes", "must be positive")
        sv = self.solver
        if not sv.tol > 0:
            bad("solver.tol", "must be positive")
        if not isinstance(sv.max_iters, int) or sv.max_iters < 1:
            bad("solver.max_iters", "must be a positive integer")
        if sv.path not in ("block", "support", "dense"):
            bad("solver.path", "must be block, support or dense")
        if not isinstance(sv.seed, int) or sv.seed < 0 or sv.seed >= 2 ** 64:
            bad("solver.seed", "must be an unsigned 64-bit integer")
        if not isinstance(self.threads, int) or self.threads < 1:
            bad("threads", "must be a positive integer")
        if not isinstance(self.points, int) or self.points < 2:
            bad("points", "must be an integer >= 2")
        if not isinstance(self.grid, int) or self.grid < 2:
            bad("grid", "must be an integer >= 2")
        if not (isinstance(self.theta, list) and len(self.theta) == 2):
            bad("theta", "must be a pair of angles")
        if self.kind == "sweep" and not self.codes:
            bad("codes", "sweep needs at least one code")
        return errors


class ConfigError(ValueError):
    def __init__(self, errors: list[dict]):
        super().__init__(json.dumps(errors))
        self.errors = errors


class SolverFailure(RuntimeError):
    pass


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError([{"field": "<file>", "error": str(exc)}]) from exc
    if not isinstance(doc, dict):
        raise ConfigError([{"field": "<file>", "error": "expected a JSON object"}])
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "seed":
            doc.setdefault("solver", {})["seed"] = value
        else:
            doc[key] = value
    return ExperimentConfig.from_dict(doc)


# ---------------------------------------------------------------- tables

def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    if x is None:
        return ""
    return str(x)


def emit_plotdata(rows, path, columns) -> tuple[Path, Path]:
    """Write ``rows`` (dataclasses or dicts) to ``path`` as CSV and to ``path.dat`` for gnuplot."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table = [[fmt(_get(r, c)) for c in columns] for r in rows]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        w.writerows(table)
    dat = path.with_suffix(".dat")
    with dat.open("w") as fh:
        fh.write("# " + " ".join(columns) + "\n")
        for row in table:
            fh.write(" ".join(v if v else "NaN" for v in row) + "\n")
    return path, dat


def _get(row, column):
    return row[column] if isinstance(row, dict) else getattr(row, column)


def read_table(path, record_type=None) -> list:
    """Parse a CSV written by :func:`emit_plotdata`; rebuild ``record_type`` instances if given."""
    with Path(path).open() as fh:
        rows = list(csv.DictReader(fh))
    if record_type is None:
        return rows
    types = {f.name: f.type for f in fields(record_type)}
    out = []
    for row in rows:
        kwargs = {}
        for name, text in row.items():
            kwargs[name] = _parse(text, str(types.get(name, "str")))
        out.append(record_type(**kwargs))
    return out


def read_dat(path) -> list[list[str]]:
    with Path(path).open() as fh:
        return [line.split() for line in fh if not line.startswith("#")]


def _parse(text: str, type_name: str):
    if "float" in type_name:
        return float(text)
    if "int" in type_name:
        return None if text == "" else int(text)
    return text


def _write_json(path: Path, doc) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


# ---------------------------------------------------------------- experiments

def _mixture(spec: ChannelSpec):

    return PhaseMixture.gaussian(spec.sigma, spec.nodes) if spec.sigma > 0 else PhaseMixture.point()


def _channel_for(code, spec: ChannelSpec, strength: float):

    if spec.kind == "correlated":
        return correlated_dephasing(code.space, _mixture(spec))
    return physical_channel(code, spec.kind, strength)


def run_kl_check(cfg: ExperimentConfig, out: Path) -> int:

    spec = cfg.code
    if spec.family != "two_mode_binomial":
        raise ConfigError([{"field": "code.family", "error": "kl-check uses two-mode binomial codes"}])
    N = spec.N
    delta = math.pi / 4 if spec.delta is None else spec.delta
    phi = math.pi / (2 * N) if spec.phi is None else spec.phi
    space = FockSpace(2, spec.cutoff or 3 * N + 1)
    code = bare_binomial(space, N)
    s = cfg.channel.strengths[0]
    if cfg.channel.kind == "loss":
        ops = first_order_loss(space, delta, s, s, N)
    elif cfg.channel.kind == "dephasing":
        ops = first_order_dephasing(space, delta, phi, s, s, N)
    else:
        raise ConfigError([{"field": "channel.kind", "error": "kl-check supports loss or dephasing"}])
    report = kl_check_first_order(code, ops)
    doc = {"code": spec.label, "N": N, "delta": delta, "phi": phi, "channel": cfg.channel.kind, "strength": s,
           "verdict": "satisfied" if report.satisfied else "violated", "deviation": report.deviation,
           "tolerance": report.tolerance, "labels": list(report.labels),
           "worst_pair": list(report.worst_pair) if report.worst_pair else None}
    _write_json(out / "kl-check.json", doc)
    log.info("kl-check %s deviation %.3e", doc["verdict"], report.deviation)
    return EXIT_OK


SWEEP_COLUMNS = ["code", "family", "N", "K", "delta", "phi", "channel", "strength", "F_e", "F_avg",
                 "feasibility", "residual", "iters"]


def _sweep_point(args):

    spec, chspec, strength, solver = args
    code = spec.build()
    ch = _channel_for(code, chspec, strength)
    if code.family == "trivial":
        fe, fa = logical_fidelity(code, ch)
        return SweepRecord(spec.label, code.family, code.N, code.K, 0.0, 0.0, chspec.kind, strength,
                           fe, fa, 0.0, 0.0, 0), True
    log.debug("solving %s at strength %.6g", spec.label, strength)
    res = optimal_recovery(code, ch, solver.options(), solver.path)
    rec = SweepRecord(spec.label, code.family, code.N, code.K, code.angles[0], code.angles[1], chspec.kind,
                      strength, res.fidelity, res.average_fidelity, res.feasibility_defect,
                      res.optimality_residual, res.iterations)
    return rec, res.converged


def _pool_map(fn, jobs, threads: int):
    if threads <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, jobs))


def run_sweep(cfg: ExperimentConfig, out: Path) -> int:
    jobs = [(spec, cfg.channel, float(s), cfg.solver) for spec in cfg.codes for s in cfg.channel.strengths]
    results = _pool_map(_sweep_point, jobs, cfg.threads)
    records = [r for r, _ in results]
    emit_plotdata(records, out / "sweep.csv", SWEEP_COLUMNS)
    for rec, ok in results:
        log.info("%s %s %.3g F_e %.12g residual %.3g converged %s", rec.code, rec.channel, rec.strength,
                 rec.F_e, rec.residual, ok)
    return EXIT_OK if all(ok for _, ok in results) else EXIT_SOLVER


def run_sdp(cfg: ExperimentConfig, out: Path) -> int:
    results = [_sweep_point((cfg.code, cfg.channel, float(s), cfg.solver)) for s in cfg.channel.strengths]
    doc = [asdict(r) | {"converged": ok} for r, ok in results]
    _write_json(out / "sdp.json", doc)
    return EXIT_OK if all(ok for _, ok in results) else EXIT_SOLVER


LANDSCAPE_COLUMNS = ["delta", "phi", "infidelity"]


def _landscape_row(args):

    N, K, g, delta, phis, solver = args
    return infidelity_landscape(N, K, g, [delta], phis, solver.options())


def run_landscape(cfg: ExperimentConfig, out: Path) -> int:

    spec = cfg.code
    deltas, phis = default_landscape_axes(spec.N, cfg.points)
    g = cfg.channel.strengths[0]
    rows = _pool_map(_landscape_row, [(spec.N, spec.K, g, float(d), phis, cfg.solver) for d in deltas], cfg.threads)
    points = [p for row in rows for p in row]
    emit_plotdata(points, out / "landscape.csv", LANDSCAPE_COLUMNS)
    worst = max(p.residual for p in points)
    log.info("landscape N=%d gamma_t=%.3g worst residual %.3g", spec.N, g, worst)
    ok = worst <= 1e-6 and max(p.feasibility for p in points) <= 1e-8
    return EXIT_OK if ok else EXIT_SOLVER


def run_phase_dist(cfg: ExperimentConfig, out: Path) -> int:

    code = cfg.code.build()
    grid = PhaseGrid(cfg.grid)
    t1, t2 = (float(x) for x in cfg.theta)
    kraus = None
    if t1 or t2:
        # rotation error on the rotated modes, expressed on the physical words
        u = code.unitary
        kraus = u @ continuous_dephasing_kraus(code.space, t1, t2, *code.angles) @ u.conj().T
    plus, minus = dual_distributions(code, grid, kraus)
    cols = ["phi1", "phi2", "p"]
    for name, dist in (("plus", plus), ("minus", minus)):
        rows = [dict(zip(cols, r)) for r in dist.rows()]
        emit_plotdata(rows, out / f"phase_{name}.csv", cols)
    tv, bc = distinguishability(plus, minus)
    _write_json(out / "phase-dist.json", {"code": cfg.code.label, "grid": grid.G, "theta": [t1, t2],
                                          "total_variation": tv, "bhattacharyya": bc})
    return EXIT_OK


def run_corr_demo(cfg: ExperimentConfig, out: Path) -> int:

    code = cfg.code.build()
    mixture = _mixture(cfg.channel)
    rng = np.random.default_rng(cfg.solver.seed)
    fids = []
    for _ in range(cfg.samples):
        rho = random_density_matrix(2, rng, 1)
        fids.append(correlated_ec_circuit(code, code, mixture, rho).fidelity)
    res = optimal_recovery(code, _channel_for(code, ChannelSpec("correlated", [0.0], cfg.channel.sigma,
                                                                cfg.channel.nodes), 0.0),
                           cfg.solver.options(), cfg.solver.path)
    doc = {"code": cfg.code.label, "sigma": cfg.channel.sigma, "nodes": cfg.channel.nodes,
           "samples": cfg.samples, "fidelity": min(fids), "fidelities": fids, "sdp_fidelity": res.fidelity,
           "sdp_residual": res.optimality_residual}
    _write_json(out / "corr-demo.json", doc)
    return EXIT_OK if res.converged else EXIT_SOLVER


def run_gates(cfg: ExperimentConfig, out: Path) -> int:

    code = cfg.code.build()
    rng = np.random.default_rng(cfg.solver.seed)
    reports = [r.to_dict() for r in gate_reports(code)]
    tele = []
    for kind in ("H", "T"):
        worst = 0.0
        for _ in range(cfg.samples):
            psi = rng.normal(size=2) + 1j * rng.normal(size=2)
            worst = max(worst, max(b.deviation for b in teleported_gate(kind, code, psi)))
        tele.append({"gate": kind, "worst_deviation": worst})
    _write_json(out / "gates.json", {"code": cfg.code.label, "gates": reports, "teleported": tele})
    return EXIT_OK


RUNNERS = {
    "kl-check": run_kl_check,
    "sweep": run_sweep,
    "sdp": run_sdp,
    "landscape": run_landscape,
    "phase-dist": run_phase_dist,
    "corr-demo": run_corr_demo,
    "gates": run_gates,
}


def run(cfg: ExperimentConfig) -> int:
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out / f"{cfg.kind}.log", mode="w")
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s %(message)s"))
    root = logging.getLogger("rsbcodes")
    root.addHandler(handler)
    root.setLevel(logging.DEBUG)
    try:
        status = RUNNERS[cfg.kind](cfg, out)
    finally:
        root.removeHandler(handler)
        handler.close()
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rsb-bench", description=__doc__.splitlines()[0])
    p.add_argument("kind", choices=KINDS)
    p.add_argument("--config", required=True, help="JSON experiment description")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--threads", type=int, help="worker processes for grid points")
    p.add_argument("--seed", type=int, help="seed for random inputs")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, {"output": args.out, "threads": args.threads, "seed": args.seed,
                                        "kind": args.kind})
    except ConfigError as exc:
        print(json.dumps({"errors": exc.errors}, indent=2), file=sys.stderr)
        return EXIT_CONFIG
    try:
        status = run(cfg)
    except ConfigError as exc:
        print(json.dumps({"errors": exc.errors}, indent=2), file=sys.stderr)
        return EXIT_CONFIG
    if status == EXIT_SOLVER:
        print("solver did not certify every instance; see the .log sidecar", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
