"""Experiment runner: spectrum sweeps, PCG solves and golden-value suites,
with CSV/JSON output mirroring the reference table columns."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from importlib import resources

import numpy as np

from . import __version__, geometry, kernel, pcg, precond, spectrum
from .linalg import NotPositiveDefinite
from .rskel import ProxyConfig
from .toeplitz import ToeplitzMatvec

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_GOLDEN = 3

SPECTRUM_COLUMNS = [
    "N", "D", "M", "kind", "overlap_width",
    "lambda_max", "lambda_min", "multiplicity_at_max", "error",
]
SOLVE_COLUMNS = [
    "N", "M", "D", "S", "t_f", "m_f", "t_s", "n_it", "t_pcg",
    "achieved_residual", "error",
]
TIMING_COLUMNS = {"t_f", "t_s", "t_pcg"}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    subcommand: str
    dim: int = 2
    n: str = ""
    m: str = ""
    precond: str = "cbd"
    backend: str = "exact"
    eps: float = 1e-3
    overlap: str = "1"
    tol: float = 1e-12
    max_iters: int = 5000
    seed: int = 0
    rhs: str = "random"
    out: str = ""
    format: str = "csv"
    jobs: int = 1
    lattice: str = "auto"
    dense_limit: int = 4096


def _int_list(text: str) -> list[int]:
    text = text.strip()
    if not text:
        return []
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from exc


def _expand_rows(cfg: ExperimentConfig) -> list[dict]:
    ns = _int_list(cfg.n)
    ms = _int_list(cfg.m)
    ws = _int_list(cfg.overlap)
    kinds = [k.strip().lower() for k in cfg.precond.split(",") if k.strip()]
    if not ns:
        return []
    if not kinds:
        raise ConfigError("at least one --precond kind is required")
    length = len(ns)

    def broadcast(vals, name):
        if not vals:
            raise ConfigError(f"--{name} is required")
        if len(vals) == 1:
            return vals * length
        if len(vals) != length:
            raise ConfigError(f"--{name} list length {len(vals)} != --n length {length}")
        return vals

    ms = broadcast(ms if ms else [0], "m")
    ws = broadcast(ws, "overlap")
    rows = []
    for kind in kinds:
        for n, m, w in zip(ns, ms, ws):
            rows.append(dict(n=n, m=m, overlap=w, kind=kind))
    return rows


def _operator_for(cfg: ExperimentConfig, n: int) -> kernel.KernelOperator:
    grid = geometry.build_grid(cfg.dim, n)
    lattice = None if cfg.lattice == "auto" else cfg.lattice
    return kernel.build_operator(grid, lattice=lattice)


def _build_precond(cfg, op, row):
    kind = row["kind"]
    if kind == precond.NONE:
        return precond.identity(op.n)
    if kind == precond.RS_GLOBAL:
        part = geometry.build_partitioning(op.grid, row["m"])
        return precond.rs_global(op, part, eps=cfg.eps, proxy=ProxyConfig())
    if kind not in geometry.KINDS:
        raise ConfigError(f"unknown preconditioner kind {kind!r}")
    decomp = geometry.build_decomposition(op.grid, row["m"], row["overlap"], kind)
    return precond.from_decomposition(
        op, decomp, backend=cfg.backend, eps=cfg.eps,
        dense_limit=cfg.dense_limit,
    )


def _spectrum_row(cfg: ExperimentConfig, row: dict) -> dict:
    out = {c: "" for c in SPECTRUM_COLUMNS}
    out.update(kind=row["kind"], overlap_width=row["overlap"])
    try:
        op = _operator_for(cfg, row["n"])
        out["N"] = op.n
        out["M"] = row["m"] ** cfg.dim if row["m"] else ""
        pre = _build_precond(cfg, op, row)
        out["D"] = pre.n_subdomains
        rep = spectrum.preconditioned_spectrum(op, pre, dense_limit=cfg.dense_limit)
        out["lambda_max"] = rep.lambda_max
        out["lambda_min"] = rep.lambda_min
        out["multiplicity_at_max"] = rep.multiplicity_at_max
    except (NotPositiveDefinite, ValueError, RuntimeError) as exc:
        out["error"] = str(exc)
    return out


def _load_rhs(cfg: ExperimentConfig, matvec, n: int) -> np.ndarray:
    if cfg.rhs.startswith("file:"):
        path = cfg.rhs[5:]
        try:
            vals = np.loadtxt(path, dtype=float, ndmin=1)
        except OSError as exc:
            raise ConfigError(f"cannot read rhs file {path!r}: {exc}") from exc
        if vals.shape != (n,):
            raise ConfigError(f"rhs file has {vals.size} values, expected {n}")
        return vals
    f, _ = pcg.make_rhs(matvec, n, mode=cfg.rhs, seed=cfg.seed)
    return f


def _solve_row(cfg: ExperimentConfig, row: dict) -> dict:
    out = {c: "" for c in SOLVE_COLUMNS}
    try:
        op = _operator_for(cfg, row["n"])
        out["N"] = op.n
        out["M"] = row["m"] ** cfg.dim if row["m"] else ""
        matvec = ToeplitzMatvec(op)
        pre = _build_precond(cfg, op, row)
        out["D"] = pre.n_subdomains
        stats = pre.stats()
        out["S"] = stats["S"]
        out["t_f"] = pre.t_factor
        out["m_f"] = float(f"{stats['memory_bytes'] / 1e9:.3g}")
        f = _load_rhs(cfg, matvec, op.n)
        _, rep = pcg.solve(matvec, pre, f, tol=cfg.tol, max_iters=cfg.max_iters)
        out["t_s"] = rep.t_s
        out["n_it"] = rep.n_it
        out["t_pcg"] = rep.t_pcg
        out["achieved_residual"] = rep.achieved_residual
    except ConfigError:
        raise
    except (NotPositiveDefinite, ValueError, RuntimeError, FloatingPointError) as exc:
        out["error"] = str(exc)
    return out


def _run_rows(cfg: ExperimentConfig, rows: list[dict], worker) -> list[dict]:
    if cfg.jobs > 1 and len(rows) > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            return list(pool.map(lambda r: worker(cfg, r), rows))
    return [worker(cfg, r) for r in rows]


def _emit(cfg: ExperimentConfig, columns: list[str], rows: list[dict]) -> None:
    echo = asdict(cfg)
    if cfg.format == "json":
        payload = {"config": echo, "version": __version__, "rows": rows}
        text = json.dumps(payload, indent=2, default=str) + "\n"
    else:
        buf = io.StringIO()
        for key, val in echo.items():
            buf.write(f"# {key}={val}\n")
        buf.write(f"# version={__version__}\n")
        writer = csv.DictWriter(buf, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow({c: row.get(c, "") for c in columns})
        text = buf.getvalue()
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def run_spectrum(cfg: ExperimentConfig) -> int:
    rows = _run_rows(cfg, _expand_rows(cfg), _spectrum_row)
    _emit(cfg, SPECTRUM_COLUMNS, rows)
    return EXIT_NUMERICAL if any(r.get("error") for r in rows) else EXIT_OK


def run_solve(cfg: ExperimentConfig) -> int:
    rows = _run_rows(cfg, _expand_rows(cfg), _solve_row)
    _emit(cfg, SOLVE_COLUMNS, rows)
    return EXIT_NUMERICAL if any(r.get("error") for r in rows) else EXIT_OK


def _load_goldens() -> dict:
    try:
        text = resources.files("iedd").joinpath("goldens.json").read_text()
    except (FileNotFoundError, ModuleNotFoundError) as exc:
        raise ConfigError("missing golden file goldens.json") from exc
    return json.loads(text)


def _golden_spectrum_case(suite: dict, case: dict) -> tuple[bool, str]:
    cfg = ExperimentConfig(subcommand="spectrum", dim=case["dim"])
    op = _operator_for(cfg, case["n"])
    decomp = geometry.build_decomposition(
        op.grid, case["m"], case["overlap"], case["kind"]
    )
    pre = precond.from_decomposition(op, decomp, backend="exact", dense_limit=op.n)
    rep = spectrum.preconditioned_spectrum(op, pre, dense_limit=op.n)
    tol = suite["tol"]
    msgs = []
    ok = True
    for key, got in (("lambda_max", rep.lambda_max), ("lambda_min", rep.lambda_min)):
        if key in case:
            err = abs(got - case[key])
            ok &= err <= tol
            msgs.append(f"{key}={got:.4f} (want {case[key]:.4f}, err {err:.1e})")
    return ok, ", ".join(msgs)


def _golden_lanczos_case(suite: dict, case: dict) -> tuple[bool, str]:
    cfg = ExperimentConfig(subcommand="spectrum", dim=case["dim"])
    op = _operator_for(cfg, case["n"])
    decomp = geometry.build_decomposition(
        op.grid, case["m"], case["overlap"], case["kind"]
    )
    pre = precond.from_decomposition(
        op, decomp, backend="exact", dense_limit=op.n,
        share_mirrored_subdomains=True,
    )
    matvec = ToeplitzMatvec(op)
    lam = spectrum.extremal_eigenvalue_lanczos(matvec, pre, op.n, which="min")
    err = abs(lam - case["lambda_min"])
    return err <= suite["tol"], (
        f"lambda_min={lam:.4f} (want {case['lambda_min']:.4f}, err {err:.1e})"
    )


def _golden_solve_case(suite: dict, case: dict) -> tuple[bool, str]:
    cfg = ExperimentConfig(
        subcommand="solve", dim=case["dim"], seed=suite.get("seed", 0),
        tol=suite.get("tol", 1e-12), rhs=suite.get("rhs", "random"),
    )
    op = _operator_for(cfg, case["n"])
    matvec = ToeplitzMatvec(op)
    decomp = geometry.build_decomposition(
        op.grid, case["m"], case["overlap"], case["kind"]
    )
    pre = precond.from_decomposition(op, decomp, backend="exact", dense_limit=op.n)
    f, _ = pcg.make_rhs(matvec, op.n, mode=cfg.rhs, seed=cfg.seed)
    _, rep = pcg.solve(matvec, pre, f, tol=cfg.tol, max_iters=cfg.max_iters)
    diff = abs(rep.n_it - case["n_it"])
    ok = diff <= suite["tol_iters"] and rep.converged
    return ok, f"n_it={rep.n_it} (want {case['n_it']} +-{suite['tol_iters']})"


def _golden_pairing_case(suite: dict, case: dict) -> tuple[bool, str]:
    grid = geometry.build_grid(case["dim"], case["n"])
    op = kernel.build_operator(grid, lattice=kernel.CELL)
    decomp = spectrum.two_halves_decomposition(grid)
    defect = spectrum.jacobi_pairing_check(op, decomp)
    return defect <= suite["tol"], f"pairing defect {defect:.2e}"


_GOLDEN_RUNNERS = {
    "spectrum": _golden_spectrum_case,
    "lanczos-min": _golden_lanczos_case,
    "solve": _golden_solve_case,
    "pairing": _golden_pairing_case,
}


def run_golden(suite_names: list[str]) -> int:
    goldens = _load_goldens()
    if not suite_names:
        raise ConfigError(
            "no golden suite named; available: " + ", ".join(sorted(goldens))
        )
    if suite_names == ["all"]:
        suite_names = sorted(goldens)
    failures = 0
    for name in suite_names:
        if name not in goldens:
            raise ConfigError(
                f"unknown golden suite {name!r}; available: " + ", ".join(sorted(goldens))
            )
        suite = goldens[name]
        runner = _GOLDEN_RUNNERS[suite["check"]]
        for case in suite["cases"]:
            try:
                ok, msg = runner(suite, case)
            except (NotPositiveDefinite, RuntimeError, ValueError) as exc:
                ok, msg = False, f"error: {exc}"
            label = " ".join(f"{k}={v}" for k, v in case.items())
            print(f"[{'PASS' if ok else 'FAIL'}] {name}: {label}: {msg}")
            failures += 0 if ok else 1
    print(f"golden: {failures} failure(s)")
    return EXIT_GOLDEN if failures else EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iedd",
        description="Domain-decomposition preconditioner experiments for the "
        "discretized volume integral equation",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in ("spectrum", "solve"):
        p = sub.add_parser(name)
        p.add_argument("--dim", type=int, choices=(2, 3), default=2)
        p.add_argument("--n", default="", help="comma list of grid sizes per dim")
        p.add_argument("--m", default="", help="comma list of partitions per dim")
        p.add_argument(
            "--precond", default="cbd",
            help="comma list from none,jacobi,schwarz,cbd,rs-global",
        )
        p.add_argument("--backend", choices=("exact", "rskel"), default="exact")
        p.add_argument("--eps", type=float, default=1e-3)
        p.add_argument("--overlap", default="1")
        p.add_argument("--tol", type=float, default=1e-12)
        p.add_argument("--max-iters", type=int, default=5000)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--rhs", default="random", help="random|noise|ones|file:PATH")
        p.add_argument("--out", default="")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--lattice", choices=("auto", "cell", "span"), default="auto")
        p.add_argument("--dense-limit", type=int, default=4096, dest="dense_limit")
    g = sub.add_parser("golden")
    g.add_argument("suites", nargs="*", help="golden suite names, or 'all'")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        if args.subcommand == "golden":
            return run_golden(args.suites)
        cfg = ExperimentConfig(
            subcommand=args.subcommand, dim=args.dim, n=args.n, m=args.m,
            precond=args.precond, backend=args.backend, eps=args.eps,
            overlap=args.overlap, tol=args.tol, max_iters=args.max_iters,
            seed=args.seed, rhs=args.rhs, out=args.out, format=args.format,
            jobs=args.jobs, lattice=args.lattice, dense_limit=args.dense_limit,
        )
        if args.subcommand == "spectrum":
            return run_spectrum(cfg)
        return run_solve(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NotPositiveDefinite, FloatingPointError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
