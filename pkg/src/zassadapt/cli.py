"""Command line experiment runner.

    zassadapt run --problem lattice --epsilon 1e-2 --grid-points 750 --tol 1e-7
    zassadapt reference --problem lattice --epsilon 1e-2 --grid-points 750
    zassadapt compare final.csv reference.csv
    zassadapt sweep --config base.json --defects classical,symmetrized --tols 1e-5,1e-6

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .controller import ControllerConfig, IntegrationSummary, MaxRejections, integrate, propagate_fixed
from .exponentials import LanczosConfig, NonConvergence
from .grid import l2_norm, make_grid
from .operators import SemiclassicalProblem, potential_from_samples, zero_potential
from .problems import ORACLE_MAX_M, PRESETS, WavePacketParams, build_problem, reference_solve, wave_packet
from .stepper import SCHEMES

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    problem: object = "lattice"
    epsilon: float = 1e-2
    M: int | None = None
    scheme: str = "zass6"
    defect: str = "classical"
    stepping: str = "adaptive"
    fixed_h: float | None = None
    tol: float = 1e-7
    alpha: float = 0.1
    h0: float = 1e-9
    h_min: float = 1e-12
    h_max: float = 1.0
    max_rejections: int = 20
    max_growth: float | None = 5.0
    lanczos_tol: float | None = None
    lanczos_m_max: int = 30
    t_final: float | None = None
    out_steps: str | None = "steps.csv"
    out_final: str | None = "final.csv"
    out_summary: str | None = "summary.json"

    def validate(self) -> "RunConfig":
        def bad(name, msg):
            raise ConfigError(f"{name}: {msg}")

        if isinstance(self.problem, str):
            if self.problem not in PRESETS:
                bad("problem", f"unknown preset {self.problem!r}; choose from {sorted(PRESETS)}")
        elif not isinstance(self.problem, dict):
            bad("problem", "must be a preset name or a custom problem object")
        if not (isinstance(self.epsilon, (int, float)) and self.epsilon > 0):
            bad("epsilon", f"must be positive, got {self.epsilon!r}")
        if self.M is not None and (int(self.M) != self.M or self.M < 2 or self.M % 2):
            bad("grid_points", f"must be an even integer >= 2, got {self.M!r}")
        if self.scheme not in SCHEMES:
            bad("scheme", f"must be one of {sorted(SCHEMES)}, got {self.scheme!r}")
        if self.defect not in ("classical", "symmetrized", "none"):
            bad("defect", f"must be classical, symmetrized or none, got {self.defect!r}")
        if self.stepping not in ("adaptive", "fixed"):
            bad("stepping", f"must be adaptive or fixed, got {self.stepping!r}")
        if self.stepping == "fixed" and not (self.fixed_h is not None and self.fixed_h > 0):
            bad("fixed_h", "fixed stepping requires a positive step")
        if self.stepping == "adaptive" and self.defect == "none":
            bad("defect", "adaptive stepping needs classical or symmetrized defect")
        if self.t_final is not None and not self.t_final >= 0:
            bad("t_final", f"must be non-negative, got {self.t_final}")
        if self.lanczos_tol is not None and not self.lanczos_tol > 0:
            bad("lanczos_tol", "must be positive")
        if self.stepping == "adaptive":
            try:
                self.controller()
            except ValueError as exc:
                bad("controller", str(exc))
        return self

    def controller(self) -> ControllerConfig:
        return ControllerConfig(
            tol=self.tol, alpha=self.alpha, p=SCHEMES[self.scheme].p, h0=self.h0, h_min=self.h_min,
            h_max=self.h_max, max_rejections=self.max_rejections,
            defect_kind=self.defect if self.defect != "none" else "classical", max_growth=self.max_growth,
        )

    def lanczos(self) -> LanczosConfig:
        tol = self.tol / 100 if self.lanczos_tol is None else self.lanczos_tol
        return LanczosConfig(m_max=self.lanczos_m_max, tol=tol)

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        aliases = {"grid_points": "M", "fixed-h": "fixed_h"}
        kwargs = {}
        for key, value in data.items():
            key = aliases.get(key, key).replace("-", "_")
            if key not in names:
                raise ConfigError(f"{key}: unknown configuration field")
            kwargs[key] = value
        return cls(**kwargs)


def build(config: RunConfig):
    """Return ``(problem, psi0, t_final)`` for a validated config."""
    spec = config.problem
    if isinstance(spec, str):
        problem, psi0, t_final = build_problem(spec, config.epsilon, config.M)
    else:
        try:
            a, b = spec["domain"]
            M = int(config.M or spec.get("grid_points", 256))
            grid = make_grid(a, b, M)
            pot = spec.get("potential", "zero")
            if isinstance(pot, str):
                if pot != "zero":
                    raise ConfigError(f"problem.potential: unknown potential {pot!r}")
                table = zero_potential(grid)
            else:
                table = potential_from_samples(np.asarray(pot, dtype=float), grid)
            problem = SemiclassicalProblem(grid, table, float(config.epsilon))
            pk = spec.get("packet", {})
            params = WavePacketParams(
                float(pk.get("delta", config.epsilon)),
                float(pk.get("x0", 0.5 * (a + b))),
                float(pk.get("k0", 0.0)),
            )
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                psi0 = wave_packet(grid, params)
            t_final = float(spec.get("t_final", 1.0))
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"problem: invalid custom problem ({exc})") from exc
    if config.t_final is not None:
        t_final = float(config.t_final)
    return problem, psi0, t_final


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_final(path, x, psi):
    write_csv(path, ["x", "re", "im"], zip(map(float, x), map(float, psi.real), map(float, psi.imag)))


def read_final(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 3:
        raise ValueError(f"{path}: expected columns x, re, im")
    return data[:, 0], data[:, 1] + 1j * data[:, 2]


STEP_COLUMNS = ["index", "t", "h", "est_local_err", "accepted", "rejections",
                "s0", "s1", "s2", "s3", "lanczos_mv", "forced", "norm"]


def execute(config: RunConfig, write=True):
    """Run one configured integration; returns ``(psi, summary_dict, problem, psi0, t_final)``."""
    problem, psi0, t_final = build(config)
    records = []
    start = time.perf_counter()
    if t_final == 0:
        psi, summary = psi0.copy(), IntegrationSummary(t_final=0.0, final_norm=l2_norm(psi0, problem.grid))
    elif config.stepping == "adaptive":
        psi, summary = integrate(psi0, t_final, config.scheme, problem, config.controller(), records.append, config.lanczos())
    else:
        psi, summary = propagate_fixed(
            psi0, t_final, config.fixed_h, config.scheme, problem, config.lanczos(), config.defect, sink=records.append
        )
    info = summary.as_dict()
    info["wall_time"] = time.perf_counter() - start
    info["attempts"] = len(records)
    info["lanczos_failures"] = sum(1 for r in records if math.isinf(r.est_local_err))
    info["config"] = {k: v for k, v in asdict(config).items() if not k.startswith("out_")}
    if write:
        if config.out_steps:
            write_csv(config.out_steps, STEP_COLUMNS, ([r.as_row()[c] for c in STEP_COLUMNS] for r in records))
        if config.out_final:
            write_final(config.out_final, problem.grid.x, psi)
        if config.out_summary:
            with open(config.out_summary, "w") as fh:
                json.dump(info, fh, indent=2, default=float)
    return psi, info, problem, psi0, t_final


def cmd_run(config: RunConfig) -> int:
    _, info, *_ = execute(config)
    print(
        f"accepted={info['accepted_steps']} rejected={info['rejected_steps']} "
        f"exponentials={info['exponentials']['total']} final_norm={info['final_norm']:.15g}"
    )
    return EXIT_OK


def cmd_reference(config: RunConfig) -> int:
    problem, psi0, t_final = build(config)
    if problem.grid.M > ORACLE_MAX_M:
        raise ConfigError(f"grid_points: dense reference is limited to M <= {ORACLE_MAX_M}, got {problem.grid.M}")
    psi = psi0.copy() if t_final == 0 else reference_solve(psi0, t_final, problem)
    write_final(config.out_final or "reference.csv", problem.grid.x, psi)
    print(f"norm={np.sqrt(problem.grid.dx) * np.linalg.norm(psi):.15g}")
    return EXIT_OK


def compare_files(path_a, path_b) -> float:
    xa, pa = read_final(path_a)
    xb, pb = read_final(path_b)
    if xa.shape != xb.shape or not np.allclose(xa, xb, rtol=0, atol=1e-12 * max(1.0, np.abs(xa).max())):
        raise ConfigError(f"grid mismatch between {path_a} and {path_b}")
    dx = xa[1] - xa[0] if len(xa) > 1 else 1.0
    return float(np.sqrt(dx) * np.linalg.norm(pa - pb))


def cmd_compare(path_a, path_b) -> int:
    print(repr(compare_files(path_a, path_b)))
    return EXIT_OK


SWEEP_COLUMNS = ["epsilon", "M", "scheme", "defect", "stepping", "tol", "global_error",
                 "accepted_steps", "rejected_steps", "exponentials", "wall_seconds", "status"]


def run_cell(config: RunConfig) -> dict:
    row = {"epsilon": config.epsilon, "M": config.M, "scheme": config.scheme, "defect": config.defect,
           "stepping": config.stepping if config.stepping == "adaptive" else f"fixed({config.fixed_h!r})",
           "tol": config.tol}
    try:
        config.validate()
        psi, info, problem, psi0, t_final = execute(config, write=False)
        ref = psi0 if t_final == 0 else reference_solve(psi0, t_final, problem)
        row.update(
            M=problem.grid.M,
            global_error=float(np.sqrt(problem.grid.dx) * np.linalg.norm(psi - ref)),
            accepted_steps=info["accepted_steps"],
            rejected_steps=info["rejected_steps"],
            exponentials=info["exponentials"]["total"],
            wall_seconds=info["wall_time"],
            status="ok",
        )
    except Exception as exc:  # recorded per cell; the sweep carries on
        row["status"] = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    return row


def sweep_cells(base: RunConfig, eps_grid=None, tols=None, defects=None):
    pairs = eps_grid or [(base.epsilon, base.M)]
    cells = []
    for eps, M in pairs:
        for tol in tols or [base.tol]:
            for defect in defects or [base.defect]:
                cells.append(replace(base, epsilon=eps, M=M, tol=tol, defect=defect,
                                     out_steps=None, out_final=None, out_summary=None))
    return cells


def cmd_sweep(base: RunConfig, out_path, eps_grid=None, tols=None, defects=None) -> int:
    cells = sweep_cells(base, eps_grid, tols, defects)
    workers = max(1, int(os.environ.get("ZASS_THREADS", "1") or 1))
    with ThreadPoolExecutor(max_workers=min(workers, len(cells))) as pool:
        rows = list(pool.map(run_cell, cells))
    write_csv(out_path, SWEEP_COLUMNS, ([row.get(c, "") for c in SWEEP_COLUMNS] for row in rows))
    for row in rows:
        print(",".join(_fmt(row.get(c, "")) for c in SWEEP_COLUMNS))
    return EXIT_OK


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _add_config_flags(p):
    p.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
    p.add_argument("--problem")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--grid-points", type=int, dest="M")
    p.add_argument("--scheme", choices=sorted(SCHEMES))
    p.add_argument("--defect", choices=["classical", "symmetrized", "none"])
    p.add_argument("--tol", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--h0", type=float)
    p.add_argument("--fixed-h", type=float, dest="fixed_h")
    p.add_argument("--t-final", type=float, dest="t_final")
    p.add_argument("--lanczos-tol", type=float, dest="lanczos_tol")
    p.add_argument("--out-steps", dest="out_steps")
    p.add_argument("--out-final", dest="out_final")
    p.add_argument("--out-summary", dest="out_summary")


FLAG_FIELDS = ["problem", "epsilon", "M", "scheme", "defect", "tol", "alpha", "h0", "fixed_h",
               "t_final", "lanczos_tol", "out_steps", "out_final", "out_summary"]


def config_from_args(args) -> RunConfig:
    data = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: {args.config} is not valid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ConfigError("config: top level must be an object")
    config = RunConfig.from_mapping(data)
    for name in FLAG_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            setattr(config, name, value)
    if args.fixed_h is not None:
        config.stepping = "fixed"
        if args.defect is None and "defect" not in data:
            config.defect = "none"
    return config.validate()


def make_parser():
    parser = argparse.ArgumentParser(prog="zassadapt", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="integrate one configuration")
    _add_config_flags(p_run)

    p_ref = sub.add_parser("reference", help="dense reference solution on the same grid")
    _add_config_flags(p_ref)

    p_cmp = sub.add_parser("compare", help="discrete L2 distance between two final.csv files")
    p_cmp.add_argument("final_a")
    p_cmp.add_argument("final_b")

    p_sw = sub.add_parser("sweep", help="run a grid of configurations against the reference")
    _add_config_flags(p_sw)
    p_sw.add_argument("--eps-grid", help="semicolon separated eps:M pairs, e.g. '1e-2:750;1e-3:1750'")
    p_sw.add_argument("--tols", help="comma separated tolerances")
    p_sw.add_argument("--defects", help="comma separated defect kinds")
    p_sw.add_argument("--out", default="sweep.csv")
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "compare":
            try:
                return cmd_compare(args.final_a, args.final_b)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        config = config_from_args(args)
        if args.command == "run":
            return cmd_run(config)
        if args.command == "reference":
            return cmd_reference(config)
        eps_grid = None
        if args.eps_grid:
            try:
                eps_grid = [(float(e), int(m)) for e, m in (cell.split(":") for cell in args.eps_grid.split(";"))]
            except ValueError as exc:
                raise ConfigError(f"eps_grid: expected 'eps:M;eps:M', got {args.eps_grid!r}") from exc
        tols = _floats(args.tols) if args.tols else None
        defects = [d.strip() for d in args.defects.split(",")] if args.defects else None
        return cmd_sweep(config, args.out, eps_grid, tols, defects)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MaxRejections, NonConvergence, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
