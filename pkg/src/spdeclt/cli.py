"""Command-line entry point: ``spdeclt <command> --config run.json``.

Exit codes: 0 success, 1 configuration error, 2 acceptance failure,
3 too many flagged replicates.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .covariance import cov_fvp, cov_matrix, cov_sbm
from .errors import ConfigError, SpdeCltError
from .grid import build_axes
from .heat import solve_limit
from .io import (RunManifest, write_path_bin, write_path_csv, write_rows, write_samples_csv,
                 write_table)
from .kernel import condition_report, validate_for_grid
from .noise import NoiseStream
from .solver import simulate_path
from .stats import (build_report, mode_match, moment_scaling_from_ensemble, run_ensemble,
                    weighted_norm_monitor)

EXIT_OK, EXIT_CONFIG, EXIT_ACCEPT, EXIT_FLAGGED = 0, 1, 2, 3
SLOPE_RANGE = (1.7, 2.3)

log = logging.getLogger("spdeclt")


def config_fingerprint(cfg: RunConfig) -> str:
    raw = {k: v for k, v in cfg.raw.items() if k not in ("output_dir", "workers", "formats")}
    return hashlib.sha256(json.dumps(raw, sort_keys=True).encode()).hexdigest()


def _eps_tag(e: float) -> str:
    return f"eps{e:g}"


class _Run:
    """Output directory, manifest and format handling shared by the commands."""

    def __init__(self, cfg: RunConfig, command: str):
        self.cfg = cfg
        self.out = Path(cfg.output_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.manifest = RunManifest(command, config_fingerprint(cfg))

    def table(self, stem: str, records: list[dict]) -> None:
        for fmt in self.cfg.formats:
            self.manifest.add(write_table(self.out / f"{stem}.{fmt}", records, fmt))

    def file(self, path) -> None:
        self.manifest.add(path)

    def finish(self, flags: dict | None = None) -> None:
        self.manifest.flags = flags or {}
        self.manifest.write(self.out)


def cmd_check_kernel(cfg: RunConfig) -> int:
    run = _Run(cfg, "check-kernel")
    rows = condition_report(cfg.kernel)
    run.table("conditions", rows)
    bad = [r for r in rows if not r["pass"]]
    run.finish({"violations": len(bad)})
    print(f"{len(rows) - len(bad)}/{len(rows)} probes within K={cfg.kernel.K:g}; "
          f"max implied K {max(r['implied_K'] for r in rows):.6g}")
    return EXIT_OK if not bad else EXIT_ACCEPT


def _limit(cfg: RunConfig):
    validate_for_grid(cfg.kernel, cfg.grid)
    return solve_limit(cfg.initial_values(), cfg.operator())


def cmd_limit(cfg: RunConfig) -> int:
    run = _Run(cfg, "limit")
    u0 = _limit(cfg)
    run.file(write_path_bin(run.out / "limit.bin", u0))
    idx = cfg.time_indices
    y = build_axes(cfg.grid)[0]
    rows = [(repr(n * cfg.grid.dt), repr(float(y[j])), repr(float(u0.snapshots[n, j])))
            for n in idx for j in range(y.size)]
    if "csv" in cfg.formats:
        run.file(write_rows(run.out / "limit.csv", ["t", "y", "u"], rows))
    if cfg.initial.has_closed_form():
        errs = [{"t": n * cfg.grid.dt,
                 "sup_error": float(np.max(np.abs(u0.snapshots[n] - cfg.initial.limit(y, n * cfg.grid.dt, cfg.kernel.kind))))}
                for n in idx]
        run.table("limit_error", errs)
        for e in errs:
            print(f"t={e['t']:g}  sup |u0 - closed form| = {e['sup_error']:.3e}")
    run.finish()
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, replicate: int = 0) -> int:
    run = _Run(cfg, "simulate")
    flagged = {}
    for e in cfg.epsilon:
        path = simulate_path(cfg.grid, cfg.kernel, e, cfg.initial_values(),
                             NoiseStream(cfg.master_seed, replicate), cfg.operator())
        tag = _eps_tag(e)
        run.file(write_path_bin(run.out / f"path_{tag}.bin", path))
        if "csv" in cfg.formats:
            run.file(write_path_csv(run.out / f"path_{tag}.csv", path,
                                    every=max(1, cfg.grid.n_t // 100)))
        flagged[tag] = path.flags.to_dict()
        print(f"{tag}: weighted norm sup {weighted_norm_monitor(path):.6g}, valid={path.flags.valid}")
    run.finish(flagged)
    return EXIT_OK if all(not (f["range_exit"] or f["clamp_excess"]) for f in flagged.values()) \
        else EXIT_FLAGGED


def cov_records(cfg: RunConfig, u0=None) -> list[dict]:
    u0 = u0 if u0 is not None else _limit(cfg)
    fns, kind = cfg.test_functions, cfg.kernel.kind
    records = []
    for n in cfg.time_indices:
        mats = {m: cov_matrix(cfg.kernel, u0, fns, n, m, cfg.pairing) for m in ("plain", "smoothed")}
        for i in range(len(fns)):
            for j in range(i, len(fns)):
                gap = mats["plain"][i, j] - mats["smoothed"][i, j]
                for mode in cfg.modes:
                    records.append({"kernel": kind, "mode": mode, "pairing": cfg.pairing,
                                    "f": fns[i].label(), "g": fns[j].label(), "t": n * cfg.grid.dt,
                                    "value": float(mats[mode][i, j]), "plain_minus_smoothed": float(gap)})
                if cfg.pairing == "measure" and kind in ("sbm", "fvp"):
                    red = (cov_sbm if kind == "sbm" else cov_fvp)(u0, fns[i], fns[j], n)
                    records.append({"kernel": kind, "mode": f"{kind}_formula", "pairing": cfg.pairing,
                                    "f": fns[i].label(), "g": fns[j].label(), "t": n * cfg.grid.dt,
                                    "value": float(red), "plain_minus_smoothed": float(gap)})
    return records


def cmd_cov(cfg: RunConfig) -> int:
    run = _Run(cfg, "cov")
    records = cov_records(cfg)
    run.table("cov", records)
    run.finish()
    print(f"{len(records)} covariance rows written to {run.out}")
    return EXIT_OK


def _predictions(cfg, u0):
    fns, out = cfg.test_functions, {}
    for n in cfg.time_indices:
        mats = {m: cov_matrix(cfg.kernel, u0, fns, n, m, cfg.pairing) for m in ("plain", "smoothed")}
        for i in range(len(fns)):
            for j in range(i, len(fns)):
                out[(n, i, j)] = {m: float(mats[m][i, j]) for m in mats}
    return out


def cmd_clt(cfg: RunConfig) -> int:
    run = _Run(cfg, "clt")
    u0 = _limit(cfg)
    preds = _predictions(cfg, u0)
    F, op = cfg.initial_values(), cfg.operator()
    status, flags = EXIT_OK, {}
    for e in cfg.epsilon:
        ens = run_ensemble(cfg.grid, cfg.kernel, e, F, cfg.test_functions, sorted(set(cfg.time_indices)),
                           cfg.replicates, cfg.master_seed, cfg.workers, op, cfg.pairing)
        diag = {"weighted_norm_max": ens.flag_summary()["weighted_norm_max"]}
        report = build_report(ens, preds, diag, {"config_fingerprint": config_fingerprint(cfg)})
        report.diagnostics["mode_match"] = mode_match(report)
        tag = _eps_tag(e)
        if "json" in cfg.formats:
            p = run.out / f"clt_{tag}.json"
            p.write_text(report.to_json() + "\n")
            run.file(p)
        p = run.out / f"clt_{tag}.txt"
        p.write_text(report.to_text() + "\n")
        run.file(p)
        if "csv" in cfg.formats:
            run.file(write_samples_csv(run.out / f"samples_{tag}.csv", ens))
        flags[tag] = ens.flag_summary()
        print(report.to_text())
        mm = report.diagnostics["mode_match"]
        print(f"{tag}: plain {mm['plain']['matched']}/{mm['plain']['cells']}, smoothed "
              f"{mm['smoothed']['matched']}/{mm['smoothed']['cells']}, closer mode: {mm['winner']}; "
              f"report hash {report.content_hash()[:16]}")
        if ens.n_flagged / ens.n_replicates > cfg.flag_threshold:
            status = EXIT_FLAGGED
        elif status == EXIT_OK and e > 0 and not (mm["plain"]["all_match"] or mm["smoothed"]["all_match"]):
            status = EXIT_ACCEPT
    run.finish(flags)
    return status


def cmd_moment_scaling(cfg: RunConfig) -> int:
    ms = cfg.moment_scaling
    if ms is None:
        raise ConfigError("moment_scaling block is required for this command", field="moment_scaling")
    run = _Run(cfg, "moment-scaling")
    g = cfg.grid
    t1 = g.time_index(ms["t1"])
    pairs = [(t1, g.time_index(ms["t1"] + d)) for d in ms["gaps"]]
    f = cfg.test_functions[ms.get("function", 0)]
    status, rows, flags = EXIT_OK, [], {}
    for e in cfg.epsilon:
        times = sorted({t for p in pairs for t in p})
        ens = run_ensemble(g, cfg.kernel, e, cfg.initial_values(), [f], times, cfg.replicates,
                           cfg.master_seed, cfg.workers, cfg.operator(), cfg.pairing)
        res = moment_scaling_from_ensemble(ens, pairs, ms.get("n_boot", 1000))
        rows.append({"eps": e, **res.to_dict()})
        flags[_eps_tag(e)] = ens.flag_summary()
        if res.degenerate:
            print(f"eps={e:g}: all increments are zero (degenerate)")
            continue
        print(f"eps={e:g}: slope {res.slope:.3f}  95% CI [{res.ci[0]:.3f}, {res.ci[1]:.3f}]")
        if not (SLOPE_RANGE[0] <= res.slope <= SLOPE_RANGE[1] and res.ci[0] <= 2.0 <= res.ci[1]):
            status = EXIT_ACCEPT
    p = run.out / "moment_scaling.json"
    p.write_text(json.dumps(rows, indent=2) + "\n")
    run.file(p)
    run.finish(flags)
    return status


COMMANDS = {
    "check-kernel": cmd_check_kernel, "limit": cmd_limit, "simulate": cmd_simulate,
    "cov": cmd_cov, "clt": cmd_clt, "moment-scaling": cmd_moment_scaling,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spdeclt", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--seed", type=int, help="override master_seed")
    p.add_argument("--workers", type=int, help="override workers")
    p.add_argument("--out", help="override output_dir")
    p.add_argument("--format", choices=["csv", "json"], help="write only this table format")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {"master_seed": args.seed, "workers": args.workers, "output_dir": args.out,
                 "formats": [args.format] if args.format else None}
    try:
        cfg = load_config(args.config, overrides)
        return COMMANDS[args.command](cfg)
    except SpdeCltError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
