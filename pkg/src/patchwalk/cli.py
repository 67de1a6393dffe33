"""Command-line interface.

Subcommands: ``components``, ``sample``, ``volume``, ``diagnose``,
``backtest``.  A TOML or JSON config file can pre-set any flag; explicit
flags win.  Every output artifact embeds the tool version, a hash of the
effective configuration, and the seed, and re-running with the same triple
reproduces the bytes exactly (no timestamps anywhere).

Exit codes: 0 success, 2 configuration/input error, 3 numeric or
convergence failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from ._rng import stream
from .errors import (
    MalformedCsv,
    NonMonotoneDates,
    PatchwalkError,
)
from .geometry import build_transform, from_patch
from .topology import SimplexH, build_patch
from .volume import estimate_volume, relative_volumes
from .walks import sample_patch

# Stream tags so each CLI stage has an independent keyed substream.
TAG_VOLUME, TAG_SAMPLE = 3, 4


class ConfigError(Exception):
    pass


def _load_config(path: str) -> dict:
    if path.endswith((".toml", ".tml")):
        try:
            import tomllib  # py311+
        except ImportError:
            import tomli as tomllib
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    with open(path) as fh:
        return json.load(fh)


def _canonical(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def _config_hash(doc: dict) -> str:
    return hashlib.sha256(_canonical(doc).encode()).hexdigest()[:16]


def _effective(ns: argparse.Namespace, keys: list[str]) -> dict:
    """Merge config file under explicit flags and return the effective dict."""
    cfg = _load_config(ns.config) if getattr(ns, "config", None) else {}
    eff = {}
    for key in keys:
        flag = getattr(ns, key, None)
        if flag is None or flag is False:
            flag = cfg.get(key, flag)
        eff[key] = flag
    for key, val in eff.items():
        setattr(ns, key, val)
    return eff


def _write_text(path: str | None, text: str):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _json_report(doc: dict, meta: dict) -> str:
    out = dict(doc)
    out["meta"] = meta
    return json.dumps(out, sort_keys=True, indent=2) + "\n"


def _meta(cfg_hash: str, seed=None) -> dict:
    meta = {"tool": "patchwalk", "version": __version__, "config_hash": cfg_hash}
    if seed is not None:
        meta["seed"] = int(seed)
    return meta


def _load_matrix_csv(path: str) -> np.ndarray:
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2)
    except Exception as exc:
        raise ConfigError(f"cannot read matrix CSV {path}: {exc}") from exc


def _resolve_body(ns):
    """Body plus optional transform from --simplex or --cov/--level."""
    if getattr(ns, "simplex", None):
        with open(ns.simplex) as fh:
            text = fh.read()
        if ns.simplex.endswith(".json"):
            simplex = SimplexH.from_json(text)
        else:
            rows = _load_matrix_csv(ns.simplex)
            simplex = SimplexH(rows[:, :-1], rows[:, -1])
        return build_patch(simplex), None
    if getattr(ns, "cov", None):
        if getattr(ns, "level", None) is None:
            raise ConfigError("--cov requires --level")
        sigma = _load_matrix_csv(ns.cov)
        transform = build_transform(sigma, float(ns.level), sigma.shape[0])
        return build_patch(transform.simplex, transform=transform), transform
    raise ConfigError("provide --simplex FILE or --cov FILE with --level")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_components(ns) -> int:
    eff = _effective(ns, ["simplex", "cov", "level"])
    body, _ = _resolve_body(ns)
    report = body.summary()
    _write_text(ns.out, _json_report(report, _meta(_config_hash(eff))))
    return 0


def cmd_sample(ns) -> int:
    keys = ["simplex", "cov", "level", "n", "walk", "space", "format", "eps", "seed"]
    eff = _effective(ns, keys)
    if ns.seed is None:
        raise ConfigError("--seed is mandatory for sample")
    n = int(ns.n or 0)
    eps = float(ns.eps or 0.1)
    body, transform = _resolve_body(ns)
    space = ns.space or "patch"
    if space == "portfolio" and transform is None:
        raise ConfigError("--space portfolio needs --cov/--level input")

    cfg_hash = _config_hash(eff)
    counters = np.zeros(3, dtype=np.int64)
    if n > 0:
        relative_volumes(body, eps, stream(ns.seed, TAG_VOLUME))
        pts, comps = sample_patch(
            body, n, stream(ns.seed, TAG_SAMPLE), counters=counters,
            walk=ns.walk or "regcw",
        )
        if space == "portfolio":
            data = from_patch(pts, transform)
        else:
            data = pts
    else:
        width = transform.d_assets if space == "portfolio" else body.simplex.dim
        data = np.empty((0, width))
        comps = np.empty(0, dtype=int)

    fmt = ns.format or "csv"
    if fmt == "csv":
        lines = [
            f"# tool=patchwalk version={__version__} config_hash={cfg_hash} seed={int(ns.seed)}",
            ",".join(f"x{i}" for i in range(data.shape[1])) + ",component",
        ]
        for row, c in zip(data, comps):
            lines.append(",".join(repr(float(v)) for v in row) + f",{int(c)}")
        _write_text(ns.out, "\n".join(lines) + "\n")
    elif fmt == "jsonl":
        meta = _meta(cfg_hash, ns.seed)
        lines = [_canonical({"meta": meta})]
        for i, (row, c) in enumerate(zip(data, comps)):
            lines.append(
                _canonical({"step": i, "component": int(c), "point": [float(v) for v in row]})
            )
        _write_text(ns.out, "\n".join(lines) + "\n")
    else:
        raise ConfigError(f"unknown format {fmt!r}")

    if ns.counters_out:
        from .diagnostics import summarize

        report = summarize(
            {
                "steps": n,
                "budget_violations": int(counters[0]),
                "reflections": int(counters[1]),
                "boundary_failures": int(counters[2]),
            }
        )
        _write_text(ns.counters_out, _json_report(report, _meta(cfg_hash, ns.seed)))
    return 0


def cmd_volume(ns) -> int:
    eff = _effective(ns, ["simplex", "cov", "level", "eps", "seed"])
    if ns.seed is None:
        raise ConfigError("--seed is mandatory for volume")
    eps = float(ns.eps or 0.1)
    body, _ = _resolve_body(ns)
    rng = stream(ns.seed, TAG_VOLUME)
    children = rng.spawn(max(body.M, 1))
    estimates = [
        estimate_volume(body, comp, eps, children[i]).to_dict()
        for i, comp in enumerate(body.components)
    ]
    total = sum(e["volume"] for e in estimates)
    for e in estimates:
        e["weight"] = e["volume"] / total if total > 0 else None
    report = {"n_components": body.M, "estimates": estimates, "eps": eps}
    _write_text(ns.out, _json_report(report, _meta(_config_hash(eff), ns.seed)))
    return 0


def cmd_diagnose(ns) -> int:
    from .diagnostics import PSRF_GATE, psrf

    eff = _effective(ns, ["gate"])
    gate = float(ns.gate or PSRF_GATE)
    chains = [_read_chain_csv(path) for path in ns.chains]
    shapes = {c.shape for c in chains}
    if len(shapes) != 1:
        raise ConfigError(f"chain files disagree on shape: {sorted(shapes)}")
    arr = np.stack(chains)
    values = psrf(arr)
    report = {
        "psrf": [float(v) for v in values],
        "max": float(np.max(values)),
        "gate": gate,
        "pass": bool(np.max(values) < gate),
    }
    _write_text(ns.out, _json_report(report, _meta(_config_hash(eff))))
    return 0


def _read_chain_csv(path: str) -> np.ndarray:
    """Chain samples from a CSV, skipping comments/header, dropping any
    trailing ``component`` column emitted by the sample subcommand."""
    import io

    with open(path) as fh:
        rows = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    if not rows:
        raise ConfigError(f"{path} holds no data")
    drop_last = False
    first = rows[0].split(",")[0].strip()
    try:
        float(first)
    except ValueError:
        drop_last = rows[0].strip().split(",")[-1] == "component"
        rows = rows[1:]
    data = np.loadtxt(io.StringIO("".join(rows)), delimiter=",", ndmin=2)
    return data[:, :-1] if drop_last else data


def cmd_backtest(ns) -> int:
    from .pipeline import backtest, cluster_summary, load_panel, sharpe_test

    keys = ["panel", "metadata", "prices", "mode", "n", "seed", "eps", "out_dir", "threads"]
    eff = _effective(ns, keys)
    if ns.seed is None:
        raise ConfigError("--seed is mandatory for backtest")
    if not ns.panel:
        raise ConfigError("--panel CSV is required")
    out_dir = ns.out_dir or "."
    os.makedirs(out_dir, exist_ok=True)
    cfg_hash = _config_hash(eff)
    meta = _meta(cfg_hash, ns.seed)

    panel = load_panel(ns.panel, prices=bool(ns.prices), metadata_path=ns.metadata)
    result = backtest(
        panel,
        n_samples=int(ns.n or 1000),
        mode=ns.mode or "random",
        seed=int(ns.seed),
        eps=float(ns.eps or 0.1),
        threads=int(ns.threads or 1),
        use_liquidity=not ns.no_liquidity,
    )

    lines = [
        f"# tool=patchwalk version={__version__} config_hash={cfg_hash} seed={int(ns.seed)}",
        "level,sample,ann_return,ann_std,sharpe",
    ]
    for m in sorted(result.stats):
        for i, (ret, std, sr) in enumerate(result.stats[m]):
            lines.append(f"{m},{i},{ret!r},{std!r},{sr!r}")
    _write_text(os.path.join(out_dir, "stats.csv"), "\n".join(lines) + "\n")

    clusters = {}
    for m in sorted(result.stats):
        try:
            summ = cluster_summary(result, m)
            clusters[str(m)] = {
                "mean": [float(v) for v in summ.mean],
                "covariance": [[float(v) for v in row] for row in summ.covariance],
                "risk_return_correlation": _jsonable(summ.risk_return_correlation),
            }
        except ValueError:
            clusters[str(m)] = None
    _write_text(
        os.path.join(out_dir, "clusters.json"), _json_report({"clusters": clusters}, meta)
    )

    lo, hi = min(result.stats), max(result.stats)
    pair_stats = []
    for i in range(result.monthly_paths[lo].shape[0]):
        try:
            z, p = sharpe_test(result.monthly_paths[lo][i], result.monthly_paths[hi][i])
            pair_stats.append({"sample": i, "statistic": _jsonable(z), "p_value": _jsonable(p)})
        except PatchwalkError as exc:
            pair_stats.append({"sample": i, "error": str(exc)})
    mean_lo = result.monthly_paths[lo].mean(axis=0)
    mean_hi = result.monthly_paths[hi].mean(axis=0)
    z, p = sharpe_test(mean_lo, mean_hi)
    tests = {
        "low_level": lo,
        "high_level": hi,
        "mean_series": {"statistic": _jsonable(z), "p_value": _jsonable(p)},
        "paired": pair_stats,
        "n_significant_5pct": sum(
            1 for t in pair_stats if "p_value" in t and t["p_value"] is not None and t["p_value"] < 0.05
        ),
    }
    _write_text(os.path.join(out_dir, "tests.json"), _json_report(tests, meta))

    run = {
        "mode": result.mode,
        "n_samples": result.n_samples,
        "rebalance_dates": [str(d.date()) for d in result.dates],
        "level_targets": [[float(v) for v in t] for t in result.level_targets],
        "mean_sharpe_by_level": {
            str(m): _jsonable(float(np.mean(result.stats[m][:, 2]))) for m in sorted(result.stats)
        },
    }
    _write_text(os.path.join(out_dir, "run.json"), _json_report(run, meta))
    return 0


def _jsonable(x: float):
    x = float(x)
    return x if np.isfinite(x) else None


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="patchwalk", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="TOML or JSON config; flags override it")
        p.add_argument("--out", "-o", help="output path (default stdout)")
        p.add_argument("--simplex", help="simplex file: JSON {A,b} or CSV rows [A|b]")
        p.add_argument("--cov", help="covariance CSV (row-major, no header)")
        p.add_argument("--level", type=float, help="variance level (with --cov)")

    p = sub.add_parser("components", help="component analysis of a body")
    common(p)
    p.set_defaults(func=cmd_components)

    p = sub.add_parser("sample", help="uniform samples from a body")
    common(p)
    p.add_argument("--n", type=int, help="number of samples")
    p.add_argument("--walk", choices=["regcw", "gcw"], help="walk kind")
    p.add_argument("--space", choices=["patch", "portfolio"])
    p.add_argument("--format", choices=["csv", "jsonl"])
    p.add_argument("--eps", type=float, help="relative error for component weights")
    p.add_argument("--seed", type=int)
    p.add_argument("--counters-out", help="write walk counters JSON here")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("volume", help="volume estimates per component")
    common(p)
    p.add_argument("--eps", type=float, help="target relative error")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_volume)

    p = sub.add_parser("diagnose", help="PSRF over sample CSVs (one per chain)")
    p.add_argument("--config", help="TOML or JSON config; flags override it")
    p.add_argument("--out", "-o")
    p.add_argument("--gate", type=float, help="PSRF pass threshold (default 1.1)")
    p.add_argument("chains", nargs="+", help="chain CSV files (same shape)")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("backtest", help="iso-volatility anomaly backtest")
    p.add_argument("--config")
    p.add_argument("--panel", help="returns/prices CSV (date + asset columns)")
    p.add_argument("--metadata", help="asset metadata CSV")
    p.add_argument("--prices", action="store_true", help="panel holds prices, not returns")
    p.add_argument("--mode", choices=["random", "momentum"])
    p.add_argument("--n", type=int, help="samples per level")
    p.add_argument("--eps", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, default=os.cpu_count())
    p.add_argument("--no-liquidity", action="store_true", help="disable the volume filter")
    p.add_argument("--out-dir", help="directory for result files")
    p.set_defaults(func=cmd_backtest)
    return ap


def main(argv=None) -> int:
    ns = _build_parser().parse_args(argv)
    try:
        return ns.func(ns)
    except (ConfigError, MalformedCsv, NonMonotoneDates, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PatchwalkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
