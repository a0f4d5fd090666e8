"""Command-line entry point.

Subcommands::

    simulate   enumerate the exact world tree        cascades.csv summary.csv ccdf.csv
    sample     Monte Carlo ensemble of N points      cascades.csv summary.csv ccdf.csv survival.csv
    stats      top-two gap scan and dominance        gapscan.csv summary.csv gapstats.csv ccdf.csv
    oracle     brute-force operator checks           oracle.csv
    rebase     rotation rebasing on random sequences rebase.csv
    run        any of the above, chosen by ``mode`` in the config

Settings come from an optional ``key=value`` file (``--config``) and are
overridden by command-line flags. Exit status: 0 success, 1 bad
configuration or capacity, 2 a checked property failed.
"""
from __future__ import annotations

import argparse
import csv
import io
import os
import sys
import tempfile
from dataclasses import dataclass, field, fields

import numpy as np

from . import ensemble as ens
from .addressing import ModelParams
from .errors import CapacityError, ConfigError, InvariantError, ToyObserverError

MODES = {"simulate": "exact", "sample": "mc", "stats": "stats", "oracle": "oracle", "rebase": "rebase"}
MC_POINT_ROWS = 1_000_000  # sample writes per-point rows up to this ensemble size


def _int(v: str) -> int:
    v = v.strip()
    try:
        return int(v)
    except ValueError:
        f = float(v)
        if not f.is_integer():
            raise
        return int(f)


def _ints(v: str) -> tuple:
    return tuple(_int(x) for x in v.split(",") if x.strip())


@dataclass
class RunConfig:
    mode: str = "exact"
    seed: int = 0
    B: int = 2
    W: int = 32
    T: int = 10
    N: int | None = None
    reps: int = 100
    Ns: tuple = (1000, 10000, 100000)
    out: str = "out/"
    source: str = "pareto"
    workers: int = 1
    branch_cap: int = 1 << 24
    capacity: int = 1 << 32
    orbital_count: int = 3
    M: int = 3
    oracle_W: int = 2
    variant: str = "reduced"
    max_dim: int = 1 << 22
    trials: int = 20
    steps: int = 2
    length: int = 5
    tol: float = 1e-10
    proj_tol: float = 1e-12
    match_tol: float = 1e-9
    rebase_tol: float = 1e-12
    _sources: dict = field(default_factory=dict, repr=False)

    def params(self) -> ModelParams:
        return ModelParams(B=self.B, W=self.W, T=self.T, seed=self.seed,
                           subset_capacity=self.capacity, branch_cap=self.branch_cap)

    def validate(self) -> "RunConfig":
        if self.mode not in MODES.values():
            raise ConfigError("mode", f"must be one of {sorted(MODES.values())}")
        self.params()
        if self.N is not None and self.N < 1:
            raise ConfigError("N", "must be >= 1")
        if self.reps < 1:
            raise ConfigError("reps", "must be >= 1")
        if not self.Ns or any(n < 2 for n in self.Ns):
            raise ConfigError("Ns", "need a nonempty list of sizes >= 2")
        if self.source not in ("pareto", "cascade"):
            raise ConfigError("source", "must be pareto or cascade")
        if self.workers < 1:
            raise ConfigError("workers", "must be >= 1")
        if self.orbital_count < self.B + 1:
            raise ConfigError("orbital_count", f"ring of B={self.B} needs at least {self.B + 1} records")
        if self.M < 2:
            raise ConfigError("M", "must be >= 2")
        if self.oracle_W < 2 or self.oracle_W % 2:
            raise ConfigError("oracle_W", "must be even and >= 2")
        if self.variant not in ("reduced", "full"):
            raise ConfigError("variant", "must be reduced or full")
        if self.steps < 0:
            raise ConfigError("steps", "must be >= 0")
        if not 1 <= self.length <= 64:
            raise ConfigError("length", "must lie in 1..64")
        if self.trials < 1:
            raise ConfigError("trials", "must be >= 1")
        for k in ("tol", "proj_tol", "match_tol", "rebase_tol"):
            if not getattr(self, k) > 0:
                raise ConfigError(k, "must be > 0")
        return self


PARSERS = {
    "mode": str, "out": str, "source": str, "variant": str,
    "N": _int, "Ns": _ints,
    "tol": float, "proj_tol": float, "match_tol": float, "rebase_tol": float,
}
KEYS = [f.name for f in fields(RunConfig) if not f.name.startswith("_")]


def _coerce(key: str, raw: str):
    if key not in KEYS:
        raise ConfigError(key, "unknown configuration key")
    try:
        return PARSERS.get(key, _int)(raw)
    except ValueError:
        raise ConfigError(key, f"cannot parse value {raw!r}") from None


def parse_config_text(text: str) -> dict:
    """``key=value`` lines; ``#`` starts a comment; blank lines ignored."""
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}", f"expected key=value, got {line!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k] = _coerce(k, v)
    return out


def parse_config(text: str = "", overrides: dict | None = None, mode: str | None = None) -> RunConfig:
    """File values, then flag overrides (flags win), then validation."""
    values = parse_config_text(text)
    for k, v in (overrides or {}).items():
        values[k] = v if not isinstance(v, str) else _coerce(k, v)
    if mode is not None:
        values["mode"] = mode
    cfg = RunConfig(**values)
    cfg._sources = dict(values)
    return cfg.validate()


# ---------------------------------------------------------------- output

class Outputs:
    """Collects files in memory and publishes them all at once (temp file, then rename)."""

    def __init__(self, prefix: str):
        self.prefix = prefix
        self.files = {}

    def table(self, name: str, header, rows) -> None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])
        self.files[name] = buf.getvalue()

    def path(self, name: str) -> str:
        return self.prefix + name

    def commit(self) -> list:
        paths = []
        staged = []
        try:
            for name, text in self.files.items():
                path = self.path(name)
                d = os.path.dirname(path) or "."
                os.makedirs(d, exist_ok=True)
                fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=d)
                with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
                    f.write(text)
                staged.append((tmp, path))
            for tmp, path in staged:
                os.replace(tmp, path)
                paths.append(path)
        finally:
            for tmp, _ in staged:
                if os.path.exists(tmp):
                    os.unlink(tmp)
        return paths


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return int(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


SUMMARY_HEADER = ("N", "X1", "X2", "gap", "log2N", "tie", "dominant", "seed")
CASCADE_HEADER = ("point_id", "age_a", "generations", "neurons_X", "capped")
CCDF_HEADER = ("threshold_n", "count_gt", "ccdf")


def _summary_row(s: ens.EnsembleSummary):
    return (s.N, s.X1, s.X2, s.gap, s.log2N, s.tie, s.dominant, s.seed)


def _ccdf_rows(t: ens.CcdfTable):
    return [(n, c, p) for n, p, c in t.rows]


# ---------------------------------------------------------------- modes

def run_exact(cfg: RunConfig, out: Outputs) -> str:
    p = cfg.params()
    if cfg.N is not None and cfg.N != ens.world_tree_size(p.B, p.T):
        raise ConfigError("N", "exact mode enumerates the whole tree; leave N unset")
    recs = list(ens.exact_records(p, check=True))
    xs = np.array([r.neurons for r in recs], dtype=np.int64)
    x1, x2 = ens.top_two(xs)
    s = ens.summarize(int(x1), int(x2), len(recs), p.seed)
    out.table("cascades.csv", CASCADE_HEADER,
              ((r.point_id, r.age, r.generations, r.neurons, r.capped) for r in recs))
    out.table("summary.csv", SUMMARY_HEADER, [_summary_row(s)])
    out.table("ccdf.csv", CCDF_HEADER, _ccdf_rows(ens.ccdf_table(xs)))
    return (f"exact B={p.B} W={p.W} T={p.T} seed={p.seed}: N={s.N} X1={s.X1} X2={s.X2} "
            f"gap={s.gap} dominant={s.dominant} properties ok")


def run_mc(cfg: RunConfig, out: Outputs) -> str:
    p = cfg.params()
    N = cfg.N if cfg.N is not None else ens.world_tree_size(p.B, p.T)
    if N < 2:
        raise ConfigError("N", "an ensemble needs at least two points")
    st = ens.mc_stream_stats(p, N, workers=cfg.workers)
    s = ens.summarize(st.x1, st.x2, N, p.seed)
    table = ens.CcdfTable.from_counts(st.thresholds, st.count_gt, st.n)
    if N <= MC_POINT_ROWS:
        ages, gens, xs, caps = ens.mc_arrays(p, N)
        out.table("cascades.csv", CASCADE_HEADER,
                  zip(range(N), ages.tolist(), gens.tolist(), xs.tolist(), caps.astype(bool).tolist()))
    out.table("summary.csv", SUMMARY_HEADER, [_summary_row(s)])
    out.table("ccdf.csv", CCDF_HEADER, _ccdf_rows(table))
    upto = min(p.max_generation, 20)
    out.table("survival.csv", ("l", "p_hat", "sigma", "expected"), ens.survival_table(st, upto))
    note = "" if N <= MC_POINT_ROWS else f" (per-point rows skipped above {MC_POINT_ROWS})"
    return (f"mc B={p.B} W={p.W} T={p.T} seed={p.seed}: N={N} X1={s.X1} X2={s.X2} gap={s.gap} "
            f"dominant={s.dominant} capped={st.n_capped} slope={table.slope:.3f}{note}")


def run_stats(cfg: RunConfig, out: Outputs) -> str:
    p = cfg.params()
    rows = ens.gap_rows(cfg.Ns, cfg.reps, cfg.source, seed=cfg.seed, params=p, workers=cfg.workers)
    out.table("gapscan.csv", ("N", "rep", "gap", "gap_over_N", "tie"),
              ((r.N, r.rep, r.gap, r.gap_over_N, r.tie) for r in rows))
    summ = []
    for r in rows:
        seed = cfg.seed if cfg.source == "pareto" else ens.ensemble_seed(cfg.seed, r.N, r.rep)
        summ.append(_summary_row(ens.summarize(r.X1, r.X2, r.N, seed)))
    out.table("summary.csv", SUMMARY_HEADER, summ)
    agg = []
    for N in dict.fromkeys(r.N for r in rows):
        sel = [r for r in rows if r.N == N]
        dom = sum(ens.summarize(r.X1, r.X2, N).dominant for r in sel)
        lo, hi = ens.wilson_interval(dom, len(sel))
        agg.append((N, len(sel), float(np.median([r.gap_over_N for r in sel])),
                    sum(r.tie for r in sel) / len(sel), dom / len(sel), lo, hi))
    out.table("gapstats.csv", ("N", "reps", "median_gap_over_N", "tie_fraction",
                               "dominance_fraction", "dominance_ci_low", "dominance_ci_high"), agg)
    Nmax = max(cfg.Ns)
    if cfg.source == "pareto":
        table = ens.ccdf_table(ens.pareto_reference_sample(Nmax, [cfg.seed, Nmax]))
    else:
        st = ens.mc_stream_stats(p, Nmax, workers=cfg.workers)
        table = ens.CcdfTable.from_counts(st.thresholds, st.count_gt, st.n)
    out.table("ccdf.csv", CCDF_HEADER, _ccdf_rows(table))
    meds = [a[2] for a in agg]
    spread = ens.relative_spread(meds) if len(meds) > 1 else 0.0
    return (f"stats source={cfg.source} reps={cfg.reps} Ns={','.join(map(str, cfg.Ns))}: "
            f"median gap/N spread={spread:.3f} dominance={','.join(f'{a[4]:.3f}' for a in agg)} "
            f"ties={','.join(f'{a[3]:.3f}' for a in agg)} slope={table.slope:.3f}")


def run_oracle(cfg: RunConfig, out: Outputs) -> str:
    from . import oracle as orc

    space = orc.TruncatedSpace(cfg.orbital_count, cfg.oracle_W, cfg.M, cfg.B, seed=cfg.seed,
                               variant=cfg.variant)
    dense = orc.DenseOracle(space, max_dim=cfg.max_dim)
    rows = []
    ok = True
    bm = orc.build_branching_matrix(cfg.B)
    rows.append(("branching", f"B={cfg.B}", bm.deviation(), cfg.proj_tol, bm.deviation() < cfg.proj_tol))
    for f in (*orc.FACTORS, "full"):
        r = orc.unitarity_check(f, cfg.trials, cfg.tol, oracle=dense, seed=cfg.seed)
        rows.append(("unitarity", f, max(r.max_norm_dev, r.max_inner_dev), cfg.tol, r.passed))
    pr = orc.projector_orthogonality_check(1, 2, space=space, tol=cfg.proj_tol, seed=cfg.seed,
                                           max_dim=cfg.max_dim)
    rows.append(("projectors", f"l=1 n={pr.n_projectors} pairs={pr.n_pairs}",
                 max(pr.max_product_norm, pr.max_idempotence_dev), cfg.proj_tol, pr.passed))
    agree = orc.dense_sparse_agreement(space, trials=3, seed=cfg.seed)
    rows.append(("backends", "dense-vs-sparse", agree, cfg.tol, agree < cfg.tol))
    sym = orc.compare_with_symbolic(
        cfg.steps, ModelParams(B=cfg.B, W=cfg.oracle_W, T=max(cfg.steps, 1), seed=cfg.seed),
        cfg.match_tol, variant=cfg.variant)
    rows.append(("symbolic", f"steps={cfg.steps} branches={sym.n_branches} support={sym.support_size}",
                 max(sym.max_amplitude_dev, sym.residual_norm), cfg.match_tol, sym.passed))
    ok = all(r[4] for r in rows)
    out.table("oracle.csv", ("check", "item", "max_dev", "tol", "passed"), rows)
    failed = [f"{r[0]}:{r[1]}" for r in rows if not r[4]]
    msg = (f"oracle dim={space.dim} orbital_count={cfg.orbital_count} M={cfg.M} W={cfg.oracle_W}: "
           f"{sum(r[4] for r in rows)}/{len(rows)} checks passed")
    if not ok:
        raise InvariantError(msg + " failed " + " ".join(failed))
    return msg


def run_rebase(cfg: RunConfig, out: Outputs) -> str:
    from . import oracle as orc

    rng = np.random.default_rng([cfg.seed, cfg.length])
    rows = []
    for rep in range(cfg.reps):
        seq = [orc.random_unitary(2, rng) for _ in range(cfg.length)]
        for q in range(1, cfg.length + 1):
            r = orc.rebase_demo(seq, q, cfg.rebase_tol)
            rows.append((rep, cfg.length, q, r.max_step_dev, r.max_product_dev, r.passed))
    out.table("rebase.csv", ("rep", "length", "move_to", "max_step_dev", "max_product_dev", "passed"), rows)
    worst = max(max(r[3], r[4]) for r in rows)
    npass = sum(r[5] for r in rows)
    msg = f"rebase length={cfg.length} reps={cfg.reps}: {npass}/{len(rows)} passed, max dev={worst:.2e}"
    if npass != len(rows):
        raise InvariantError(msg)
    return msg


RUNNERS = {"exact": run_exact, "mc": run_mc, "stats": run_stats, "oracle": run_oracle, "rebase": run_rebase}


def run(cfg: RunConfig) -> tuple:
    """Execute ``cfg``; returns ``(exit_code, message, written_paths)``."""
    out = Outputs(cfg.out)
    try:
        msg = RUNNERS[cfg.mode](cfg, out)
    except InvariantError as e:
        # the report is still useful: publish it, then signal the violation
        return 2, f"invariant violation: {e}", out.commit()
    except (ConfigError, CapacityError) as e:
        return 1, f"error: {e}", []
    return 0, msg, out.commit()


# ---------------------------------------------------------------- argparse

class _Parser(argparse.ArgumentParser):
    # bad flags are configuration errors (exit 1); status 2 is reserved for violated invariants
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key=value settings file")
    for key in KEYS:
        if key == "mode":
            continue
        common.add_argument(f"--{key}", dest=key, default=None, metavar="VALUE")
    ap = _Parser(prog="toyobserver", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in (
        ("simulate", "enumerate the exact world tree"),
        ("sample", "Monte Carlo ensemble"),
        ("stats", "gap scaling, dominance and CCDF experiments"),
        ("oracle", "brute-force operator checks"),
        ("rebase", "rotation rebasing demonstration"),
        ("run", "mode taken from the config"),
    ):
        sub.add_parser(name, parents=[common], help=help_)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: getattr(args, k) for k in KEYS if k != "mode" and getattr(args, k, None) is not None}
    try:
        text = ""
        if args.config:
            with open(args.config, encoding="utf-8") as f:
                text = f.read()
        cfg = parse_config(text, overrides, MODES.get(args.command))
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: config: {e}", file=sys.stderr)
        return 1
    try:
        code, msg, _ = run(cfg)
    except ToyObserverError as e:
        print(f"invariant violation: {e}", file=sys.stderr)
        return 2
    print(msg, file=sys.stdout if code == 0 else sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
