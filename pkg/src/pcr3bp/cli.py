"""Command line front end: ``pcr3bp prove-orbits | prove-coverings | entropy | explore``.

Settings come from three layers: built-in defaults, an optional JSON config
file (``--config`` or the ``PCR3BP_CONFIG`` environment variable) and the
flags given on the command line.  A config file replaces the defaults; a
flag typed explicitly replaces both.

Report files are line oriented text with a stable field order.  Timing is
printed to the terminal only, so two runs with the same settings write the
same report bytes.  Exit status is 1 when any selected rigorous check is
false or inconclusive, 2 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import pickle
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path

from .model import ModelParams
from .orbits import FAMILIES, PROBE_TABLE, OrbitClaim, default_options, prove, table_key

log = logging.getLogger("pcr3bp")

CONFIG_ENV = "PCR3BP_CONFIG"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Every setting of a run; field names double as config file keys."""

    h: list = field(default_factory=list)  # energies as decimal strings ([] = per command default)
    family: list = field(default_factory=list)
    claims: list = field(default_factory=list)
    all: bool = False
    dt: float = 1e-2  # maximal step; steps shrink adaptively below it
    order: int = 12
    segments: int = 200
    max_segments: int = 5000
    workers: int = 1
    out: str = "reports"
    floor: float = 1e-3
    min_dt: float = 5e-4
    m1: float = 1.0
    m2: float = 1.0
    catalog: str | None = None  # t-set file (default: packaged)
    relations: str | None = None  # relation list (default: packaged)
    edges: str | None = None  # edge list for entropy (default: packaged, assumed)
    half_width: str = "5e-4"
    # explorer
    series: list = field(default_factory=lambda: ["f-scan"])
    lo: float = -0.62
    hi: float = 0.62
    n: int = 400
    x: str | None = None
    tsets: list = field(default_factory=list)

    def params(self):
        return ModelParams(self.m1, self.m2)

    def map_options(self):
        opts = default_options(self.dt, self.order, self.params())
        policy = replace(opts.policy, min_dt=min(self.min_dt, self.dt / 4))
        return replace(opts, policy=policy, floor=self.floor)


def _split_list(text):
    return [t for t in (s.strip() for s in text.split(",")) if t]


def load_config(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config keys in {path}: {', '.join(unknown)}; "
                          f"valid keys are {', '.join(sorted(known))}")
    for k in ("h", "family", "claims", "series", "tsets"):
        if k in data and isinstance(data[k], (str, int, float)):
            data[k] = _split_list(str(data[k]))
    if "h" in data:
        data["h"] = [str(v) for v in data["h"]]
    return data


def build_config(args):
    cfg = RunConfig()
    path = args.config or os.environ.get(CONFIG_ENV)
    if path:
        for k, v in load_config(path).items():
            setattr(cfg, k, v)
    # explicitly given flags; argparse defaults are None (or False for switches)
    for k, v in vars(args).items():
        if k in ("command", "config", "verbose") or v is None or v is False:
            continue
        if k in ("h", "family", "claims", "series", "tsets"):
            v = _split_list(v)
        setattr(cfg, k, v)
    bad = [f for f in cfg.family if f not in FAMILIES]
    if bad:
        raise ConfigError(f"unknown family {', '.join(bad)}; choose from {', '.join(FAMILIES)}")
    if cfg.workers < 1:
        raise ConfigError("--workers must be at least 1")
    return cfg


def _out_dir(cfg):
    p = Path(cfg.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write(path, header, lines):
    with open(path, "w") as fh:
        for h in header:
            fh.write(f"# {h}\n")
        for line in lines:
            fh.write(line + "\n")


def _settings_header(cfg, keys):
    d = asdict(cfg)
    return ["settings " + " ".join(f"{k}={d[k]}" for k in keys)]


def _pool_map(fun, jobs, workers):
    """Order-stable map over independent jobs."""
    if workers <= 1 or len(jobs) <= 1:
        return [fun(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fun, jobs))


# -- prove-orbits ---------------------------------------------------------------------


def _orbit_job(job):
    claim, opts = job
    return prove(claim, opts)


def orbit_claims(cfg):
    rows = [table_key(h) for h in cfg.h] if cfg.h else list(PROBE_TABLE)
    claims = []
    for k in rows:
        for fam in FAMILIES:
            if fam in PROBE_TABLE[k] and (not cfg.family or fam in cfg.family):
                claims.append(OrbitClaim.from_table(k, fam, cfg.half_width))
    if not claims:
        raise ConfigError("no probe table cell matches the selected energies and families")
    return claims


def cmd_prove_orbits(cfg):
    claims = orbit_claims(cfg)
    opts = cfg.map_options()
    reports = _pool_map(_orbit_job, [(c, opts) for c in claims], cfg.workers)
    for r in reports:
        print(r.line())
    lines = [r.line(timing=False) for r in reports]
    out = _out_dir(cfg) / "orbits.txt"
    _write(out, ["prove-orbits report, one line per cell",
                 *_settings_header(cfg, ("dt", "order", "floor", "min_dt", "half_width", "m1", "m2"))],
           lines)
    good = sum(r.verdict for r in reports)
    print(f"{good}/{len(reports)} cells proven; report written to {out}")
    return 0 if good == len(reports) else 1


# -- prove-coverings ------------------------------------------------------------------


def _covering_job(job):
    from .tsets import check_relation

    claim, maps, catalog, policy = job
    return check_relation(claim, maps, catalog, policy)


def _selected_claims(cfg, catalog):
    from .tsets import CoveringClaim, load_relations

    if cfg.all:
        claims = load_relations(cfg.relations)
    elif cfg.claims:
        claims = []
        for text in cfg.claims:
            try:
                claims.append(CoveringClaim.parse(text))
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
    else:
        raise ConfigError("select claims with --claims SRC:MAP:DST[:back],... or --all")
    for c in claims:
        for n in (c.source, c.target):
            if n not in catalog:
                raise ConfigError(f"claim {c.label()} references unknown t-set {n!r}; "
                                  f"known: {', '.join(sorted(catalog))}")
        try:
            c.check_branches(catalog)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    return claims


class Checkpoints(dict):
    """Per-claim verdict files under ``<out>/checkpoints`` (resumable runs)."""

    def __init__(self, root, tag):
        super().__init__()
        self.root = Path(root) / "checkpoints" / tag
        self.root.mkdir(parents=True, exist_ok=True)
        for f in sorted(self.root.glob("*.pkl")):
            with open(f, "rb") as fh:
                v = pickle.load(fh)
            super().__setitem__(v.claim.label(), v)

    @staticmethod
    def _fname(label):
        return label.replace(" ", "_").replace("<-", "back_").replace("->", "to_").replace("~", "t") + ".pkl"

    def __setitem__(self, key, value):
        super().__setitem__(key, value)
        with open(self.root / self._fname(key), "wb") as fh:
            pickle.dump(value, fh)


def cmd_prove_coverings(cfg):
    from .tsets import CoveringPolicy, ValidatedMaps, load_catalog, run_relation_suite

    try:
        catalog = load_catalog(cfg.catalog)
    except OSError as exc:
        raise ConfigError(f"cannot read t-set catalog: {exc}") from exc
    claims = _selected_claims(cfg, catalog)
    if len(cfg.h) > 1:
        raise ConfigError("prove-coverings takes a single energy")
    cfg.h = cfg.h or ["0.3"]
    h = cfg.h[0]
    policy = CoveringPolicy(segments=cfg.segments, max_segments=cfg.max_segments)
    maps = ValidatedMaps(h, cfg.map_options())
    out = _out_dir(cfg)
    tag = f"h{h}_dt{cfg.dt}_o{cfg.order}_s{cfg.segments}_m{cfg.m1}_{cfg.m2}"
    ckpt = Checkpoints(out, tag)
    todo = [c for c in claims if c.label() not in ckpt]
    if todo:
        print(f"checking {len(todo)} claim(s), {len(claims) - len(todo)} from checkpoints")
    for v in _pool_map(_covering_job, [(c, maps, catalog, policy) for c in todo], cfg.workers):
        ckpt[v.claim.label()] = v
        print(v.line())
    suite = run_relation_suite(claims, maps, catalog, policy, checkpoint=ckpt)
    header = ["prove-coverings report",
              *_settings_header(cfg, ("h", "dt", "order", "segments", "max_segments", "floor"))]
    _write(out / "coverings.txt", header, suite.lines(timing=False))
    ok = all(v.verdict for v in suite.verdicts)
    for c, f in suite.derived:
        print(f"{c.label():<16} derived from {f.label()} by reflection")
    print("composed edges: " + (" ".join(f"{a}->{b}" for a, b in suite.edges) or "none"))
    if suite.missing:
        print(f"{len(suite.missing)} edge(s) lack proven links; details in {out / 'coverings.txt'}")
    if ok and cfg.all and not suite.missing:
        _write(out / "edges.txt", ["composed P edges from a complete covering run", "source target"],
               [f"{a} {b}" for a, b in suite.edges])
        print(f"edge list written to {out / 'edges.txt'}")
    print(f"{sum(v.verdict for v in suite.verdicts)}/{len(suite.verdicts)} claims proven; "
          f"{len(suite.derived)} derived by symmetry; report in {out / 'coverings.txt'}")
    return 0 if ok else 1


# -- entropy ----------------------------------------------------------------------------


def cmd_entropy(cfg):
    from .symbolic import SYMBOLS, CoveringGraph, build_matrix, entropy_report, power_full_shift

    assumed = cfg.edges is None
    try:
        g = CoveringGraph.load(cfg.edges)
    except OSError as exc:
        raise ConfigError(f"cannot read edge list: {exc}") from exc
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad edge list: {exc}") from exc
    if not g.edges:
        raise ConfigError("the edge list is empty; run prove-coverings --all or pass --edges FILE")
    T = build_matrix(g)
    rep = entropy_report(T)
    full = power_full_shift(T, ("N0", "N5", "K0", "K2", "K3"), 30)
    lines = [f"edges: {'packaged list (assumed, not proven in this run)' if assumed else cfg.edges}",
             f"symbols: {' '.join(SYMBOLS)}", *rep.lines(),
             f"P^30 positive on N0 N5 K0 K2 K3: {'yes' if full else 'no'}"]
    for line in lines:
        print(line)
    _write(_out_dir(cfg) / "entropy.txt", ["entropy report"], lines)
    lower_ok = rep.root.a >= Fraction("1.62746")
    return 0 if (lower_ok and full) else 1


# -- explore ------------------------------------------------------------------------------


def cmd_explore(cfg):
    from . import explorer as ex
    from .tsets import load_catalog

    params = cfg.params()
    out = _out_dir(cfg)
    hs = cfg.h or ["0.1"]
    written = []
    for series in cfg.series:
        for h in hs:
            hf = float(h)
            if series in ("f-scan", "g-scan"):
                scanner = ex.f_scan if series == "f-scan" else ex.g_scan
                xs, ys, ch = scanner(hf, cfg.lo, cfg.hi, cfg.n, params=params)
                roots = [c for c in ch if c.kind == "root"]
                poles = [c for c in ch if c.kind == "pole"]
                note = (f"{series} at h={h} over ({cfg.lo}, {cfg.hi}); roots at "
                        + " ".join(f"{c.x:.6f}" for c in roots)
                        + "; discontinuities at " + " ".join(f"{c.x:.6f}" for c in poles))
                path = out / f"{series}_h{h}.csv"
                ex.write_series(path, ["x", "value"], zip(xs, ys), note)
                print(f"{series} h={h}: {len(roots)} root sign changes, {len(poles)} discontinuities")
            elif series == "orbit":
                xs = [cfg.x] if cfg.x else [v for v in PROBE_TABLE.get(table_key(h), {}).values()]
                for x in xs:
                    try:
                        tr = ex.orbit_trace(float(x), hf, params=params)
                    except ex.ExplorerError as exc:
                        print(f"orbit x={x} h={h}: {exc}")
                        continue
                    path = out / f"orbit_h{h}_x{x}.csv"
                    ex.write_series(path, ["t", "x", "px", "y", "py"], tr, f"orbit trace from x={x}, h={h}")
                    written.append(path)
                continue
            elif series == "zvc":
                pts = ex.zero_velocity_curve(hf, params=params)
                path = out / f"zvc_h{h}.csv"
                ex.write_series(path, ["x", "y"], pts, f"2 Omega(x, y) + h = 0 at h={h}")
            elif series == "tset":
                catalog = load_catalog(cfg.catalog)
                names = cfg.tsets or sorted(catalog)
                for name in names:
                    if name not in catalog:
                        raise ConfigError(f"unknown t-set {name!r}")
                    t = catalog[name]
                    path = out / f"tset_{name.replace('~', 't')}.csv"
                    ex.write_series(path, ["x", "px"], ex.tset_outline(t), f"outline of {name}")
                    img = ex.tset_image(t, hf, params=params)
                    path2 = out / f"tset_{name.replace('~', 't')}_image_h{h}.csv"
                    ex.write_series(path2, ["x", "px", "image_x", "image_px"], img,
                                    f"half-map images of the boundary of {name} at h={h}")
                    written += [path, path2]
                continue
            else:
                raise ConfigError(f"unknown series {series!r}; choose from f-scan, g-scan, orbit, zvc, tset")
            written.append(path)
    for p in written:
        print(f"wrote {p}")
    return 0


# -- argument parsing ---------------------------------------------------------------------


def _parser():
    p = argparse.ArgumentParser(prog="pcr3bp", description="Validated proofs for the equal-mass PCR3BP.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help=f"JSON config file (default: ${CONFIG_ENV})")
        sp.add_argument("--h", help="energy, or comma separated energies")
        sp.add_argument("--out", help="output directory (default: reports)")
        sp.add_argument("--workers", type=int, help="parallel worker processes")

    def integ(sp):
        sp.add_argument("--dt", type=float, help="maximal time step (default 1e-2; steps shrink adaptively)")
        sp.add_argument("--order", type=int, help="Taylor order (default 12)")

    o = sub.add_parser("prove-orbits", help="existence of the tabulated symmetric orbits")
    common(o)
    integ(o)
    o.add_argument("--family", help=f"comma separated subset of {','.join(FAMILIES)}")

    c = sub.add_parser("prove-coverings", help="covering and backcovering relations")
    common(c)
    integ(c)
    c.add_argument("--claims", help="comma separated SRC:MAP:DST or SRC:MAP:DST:back")
    c.add_argument("--all", action="store_true", help="the full relation list (long)")
    c.add_argument("--segments", type=int, help="boundary segments per edge (default 200)")

    e = sub.add_parser("entropy", help="characteristic polynomial and entropy bound")
    e.add_argument("--config")
    e.add_argument("--edges", help="edge list file (default: packaged list)")
    e.add_argument("--out")

    x = sub.add_parser("explore", help="NON-RIGOROUS data series for pictures and probe choice")
    common(x)
    x.add_argument("--series", help="comma separated: f-scan, g-scan, orbit, zvc, tset")
    x.add_argument("--lo", type=float)
    x.add_argument("--hi", type=float)
    x.add_argument("--n", type=int, help="scan samples")
    x.add_argument("--x", help="start abscissa for an orbit trace")
    x.add_argument("--tsets", help="comma separated t-set names")
    return p


COMMANDS = {"prove-orbits": cmd_prove_orbits, "prove-coverings": cmd_prove_coverings,
            "entropy": cmd_entropy, "explore": cmd_explore}


def main(argv=None):
    parser = _parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = build_config(args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"pcr3bp {args.command}: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
