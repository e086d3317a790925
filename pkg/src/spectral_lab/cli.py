"""spectral-lab command line: config parsing, experiment pipelines, table cache, reports.

Config files are INI-style (configparser).  Example::

    [potential]
    name = square-well
    amplitude = -4.0
    radius = 1.0

    [grid]
    nodes = 430

    [lambda]
    max = 40
    spacing = 0.078125

    [run]
    experiments = norms, spectrum, resolvent-bound
    output = out
    cache = use

Exit codes: 0 success, 2 validation failure, 3 numerical failure, 4 I/O.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import glob
import hashlib
import io
import json
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import potentials as pot
from . import resolvent as rv
from . import spectral_calculus as sc
from . import wave
from .errors import InvalidArgument, NumericalError, SpectralLabError
from .quadrature import CartesianGrid, build_ball_grid

log = logging.getLogger("spectral_lab")

EXPERIMENTS = ("grid", "norms", "spectrum", "resolvent-bound", "multiplier", "fractional", "wave", "strichartz")
CACHE_POLICIES = ("use", "off", "refresh")

DEFAULT_PAIRS = ((1.5, 0, 0, -1.5, 0, 0), (0, 2, 0, 0, -2, 0), (2, 0, 0, 2, 1, 0), (0, 0, 1.5, 1, 1, 1.5))


# ----------------------------------------------------------------------------
# config

@dataclass
class RunConfig:
    potential: dict = field(default_factory=lambda: {"name": "square-well", "amplitude": -4.0, "radius": 1.0})
    radius: float | None = None
    nodes: int = 430
    lam_max: float = 40.0
    lam_spacing: float = 0.078125
    eps_ladder: tuple = ()
    multiplier: dict = field(default_factory=lambda: {"name": "imaginary-power", "sigma": 1.0})
    alphas: tuple = (1.0, 2.0)
    pairs: tuple = DEFAULT_PAIRS
    t_grid: tuple = (0.5, 1.0, 2.0, 4.0)
    box_half_width: float = 3.0
    box_points: int = 32
    box_lam_max: float = 20.0
    box_lam_spacing: float = 0.075
    strichartz: tuple = (4.0, 4.0, 0.5)
    n_data: int = 10
    seed: int = 0
    experiments: tuple = ()
    output: str = "out"
    cache: str = "use"
    thresholds: dict = field(default_factory=dict)
    source: str = ""

    @property
    def support_radius(self) -> float:
        return float(self.potential.get("radius", 1.0))

    @property
    def grid_radius(self) -> float:
        return self.support_radius if self.radius is None else self.radius

    def digest(self) -> str:
        d = asdict(self)
        d.pop("source")
        d.pop("output")
        return hashlib.sha256(json.dumps(d, sort_keys=True, default=str).encode()).hexdigest()[:16]


def _floats(text, n=None):
    vals = tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())
    if n is not None and len(vals) != n:
        raise InvalidArgument(f"expected {n} numbers, got '{text}'")
    return vals


def _number(text):
    try:
        v = float(text)
    except ValueError:
        return text.strip()
    return int(v) if v.is_integer() and "." not in text and "e" not in text.lower() else v


def _pairs(text):
    out = []
    for item in text.split("|"):
        if item.strip():
            out.append(_floats(item, 6))
    return tuple(out)


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise InvalidArgument(f"malformed config: {exc}") from None
    cfg = RunConfig(source=source)
    try:
        if cp.has_section("potential"):
            cfg.potential = {k: _number(v) for k, v in cp["potential"].items()}
        if cp.has_section("grid"):
            g = cp["grid"]
            cfg.nodes = g.getint("nodes", cfg.nodes)
            cfg.radius = g.getfloat("radius", cfg.radius) if "radius" in g else None
        if cp.has_section("lambda"):
            s = cp["lambda"]
            cfg.lam_max = s.getfloat("max", cfg.lam_max)
            cfg.lam_spacing = s.getfloat("spacing", cfg.lam_spacing)
            cfg.eps_ladder = _floats(s.get("eps", ""))
        if cp.has_section("multiplier"):
            cfg.multiplier = {k: _number(v) for k, v in cp["multiplier"].items()}
        if cp.has_section("fractional"):
            cfg.alphas = _floats(cp["fractional"].get("alpha", "1, 2"))
        if cp.has_section("pairs"):
            cfg.pairs = _pairs(cp["pairs"].get("list", ""))
        if cp.has_section("wave"):
            w = cp["wave"]
            cfg.t_grid = _floats(w.get("t", "0.5, 1, 2, 4"))
        if cp.has_section("box"):
            b = cp["box"]
            cfg.box_half_width = b.getfloat("half_width", cfg.box_half_width)
            cfg.box_points = b.getint("points", cfg.box_points)
            cfg.box_lam_max = b.getfloat("lambda_max", cfg.box_lam_max)
            cfg.box_lam_spacing = b.getfloat("lambda_spacing", cfg.box_lam_spacing)
        if cp.has_section("strichartz"):
            s = cp["strichartz"]
            cfg.strichartz = (s.getfloat("p", 4.0), s.getfloat("q", 4.0), s.getfloat("s", 0.5))
            cfg.n_data = s.getint("samples", cfg.n_data)
            cfg.seed = s.getint("seed", cfg.seed)
        if cp.has_section("run"):
            r = cp["run"]
            cfg.experiments = tuple(e.strip() for e in r.get("experiments", "").split(",") if e.strip())
            cfg.output = r.get("output", cfg.output)
            cfg.cache = r.get("cache", cfg.cache).strip()
        if cp.has_section("thresholds"):
            cfg.thresholds = {k: v.strip() for k, v in cp["thresholds"].items()}
    except ValueError as exc:
        raise InvalidArgument(f"bad value in config: {exc}") from None
    validate(cfg)
    return cfg


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise FileNotFoundError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(p))


def validate(cfg: RunConfig) -> None:
    unknown = [e for e in cfg.experiments if e not in EXPERIMENTS]
    if unknown:
        raise InvalidArgument(f"unknown experiments {unknown}; known: {list(EXPERIMENTS)}")
    if cfg.cache not in CACHE_POLICIES:
        raise InvalidArgument(f"cache policy must be one of {CACHE_POLICIES}")
    if cfg.potential.get("name") not in pot.LIBRARY:
        raise InvalidArgument(f"unknown potential '{cfg.potential.get('name')}'")
    if cfg.lam_max <= 0 or cfg.lam_spacing <= 0:
        raise InvalidArgument("lambda max and spacing must be positive")
    rule = rv.resolution_spacing(2 * cfg.support_radius)
    if cfg.lam_spacing > rule * (1 + 1e-12):
        raise InvalidArgument(f"lambda spacing {cfg.lam_spacing} violates the resolution rule "
                              f"dlambda <= pi / (4 * diameter) = {rule:.6g}")
    if cfg.nodes < 50:
        raise InvalidArgument("grid needs at least 50 nodes")
    for k, v in cfg.thresholds.items():
        try:
            float(v)
        except ValueError:
            raise InvalidArgument(f"threshold {k} = '{v}' is not a number") from None


# ----------------------------------------------------------------------------
# output

def fmt17(x) -> str:
    return format(float(x), ".17g")


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if v is None:
        return "null"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt17(v) if math.isfinite(v) else "null"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_json_value(v[k])}" for k in sorted(v)) + "}"
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_json_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialise {type(v)}")


def dumps(obj) -> str:
    """JSON with every float printed to 17 significant digits, keys sorted."""
    return _json_value(obj) + "\n"


def write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format(float(v), ".9g") if isinstance(v, (float, np.floating)) else v for v in row])
    try:
        path.write_text(buf.getvalue())
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from None


@dataclass
class Report:
    config_hash: str
    records: list = field(default_factory=list)
    cache_hits: int = 0
    cache_misses: int = 0

    def add(self, experiment, quantity, value, threshold_key=None, thresholds=None, upper=True, **extra):
        rec = {"experiment": experiment, "quantity": quantity, "value": float(value),
               "config_hash": self.config_hash}
        if threshold_key and thresholds and threshold_key in thresholds:
            t = thresholds[threshold_key]
            rec["threshold"] = t
            rec["passed"] = bool(float(value) <= float(t)) if upper else bool(float(value) >= float(t))
        rec.update(extra)
        self.records.append(rec)
        return rec

    def as_dict(self):
        return {"config_hash": self.config_hash, "records": self.records,
                "cache": {"hits": self.cache_hits, "misses": self.cache_misses}}


# ----------------------------------------------------------------------------
# pipeline

class Context:
    """Lazily built grid, spectrum and tables shared by the experiments of one run."""

    def __init__(self, cfg: RunConfig, report: Report, outdir: Path):
        self.cfg = cfg
        self.report = report
        self.outdir = outdir
        params = {k: v for k, v in cfg.potential.items() if k != "name"}
        try:
            self.V = pot.make_potential(cfg.potential["name"], **params)
        except TypeError as exc:
            raise InvalidArgument(f"bad potential parameters: {exc}") from None
        self._grid = self._spectrum = self._table = None
        self._box = self._box_table = self._box_spectrum = None

    @property
    def grid(self):
        if self._grid is None:
            self._grid = build_ball_grid(self.cfg.grid_radius, self.cfg.nodes)
        return self._grid

    @property
    def spectrum(self):
        if self._spectrum is None:
            self._spectrum = (rv.empty_spectrum() if self.V.is_zero
                              else rv.find_bound_states(self.V, self.grid))
        return self._spectrum

    def check_spacing(self, spacing, spectrum, what):
        """The mu_1 / 8 half of the resolution rule, known once the spectrum is."""
        mus = spectrum.mus
        if len(mus) == 0:
            return
        rule = rv.resolution_spacing(2 * self.cfg.support_radius, float(max(mus)))
        if spacing > rule * (1 + 1e-12):
            raise InvalidArgument(f"{what} lambda spacing {spacing} violates the resolution rule "
                                  f"dlambda <= min(pi / (4 * diameter), mu_1 / 8) = {rule:.6g}")

    def _cache_path(self, grid, lam):
        key = hashlib.sha256((grid.digest() + self.V.label + json.dumps(self.V.params, sort_keys=True, default=str)
                              + lam.tobytes().hex() + str(self.cfg.eps_ladder)).encode()).hexdigest()[:24]
        return self.outdir / "cache" / f"table-{key}.bin"

    def table_for(self, grid, lam):
        cfg = self.cfg
        path = self._cache_path(grid, lam)
        if cfg.cache == "use" and path.exists() and not self.V.is_zero:
            try:
                t = rv.load_table(path, self.V, grid, lam, cfg.eps_ladder)
                self.report.cache_hits += 1
                return t
            except rv.CacheMismatch as exc:
                log.warning("cache %s rejected (%s); recomputing", path.name, exc)
        self.report.cache_misses += 1
        t = rv.build_resolvent_table(self.V, grid, lam, cfg.eps_ladder)
        if cfg.cache != "off" and not self.V.is_zero:
            path.parent.mkdir(parents=True, exist_ok=True)
            if not rv.save_table(t, path):
                log.info("table of %d bytes exceeds the cache budget; not cached", rv.table_bytes(t))
        return t

    @property
    def table(self):
        if self._table is None:
            self.check_spacing(self.cfg.lam_spacing, self.spectrum, "table")
            self._table = self.table_for(self.grid, rv.uniform_lambda_grid(self.cfg.lam_max, self.cfg.lam_spacing))
        return self._table

    @property
    def box(self):
        if self._box is None:
            self._box = CartesianGrid(self.cfg.box_half_width, self.cfg.box_points)
        return self._box

    def box_table(self):
        if self._box_table is None:
            from .cartesian import support_grid
            sg = support_grid(self.box, self.V)
            lam = rv.uniform_lambda_grid(self.cfg.box_lam_max, self.cfg.box_lam_spacing)
            self._box_spectrum = rv.empty_spectrum() if self.V.is_zero else rv.find_bound_states(self.V, sg)
            self.check_spacing(self.cfg.box_lam_spacing, self._box_spectrum, "box")
            self._box_table = rv.build_resolvent_table(self.V, sg, lam)
        return self._box_table, self._box_spectrum

    def pairs(self):
        return [(np.array(p[:3]), np.array(p[3:])) for p in self.cfg.pairs]


def exp_grid(ctx: Context):
    g = ctx.grid
    exact = 4 / 3 * np.pi * g.support_radius ** 3
    ctx.report.add("grid", "nodes", len(g.weights))
    ctx.report.add("grid", "volume_relative_error", abs(g.volume - exact) / exact, "grid_volume_error",
                   ctx.cfg.thresholds, digest=g.digest())
    write_csv(ctx.outdir / "grid.csv", ["x", "y", "z", "weight"],
              [tuple(p) + (w,) for p, w in zip(g.nodes, g.weights)])


def exp_norms(ctx: Context):
    rep = pot.norm_report(ctx.V, ctx.grid)
    th = ctx.cfg.thresholds
    ctx.report.add("norms", "kato", rep.kato, "kato_max", th)
    ctx.report.add("norms", "modified_kato", rep.modified_kato, "modified_kato_max", th)
    ctx.report.add("norms", "lorentz32", rep.lorentz32, "lorentz32_max", th)
    write_csv(ctx.outdir / "norms.csv", ["norm", "value"],
              [("kato", rep.kato), ("modified_kato", rep.modified_kato), ("lorentz32", rep.lorentz32)])


def exp_spectrum(ctx: Context):
    sp = ctx.spectrum
    rows = []
    oracle = []
    if ctx.V.label == "square-well":
        oracle = pot.square_well_levels(ctx.V.params["amplitude"], ctx.V.params["radius"])
    for j, e in enumerate(sp.bound_states):
        dev = abs(e.mu - oracle[j]) if j < len(oracle) else float("nan")
        extra = {"multiplicity": e.multiplicity}
        if j < len(oracle):
            extra["oracle"] = oracle[j]
            extra["oracle_deviation"] = dev
        ctx.report.add("spectrum", f"mu_{j + 1}", e.mu, **extra)
        rows.append((j + 1, e.mu, e.multiplicity, oracle[j] if j < len(oracle) else float("nan"), dev))
        print(f"mu_{j + 1} = {fmt17(e.mu)}" + (f"  oracle deviation {dev:.3e}" if j < len(oracle) else ""))
    if not sp.bound_states:
        print("no bound states")
    ctx.report.add("spectrum", "zero_energy_sigma_min", sp.resonance_sigma_min,
                   "zero_energy_sigma_min", ctx.cfg.thresholds, upper=False, resonance=sp.resonance_flag)
    write_csv(ctx.outdir / "spectrum.csv", ["index", "mu", "multiplicity", "oracle", "deviation"], rows)


def exp_resolvent_bound(ctx: Context):
    pairs = ctx.pairs()
    xs = np.array([a for a, _ in pairs])
    ys = np.array([b for _, b in pairs])
    r = np.linalg.norm(xs - ys, axis=1)
    K = ctx.table.kernel_sweep(xs, ys)
    lam = ctx.table.lambda_grid
    sup = float(np.max(np.abs(K) * r[None, :]))
    ctx.report.add("resolvent-bound", "sup_abs_kernel_times_distance", sup, "resolvent_bound_max", ctx.cfg.thresholds)
    rows = [(lam[i], p, K[i, p].real, K[i, p].imag) for i in range(len(lam)) for p in range(len(r))]
    write_csv(ctx.outdir / "resolvent_bound.csv", ["lambda", "pair", "re", "im"], rows)


def _multiplier_spec(cfg):
    m = dict(cfg.multiplier)
    name = m.pop("name")
    return sc.make_multiplier(name, **m)


def _kernel_rows(field_):
    return [tuple(x) + tuple(y) + (np.linalg.norm(x - y), v.real, v.imag)
            for x, y, v in zip(field_.xs, field_.ys, field_.values)]


HEADER_KERNEL = ["x1", "x2", "x3", "y1", "y2", "y3", "r", "re", "im"]


def exp_multiplier(ctx: Context):
    spec = _multiplier_spec(ctx.cfg)
    f = sc.assemble_multiplier_kernel(spec, ctx.table, ctx.spectrum, ctx.pairs(), tail_budget=None)
    r = f.distances
    ctx.report.add("multiplier", "sup_abs_kernel_times_distance_cubed", float(np.max(np.abs(f.values) * r ** 3)),
                   "multiplier_max", ctx.cfg.thresholds, label=spec.label,
                   max_tail_error=float(np.max(f.tail_error)))
    write_csv(ctx.outdir / "multiplier.csv", HEADER_KERNEL, _kernel_rows(f))


def exp_fractional(ctx: Context):
    rows = []
    for a in ctx.cfg.alphas:
        f = sc.assemble_fractional_kernel(a, sc.constant(1.0), ctx.table, ctx.spectrum, ctx.pairs(),
                                          tail_budget=None)
        r = f.distances
        slope = float(np.polyfit(np.log(r), np.log(np.abs(f.values)), 1)[0]) if len(set(r)) > 1 else float("nan")
        ctx.report.add("fractional", f"slope_alpha_{a:g}", slope, alpha=a, expected=a - 3)
        rows += [(a,) + row for row in _kernel_rows(f)]
    write_csv(ctx.outdir / "fractional.csv", ["alpha"] + HEADER_KERNEL, rows)


def exp_wave(ctx: Context):
    th = ctx.cfg.thresholds
    pairs = ctx.pairs()
    prof = wave.integrated_sine_profile(ctx.table, ctx.spectrum, pairs)
    ctx.report.add("wave", "integrated_sine_bound", float(prof.max()), "integrated_sine_max", th)
    t = np.asarray(ctx.cfg.t_grid, float)
    xs = np.array([a for a, _ in pairs])
    ys = np.array([b for _, b in pairs])
    dec = wave.sine_propagator_kernel(ctx.table, ctx.spectrum, xs, ys, t)
    rows = [(tt, *xs[p], *ys[p], dec.smooth[i, p], 0.0) for i, tt in enumerate(t) for p in range(len(xs))]
    write_csv(ctx.outdir / "sine_kernel.csv", ["t", "x1", "x2", "x3", "y1", "y2", "y3", "re", "im"], rows)
    y = np.array([0.0, 0.0, 1.5 * ctx.V.support_radius])
    ratios = wave.conical_ratios(ctx.table, ctx.spectrum, y, t)
    ctx.report.add("wave", "conical_ratio_max", float(ratios.max()), "conical_max", th)
    write_csv(ctx.outdir / "conical.csv", ["t", "ratio"], list(zip(t, ratios)))


def random_data(box, n, seed):
    """Smooth random bumps inside the middle third of the box."""
    rng = np.random.default_rng(seed)
    X, Y, Z = box.mesh()
    out = []
    for _ in range(n):
        c = rng.uniform(-box.half_width / 3, box.half_width / 3, 3)
        w = rng.uniform(0.3, 0.6)
        a = rng.standard_normal(2)
        g = np.exp(-((X - c[0]) ** 2 + (Y - c[1]) ** 2 + (Z - c[2]) ** 2) / (2 * w ** 2))
        out.append((a[0] * g, a[1] * g))
    return out


def exp_strichartz(ctx: Context):
    p, q, s = ctx.cfg.strichartz
    wave.check_admissible(p, q, s)
    table, spectrum = ctx.box_table()
    eng = sc.BoxEngine(table, spectrum)
    t = np.linspace(0.0, ctx.cfg.box_half_width / 2, 7)
    ratios = []
    for u0, u1 in random_data(ctx.box, ctx.cfg.n_data, ctx.cfg.seed):
        sol = wave.evolve(table, spectrum, u0, u1, None, t, engine=eng)
        ratios.append(wave.strichartz_ratio(sol, p, q, s))
    ratios = np.array(ratios)
    spread = float(ratios.max() / ratios.min())
    ctx.report.add("strichartz", "ratio_max", float(ratios.max()), "strichartz_max", ctx.cfg.thresholds)
    ctx.report.add("strichartz", "ratio_spread", spread, "strichartz_spread", ctx.cfg.thresholds)
    write_csv(ctx.outdir / "strichartz.csv", ["p", "q", "s", "ratio"], [(p, q, s, r) for r in ratios])


RUNNERS = {"grid": exp_grid, "norms": exp_norms, "spectrum": exp_spectrum, "resolvent-bound": exp_resolvent_bound,
           "multiplier": exp_multiplier, "fractional": exp_fractional, "wave": exp_wave,
           "strichartz": exp_strichartz}


def run(cfg: RunConfig, outdir=None) -> Report:
    """Run the configured experiments in pipeline order; write JSON and CSV artifacts."""
    outdir = Path(outdir or cfg.output)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {outdir}: {exc.strerror}") from None
    report = Report(cfg.digest())
    ctx = Context(cfg, report, outdir)
    for name in EXPERIMENTS:
        if name not in cfg.experiments:
            continue
        t0 = time.perf_counter()
        try:
            RUNNERS[name](ctx)
        except NumericalError as exc:
            report.add(name, "aborted", float("nan"), error=f"{type(exc).__name__}: {exc}")
            log.error("%s aborted: %s", name, exc)
            raise
        log.info("%s done in %.1f s", name, time.perf_counter() - t0)
    stem = "report" if len(cfg.experiments) != 1 else cfg.experiments[0]
    (outdir / f"{stem}.json").write_text(dumps(report.as_dict()))
    return report


def merge_reports(paths) -> list:
    """Records from several JSON reports, sorted by (experiment, quantity, config hash)."""
    recs = []
    for p in paths:
        try:
            data = json.loads(Path(p).read_text())
        except OSError as exc:
            raise OSError(f"cannot read report {p}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise InvalidArgument(f"{p} is not a JSON report: {exc}") from None
        recs.extend(data.get("records", []))
    recs.sort(key=lambda r: (r.get("experiment", ""), r.get("quantity", ""), r.get("config_hash", "")))
    return recs


# ----------------------------------------------------------------------------
# entry point

def build_parser():
    ap = argparse.ArgumentParser(prog="spectral-lab", description=__doc__.split("\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS + ("run",):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out", default=None)
    rp = sub.add_parser("report")
    rp.add_argument("paths", nargs="+")
    rp.add_argument("--csv", default=None)
    return ap


def _cmd_report(args):
    paths = sorted({p for pat in args.paths for p in (glob.glob(pat) or [pat])})
    recs = merge_reports(paths)
    rows = [(r.get("experiment"), r.get("quantity"), r.get("value"), r.get("threshold", ""),
             r.get("passed", ""), r.get("config_hash")) for r in recs]
    header = ["experiment", "quantity", "value", "threshold", "passed", "config_hash"]
    if args.csv:
        write_csv(Path(args.csv), header, rows)
    for row in rows:
        v = row[2]
        print(f"{row[0]:<16} {row[1]:<40} {format(v, '.9g') if isinstance(v, float) else v!s:>16} "
              f"{row[3]!s:>10} {row[4]!s:>6}")
    return 0


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "report":
            return _cmd_report(args)
        cfg = load_config(args.config)
        if args.command != "run":
            cfg.experiments = (args.command,)
        report = run(cfg, args.out)
        for r in report.records:
            status = "" if "passed" not in r else ("  PASS" if r["passed"] else "  FAIL")
            print(f"{r['experiment']}: {r['quantity']} = {fmt17(r['value'])}{status}")
        return 0
    except (InvalidArgument, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4
    except SpectralLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
