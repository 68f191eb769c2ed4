"""Command-line entry point.

Every subcommand resolves its parameters as defaults < ``--config`` file <
explicit flags (``METRIQ_SEED`` beats ``--seed``), runs, and writes JSON or
CSV to ``--out`` (stdout if omitted).  With ``--out`` a run manifest is
written next to the output so ``metriq replay`` can reproduce it.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .coherent import FiducialSpec, default_quadrature, kernel_table
from .config import GlobalConfig
from .errors import InvalidParameter, MetriqError
from .fock import observable_spectrum
from .geometry import geometry_report
from .phase import (CARTESIAN, POLAR, ROTATED_45, PhaseSpacePoint, get_chart,
                    observable_from_json, transport)
from .propagators import (LatticeConfig, PropagatorEstimate, WienerConfig, exact_propagator, lattice_kernel,
                          richardson, wiener_propagator)
from .semiclassical import bohr_sommerfeld
from .spin import SpinSpec, casimir_defect, spin_induced_metric, spin_resolution_defect
from .toeplitz import (admissibility, radius_for_degree, toeplitz_quantize, toeplitz_spectrum,
                       upper_of_toeplitz_gap, weyl_symbol)
from .verify import SUITES, verify_suite

CHART_ALIASES = {"polar": POLAR, "rotated": ROTATED_45, "cart": CARTESIAN}

COMMON = {"hbar": 1.0, "fock_dim": 64, "omega": 1.0, "seed": 0, "threads": None}
DEFAULTS = {
    "quantize": {"observable": None, "radius_sigmas": None, "nodes_radial": 120, "nodes_angular": 120},
    "spectrum": {"observable": None, "k": 10, "quantization": "toeplitz"},
    "symbols": {"observable": None, "extent": 2.0, "grid": 9, "kernel_pairs": None},
    "metric": {"chart": CARTESIAN, "points": None, "point": None},
    "bohr-sommerfeld": {"observable": None, "levels": 8},
    "propagate": {"method": "exact", "observable": None, "from": "0,0", "to": "0,0", "T": 0.5,
                  "nu": "8", "samples": 200_000, "steps": 64, "batches": 20, "lattice_n": 400,
                  "chart": CARTESIAN, "symbol": "lower"},
    "spin-check": {"spin": 2.0, "nodes": 32},
    "verify": {"suite": "core", "spin": None},
}


# -- serialisation -------------------------------------------------------------

def _plain(x):
    if isinstance(x, complex) or isinstance(x, np.complexfloating):
        return {"re": float(x.real), "im": float(x.imag)}
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()] if x.dtype.kind == "c" else x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


def dump_json(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


def dump_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def dump_columns(header, rows) -> str:
    lines = ["# " + " ".join(header)]
    lines += [" ".join(f"{float(v):.17g}" for v in r) for r in rows]
    return "\n".join(lines) + "\n"


@dataclass
class Result:
    text: str
    plot: str | None = None
    ok: bool = True


@dataclass
class RunManifest:
    command: str
    config_hash: str
    seed: int
    versions: str
    outputs: list = field(default_factory=list)
    params: dict = field(default_factory=dict)
    output_sha256: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"command": self.command, "config_hash": self.config_hash, "seed": self.seed,
                "versions": self.versions, "outputs": self.outputs, "params": self.params,
                "output_sha256": self.output_sha256}


def config_hash(command: str, params: dict) -> str:
    blob = json.dumps({"command": command, "params": params}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def versions() -> str:
    import scipy
    return (f"metriq {__version__}; python {platform.python_version()}; "
            f"numpy {np.__version__}; scipy {scipy.__version__}")


# -- parsing helpers -------------------------------------------------------------

def _pair(s) -> tuple[float, float]:
    if isinstance(s, (list, tuple)):
        vals = [float(v) for v in s]
    else:
        vals = [float(v) for v in str(s).split(",")]
    if len(vals) != 2:
        raise InvalidParameter(f"expected 'c1,c2', got {s!r}")
    return vals[0], vals[1]


def _floats(s) -> list[float]:
    if isinstance(s, (int, float)):
        return [float(s)]
    if isinstance(s, (list, tuple)):
        return [float(v) for v in s]
    return [float(v) for v in str(s).split(",")]


def _chart_id(name: str) -> str:
    return CHART_ALIASES.get(name, name)


def _observable(src):
    if src is None:
        raise InvalidParameter("--observable is required")
    data = src
    if not isinstance(src, dict):
        text = str(src)
        if not text.lstrip().startswith("{"):
            try:
                text = Path(text).read_text()
            except OSError as exc:
                raise InvalidParameter(f"cannot read observable file {src!r}: {exc}") from None
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidParameter(f"observable is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise InvalidParameter("observable JSON must be an object")
    if "chart" in data:
        data = {**data, "chart": _chart_id(data["chart"])}
    return observable_from_json(data)


def _read_points(path) -> list[tuple[float, float]]:
    if isinstance(path, list):
        return [_pair(x) for x in path]
    try:
        rows = list(csv.reader(Path(path).read_text().splitlines()))
    except OSError as exc:
        raise InvalidParameter(f"cannot read points file {path!r}: {exc}") from None
    pts = []
    for r in rows:
        r = [x.strip() for x in r if x.strip()]
        if not r or r[0].startswith("#"):
            continue
        try:
            pts.append((float(r[0]), float(r[1])))
        except (ValueError, IndexError):
            if pts:
                raise InvalidParameter(f"bad point row {r!r}") from None
    return pts


def _read_pairs(path) -> list[tuple]:
    if isinstance(path, list):
        return [tuple(float(x) for x in r) for r in path]
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise InvalidParameter(f"cannot read pairs file {path!r}: {exc}") from None
    rows = []
    for line in lines:
        parts = line.replace(",", " ").split()
        if len(parts) != 4 or line.lstrip().startswith("#"):
            continue
        try:
            rows.append(tuple(float(x) for x in parts))
        except ValueError:
            continue
    return rows


def materialize(params: dict) -> dict:
    """Inline file inputs so a manifest replays without the original files."""
    p = dict(params)
    if isinstance(p.get("observable"), str):
        p["observable"] = _observable(p["observable"]).to_json()
    if isinstance(p.get("points"), str):
        p["points"] = [list(x) for x in _read_points(p["points"])]
    if isinstance(p.get("kernel_pairs"), str):
        p["kernel_pairs"] = [list(x) for x in _read_pairs(p["kernel_pairs"])]
    return p


def _cfg(p) -> GlobalConfig:
    return GlobalConfig(hbar=float(p["hbar"]), fock_dim=int(p["fock_dim"]))


# -- subcommands -------------------------------------------------------------------

def cmd_quantize(p) -> Result:
    cfg, fid = _cfg(p), FiducialSpec(float(p["omega"]))
    h = _observable(p["observable"])
    if h.chart_id != CARTESIAN:
        h = transport(h, h.chart_id, CARTESIAN)
    radius = p["radius_sigmas"] or radius_for_degree(h.degree)
    quad = default_quadrature(cfg, fid, float(radius), int(p["nodes_radial"]), int(p["nodes_angular"]))
    op = toeplitz_quantize(h, quad, fid, cfg)
    out = {"operator": op.to_json(), "admissibility": admissibility(h).to_json(),
           "quadrature": quad.to_json(), "hbar": cfg.hbar, "omega": fid.omega}
    plot = dump_columns(["n", "diag_re"], [(n, d) for n, d in enumerate(np.diag(op.entries).real)])
    return Result(dump_json(out), plot)


def cmd_spectrum(p) -> Result:
    cfg, om = _cfg(p), float(p["omega"])
    h = _observable(p["observable"])
    if h.chart_id != CARTESIAN:
        h = transport(h, h.chart_id, CARTESIAN)
    k = int(p["k"])
    if p["quantization"] == "weyl":
        sp = observable_spectrum(h.terms, k, cfg, om)
    elif p["quantization"] == "toeplitz":
        sp = toeplitz_spectrum(h, k, None, FiducialSpec(om), cfg)
    else:
        raise InvalidParameter(f"quantization must be 'weyl' or 'toeplitz', got {p['quantization']!r}")
    out = {"values": sp.values, "drift": sp.drift, "flagged": sp.flagged,
           "quantization": p["quantization"]}
    plot = dump_columns(["n", "E_n"], list(enumerate(sp.values)))
    return Result(dump_json(out), plot)


def cmd_symbols(p) -> Result:
    cfg, fid = _cfg(p), FiducialSpec(float(p["omega"]))
    if p["kernel_pairs"]:
        pairs = [((p2, q2), (p1, q1)) for p2, q2, p1, q1 in _read_pairs(p["kernel_pairs"])]
        tab = kernel_table(pairs, fid, cfg.hbar)
        return Result(dump_csv(["p2", "q2", "p1", "q1", "re", "im"], tab))
    h = _observable(p["observable"])
    if h.chart_id != CARTESIAN:
        h = transport(h, h.chart_id, CARTESIAN)
    P, Q, gap = upper_of_toeplitz_gap(h, None, fid, cfg, float(p["extent"]), int(p["grid"]))
    hv = h.values(P, Q)
    rows = [(a, b, c, c + d, d) for a, b, c, d in zip(P, Q, hv, gap)]
    head = ["p", "q", "lower", "upper", "gap"]
    return Result(dump_csv(head, rows), dump_columns(head, rows))


def cmd_metric(p) -> Result:
    cfg, fid = _cfg(p), FiducialSpec(float(p["omega"]))
    chart = _chart_id(p["chart"])
    pts = []
    if p["points"]:
        pts += _read_points(p["points"])
    if p["point"]:
        pts += [_pair(x) for x in (p["point"] if isinstance(p["point"], list) else [p["point"]])]
    if not pts:
        raise InvalidParameter("give --points FILE or --point c1,c2")
    get_chart(chart)
    rows = [geometry_report(PhaseSpacePoint(c1, c2, chart), chart, fid, cfg).row() for c1, c2 in pts]
    head = ["c1", "c2", "g11", "g12", "g22", "theta1", "theta2", "omega"]
    return Result(dump_csv(head, rows), dump_columns(head, rows))


def cmd_bohr_sommerfeld(p) -> Result:
    cfg = _cfg(p)
    h = _observable(p["observable"])
    n = int(p["levels"])
    if n < 1:
        raise InvalidParameter("--levels must be at least 1")
    levels = bohr_sommerfeld(h, n - 1, cfg)
    rows = [(lv.n, lv.energy, lv.area_residual) for lv in levels]
    return Result(dump_csv(["n", "E_n", "area_residual"], rows),
                  dump_columns(["n", "E_n"], [(a, b) for a, b, _ in rows]))


def cmd_propagate(p) -> Result:
    cfg, fid = _cfg(p), FiducialSpec(float(p["omega"]))
    h = _observable(p["observable"])
    T = float(p["T"])
    method = p["method"]
    a, b = _pair(p["from"]), _pair(p["to"])
    if method == "exact":
        if h.chart_id != CARTESIAN:
            h = transport(h, h.chart_id, CARTESIAN)
        est = exact_propagator(h, a, b, T, None, fid, cfg)
    elif method == "lattice":
        if h.chart_id != CARTESIAN:
            h = transport(h, h.chart_id, CARTESIAN)
        if p["symbol"] == "lower":
            H = weyl_symbol(h, fid, cfg.hbar)
        elif p["symbol"] == "weyl":
            H = h
        else:
            raise InvalidParameter(f"--symbol must be 'lower' or 'weyl', got {p['symbol']!r}")
        lat = LatticeConfig(T, int(p["lattice_n"]))
        val = lattice_kernel(H, lat, cfg).coherent_element(b, a, fid)
        est = PropagatorEstimate(complex(val), 0.0, "lattice_weyl",
                                 {"T": T, "N": lat.N, "symbol": p["symbol"], "hbar": cfg.hbar})
    elif method == "wiener":
        chart = _chart_id(p["chart"])
        if h.chart_id != chart:
            h = transport(h, h.chart_id, chart)
        seed = int(p["seed"])
        base = WienerConfig(1.0, int(p["steps"]), int(p["samples"]), seed,
                            n_batches=int(p["batches"]), threads=p["threads"])
        ests = [wiener_propagator(h, PhaseSpacePoint(*a, chart), PhaseSpacePoint(*b, chart), T,
                                  base.replace(nu=nu), fid, cfg, chart=chart)
                for nu in _floats(p["nu"])]
        if len(ests) == 1:
            est = ests[0]
        elif len(ests) == 2:
            est = richardson(*ests)
        else:
            raise InvalidParameter("--nu takes one value or two for Richardson extrapolation")
    else:
        raise InvalidParameter(f"unknown method {method!r}; use exact, lattice or wiener")
    return Result(dump_json(est.to_json()))


def cmd_spin_check(p) -> Result:
    spec = SpinSpec(float(p["spin"]), float(p["hbar"]))
    n = int(p["nodes"])
    if n < 2:
        raise InvalidParameter("--nodes must be at least 2")
    thetas = np.linspace(0.3, math.pi - 0.3, 9)
    rnd = 0.0
    rows = []
    for th in thetas:
        g = spin_induced_metric(float(th), 0.4, spec)
        ratio = g[1, 1] / g[0, 0]
        rnd = max(rnd, abs(ratio - math.sin(th) ** 2))
        rows.append((th, g[0, 0], g[1, 1], ratio))
    out = {"casimir_defect": casimir_defect(spec),
           "resolution_defect": spin_resolution_defect(spec, n, n),
           "metric_roundness": rnd, "s": spec.s, "hbar": spec.hbar, "nodes": n}
    return Result(dump_json(out), dump_columns(["theta", "g_thth", "g_phph", "ratio"], rows))


def cmd_verify(p) -> Result:
    cfg = _cfg(p)
    if p["suite"] not in SUITES:
        raise InvalidParameter(f"unknown suite {p['suite']!r}; choose from {', '.join(SUITES)}")
    spins = tuple(_floats(p["spin"])) if p["spin"] is not None else None
    rep = verify_suite(p["suite"], cfg, int(p["seed"]), spins)
    print(rep.table(), file=sys.stderr)
    return Result(dump_json(rep.to_json()), ok=rep.passed)


COMMANDS = {"quantize": cmd_quantize, "spectrum": cmd_spectrum, "symbols": cmd_symbols,
            "metric": cmd_metric, "bohr-sommerfeld": cmd_bohr_sommerfeld,
            "propagate": cmd_propagate, "spin-check": cmd_spin_check, "verify": cmd_verify}


# -- argument parsing ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("common")
    g.add_argument("--out", default=None, help="output file (stdout if omitted)")
    g.add_argument("--config", default=None, help="JSON file of parameters; explicit flags win")
    g.add_argument("--manifest", default=None, help="manifest path (default: OUT.manifest.json)")
    g.add_argument("--emit-plot-data", dest="emit_plot_data", default=None,
                   help="also write whitespace-separated columns for plotting")
    g.add_argument("--seed", type=int, default=S, help="RNG seed; METRIQ_SEED overrides")
    g.add_argument("--threads", type=int, default=S, help="cap on worker threads")
    g.add_argument("--hbar", type=float, default=S)
    g.add_argument("--fock-dim", dest="fock_dim", type=int, default=S)
    g.add_argument("--omega", type=float, default=S, help="fiducial squeeze Omega")

    ap = argparse.ArgumentParser(prog="metriq", description="Coherent-state quantization toolkit.")
    ap.add_argument("--version", action="version", version=f"metriq {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    q = sub.add_parser("quantize", parents=[common], help="Toeplitz operator of an observable")
    q.add_argument("--observable", default=S, help="JSON file or inline JSON")
    q.add_argument("--radius-sigmas", dest="radius_sigmas", type=float, default=S)
    q.add_argument("--nodes-radial", dest="nodes_radial", type=int, default=S)
    q.add_argument("--nodes-angular", dest="nodes_angular", type=int, default=S)

    s = sub.add_parser("spectrum", parents=[common], help="low eigenvalues with drift flags")
    s.add_argument("--observable", default=S)
    s.add_argument("--k", type=int, default=S)
    s.add_argument("--quantization", default=S, help="toeplitz (default) or weyl")

    y = sub.add_parser("symbols", parents=[common], help="upper symbol of Toeplitz(h) on a grid")
    y.add_argument("--observable", default=S)
    y.add_argument("--extent", type=float, default=S)
    y.add_argument("--grid", type=int, default=S)
    y.add_argument("--kernel-pairs", dest="kernel_pairs", default=S,
                   help="file of p2,q2,p1,q1 rows; emits the reproducing kernel as CSV")

    m = sub.add_parser("metric", parents=[common], help="one-form, two-form and metric at points")
    m.add_argument("--chart", default=S)
    m.add_argument("--points", default=S, help="CSV of c1,c2")
    m.add_argument("--point", action="append", default=S, help="c1,c2 (repeatable)")

    b = sub.add_parser("bohr-sommerfeld", parents=[common], help="semiclassical levels")
    b.add_argument("--observable", default=S)
    b.add_argument("--levels", type=int, default=S)

    pr = sub.add_parser("propagate", parents=[common], help="coherent-state propagator")
    pr.add_argument("--method", default=S, help="exact, lattice or wiener")
    pr.add_argument("--observable", default=S)
    pr.add_argument("--from", dest="from", default=S, help="p,q")
    pr.add_argument("--to", default=S, help="p,q")
    pr.add_argument("--T", dest="T", type=float, default=S)
    pr.add_argument("--nu", default=S, help="one value, or two (comma separated) to extrapolate")
    pr.add_argument("--samples", type=int, default=S)
    pr.add_argument("--steps", type=int, default=S)
    pr.add_argument("--batches", type=int, default=S)
    pr.add_argument("--lattice-n", dest="lattice_n", type=int, default=S)
    pr.add_argument("--chart", default=S, help="sampling chart for wiener")
    pr.add_argument("--symbol", default=S, help="lattice: observable is the 'lower' or 'weyl' symbol")

    sp = sub.add_parser("spin-check", parents=[common], help="spin Casimir, resolution, metric")
    sp.add_argument("--spin", type=float, default=S)
    sp.add_argument("--nodes", type=int, default=S)

    v = sub.add_parser("verify", parents=[common], help="invariant suite table")
    v.add_argument("--suite", default=S, help=", ".join(SUITES))
    v.add_argument("--spin", default=S, help="spins for the spin suite, comma separated")

    r = sub.add_parser("replay", help="rerun a manifest and compare outputs")
    r.add_argument("manifest")
    r.add_argument("--out", default=None)
    return ap


def resolve(command: str, explicit: dict, config: dict | None, env=None) -> dict:
    env = os.environ if env is None else env
    params = {**COMMON, **DEFAULTS[command]}
    for src in (config or {}, explicit):
        for k, v in src.items():
            k = k.replace("-", "_") if k.replace("-", "_") in params else k
            if k not in params:
                raise InvalidParameter(f"unknown parameter {k!r} for {command}")
            params[k] = v
    if env.get("METRIQ_SEED"):
        try:
            params["seed"] = int(env["METRIQ_SEED"])
        except ValueError:
            raise InvalidParameter("METRIQ_SEED must be an integer") from None
    return params


def _write(path, text):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def execute(command: str, params: dict, out=None, plot=None, manifest=None) -> tuple[int, str]:
    res = COMMANDS[command](params)
    _write(out, res.text)
    outputs = [out] if out else []
    hashes = [hashlib.sha256(res.text.encode()).hexdigest()]
    if plot and res.plot is not None:
        Path(plot).write_text(res.plot)
        outputs.append(plot)
    man_path = manifest or (f"{out}.manifest.json" if out else None)
    if man_path:
        man = RunManifest(command, config_hash(command, params), int(params.get("seed", 0)),
                          versions(), outputs, params, hashes)
        Path(man_path).write_text(dump_json(man.to_json()))
    return (0 if res.ok else 1), res.text


def replay(path, out=None) -> int:
    data = json.loads(Path(path).read_text())
    command, params = data["command"], data["params"]
    if config_hash(command, params) != data["config_hash"]:
        raise InvalidParameter("manifest parameters do not match its config hash")
    res = COMMANDS[command](params)
    digest = hashlib.sha256(res.text.encode()).hexdigest()
    recorded = (data.get("output_sha256") or [None])[0]
    report = {"command": command, "config_hash": data["config_hash"], "seed": data["seed"],
              "reproduced": digest == recorded, "sha256": digest, "recorded_sha256": recorded}
    _write(out, dump_json(report))
    return 0 if report["reproduced"] else 1


def main(argv=None) -> int:
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    out = args.pop("out", None)
    try:
        if command == "replay":
            return replay(args["manifest"], out)
        cfg_path = args.pop("config")
        plot = args.pop("emit_plot_data")
        manifest = args.pop("manifest")
        config = None
        if cfg_path:
            try:
                config = json.loads(Path(cfg_path).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise InvalidParameter(f"cannot read config {cfg_path!r}: {exc}") from None
        params = materialize(resolve(command, args, config))
        code, _ = execute(command, params, out, plot, manifest)
        return code
    except MetriqError as exc:
        err = dump_json({"error": type(exc).__name__, "message": str(exc)})
        if out:
            Path(out).write_text(err)
        sys.stdout.write(err)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
