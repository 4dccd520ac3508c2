"""Command-line interface: ``spraytube <command> --config job.json``.

Exit codes: 0 success, 1 comparison failure, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import jsonschema
import numpy as np

from . import __version__
from .core import FractalSpray, FractalString, SelfSimilarSystem, validate_rep
from .errors import ConfigError, GrammarError, SprayTubeError
from .expressions import parse
from .generators import builtin, custom_rep
from .oracle import apollonian_packing, apollonian_string, direct_tube, direct_tube_bounded
from .scalingzeta import (
    LatticeStructure,
    Window,
    complex_dimensions,
    lattice_classify,
    pole_strip,
    zeta_eval,
    zeta_series_bound,
)
from .core import Screen
from .tubeformula import (
    TruncationSpec,
    coeff_c_k,
    coeff_e_k,
    expand,
    screen_error_term,
    tube_value,
    visible_sum,
)
from .tubularzeta import TubularZetaContext

_num = {"type": ["number", "string"]}

SCHEMA = {
    "type": "object",
    "required": ["version", "spray"],
    "properties": {
        "version": {"const": 1},
        "spray": {
            "type": "object",
            "oneOf": [
                {"required": ["system"]},
                {"required": ["scales"]},
                {"required": ["apollonian"]},
            ],
            "properties": {
                "system": {
                    "type": "object",
                    "required": ["ratios", "dim"],
                    "properties": {
                        "ratios": {"type": "array", "items": _num, "minItems": 2},
                        "dim": {"type": "integer", "minimum": 1},
                    },
                    "additionalProperties": False,
                },
                "scales": {"type": "array", "items": _num, "minItems": 1},
                "dim": {"type": "integer", "minimum": 1},
                "apollonian": {
                    "type": "object",
                    "required": ["curvatures", "min_radius"],
                    "properties": {
                        "curvatures": {"type": "array", "items": _num, "minItems": 4, "maxItems": 4},
                        "min_radius": {"type": "number", "exclusiveMinimum": 0},
                    },
                    "additionalProperties": False,
                },
            },
            "additionalProperties": False,
        },
        "generator": {
            "type": "object",
            "oneOf": [{"required": ["builtin"]}, {"required": ["custom"]}],
            "properties": {
                "builtin": {
                    "type": "object",
                    "required": ["name"],
                    "properties": {"name": {"type": "string"}, "size": {"type": "number", "exclusiveMinimum": 0}},
                    "additionalProperties": False,
                },
                "custom": {
                    "type": "object",
                    "required": ["d", "g", "pieces"],
                    "properties": {
                        "d": {"type": "integer", "minimum": 1},
                        "g": _num,
                        "name": {"type": "string"},
                        "volume": {"type": "number"},
                        "pieces": {
                            "type": "array",
                            "minItems": 1,
                            "items": {
                                "type": "object",
                                "required": ["upto", "kappa"],
                                "properties": {"upto": _num, "kappa": {"type": "array", "items": _num}},
                                "additionalProperties": False,
                            },
                        },
                    },
                    "additionalProperties": False,
                },
            },
            "additionalProperties": False,
        },
        "job": {
            "type": "object",
            "properties": {
                "eps": {
                    "oneOf": [
                        {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
                        {
                            "type": "object",
                            "required": ["start", "stop", "num"],
                            "properties": {
                                "start": {"type": "number", "exclusiveMinimum": 0},
                                "stop": {"type": "number", "exclusiveMinimum": 0},
                                "num": {"type": "integer", "minimum": 1},
                                "spacing": {"enum": ["log", "linear"]},
                                "relative_to_g": {"type": "boolean"},
                                "endpoint": {"type": "boolean"},
                            },
                            "additionalProperties": False,
                        },
                    ]
                },
                "N": {"type": "integer", "minimum": 1},
                "T": {"type": "number", "exclusiveMinimum": 0},
                "rel_tol": {"type": "number", "exclusiveMinimum": 0},
                "window": {
                    "type": "object",
                    "properties": {
                        "re": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                        "im_max": {"type": "number", "minimum": 0},
                    },
                    "additionalProperties": False,
                },
                "s": {
                    "type": "array",
                    "items": {"oneOf": [
                        {"type": "number"},
                        {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                    ]},
                },
                "sample_count": {"type": "integer", "minimum": 2},
                "sigma": {"type": "number"},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

DEFAULT_REL_TOL = 1e-3


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    return format(x + 0.0 if x == 0 else x, ".17g")


def _value(x) -> float:
    if isinstance(x, str):
        e = parse(x)
        if e.depends_on_eps():
            raise GrammarError(f"{x!r} may not depend on eps")
        return float(e.evaluate(0.0, 0.0))
    return float(x)


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config schema violation at {where}: {exc.message}") from None
    return cfg


class Job:
    """A parsed configuration: spray, generator and command parameters."""

    def __init__(self, cfg: dict, need_generator: bool = True):
        self.cfg = cfg
        self.job = cfg.get("job", {})
        sp = cfg["spray"]
        self.system: Optional[SelfSimilarSystem] = None
        self.packing = None
        if "system" in sp:
            ratios = [_value(r) for r in sp["system"]["ratios"]]
            self.system = SelfSimilarSystem(tuple(ratios), sp["system"]["dim"])
            self.string = FractalString.self_similar(self.system)
            self.dim = self.system.ambient_dim
        elif "scales" in sp:
            self.string = FractalString.explicit([_value(x) for x in sp["scales"]])
            self.dim = sp.get("dim")
        else:
            ap = sp["apollonian"]
            seed = [_value(x) for x in ap["curvatures"]]
            self.packing = apollonian_packing(seed, ap["min_radius"])
            self.string = apollonian_string(seed, ap["min_radius"], self.packing)
            self.dim = 2
        self.rep = None
        if "generator" in cfg:
            self.rep = self._generator(cfg["generator"])
            if self.dim is not None and self.rep.d != self.dim:
                raise ConfigError(f"string lives in dimension {self.dim} but the generator in {self.rep.d}")
        elif need_generator:
            raise ConfigError("this command needs a 'generator'")

    def _generator(self, gcfg: dict, validate: bool = True):
        if "builtin" in gcfg:
            b = gcfg["builtin"]
            size = b.get("size")
            if size is None:
                size = self.string.meta.get("r_max", 1.0) if self.packing is not None else 1.0
            return builtin(b["name"], size)
        c = gcfg["custom"]
        return custom_rep(c["d"], c["g"], c["pieces"], name=c.get("name", "custom"),
                          volume=c.get("volume"), validate=validate)

    @property
    def spray(self) -> FractalSpray:
        return FractalSpray(self.string, (self.rep,), self.system)

    @property
    def trunc(self) -> TruncationSpec:
        return TruncationSpec(self.job.get("N", 10_000), float(self.job.get("T", 100.0)))

    def eps_grid(self) -> list:
        spec = self.job.get("eps")
        g = self.rep.g
        if spec is None:
            spec = {"start": 3.0 ** -8, "stop": 1.0, "num": 50, "relative_to_g": True, "endpoint": False}
        if isinstance(spec, list):
            return [float(e) for e in spec]
        scale = g if spec.get("relative_to_g", False) else 1.0
        a, b, n = spec["start"] * scale, spec["stop"] * scale, spec["num"]
        endpoint = spec.get("endpoint", True)
        if spec.get("spacing", "log") == "log":
            pts = np.logspace(math.log10(a), math.log10(b), n, endpoint=endpoint)
        else:
            pts = np.linspace(a, b, n, endpoint=endpoint)
        return [float(x) for x in pts]


def _provenance(cfg: dict, extra: list) -> list:
    lines = [
        f"spraytube {__version__}",
        f"config_sha256={config_hash(cfg)}",
        "tolerances: pole=1e-13 simple=1e-8 root_residual=1e-10 lattice=1e-12 merge_rtol=1e-12 int_guard=1e-10",
    ]
    return lines + extra


def _write(out, comments: list, header: list, rows: list):
    buf = io.StringIO(newline="")
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    text = buf.getvalue()
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _lattice_note(system) -> str:
    lat = lattice_classify(system)
    if isinstance(lat, LatticeStructure):
        return f"classification: lattice base={lat.base!r} exponents={list(lat.exponents)} period={lat.period!r}"
    return f"classification: nonlattice ({lat.reason})"


# ------------------------------------------------------------ commands


def cmd_dims(job: Job, out, threads: int) -> int:
    if job.system is None:
        raise ConfigError("dims needs a self-similar system")
    sysm = job.system
    lat = lattice_classify(sysm)
    Dl, D = pole_strip(sysm)
    wcfg = job.job.get("window", {})
    re = wcfg.get("re", [min(Dl, 0.0) - 1e-6, max(D, float(sysm.ambient_dim)) + 1e-6])
    if "im_max" in wcfg:
        im_max = float(wcfg["im_max"])
    else:
        im_max = 2 * lat.period if isinstance(lat, LatticeStructure) else 50.0
    window = Window(float(re[0]), float(re[1]), im_max)
    rows = []
    if window.re_lo <= window.re_hi:
        cds = complex_dimensions(sysm, window, lattice=lat)
        for sd in cds.scaling:
            resid = abs(1.0 - complex(sysm.phi(sd.omega)))
            rows.append([sd.omega.real, sd.omega.imag, sd.residue.real, sd.residue.imag, "scaling",
                         "" if sd.line_index is None else sd.line_index, resid])
        for k in range(sysm.ambient_dim + 1):
            if window.re_lo <= k <= window.re_hi:
                ck = coeff_c_k(TubularZetaContext(job.spray), k) if job.rep is not None else 0.0
                rows.append([float(k), 0.0, ck, 0.0, "integer", "", ""])
    comments = _provenance(job.cfg, [
        _lattice_note(sysm),
        f"moran_dimension={D!r} pole_strip=[{Dl!r}, {D!r}]",
        f"window: re in [{window.re_lo!r}, {window.re_hi!r}], |im| <= {window.im_max!r}",
        "scaling rows: residue of zeta_L; integer rows: residue columns hold c_k = kappa_k(G) zeta_L(k) "
        "(0 without a generator)",
        "root_residual = |1 - sum r_n^omega|",
    ])
    _write(out, comments, ["re", "im", "residue_re", "residue_im", "kind", "lattice_line_index", "root_residual"],
           rows)
    return 0


def _tube_rows(job: Job, threads: int):
    spray = job.spray
    eps = job.eps_grid()
    trunc = job.trunc
    ctx = None
    if job.system is not None:
        ctx = TubularZetaContext(spray, eps_floor=min(min(eps) / job.rep.g, 1e-6) if eps else 1e-6)
        expand(ctx, trunc)

    def row(e):
        if ctx is None:
            raise ConfigError("the residue tube formula needs a self-similar system")
        v, b, prov = tube_value(ctx, e, trunc)
        o = direct_tube(spray, e)
        err = abs(v - o)
        return [e, v, b, o, err, err / abs(o) if o != 0 else err], prov

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(row, eps))
    return ctx, eps, results


def cmd_tube(job: Job, out, threads: int) -> int:
    ctx, eps, results = _tube_rows(job, threads)
    exp = expand(ctx, job.trunc)
    sat = [r[0][0] for r in results if r[1] != "residue sum"]
    comments = _provenance(job.cfg, [
        _lattice_note(job.system),
        f"generator={job.rep.name} d={job.rep.d} g={job.rep.g!r} lambda={job.rep.lam!r}",
        f"expansion: {exp.provenance}; scaling terms={exp.omegas.size} dropped={exp.dropped} "
        f"trunc_bound {'rigorous' if exp.rigorous_bound else 'heuristic (fitted envelope)'}",
        f"constant lambda_d(G) zeta_L(d)={exp.constant!r}",
    ] + ([f"saturated rows (eps >= g, value zeta_L(d) lambda_d(G)): {', '.join(_fmt(e) for e in sat)}"]
         if sat else []))
    _write(out, comments, ["epsilon", "v_formula", "trunc_bound", "v_oracle", "abs_err", "rel_err"],
           [r[0] for r in results])
    return 0


def cmd_compare(job: Job, out, threads: int) -> int:
    ctx, eps, results = _tube_rows(job, threads)
    rel_tol = float(job.job.get("rel_tol", DEFAULT_REL_TOL))
    rows = [r[0] for r in results]
    worst = max(rows, key=lambda r: r[5])
    bound_ok = all(r[4] <= r[2] + 1e-12 * abs(r[3]) for r in rows)
    # a certified pass also needs the bound itself inside the tolerance
    tol_ok = all(r[5] <= rel_tol and r[2] <= rel_tol * abs(r[3]) for r in rows)
    loosest = max(rows, key=lambda r: r[2] / abs(r[3]) if r[3] else math.inf)
    lines = [f"compare: {len(rows)} eps values, rel_tol={rel_tol:g}, N={job.trunc.N}"]
    lines.append(f"worst eps={_fmt(worst[0])} abs_err={worst[4]:.3e} rel_err={worst[5]:.3e} "
                 f"trunc_bound={worst[2]:.3e}")
    lines.append(f"loosest bound eps={_fmt(loosest[0])} trunc_bound/|V|={loosest[2] / abs(loosest[3]):.3e}")
    lines.append(f"error within reported truncation bound at every eps: {'yes' if bound_ok else 'NO'}")
    if "sigma" in job.job:
        scr = Screen(float(job.job["sigma"]), float(job.job.get("T", 100.0)))
        e = worst[0]
        if e < ctx.g:
            R, qb = screen_error_term(ctx, e, scr)
            vs = visible_sum(ctx, e, scr.abscissa, job.trunc)
            lines.append(f"screen sigma={scr.abscissa:g} T={scr.height:g} at worst eps: R={R:.6e} "
                         f"(+/- {qb:.2e}) visible+R={vs + R:.12g} oracle={worst[3]:.12g}")
    if job.rep.monophase:
        ek_zero = all(coeff_e_k(ctx, k, e) == 0.0 for e in eps if e < ctx.g for k in range(job.rep.d + 1))
        lines.append(f"monophase generator: e_k identically zero: {'yes' if ek_zero else 'NO'}")
    else:
        ek_zero = True
    passed = bound_ok and tol_ok and ek_zero
    if not passed:
        if not bound_ok:
            cause = "formula (error exceeds the truncation bound)"
        elif loosest[2] > rel_tol * abs(loosest[3]):
            cause = "truncation (bound exceeds tolerance; raise N)"
        else:
            cause = "tolerance"
        lines.append(f"attribution: {cause}")
    lines.append("PASS" if passed else "FAIL")
    text = "\n".join(f"# {c}" for c in _provenance(job.cfg, [])) + "\n" + "\n".join(lines) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return 0 if passed else 1


def cmd_validate_generator(job: Job, out, threads: int) -> int:
    gcfg = job.cfg.get("generator")
    if gcfg is None:
        raise ConfigError("validate-generator needs a 'generator'")
    rep = job._generator(gcfg, validate=False) if "custom" in gcfg else job.rep
    report = validate_rep(rep, job.job.get("sample_count", 200))
    lines = [f"generator {rep.name}: d={rep.d} g={rep.g!r} kappa(G)={list(rep.kappa_const)} "
             f"lambda={rep.lam!r} monophase={rep.monophase}"]
    lines += report.lines()
    lines.append("PASS" if report.passed else "FAIL")
    text = "\n".join(f"# {c}" for c in _provenance(job.cfg, [])) + "\n" + "\n".join(lines) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return 0 if report.passed else 1


def cmd_apollonian(job: Job, out, threads: int) -> int:
    pk = job.packing
    if pk is None:
        raise ConfigError("apollonian needs an 'apollonian' spray")
    rows = []
    for i, (a, qi) in enumerate(pk.circles):
        q = pk.quadruples[qi]
        rows.append([i, a, 1.0 / a, *q, abs(pk.forms[qi])])
    comments = _provenance(job.cfg, [
        f"seed={list(pk.seed)} min_radius={pk.min_radius!r} circles={len(pk.circles)}",
        f"enclosing_radius={pk.enclosing_radius!r} max_abs_F={pk.max_form!r}",
        "assumption: the disks fill the enclosing disk up to a null set",
    ])
    _write(out, comments, ["index", "curvature", "radius", "a1", "a2", "a3", "a4", "abs_F"], rows)
    return 0


def _parse_s(x) -> complex:
    if isinstance(x, list):
        return complex(x[0], x[1])
    return complex(x)


def cmd_zeta(job: Job, out, threads: int) -> int:
    pts = [_parse_s(x) for x in job.job.get("s", [2.0])]
    rows = []
    for s in pts:
        if job.system is not None:
            z, rem = zeta_eval(job.system, s), 0.0
            method = "closed form"
        else:
            res = zeta_series_bound(job.string, s, rel_tol=math.inf)
            z, rem = res.value, res.remainder
            method = "partial sum" if rem > 0 else "finite sum"
        rows.append([s.real, s.imag, z.real, z.imag, method, rem])
    _write(out, _provenance(job.cfg, ["remainder: certified bound on |zeta - partial sum| (0 when exact)"]),
           ["s_re", "s_im", "zeta_re", "zeta_im", "method", "remainder"], rows)
    return 0


COMMANDS = {
    "dims": (cmd_dims, False),
    "tube": (cmd_tube, True),
    "compare": (cmd_compare, True),
    "validate-generator": (cmd_validate_generator, False),
    "apollonian": (cmd_apollonian, False),
    "zeta": (cmd_zeta, False),
}


def _threads(arg: Optional[int]) -> int:
    env = os.environ.get("SPRAYTUBE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"SPRAYTUBE_THREADS must be an integer, got {env!r}") from None
    return max(1, arg or 1)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="spraytube", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="path to the JSON job file")
    parser.add_argument("--out", help="output path (default: stdout)")
    parser.add_argument("--threads", type=int, default=None, help="worker threads (SPRAYTUBE_THREADS overrides)")
    args = parser.parse_args(argv)
    fn, need_gen = COMMANDS[args.command]
    try:
        threads = _threads(args.threads)
        cfg = load_config(args.config)
        if args.command == "validate-generator" and "custom" in cfg.get("generator", {}):
            cfg_nogen = dict(cfg)
            cfg_nogen.pop("generator")
            job = Job(cfg_nogen, need_generator=False)
            job.cfg = cfg
        else:
            job = Job(cfg, need_generator=need_gen)
        return fn(job, args.out, threads)
    except ConfigError as exc:
        print(f"config error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except SprayTubeError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except BrokenPipeError:
        # downstream reader closed early (e.g. `| head`)
        sys.stderr.close()
        return 0


if __name__ == "__main__":
    raise SystemExit(main())
