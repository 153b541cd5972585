"""``qsm`` command-line front end.

Each command reads an optional key = value config file, applies flag
overrides, validates everything up front, and writes a CSV whose leading
``#`` lines record the resolved configuration.  Numbers are written with
12 significant digits and LF line endings, so identical configurations
give byte-identical files.

Config file layout::

    [run]            ; shared by every command
    beta = 0.2, 0.5, 1
    z = 1
    stats = boson

    [grand-potential]
    nmax = 8

Command sections override ``[run]``; flags override both.  A beta grid is
either a comma list or ``start:stop:count`` (inclusive, linear).
"""

import argparse
import configparser
import io
import math
import sys

import numpy as np

from . import analytic, quadrature
from .commutation import hamiltonian, weighted_w
from .meanfield import build_local_modes, lennard_jones_chain, particle_weights
from .state import BOSON, FERMION, ThermoState, WMethod
from .symmetrization import CutoffPolicy

COMMANDS = ("weight-profile", "grand-potential", "energy", "meanfield-demo")
MAX_CHAIN = 16

DEFAULTS = {
    "beta": "0.2, 0.5, 1, 2, 3",
    "z": "1",
    "d": "1",
    "stats": "boson",
    "w_method": "exact",
    "nmax": "adaptive",
    "order": "",
    "cutoff": "none",
    "nodes": "64",
    "out": "-",
    "seed": "0",
    "pq_line": "0",
    "l_max": "50",
    "n_particles": "4",
    "spacing": "1.122462048309",
    "confinement": "0",
    "jitter": "0.05",
    "eject": "none",
    "eject_distance": "10",
}

FLAG_KEYS = ("beta", "z", "d", "stats", "w_method", "nmax", "cutoff", "out", "seed")


class ConfigError(ValueError):
    """Invalid run configuration."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


# --------------------------------------------------------------------------
# configuration

def _parse_grid(text, name):
    text = text.strip()
    if not text:
        raise ConfigError(f"{name} grid is empty")
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise ConfigError(f"{name} range must be start:stop:count, got {text!r}")
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
            if count < 1:
                raise ConfigError(f"{name} range needs count >= 1")
            return [float(v) for v in np.linspace(start, stop, count)]
        vals = [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse {name} grid {text!r}: {exc}") from None
    if not vals:
        raise ConfigError(f"{name} grid is empty")
    return vals


def _optional(text):
    return None if text.strip().lower() in ("", "none", "off", "adaptive") else text


def _number(raw, key, kind=float):
    try:
        return kind(raw[key])
    except ValueError:
        raise ConfigError(f"{key} must be {kind.__name__}, got {raw[key]!r}") from None


def load_config(command, path=None, overrides=None):
    """Merge defaults, the file's [run] and [command] sections, then flags."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    raw = dict(DEFAULTS)
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except configparser.Error as exc:
            raise ConfigError(f"malformed config {path}: {exc.message.splitlines()[0]}") from None
        for section in ("run", command):
            if parser.has_section(section):
                for key, value in parser.items(section):
                    key = key.replace("-", "_")
                    if key not in DEFAULTS:
                        raise ConfigError(f"unknown config key {key!r} in [{section}]")
                    raw[key] = value
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = str(value)
    return resolve(command, raw)


def resolve(command, raw):
    """Validate raw strings into typed settings (a plain dict)."""
    cfg = {"command": command}
    cfg["beta"] = _parse_grid(raw["beta"], "beta")
    if any(not b > 0 for b in cfg["beta"]):
        raise ConfigError("every beta must be positive")
    cfg["z"] = _number(raw, "z")
    if not cfg["z"] > 0:
        raise ConfigError("z must be positive")
    cfg["d"] = _number(raw, "d", int)
    if cfg["d"] not in (1, 2, 3):
        raise ConfigError("d must be 1, 2 or 3")
    stats = raw["stats"].strip().lower()
    if stats not in ("boson", "fermion"):
        raise ConfigError(f"stats must be boson or fermion, got {stats!r}")
    cfg["stats"] = stats
    cfg["w_method"] = raw["w_method"].strip().lower()
    if cfg["w_method"] not in ("exact", "bigw", "smallw"):
        raise ConfigError(f"w-method must be exact, bigw or smallw, got {cfg['w_method']!r}")
    nmax = _optional(raw["nmax"])
    cfg["nmax"] = None if nmax is None else _number({"nmax": nmax}, "nmax", int)
    if cfg["nmax"] is not None and not 0 <= cfg["nmax"] <= 512:
        raise ConfigError("nmax must lie in [0, 512]")
    order = _optional(raw["order"])
    cfg["order"] = None if order is None else _number({"order": order}, "order", int)
    cutoff = _optional(raw["cutoff"])
    cfg["cutoff"] = None if cutoff is None else _number({"cutoff": cutoff}, "cutoff")
    if cfg["cutoff"] is not None and not cfg["cutoff"] > 0:
        raise ConfigError("cutoff must be positive")
    cfg["nodes"] = _number(raw, "nodes", int)
    if not 8 <= cfg["nodes"] <= 512:
        raise ConfigError("nodes must lie in [8, 512]")
    cfg["out"] = raw["out"].strip() or "-"
    cfg["seed"] = _number(raw, "seed", int)
    cfg["pq_line"] = _parse_grid(raw["pq_line"], "pq_line")
    cfg["l_max"] = _number(raw, "l_max", int)
    if not 1 <= cfg["l_max"] <= analytic.L_MAX_CAP:
        raise ConfigError(f"l_max must lie in [1, {analytic.L_MAX_CAP}]")
    cfg["n_particles"] = _number(raw, "n_particles", int)
    if not 1 <= cfg["n_particles"] <= MAX_CHAIN:
        raise ConfigError(f"n_particles must lie in [1, {MAX_CHAIN}]")
    for key in ("spacing", "confinement", "jitter", "eject_distance"):
        cfg[key] = _number(raw, key)
    eject = _optional(raw["eject"])
    cfg["eject"] = None if eject is None else _number({"eject": eject}, "eject", int)
    if cfg["eject"] is not None and not 0 <= cfg["eject"] < cfg["n_particles"]:
        raise ConfigError("eject must index a particle of the chain")
    method_of(cfg)
    return cfg


def method_of(cfg):
    kind = cfg["w_method"]
    try:
        if kind == "exact":
            return WMethod.exact(cfg["nmax"])
        if kind == "bigw":
            return WMethod.big_w(5 if cfg["order"] is None else cfg["order"])
        return WMethod.small_w(4 if cfg["order"] is None else cfg["order"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _state(cfg, beta, sign=None):
    s = {"boson": BOSON, "fermion": FERMION}[cfg["stats"]] if sign is None else sign
    ts = ThermoState(beta, cfg["z"], cfg["d"], s)
    ts.check_convergent()
    return ts


# --------------------------------------------------------------------------
# CSV output

def fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    v = float(value)
    if v == 0.0:
        return "0"
    return f"{v:.12g}"


def render_csv(cfg, columns, rows):
    buf = io.StringIO()
    buf.write(f"# qsm {cfg['command']}\n")
    for key in sorted(cfg):
        if key == "command":
            continue
        val = cfg[key]
        if isinstance(val, list):
            val = ", ".join(fmt(v) for v in val)
        elif val is None:
            val = "none"
        else:
            val = fmt(val)
        buf.write(f"# {key} = {val}\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


# --------------------------------------------------------------------------
# commands

def cmd_weight_profile(cfg):
    """e^{-beta H} W along P = Q for every beta, in the three representations."""
    # ``order`` refers to the configured expansion; the other keeps its default
    def rep(kind):
        return method_of(dict(cfg, w_method=kind,
                              order=cfg["order"] if cfg["w_method"] == kind else None))

    exact, bigw, smallw = rep("exact"), rep("bigw"), rep("smallw")
    d = cfg["d"]
    rows = []
    for beta in cfg["beta"]:
        for x in cfg["pq_line"]:
            pt = np.full(d, x)
            boltz = math.exp(-beta * float(hamiltonian(pt, pt)))
            vals = [complex(weighted_w(pt, pt, beta, m)).real for m in (exact, bigw, smallw)]
            rows.append([beta, x, x, *vals, boltz])
    return ["beta", "P", "Q", "re_exact", "re_bigW", "re_smallw", "boltzmann"], rows


def _grid(cfg, beta, method):
    return quadrature.QuadratureGrid.default(beta, cfg["nodes"], method)


def cmd_grand_potential(cfg):
    method = method_of(cfg)
    policy = CutoffPolicy.uniform(cfg["cutoff"])
    rows = []
    for beta in cfg["beta"]:
        ts = _state(cfg, beta)
        grid = _grid(cfg, beta, method)
        rows.append([
            beta,
            analytic.loop_term(ts, 1),
            quadrature.monomer_grand_potential(ts, grid, method),
            analytic.loop_term(ts, 2),
            quadrature.loop_grand_potential(2, ts, grid, policy, method),
        ])
    return ["beta", "analytic_l1", "quad_l1", "analytic_l2", "quad_l2"], rows


def cmd_energy(cfg):
    """Analytic l_max-loop energies and quadrature monomer + dimer, both statistics."""
    method = method_of(cfg)
    policy = CutoffPolicy.uniform(cfg["cutoff"])
    rows = []
    for beta in cfg["beta"]:
        bos = _state(cfg, beta, BOSON)
        fer = _state(cfg, beta, FERMION)
        grid = _grid(cfg, beta, method)
        mono = quadrature.monomer_energy(bos, grid, method)
        dimer = quadrature.dimer_energy(bos, grid, policy, method)
        rows.append([
            beta,
            analytic.average_energy_ideal_sho(bos, cfg["l_max"]),
            analytic.average_energy_ideal_sho(fer, cfg["l_max"]),
            mono + dimer,
            # the fermion dimer differs only in sign
            mono - dimer,
        ])
    return ["beta", f"analytic_{cfg['l_max']}mer_boson", f"analytic_{cfg['l_max']}mer_fermion",
            "quad_dimer_boson", "quad_dimer_fermion"], rows


def cmd_meanfield_demo(cfg):
    """Local modes of a jittered 1-D Lennard-Jones chain at seeded momenta."""
    if cfg["d"] != 1:
        raise ConfigError("meanfield-demo runs in d = 1")
    if len(cfg["beta"]) != 1:
        raise ConfigError("meanfield-demo takes a single beta")
    beta = cfg["beta"][0]
    n = cfg["n_particles"]
    rng = np.random.default_rng(cfg["seed"])
    q = (np.arange(n) - 0.5 * (n - 1)) * cfg["spacing"]
    q = q + cfg["jitter"] * rng.standard_normal(n)
    if cfg["eject"] is not None:
        q[cfg["eject"]] += cfg["eject_distance"]
    p = rng.standard_normal(n) / math.sqrt(beta)
    model = lennard_jones_chain(1, confinement=cfg["confinement"])
    if n == 1 and not cfg["confinement"]:
        raise ConfigError("a single particle needs confinement > 0")
    method = method_of(dict(cfg, w_method="exact"))
    modes = build_local_modes(model, q[:, None])
    factors = particle_weights(modes, q[:, None], p[:, None], beta, method.truncation)
    rows = []
    for j, (mode, fac) in enumerate(zip(modes, factors)):
        omega = mode.freqs[0] if mode.valid else 0.0
        rows.append([j, q[j], mode.q_bar[0], mode.u_bar, omega, mode.valid, p[j],
                     fac.real, fac.imag])
    total = complex(np.prod(factors))
    rows.append(["total", "", "", sum(m.u_bar for m in modes), "", "", "",
                 total.real, total.imag])
    return ["particle", "q", "q_bar", "u_bar", "omega", "valid", "p",
            "weight_re", "weight_im"], rows


RUNNERS = {
    "weight-profile": cmd_weight_profile,
    "grand-potential": cmd_grand_potential,
    "energy": cmd_energy,
    "meanfield-demo": cmd_meanfield_demo,
}


def run(cfg):
    columns, rows = RUNNERS[cfg["command"]](cfg)
    return render_csv(cfg, columns, rows)


def build_parser():
    parser = _Parser(prog="qsm", description="Phase-space statistics of the oscillator gas.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config")
    parser.add_argument("--beta", help="comma list or start:stop:count")
    parser.add_argument("--z")
    parser.add_argument("--d")
    parser.add_argument("--stats", choices=("boson", "fermion"))
    parser.add_argument("--w-method", dest="w_method", choices=("exact", "bigw", "smallw"))
    parser.add_argument("--nmax")
    parser.add_argument("--cutoff")
    parser.add_argument("--out")
    parser.add_argument("--seed")
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        overrides = {k: getattr(args, k) for k in FLAG_KEYS}
        cfg = load_config(args.command, args.config, overrides)
        text = run(cfg)
        if cfg["out"] == "-":
            sys.stdout.write(text)
            sys.stdout.flush()
        else:
            with open(cfg["out"], "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
    except (ValueError, OSError) as exc:
        msg = " ".join(str(exc).split()) or type(exc).__name__
        print(f"qsm: error: {msg}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
