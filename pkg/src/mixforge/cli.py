"""Command-line front-end.

Exit codes: 0 success, 2 configuration or validation error, 3 envelope
exhausted, 4 verdict or fixture failure, 5 statistical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path


from . import selfcheck
from .chain import (
    ChainSpec,
    bit_frequency_se,
    build_chain,
    estimate_beta_empirical,
    joint_at_lag,
    sample_path,
    truncation_level,
    verify_theorem,
)
from .depcoeff import beta_exact, default_workers
from .envelope import (
    DEFAULT_TOL_ROOT,
    DEFAULT_TOL_SUP,
    DEFAULT_X_CAP,
    LogEnvelope,
    RateFunction,
    Scaffold,
    build_scaffold,
)
from .errors import ConfigError, MixforgeError

log = logging.getLogger("mixforge")

EXIT_OK, EXIT_CONFIG, EXIT_ENVELOPE, EXIT_VERDICT, EXIT_STAT = 0, 2, 3, 4, 5
SCHEMA_VERSION = 1
SIMULATE_DEFAULT_J = 3
SIMULATE_MAX_J = 10
HARD_Z = 5.0

_POW2 = re.compile(r"^\s*2\s*\^\s*(-?\d+)\s*$")


# -- configuration ---------------------------------------------------------------


def _number(value, name, *, allow_pow2=False) -> float:
    if isinstance(value, bool):
        raise ConfigError(name, f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        out = float(value)
    elif isinstance(value, str):
        m = _POW2.match(value) if allow_pow2 else None
        if m:
            out = 2.0 ** int(m.group(1))
        else:
            try:
                out = float(value)
            except ValueError:
                raise ConfigError(name, f"cannot parse {value!r} as a number") from None
    else:
        raise ConfigError(name, f"expected a number, got {type(value).__name__}")
    if not math.isfinite(out):
        raise ConfigError(name, f"must be finite, got {value!r}")
    return out


def _integer(value, name, lo=None) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
        raise ConfigError(name, f"expected an integer, got {value!r}")
    out = int(value)
    if lo is not None and out < lo:
        raise ConfigError(name, f"must be >= {lo}, got {out}")
    return out


def _reject_unknown(obj: dict, allowed, where: str):
    extra = sorted(set(obj) - set(allowed))
    if extra:
        raise ConfigError(f"{where}{extra[0]}", "unknown field")


_FAMILY_ARITY = {
    "polynomial": (1, 1),
    "stretched_exponential": (2, 2),
    "shifted_log_power": (4, 5),
}


def _rate_function(spec) -> RateFunction:
    if not isinstance(spec, dict):
        raise ConfigError("f", "expected an object with 'family' and 'params'")
    _reject_unknown(spec, ("family", "params"), "f.")
    family = spec.get("family")
    params = spec.get("params")
    if family == "tabulated":
        if not isinstance(params, dict) or set(params) != {"x", "f"}:
            raise ConfigError("f.params", "tabulated needs {'x': [...], 'f': [...]}")
        xs = [_number(v, "f.params.x") for v in params["x"]]
        fs = [_number(v, "f.params.f") for v in params["f"]]
        try:
            return RateFunction.tabulated(xs, fs)
        except MixforgeError as exc:
            raise ConfigError("f.params", str(exc)) from None
    if family not in _FAMILY_ARITY:
        raise ConfigError("f.family", f"unknown family {family!r}")
    lo, hi = _FAMILY_ARITY[family]
    if not isinstance(params, list) or not lo <= len(params) <= hi:
        raise ConfigError("f.params", f"{family} takes {lo}..{hi} numbers")
    nums = [_number(v, f"f.params[{i}]") for i, v in enumerate(params)]
    try:
        return getattr(RateFunction, family)(*nums)
    except MixforgeError as exc:
        raise ConfigError("f.params", str(exc)) from None


@dataclass
class RunConfig:
    """Validated run configuration (one JSON document)."""

    r: float
    f: RateFunction
    n_max: int = 200
    tail_tol: float = 2.0**-19
    exact_alpha_J: int = 4
    tol_root: float = DEFAULT_TOL_ROOT
    tol_sup: float = DEFAULT_TOL_SUP
    seed: int = 0
    output_dir: Path = Path("out")
    x_max: float | None = None
    x_cap: float = DEFAULT_X_CAP
    J: int | None = None
    blocks: list[tuple[float, float]] | None = None
    raw: dict = field(default_factory=dict, repr=False)

    FIELDS = ("r", "f", "n_max", "tail_tol", "exact_alpha_J", "tolerances", "seed",
              "output_dir", "x_max", "x_cap", "J", "blocks")

    @classmethod
    def from_dict(cls, doc) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ConfigError("<root>", "configuration must be a JSON object")
        _reject_unknown(doc, cls.FIELDS, "")
        for name in ("r", "f"):
            if name not in doc:
                raise ConfigError(name, "required field missing")
        r = _number(doc["r"], "r")
        if not 0.0 < r <= 1.0:
            raise ConfigError("r", f"must lie in (0, 1], got {r}")
        f = _rate_function(doc["f"])
        cfg = cls(r=r, f=f, raw=doc)
        if "n_max" in doc:
            cfg.n_max = _integer(doc["n_max"], "n_max", 1)
        if "tail_tol" in doc:
            cfg.tail_tol = _number(doc["tail_tol"], "tail_tol", allow_pow2=True)
            if not 0.0 < cfg.tail_tol < 1.0:
                raise ConfigError("tail_tol", f"must lie in (0, 1), got {cfg.tail_tol}")
        if "exact_alpha_J" in doc:
            cfg.exact_alpha_J = _integer(doc["exact_alpha_J"], "exact_alpha_J", 0)
        if "tolerances" in doc:
            tol = doc["tolerances"]
            if not isinstance(tol, dict):
                raise ConfigError("tolerances", "expected an object")
            _reject_unknown(tol, ("tol_root", "tol_sup"), "tolerances.")
            for key in tol:
                val = _number(tol[key], f"tolerances.{key}", allow_pow2=True)
                if not 0.0 < val < 1.0:
                    raise ConfigError(f"tolerances.{key}", f"must lie in (0, 1), got {val}")
                setattr(cfg, key, val)
        if "seed" in doc:
            cfg.seed = _integer(doc["seed"], "seed", 0)
        if "output_dir" in doc:
            if not isinstance(doc["output_dir"], str) or not doc["output_dir"]:
                raise ConfigError("output_dir", "expected a non-empty path string")
            cfg.output_dir = Path(doc["output_dir"])
        if doc.get("x_max") is not None:
            cfg.x_max = _number(doc["x_max"], "x_max")
            if cfg.x_max <= 0:
                raise ConfigError("x_max", f"must be positive, got {cfg.x_max}")
        if "x_cap" in doc:
            cfg.x_cap = _number(doc["x_cap"], "x_cap")
            if cfg.x_cap <= 0:
                raise ConfigError("x_cap", f"must be positive, got {cfg.x_cap}")
        if doc.get("J") is not None:
            cfg.J = _integer(doc["J"], "J", 1)
        if doc.get("blocks") is not None:
            cfg.blocks = _blocks(doc["blocks"])
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("--config", f"invalid JSON: {exc}") from None
        return cls.from_dict(doc)

    @property
    def truncation(self) -> int:
        return self.J if self.J is not None else truncation_level(self.tail_tol)

    def describe(self) -> dict:
        return {"r": self.r, "f": self.f.describe(), "n_max": self.n_max,
                "tail_tol": self.tail_tol, "J": self.truncation,
                "exact_alpha_J": self.exact_alpha_J, "seed": self.seed}


def _blocks(value) -> list[tuple[float, float]]:
    if not isinstance(value, list) or not value:
        raise ConfigError("blocks", "expected a non-empty list of [epsilon, theta] pairs")
    out = []
    for i, pair in enumerate(value):
        name = f"blocks[{i}]"
        if not isinstance(pair, list) or len(pair) != 2:
            raise ConfigError(name, "expected [epsilon, theta]")
        eps, theta = (_number(v, name) for v in pair)
        if not 0.0 < eps <= 0.5:
            raise ConfigError(name, f"epsilon must lie in (0, 1/2], got {eps}")
        if not 0.0 < theta < 1.0:
            raise ConfigError(name, f"theta must lie in (0, 1), got {theta}")
        out.append((eps, theta))
    return out


# -- commands --------------------------------------------------------------------


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    log.info("wrote %s", path)


def _scaffold_for(cfg: RunConfig, min_legs: int) -> Scaffold:
    env = LogEnvelope(cfg.r, cfg.f)
    x_max = cfg.x_max if cfg.x_max is not None else float(cfg.n_max)
    return build_scaffold(env, x_max, cfg.tol_root, cfg.tol_sup,
                          min_legs=min_legs, x_cap=cfg.x_cap)


def cmd_scaffold(cfg: RunConfig, out: Path) -> int:
    s = _scaffold_for(cfg, cfg.truncation)
    s.to_csv(out / "scaffold.csv")
    log.info("wrote %s", out / "scaffold.csv")
    last = s.legs[-1]
    print(f"legs: {len(s)}")
    print(f"y_last: {s.y_last:.17g}")
    print(f"s_J - log2 r: {last.s_offset:.17g}")
    return EXIT_OK


def _failure_record(row) -> dict:
    failed = [name for name, ok in (("alpha", row.alpha_pass), ("beta", row.beta_pass)) if not ok]
    return {"n": row.n, "failed": failed, "alpha_lb": row.alpha_lb,
            "lower_env": row.lower_env, "beta_partial_ub": row.beta_partial_ub,
            "upper_env": row.upper_env}


def cmd_verify(cfg: RunConfig, out: Path, scaffold_path: Path | None = None) -> int:
    J = cfg.truncation
    if scaffold_path is not None:
        s = Scaffold.from_csv(scaffold_path, LogEnvelope(cfg.r, cfg.f), tol_root=cfg.tol_root,
                              tol_sup=cfg.tol_sup, x_cap=cfg.x_cap)
    else:
        s = _scaffold_for(cfg, J)
    chain = build_chain(s, cfg.tail_tol, J=J)
    report = verify_theorem(chain, cfg.n_max, cfg.exact_alpha_J, workers=default_workers())
    report.to_csv(out / "coeffs.csv")
    log.info("wrote %s", out / "coeffs.csv")
    verdict = {
        "schema_version": SCHEMA_VERSION,
        "all_pass": report.all_pass,
        "failures": [_failure_record(row) for row in report.failures],
        "consistency_failures": [{"n": n, "check": what} for n, what in report.consistency_failures],
        "rho_limit_only": report.rho_limit_only,
        "notes": report.notes,
        "config": cfg.describe(),
        "beta_tail_ub": 2.0 ** (1 - J),
    }
    _write_json(out / "verdict.json", verdict)
    print(f"rows: {len(report.rows)}  J: {J}  all_pass: {str(report.all_pass).lower()}")
    if report.rho_limit_only:
        print("rho verdict is limit-only (r = 1)")
    if not report.all_pass:
        bad = [row.n for row in report.failures] + [n for n, _ in report.consistency_failures]
        print("failing rows: " + ",".join(str(n) for n in sorted(set(bad))), file=sys.stderr)
        return EXIT_VERDICT
    return EXIT_OK


def _simulation_chain(cfg: RunConfig) -> ChainSpec:
    if cfg.blocks is not None:
        chain = ChainSpec.from_blocks(cfg.blocks)
    else:
        J = cfg.J if cfg.J is not None else SIMULATE_DEFAULT_J
        chain = build_chain(_scaffold_for(cfg, J), cfg.tail_tol, J=J)
    if chain.J > SIMULATE_MAX_J:
        raise ConfigError("J", f"simulation needs J <= {SIMULATE_MAX_J}, got {chain.J}")
    return chain


def cmd_simulate(cfg: RunConfig, out: Path, length: int, lag: int) -> int:
    if length < 1:
        raise ConfigError("--length", f"must be >= 1, got {length}")
    if lag < 1:
        raise ConfigError("--lag", f"must be >= 1, got {lag}")
    if length < 100 * lag:
        raise ConfigError("--lag", f"length {length} is shorter than 100 * lag = {100 * lag}")
    chain = _simulation_chain(cfg)
    path = sample_path(chain, length, cfg.seed)
    path.write(out / "path.txt")

    # bootstrap blocks span several relaxation times of the slowest block
    relax = math.ceil(10.0 / (1.0 - float(chain.thetas.max())))
    rows = []
    for k in range(1, lag + 1):
        exact = beta_exact(joint_at_lag(chain, k))
        est = estimate_beta_empirical(path, k, block_len=max(10 * k, relax), seed=cfg.seed)
        z = (est.estimate - exact) / est.se if est.se > 0 else math.inf
        rows.append((k, exact, est.estimate, est.se, z))
    with open(out / "empirical.csv", "w") as fh:
        fh.write("lag,exact,estimate,se,z\n")
        for k, *vals in rows:
            fh.write(f"{k}," + ",".join(format(v, ".17g") for v in vals) + "\n")

    freq = []
    for j, eps, theta in zip(range(1, chain.J + 1), chain.epsilons, chain.thetas):
        mean = float(path.bits(j).mean())
        se = bit_frequency_se(float(eps), float(theta), length)
        freq.append({"block": j, "epsilon": float(eps), "frequency": mean, "se": se,
                     "z": (mean - float(eps)) / se})
    meta = path.metadata() | {"lag": lag, "epsilons": chain.epsilons.tolist(),
                              "thetas": chain.thetas.tolist(), "bit_frequencies": freq}
    _write_json(out / "path_meta.json", meta)

    worst = max(abs(row[4]) for row in rows)
    print(f"length: {length}  J: {chain.J}  max |z| over lags: {worst:.3f}")
    if worst > HARD_Z:
        print(f"statistical failure: |z| = {worst:.3f} > {HARD_Z}", file=sys.stderr)
        return EXIT_STAT
    return EXIT_OK


def cmd_selfcheck(perturb: float = 0.0) -> int:
    failed = []
    for name, (ok, detail) in selfcheck.run(perturb).items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        if not ok:
            failed.append(name)
    if failed:
        print("failing fixtures: " + "; ".join(failed), file=sys.stderr)
        return EXIT_VERDICT
    return EXIT_OK


# -- entry point -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=argparse.SUPPRESS,
                        help="JSON run configuration")
    common.add_argument("--out", type=Path, default=argparse.SUPPRESS,
                        help="output directory (overrides output_dir)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="random seed (overrides seed)")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="mixforge", parents=[common],
                                     description="Build chains with prescribed mixing rates.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("scaffold", parents=[common], help="build the envelope scaffold")
    p = sub.add_parser("verify", parents=[common], help="check the coefficient bracket")
    p.add_argument("--debug-scaffold", type=Path, default=None,
                   help="load legs from this CSV instead of building them")
    p = sub.add_parser("simulate", parents=[common], help="sample a path and compare beta")
    p.add_argument("--length", type=int, default=1_000_000)
    p.add_argument("--lag", type=int, default=1)
    p = sub.add_parser("selfcheck", parents=[common], help="run built-in fixture oracles")
    p.add_argument("--debug-perturb", type=float, nargs="?", const=1e-3, default=0.0,
                   help="shift fixture constants (default shift 1e-3)")
    return parser


def _run(args) -> int:
    if args.command == "selfcheck":
        return cmd_selfcheck(args.debug_perturb)
    if getattr(args, "config", None) is None:
        raise ConfigError("--config", "required for this command")
    cfg = RunConfig.load(args.config)
    if getattr(args, "seed", None) is not None:
        if args.seed < 0:
            raise ConfigError("--seed", "must be >= 0")
        cfg.seed = args.seed
    out = getattr(args, "out", None) or cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    if args.command == "scaffold":
        return cmd_scaffold(cfg, out)
    if args.command == "verify":
        return cmd_verify(cfg, out, args.debug_scaffold)
    return cmd_simulate(cfg, out, args.length, args.lag)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run(args)
    except MixforgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code if exc.exit_code in (2, 3, 4, 5) else 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
