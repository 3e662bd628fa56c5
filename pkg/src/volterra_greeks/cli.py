"""Command-line surface: volterra-greeks <price|greek|converge>.

Configuration is flat INI (key = value in named sections): [model] tag
plus parameters, [market] s0/r, [option] k/t/payoff, [numerics]
n_steps/n_paths/seed/confidence/epsilon/cell_integrated/workers,
[task] kinds/variant/oracles/ns_schedule.  Output is CSV only, UTF-8,
first line `# volterra-greeks v1 schema`; plotting is left to external
tools.

Exit statuses: 0 success, 2 config error (message carries the
section.key field path), 3 unsupported kind-model combination,
4 numerical failure (too many discarded paths).
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import time
from dataclasses import dataclass
from typing import List, Optional, Sequence

from .greeks import (
    GREEK_KINDS,
    GreekEstimate,
    NumericalFailureError,
    OptionSpec,
    converge,
    estimate_many,
)
from .kernel import KernelSpec
from .models import (
    AlphaRFSV,
    AlphaSV,
    BlackScholes,
    MarketSpec,
    MixedAlphaRFSV,
    ModelSpec,
    RoughSteinStein,
    SteinStein,
    UnsupportedError,
)
from .oracles import bs_price_greeks, fd_greek
from .paths import TimeGrid

__all__ = ["ConfigError", "RunConfig", "load_config", "main"]

SCHEMA_COMMENT = "# volterra-greeks v1 schema"
WORKERS_ENV = "VOLTERRA_GREEKS_WORKERS"
_PRICE_COLS = ["kind", "value", "stderr", "ci_low", "ci_high", "n_paths", "n_discarded", "seed", "wallclock_ms"]
_GREEK_COLS = ["kind", "method", "variant", "value", "stderr", "ci_low", "ci_high",
               "n_paths", "n_discarded", "seed", "wallclock_ms", "agreement"]
_CONVERGE_COLS = ["ns", "value", "ci_low", "ci_high"]
_SENS_KINDS = ("delta", "gamma", "rho", "vega", "hsens")


class ConfigError(Exception):
    """Invalid or missing configuration; message names section.key."""


@dataclass
class RunConfig:
    model: ModelSpec
    market: MarketSpec
    option: OptionSpec
    grid: TimeGrid
    n_paths: int
    seed: int
    confidence: float = 0.99
    cell_integrated: bool = False
    workers: int = 1
    kinds: Sequence[str] = ()
    variant: str = "derived"
    oracles: Sequence[str] = ()
    ns_schedule: Sequence[int] = ()


_MISSING = object()


def _raw(cp, section, key, default=_MISSING):
    if not cp.has_section(section):
        raise ConfigError(f"{section}: missing required section")
    if cp.has_option(section, key):
        return cp.get(section, key)
    if default is _MISSING:
        raise ConfigError(f"{section}.{key}: missing required key")
    return default


def _float(cp, section, key, default=_MISSING) -> float:
    raw = _raw(cp, section, key, default)
    if not isinstance(raw, str):
        return raw
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{section}.{key}: expected a number, got {raw!r}") from None


def _int(cp, section, key, default=_MISSING) -> int:
    raw = _raw(cp, section, key, default)
    if not isinstance(raw, str):
        return raw
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{section}.{key}: expected an integer, got {raw!r}") from None


def _bool(cp, section, key, default=_MISSING) -> bool:
    raw = _raw(cp, section, key, default)
    if not isinstance(raw, str):
        return raw
    states = {"1": True, "yes": True, "true": True, "on": True,
              "0": False, "no": False, "false": False, "off": False}
    if raw.lower() not in states:
        raise ConfigError(f"{section}.{key}: expected a boolean, got {raw!r}")
    return states[raw.lower()]


def _list(raw: str) -> List[str]:
    return [tok.strip() for tok in raw.split(",") if tok.strip()]


def _load_model(cp, eps: float) -> ModelSpec:
    tag = _raw(cp, "model", "kind").strip().lower()
    try:
        if tag == "alpharfsv":
            return AlphaRFSV(
                v0=_float(cp, "model", "v0"),
                xi=_float(cp, "model", "xi"),
                alpha=_float(cp, "model", "alpha"),
                rho=_float(cp, "model", "rho"),
                kernel=KernelSpec(H=_float(cp, "model", "h"), eps=eps),
            )
        if tag == "mixed":
            return MixedAlphaRFSV(
                v0=_float(cp, "model", "v0"),
                xi_h=_float(cp, "model", "xi_h"),
                xi_hp=_float(cp, "model", "xi_hp"),
                alpha=_float(cp, "model", "alpha"),
                rho=_float(cp, "model", "rho"),
                kernel_h=KernelSpec(H=_float(cp, "model", "h"), eps=eps),
                kernel_hp=KernelSpec(H=_float(cp, "model", "hp"), eps=eps),
            )
        if tag == "rough_stein_stein":
            return RoughSteinStein(
                v0=_float(cp, "model", "v0"),
                kappa=_float(cp, "model", "kappa"),
                theta=_float(cp, "model", "theta"),
                nu=_float(cp, "model", "nu"),
                rho=_float(cp, "model", "rho"),
                kernel=KernelSpec(H=_float(cp, "model", "h"), eps=eps),
            )
        if tag == "alphasv":
            return AlphaSV(
                v0=_float(cp, "model", "v0"),
                xi=_float(cp, "model", "xi"),
                alpha=_float(cp, "model", "alpha"),
                rho=_float(cp, "model", "rho"),
            )
        if tag == "stein_stein":
            return SteinStein(
                v0=_float(cp, "model", "v0"),
                kappa=_float(cp, "model", "kappa"),
                theta=_float(cp, "model", "theta"),
                nu=_float(cp, "model", "nu"),
                rho=_float(cp, "model", "rho"),
            )
        if tag == "black_scholes":
            return BlackScholes(sigma=_float(cp, "model", "sigma"))
    except ValueError as e:
        raise ConfigError(f"model: {e}") from None
    raise ConfigError(
        f"model.kind: expected one of alpharfsv, mixed, rough_stein_stein, "
        f"alphasv, stein_stein, black_scholes; got {tag!r}"
    )


def load_config(path: str) -> RunConfig:
    import configparser

    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if not cp.read(path, encoding="utf-8"):
        raise ConfigError(f"config file not found or unreadable: {path}")

    eps = _float(cp, "numerics", "epsilon", 1e-6)
    if eps < 0.0:
        raise ConfigError(f"numerics.epsilon: must be >= 0, got {eps}")
    model = _load_model(cp, eps)
    try:
        market = MarketSpec(s0=_float(cp, "market", "s0"), r=_float(cp, "market", "r", 0.0))
    except ValueError as e:
        raise ConfigError(f"market: {e}") from None
    try:
        option = OptionSpec(
            strike=_float(cp, "option", "k"),
            maturity=_float(cp, "option", "t"),
            payoff=_raw(cp, "option", "payoff", "call").strip().lower(),
        )
    except ValueError as e:
        raise ConfigError(f"option: {e}") from None

    n_steps = _int(cp, "numerics", "n_steps")
    if n_steps < 1:
        raise ConfigError(f"numerics.n_steps: must be >= 1, got {n_steps}")
    grid = TimeGrid(T=option.maturity, n=n_steps)
    n_paths = _int(cp, "numerics", "n_paths")
    if n_paths < 2:
        raise ConfigError(f"numerics.n_paths: must be >= 2, got {n_paths}")
    seed = _int(cp, "numerics", "seed")
    confidence = _float(cp, "numerics", "confidence", 0.99)
    if not 0.0 < confidence < 1.0:
        raise ConfigError(f"numerics.confidence: must lie in (0, 1), got {confidence}")
    workers = _int(cp, "numerics", "workers", 1)
    if workers < 1:
        raise ConfigError(f"numerics.workers: must be >= 1, got {workers}")

    kinds = tuple(k.lower() for k in _list(_raw(cp, "task", "kinds", "")))
    for k in kinds:
        if k not in GREEK_KINDS:
            raise ConfigError(f"task.kinds: unknown kind {k!r}")
    variant = _raw(cp, "task", "variant", "derived").strip().lower()
    if variant not in ("literal", "derived"):
        raise ConfigError(f"task.variant: expected literal or derived, got {variant!r}")
    oracles = tuple(o.lower() for o in _list(_raw(cp, "task", "oracles", "")))
    for o in oracles:
        if o not in ("fd", "bs"):
            raise ConfigError(f"task.oracles: expected fd or bs, got {o!r}")
    ns_raw = _list(_raw(cp, "task", "ns_schedule", ""))
    try:
        ns_schedule = tuple(int(x) for x in ns_raw)
    except ValueError:
        raise ConfigError(f"task.ns_schedule: expected integers, got {ns_raw}") from None
    if ns_schedule and (ns_schedule[0] < 2 or any(b <= a for a, b in zip(ns_schedule, ns_schedule[1:]))):
        raise ConfigError(f"task.ns_schedule: must be strictly increasing with entries >= 2, got {list(ns_schedule)}")

    return RunConfig(
        model=model, market=market, option=option, grid=grid,
        n_paths=n_paths, seed=seed, confidence=confidence,
        cell_integrated=_bool(cp, "numerics", "cell_integrated", False),
        workers=workers, kinds=kinds, variant=variant, oracles=oracles,
        ns_schedule=ns_schedule,
    )


def _bs_equivalent_sigma(model: ModelSpec) -> Optional[float]:
    """Constant vol when the model degenerates to Black-Scholes, else None."""
    if isinstance(model, BlackScholes):
        return model.sigma
    if isinstance(model, AlphaRFSV) and model.xi == 0.0:
        return model.v0
    if isinstance(model, MixedAlphaRFSV) and model.xi_h == 0.0 and model.xi_hp == 0.0:
        return model.v0
    return None


def _variant_of(kind: str, cfg: RunConfig) -> Optional[str]:
    return cfg.variant if kind in ("gamma", "rho") else None


def cmd_price(cfg: RunConfig) -> tuple:
    t0 = time.perf_counter()
    est = estimate_many(
        [("price", None)], cfg.model, cfg.market, cfg.option, cfg.grid,
        cfg.n_paths, cfg.seed, cfg.confidence, cfg.cell_integrated, cfg.workers,
    )[0]
    ms = int(round(1000.0 * (time.perf_counter() - t0)))
    row = [est.kind, est.value, est.stderr, est.ci_low, est.ci_high,
           est.n_paths, est.n_discarded, cfg.seed, ms]
    return _PRICE_COLS, [row]


def _greek_row(est: GreekEstimate, method: str, seed: int, ms: int, agreement) -> list:
    return [est.kind, method, est.variant or "", est.value, est.stderr,
            est.ci_low, est.ci_high, est.n_paths, est.n_discarded, seed, ms, agreement]


def cmd_greek(cfg: RunConfig) -> tuple:
    kinds = cfg.kinds or ("delta",)
    for k in kinds:
        if k not in _SENS_KINDS:
            raise ConfigError(f"task.kinds: {k!r} is not a sensitivity kind (use the price command)")
    t0 = time.perf_counter()
    tasks = [(k, _variant_of(k, cfg)) for k in kinds]
    ests = estimate_many(
        tasks, cfg.model, cfg.market, cfg.option, cfg.grid,
        cfg.n_paths, cfg.seed, cfg.confidence, cfg.cell_integrated, cfg.workers,
    )
    sigma_bs = _bs_equivalent_sigma(cfg.model)
    rows = []
    for est in ests:
        ms = int(round(1000.0 * (time.perf_counter() - t0)))
        rows.append(_greek_row(est, "malliavin", cfg.seed, ms, ""))
        if "fd" in cfg.oracles:
            fd = fd_greek(
                est.kind, cfg.model, cfg.market, cfg.option, cfg.grid,
                cfg.n_paths, cfg.seed, confidence=cfg.confidence,
                cell_integrated=cfg.cell_integrated, workers=cfg.workers,
            )
            se = math.hypot(est.stderr, fd.stderr)
            agreement = abs(est.value - fd.value) / se if se > 0.0 else 0.0
            ms = int(round(1000.0 * (time.perf_counter() - t0)))
            rows.append(_greek_row(fd, "fd", cfg.seed, ms, agreement))
        if "bs" in cfg.oracles and sigma_bs is not None and est.kind != "hsens":
            bs = bs_price_greeks(
                cfg.market.s0, cfg.option.strike, cfg.option.maturity,
                cfg.market.r, sigma_bs, cfg.option.payoff,
            )
            value = getattr(bs, est.kind)
            agreement = abs(est.value - value) / est.stderr if est.stderr > 0.0 else 0.0
            ms = int(round(1000.0 * (time.perf_counter() - t0)))
            rows.append([est.kind, "bs", "", value, 0.0, value, value, 0, 0, cfg.seed, ms, agreement])
    return _GREEK_COLS, rows


def cmd_converge(cfg: RunConfig) -> tuple:
    kinds = cfg.kinds or ("delta",)
    if len(kinds) != 1:
        raise ConfigError(f"task.kinds: converge takes exactly one kind, got {list(kinds)}")
    if not cfg.ns_schedule:
        raise ConfigError("task.ns_schedule: missing required key")
    kind = kinds[0]
    ests = converge(
        kind, cfg.model, cfg.market, cfg.option, cfg.grid, cfg.ns_schedule,
        cfg.seed, cfg.confidence, _variant_of(kind, cfg), cfg.cell_integrated, cfg.workers,
    )
    rows = [[ns, e.value, e.ci_low, e.ci_high] for ns, e in zip(cfg.ns_schedule, ests)]
    return _CONVERGE_COLS, rows


def _write_csv(cols, rows, out: Optional[str]) -> None:
    fh = open(out, "w", encoding="utf-8", newline="") if out else sys.stdout
    try:
        fh.write(SCHEMA_COMMENT + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        w.writerows(rows)
    finally:
        if out:
            fh.close()


def _parse_args(argv):
    p = argparse.ArgumentParser(prog="volterra-greeks",
                                description="Malliavin-weight Monte-Carlo Greeks for rough Volterra models")
    sub = p.add_subparsers(dest="command", required=True)
    for name, doc in (("price", "discounted payoff expectation"),
                      ("greek", "Malliavin-weight sensitivities with optional oracle rows"),
                      ("converge", "nested-sample convergence trace for one kind")):
        sp = sub.add_parser(name, help=doc)
        sp.add_argument("--config", required=True, help="INI config file")
        sp.add_argument("--seed", type=int, default=None, help="override numerics.seed")
        sp.add_argument("--out", default=None, help="write CSV here instead of stdout")
    return p.parse_args(argv)


def main(argv=None) -> int:
    args = _parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        env_workers = os.environ.get(WORKERS_ENV)
        if env_workers is not None:
            try:
                cfg.workers = max(1, int(env_workers))
            except ValueError:
                raise ConfigError(f"{WORKERS_ENV}: expected an integer, got {env_workers!r}") from None
        cols, rows = {"price": cmd_price, "greek": cmd_greek, "converge": cmd_converge}[args.command](cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except UnsupportedError as e:
        print(f"unsupported: {e}", file=sys.stderr)
        return 3
    except NumericalFailureError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 4
    _write_csv(cols, rows, args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
