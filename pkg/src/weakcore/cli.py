"""Command-line batch runner: ``weakcore list | run | verify``.

``run`` writes a JSON report and exits 0 exactly when the mode's assertion
holds; ``verify`` recomputes every certificate in a report.
"""
from __future__ import annotations

import argparse
import json
import os
import random
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import __version__, anonymous, examples
from .continuum.pipeline import (equi_usc_falsifier, existence_pipeline, regularity_diagnostics)
from .continuum.profiles import IntervalPartition, PartitionNet, StepProfile
from .continuum.search import (RESOLUTION_CAVEAT, SearchSpace, continuum_margin, dyadic_samples,
                               find_blocking_continuum)
from .errors import (CapabilityError, DomainError, FixtureCorruptionError, GameInputError, PipelineFailure)
from .finite.blocking import (certificate_margin, find_blocking,
                              verify_certificate, weak_core_members)
from .finite.characteristic import check_balanced, core_point_from_characteristic
from .finite.game import FiniteGame, _action_from_json, _action_json  # noqa: F401
from .numbers import TAU, as_fraction, to_json_number
from .registry import registry_list, resolve

REPORT_SCHEMA = "weakcore.report/1"
MODES = ("block-search", "weak-core", "alpha-core", "pipeline", "cycle", "contrast", "diagnostics")
SUPPORTED = {
    "finite": {"block-search", "weak-core", "alpha-core", "diagnostics"},
    "continuum": {"block-search", "weak-core", "alpha-core", "pipeline", "diagnostics"},
    "anonymous": {"block-search", "weak-core", "alpha-core", "cycle", "contrast", "diagnostics"},
}
EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_CORRUPT = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass
class ExperimentConfig:
    game: str
    mode: str
    epsilon: str | None = None
    cells: int = 4
    grid: int = 5
    samples: int = 6
    stages: tuple = (2, 4, 8)
    seed: int = 0
    status_quo: str | None = None
    out: str | None = None
    csv: str | None = None

    def validate(self) -> None:
        if self.mode not in MODES:
            raise UsageError(f"unknown mode {self.mode!r}; choose from {', '.join(MODES)}")
        if self.cells < 1 or self.grid < 2 or self.samples < 1:
            raise UsageError("--cells, --samples must be positive and --grid at least 2")
        if not self.stages or any(s < 1 for s in self.stages):
            raise UsageError("--stages must list positive cell counts")
        if self.epsilon is not None:
            try:
                eps = as_fraction(self.epsilon)
            except (ValueError, ZeroDivisionError):
                raise UsageError(f"cannot parse --epsilon {self.epsilon!r}") from None
            if eps < 0:
                raise UsageError("--epsilon must be nonnegative")

    def action_grid(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(k, self.grid - 1) for k in range(self.grid))

    def to_json(self) -> dict:
        d = asdict(self)
        d["stages"] = list(self.stages)
        return d


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("WEAKCORE_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, items):
    """Ordered map; threads only change wall time, never the result order."""
    n = _threads()
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _eps(cfg: ExperimentConfig, default) -> Fraction:
    return as_fraction(cfg.epsilon) if cfg.epsilon is not None else as_fraction(default)


def _parse_label(s: str):
    s = s.strip()
    try:
        return int(s)
    except ValueError:
        pass
    if "/" in s:
        return Fraction(s)
    return s


def _status_quo_values(cfg: ExperimentConfig, default: Sequence):
    if cfg.status_quo is None:
        return list(default)
    return [_parse_label(v) for v in cfg.status_quo.split(",")]


# -- finite ---------------------------------------------------------------------

def _run_finite(cfg, fixture, game: FiniteGame) -> dict:
    if cfg.mode == "block-search":
        sq = tuple(_status_quo_values(cfg, [a[0] for a in game.actions]))
        eps = _eps(cfg, Fraction(1, 10))
        cert = find_blocking(game, sq, eps)
        ok = cert is None or verify_certificate(game, sq, cert)
        certs = [] if cert is None else [{"status_quo": [_action_json(a) for a in sq],
                                          "certificate": cert.to_json(), "verified": ok}]
        return {"epsilon": str(eps), "blocked": cert is not None, "certificates": certs,
                "assertion": {"name": "certificate verifies", "holds": ok}}
    if cfg.mode in ("weak-core", "alpha-core"):
        eps = Fraction(0) if cfg.mode == "alpha-core" else _eps(cfg, Fraction(1, 2))
        members = weak_core_members(game, eps)
        certs = []
        for joint in game.joints():
            if joint in members:
                continue
            cert = find_blocking(game, joint, eps)
            certs.append({"status_quo": [_action_json(a) for a in joint],
                          "certificate": cert.to_json(),
                          "verified": verify_certificate(game, joint, cert)})
        holds = all(c["verified"] for c in certs)
        if fixture.expect.get(cfg.mode) == "empty":
            holds = holds and not members
        return {"epsilon": str(eps), "members": [[_action_json(a) for a in m] for m in members],
                "certificates": certs,
                "assertion": {"name": f"{cfg.mode} membership", "holds": holds}}
    # diagnostics
    found = core_point_from_characteristic(game)
    out: dict = {"core_point": None}
    holds = True
    if found is not None:
        y, joint = found
        span = game.table.max() - game.table.min()
        delta = span / 16 if span else 1
        unblocked = find_blocking(game, joint, delta) is None
        holds = unblocked
        out["core_point"] = {"y": [to_json_number(v) for v in y],
                             "joint": [_action_json(a) for a in joint],
                             "unblocked_at_delta": unblocked, "delta": to_json_number(delta)}
    rng = np.random.default_rng(cfg.seed)
    lo, hi = float(game.table.min()), float(game.table.max())
    ys = rng.uniform(lo - 0.1, hi + 0.1, size=(200, game.n_players))
    try:
        out["balanced_on_sample"] = check_balanced(game, ys.tolist())
    except CapabilityError as exc:
        out["balanced_on_sample"] = None
        out["balanced_note"] = str(exc)
    out["assertion"] = {"name": "recovered core point is unblocked", "holds": holds}
    return out


# -- continuum ------------------------------------------------------------------

def _space(cfg) -> SearchSpace:
    return SearchSpace(IntervalPartition.uniform(cfg.cells), cfg.action_grid(),
                       dyadic_samples(cfg.samples), (Fraction(1, 4), Fraction(1, 2)))


def _profile_from_cfg(cfg, default_value) -> StepProfile:
    vals = _status_quo_values(cfg, [default_value] * cfg.cells)
    return StepProfile.from_cells(IntervalPartition.uniform(len(vals)), [as_fraction(v) for v in vals])


def _continuum_entry(game, sq: StepProfile, cert, space) -> dict:
    margin, _, _ = continuum_margin(game, sq, cert.coalition, cert.deviation, cert.epsilon, space)
    ok = margin is not None and margin > TAU
    return {"status_quo": sq.to_json(), "certificate": cert.to_json(), "verified": ok}


def _run_continuum(cfg, fixture, game) -> dict:
    space = _space(cfg)
    if cfg.mode == "block-search":
        sq = _profile_from_cfg(cfg, 1)
        eps = _eps(cfg, Fraction(1, 10))
        sp = space.with_profile_points(sq)
        cert = find_blocking_continuum(game, sq, eps, sp)
        certs = [] if cert is None else [_continuum_entry(game, sq, cert, sp)]
        return {"epsilon": str(eps), "status_quo": sq.to_json(), "blocked": cert is not None,
                "search_space": sp.to_json(), "certificates": certs,
                "caveat": RESOLUTION_CAVEAT,
                "assertion": {"name": "certificate verifies",
                              "holds": all(c["verified"] for c in certs)}}
    if cfg.mode in ("weak-core", "alpha-core"):
        eps = Fraction(0) if cfg.mode == "alpha-core" else _eps(cfg, Fraction(1, 8))
        profiles = list(examples.grid_family(cfg.cells, cfg.action_grid()))
        samples = dyadic_samples(cfg.samples)

        def block(sq):
            if game.name == "example1" and eps > 0:
                try:
                    return examples.example1_blocker(sq, eps, samples=samples)
                except DomainError:
                    return None
            if game.name == "example2" and eps == 0:
                return examples.example2_alpha_blocker(sq, samples=samples)
            return find_blocking_continuum(game, sq, eps, space.with_profile_points(sq))

        found = _map(block, profiles)
        certs, survivors = [], []
        for sq, cert in zip(profiles, found):
            if cert is None:
                survivors.append(sq.to_json())
            else:
                certs.append(_continuum_entry(game, sq, cert, space.with_profile_points(sq)))
        holds = all(c["verified"] for c in certs)
        if fixture.expect.get(cfg.mode) == "empty":
            holds = holds and not survivors
        return {"epsilon": str(eps), "profiles": len(profiles), "blocked": len(certs),
                "survivors": survivors, "certificates": certs, "caveat": RESOLUTION_CAVEAT,
                "assertion": {"name": f"{cfg.mode} sweep", "holds": holds}}
    if cfg.mode == "pipeline":
        eps = _eps(cfg, Fraction(1, 20))
        net = PartitionNet.uniform(cfg.stages)
        try:
            prof, rep = existence_pipeline(game, net, cfg.action_grid(), eps,
                                           verification=_space(cfg))
        except PipelineFailure as exc:
            body = exc.report.to_json() if exc.report is not None else {}
            return {"pipeline": body, "certificates": [],
                    "assertion": {"name": "pipeline completes", "holds": False}}
        holds = True
        if fixture.expect.get("pipeline") == "unblocked":
            holds = rep.final_unblocked
        if cfg.csv:
            with open(cfg.csv, "w") as fh:
                fh.write(rep.to_csv())
        certs = []
        if rep.final_certificate is not None:
            certs.append(_continuum_entry(game, prof, rep.final_certificate, rep.verification_space))
        return {"pipeline": rep.to_json(), "certificates": certs,
                "assertion": {"name": "final profile unblocked" if holds else "pipeline",
                              "holds": holds}}
    # diagnostics
    rng = random.Random(cfg.seed)
    grid = cfg.action_grid()
    profiles = [StepProfile.constant(0)] + [
        StepProfile.from_cells(IntervalPartition.uniform(cfg.cells),
                               [rng.choice(grid) for _ in range(cfg.cells)]) for _ in range(8)]
    eps = _eps(cfg, Fraction(2, 5))
    diag = regularity_diagnostics(game, profiles, epsilon=eps)
    w = equi_usc_falsifier(game, StepProfile.constant(0), eps)
    diag["falsifier_at_zero"] = None if w is None else {"t": str(w[0]), "probe": w[1].to_json(),
                                                         "gain": w[2]}
    return {"diagnostics": diag, "certificates": [],
            "assertion": {"name": "payoffs within declared bound", "holds": diag["bounded"]}}


# -- anonymous ------------------------------------------------------------------

def _anon_entry(game, joint, cert) -> dict:
    return {"status_quo": list(joint), "certificate": cert.to_json(),
            "verified": anonymous.verify_anonymous_certificate(game, joint, cert)}


def _run_anonymous(cfg, fixture, game: anonymous.AnonymousGame) -> dict:
    if cfg.mode == "block-search":
        joint = tuple(int(v) for v in _status_quo_values(cfg, [0, 0, 0, 0]))
        if len(joint) != 4:
            raise UsageError("anonymous status quo needs four cell actions")
        eps = _eps(cfg, anonymous.default_epsilon(game))
        cert = anonymous.find_blocking_anonymous(game, joint, eps)
        certs = [] if cert is None else [_anon_entry(game, joint, cert)]
        return {"epsilon": str(eps), "blocked": cert is not None, "certificates": certs,
                "assertion": {"name": "certificate verifies",
                              "holds": all(c["verified"] for c in certs)}}
    if cfg.mode in ("cycle", "weak-core", "alpha-core"):
        if cfg.mode == "alpha-core":
            eps = Fraction(0)
        else:
            eps = _eps(cfg, anonymous.default_epsilon(game))
        rep = anonymous.require_cycle(game, eps) if cfg.mode == "cycle" else \
            anonymous.blocking_cycle_report(game, eps)
        certs = [{"status_quo": p["profile"], "certificate": p["certificate"],
                  "verified": p["verified"]} for p in rep["focal"]]
        certs += [{"status_quo": p["profile"], "certificate": p["certificate"],
                   "verified": p["verified"]} for p in rep["profiles"] if p["certificate"]]
        holds = rep["focal_ok"] if cfg.mode == "cycle" else True
        if fixture.expect.get(cfg.mode) == "empty" or cfg.mode == "cycle":
            holds = holds and rep["empty"]
        return {"cycle": {k: rep[k] for k in ("game", "focal", "focal_ok", "summary", "survivors",
                                               "empty")},
                "certificates": certs,
                "assertion": {"name": "weak-core empty over cellwise profiles", "holds": holds}}
    if cfg.mode == "contrast":
        rep = anonymous.contrast_report(game, _eps(cfg, anonymous.default_epsilon(game)))
        return {"contrast": rep, "certificates": [],
                "assertion": {"name": "best-response profile exists and weak-core is empty",
                              "holds": rep["contrast_holds"]}}
    D, D_lp = game.D, anonymous.compute_D_lp(game.params)
    ok = abs(float(D) - D_lp) < 1e-6
    return {"diagnostics": {"D": str(D), "D_lp": D_lp, "agree": ok,
                            "best_response_zero": anonymous.best_response_check(game, (0,) * 4)},
            "certificates": [],
            "assertion": {"name": "closed-form D matches LP", "holds": ok}}


# -- entry points ---------------------------------------------------------------

def run(cfg: ExperimentConfig) -> tuple[dict, int]:
    """Build the report and the exit status for one experiment."""
    cfg.validate()
    try:
        fixture, game = resolve(cfg.game)
    except GameInputError as exc:
        raise UsageError(str(exc)) from None
    if cfg.mode not in SUPPORTED[fixture.kind]:
        raise UsageError(f"mode {cfg.mode!r} is not available for {fixture.kind} game {cfg.game!r}")
    runner = {"finite": _run_finite, "continuum": _run_continuum,
              "anonymous": _run_anonymous}[fixture.kind]
    try:
        result = runner(cfg, fixture, game)
    except FixtureCorruptionError as exc:
        report = _envelope(cfg, fixture, {"error": str(exc),
                                          "assertion": {"name": "fixture integrity", "holds": False}})
        return report, EXIT_CORRUPT
    report = _envelope(cfg, fixture, result)
    return report, EXIT_OK if result["assertion"]["holds"] else EXIT_FAIL


def _envelope(cfg, fixture, result) -> dict:
    return {"schema": REPORT_SCHEMA,
            "versions": {"weakcore": __version__, "numpy": np.__version__,
                         "python": sys.version.split()[0]},
            "config": cfg.to_json(),
            "kind": fixture.kind,
            "result": result}


def verify_report(report: dict) -> tuple[list[dict], bool]:
    """Recompute every certificate in a report against its fixture.

    Exact margins must match the stored strings; float margins must be
    reproduced within ``TAU`` (or, for constructed certificates, be at
    least the stored bound).
    """
    if report.get("schema") != REPORT_SCHEMA:
        raise UsageError("not a weakcore report")
    cfg = ExperimentConfig(**{**report["config"], "stages": tuple(report["config"]["stages"])})
    fixture, game = resolve(cfg.game)
    rows = []
    for entry in report["result"].get("certificates", []):
        c = entry["certificate"]
        if fixture.kind == "finite":
            sq = tuple(_action_from_json(a) for a in entry["status_quo"])
            dev = {p: _action_from_json(a) for p, a in c["deviation"].items()}
            eps = as_fraction(c["epsilon"]) if game.exact else float(c["epsilon"])
            m = certificate_margin(game, sq, c["coalition"], dev, eps)
            ok = to_json_number(m) == c["margin"] if game.exact else abs(m - c["margin"]) <= TAU
        elif fixture.kind == "anonymous":
            sq = tuple(entry["status_quo"])
            m = anonymous.anonymous_margin(game, sq, c["coalition"], c["deviation"],
                                           as_fraction(c["epsilon"]))
            ok = str(m) == c["margin"] and m > 0
        else:
            sq = StepProfile.from_json(entry["status_quo"], lo=None, hi=None)
            coalition = tuple((Fraction(a), Fraction(b)) for a, b in c["coalition"])
            dev = _deviation_profile(c["deviation"])
            space = _space(cfg).with_profile_points(sq)
            eps = as_fraction(c["epsilon"])
            m, _, _ = continuum_margin(game, sq, coalition, dev, eps, space)
            stored = float(Fraction(c["margin"])) if isinstance(c["margin"], str) else c["margin"]
            ok = m is not None and m > TAU and m >= stored - TAU
        rows.append({"status_quo": entry["status_quo"], "recomputed": to_json_number(m),
                     "stored": c["margin"], "ok": bool(ok)})
    return rows, all(r["ok"] for r in rows)


def _deviation_profile(pieces: list[dict]) -> StepProfile:
    zero, one = Fraction(0), Fraction(1)
    bps, vals = [zero], []
    for p in sorted(pieces, key=lambda p: Fraction(p["interval"][0])):
        a, b = Fraction(p["interval"][0]), Fraction(p["interval"][1])
        if a > bps[-1]:
            bps.append(a)
            vals.append(zero)
        bps.append(b)
        vals.append(Fraction(p["value"]))
    if bps[-1] < one:
        bps.append(one)
        vals.append(zero)
    return StepProfile(bps, vals, lo=None, hi=None)


def _parse_stages(s: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in s.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad --stages {s!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="weakcore", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="list the registered fixtures")
    r = sub.add_parser("run", help="run one experiment and write a JSON report")
    r.add_argument("--game", required=True, help="fixture name or path to a finite-game JSON file")
    r.add_argument("--mode", required=True, choices=MODES)
    r.add_argument("--epsilon", help="blocking slack, e.g. 1/8 or 0.05")
    r.add_argument("--cells", type=int, default=4, help="cells of the search partition")
    r.add_argument("--grid", type=int, default=5, help="number of equally spaced actions in [0,1]")
    r.add_argument("--samples", type=int, default=6, help="dyadic sample level (k/2^level)")
    r.add_argument("--stages", type=_parse_stages, default=(2, 4, 8),
                   help="comma-separated cell counts of the partition net")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--status-quo", help="comma-separated per-cell actions")
    r.add_argument("--out", help="report path (default: stdout)")
    r.add_argument("--csv", help="pipeline mode: write (stage, test function, integral) rows here")
    v = sub.add_parser("verify", help="recompute the certificates stored in a report")
    v.add_argument("report")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for row in registry_list():
            print(f"{row['name']:18} {row['kind']:10} {row['description']}")
        return EXIT_OK
    try:
        if args.command == "verify":
            with open(args.report) as fh:
                rows, ok = verify_report(json.load(fh))
            print(json.dumps({"certificates": len(rows), "all_reproduced": ok,
                              "mismatches": [r for r in rows if not r["ok"]]}, indent=2))
            return EXIT_OK if ok else EXIT_FAIL
        cfg = ExperimentConfig(args.game, args.mode, args.epsilon, args.cells, args.grid,
                               args.samples, args.stages, args.seed, args.status_quo, args.out,
                               args.csv)
        report, code = run(cfg)
    except (UsageError, GameInputError, OSError, json.JSONDecodeError) as exc:
        print(f"weakcore: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = json.dumps(report, indent=2)
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    status = "holds" if code == EXIT_OK else "FAILS"
    print(f"{cfg.mode} on {cfg.game}: {report['result']['assertion']['name']} {status}",
          file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
