"""Command line front end.

    annkh compute  --strands 2 --word "1"
    annkh current  --strands 3 --word "1 2"
    annkh spectral --strands 2 --word "-1 -1 -1"
    annkh snaction --knot "" --strands 1 --cable 3
    annkh verify   --suite tl-relations --knot "1 1 1" --cable 2

Exit status is 0 when every check in the report passes, 1 when some check
fails, 2 on bad input and 3 when a resource limit is hit.
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import random
import sys
from dataclasses import dataclass

from .annulus_core import BraidLikeWord, WordError, closure, parse_word
from .cobordism import (ComplexCache, cable_word, colored_skh, schur_weyl_matrix, sn_action,
                        stabilization_maps, tl_reference_matrix)
from .homology import euler_audit, homology, page_totals, spectral_sequence, to_json_dims, trapezoid_ok
from .repr import (current_action, decompose_sl2, irreps_json, module_report, reconstruct_dims, schur_bound,
                   sl2_module)
from .tqft import DEFAULT_MAX_CUBE, ResourceLimitError, TrigradedComplex, build_complex, verify_chain_relations

SCHEMA = 1
COMMANDS = ("compute", "current", "spectral", "snaction", "verify")
SUITES = ("chain-relations", "current-algebra", "trapezoid", "schur", "quiver", "tl-relations", "stabilization")
CORPUS_SIZE = 50

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_RESOURCE = 0, 1, 2, 3


@dataclass(frozen=True)
class RunConfig:
    command: str
    word: str | None = None
    strands: int | None = None
    knot: str | None = None
    cable: int | None = None
    framing: int | None = None
    fmt: str = "json"
    max_cube: int = DEFAULT_MAX_CUBE
    seed: int = 0
    suite: str | None = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise WordError(f"unknown command {self.command!r}")
        if self.max_cube < 1:
            raise WordError("--max-cube must be positive")
        if self.cable is not None and self.cable < 0:
            raise WordError("--cable must be non-negative")
        if self.word is not None and self.knot is not None:
            raise WordError("give --word or --knot, not both")
        if self.command == "verify" and self.suite not in SUITES:
            raise WordError(f"unknown suite {self.suite!r}; choose from {', '.join(SUITES)}")

    def knot_word(self) -> BraidLikeWord:
        text = self.knot or ""
        strands = self.strands
        if strands is None:
            strands = max((abs(int(t)) for t in text.split()), default=0) + 1
        return parse_word(text, strands)

    def target(self) -> BraidLikeWord | None:
        """The word whose closure single-diagram commands work on."""
        if self.word is not None:
            if self.strands is None:
                raise WordError("--word needs --strands")
            return parse_word(self.word, self.strands)
        if self.knot is not None:
            n = 1 if self.cable is None else self.cable
            return cable_word(self.knot_word(), n, self.framing)
        return None

    def describe(self) -> dict:
        out = {"command": self.command}
        for name in ("word", "strands", "knot", "cable", "framing", "suite"):
            val = getattr(self, name)
            if val is not None:
                out[name] = val
        if self.command == "verify" and self.word is None and self.knot is None:
            out["seed"] = self.seed
        return out


# ------------------------------------------------------------------ corpus


def corpus(seed: int = 0, size: int = CORPUS_SIZE, max_strands: int = 4,
           max_crossings: int = 6) -> list[BraidLikeWord]:
    """Reproducible random crossing words for the property suites."""
    rng = random.Random(seed)
    out = []
    while len(out) < size:
        strands = rng.randint(1, max_strands)
        length = rng.randint(0, max_crossings) if strands > 1 else 0
        toks = [rng.choice((1, -1)) * rng.randint(1, strands - 1) for _ in range(length)]
        out.append(parse_word(" ".join(map(str, toks)), strands))
    return out


def word_label(word: BraidLikeWord) -> dict:
    return {"word": word.text(), "strands": word.strands}


# ---------------------------------------------------------------- commands


def _complex(word: BraidLikeWord, cfg: RunConfig) -> TrigradedComplex:
    return build_complex(closure(word), cfg.max_cube)


def _need_target(cfg: RunConfig) -> BraidLikeWord:
    word = cfg.target()
    if word is None:
        raise WordError(f"{cfg.command} needs --word and --strands, or --knot")
    return word


def cmd_compute(cfg: RunConfig) -> dict:
    word = _need_target(cfg)
    cx = _complex(word, cfg)
    H = homology(cx, "d0")
    dims = H.dims()
    table = decompose_sl2(sl2_module(cx, H))
    return {"diagram": word_label(word), "skh": to_json_dims(dims), "irreps": irreps_json(table),
            "checks": {"trapezoid": trapezoid_ok(dims), "euler characteristic": euler_audit(cx, H),
                       "irreps rebuild dims": reconstruct_dims(table) == dims}}


def cmd_current(cfg: RunConfig) -> dict:
    word = _need_target(cfg)
    cx = _complex(word, cfg)
    H = homology(cx, "d0")
    M = current_action(cx, H)
    rep = module_report(M)
    checks = dict(rep["current_relations"])
    checks.update(rep["quiver"]["relations"])
    checks["schur bound"] = schur_bound(M.sl2, word.strands)
    return {"diagram": word_label(word), "skh": to_json_dims(H.dims()), "irreps": rep["irreps"],
            "quiver": rep["quiver"], "indecomposable": rep["indecomposable"],
            "operators": {name: op.triplets() for name, op in M.operators().items()},
            "checks": checks}


def _by_degree(dims: dict) -> dict[int, int]:
    out: dict[int, int] = {}
    for key, n in dims.items():
        out[key[0]] = out.get(key[0], 0) + n
    return dict(sorted(out.items()))


def cmd_spectral(cfg: RunConfig) -> dict:
    word = _need_target(cfg)
    cx = _complex(word, cfg)
    pages = spectral_sequence(cx)
    kh = homology(cx, "full_kh").dims_by_degree()
    skh = _by_degree(homology(cx, "d0").dims())
    last = page_totals(pages[-1])
    first = page_totals(pages[0])
    differ = sorted(i for i in set(skh) | set(last) if skh.get(i, 0) != last.get(i, 0))
    return {"diagram": word_label(word),
            "pages": [{"r": p["r"], "dims": [{"i": i, "k": k, "dim": n} for (i, k), n in sorted(p["dims"].items())]}
                      for p in pages],
            "kh_by_degree": kh, "skh_by_degree": skh, "e_infinity_by_degree": last,
            "degrees_where_skh_and_kh_differ": differ,
            "checks": {"E1 = SKh": first == skh,
                       "E-infinity total = Kh total": sum(last.values()) == sum(kh.values()),
                       "E-infinity = Kh per degree": last == kh}}


def _transposition(i: int, n: int) -> tuple[int, ...]:
    p = list(range(n))
    p[i - 1], p[i] = p[i], p[i - 1]
    return tuple(p)


def _sn_report(word: BraidLikeWord, n: int, cfg: RunConfig, cache: ComplexCache) -> dict:
    act = sn_action(word, n, cfg.framing, cache)
    rep = act.report()
    checks = dict(rep.pop("relations"))
    if not word.letters and word.strands == 1:
        H = act.homology
        for i in act.e:
            sw = schur_weyl_matrix(H, _transposition(i, n))
            checks[f"s{i} = Schur-Weyl transposition"] = act.s[i] == sw
            checks[f"e{i} = u{i} formula"] = act.e[i] == tl_reference_matrix(H, i)
            rep.setdefault("schur_weyl", {})[str(i)] = sw.triplets()
        checks["every permutation matches Schur-Weyl"] = all(
            act.permutation(p) == schur_weyl_matrix(H, p) for p in itertools.permutations(range(n)))
    rep["colored"] = to_json_dims(colored_skh(act))
    rep["checks"] = checks
    return rep


def _knot_cable(cfg: RunConfig) -> tuple[BraidLikeWord, int]:
    if cfg.knot is None:
        raise WordError(f"{cfg.command} needs --knot")
    return cfg.knot_word(), 2 if cfg.cable is None else cfg.cable


def cmd_snaction(cfg: RunConfig) -> dict:
    word, n = _knot_cable(cfg)
    return _sn_report(word, n, cfg, ComplexCache(cfg.max_cube))


# ------------------------------------------------------------------ suites


def _items(cfg: RunConfig) -> list[BraidLikeWord]:
    word = cfg.target()
    return [word] if word is not None else corpus(cfg.seed)


def _corpus_suite(cfg: RunConfig, check) -> dict:
    results, failures = [], []
    for word in _items(cfg):
        cx = _complex(word, cfg)
        checks = check(word, cx)
        results.append({**word_label(word), "passed": all(checks.values())})
        if not all(checks.values()):
            failures.append({**word_label(word), "failed": sorted(k for k, v in checks.items() if not v),
                             "checks": checks})
    return {"items": results, "failures": failures,
            "checks": {f"{len(results) - len(failures)}/{len(results)} items pass": not failures}}


def _chain_relations(word, cx):
    return verify_chain_relations(cx)


def _current_algebra(word, cx):
    H = homology(cx, "d0")
    M = current_action(cx, H)
    out = {"current: " + k: v for k, v in module_report(M, with_quiver=False)["current_relations"].items()}
    out["schur bound"] = schur_bound(M.sl2, word.strands)
    out["trapezoid"] = trapezoid_ok(H.dims())
    return out


def _trapezoid(word, cx):
    H = homology(cx, "d0")
    dims = H.dims()
    return {"trapezoid": trapezoid_ok(dims), "euler characteristic": euler_audit(cx, H),
            "irreps rebuild dims": reconstruct_dims(decompose_sl2(sl2_module(cx, H))) == dims}


def _quiver(word, cx):
    M = current_action(cx, homology(cx, "d0"))
    return dict(module_report(M)["quiver"]["relations"])


def _sn_targets(cfg: RunConfig, defaults) -> list[tuple[BraidLikeWord, int]]:
    if cfg.knot is not None:
        return [_knot_cable(cfg)]
    if cfg.word is not None:
        raise WordError(f"suite {cfg.suite} takes --knot, not --word")
    return [(parse_word(k, s), n) for k, s, n in defaults]


def _sn_suite(cfg: RunConfig, defaults) -> dict:
    cache = ComplexCache(cfg.max_cube)
    runs, checks = [], {}
    for word, n in _sn_targets(cfg, defaults):
        rep = _sn_report(word, n, cfg, cache)
        name = f"{word.text() or 'unknot'} cable {n}"
        runs.append({"knot": word.text(), "strands": word.strands, "cable": n,
                     "calibration": rep["calibration"], "checks": rep["checks"]})
        checks.update({f"{name}: {k}": v for k, v in rep["checks"].items()})
    return {"runs": runs, "checks": checks}


def _stabilization_suite(cfg: RunConfig) -> dict:
    targets = _sn_targets(cfg, (("", 1, 1), ("1 1 1", 2, 0)))
    cache = ComplexCache(cfg.max_cube)
    runs, checks = [], {}
    for word, n in targets:
        st = stabilization_maps(word, n, cache=cache)
        name = f"{word.text() or 'unknot'} cable {n} -> {n + 2}"
        runs.append({"knot": word.text(), "strands": word.strands, "from": n, "to": n + 2,
                     "scalar": st.scalar, "small_dim": st.small.dim, "large_dim": st.large.dim,
                     "cup": st.cup.triplets(), "cap": st.cap.triplets()})
        checks.update({f"{name}: {k}": v for k, v in st.checks().items()})
    return {"runs": runs, "checks": checks}


def cmd_verify(cfg: RunConfig) -> dict:
    suite = cfg.suite
    if suite == "chain-relations":
        return _corpus_suite(cfg, _chain_relations)
    if suite == "current-algebra":
        return _corpus_suite(cfg, _current_algebra)
    if suite == "trapezoid":
        return _corpus_suite(cfg, _trapezoid)
    if suite == "quiver":
        return _corpus_suite(cfg, _quiver)
    if suite == "schur":
        if cfg.knot is None and cfg.cable is not None:
            cfg = RunConfig(**{**cfg.__dict__, "knot": "", "strands": 1})
        return _sn_suite(cfg, (("", 1, 2), ("", 1, 3), ("", 1, 4)))
    if suite == "tl-relations":
        return _sn_suite(cfg, (("", 1, 3), ("1 1 1", 2, 2)))
    return _stabilization_suite(cfg)


HANDLERS = {"compute": cmd_compute, "current": cmd_current, "spectral": cmd_spectral,
            "snaction": cmd_snaction, "verify": cmd_verify}


def run(cfg: RunConfig) -> dict:
    report = HANDLERS[cfg.command](cfg)
    report["schema"] = SCHEMA
    report["input"] = cfg.describe()
    report["ok"] = all(report["checks"].values())
    return report


# ------------------------------------------------------------------ output


def _jsonable(x):
    if isinstance(x, dict):
        return {(",".join(map(str, k)) if isinstance(k, tuple) else str(k)): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if hasattr(x, "numerator") and not isinstance(x, (int, bool)):
        return str(x)
    return x


def to_json(report: dict) -> str:
    return json.dumps(_jsonable(report), sort_keys=True, indent=1) + "\n"


def _table(rows: list[dict]) -> list[str]:
    cols = list(rows[0])
    cells = [[str(r.get(c, "")) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[n]) for row in cells)) for n, c in enumerate(cols)]
    fmt = "  ".join(f"{{:>{w}}}" for w in widths)
    return [fmt.format(*cols)] + [fmt.format(*row) for row in cells]


def to_table(report: dict) -> str:
    report = _jsonable(report)
    lines = []
    for key in sorted(report):
        if key in ("checks", "ok"):
            continue
        val = report[key]
        if isinstance(val, list) and val and all(isinstance(v, dict) for v in val) and \
                all(not isinstance(x, (dict, list)) for v in val for x in v.values()):
            lines.append(f"{key}:")
            lines.extend("  " + row for row in _table(val))
        elif isinstance(val, (dict, list)):
            lines.append(f"{key}: {json.dumps(val, sort_keys=True)}")
        else:
            lines.append(f"{key}: {val}")
    for name, ok in sorted(report["checks"].items()):
        lines.append(f"{'PASS' if ok else 'FAIL'}  {name}")
    lines.append("ok" if report["ok"] else "FAILED")
    return "\n".join(lines) + "\n"


# -------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="annkh", description="Sutured annular Khovanov homology toolkit.",
                                allow_abbrev=False)
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--word", help="crossing word such as \"1 -2 1\"; closed around the annulus")
    p.add_argument("--strands", type=int, help="number of strands of --word or --knot")
    p.add_argument("--knot", help="braid word of a knot to be cabled")
    p.add_argument("--cable", type=int, help="cable multiplicity for --knot")
    p.add_argument("--framing", type=int, help="framing of the cable (default: blackboard)")
    p.add_argument("--format", choices=("json", "table"), default="json", dest="fmt")
    p.add_argument("--max-cube", type=int, help="largest cube of resolutions allowed (vertices)")
    p.add_argument("--seed", type=int, default=0, help="seed of the random corpus")
    p.add_argument("--suite", choices=SUITES)
    return p


def config_from_args(argv: list[str] | None = None) -> RunConfig:
    args = build_parser().parse_args(argv)
    limit = args.max_cube
    if limit is None:
        env = os.environ.get("ANNKH_MAX_CUBE")
        try:
            limit = int(env) if env else DEFAULT_MAX_CUBE
        except ValueError:
            raise WordError(f"ANNKH_MAX_CUBE is not an integer: {env!r}") from None
    return RunConfig(args.command, args.word, args.strands, args.knot, args.cable, args.framing,
                     args.fmt, limit, args.seed, args.suite)


def main(argv: list[str] | None = None) -> int:
    try:
        cfg = config_from_args(argv)
        cfg.target()
        report = run(cfg)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    except ValueError as exc:
        print(f"annkh: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ResourceLimitError as exc:
        print(f"annkh: resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    sys.stdout.write(to_json(report) if cfg.fmt == "json" else to_table(report))
    return EXIT_OK if report["ok"] else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
