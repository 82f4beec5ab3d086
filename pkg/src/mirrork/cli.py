"""Command-line frontend.

Every subcommand builds a plain JSON-able report; ``--format table`` renders
the same report as text. Errors go to stderr as a single JSON line and map to
exit codes 2 (bad input), 3 (too large), 4 (cross-check mismatch).
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
import warnings
from dataclasses import dataclass, field

from . import catalog
from .bredon import bredon_homology, coend_h0, constant_Z, homology_table, mp_k0
from .eqcell import EQCW_SCHEMA, build_complex, underlying_homology
from .errors import ConsistencyError, MirrorkError, ValidationError
from .exactalg import AbGroup
from .glattice import enumerate_subgroups, fixed_sublattice, weil_resolution
from .groupcoh import h1
from .ktheory import MackeyData, _lattice_over, e2_page, finite_field_mackey, swan_finite_field

__all__ = ["RunConfig", "run", "main"]

log = logging.getLogger("mirrork")

REPORT_VERSION = "1"
_PRESET = re.compile(r"^ff:(\d+)(?:,(\d+))?$")


@dataclass
class RunConfig:
    command: str
    action: str | None = None
    source: str | None = None
    backend: str = "auto"
    subdivisions: int = 1
    coeff: str = "constZ"
    preset: str | None = None
    qmax: int = 3
    nmax: int = 6
    export: str | None = None
    fmt: str = "table"
    verbose: int = 0
    extra: dict = field(default_factory=dict)

    def validate(self):
        if self.extra:
            raise ValidationError(f"unknown options: {sorted(self.extra)}")
        if self.fmt not in ("table", "json"):
            raise ValidationError(f"unknown format {self.fmt!r}")
        if self.backend not in ("auto", "cubical", "delone"):
            raise ValidationError(f"unknown backend {self.backend!r}")
        if self.subdivisions < 0:
            raise ValidationError("--subdivisions must be >= 0")
        if self.qmax < 0 or self.nmax < 0:
            raise ValidationError("--qmax and --nmax must be >= 0")
        if not (self.coeff == "constZ" or self.coeff.startswith("mackey:")):
            raise ValidationError(f"--coeff must be constZ or mackey:<file>, got {self.coeff!r}")
        if self.command in ("e2", "swan"):
            q, d = self.parsed_preset()
            if self.command == "swan" and d is not None:
                raise ValidationError("swan takes --preset ff:q")
            if self.command == "e2" and d is None:
                raise ValidationError("e2 takes --preset ff:q,d")

    def parsed_preset(self) -> tuple[int, int | None]:
        m = _PRESET.match(self.preset or "")
        if not m:
            raise ValidationError(f"--preset must look like ff:q or ff:q,d, got {self.preset!r}")
        return int(m.group(1)), (int(m.group(2)) if m.group(2) else None)


# --------------------------------------------------------------------------
# Reports


def _group(g: AbGroup) -> list:
    return g.to_json()


def _report(kind: str, **body) -> dict:
    return {"report": f"{kind}/{REPORT_VERSION}", **body}


def _lattice_info(cfg: RunConfig) -> dict:
    lat = catalog.resolve(cfg.source)
    subgroups = []
    for cls in enumerate_subgroups(lat.group):
        H = cls.rep
        subgroups.append({
            "subgroup": H.label(),
            "order": H.order,
            "conjugates": len(cls.conjugates),
            "H1": _group(h1(lat, H).group),
            "fixed_rank": int(fixed_sublattice(lat, H).shape[1]),
        })
    W = weil_resolution(lat)
    return _report("lattice-info", name=lat.name, rank=lat.rank, group_order=lat.group.order,
                   monomial=lat.is_monomial(), kernel_order=lat.kernel().order, subgroups=subgroups,
                   weil_resolution={"induced_rank": W.big.rank, "quotient_rank": W.quotient.rank},
                   lattice=lat.to_json())


def _cells_build(cfg: RunConfig) -> dict:
    lat = catalog.resolve(cfg.source)
    X = build_complex(lat, cfg.backend, subdivisions=cfg.subdivisions)
    if cfg.export:
        with open(cfg.export, "w") as fh:
            json.dump(X.to_json(), fh, sort_keys=True)
    return _report("cells", name=lat.name, backend=X.backend, subdivisions=X.subdivisions, dimension=X.dimension,
                   cells=[X.ncells(p) for p in range(X.top_degree + 1)],
                   orbits=[len(X.orbits(p)) for p in range(X.top_degree + 1)],
                   euler_characteristic=X.euler_characteristic(),
                   underlying_homology=[_group(g) for g in underlying_homology(X)],
                   exported=({"path": cfg.export, "schema": EQCW_SCHEMA} if cfg.export else None))


def _bredon(cfg: RunConfig) -> dict:
    lat = catalog.resolve(cfg.source)
    if cfg.coeff == "constZ":
        M = None
    else:
        M = MackeyData.load(cfg.coeff[len("mackey:"):])
        lat = _lattice_over(lat, M.group)
        for w in M.warnings:
            log.warning(w)
    X = build_complex(lat, cfg.backend, subdivisions=cfg.subdivisions)
    H = bredon_homology(X, M if M is not None else constant_Z(X.group))
    return _report("bredon", name=lat.name, coefficients=cfg.coeff, backend=X.backend, H=[_group(g) for g in H])


def _kzero(cfg: RunConfig) -> dict:
    lat = catalog.resolve(cfg.source)
    # H_0 and fixed-point components only see the 1-skeleton
    X = build_complex(lat, cfg.backend, subdivisions=cfg.subdivisions, max_dim=1)
    chain = bredon_homology(X)[0]
    coend = coend_h0(X)
    mp = mp_k0(lat)
    agree = chain == coend.group == mp.group
    return _report("kzero", name=lat.name, backend=X.backend, chain_h0=_group(chain),
                   coend={"group": _group(coend.group), "generators": len(coend.generators)},
                   mp={"group": _group(mp.group), "generators": len(mp.generators)},
                   verdict="AGREE" if agree else "DISAGREE")


def _e2(cfg: RunConfig) -> dict:
    lat = catalog.resolve(cfg.source)
    q, d = cfg.parsed_preset()
    coeffs = {n: finite_field_mackey(q, d, n) for n in range(0, cfg.qmax + 1)}
    page = e2_page(lat, coeffs, (0, cfg.qmax), backend=cfg.backend)
    return _report("e2", name=lat.name, preset=cfg.preset, page=page.to_json())


def _swan(cfg: RunConfig) -> dict:
    q, _ = cfg.parsed_preset()
    rows = swan_finite_field(q, cfg.nmax)
    return _report("swan", preset=cfg.preset, degrees=[r.to_json() for r in rows])


def _catalog_list(cfg: RunConfig) -> dict:
    out = []
    for e in catalog.entries():
        lat = e.lattice
        out.append({"name": e.name, "rank": lat.rank, "group_order": lat.group.order, "note": e.note})
    return _report("catalog", entries=out)


def _catalog_export(cfg: RunConfig) -> dict:
    return catalog.get(cfg.source).lattice.to_json()


_HANDLERS = {
    ("lattice", "info"): _lattice_info,
    ("cells", "build"): _cells_build,
    ("bredon", None): _bredon,
    ("kzero", None): _kzero,
    ("e2", None): _e2,
    ("swan", None): _swan,
    ("catalog", "list"): _catalog_list,
    ("catalog", "export"): _catalog_export,
}


# --------------------------------------------------------------------------
# Table rendering


def _g(data) -> str:
    return str(AbGroup.from_json(data))


def _align(rows: list[tuple[str, str]]) -> str:
    w = max((len(a) for a, _ in rows), default=0)
    return "\n".join(f"{a.ljust(w)}  {b}".rstrip() for a, b in rows)


def render_table(cfg: RunConfig, rep: dict) -> str:
    kind = rep.get("report", "").split("/")[0]
    if kind == "lattice-info":
        rows = [("name", str(rep["name"])), ("rank", str(rep["rank"])), ("|G|", str(rep["group_order"])),
                ("monomial", str(rep["monomial"])), ("kernel order", str(rep["kernel_order"])),
                ("Weil resolution", "induced rank %d, quotient rank %d" % (rep["weil_resolution"]["induced_rank"],
                                                                          rep["weil_resolution"]["quotient_rank"]))]
        for s in rep["subgroups"]:
            rows.append((f"H = {s['subgroup']}", f"H^1 = {_g(s['H1'])}, rank of invariants = {s['fixed_rank']}"))
        return _align(rows)
    if kind == "cells":
        rows = [("backend", rep["backend"]), ("subdivisions", str(rep["subdivisions"])),
                ("cells", " ".join(map(str, rep["cells"]))), ("orbits", " ".join(map(str, rep["orbits"]))),
                ("euler characteristic", str(rep["euler_characteristic"]))]
        rows += [(f"H_{p}", _g(g)) for p, g in enumerate(rep["underlying_homology"])]
        return _align(rows)
    if kind == "bredon":
        return homology_table([AbGroup.from_json(g) for g in rep["H"]], "H")
    if kind == "kzero":
        return _align([("chain H_0", _g(rep["chain_h0"])), ("coend", _g(rep["coend"]["group"])),
                       ("MP", _g(rep["mp"]["group"])), ("verdict", rep["verdict"])])
    if kind == "e2":
        page = rep["page"]
        head = ["q\\p"] + [str(p) for p in range(page["rank"] + 1)]
        lines = [head]
        qmin, qmax = page["q_range"]
        for q in range(qmax, qmin - 1, -1):
            lines.append([str(q)] + [_g(page["E2"][f"{p},{q}"]) for p in range(page["rank"] + 1)])
        widths = [max(len(r[i]) for r in lines) for i in range(len(head))]
        out = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in lines]
        cert = page.get("collapse", {})
        out.append("")
        out.append(f"collapse: {'yes' if cert.get('collapses') else 'not certified'} ({cert.get('reason', '')})")
        for n, pieces in cert.get("graded", {}).items():
            flag = " (extension ambiguous)" if cert["extension_ambiguous"][n] else ""
            out.append(f"gr K_{n}: " + ", ".join(f"E_{p},{int(n) - p} = {_g(g)}" for p, g in pieces) + flag)
        return "\n".join(out)
    if kind == "swan":
        lines = [["n", "K_n(F)", "coker", "ker", ""]]
        for d in rep["degrees"]:
            lines.append([str(d["degree"]), _g(d["split"]), _g(d["coker"]), _g(d["ker"]),
                          "extension ambiguous" if d["extension_ambiguous"] else ""])
        widths = [max(len(r[i]) for r in lines) for i in range(5)]
        return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in lines)
    if kind == "catalog":
        return _align([(e["name"], f"rank {e['rank']}, |G| = {e['group_order']}: {e['note']}") for e in rep["entries"]])
    return dump(rep)


def dump(rep: dict) -> str:
    return json.dumps(rep, sort_keys=True, indent=2, ensure_ascii=False)


# --------------------------------------------------------------------------
# Entry points


class _Parser(argparse.ArgumentParser):
    """Raises instead of printing usage, so stderr carries only the JSON error line."""

    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}")


def _parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--format", dest="fmt", choices=("table", "json"), default=argparse.SUPPRESS)
    common.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS)
    cells = _Parser(add_help=False)
    cells.add_argument("--backend", default="auto")
    cells.add_argument("--subdivisions", type=int, default=1)

    p = _Parser(prog="mirrork", parents=[common], description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    lat = sub.add_parser("lattice").add_subparsers(dest="action", required=True)
    lat.add_parser("info", parents=[common]).add_argument("source")

    cb = sub.add_parser("cells").add_subparsers(dest="action", required=True)
    b = cb.add_parser("build", parents=[common, cells])
    b.add_argument("source")
    b.add_argument("--export")

    b = sub.add_parser("bredon", parents=[common, cells])
    b.add_argument("source")
    b.add_argument("--coeff", default="constZ")

    b = sub.add_parser("kzero", parents=[common, cells])
    b.add_argument("source")

    b = sub.add_parser("e2", parents=[common])
    b.add_argument("source")
    b.add_argument("--backend", default="auto")
    b.add_argument("--preset", required=True)
    b.add_argument("--qmax", type=int, default=3)

    b = sub.add_parser("swan", parents=[common])
    b.add_argument("--preset", required=True)
    b.add_argument("--nmax", type=int, default=6)

    cat = sub.add_parser("catalog").add_subparsers(dest="action", required=True)
    cat.add_parser("list", parents=[common])
    cat.add_parser("export", parents=[common]).add_argument("source", metavar="name")
    return p


def parse_config(argv) -> RunConfig:
    ns = _parser().parse_args(argv)
    args = vars(ns)
    cfg = RunConfig(command=args.pop("command"))
    for name in ("action", "source", "backend", "subdivisions", "coeff", "preset", "qmax", "nmax", "export", "fmt",
                 "verbose"):
        if name in args:
            setattr(cfg, name, args.pop(name))
    cfg.verbose = cfg.verbose or 0
    cfg.extra = args
    cfg.validate()
    return cfg


def _fail(exc: MirrorkError, kind: str) -> int:
    msg = json.dumps({"error": kind, "exit": exc.exit_code, "message": str(exc)}, ensure_ascii=False)
    print(msg, file=sys.stderr)
    return exc.exit_code


_KIND = {2: "validation", 3: "unsupported", 4: "consistency"}


def run(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = parse_config(argv)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except MirrorkError as exc:
        return _fail(exc, _KIND.get(exc.exit_code, "error"))
    logging.basicConfig(level=logging.DEBUG if cfg.verbose > 1 else logging.INFO if cfg.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default" if cfg.verbose else "ignore")
            rep = _HANDLERS[(cfg.command, cfg.action)](cfg)
        print(dump(rep) if cfg.fmt == "json" else render_table(cfg, rep))
        if rep.get("verdict") == "DISAGREE":
            raise ConsistencyError("K_0 presentations disagree")
    except MirrorkError as exc:
        return _fail(exc, _KIND.get(exc.exit_code, "error"))
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        return _fail(ValidationError(f"{type(exc).__name__}: {exc}"), "validation")
    return 0


def main(argv=None) -> int:
    return run(argv)
