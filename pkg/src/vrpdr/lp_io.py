"""Minimal LP-format reader and a HiGHS solve bridge.

The reader targets the dialect written by :func:`vrpdr.milp.export_lp`
(one constraint per line), which is enough for round-trip checks and for
handing exported models to an external MILP solver.  The solve bridge goes
through ``scipy.optimize.milp`` (HiGHS), giving an independent optimization
path that never touches the in-package model structures.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

from .core import VrpdrError


class LpParseError(VrpdrError):
    pass


@dataclass
class ParsedLp:
    objective: List[Tuple[float, str]] = field(default_factory=list)
    constraints: List[Tuple[str, List[Tuple[float, str]], str, float]] = field(default_factory=list)
    bounds: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    binaries: List[str] = field(default_factory=list)

    def variable_names(self) -> list:
        seen: Dict[str, None] = {}
        for _, name in self.objective:
            seen.setdefault(name)
        for _, terms, _, _ in self.constraints:
            for _, name in terms:
                seen.setdefault(name)
        for name in self.bounds:
            seen.setdefault(name)
        for name in self.binaries:
            seen.setdefault(name)
        return list(seen)


_TERM = re.compile(r"([+-])\s+(\S+)\s+(\S+)")


def _parse_terms(body: str, where: str) -> list:
    terms = []
    pos = 0
    body = body.strip()
    if body == "0":
        return terms
    while pos < len(body):
        m = _TERM.match(body, pos)
        if not m:
            raise LpParseError(f"cannot parse terms in {where}: {body[pos:pos+40]!r}")
        sign, num, name = m.groups()
        coef = float(num)
        terms.append((coef if sign == "+" else -coef, name))
        pos = m.end()
        while pos < len(body) and body[pos] == " ":
            pos += 1
    return terms


def parse_lp(text: str) -> ParsedLp:
    parsed = ParsedLp()
    section = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("\\"):
            continue
        low = line.lower()
        if low in ("minimize", "maximize"):
            if low == "maximize":
                raise LpParseError("only minimization models are supported")
            section = "objective"
            continue
        if low == "subject to":
            section = "constraints"
            continue
        if low == "bounds":
            section = "bounds"
            continue
        if low in ("binaries", "binary"):
            section = "binaries"
            continue
        if low == "end":
            section = None
            continue
        if section == "objective":
            if ":" in line:
                line = line.split(":", 1)[1]
            parsed.objective.extend(_parse_terms(line, "objective"))
        elif section == "constraints":
            if ":" not in line:
                raise LpParseError(f"constraint line without a name: {line!r}")
            name, rest = line.split(":", 1)
            m = re.search(r"(<=|>=|=)\s*([^\s<>=]+)\s*$", rest)
            if not m:
                raise LpParseError(f"constraint without sense/rhs: {line!r}")
            sense, rhs = m.group(1), float(m.group(2))
            terms = _parse_terms(rest[: m.start()], f"constraint {name.strip()}")
            parsed.constraints.append((name.strip(), terms, sense, rhs))
        elif section == "bounds":
            m = re.match(r"(\S+)\s*<=\s*(\S+)\s*<=\s*(\S+)$", line)
            if not m:
                raise LpParseError(f"unsupported bounds line: {line!r}")
            lo, name, hi = m.groups()
            lo_v = float("-inf") if lo.lstrip("+-") == "inf" else float(lo)
            hi_v = float("inf") if hi.lstrip("+-") == "inf" else float(hi)
            parsed.bounds[name] = (lo_v, hi_v)
        elif section == "binaries":
            parsed.binaries.extend(line.split())
        else:
            raise LpParseError(f"content outside any section: {line!r}")
    return parsed


def solve_lp_text(text: str, time_limit: float = None, mip_gap: float = 0.0):
    """Solve an exported LP with HiGHS via scipy; returns (objective, values).

    Raises :class:`LpParseError` on malformed input and ``RuntimeError``
    when the solver does not prove optimality.
    """
    import numpy as np
    from scipy import sparse
    from scipy.optimize import Bounds, LinearConstraint, milp

    parsed = parse_lp(text)
    names = parsed.variable_names()
    index = {n: i for i, n in enumerate(names)}
    n = len(names)
    c = np.zeros(n)
    for coef, name in parsed.objective:
        c[index[name]] += coef

    rows, cols, vals = [], [], []
    lo_c, hi_c = [], []
    for rno, (_, terms, sense, rhs) in enumerate(parsed.constraints):
        for coef, name in terms:
            rows.append(rno)
            cols.append(index[name])
            vals.append(coef)
        if sense == "<=":
            lo_c.append(-np.inf)
            hi_c.append(rhs)
        elif sense == ">=":
            lo_c.append(rhs)
            hi_c.append(np.inf)
        else:
            lo_c.append(rhs)
            hi_c.append(rhs)
    A = sparse.csr_matrix((vals, (rows, cols)), shape=(len(parsed.constraints), n))

    lower = np.zeros(n)
    upper = np.full(n, np.inf)
    integrality = np.zeros(n)
    for name, (lo, hi) in parsed.bounds.items():
        lower[index[name]] = lo
        upper[index[name]] = hi
    for name in parsed.binaries:
        lower[index[name]] = 0.0
        upper[index[name]] = 1.0
        integrality[index[name]] = 1

    options = {"mip_rel_gap": mip_gap}
    if time_limit is not None:
        options["time_limit"] = time_limit
    res = milp(
        c,
        constraints=LinearConstraint(A, np.array(lo_c), np.array(hi_c)),
        bounds=Bounds(lower, upper),
        integrality=integrality,
        options=options,
    )
    if res.status != 0:
        raise RuntimeError(f"HiGHS did not reach optimality: {res.message}")
    values = {name: float(res.x[index[name]]) for name in names}
    return float(res.fun), values
