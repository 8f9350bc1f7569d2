"""Solver-agnostic mixed-integer linear program representation.

A tiny IR sitting between the model builders and the solvers: typed
variables, tagged linear constraints, a minimization objective, and optional
warm-start hints. Includes LP-format text export/import (the writer's dialect
is the one the bundled reader understands) and plain-text warm-start files,
so external solvers can be plugged in without touching anything else.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

__all__ = [
    "BINARY",
    "INTEGER",
    "CONTINUOUS",
    "MilpInstance",
    "Constraint",
    "write_lp",
    "read_lp",
    "write_warm_start",
    "read_warm_start",
]

BINARY = "binary"
INTEGER = "integer"
CONTINUOUS = "continuous"

_KINDS = (BINARY, INTEGER, CONTINUOUS)

INF = math.inf


@dataclass(frozen=True)
class Constraint:
    """One linear row: sum(coefs * vars) <sense> rhs, with a unique tag."""

    tag: str
    var_indices: np.ndarray
    coefficients: np.ndarray
    sense: str  # "<=", ">=", "="
    rhs: float


class MilpInstance:
    """Mutable while being built, frozen before solving.

    Variables are identified by index; names are unique and chosen by the
    builders so that lexicographic name order equals creation order, which
    keeps solver runs reproducible.
    """

    def __init__(self, name: str = "model") -> None:
        self.name = name
        self._names: list[str] = []
        self._name_to_index: dict[str, int] = {}
        self._kinds: list[str] = []
        self._lb: list[float] = []
        self._ub: list[float] = []
        self._constraints: list[Constraint] = []
        self._tags: set[str] = set()
        self._objective: dict[int, float] = {}
        self.warm_start: dict[int, float] | None = None
        self.metadata: dict[str, str] = {}
        self._frozen = False
        self._matrix_cache: dict | None = None

    # -- construction -------------------------------------------------------

    def add_variable(self, name: str, kind: str = CONTINUOUS,
                     lb: float = 0.0, ub: float = INF) -> int:
        if self._frozen:
            raise RuntimeError("instance is frozen")
        if kind not in _KINDS:
            raise ValueError(f"unknown variable kind {kind!r}")
        if name in self._name_to_index:
            raise ValueError(f"duplicate variable name {name!r}")
        if kind == BINARY:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        if lb > ub:
            raise ValueError(f"variable {name!r}: lower bound exceeds upper bound")
        idx = len(self._names)
        self._names.append(name)
        self._name_to_index[name] = idx
        self._kinds.append(kind)
        self._lb.append(float(lb))
        self._ub.append(float(ub))
        return idx

    def add_constraint(self, tag: str,
                       terms: Sequence[tuple[int, float]] | tuple[np.ndarray, np.ndarray],
                       sense: str, rhs: float) -> None:
        if self._frozen:
            raise RuntimeError("instance is frozen")
        if sense not in ("<=", ">=", "="):
            raise ValueError(f"unknown sense {sense!r}")
        if tag in self._tags:
            raise ValueError(f"duplicate constraint tag {tag!r}")
        if isinstance(terms, tuple) and len(terms) == 2 and isinstance(terms[0], np.ndarray):
            idx, coef = terms
        else:
            idx = np.fromiter((t[0] for t in terms), dtype=np.int64, count=len(terms))
            coef = np.fromiter((t[1] for t in terms), dtype=np.float64, count=len(terms))
        if idx.size and (idx.min() < 0 or idx.max() >= len(self._names)):
            raise ValueError(f"constraint {tag!r} references undeclared variables")
        self._tags.add(tag)
        self._constraints.append(Constraint(tag, idx, coef.astype(np.float64), sense, float(rhs)))

    def add_objective_term(self, index: int, coefficient: float) -> None:
        if self._frozen:
            raise RuntimeError("instance is frozen")
        self._objective[index] = self._objective.get(index, 0.0) + float(coefficient)

    def set_warm_start(self, values: Mapping[int, float] | Mapping[str, float] | None,
                       tolerance: float = 1e-6) -> None:
        """Attach a warm start, validating bounds and integrality."""
        if values is None:
            self.warm_start = None
            return
        resolved: dict[int, float] = {}
        for key, val in values.items():
            idx = self._name_to_index[key] if isinstance(key, str) else int(key)
            val = float(val)
            if val < self._lb[idx] - tolerance or val > self._ub[idx] + tolerance:
                raise ValueError(f"warm start violates bounds of {self._names[idx]!r}")
            if self._kinds[idx] != CONTINUOUS and abs(val - round(val)) > tolerance:
                raise ValueError(f"warm start not integral on {self._names[idx]!r}")
            resolved[idx] = val
        self.warm_start = resolved

    def freeze(self) -> "MilpInstance":
        self._frozen = True
        return self

    # -- inspection ---------------------------------------------------------

    @property
    def n_variables(self) -> int:
        return len(self._names)

    @property
    def n_constraints(self) -> int:
        return len(self._constraints)

    @property
    def variable_names(self) -> list[str]:
        return list(self._names)

    def index_of(self, name: str) -> int:
        return self._name_to_index[name]

    def kind_of(self, index: int) -> str:
        return self._kinds[index]

    def bounds_of(self, index: int) -> tuple[float, float]:
        return self._lb[index], self._ub[index]

    @property
    def objective(self) -> dict[int, float]:
        return dict(self._objective)

    def constraints(self) -> Iterator[Constraint]:
        return iter(self._constraints)

    def constraint_by_tag(self, tag: str) -> Constraint:
        for c in self._constraints:
            if c.tag == tag:
                return c
        raise KeyError(tag)

    def objective_value(self, assignment: np.ndarray) -> float:
        return float(sum(coef * assignment[idx] for idx, coef in self._objective.items()))

    def assignment_from_map(self, values: Mapping[str, float] | Mapping[int, float],
                            default: float = 0.0) -> np.ndarray:
        out = np.full(self.n_variables, default, dtype=np.float64)
        for key, val in values.items():
            idx = self._name_to_index[key] if isinstance(key, str) else int(key)
            out[idx] = val
        return out

    def assignment_to_map(self, assignment: np.ndarray) -> dict[str, float]:
        return {name: float(assignment[i]) for i, name in enumerate(self._names)}

    # -- matrix form --------------------------------------------------------

    def matrices(self) -> dict:
        """Dense objective, sparse row matrix, row bound arrays, variable
        bounds, and integrality flags, cached after the first call."""
        if self._matrix_cache is not None:
            return self._matrix_cache
        n = self.n_variables
        m = self.n_constraints
        c = np.zeros(n)
        for idx, coef in self._objective.items():
            c[idx] = coef
        if m:
            lengths = np.fromiter((len(con.var_indices) for con in self._constraints),
                                  dtype=np.int64, count=m)
            rows = np.repeat(np.arange(m, dtype=np.int64), lengths)
            cols = np.concatenate([con.var_indices for con in self._constraints]) \
                if m else np.empty(0, dtype=np.int64)
            data = np.concatenate([con.coefficients for con in self._constraints]) \
                if m else np.empty(0)
            a = sp.csr_matrix((data, (rows, cols)), shape=(m, n))
        else:
            a = sp.csr_matrix((0, n))
        row_lb = np.empty(m)
        row_ub = np.empty(m)
        for i, con in enumerate(self._constraints):
            if con.sense == "<=":
                row_lb[i], row_ub[i] = -INF, con.rhs
            elif con.sense == ">=":
                row_lb[i], row_ub[i] = con.rhs, INF
            else:
                row_lb[i] = row_ub[i] = con.rhs
        integrality = np.fromiter((0 if k == CONTINUOUS else 1 for k in self._kinds),
                                  dtype=np.int64, count=n)
        cache = {
            "c": c,
            "A": a,
            "row_lb": row_lb,
            "row_ub": row_ub,
            "lb": np.array(self._lb),
            "ub": np.array(self._ub),
            "integrality": integrality,
        }
        if self._frozen:
            self._matrix_cache = cache
        return cache

    def nonzeros(self) -> int:
        return sum(len(c.var_indices) for c in self._constraints)


# ---------------------------------------------------------------------------
# LP-format text
# ---------------------------------------------------------------------------

def _fmt(value: float) -> str:
    return f"{value:.12g}"


def _bound_str(value: float) -> str:
    if value == INF:
        return "+inf"
    if value == -INF:
        return "-inf"
    return _fmt(value)


def _terms_text(pairs: Iterable[tuple[str, float]]) -> list[str]:
    """Render coefficient/name pairs as LP tokens, several per output chunk."""
    chunks: list[str] = []
    for name, coef in pairs:
        sign = "-" if coef < 0 else "+"
        chunks.append(f"{sign} {_fmt(abs(coef))} {name}")
    return chunks


def write_lp(instance: MilpInstance) -> str:
    """Serialize to LP-format text with 12-significant-digit coefficients."""
    names = instance.variable_names
    out: list[str] = [f"\\ {instance.name}", "Minimize"]
    obj_terms = _terms_text((names[i], coef)
                            for i, coef in sorted(instance.objective.items())
                            if coef != 0.0)
    if not obj_terms:
        obj_terms = ["+ 0 " + names[0]] if names else ["+ 0 zero"]
    out.append(" obj: " + _join_wrapped(obj_terms))
    out.append("Subject To")
    for con in instance.constraints():
        order = np.argsort(con.var_indices, kind="stable")
        terms = _terms_text((names[con.var_indices[k]], con.coefficients[k])
                            for k in order if con.coefficients[k] != 0.0)
        if not terms:
            terms = ["+ 0 " + names[0]]
        out.append(f" {con.tag}: " + _join_wrapped(terms)
                   + f" {con.sense} {_fmt(con.rhs)}")
    out.append("Bounds")
    for i, name in enumerate(names):
        if instance.kind_of(i) == BINARY:
            continue
        lb, ub = instance.bounds_of(i)
        if lb == ub:
            out.append(f" {name} = {_fmt(lb)}")
        else:
            out.append(f" {_bound_str(lb)} <= {name} <= {_bound_str(ub)}")
    generals = [names[i] for i in range(len(names)) if instance.kind_of(i) == INTEGER]
    if generals:
        out.append("General")
        out.extend(" " + " ".join(generals[k:k + 16]) for k in range(0, len(generals), 16))
    binaries = [names[i] for i in range(len(names)) if instance.kind_of(i) == BINARY]
    if binaries:
        out.append("Binary")
        out.extend(" " + " ".join(binaries[k:k + 16]) for k in range(0, len(binaries), 16))
    out.append("End")
    return "\n".join(out) + "\n"


def _join_wrapped(chunks: list[str], width: int = 220) -> str:
    lines: list[str] = []
    current: list[str] = []
    length = 0
    for chunk in chunks:
        if length + len(chunk) + 1 > width and current:
            lines.append(" ".join(current))
            current, length = [], 0
        current.append(chunk)
        length += len(chunk) + 1
    if current:
        lines.append(" ".join(current))
    return ("\n   ".join(lines)).lstrip()


_TOKEN = re.compile(r"<=|>=|=|\+|-|:|[A-Za-z_][A-Za-z0-9_.\[\]]*|"
                    r"[0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?|\S")
_SECTION = re.compile(r"^\s*(minimize|min|maximize|max|subject\s+to|st|s\.t\.|"
                      r"bounds|general|generals|gen|binary|binaries|bin|end)\s*$",
                      re.IGNORECASE)


_NUMBER = re.compile(r"^[0-9.]")


def read_lp(text: str) -> MilpInstance:
    """Parse the dialect produced by :func:`write_lp`.

    Every objective/constraint row carries a ``label:`` prefix (the writer
    guarantees it), so a line whose second token is ``:`` starts a new row and
    anything else continues the previous one. Variables are created in order
    of first appearance; kinds and bounds come from the Bounds/General/Binary
    sections. Maximization is rejected.
    """
    sections: dict[str, list[str]] = {}
    current: str | None = None
    name = "parsed"
    for line_no, raw in enumerate(text.splitlines()):
        if line_no == 0 and raw.startswith("\\"):
            name = raw[1:].strip() or name
        line = raw.split("\\")[0].rstrip()
        if not line.strip():
            continue
        m = _SECTION.match(line)
        if m:
            word = m.group(1).lower().replace(" ", "").replace(".", "")
            if word in ("minimize", "min"):
                current = "objective"
            elif word in ("maximize", "max"):
                raise ValueError("maximization is not supported")
            elif word in ("subjectto", "st"):
                current = "constraints"
            elif word == "bounds":
                current = "bounds"
            elif word in ("general", "generals", "gen"):
                current = "general"
            elif word in ("binary", "binaries", "bin"):
                current = "binary"
            elif word == "end":
                current = None
            continue
        if current is None:
            continue
        sections.setdefault(current, []).append(line)

    inst = MilpInstance(name)
    kinds: dict[str, str] = {}
    bounds: dict[str, list[float]] = {}

    def var(name: str) -> int:
        if name in inst._name_to_index:
            return inst.index_of(name)
        return inst.add_variable(name, CONTINUOUS, 0.0, INF)

    def logical_rows(lines: list[str]) -> list[list[str]]:
        rows: list[list[str]] = []
        for line in lines:
            tokens = _TOKEN.findall(line)
            if not tokens:
                continue
            starts_new = len(tokens) >= 2 and tokens[1] == ":"
            if starts_new or not rows:
                rows.append(tokens)
            else:
                rows[-1].extend(tokens)
        return rows

    def parse_row(tokens: list[str]) -> tuple[str | None, list[tuple[str, float]],
                                              str | None, float | None]:
        label = None
        if len(tokens) >= 2 and tokens[1] == ":":
            label, tokens = tokens[0], tokens[2:]
        terms: list[tuple[str, float]] = []
        sense: str | None = None
        rhs: float | None = None
        sign = 1.0
        coef: float | None = None
        i = 0
        while i < len(tokens):
            tok = tokens[i]
            if tok in ("<=", ">=", "="):
                sense = tok
                i += 1
                rsign = 1.0
                if i < len(tokens) and tokens[i] in ("+", "-"):
                    rsign = -1.0 if tokens[i] == "-" else 1.0
                    i += 1
                if i >= len(tokens):
                    raise ValueError("constraint truncated after sense")
                rhs = rsign * float(tokens[i])
                i += 1
            elif tok == "+":
                i += 1
            elif tok == "-":
                sign = -sign
                i += 1
            elif _NUMBER.match(tok):
                coef = (1.0 if coef is None else coef) * float(tok)
                i += 1
            else:
                terms.append((tok, sign * (1.0 if coef is None else coef)))
                sign, coef = 1.0, None
                i += 1
        return label, terms, sense, rhs

    for row in logical_rows(sections.get("objective", [])):
        _, terms, _, _ = parse_row(row)
        for name, value in terms:
            inst.add_objective_term(var(name), value)

    for k, row in enumerate(logical_rows(sections.get("constraints", []))):
        label, terms, sense, rhs = parse_row(row)
        if sense is None or rhs is None:
            raise ValueError(f"constraint without sense/rhs near row {k}")
        inst.add_constraint(label or f"row{k}", [(var(n), v) for n, v in terms],
                            sense, rhs)

    for line in sections.get("bounds", []):
        tokens = _TOKEN.findall(line)
        _parse_bound(tokens, bounds, var)
    for line in sections.get("general", []):
        for name in _TOKEN.findall(line):
            kinds[name] = INTEGER
            var(name)
    for line in sections.get("binary", []):
        for name in _TOKEN.findall(line):
            kinds[name] = BINARY
            var(name)

    for name, kind in kinds.items():
        inst._kinds[inst.index_of(name)] = kind
        if kind == BINARY:
            inst._lb[inst.index_of(name)] = 0.0
            inst._ub[inst.index_of(name)] = 1.0
    for name, (lo, hi) in bounds.items():
        idx = inst.index_of(name)
        inst._lb[idx], inst._ub[idx] = lo, hi
    return inst.freeze()


def _parse_bound(tokens: list[str], bounds: dict[str, list[float]], var) -> None:
    def value(toks: list[str]) -> tuple[float, list[str]]:
        sign = 1.0
        if toks and toks[0] in ("+", "-"):
            sign = -1.0 if toks[0] == "-" else 1.0
            toks = toks[1:]
        word = toks[0]
        if word.lower() in ("inf", "infinity"):
            return sign * INF, toks[1:]
        return sign * float(word), toks[1:]

    names = [t for t in tokens if re.match(r"^[A-Za-z_]", t)
             and t.lower() not in ("inf", "infinity", "free")]
    if not names:
        raise ValueError(f"bound line without variable: {' '.join(tokens)}")
    name = names[0]
    var(name)
    if any(t.lower() == "free" for t in tokens):
        bounds[name] = [-INF, INF]
        return
    pos = tokens.index(name)
    lo, hi = 0.0, INF
    left = tokens[:pos]
    right = tokens[pos + 1:]
    if left:
        if left[-1] not in ("<=", ">="):
            raise ValueError(f"malformed bound: {' '.join(tokens)}")
        bound_value, _ = value(left[:-1])
        if left[-1] == "<=":
            lo = bound_value
        else:
            hi = bound_value
    if right:
        sense = right[0]
        bound_value, _ = value(right[1:])
        if sense == "<=":
            hi = bound_value
        elif sense == ">=":
            lo = bound_value
        elif sense == "=":
            lo = hi = bound_value
        else:
            raise ValueError(f"malformed bound: {' '.join(tokens)}")
    bounds[name] = [lo, hi]


# ---------------------------------------------------------------------------
# Warm-start files
# ---------------------------------------------------------------------------

def write_warm_start(instance: MilpInstance,
                     values: Mapping[int, float] | Mapping[str, float]) -> str:
    """Plain-text warm start: one `variable value` pair per line."""
    names = instance.variable_names
    lines = []
    for key, val in values.items():
        name = names[key] if isinstance(key, int) else key
        lines.append(f"{name} {_fmt(float(val))}")
    return "\n".join(lines) + "\n"


def read_warm_start(text: str) -> dict[str, float]:
    out: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#")[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"warm-start line {lineno}: expected 'variable value'")
        out[parts[0]] = float(parts[1])
    return out
