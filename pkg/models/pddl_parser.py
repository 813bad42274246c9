"""
PDDL reader for the durative-action subset of PDDL2.1, timed initial literals
of PDDL2.2 and the ``:constraints`` block of PDDL3.0.

Text is read into line-annotated s-expressions with pyparsing, then
interpreted into lifted schemata (``ParsedDomain``/``ParsedProblem``) and
finally grounded into a ``GroundedTask``.
"""
import logging
import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

from pyparsing import (
    Forward,
    Group,
    OneOrMore,
    Optional as Opt,
    ParseException,
    Regex,
    StringEnd,
    Suppress,
    ZeroOrMore,
    lineno,
)

from .core_model import (
    DEFAULT_EPSILON,
    DurativeAction,
    GroundedTask,
    PlanStep,
    Proposition,
    TemporalPlan,
    TimedLiteral,
    format_time,
    to_time,
)
from .exceptions import (
    GroundingError,
    NestedModality,
    NoUpperBound,
    PDDLSyntaxError,
    UnknownModalOperator,
    UnsupportedFeature,
)
from .trajectory import CONJUNCTIVE, Modality, TrajectoryConstraint

logger = logging.getLogger(__name__)

SUPPORTED_REQUIREMENTS = frozenset(
    {
        ":strips",
        ":typing",
        ":durative-actions",
        ":timed-initial-literals",
        ":constraints",
        ":fluents",
        ":numeric-fluents",
    }
)

MODAL_NAMES = {
    "always": Modality.ALWAYS,
    "sometime": Modality.SOMETIME,
    "within": Modality.WITHIN,
    "at-most-once": Modality.AT_MOST_ONCE,
    "sometime-after": Modality.SOMETIME_AFTER,
    "sometime-before": Modality.SOMETIME_BEFORE,
    "always-within": Modality.ALWAYS_WITHIN,
    "hold-during": Modality.HOLD_DURING,
    "hold-after": Modality.HOLD_AFTER,
    "persistence": Modality.PERSISTENCE,
    "hold-within-from-end": Modality.WITHIN_FROM_END,
    "overlaps": Modality.OVERLAPS,
    "during": Modality.DURING,
}

_NUMBER = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)(/\d+)?$")


# ---------------------------------------------------------------------------
# s-expression reader
# ---------------------------------------------------------------------------


class SExpr(list):
    """A parenthesised list remembering the line it starts on"""

    line: int = 0


def _attach_line(source: str, loc: int, toks):
    node = SExpr(toks[0])
    node.line = lineno(loc, source)
    return [node]


def _build_reader():
    atom = Regex(r"[^()\s;]+")
    expr = Forward()
    group = Group(Suppress("(") + ZeroOrMore(atom | expr) + Suppress(")"))
    group.set_parse_action(_attach_line)
    expr <<= group
    expr.ignore(Regex(r";[^\n]*"))
    document = expr + StringEnd()
    document.ignore(Regex(r";[^\n]*"))
    return document


_READER = _build_reader()


def read_sexpr(text: str) -> SExpr:
    """Parse one top-level s-expression"""
    try:
        return _READER.parse_string(text, parse_all=True)[0]
    except ParseException as e:
        expected = str(e.msg).replace("Expected ", "", 1)
        raise PDDLSyntaxError(e.lineno, expected) from e


def _line(node) -> Optional[int]:
    return getattr(node, "line", None)


def _is_list(node) -> bool:
    return isinstance(node, list)


def _head(node) -> str:
    if _is_list(node) and node and not _is_list(node[0]):
        return node[0].lower()
    return ""


def _expect(condition: bool, node, expected: str):
    if not condition:
        raise PDDLSyntaxError(_line(node), expected)


def _number(token, node) -> Fraction:
    _expect(not _is_list(token) and bool(_NUMBER.match(str(token))), node, "a number")
    return to_time(token)


def _is_number(token) -> bool:
    return not _is_list(token) and bool(_NUMBER.match(str(token)))


# ---------------------------------------------------------------------------
# Lifted structures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Atom:
    """A lifted or ground atom; variables keep their ``?`` prefix"""

    predicate: str
    args: Tuple[str, ...] = ()

    def __str__(self) -> str:
        return f"({' '.join((self.predicate,) + self.args)})"

    @property
    def variables(self) -> Set[str]:
        return {a for a in self.args if a.startswith("?")}


@dataclass(frozen=True)
class FunctionTerm:
    name: str
    args: Tuple[str, ...] = ()

    def __str__(self) -> str:
        return f"({' '.join((self.name,) + self.args)})"


@dataclass(frozen=True)
class BinaryOp:
    op: str
    left: "DurationExpr"
    right: "DurationExpr"

    def __str__(self) -> str:
        return f"({self.op} {_expr_text(self.left)} {_expr_text(self.right)})"


DurationExpr = Union[Fraction, FunctionTerm, BinaryOp]


def _expr_text(expr: DurationExpr) -> str:
    return format_time(expr) if isinstance(expr, Fraction) else str(expr)


TypedList = Tuple[Tuple[str, str], ...]


@dataclass(frozen=True)
class ActionSchema:
    name: str
    parameters: TypedList
    duration: DurationExpr
    s_cond: Tuple[Atom, ...] = ()
    e_cond: Tuple[Atom, ...] = ()
    inv: Tuple[Atom, ...] = ()
    s_add: Tuple[Atom, ...] = ()
    s_del: Tuple[Atom, ...] = ()
    e_add: Tuple[Atom, ...] = ()
    e_del: Tuple[Atom, ...] = ()

    @property
    def atoms(self) -> Tuple[Atom, ...]:
        return self.s_cond + self.e_cond + self.inv + self.s_add + self.s_del + self.e_add + self.e_del

    @property
    def conditions(self) -> Tuple[Atom, ...]:
        return self.s_cond + self.inv + self.e_cond


@dataclass(frozen=True)
class ParsedDomain:
    name: str
    requirements: Tuple[str, ...] = ()
    types: TypedList = ()
    constants: TypedList = ()
    predicates: Tuple[Tuple[str, TypedList], ...] = ()
    functions: Tuple[Tuple[str, TypedList], ...] = ()
    actions: Tuple[ActionSchema, ...] = ()

    @property
    def predicate_arity(self) -> Dict[str, int]:
        return {name: len(params) for name, params in self.predicates}

    def action(self, name: str) -> ActionSchema:
        for schema in self.actions:
            if schema.name == name:
                return schema
        raise KeyError(name)


@dataclass(frozen=True)
class ParsedProblem:
    name: str
    domain_name: str
    objects: TypedList = ()
    init: Tuple[Atom, ...] = ()
    tils: Tuple[Tuple[Fraction, Atom, bool], ...] = ()
    fluents: Tuple[Tuple[FunctionTerm, Fraction], ...] = ()
    goals: Tuple[Atom, ...] = ()
    constraints: Tuple[TrajectoryConstraint, ...] = ()
    metric: Optional[str] = None


# ---------------------------------------------------------------------------
# Domain
# ---------------------------------------------------------------------------


def _typed_list(items: Sequence, node, variables: bool = False) -> TypedList:
    names: List[str] = []
    result: List[Tuple[str, str]] = []
    i = 0
    while i < len(items):
        tok = items[i]
        if _is_list(tok):
            raise UnsupportedFeature("either-types" if _head(tok) == "either" else "nested list in typed list", _line(tok))
        if tok == "-":
            _expect(i + 1 < len(items), node, "a type name after '-'")
            type_tok = items[i + 1]
            if _is_list(type_tok):
                raise UnsupportedFeature("either-types", _line(node))
            result.extend((n, type_tok.lower()) for n in names)
            names = []
            i += 2
            continue
        if variables:
            _expect(tok.startswith("?"), node, "a ?variable")
            names.append(tok.lower())
        else:
            names.append(tok)
        i += 1
    result.extend((n, "object") for n in names)
    return tuple(result)


def _atom(node, arity: Optional[Dict[str, int]], what: str = "atom") -> Atom:
    _expect(_is_list(node) and len(node) >= 1, node, what)
    for tok in node:
        if _is_list(tok):
            raise UnsupportedFeature(f"nested term in {what}", _line(node))
    pred = node[0].lower()
    if pred == "=":
        raise UnsupportedFeature("equality", _line(node))
    args = tuple(a.lower() if a.startswith("?") else a for a in node[1:])
    if arity is not None:
        _expect(pred in arity, node, f"a declared predicate (got '{pred}')")
        _expect(arity[pred] == len(args), node, f"{arity[pred]} arguments for '{pred}'")
    return Atom(pred, args)


def _duration(node) -> DurationExpr:
    if not _is_list(node):
        if _is_number(node):
            return to_time(node)
        raise UnsupportedFeature(f"duration term {node}")
    head = _head(node)
    if head in ("+", "-", "*", "/") and len(node) == 3:
        return BinaryOp(head, _duration(node[1]), _duration(node[2]))
    _expect(bool(head), node, "a function term")
    for tok in node[1:]:
        if _is_list(tok):
            raise UnsupportedFeature("nested function term", _line(node))
    return FunctionTerm(head, tuple(a.lower() if a.startswith("?") else a for a in node[1:]))


def _conjuncts(node) -> List:
    if not _is_list(node) or not node:
        return []
    if _head(node) == "and":
        out: List = []
        for child in node[1:]:
            out.extend(_conjuncts(child))
        return out
    return [node]


def _parse_durative_action(node, arity: Dict[str, int]) -> ActionSchema:
    _expect(len(node) >= 2 and not _is_list(node[1]), node, "an action name")
    name = node[1].lower()
    fields: Dict[str, object] = {}
    i = 2
    while i < len(node):
        key = node[i]
        _expect(not _is_list(key) and key.startswith(":"), node, "an action keyword")
        _expect(i + 1 < len(node), node, f"a value for {key}")
        fields[key.lower()] = node[i + 1]
        i += 2
    for key in fields:
        if key not in (":parameters", ":duration", ":condition", ":effect"):
            raise UnsupportedFeature(key, _line(node))

    params = _typed_list(fields.get(":parameters", SExpr()), node, variables=True)

    dur_node = fields.get(":duration")
    _expect(_is_list(dur_node), node, ":duration (= ?duration ...)")
    if _head(dur_node) != "=":
        raise UnsupportedFeature(f"duration constraint '{_head(dur_node) or dur_node}'", _line(dur_node))
    _expect(len(dur_node) == 3 and str(dur_node[1]).lower() == "?duration", dur_node, "(= ?duration <expr>)")
    duration = _duration(dur_node[2])

    parts: Dict[str, List[Atom]] = {k: [] for k in ("s_cond", "e_cond", "inv", "s_add", "s_del", "e_add", "e_del")}
    for cond in _conjuncts(fields.get(":condition", SExpr())):
        head = _head(cond)
        if head == "at" and len(cond) == 3 and str(cond[1]).lower() in ("start", "end"):
            slot = "s_cond" if cond[1].lower() == "start" else "e_cond"
        elif head == "over" and len(cond) == 3 and str(cond[1]).lower() == "all":
            slot = "inv"
        else:
            raise UnsupportedFeature(f"untimed or unsupported condition '{head}'", _line(cond))
        body = cond[2]
        if _head(body) == "not":
            raise UnsupportedFeature("negative condition", _line(cond))
        if _head(body) in ("or", "imply", "forall", "exists"):
            raise UnsupportedFeature(_head(body), _line(cond))
        parts[slot].append(_atom(body, arity, "condition atom"))

    for eff in _conjuncts(fields.get(":effect", SExpr())):
        head = _head(eff)
        if not (head == "at" and len(eff) == 3 and str(eff[1]).lower() in ("start", "end")):
            raise UnsupportedFeature(f"effect '{head}'", _line(eff))
        prefix = "s" if eff[1].lower() == "start" else "e"
        body = eff[2]
        bhead = _head(body)
        if bhead == "not":
            _expect(len(body) == 2, body, "(not <atom>)")
            parts[f"{prefix}_del"].append(_atom(body[1], arity, "effect atom"))
        elif bhead in ("increase", "decrease", "assign", "scale-up", "scale-down", "when", "forall"):
            raise UnsupportedFeature(bhead, _line(body))
        else:
            parts[f"{prefix}_add"].append(_atom(body, arity, "effect atom"))

    return ActionSchema(name, params, duration, **{k: tuple(v) for k, v in parts.items()})


def parse_domain(text: str) -> ParsedDomain:
    """
    Parse a domain file of durative actions.

    Raises:
        PDDLSyntaxError: malformed text or undeclared predicates
        UnsupportedFeature: constructs outside the supported subset
    """
    root = read_sexpr(text)
    _expect(_head(root) == "define", root, "(define ...)")
    _expect(len(root) >= 2 and _head(root[1]) == "domain" and len(root[1]) == 2, root, "(domain <name>)")
    name = root[1][1].lower()

    requirements: Tuple[str, ...] = ()
    types: TypedList = ()
    constants: TypedList = ()
    predicates: List[Tuple[str, TypedList]] = []
    functions: List[Tuple[str, TypedList]] = []
    action_nodes = []

    for section in root[2:]:
        key = _head(section)
        if key == ":requirements":
            requirements = tuple(r.lower() for r in section[1:])
            for req in requirements:
                if req not in SUPPORTED_REQUIREMENTS:
                    raise UnsupportedFeature(req, _line(section))
        elif key == ":types":
            types = _typed_list(section[1:], section)
        elif key == ":constants":
            constants = _typed_list(section[1:], section)
        elif key == ":predicates":
            for decl in section[1:]:
                _expect(_is_list(decl) and len(decl) >= 1, section, "a predicate declaration")
                predicates.append((decl[0].lower(), _typed_list(decl[1:], decl, variables=True)))
        elif key == ":functions":
            items = list(section[1:])
            j = 0
            while j < len(items):
                decl = items[j]
                if decl == "-":
                    j += 2  # return type; only numbers exist in this subset
                    continue
                _expect(_is_list(decl), section, "a function declaration")
                functions.append((decl[0].lower(), _typed_list(decl[1:], decl, variables=True)))
                j += 1
        elif key == ":durative-action":
            action_nodes.append(section)
        elif key in (":action", ":derived", ":process", ":event"):
            raise UnsupportedFeature(key, _line(section))
        else:
            raise UnsupportedFeature(key or str(section), _line(section))

    arity = {n: len(p) for n, p in predicates}
    actions = tuple(_parse_durative_action(node, arity) for node in action_nodes)
    domain = ParsedDomain(name, requirements, types, constants, tuple(predicates), tuple(functions), actions)
    logger.info(f"📖 Parsed domain '{name}' with {len(actions)} durative actions")
    return domain


# ---------------------------------------------------------------------------
# Problem and trajectory constraints
# ---------------------------------------------------------------------------


def _is_modal(node) -> bool:
    head = _head(node)
    if head in MODAL_NAMES:
        return True
    # "(at end X)" is modal; "(at T0 D0)" is an atom
    return head == "at" and len(node) == 3 and str(node[1]).lower() == "end" and _is_list(node[2])


def _canon(args: Iterable[str], names: Dict[str, str]) -> Tuple[str, ...]:
    return tuple(names.get(a.lower(), a) for a in args)


def _ground_atom(node, names: Dict[str, str], arity: Optional[Dict[str, int]]) -> Proposition:
    atom = _atom(node, arity)
    if atom.variables:
        raise PDDLSyntaxError(_line(node), "a ground atom")
    return Proposition(atom.predicate, _canon(atom.args, names))


def _goal_descriptor(node, op: str, names: Dict[str, str], arity) -> Tuple[Proposition, ...]:
    props: List[Proposition] = []
    for lit in _conjuncts(node):
        head = _head(lit)
        if _is_modal(lit):
            raise NestedModality(op, _line(lit))
        if head == "not":
            raise UnsupportedFeature("negative literal in constraint", _line(lit))
        if head in ("or", "imply", "forall", "exists", "preference"):
            raise UnsupportedFeature(head, _line(lit))
        props.append(_ground_atom(lit, names, arity))
    _expect(bool(props), node, f"a goal descriptor for {op}")
    return tuple(props)


def _modal(node, names: Dict[str, str], arity) -> TrajectoryConstraint:
    head = _head(node)
    if head == "at":
        op, args = Modality.AT_END, list(node[2:])
    else:
        op, args = MODAL_NAMES[head], list(node[1:])
    label = op.value

    def gd(x):
        return _goal_descriptor(x, label, names, arity)

    if op in (Modality.AT_END, Modality.ALWAYS, Modality.SOMETIME, Modality.AT_MOST_ONCE):
        _expect(len(args) == 1, node, f"one goal descriptor for {label}")
        c = TrajectoryConstraint(op, gd(args[0]))
    elif op in (Modality.WITHIN, Modality.HOLD_AFTER, Modality.PERSISTENCE):
        _expect(len(args) == 2, node, f"a time and a goal descriptor for {label}")
        c = TrajectoryConstraint(op, gd(args[1]), t=_number(args[0], node))
    elif op in (Modality.ALWAYS_WITHIN, Modality.WITHIN_FROM_END):
        _expect(len(args) == 3, node, f"a time and two goal descriptors for {label}")
        c = TrajectoryConstraint(op, gd(args[1]), gd(args[2]), t=_number(args[0], node))
    elif op is Modality.HOLD_DURING:
        _expect(len(args) == 3, node, "two times and a goal descriptor for hold-during")
        u1, u2 = _number(args[0], node), _number(args[1], node)
        _expect(u1 < u2, node, "u1 < u2 in hold-during")
        c = TrajectoryConstraint(op, gd(args[2]), u1=u1, u2=u2)
    else:
        _expect(len(args) == 2, node, f"two goal descriptors for {label}")
        c = TrajectoryConstraint(op, gd(args[0]), gd(args[1]))

    if (len(c.phi) > 1 or len(c.psi) > 1) and op not in CONJUNCTIVE:
        raise UnsupportedFeature(f"conjunction inside {label}", _line(node))
    return c


def _constraint_block(node, names, arity, allow_atoms: bool) -> Tuple[List[Proposition], List[TrajectoryConstraint]]:
    atoms: List[Proposition] = []
    constraints: List[TrajectoryConstraint] = []
    for item in _conjuncts(node):
        head = _head(item)
        if _is_modal(item):
            constraints.append(_modal(item, names, arity))
        elif head == "preference":
            raise UnsupportedFeature("preference", _line(item))
        elif head in ("not", "or", "imply", "forall", "exists"):
            raise UnsupportedFeature(head, _line(item))
        elif allow_atoms:
            atoms.append(_ground_atom(item, names, arity))
        else:
            raise UnknownModalOperator(head or str(item), _line(item))
    return atoms, constraints


def parse_problem(text: str, domain: Optional[ParsedDomain] = None) -> ParsedProblem:
    """
    Parse a problem with its ``:goal`` and ``:constraints`` blocks.

    Modal operators may appear in the goal as well. When ``domain`` is given,
    predicates are checked against its declarations.
    """
    root = read_sexpr(text)
    _expect(_head(root) == "define", root, "(define ...)")
    _expect(len(root) >= 2 and _head(root[1]) == "problem" and len(root[1]) == 2, root, "(problem <name>)")
    name = root[1][1]
    arity = domain.predicate_arity if domain is not None else None

    domain_name = ""
    objects: TypedList = ()
    names: Dict[str, str] = {}
    if domain is not None:
        names.update({c.lower(): c for c, _ in domain.constants})
    init: List[Atom] = []
    tils: List[Tuple[Fraction, Atom, bool]] = []
    fluents: List[Tuple[FunctionTerm, Fraction]] = []
    goals: List[Atom] = []
    constraints: List[TrajectoryConstraint] = []
    metric = None

    sections = list(root[2:])
    # objects first so later sections can resolve names case-insensitively
    for section in sections:
        if _head(section) == ":objects":
            objects = _typed_list(section[1:], section)
            names.update({o.lower(): o for o, _ in objects})

    def as_atom(p: Proposition) -> Atom:
        return Atom(p.predicate, p.args)

    for section in sections:
        key = _head(section)
        if key == ":domain":
            _expect(len(section) == 2, section, "(:domain <name>)")
            domain_name = section[1].lower()
        elif key == ":objects":
            continue
        elif key == ":init":
            for fact in section[1:]:
                head = _head(fact)
                if head == "at" and len(fact) == 3 and _is_number(fact[1]) and _is_list(fact[2]):
                    lit = fact[2]
                    positive = _head(lit) != "not"
                    if not positive:
                        _expect(len(lit) == 2, lit, "(not <atom>)")
                        lit = lit[1]
                    tils.append((to_time(fact[1]), as_atom(_ground_atom(lit, names, arity)), positive))
                elif head == "=":
                    _expect(len(fact) == 3 and _is_list(fact[1]), fact, "(= (<function> ...) <number>)")
                    term = FunctionTerm(fact[1][0].lower(), _canon(fact[1][1:], names))
                    fluents.append((term, _number(fact[2], fact)))
                else:
                    init.append(as_atom(_ground_atom(fact, names, arity)))
        elif key == ":goal":
            _expect(len(section) == 2, section, "(:goal <descriptor>)")
            atoms, cons = _constraint_block(section[1], names, arity, allow_atoms=True)
            goals.extend(as_atom(p) for p in atoms)
            constraints.extend(cons)
        elif key == ":constraints":
            _expect(len(section) == 2, section, "(:constraints <descriptor>)")
            _, cons = _constraint_block(section[1], names, arity, allow_atoms=False)
            constraints.extend(cons)
        elif key == ":metric":
            metric = " ".join(str(x) for x in section[1:])
        else:
            raise UnsupportedFeature(key or str(section), _line(section))

    problem = ParsedProblem(
        name=name,
        domain_name=domain_name,
        objects=objects,
        init=tuple(init),
        tils=tuple(tils),
        fluents=tuple(fluents),
        goals=tuple(goals),
        constraints=tuple(constraints),
        metric=metric,
    )
    logger.info(f"📖 Parsed problem '{name}': {len(goals)} goals, {len(constraints)} constraints")
    return problem


# ---------------------------------------------------------------------------
# Grounding
# ---------------------------------------------------------------------------


def _type_closure(domain: ParsedDomain) -> Dict[str, Set[str]]:
    """type -> the type and all its ancestors"""
    parent = {name: sup for name, sup in domain.types}
    closure: Dict[str, Set[str]] = {}
    for name in set(parent) | set(parent.values()) | {"object"}:
        seen = {name}
        cur = name
        while cur in parent and parent[cur] not in seen:
            cur = parent[cur]
            seen.add(cur)
        seen.add("object")
        closure[name] = seen
    return closure


def _eval_duration(expr: DurationExpr, binding: Dict[str, str], fluents: Dict[Tuple[str, Tuple[str, ...]], Fraction]) -> Optional[Fraction]:
    if isinstance(expr, Fraction):
        return expr
    if isinstance(expr, FunctionTerm):
        args = tuple(binding.get(a, a) for a in expr.args)
        return fluents.get((expr.name, args))
    left = _eval_duration(expr.left, binding, fluents)
    right = _eval_duration(expr.right, binding, fluents)
    if left is None or right is None:
        return None
    if expr.op == "+":
        return left + right
    if expr.op == "-":
        return left - right
    if expr.op == "*":
        return left * right
    if right == 0:
        raise GroundingError("division by zero in duration")
    return left / right


def _bind(atom: Atom, binding: Dict[str, str]) -> Proposition:
    return Proposition(atom.predicate, tuple(binding.get(a, a) for a in atom.args))


def _ground_schema(
    schema: ActionSchema,
    objects_by_type: Dict[str, List[str]],
    static_preds: Set[str],
    init: Set[Proposition],
    fluents: Dict[Tuple[str, Tuple[str, ...]], Fraction],
    names: Dict[str, str],
) -> List[DurativeAction]:
    variables = [v for v, _ in schema.parameters]
    declared = set(variables)
    for atom in schema.atoms:
        unbound = atom.variables - declared
        if unbound:
            raise GroundingError(f"action {schema.name}: unbound variable {sorted(unbound)[0]} in {atom}")
    # constants used in schemata resolve to their declared spelling
    schema_atoms = [Atom(a.predicate, tuple(x if x.startswith("?") else names.get(x.lower(), x) for x in a.args)) for a in schema.atoms]
    static_atoms = [a for a in schema_atoms if a.predicate in static_preds]

    grounded: List[DurativeAction] = []

    def extend(i: int, binding: Dict[str, str]):
        if i == len(variables):
            grounded.extend(_instantiate(schema, binding, fluents, names))
            return
        var, vtype = schema.parameters[i]
        for obj in objects_by_type.get(vtype, []):
            binding[var] = obj
            # static atoms are checked as soon as their last variable is bound
            if all(
                _bind(a, binding) in init
                for a in static_atoms
                if var in a.variables and a.variables <= binding.keys()
            ):
                extend(i + 1, binding)
            del binding[var]

    if all(_bind(a, {}) in init for a in static_atoms if not a.variables):
        extend(0, {})
    return grounded


def _instantiate(schema: ActionSchema, binding: Dict[str, str], fluents, names: Dict[str, str]) -> List[DurativeAction]:
    dur = _eval_duration(schema.duration, binding, fluents)
    if dur is None:
        return []  # duration function undefined for these arguments
    params = tuple(binding[v] for v, _ in schema.parameters)
    if dur <= 0:
        raise GroundingError(f"action ({schema.name} {' '.join(params)}) has non-positive duration {dur}")

    def props(atoms: Tuple[Atom, ...]) -> frozenset:
        return frozenset(
            Proposition(a.predicate, tuple(binding.get(x, names.get(x.lower(), x)) for x in a.args)) for a in atoms
        )

    s_add, e_add = props(schema.s_add), props(schema.e_add)
    return [
        DurativeAction(
            name=schema.name,
            params=params,
            dur=dur,
            s_cond=props(schema.s_cond),
            e_cond=props(schema.e_cond),
            inv=props(schema.inv),
            s_add=s_add,
            s_del=props(schema.s_del) - s_add,
            e_add=e_add,
            e_del=props(schema.e_del) - e_add,
        )
    ]


def ground(
    domain: ParsedDomain,
    problem: ParsedProblem,
    upper_bound: Optional[Fraction] = None,
    epsilon: Fraction = DEFAULT_EPSILON,
) -> GroundedTask:
    """
    Instantiate every action schema over the typed objects.

    Instances whose static conditions are false in the initial state, or
    whose duration function is undefined, are dropped. The planning horizon
    is ``upper_bound`` when given, otherwise the latest ``within`` deadline.

    Raises:
        GroundingError: unknown types/objects/predicates, unbound variables
            or non-positive durations
        NoUpperBound: no deadline and no ``upper_bound``
    """
    if problem.domain_name and problem.domain_name != domain.name:
        raise GroundingError(f"problem is for domain '{problem.domain_name}', not '{domain.name}'")

    closure = _type_closure(domain)
    typed = list(domain.constants) + list(problem.objects)
    names = {o.lower(): o for o, _ in typed}
    objects_by_type: Dict[str, List[str]] = {}
    for obj, otype in typed:
        if otype not in closure:
            raise GroundingError(f"object {obj} has undeclared type {otype}")
        for t in closure[otype]:
            objects_by_type.setdefault(t, []).append(obj)
    for v in objects_by_type.values():
        v.sort()

    arity = domain.predicate_arity

    def check(p: Proposition, where: str) -> Proposition:
        if p.predicate not in arity or arity[p.predicate] != len(p.args):
            raise GroundingError(f"undeclared predicate {p} in {where}")
        for a in p.args:
            if a.lower() not in names:
                raise GroundingError(f"unknown object {a} in {where}")
        return Proposition(p.predicate, _canon(p.args, names))

    init = {check(Proposition(a.predicate, a.args), "init") for a in problem.init}
    goals = {check(Proposition(a.predicate, a.args), "goal") for a in problem.goals}
    tils = tuple(
        TimedLiteral(t, check(Proposition(a.predicate, a.args), "timed literal"), positive)
        for t, a, positive in problem.tils
    )
    constraints = tuple(
        TrajectoryConstraint(
            c.op,
            tuple(check(p, str(c.op)) for p in c.phi),
            tuple(check(p, str(c.op)) for p in c.psi),
            c.t,
            c.u1,
            c.u2,
        )
        for c in problem.constraints
    )
    fluents = {(term.name, _canon(term.args, names)): value for term, value in problem.fluents}

    effect_preds = {a.predicate for s in domain.actions for a in s.s_add + s.s_del + s.e_add + s.e_del}
    static_preds = set(arity) - effect_preds - {til.prop.predicate for til in tils}

    actions: List[DurativeAction] = []
    for schema in domain.actions:
        actions.extend(_ground_schema(schema, objects_by_type, static_preds, init, fluents, names))
    actions.sort(key=lambda a: a.key)

    props = set(init) | goals | {til.prop for til in tils}
    for c in constraints:
        props |= set(c.phi) | set(c.psi)
    for a in actions:
        props |= a.conditions | a.adds | a.deletes

    deadlines = tuple(sorted((p, c.t) for c in constraints if c.op is Modality.WITHIN for p in c.phi))
    if upper_bound is not None:
        horizon = to_time(upper_bound)
    elif deadlines:
        horizon = max(t for _, t in deadlines)
    else:
        raise NoUpperBound()

    task = GroundedTask(
        props=frozenset(props),
        actions=tuple(actions),
        init=frozenset(init),
        goals=frozenset(goals),
        tils=tils,
        deadlines=deadlines,
        constraints=constraints,
        upper_bound=horizon,
        epsilon=to_time(epsilon),
        name=problem.name,
    )
    logger.info(f"⚙️ Grounded '{problem.name}': {len(actions)} actions, {len(props)} propositions, T={horizon}")
    return task


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------


def _typed_text(items: TypedList) -> str:
    return " ".join(f"{n} - {t}" for n, t in items)


def _timed_block(parts: List[Tuple[str, Tuple[Atom, ...]]], negate: Set[str] = frozenset()) -> str:
    lits = []
    for label, atoms in parts:
        for a in atoms:
            body = f"(not {a})" if label in negate else str(a)
            lits.append(f"({label.split(':')[0]} {body})")
    if not lits:
        return "()"
    return "(and " + " ".join(lits) + ")"


def print_domain(domain: ParsedDomain) -> str:
    """Render a domain as PDDL text that parses back to an equal value"""
    out = [f"(define (domain {domain.name})"]
    if domain.requirements:
        out.append(f"  (:requirements {' '.join(domain.requirements)})")
    if domain.types:
        out.append(f"  (:types {_typed_text(domain.types)})")
    if domain.constants:
        out.append(f"  (:constants {_typed_text(domain.constants)})")
    if domain.predicates:
        preds = " ".join(f"({' '.join([n] + ([_typed_text(p)] if p else []))})" for n, p in domain.predicates)
        out.append(f"  (:predicates {preds})")
    if domain.functions:
        funcs = " ".join(f"({' '.join([n] + ([_typed_text(p)] if p else []))})" for n, p in domain.functions)
        out.append(f"  (:functions {funcs})")
    for a in domain.actions:
        cond = _timed_block([("at start", a.s_cond), ("over all", a.inv), ("at end", a.e_cond)])
        eff = _timed_block(
            [("at start", a.s_add), ("at start:del", a.s_del), ("at end", a.e_add), ("at end:del", a.e_del)],
            negate={"at start:del", "at end:del"},
        )
        out.append(f"  (:durative-action {a.name}")
        out.append(f"    :parameters ({_typed_text(a.parameters)})")
        out.append(f"    :duration (= ?duration {_expr_text(a.duration)})")
        out.append(f"    :condition {cond}")
        out.append(f"    :effect {eff})")
    out.append(")")
    return "\n".join(out) + "\n"


def _gd_text(props: Tuple[Proposition, ...]) -> str:
    return str(props[0]) if len(props) == 1 else "(and " + " ".join(map(str, props)) + ")"


def print_problem(problem: ParsedProblem) -> str:
    """Render a problem as PDDL text that parses back to an equal value"""
    out = [f"(define (problem {problem.name})"]
    if problem.domain_name:
        out.append(f"  (:domain {problem.domain_name})")
    if problem.objects:
        out.append(f"  (:objects {_typed_text(problem.objects)})")
    init = [str(a) for a in problem.init]
    init += [f"(at {format_time(t)} {a if pos else f'(not {a})'})" for t, a, pos in problem.tils]
    init += [f"(= {term} {format_time(v)})" for term, v in problem.fluents]
    out.append(f"  (:init {' '.join(init)})")
    out.append(f"  (:goal (and {' '.join(str(a) for a in problem.goals)}))")
    if problem.constraints:
        out.append(f"  (:constraints (and {' '.join(str(c) for c in problem.constraints)}))")
    if problem.metric:
        out.append(f"  (:metric {problem.metric})")
    out.append(")")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Plans and files
# ---------------------------------------------------------------------------


def _plan_grammar():
    number = Regex(r"\d+(\.\d*)?(/\d+)?")
    name = Regex(r"[^()\[\]\s;:]+")
    step = (
        number("start")
        + Suppress(":")
        + Suppress("(")
        + Group(OneOrMore(name))("action")
        + Suppress(")")
        + Opt(Suppress("[") + number("dur") + Suppress("]"))
    )
    return step


_PLAN_STEP = _plan_grammar()


def parse_plan(text: str, task: GroundedTask) -> TemporalPlan:
    """
    Read an IPC-style plan (``t: (action args) [dur]`` per line).

    Raises:
        PDDLSyntaxError: a malformed line
        GroundingError: an unknown action or a duration that disagrees with
            the ground action
    """
    steps: List[PlanStep] = []
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        try:
            parsed = _PLAN_STEP.parse_string(line, parse_all=True)
        except ParseException as e:
            raise PDDLSyntaxError(no, str(e.msg).replace("Expected ", "", 1)) from e
        label = " ".join(parsed["action"])
        action = task.find_action(label)
        if action is None:
            raise GroundingError(f"line {no}: unknown action ({label})")
        if "dur" in parsed and to_time(parsed["dur"]) != action.dur:
            raise GroundingError(f"line {no}: duration {parsed['dur']} differs from {format_time(action.dur)}")
        steps.append(PlanStep(to_time(parsed["start"]), action))
    return TemporalPlan(tuple(steps))


def parse_domain_file(path: Union[str, Path]) -> ParsedDomain:
    return parse_domain(Path(path).read_text(encoding="utf-8"))


def parse_problem_file(path: Union[str, Path], domain: Optional[ParsedDomain] = None) -> ParsedProblem:
    return parse_problem(Path(path).read_text(encoding="utf-8"), domain)


def load_task(
    domain_path: Union[str, Path],
    problem_path: Union[str, Path],
    upper_bound: Optional[Fraction] = None,
    epsilon: Fraction = DEFAULT_EPSILON,
) -> GroundedTask:
    """Parse and ground a domain/problem pair from disk"""
    domain = parse_domain_file(domain_path)
    problem = parse_problem_file(problem_path, domain)
    return ground(domain, problem, upper_bound=upper_bound, epsilon=epsilon)
