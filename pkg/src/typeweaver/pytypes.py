"""Python type annotations as trees: parsing, canonical rendering, normalization,
name adjustment for cross-tool comparison, and size/frequency categories."""

from __future__ import annotations

import ast
from dataclasses import dataclass, field

# Head used for a bracketed argument group, e.g. the `[int, str]` inside
# Callable[[int, str], bool]. It is not a type constructor: it contributes
# nothing to size() and never counts toward rarity.
LIST_GROUP = "<list>"
TUPLE_GROUP = "<tuple>"

_GROUP_HEADS = frozenset({LIST_GROUP, TUPLE_GROUP})

# Basic constructors rewritten to their capitalized typing aliases. Scalar
# builtins (int, str, bool, float, bytes, None) have no typing alias and are
# kept lowercase.
CAPITALIZED_BUILTINS = {
    "list": "List",
    "dict": "Dict",
    "set": "Set",
    "tuple": "Tuple",
    "frozenset": "FrozenSet",
    "type": "Type",
}


class TypeParseError(ValueError):
    """Raised when an annotation expression cannot be parsed into a PyType."""

    def __init__(self, message: str, text: str, offset: int | None = None):
        super().__init__(message)
        self.text = text
        self.offset = offset


@dataclass(frozen=True)
class PyType:
    """A type annotation tree: a constructor head plus ordered arguments."""

    head: str
    args: tuple["PyType", ...] = ()

    def __post_init__(self):
        if not self.head:
            raise ValueError("PyType head must be nonempty")

    def render(self) -> str:
        inner = ",".join(a.render() for a in self.args)
        if self.head == LIST_GROUP:
            return f"[{inner}]"
        if self.head == TUPLE_GROUP:
            return f"({inner})"
        if not self.args:
            return self.head
        return f"{self.head}[{inner}]"

    def __str__(self) -> str:
        return self.render()

    def size(self) -> int:
        # Optional[...] abbreviates Union[..., None] and counts like it, so
        # size is stable under normalization; bracket groups count nothing.
        if self.head in _GROUP_HEADS:
            own = 0
        elif self.args and _strip_typing_prefix(self.head) == "Optional":
            own = 2
        else:
            own = 1
        return own + sum(a.size() for a in self.args)

    def constructors(self):
        """Yield every constructor head in the tree (group nodes excluded)."""
        if self.head not in _GROUP_HEADS:
            yield self.head
        for a in self.args:
            yield from a.constructors()


ANY = PyType("Any")
NONE = PyType("None")

_LOWERCASE_BUILTINS = {v: k for k, v in CAPITALIZED_BUILTINS.items()}


def render_source(t: PyType) -> str:
    """Render a type for insertion into source files: capitalized builtin
    containers become their lowercase forms (valid without typing imports on
    Python 3.9+); everything else renders canonically."""
    head = _LOWERCASE_BUILTINS.get(t.head, t.head)
    inner = ",".join(render_source(a) for a in t.args)
    if head == LIST_GROUP:
        return f"[{inner}]"
    if head == TUPLE_GROUP:
        return f"({inner})"
    if not t.args:
        return head
    return f"{head}[{inner}]"


def _dotted_name(node: ast.expr) -> str:
    parts: list[str] = []
    while isinstance(node, ast.Attribute):
        parts.append(node.attr)
        node = node.value
    if not isinstance(node, ast.Name):
        raise TypeParseError("unsupported annotation base", "", None)
    parts.append(node.id)
    return ".".join(reversed(parts))


def _from_ast(node: ast.expr, text: str) -> PyType:
    if isinstance(node, ast.Name):
        return PyType(node.id)
    if isinstance(node, ast.Attribute):
        return PyType(_dotted_name(node))
    if isinstance(node, ast.Constant):
        value = node.value
        if value is None:
            return NONE
        if value is Ellipsis:
            return PyType("...")
        if isinstance(value, str):
            # Forward reference: unwrap the quoted annotation.
            return parse_type(value)
        if isinstance(value, (bool, int, float, bytes)):
            return PyType(repr(value))
        raise TypeParseError(f"unsupported constant {value!r}", text, node.col_offset)
    if isinstance(node, ast.Subscript):
        head = _from_ast(node.value, text)
        if head.args:
            raise TypeParseError("nested subscript head", text, node.col_offset)
        sl = node.slice
        if isinstance(sl, ast.Tuple):
            args = tuple(_from_ast(e, text) for e in sl.elts)
            if not sl.elts:
                args = (PyType(TUPLE_GROUP),)
            return PyType(head.head, args)
        return PyType(head.head, (_from_ast(sl, text),))
    if isinstance(node, ast.List):
        return PyType(LIST_GROUP, tuple(_from_ast(e, text) for e in node.elts))
    if isinstance(node, ast.Tuple):
        if not node.elts:
            return PyType(TUPLE_GROUP)
        return PyType(TUPLE_GROUP, tuple(_from_ast(e, text) for e in node.elts))
    if isinstance(node, ast.BinOp) and isinstance(node.op, ast.BitOr):
        # PEP 604 unions are accepted on parse; normalization flattens them.
        return PyType("Union", (_from_ast(node.left, text), _from_ast(node.right, text)))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
        inner = _from_ast(node.operand, text)
        return PyType(f"-{inner.head}")
    raise TypeParseError(
        f"unsupported annotation syntax: {type(node).__name__}", text, node.col_offset
    )


def parse_type(text: str) -> PyType:
    """Parse an annotation expression into a PyType tree.

    String-literal forward references unwrap to their content. Whitespace is
    accepted anywhere; rendering is canonical (no internal spaces).
    """
    stripped = text.strip()
    if not stripped:
        raise TypeParseError("empty annotation", text, 0)
    try:
        expr = ast.parse(stripped, mode="eval")
    except SyntaxError as e:
        raise TypeParseError(f"invalid annotation: {e.msg}", text, e.offset) from e
    return _from_ast(expr.body, stripped)


def _strip_typing_prefix(head: str) -> str:
    # `typing.X` and `X` denote the same symbol; normalization equates them.
    if head.startswith("typing."):
        return head[len("typing.") :]
    return head


def union_sort_key(t: PyType) -> tuple:
    """Total order on Union arguments: None sorts last, the rest
    alphabetically by rendering (case-insensitive, exact text as tiebreak).
    Chosen so Optional[T] normalizes to Union[T,None] while Union[B,C,A]
    normalizes to Union[A,B,C]."""
    text = t.render()
    return (t == NONE, text.lower(), text)


def normalize(t: PyType) -> PyType:
    """Rewrite a type to canonical form, recursively and to fixpoint:
    Optional[T] becomes Union[T,None]; Union arguments are flattened and
    sorted; all-Any argument lists are dropped; basic constructors are
    capitalized. Idempotent.
    """
    head = _strip_typing_prefix(t.head)
    args = tuple(normalize(a) for a in t.args)
    if head == "Optional" and args:
        return normalize(PyType("Union", args + (NONE,)))
    if head == "Union" and args:
        flat: list[PyType] = []
        for a in args:
            if a.head == "Union" and a.args:
                flat.extend(a.args)
            else:
                flat.append(a)
        args = tuple(sorted(flat, key=union_sort_key))
    if args and all(a == ANY for a in args):
        args = ()
    head = CAPITALIZED_BUILTINS.get(head, head)
    return PyType(head, args)


def _simplify_names(t: PyType) -> PyType:
    head = t.head
    if "." in head and head not in _GROUP_HEADS:
        head = head.rsplit(".", 1)[-1]
    return PyType(head, tuple(_simplify_names(a) for a in t.args))


def _unwrap_outermost(t: PyType) -> PyType:
    if t.head in ("Optional", "Final") and len(t.args) == 1:
        return t.args[0]
    if t.head == "Union" and t.args:
        non_none = [a for a in t.args if a != NONE]
        if len(non_none) == 1:
            return non_none[0]
    return t


def adjust_for_comparison(t: PyType) -> PyType:
    """Reduce a normalized type to the form used by the adjusted metric:
    qualified names become simple names (recursively) and any outermost
    Optional/Final wrapper is removed. Idempotent."""
    cur = normalize(t)
    while True:
        nxt = normalize(_unwrap_outermost(_simplify_names(cur)))
        if nxt == cur:
            return cur
        cur = nxt


def base_head(t: PyType) -> str:
    """The outermost constructor, used by the base metric."""
    return t.head


@dataclass
class ConstructorFrequencyTable:
    """Occurrence counts of type constructors; the top_k most frequent ones
    form the 'common' set used for rare/common categorization."""

    counts: dict[str, int] = field(default_factory=dict)
    top_k: int = 100

    @classmethod
    def from_types(cls, types, top_k: int = 100) -> "ConstructorFrequencyTable":
        counts: dict[str, int] = {}
        for t in types:
            for c in normalize(t).constructors():
                counts[c] = counts.get(c, 0) + 1
        return cls(counts=counts, top_k=top_k)

    def top_set(self) -> frozenset[str]:
        ranked = sorted(self.counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return frozenset(name for name, _ in ranked[: self.top_k])

    def is_rare(self, t: PyType) -> bool:
        top = self.top_set()
        return any(c not in top for c in t.constructors())

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "top_k": self.top_k,
            "counts": {k: self.counts[k] for k in sorted(self.counts)},
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "ConstructorFrequencyTable":
        return cls(counts=dict(data["counts"]), top_k=int(data.get("top_k", 100)))


def categorize(t: PyType, freq: ConstructorFrequencyTable) -> tuple[str, str]:
    """Classify a normalized type as (simple|complex, common|rare)."""
    shape = "simple" if t.size() == 1 else "complex"
    rarity = "rare" if freq.is_rare(t) else "common"
    return shape, rarity
