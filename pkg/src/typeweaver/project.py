"""Loading Python projects into modules, classes, and code elements, with
comment/docstring stripping, annotation-slot discovery, and source rewriting."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import parso
from parso.python import tree as pt

from .pytypes import PyType, TypeParseError, normalize, parse_type, render_source

IGNORED_DIRS = {
    ".git",
    ".hg",
    ".mypy_cache",
    ".pytest_cache",
    ".tox",
    ".venv",
    "__pycache__",
    "build",
    "dist",
    "node_modules",
    "venv",
}

_TYPEVAR_CALLS = {"TypeVar", "ParamSpec", "TypeVarTuple"}

_COMPOUND_TYPES = {"if_stmt", "while_stmt", "for_stmt", "try_stmt", "with_stmt"}

_STMT_TYPES = {
    "simple_stmt",
    "funcdef",
    "classdef",
    "decorated",
    "async_funcdef",
    "async_stmt",
} | _COMPOUND_TYPES


class ProjectError(Exception):
    """Fatal problem while loading a project."""


class UnknownElementError(KeyError):
    """Lookup of an element id that does not exist in the project."""


class ElementKind(str, Enum):
    FUNCTION = "function"
    METHOD = "method"
    GLOBAL_VAR = "global_var"
    CLASS_ATTR = "class_attr"


@dataclass(frozen=True, order=True)
class ElementId:
    module: str
    path: str

    def __str__(self) -> str:
        return f"{self.module}.{self.path}"


def sort_key(eid: ElementId) -> tuple:
    """Canonical total order on element ids (lexicographic on the dotted form)."""
    return (str(eid), eid.module)


@dataclass
class AnnotationSlot:
    """One position where a type annotation may be written."""

    index: int
    role: str  # "parameter" | "return" | "variable"
    name: str | None
    existing_annotation: PyType | None
    # Region of `element.source` replaced when rendering this slot's
    # annotation (covers an existing annotation, empty when there is none),
    # plus the text that introduces the annotation at this position.
    span: tuple[int, int] = (0, 0)
    prefix: str = ": "
    # Same region in the coordinate system of the module text (absolute
    # character offsets), used when rewriting files.
    abs_span: tuple[int, int] | None = None


@dataclass
class ParamInfo:
    name: str
    display: str  # includes * / ** markers
    slot_index: int | None  # None for self/cls
    default: str | None


@dataclass
class CodeElement:
    """A top-level function, method, global variable, or class attribute."""

    id: ElementId
    kind: ElementKind
    source: str
    owner_class: str | None
    slots: list[AnnotationSlot]
    start_line: int
    params: list[ParamInfo] = field(default_factory=list)
    is_async: bool = False
    nodes: list = field(default_factory=list, repr=False)  # parso statement nodes

    @property
    def module(self) -> str:
        return self.id.module

    @property
    def name(self) -> str:
        return self.id.path.rsplit(".", 1)[-1]

    def order_key(self) -> tuple:
        return (self.id.module, self.start_line, self.id.path)


@dataclass(frozen=True)
class ImportItem:
    """One name binding introduced by an import statement."""

    local_name: str | None  # None for star imports
    module: str  # absolute dotted path (relative levels resolved)
    symbol: str | None  # None when the module itself is bound
    is_star: bool = False


@dataclass
class ClassDecl:
    name: str
    path: str  # qualified within the module, e.g. "Outer.Inner"
    module: str
    header: str  # decorators + "class Name(Bases):" text
    bases: list[str]
    members: dict[str, ElementId]  # direct methods and attributes
    nested: dict[str, str]  # nested class name -> qualified path
    start_line: int


@dataclass
class ModuleSource:
    name: str
    rel_path: Path | None
    original_text: str
    text: str  # comments and docstrings removed
    tree: object  # parso module parsed from `text`
    is_package: bool
    imports: list[ImportItem]
    import_stmts: list[tuple[int, str]]  # (line, statement text)
    classes: list[ClassDecl]
    elements: list[CodeElement]
    type_var_decls: list[tuple[int, str]]  # (line, statement text)
    class_headers: list[tuple[int, str]]  # (line, header text)


@dataclass
class SkippedFile:
    path: str
    reason: str


@dataclass
class ProjectSource:
    root_path: Path | None
    modules: dict[str, ModuleSource]
    skipped: list[SkippedFile] = field(default_factory=list)
    _index: dict[ElementId, CodeElement] = field(default_factory=dict, repr=False)
    _classes: dict[tuple[str, str], ClassDecl] = field(default_factory=dict, repr=False)
    _members: dict[str, list[ElementId]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.reindex()

    def reindex(self) -> None:
        self._index = {}
        self._classes = {}
        self._members = {}
        for mod in self.modules.values():
            for e in mod.elements:
                if e.id in self._index:
                    raise ProjectError(f"duplicate element id: {e.id}")
                self._index[e.id] = e
            for c in mod.classes:
                self._classes[(mod.name, c.path)] = c
                for member_name, eid in c.members.items():
                    self._members.setdefault(member_name, []).append(eid)
        for eids in self._members.values():
            eids.sort(key=sort_key)

    def elements(self) -> list[CodeElement]:
        out = []
        for mod in self.modules.values():
            out.extend(mod.elements)
        return out

    def element(self, eid: ElementId) -> CodeElement:
        try:
            return self._index[eid]
        except KeyError:
            raise UnknownElementError(str(eid)) from None

    def has_element(self, eid: ElementId) -> bool:
        return eid in self._index

    def class_decl(self, module: str, path: str) -> ClassDecl | None:
        return self._classes.get((module, path))

    def members_named(self, name: str) -> list[ElementId]:
        return self._members.get(name, [])


# ---------------------------------------------------------------------------
# comment / docstring stripping


def _strip_prefix_comments(prefix: str, at_line_start: bool) -> str:
    if "#" not in prefix:
        return prefix
    pieces = re.findall(r"[^\n]*\n|[^\n]+", prefix)
    out = []
    for i, piece in enumerate(pieces):
        if "#" not in piece:
            out.append(piece)
            continue
        before = piece[: piece.index("#")]
        full_line = at_line_start or i > 0
        if full_line and not before.strip():
            # Whole-line comment: drop the line entirely.
            continue
        # Trailing comment: drop it and the padding before it, keep the newline.
        out.append(before.rstrip(" \t") + ("\n" if piece.endswith("\n") else ""))
    return "".join(out)


def _iter_leaves(node):
    try:
        children = node.children
    except AttributeError:
        yield node
        return
    for child in children:
        yield from _iter_leaves(child)


def _suite_statements(suite) -> list:
    return [c for c in suite.children if c.type in _STMT_TYPES]


def _is_docstring_stmt(stmt) -> bool:
    if stmt is None or stmt.type != "simple_stmt":
        return False
    ch = stmt.children
    if not ch:
        return False
    first = ch[0]
    if first.type not in ("string", "strings"):
        return False
    # Only the plain `"..."` statement form counts; `"...";x=1` does not.
    return len(ch) == 1 or (len(ch) == 2 and ch[1].type == "newline")


def _replace_with_pass(stmt) -> None:
    first = stmt.children[0]
    leaf = first
    while hasattr(leaf, "children"):
        leaf = leaf.children[0]
    pass_leaf = pt.Keyword("pass", first.start_pos, leaf.prefix)
    pass_leaf.parent = stmt
    stmt.children[0] = pass_leaf


def _strip_docstrings(tree) -> None:
    scopes = [tree]
    stack = list(getattr(tree, "children", []))
    while stack:
        node = stack.pop()
        if node.type in ("funcdef", "classdef"):
            scopes.append(node)
        stack.extend(getattr(node, "children", []))
    for scope in scopes:
        if scope.type == "file_input":
            body = scope
        else:
            suite = scope.children[-1]
            if suite.type != "suite":
                # One-line body: `def f(): "doc"`
                if _is_docstring_stmt(suite):
                    _replace_with_pass(suite)
                continue
            body = suite
        stmts = _suite_statements(body)
        if not stmts or not _is_docstring_stmt(stmts[0]):
            continue
        doc = stmts[0]
        if len(stmts) > 1 or scope.type == "file_input":
            body.children.remove(doc)
        else:
            _replace_with_pass(doc)


def strip_source_text(text: str) -> str:
    """Remove comments and docstrings from source text, preserving all other
    bytes. Idempotent; a text without comments or docstrings round-trips
    byte-identically."""
    tree = parso.parse(text)
    for leaf in _iter_leaves(tree):
        if "#" in leaf.prefix:
            line, col = leaf.get_start_pos_of_prefix()
            leaf.prefix = _strip_prefix_comments(leaf.prefix, at_line_start=(col == 0))
    _strip_docstrings(tree)
    return tree.get_code()


# ---------------------------------------------------------------------------
# offset bookkeeping


class _Offsets:
    """Maps parso (line, col) positions to character offsets (lines split on
    '\\n' only, matching parso's line accounting)."""

    def __init__(self, text: str):
        self.text = text
        starts = [0]
        for i, ch in enumerate(text):
            if ch == "\n":
                starts.append(i + 1)
        self.starts = starts

    def offset(self, pos: tuple[int, int]) -> int:
        line, col = pos
        return self.starts[line - 1] + col

    def line_start(self, line: int) -> int:
        return self.starts[line - 1]


def _slice_start(offsets: _Offsets, node) -> int:
    """Start of a statement slice: from the start of its first line when only
    whitespace precedes it there (keeps natural indentation), otherwise from
    the first token."""
    first = node
    while hasattr(first, "children"):
        first = first.children[0]
    tok_off = offsets.offset(first.start_pos)
    line_off = offsets.line_start(first.start_pos[0])
    if offsets.text[line_off:tok_off].strip() == "":
        return line_off
    return tok_off


# ---------------------------------------------------------------------------
# module scanning


def _parse_annotation(node) -> PyType | None:
    if node is None:
        return None
    try:
        return normalize(parse_type(node.get_code(include_prefix=False)))
    except TypeParseError:
        return None


def _first_leaf(node):
    while hasattr(node, "children"):
        node = node.children[0]
    return node


def _funcdef_of(node):
    """Unwrap decorated/async wrappers down to the funcdef, or None."""
    if node.type == "decorated":
        node = node.children[-1]
    if node.type in ("async_funcdef", "async_stmt"):
        inner = node.children[-1]
        if inner.type == "funcdef":
            return inner
        return None
    if node.type == "funcdef":
        return node
    return None


def _classdef_of(node):
    if node.type == "decorated" and node.children[-1].type == "classdef":
        return node.children[-1]
    if node.type == "classdef":
        return node
    return None


def _return_anchor(funcdef) -> tuple[tuple[int, int], object | None]:
    params = next(c for c in funcdef.children if c.type == "parameters")
    idx = funcdef.children.index(params)
    rest = funcdef.children[idx + 1 :]
    if rest and rest[0].type == "operator" and rest[0].value == "->":
        ann = rest[1]
        return params.end_pos, ann
    return params.end_pos, None


def _build_function_element(
    outer_node, module_name: str, offsets: _Offsets, class_path: str | None, owner: ClassDecl | None
) -> CodeElement:
    funcdef = _funcdef_of(outer_node)
    name = funcdef.name.value
    path = f"{class_path}.{name}" if class_path else name
    eid = ElementId(module_name, path)
    kind = ElementKind.METHOD if class_path else ElementKind.FUNCTION

    start = _slice_start(offsets, outer_node)
    end = offsets.offset(outer_node.end_pos)
    source = offsets.text[start:end].rstrip("\n")

    slots: list[AnnotationSlot] = []
    params: list[ParamInfo] = []
    for p in funcdef.get_params():
        if p.name is None:
            # Bare * or / separators.
            star = "*" * getattr(p, "star_count", 0)
            display = star or "/"
            params.append(ParamInfo(name="", display=display, slot_index=None, default=None))
            continue
        pname = p.name.value
        display = "*" * p.star_count + pname
        default = None
        if p.default is not None:
            default = re.sub(r"\s+", " ", p.default.get_code(include_prefix=False).strip())
        if pname in ("self", "cls"):
            params.append(ParamInfo(pname, display, None, default))
            continue
        if p.annotation is not None:
            tfpdef = p.children[0] if p.children[0].type == "tfpdef" else None
            ann_end = (tfpdef or p.annotation).end_pos
            span_abs = (offsets.offset(p.name.end_pos), offsets.offset(ann_end))
        else:
            o = offsets.offset(p.name.end_pos)
            span_abs = (o, o)
        slot = AnnotationSlot(
            index=len(slots),
            role="parameter",
            name=pname,
            existing_annotation=_parse_annotation(p.annotation),
            span=(span_abs[0] - start, span_abs[1] - start),
            prefix=": ",
            abs_span=span_abs,
        )
        params.append(ParamInfo(pname, display, slot.index, default))
        slots.append(slot)

    params_end, ret_ann = _return_anchor(funcdef)
    if ret_ann is not None:
        span_abs = (offsets.offset(params_end), offsets.offset(ret_ann.end_pos))
    else:
        o = offsets.offset(params_end)
        span_abs = (o, o)
    slots.append(
        AnnotationSlot(
            index=len(slots),
            role="return",
            name=None,
            existing_annotation=_parse_annotation(ret_ann),
            span=(span_abs[0] - start, span_abs[1] - start),
            prefix=" -> ",
            abs_span=span_abs,
        )
    )

    return CodeElement(
        id=eid,
        kind=kind,
        source=source,
        owner_class=owner.header if owner else None,
        slots=slots,
        start_line=_first_leaf(outer_node).start_pos[0],
        params=params,
        is_async=outer_node.type in ("async_funcdef", "async_stmt")
        or (outer_node.type == "decorated" and outer_node.children[-1].type in ("async_funcdef", "async_stmt")),
        nodes=[outer_node],
    )


def _assignment_shape(expr_stmt):
    """Classify an expr_stmt: returns (targets, ann_node, kind) where kind is
    'ann' | 'eq' | 'aug' | None and targets are simple Name leaves."""
    ch = expr_stmt.children
    if len(ch) >= 2 and ch[1].type == "annassign":
        if ch[0].type == "name":
            return [ch[0]], ch[1], "ann"
        return [], None, None
    eq_positions = [
        i for i, c in enumerate(ch) if c.type == "operator" and c.value == "="
    ]
    if eq_positions:
        names = []
        for i in eq_positions:
            target = ch[i - 1]
            if target.type == "name" and (i - 2 < 0 or ch[i - 2].type == "operator"):
                names.append(target)
        return names, None, "eq"
    if len(ch) >= 2 and ch[1].type == "operator" and ch[1].value.endswith("="):
        if ch[0].type == "name":
            return [ch[0]], None, "aug"
    return [], None, None


class _VariableBuilder:
    """Accumulates the assignment statements that define one variable."""

    def __init__(self, name_leaf, expr_stmt, ann, kind):
        self.name = name_leaf.value
        self.stmts = [(name_leaf, expr_stmt, ann, kind)]

    def add(self, name_leaf, expr_stmt, ann, kind):
        self.stmts.append((name_leaf, expr_stmt, ann, kind))


def _build_variable_element(
    builder: _VariableBuilder,
    module_name: str,
    offsets: _Offsets,
    class_path: str | None,
    owner: ClassDecl | None,
) -> CodeElement:
    path = f"{class_path}.{builder.name}" if class_path else builder.name
    eid = ElementId(module_name, path)
    kind = ElementKind.CLASS_ATTR if class_path else ElementKind.GLOBAL_VAR

    chunks: list[str] = []
    chunk_starts: list[int] = []
    nodes = []
    for _, stmt, _, _ in builder.stmts:
        start = _slice_start(offsets, stmt)
        end = offsets.offset(stmt.end_pos)
        chunk_starts.append(start)
        chunks.append(offsets.text[start:end].rstrip("\n"))
        nodes.append(stmt)
    source = "\n".join(chunks)

    # Anchor the slot on the first annotated statement if any, else the first
    # plain single-target assignment; chained/augmented forms cannot carry an
    # annotation.
    anchor = None
    for i, (name_leaf, stmt, ann, akind) in enumerate(builder.stmts):
        if akind == "ann":
            anchor = (i, name_leaf, ann)
            break
    if anchor is None:
        for i, (name_leaf, stmt, ann, akind) in enumerate(builder.stmts):
            if akind == "eq" and len(stmt.children) >= 3 and stmt.children[1].value == "=":
                if stmt.children[0] is name_leaf:
                    anchor = (i, name_leaf, None)
                    break

    existing = None
    span_abs = None
    rel_span = (0, 0)
    if anchor is not None:
        i, name_leaf, ann = anchor
        if ann is not None:
            type_node = ann.children[1]
            existing = _parse_annotation(type_node)
            span_abs = (offsets.offset(name_leaf.end_pos), offsets.offset(type_node.end_pos))
        else:
            o = offsets.offset(name_leaf.end_pos)
            span_abs = (o, o)
        base = sum(len(c) + 1 for c in chunks[:i])
        rel_span = (
            base + span_abs[0] - chunk_starts[i],
            base + span_abs[1] - chunk_starts[i],
        )

    slot = AnnotationSlot(
        index=0,
        role="variable",
        name=builder.name,
        existing_annotation=existing,
        span=rel_span,
        prefix=": ",
        abs_span=span_abs,
    )
    first_leaf = _first_leaf(builder.stmts[0][1])
    return CodeElement(
        id=eid,
        kind=kind,
        source=source,
        owner_class=owner.header if owner else None,
        slots=[slot],
        start_line=first_leaf.start_pos[0],
        nodes=nodes,
    )


def _is_typevar_decl(expr_stmt) -> bool:
    ch = expr_stmt.children
    if len(ch) < 3 or ch[0].type != "name":
        return False
    rhs = ch[-1]
    text = rhs.get_code(include_prefix=False)
    m = re.match(r"\s*([\w.]+)\s*\(", text)
    return bool(m) and m.group(1).split(".")[-1] in _TYPEVAR_CALLS


def _is_main_guard(if_stmt) -> bool:
    cond = if_stmt.children[1].get_code(include_prefix=False)
    return "__name__" in cond and "__main__" in cond


def _class_header(classdef, outer_node, offsets: _Offsets) -> str:
    start = _slice_start(offsets, outer_node)
    colon = next(
        c
        for c in classdef.children
        if c.type == "operator" and c.value == ":"
    )
    end = offsets.offset(colon.end_pos)
    return offsets.text[start:end]


def _class_bases(classdef) -> list[str]:
    try:
        lpar = next(
            i
            for i, c in enumerate(classdef.children)
            if c.type == "operator" and c.value == "("
        )
    except StopIteration:
        return []
    inner = classdef.children[lpar + 1]
    if inner.type == "operator":  # empty parens
        return []
    parts = inner.children if inner.type in ("arglist", "testlist") else [inner]
    bases = []
    for p in parts:
        if p.type == "operator":
            continue
        if p.type == "argument":  # keyword args like metaclass=...
            continue
        bases.append(p.get_code(include_prefix=False).strip())
    return bases


def _scan_class(
    classdef,
    outer_node,
    module_name: str,
    offsets: _Offsets,
    parent_path: str | None,
    out_elements: list[CodeElement],
    out_classes: list[ClassDecl],
) -> ClassDecl:
    name = classdef.name.value
    path = f"{parent_path}.{name}" if parent_path else name
    decl = ClassDecl(
        name=name,
        path=path,
        module=module_name,
        header=_class_header(classdef, outer_node, offsets),
        bases=_class_bases(classdef),
        members={},
        nested={},
        start_line=_first_leaf(outer_node).start_pos[0],
    )
    out_classes.append(decl)

    suite = classdef.children[-1]
    stmts = _suite_statements(suite) if suite.type == "suite" else []
    variables: dict[str, _VariableBuilder] = {}
    ordered: list[tuple[int, object]] = []

    for stmt in stmts:
        fn = _funcdef_of(stmt)
        if fn is not None:
            e = _build_function_element(stmt, module_name, offsets, path, decl)
            ordered.append((e.start_line, e))
            decl.members[fn.name.value] = e.id
            continue
        cd = _classdef_of(stmt)
        if cd is not None:
            nested = _scan_class(
                cd, stmt, module_name, offsets, path, out_elements, out_classes
            )
            decl.nested[nested.name] = nested.path
            continue
        if stmt.type == "simple_stmt":
            for small in stmt.children:
                if small.type != "expr_stmt":
                    continue
                targets, ann, akind = _assignment_shape(small)
                for t in targets:
                    if t.value in variables:
                        variables[t.value].add(t, small, ann, akind)
                    else:
                        variables[t.value] = _VariableBuilder(t, small, ann, akind)

    for builder in variables.values():
        e = _build_variable_element(builder, module_name, offsets, path, decl)
        ordered.append((e.start_line, e))
        decl.members[builder.name] = e.id

    ordered.sort(key=lambda pair: pair[0])
    out_elements.extend(e for _, e in ordered)
    return decl


def _resolve_relative(current: str, is_package: bool, level: int, written: str) -> str | None:
    if level == 0:
        return written
    parts = current.split(".") if current else []
    if not is_package and parts:
        parts = parts[:-1]
    drop = level - 1
    if drop > len(parts):
        return None
    base = parts[: len(parts) - drop] if drop else parts
    if written:
        base = base + written.split(".")
    return ".".join(base) if base else None


def _collect_imports(imp, module_name: str, is_package: bool) -> list[ImportItem]:
    items: list[ImportItem] = []
    if imp.type == "import_name":
        # `import a.b.c` binds `a`; `import a.b.c as x` binds `x` to a.b.c.
        for path, defined in zip(imp.get_paths(), imp.get_defined_names()):
            dotted = ".".join(n.value for n in path)
            if defined.value == path[0].value and len(path) > 1:
                items.append(ImportItem(defined.value, defined.value, None))
            else:
                items.append(ImportItem(defined.value, dotted, None))
        return items
    level = imp.level or 0
    base = ".".join(n.value for n in imp.get_from_names())
    target = _resolve_relative(module_name, is_package, level, base)
    if target is None:
        return items
    if imp.is_star_import():
        items.append(ImportItem(None, target, None, is_star=True))
        return items
    for path, defined in zip(imp.get_paths(), imp.get_defined_names()):
        symbol = path[-1].value
        items.append(ImportItem(defined.value, target, symbol))
    return items


def _scan_module(
    tree, module_name: str, text: str, is_package: bool, rel_path: Path | None, original_text: str
) -> ModuleSource:
    offsets = _Offsets(text)
    elements: list[CodeElement] = []
    classes: list[ClassDecl] = []
    imports: list[ImportItem] = []
    import_stmts: list[tuple[int, str]] = []
    type_var_decls: list[tuple[int, str]] = []
    variables: dict[str, _VariableBuilder] = {}
    function_elements: list[CodeElement] = []

    def collect_imports_under(node):
        for stmt in _suite_statements(node) if node.type == "suite" else []:
            walk_stmt(stmt, top_level=False)

    def walk_stmt(stmt, top_level: bool):
        if stmt.type == "simple_stmt":
            for small in stmt.children:
                if small.type in ("import_name", "import_from"):
                    imports.extend(_collect_imports(small, module_name, is_package))
                    import_stmts.append(
                        (
                            small.start_pos[0],
                            small.get_code(include_prefix=False).strip(),
                        )
                    )
                elif small.type == "expr_stmt" and top_level:
                    if _is_typevar_decl(small):
                        type_var_decls.append(
                            (
                                small.start_pos[0],
                                small.get_code(include_prefix=False).strip(),
                            )
                        )
                        continue
                    targets, ann, akind = _assignment_shape(small)
                    for t in targets:
                        if t.value in variables:
                            variables[t.value].add(t, small, ann, akind)
                        else:
                            variables[t.value] = _VariableBuilder(t, small, ann, akind)
            return
        fn = _funcdef_of(stmt)
        if fn is not None:
            if top_level:
                function_elements.append(
                    _build_function_element(stmt, module_name, offsets, None, None)
                )
            return
        cd = _classdef_of(stmt)
        if cd is not None:
            if top_level:
                _scan_class(cd, stmt, module_name, offsets, None, function_elements, classes)
            return
        if stmt.type in _COMPOUND_TYPES:
            if stmt.type == "if_stmt" and _is_main_guard(stmt):
                return
            # Descend into conditional/try bodies for import statements only.
            for child in stmt.children:
                if child.type == "suite":
                    collect_imports_under(child)

    for stmt in tree.children:
        if stmt.type in _STMT_TYPES:
            walk_stmt(stmt, top_level=True)

    ordered: list[CodeElement] = list(function_elements)
    for builder in variables.values():
        ordered.append(_build_variable_element(builder, module_name, offsets, None, None))
    ordered.sort(key=lambda e: (e.start_line, str(e.id)))

    class_headers = [(c.start_line, c.header) for c in classes]
    return ModuleSource(
        name=module_name,
        rel_path=rel_path,
        original_text=original_text,
        text=text,
        tree=tree,
        is_package=is_package,
        imports=imports,
        import_stmts=sorted(import_stmts),
        classes=classes,
        elements=ordered,
        type_var_decls=sorted(type_var_decls),
        class_headers=sorted(class_headers),
    )


def module_name_for(rel_path: Path) -> tuple[str, bool]:
    parts = list(rel_path.parts)
    if parts and parts[0] == "src":
        parts = parts[1:]
    is_package = parts[-1] == "__init__.py"
    if is_package:
        parts = parts[:-1]
    else:
        parts[-1] = parts[-1][: -len(".py")]
    return ".".join(parts), is_package


_GRAMMAR = parso.load_grammar()


def load_module_text(
    original_text: str, module_name: str, is_package: bool = False, rel_path: Path | None = None
) -> ModuleSource:
    """Parse and preprocess one module from text. Raises ProjectError on
    syntax errors."""
    tree = _GRAMMAR.parse(original_text)
    errors = list(_GRAMMAR.iter_errors(tree))
    if errors:
        first = errors[0]
        raise ProjectError(f"syntax error at line {first.start_pos[0]}: {first.message}")
    stripped = strip_source_text(original_text)
    stripped_tree = _GRAMMAR.parse(stripped)
    return _scan_module(stripped_tree, module_name, stripped, is_package, rel_path, original_text)


def load_project(root: Path | str) -> ProjectSource:
    """Load every .py file under `root`. Unparseable files are recorded as
    skipped, never fatal; a missing root or zero parseable files is fatal."""
    root = Path(root)
    if not root.exists():
        raise ProjectError(f"project root does not exist: {root}")
    files = sorted(
        p
        for p in root.rglob("*.py")
        if not any(part in IGNORED_DIRS for part in p.relative_to(root).parts)
    )
    if not files:
        raise ProjectError(f"no .py files under {root}")

    modules: dict[str, ModuleSource] = {}
    skipped: list[SkippedFile] = []
    for path in files:
        rel = path.relative_to(root)
        if path.is_symlink():
            skipped.append(SkippedFile(str(rel), "symlink"))
            continue
        try:
            text = path.read_text(encoding="utf-8")
        except (UnicodeDecodeError, OSError) as e:
            skipped.append(SkippedFile(str(rel), f"unreadable: {e}"))
            continue
        name, is_package = module_name_for(rel)
        if name in modules:
            skipped.append(SkippedFile(str(rel), f"duplicate module name {name!r}"))
            continue
        try:
            modules[name] = load_module_text(text, name, is_package, rel)
        except ProjectError as e:
            skipped.append(SkippedFile(str(rel), str(e)))
    if not modules:
        raise ProjectError(f"no parseable .py files under {root}")
    return ProjectSource(root_path=root, modules=modules, skipped=skipped)


def load_project_from_texts(texts: dict[str, str], root: Path | str | None = None) -> ProjectSource:
    """Build a project from in-memory module texts keyed by dotted name."""
    modules = {}
    skipped = []
    for name in sorted(texts):
        try:
            modules[name] = load_module_text(texts[name], name)
        except ProjectError as e:
            skipped.append(SkippedFile(name, str(e)))
    if not modules:
        raise ProjectError("no parseable modules")
    return ProjectSource(
        root_path=Path(root) if root else None, modules=modules, skipped=skipped
    )


def strip_comments_and_docstrings(module: ModuleSource) -> ModuleSource:
    """Re-strip a module. Loading already strips, so this is idempotent."""
    stripped = strip_source_text(module.text)
    if stripped == module.text:
        return module
    return load_module_text(
        module.original_text, module.name, module.is_package, module.rel_path
    )


def collect_elements(module: ModuleSource) -> list[CodeElement]:
    """The module's code elements in deterministic source order."""
    return list(module.elements)


# ---------------------------------------------------------------------------
# applying a type assignment back to source


@dataclass
class ApplyIssue:
    element: str
    slot: int | None
    reason: str


@dataclass
class ApplyOutcome:
    project: ProjectSource
    issues: list[ApplyIssue]


def apply_assignment(project: ProjectSource, assignment) -> ApplyOutcome:
    """Insert `: T` / `-> T` annotations into the original sources for every
    assignment entry. Unknown keys are reported per key; the rest are applied.
    Returns a freshly loaded project built from the rewritten text."""
    issues: list[ApplyIssue] = []
    per_module: dict[str, list[tuple[ElementId, int, PyType]]] = {}
    for (eid, slot_idx), entry in assignment.items():
        if not project.has_element(eid):
            issues.append(ApplyIssue(str(eid), slot_idx, "unknown element"))
            continue
        element = project.element(eid)
        if not any(s.index == slot_idx for s in element.slots):
            issues.append(ApplyIssue(str(eid), slot_idx, "unknown slot"))
            continue
        per_module.setdefault(eid.module, []).append((eid, slot_idx, entry.type))

    new_texts: dict[str, str] = {}
    for mod_name, edits in per_module.items():
        module = project.modules[mod_name]
        # Re-scan the original text so spans refer to the unstripped source.
        original = _scan_for_rewrite(module)
        text = module.original_text
        resolved: list[tuple[int, int, str]] = []
        for eid, slot_idx, pytype in edits:
            slot = original.get((eid.path, slot_idx))
            if slot is None or slot.abs_span is None:
                issues.append(
                    ApplyIssue(str(eid), slot_idx, "no insertion anchor in source")
                )
                continue
            start, end = slot.abs_span
            resolved.append((start, end, slot.prefix + render_source(pytype)))
        for start, end, replacement in sorted(resolved, reverse=True):
            text = text[:start] + replacement + text[end:]
        new_texts[mod_name] = text

    modules: dict[str, ModuleSource] = {}
    for name, module in project.modules.items():
        if name in new_texts:
            modules[name] = load_module_text(
                new_texts[name], name, module.is_package, module.rel_path
            )
        else:
            modules[name] = module
    new_project = ProjectSource(
        root_path=project.root_path, modules=modules, skipped=list(project.skipped)
    )
    return ApplyOutcome(project=new_project, issues=issues)


def _scan_for_rewrite(module: ModuleSource) -> dict[tuple[str, int], AnnotationSlot]:
    """Slots keyed by (element path, slot index) with spans in the original
    (unstripped) text."""
    tree = _GRAMMAR.parse(module.original_text)
    scanned = _scan_module(
        tree, module.name, module.original_text, module.is_package, module.rel_path, module.original_text
    )
    out: dict[tuple[str, int], AnnotationSlot] = {}
    for e in scanned.elements:
        for s in e.slots:
            out[(e.id.path, s.index)] = s
    return out


def write_project(project: ProjectSource, out_dir: Path | str) -> list[Path]:
    """Write the project's source files (original text, UTF-8) under out_dir."""
    out_dir = Path(out_dir)
    written = []
    for module in project.modules.values():
        rel = module.rel_path or Path(module.name.replace(".", "/") + ".py")
        if module.is_package and module.rel_path is None:
            rel = Path(module.name.replace(".", "/")) / "__init__.py"
        dest = out_dir / rel
        dest.parent.mkdir(parents=True, exist_ok=True)
        with open(dest, "w", encoding="utf-8", newline="") as f:
            f.write(module.original_text)
        written.append(dest)
    return written
