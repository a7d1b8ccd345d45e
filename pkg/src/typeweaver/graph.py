"""Project-wide symbol resolution and the usage graph: certain and potential
edges between code elements, plus deterministic topological ordering."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from .project import (
    ClassDecl,
    CodeElement,
    ElementId,
    ElementKind,
    ProjectSource,
    sort_key,
)

CERTAIN = "certain"
POTENTIAL = "potential"


class GraphError(KeyError):
    pass


@dataclass(frozen=True)
class Site:
    module: str
    line: int
    col: int


@dataclass(frozen=True)
class UsageEdge:
    user: ElementId
    usee: ElementId
    certainty: str
    site: Site


@dataclass
class UsageGraph:
    nodes: list[ElementId]
    edges: list[UsageEdge]
    # Ordering key for deterministic listings: definition position by default.
    order_keys: dict[ElementId, tuple] = field(default_factory=dict)
    _users: dict[ElementId, list[UsageEdge]] = field(default_factory=dict, repr=False)
    _usees: dict[ElementId, list[UsageEdge]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        node_set = set(self.nodes)
        for e in self.edges:
            if e.user not in node_set or e.usee not in node_set:
                raise ValueError(f"edge endpoint not in nodes: {e}")
        for eid in self.nodes:
            self.order_keys.setdefault(eid, sort_key(eid))
        self._users = {n: [] for n in self.nodes}
        self._usees = {n: [] for n in self.nodes}
        for e in self.edges:
            self._usees[e.user].append(e)
            self._users[e.usee].append(e)
        for lst in self._users.values():
            lst.sort(key=self._edge_key_user)
        for lst in self._usees.values():
            lst.sort(key=self._edge_key_usee)

    def _edge_key_user(self, e: UsageEdge) -> tuple:
        return (e.certainty != CERTAIN, self.order_keys[e.user])

    def _edge_key_usee(self, e: UsageEdge) -> tuple:
        return (e.certainty != CERTAIN, self.order_keys[e.usee])

    def _check(self, e: ElementId) -> None:
        if e not in self._users:
            raise GraphError(f"unknown element: {e}")

    def user_edges(self, e: ElementId) -> list[UsageEdge]:
        """Edges into e (who uses e), certain before potential, then by the
        user's (module, source position)."""
        self._check(e)
        return list(self._users[e])

    def usee_edges(self, e: ElementId) -> list[UsageEdge]:
        self._check(e)
        return list(self._usees[e])

    def users(self, e: ElementId) -> list[ElementId]:
        return [edge.user for edge in self.user_edges(e)]

    def usees(self, e: ElementId) -> list[ElementId]:
        return [edge.usee for edge in self.usee_edges(e)]

    @classmethod
    def from_edge_list(cls, nodes, edges) -> "UsageGraph":
        """Build a graph from (user, usee, certainty) triples; ids may be
        given as 'module.path' strings. Intended for tests and synthetic
        schedules."""

        def as_id(x) -> ElementId:
            if isinstance(x, ElementId):
                return x
            mod, _, path = str(x).rpartition(".")
            return ElementId(mod or "m", path)

        node_ids = [as_id(n) for n in nodes]
        edge_objs = []
        seen = set()
        for user, usee, *rest in edges:
            certainty = rest[0] if rest else CERTAIN
            key = (as_id(user), as_id(usee), certainty)
            if key in seen:
                continue
            seen.add(key)
            edge_objs.append(
                UsageEdge(as_id(user), as_id(usee), certainty, Site("m", 0, 0))
            )
        return cls(nodes=node_ids, edges=edge_objs)


def graph_to_json_dict(graph: UsageGraph) -> dict:
    nodes = sorted(str(n) for n in graph.nodes)
    edges = sorted(
        (
            {
                "user": str(e.user),
                "usee": str(e.usee),
                "certainty": e.certainty,
                "site": {"module": e.site.module, "line": e.site.line, "col": e.site.col},
            }
            for e in graph.edges
        ),
        key=lambda d: (d["user"], d["usee"], d["certainty"]),
    )
    return {"schema_version": 1, "nodes": nodes, "edges": edges}


# ---------------------------------------------------------------------------
# name resolution


@dataclass(frozen=True)
class _Module:
    name: str


@dataclass(frozen=True)
class _Class:
    module: str
    path: str


@dataclass(frozen=True)
class _Element:
    eid: ElementId


class _Sentinel:
    def __init__(self, label):
        self.label = label

    def __repr__(self):
        return f"<{self.label}>"


# External: a library symbol; attribute accesses on it stay in library scope
# and never produce edges. Unknown: a value whose type we cannot see;
# attribute accesses on it produce potential edges by member-name match.
EXTERNAL = _Sentinel("external")
UNKNOWN = _Sentinel("unknown")


class _Resolver:
    def __init__(self, project: ProjectSource):
        self.project = project
        # Module namespaces: local name -> binding, in source order (later
        # bindings shadow earlier ones, matching execution order).
        self.namespaces: dict[str, dict[str, object]] = {}
        self.wildcards: dict[str, list[str]] = {}
        for mod in project.modules.values():
            ns: dict[str, object] = {}
            wild: list[str] = []
            for item in mod.imports:
                if item.is_star:
                    wild.append(item.module)
                    continue
                ns[item.local_name] = item
            for c in mod.classes:
                if "." not in c.path:
                    ns[c.name] = _Class(mod.name, c.path)
            for e in mod.elements:
                if "." not in e.id.path:
                    ns[e.id.path.split(".")[0]] = _Element(e.id)
            for _, decl in mod.type_var_decls:
                name = decl.split("=")[0].strip()
                if name.isidentifier():
                    ns[name] = EXTERNAL
            self.namespaces[mod.name] = ns
            self.wildcards[mod.name] = wild

    def resolve_in_module(self, module_name: str, symbol: str, seen: frozenset = frozenset()):
        """What does `module_name.symbol` denote? An element, class, submodule,
        re-export, or UNKNOWN."""
        key = (module_name, symbol)
        if key in seen:
            return UNKNOWN
        seen = seen | {key}
        if module_name not in self.project.modules:
            return EXTERNAL
        eid = ElementId(module_name, symbol)
        if self.project.has_element(eid):
            return _Element(eid)
        decl = self.project.class_decl(module_name, symbol)
        if decl is not None:
            return _Class(module_name, symbol)
        sub = f"{module_name}.{symbol}"
        if sub in self.project.modules:
            return _Module(sub)
        ns = self.namespaces[module_name]
        binding = ns.get(symbol)
        if binding is not None:
            return self._follow(binding, seen)
        for target in self.wildcards[module_name]:
            if target in self.project.modules and not symbol.startswith("_"):
                hit = self.resolve_in_module(target, symbol, seen)
                if hit is not UNKNOWN and hit is not EXTERNAL:
                    return hit
        return UNKNOWN

    def _follow(self, binding, seen: frozenset):
        if isinstance(binding, (_Module, _Class, _Element)) or binding in (
            EXTERNAL,
            UNKNOWN,
        ):
            return binding
        # ImportItem
        item = binding
        target = item.module
        if item.symbol is None:
            if target in self.project.modules:
                return _Module(target)
            # `import a.b` where only a.b.c is a project module still scopes
            # lookups into the project package tree.
            if any(m == target or m.startswith(target + ".") for m in self.project.modules):
                return _Module(target)
            return EXTERNAL
        if target in self.project.modules:
            return self.resolve_in_module(target, item.symbol, seen)
        sub = f"{target}.{item.symbol}"
        if sub in self.project.modules:
            return _Module(sub)
        if any(m == target or m.startswith(target + ".") for m in self.project.modules):
            return UNKNOWN
        return EXTERNAL

    def resolve_module_name(self, module_name: str, name: str):
        ns = self.namespaces.get(module_name, {})
        binding = ns.get(name)
        if binding is not None:
            return self._follow(binding, frozenset())
        for target in self.wildcards.get(module_name, []):
            if target in self.project.modules and not name.startswith("_"):
                hit = self.resolve_in_module(target, name)
                if hit is not UNKNOWN and hit is not EXTERNAL:
                    return hit
        return UNKNOWN

    def class_member(self, cls: _Class, name: str, seen: frozenset = frozenset()):
        """Look up a member in a class, walking project-resolvable bases."""
        if (cls.module, cls.path) in seen:
            return None
        seen = seen | {(cls.module, cls.path)}
        decl = self.project.class_decl(cls.module, cls.path)
        if decl is None:
            return None
        if name in decl.members:
            return _Element(decl.members[name])
        if name in decl.nested:
            return _Class(cls.module, decl.nested[name])
        for base in decl.bases:
            entity = self._resolve_dotted(cls.module, base)
            if isinstance(entity, _Class):
                hit = self.class_member(entity, name, seen)
                if hit is not None:
                    return hit
        return None

    def _resolve_dotted(self, module_name: str, dotted: str):
        parts = dotted.split(".")
        entity = self.resolve_module_name(module_name, parts[0])
        for part in parts[1:]:
            if isinstance(entity, _Module):
                entity = self.resolve_in_module(entity.name, part)
            elif isinstance(entity, _Class):
                entity = self.class_member(entity, part) or UNKNOWN
            else:
                return UNKNOWN
        return entity


# ---------------------------------------------------------------------------
# reference extraction


_LOCAL_BINDING_TYPES = {"for_stmt", "with_stmt", "except_clause", "sync_comp_for", "comp_for"}


def _local_names(element: CodeElement) -> set[str]:
    """Over-approximate the names bound locally inside a function body."""
    if element.kind not in (ElementKind.FUNCTION, ElementKind.METHOD):
        return set()
    names: set[str] = set()
    globals_: set[str] = set()

    def collect_targets(node):
        if node is None:
            return
        if getattr(node, "type", None) == "name":
            names.add(node.value)
            return
        for c in getattr(node, "children", []):
            if getattr(c, "type", None) == "operator" and c.value in (",", "(", ")", "[", "]", "*", "**"):
                continue
            collect_targets(c)

    def walk(node):
        t = getattr(node, "type", None)
        if t == "funcdef":
            names.add(node.name.value)
            for p in node.get_params():
                if p.name is not None:
                    names.add(p.name.value)
        elif t == "lambdef":
            for c in node.children:
                if c.type == "param" and c.name is not None:
                    names.add(c.name.value)
        elif t == "classdef":
            names.add(node.name.value)
        elif t == "expr_stmt":
            ch = node.children
            if len(ch) >= 2 and ch[1].type == "annassign":
                collect_targets(ch[0])
            else:
                # Chained assignments: everything left of the last '=' is a target.
                eqs = [
                    i
                    for i, c in enumerate(ch)
                    if c.type == "operator" and c.value.endswith("=")
                ]
                if eqs:
                    for target in ch[: eqs[-1]]:
                        collect_targets(target)
        elif t == "for_stmt":
            collect_targets(node.children[1])
        elif t == "with_item":
            if len(node.children) == 3:  # expr 'as' target
                collect_targets(node.children[2])
        elif t == "except_clause":
            if len(node.children) == 4:  # 'except' expr 'as' name
                collect_targets(node.children[3])
        elif t in ("sync_comp_for", "comp_for"):
            collect_targets(node.children[1])
        elif t == "namedexpr_test":
            collect_targets(node.children[0])
        elif t == "global_stmt":
            for c in node.children[1:]:
                if c.type == "name":
                    globals_.add(c.value)
        elif t in ("import_name", "import_from"):
            for n in node.get_defined_names():
                names.add(n.value)
        for c in getattr(node, "children", []):
            walk(c)

    for node in element.nodes:
        walk(node)
    # Parameters are local but handled explicitly; element's own name is not.
    names.discard(element.name)
    return names - globals_


@dataclass
class _RawRef:
    usee: ElementId
    certainty: str
    pos: tuple[int, int]


class _ReferenceWalker:
    def __init__(self, resolver: _Resolver, element: CodeElement, owner: ClassDecl | None):
        self.resolver = resolver
        self.element = element
        self.owner = owner
        self.module = element.module
        self.locals = _local_names(element)
        self.refs: list[_RawRef] = []
        self.in_class_body = element.kind == ElementKind.CLASS_ATTR

    def run(self) -> list[_RawRef]:
        for node in self.element.nodes:
            self._walk(node, skip_names=self._definition_names(node))
        return self.refs

    def _definition_names(self, node) -> set[int]:
        """Leaf ids of name tokens that are definitions, not uses: the def/
        class name, parameter names, and assignment targets."""
        skip: set[int] = set()
        t = getattr(node, "type", None)
        if t in ("decorated", "async_funcdef", "async_stmt"):
            for c in node.children:
                skip |= self._definition_names(c)
            return skip
        if t == "funcdef":
            skip.add(id(node.name))
            for p in node.get_params():
                if p.name is not None:
                    skip.add(id(p.name))
        elif t == "expr_stmt":
            ch = node.children
            if len(ch) >= 2 and ch[1].type == "annassign":
                if ch[0].type == "name":
                    skip.add(id(ch[0]))
            else:
                eqs = [
                    i
                    for i, c in enumerate(ch)
                    if c.type == "operator" and c.value.endswith("=")
                ]
                if eqs:
                    for target in ch[: eqs[-1]]:
                        for leaf in _name_leaves(target):
                            skip.add(id(leaf))
        return skip

    def _emit(self, eid: ElementId, certainty: str, leaf) -> None:
        self.refs.append(_RawRef(eid, certainty, leaf.start_pos))

    def _emit_potential(self, attr_leaf) -> None:
        for eid in self.resolver.project.members_named(attr_leaf.value):
            self._emit(eid, POTENTIAL, attr_leaf)

    def _resolve_base(self, name: str):
        if name in ("self", "cls") and self.owner is not None and self.element.kind == ElementKind.METHOD:
            return _Class(self.owner.module, self.owner.path)
        if name in self.locals:
            return UNKNOWN
        if self.in_class_body and self.owner is not None:
            hit = self.resolver.class_member(_Class(self.owner.module, self.owner.path), name)
            if hit is not None:
                return hit
        return self.resolver.resolve_module_name(self.module, name)

    def _step_attr(self, entity, attr_leaf):
        name = attr_leaf.value
        if entity is EXTERNAL:
            return EXTERNAL
        if entity is UNKNOWN:
            self._emit_potential(attr_leaf)
            return UNKNOWN
        if isinstance(entity, _Module):
            if entity.name not in self.resolver.project.modules:
                return EXTERNAL
            hit = self.resolver.resolve_in_module(entity.name, name)
            if isinstance(hit, _Element):
                self._emit(hit.eid, CERTAIN, attr_leaf)
            return hit if hit is not UNKNOWN else EXTERNAL
        if isinstance(entity, _Class):
            hit = self.resolver.class_member(entity, name)
            if isinstance(hit, _Element):
                self._emit(hit.eid, CERTAIN, attr_leaf)
                return hit
            if isinstance(hit, _Class):
                return hit
            self._emit_potential(attr_leaf)
            return UNKNOWN
        if isinstance(entity, _Element):
            self._emit_potential(attr_leaf)
            return UNKNOWN
        return UNKNOWN

    def _walk_chain(self, node, skip_names: set[int]) -> None:
        base = node.children[0]
        trailers = node.children[1:]
        if base.type == "name" and id(base) not in skip_names:
            entity = self._resolve_base(base.value)
            if isinstance(entity, _Element):
                self._emit(entity.eid, CERTAIN, base)
        else:
            entity = UNKNOWN if base.type != "name" else UNKNOWN
            self._walk(base, skip_names)
        for tr in trailers:
            if tr.type == "trailer" and len(tr.children) == 2 and tr.children[0].value == ".":
                entity = self._step_attr(entity, tr.children[1])
            elif tr.type == "trailer":
                # Call or subscript: result type is opaque (unless the chain
                # stays in library scope).
                entity = EXTERNAL if entity is EXTERNAL else UNKNOWN
                for c in tr.children:
                    self._walk(c, skip_names)
            else:
                self._walk(tr, skip_names)

    def _walk(self, node, skip_names: set[int]) -> None:
        t = getattr(node, "type", None)
        if t in ("atom_expr", "power"):
            self._walk_chain(node, skip_names)
            return
        if t in ("import_name", "import_from"):
            self._handle_body_import(node)
            return
        if t == "argument":
            ch = node.children
            if len(ch) >= 2 and ch[0].type == "name" and ch[1].type == "operator" and ch[1].value == "=":
                for c in ch[1:]:
                    self._walk(c, skip_names)
                return
        if t == "name":
            if id(node) in skip_names:
                return
            entity = self._resolve_base(node.value)
            if isinstance(entity, _Element):
                self._emit(entity.eid, CERTAIN, node)
            return
        own_skips = skip_names
        if t in ("funcdef", "lambdef", "classdef", "expr_stmt", "decorated", "async_funcdef", "async_stmt"):
            own_skips = skip_names | self._definition_names(node)
        for c in getattr(node, "children", []):
            self._walk(c, own_skips)

    def _handle_body_import(self, node) -> None:
        mod = self.resolver.project.modules[self.module]
        from .project import _collect_imports  # local parse helper

        for item in _collect_imports(node, self.module, mod.is_package):
            if item.is_star or item.symbol is None:
                continue
            if item.module in self.resolver.project.modules:
                hit = self.resolver.resolve_in_module(item.module, item.symbol)
                if isinstance(hit, _Element):
                    self._emit(hit.eid, CERTAIN, _first_name_leaf(node))


def _name_leaves(node):
    if getattr(node, "type", None) == "name":
        yield node
        return
    for c in getattr(node, "children", []):
        yield from _name_leaves(c)


def _first_name_leaf(node):
    for leaf in _name_leaves(node):
        return leaf
    return node


def build_usage_graph(project: ProjectSource) -> UsageGraph:
    """Construct the usage graph: certain edges where resolution needed no
    type information, potential edges for receiver-dependent member accesses
    matched by name project-wide."""
    resolver = _Resolver(project)
    owners: dict[ElementId, ClassDecl] = {}
    for mod in project.modules.values():
        for c in mod.classes:
            for eid in c.members.values():
                owners[eid] = c

    nodes = [e.id for e in project.elements()]
    order_keys = {e.id: e.order_key() for e in project.elements()}
    best: dict[tuple[ElementId, ElementId], _RawRef] = {}
    for element in project.elements():
        walker = _ReferenceWalker(resolver, element, owners.get(element.id))
        for ref in walker.run():
            key = (element.id, ref.usee)
            cur = best.get(key)
            if cur is None:
                best[key] = ref
            elif ref.certainty == CERTAIN and cur.certainty == POTENTIAL:
                best[key] = ref
            elif ref.certainty == cur.certainty and ref.pos < cur.pos:
                best[key] = ref

    edges = [
        UsageEdge(user, usee, ref.certainty, Site(user.module, ref.pos[0], ref.pos[1]))
        for (user, usee), ref in best.items()
    ]
    edges.sort(key=lambda e: (sort_key(e.user), sort_key(e.usee)))
    return UsageGraph(nodes=nodes, edges=edges, order_keys=order_keys)


# ---------------------------------------------------------------------------
# topological ordering


def _strongly_connected(nodes: list[ElementId], out: dict[ElementId, set[ElementId]]):
    """Iterative Tarjan; yields SCCs as sets."""
    index: dict[ElementId, int] = {}
    low: dict[ElementId, int] = {}
    on_stack: set[ElementId] = set()
    stack: list[ElementId] = []
    sccs: list[set[ElementId]] = []
    counter = 0

    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(sorted(out.get(root, ()), key=sort_key)))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for succ in it:
                if succ not in index:
                    index[succ] = low[succ] = counter
                    counter += 1
                    stack.append(succ)
                    on_stack.add(succ)
                    work.append((succ, iter(sorted(out.get(succ, ()), key=sort_key))))
                    advanced = True
                    break
                if succ in on_stack:
                    low[node] = min(low[node], index[succ])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                scc = set()
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    scc.add(w)
                    if w == node:
                        break
                sccs.append(scc)
    return sccs


def topological_order(graph: UsageGraph) -> list[ElementId]:
    """Usee-before-user order over all edges. Cycles are broken by repeatedly
    dropping the intra-component out-edges of the lexicographically smallest
    element id in each strongly connected component; ties in the final order
    go to the smallest ready id. Self-loops are ignored."""
    nodes = sorted(graph.nodes, key=sort_key)
    out: dict[ElementId, set[ElementId]] = {n: set() for n in nodes}
    for e in graph.edges:
        if e.user != e.usee:
            out[e.user].add(e.usee)

    while True:
        cyclic = [s for s in _strongly_connected(nodes, out) if len(s) > 1]
        if not cyclic:
            break
        for scc in cyclic:
            smallest = min(scc, key=sort_key)
            out[smallest] -= scc

    # Kahn: a node is ready when all its usees are emitted.
    remaining: dict[ElementId, int] = {n: len(out[n]) for n in nodes}
    users_of: dict[ElementId, list[ElementId]] = {n: [] for n in nodes}
    for user, usees in out.items():
        for usee in usees:
            users_of[usee].append(user)
    ready = [sort_key(n) + (n,) for n, deg in remaining.items() if deg == 0]
    heapq.heapify(ready)
    order: list[ElementId] = []
    while ready:
        *_, node = heapq.heappop(ready)
        order.append(node)
        for user in users_of[node]:
            remaining[user] -= 1
            if remaining[user] == 0:
                heapq.heappush(ready, sort_key(user) + (user,))
    if len(order) != len(nodes):
        raise RuntimeError("cycle survived cycle breaking")
    return order
