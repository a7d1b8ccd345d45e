"""Shared test helpers: an independent brute-force normalizer, random type
trees, random graphs, and synthetic oversized projects."""

from __future__ import annotations

import random

from typeweaver.pytypes import CAPITALIZED_BUILTINS, LIST_GROUP, PyType

# ---------------------------------------------------------------------------
# Brute-force normalization oracle: repeatedly applies a single rewrite
# anywhere in the tree until no rule fires. Intentionally structured
# differently from the library implementation (single-step scan to fixpoint
# instead of one recursive bottom-up pass).

_NONE = PyType("None")
_ANY = PyType("Any")


def _union_key(t: PyType) -> tuple:
    # None last, the rest alphabetically (case-insensitive, text tiebreak):
    # the ordering implied jointly by the Optional[T] -> Union[T,None] rule
    # and the Union[B,Union[C,A]] -> Union[A,B,C] example.
    text = t.render()
    return (t == _NONE, text.lower(), text)


def _rewrite_once(t: PyType) -> tuple[PyType, bool]:
    # "Recursively apply" means arguments normalize before their parent, so
    # the scan rewrites innermost nodes first.
    for i, a in enumerate(t.args):
        na, changed = _rewrite_once(a)
        if changed:
            return PyType(t.head, t.args[:i] + (na,) + t.args[i + 1 :]), True
    # typing.X is the same symbol as X and must match the rules as X.
    if t.head.startswith("typing."):
        return PyType(t.head[len("typing.") :], t.args), True
    if t.head == "Optional" and t.args:
        return PyType("Union", t.args + (_NONE,)), True
    if t.head == "Union" and t.args:
        for i, a in enumerate(t.args):
            if a.head == "Union" and a.args:
                return PyType("Union", t.args[:i] + a.args + t.args[i + 1 :]), True
        keys = [_union_key(a) for a in t.args]
        if keys != sorted(keys):
            return (
                PyType("Union", tuple(sorted(t.args, key=_union_key))),
                True,
            )
    if t.args and all(a == _ANY for a in t.args):
        return PyType(t.head), True
    if t.head in CAPITALIZED_BUILTINS:
        return PyType(CAPITALIZED_BUILTINS[t.head], t.args), True
    return t, False


def oracle_normalize(t: PyType) -> PyType:
    for _ in range(100_000):
        t, changed = _rewrite_once(t)
        if not changed:
            return t
    raise RuntimeError("normalization did not reach a fixpoint")


# ---------------------------------------------------------------------------
# random type trees

LEAF_HEADS = [
    "int",
    "str",
    "bool",
    "float",
    "bytes",
    "None",
    "Any",
    "list",
    "dict",
    "tuple",
    "T",
    "foo.Bar",
    "torch.Tensor",
    "PythonType",
    "typing.Any",
    "pkg.mod.Klass",
]

BRANCH_HEADS = [
    "list",
    "dict",
    "set",
    "tuple",
    "frozenset",
    "type",
    "List",
    "Dict",
    "Optional",
    "Optional",
    "Union",
    "Union",
    "Union",
    "Callable",
    "Final",
    "typing.Optional",
    "typing.List",
    "Mapping",
    "foo.Container",
]


def random_type(rng: random.Random, depth: int = 4) -> PyType:
    if depth <= 0 or rng.random() < 0.35:
        return PyType(rng.choice(LEAF_HEADS))
    head = rng.choice(BRANCH_HEADS)
    arity = rng.randint(1, 3)
    args = tuple(random_type(rng, depth - 1) for _ in range(arity))
    if head == "Callable" and rng.random() < 0.5:
        args = (PyType(LIST_GROUP, args[:-1]), args[-1])
    return PyType(head, args)


def permute_unions(rng: random.Random, t: PyType) -> PyType:
    args = tuple(permute_unions(rng, a) for a in t.args)
    if t.head == "Union" and len(args) > 1:
        shuffled = list(args)
        rng.shuffle(shuffled)
        args = tuple(shuffled)
    return PyType(t.head, args)


# ---------------------------------------------------------------------------
# hand-computed metric fixture: 20 (gold, prediction) pairs chosen to cover
# the Optional unwrap, qualified-name, base-vs-adjusted, and None/Any
# filtering edge cases. Expected accuracies were tallied by hand from the
# metric definitions; see the per-pair notes.

METRIC_PAIRS = [
    # (gold, prediction or None)             full  adj-set adj   base
    ("int", "int"),                        # ok    yes     ok    ok
    ("Optional[int]", "int"),              # no    yes     ok    ok
    ("Dict[str,List]", "Dict[int,int]"),   # no    yes     no    ok
    ("torch.Tensor", "Tensor"),            # no    yes     ok    ok
    ("None", "None"),                      # ok    no      -     -
    ("Any", "int"),                        # no    no      -     -
    ("list", "List[Any]"),                 # ok    yes     ok    ok
    ("Union[None,int]", "Optional[int]"),  # ok    yes     ok    ok
    ("dict[int,list[PythonType]]", "dict[int,list[PythonType]]"),  # ok yes ok ok
    ("dict[int,list[PythonType]]", "Dict[int,List[Torch]]"),       # no yes no ok
    ("str", None),                         # no    yes     no    no (missing)
    ("Final[int]", "int"),                 # no    yes     ok    ok
    ("Optional[List[Any]]", "list"),       # no    yes     ok    ok
    ("foo.Bar", "baz.Bar"),                # no    yes     ok    ok
    ("Mapping[str,int]", "Dict[str,int]"), # no    yes     no    no
    ("Union[int,str]", "Union[str,int]"),  # ok    yes     ok    ok
    ("Callable[[int],str]", "Callable[[int],str]"),  # ok yes ok ok
    ("bool", "int"),                       # no    yes     no    no
    ("typing.Optional[torch.Tensor]", "Union[Tensor,None]"),  # no yes ok ok
    ("List[Union[int,None]]", "List[Optional[int]]"),  # ok yes ok ok
]

# Frequency table: exactly these ten constructors are common.
METRIC_COMMON_COUNTS = {
    "int": 100,
    "str": 90,
    "bool": 80,
    "float": 70,
    "List": 60,
    "Dict": 50,
    "None": 40,
    "Union": 30,
    "Any": 20,
    "Callable": 10,
}

METRIC_EXPECTED = {
    "full": {
        "all": (8, 20),
        "simple": (3, 8),
        "complex": (5, 12),
        "common": (7, 13),
        "rare": (1, 7),
    },
    "adjusted": {
        "all": (13, 18),
        "simple": (4, 6),
        "complex": (9, 12),
        "common": (8, 11),
        "rare": (5, 7),
    },
    "base": {
        "all": (15, 18),
        "simple": (4, 6),
        "complex": (11, 12),
        "common": (9, 11),
        "rare": (6, 7),
    },
}

METRIC_MISSING = 1


# ---------------------------------------------------------------------------
# random graphs

def random_dag_edges(rng: random.Random, n_nodes: int, density: float = 0.15):
    """Node names plus user->usee edges that form a DAG (edges point from
    later nodes to earlier ones in a hidden order)."""
    names = [f"m{i}.f{i}" for i in range(n_nodes)]
    order = list(range(n_nodes))
    rng.shuffle(order)
    edges = []
    for i in range(n_nodes):
        for j in range(i + 1, n_nodes):
            if rng.random() < density:
                # order[j] uses order[i]: usee comes earlier in the hidden order
                certainty = "certain" if rng.random() < 0.7 else "potential"
                edges.append((names[order[j]], names[order[i]], certainty))
    return names, edges


def random_digraph_edges(rng: random.Random, n_nodes: int, density: float = 0.1):
    names = [f"m{i}.f{i}" for i in range(n_nodes)]
    edges = []
    for a in names:
        for b in names:
            if a != b and rng.random() < density:
                edges.append((a, b, "certain"))
    return names, edges


# ---------------------------------------------------------------------------
# synthetic oversized projects for budget fuzzing

def synth_project_texts(rng: random.Random) -> dict[str, str]:
    """A project sized to overflow the default context budgets: a hub with
    many small helpers (fat usee segments), callers with long bodies (fat
    main code and user segments), an import/class-header heavy hub preamble,
    and attribute accesses that produce potential edges."""

    def big_body(n_stmts: int, seed_name: str) -> str:
        lines = []
        for i in range(n_stmts):
            if i:
                lines.append(f"    {seed_name}_{i} = {seed_name}_{i - 1} + {i}")
            else:
                lines.append(f"    {seed_name}_0 = 0")
        return "\n".join(lines)

    shape = rng.random()
    if shape < 0.25:
        # Preamble-heavy: imports and class headers crowd out the usee window.
        n_helpers = rng.randint(20, 40)
        n_imports = rng.randint(350, 550)
        n_shims = rng.randint(10, 25)
    elif shape < 0.5:
        # Usee-heavy: enough signatures to overflow the usee segment.
        n_helpers = rng.randint(90, 150)
        n_imports = rng.randint(0, 30)
        n_shims = rng.randint(0, 10)
    else:
        n_helpers = rng.randint(8, 60)
        n_imports = rng.randint(0, 80)
        n_shims = rng.randint(0, 25)
    n_callers = rng.randint(2, 4)
    caller_stmts = rng.randint(30, 90)

    hub_lines = [f"import fake_module_{i}" for i in range(n_imports)]
    for s in range(n_shims):
        hub_lines.append(f"class Shim{s}:")
        hub_lines.append("    pass")
    for h in range(n_helpers):
        hub_lines.append(
            f"def helper_{h}(value_{h}, scale_{h}={rng.randint(1, 9)}, label_{h}='x'):"
        )
        hub_lines.append(f"    return value_{h} * scale_{h}")
        hub_lines.append("")
    hub_lines.append("class Registry:")
    hub_lines.append(f"    limit = {rng.randint(10, 99)}")
    hub_lines.append("")
    hub_lines.append("    def lookup(self, key):")
    hub_lines.append("        return self.limit")
    texts = {"hub": "\n".join(hub_lines) + "\n"}

    k_hi = min(n_helpers, 100)
    used = sorted(rng.sample(range(n_helpers), k=rng.randint(min(4, k_hi), k_hi)))
    for c in range(n_callers):
        imports = ", ".join(f"helper_{h}" for h in used)
        calls = "\n".join(
            f"    t{j} = helper_{h}(c{c}_{caller_stmts - 1})" for j, h in enumerate(used)
        )
        lines = [
            f"from hub import {imports}",
            "",
            "",
            f"def caller_{c}(registry, amount={rng.randint(1, 9)}):",
            big_body(caller_stmts, f"c{c}"),
            calls,
            "    bound = registry.lookup(t0)",
            "    return bound",
        ]
        texts[f"caller_{c}"] = "\n".join(lines) + "\n"
    return texts
