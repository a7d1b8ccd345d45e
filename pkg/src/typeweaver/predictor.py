"""The type-prediction interface: given a four-segment input with n markers,
return one type per marker. Backends: an HTTP client for an external model
server, and a deterministic heuristic for tests and offline runs."""

from __future__ import annotations

import ast
import re
import threading
import time
from dataclasses import dataclass, field

import requests

from .context import MARKER_RE, ModelInput
from .pytypes import ANY, PyType, TypeParseError, normalize, parse_type


class PredictorError(Exception):
    retriable = False


class BackendUnavailable(PredictorError):
    retriable = True


class ProtocolError(PredictorError):
    pass


@dataclass(frozen=True)
class DecodeParams:
    beam_width: int = 16
    diversity_penalty: float = 1.0


def max_output_tokens_for(marker_count: int, per_marker: int = 16, base: int = 10) -> int:
    return per_marker * marker_count + base


@dataclass
class PredictionRequest:
    preamble: str
    usees: str
    main_code: str
    users: str
    marker_count: int
    max_output_tokens: int
    params: DecodeParams = field(default_factory=DecodeParams)
    marker_base: int = 0

    @classmethod
    def from_model_input(
        cls, mi: ModelInput, params: DecodeParams | None = None, marker_base: int = 0
    ) -> "PredictionRequest":
        return cls(
            preamble=mi.preamble,
            usees=mi.usee_context,
            main_code=mi.main_code,
            users=mi.user_context,
            marker_count=mi.marker_count,
            max_output_tokens=max_output_tokens_for(mi.marker_count),
            params=params or DecodeParams(),
            marker_base=marker_base,
        )


@dataclass
class PredictionResult:
    types: list[PyType]
    raw_output: str
    latency: float
    diagnostics: list[str] = field(default_factory=list)


def parse_raw_output(
    text: str, marker_count: int, marker_base: int = 0
) -> tuple[list[PyType], list[str]]:
    """Split marker-interleaved output into one type per marker index; missing
    markers or unparseable fragments become Any with a diagnostic. Extra
    markers are ignored; out-of-order markers are reordered by index."""
    chunks: dict[int, str] = {}
    matches = list(MARKER_RE.finditer(text))
    for i, m in enumerate(matches):
        idx = int(m.group(1))
        end = matches[i + 1].start() if i + 1 < len(matches) else len(text)
        if idx not in chunks:
            chunks[idx] = text[m.end() : end].strip()
    types: list[PyType] = []
    diagnostics: list[str] = []
    for k in range(marker_count):
        chunk = chunks.get(marker_base + k)
        if not chunk:
            types.append(ANY)
            diagnostics.append(f"marker {marker_base + k}: no output")
            continue
        try:
            types.append(normalize(parse_type(chunk)))
        except TypeParseError as e:
            types.append(ANY)
            diagnostics.append(f"marker {marker_base + k}: unparseable ({e})")
    return types, diagnostics


def predict(backend, request: PredictionRequest) -> PredictionResult:
    """Run a backend and enforce the one-type-per-marker contract."""
    result = backend.predict(request)
    if len(result.types) != request.marker_count:
        raise ProtocolError(
            f"backend returned {len(result.types)} types for {request.marker_count} markers"
        )
    return result


# ---------------------------------------------------------------------------
# heuristic backend


_LITERAL_HEADS = {
    "List": "list",
    "Dict": "dict",
    "Set": "set",
    "Tuple": "tuple",
}


def _literal_type(node: ast.expr) -> str | None:
    if isinstance(node, ast.Constant):
        v = node.value
        if isinstance(v, bool):
            return "bool"
        if isinstance(v, int):
            return "int"
        if isinstance(v, float):
            return "float"
        if isinstance(v, str):
            return "str"
        if isinstance(v, bytes):
            return "bytes"
        return None
    if isinstance(node, ast.JoinedStr):
        return "str"
    if isinstance(node, (ast.List, ast.ListComp)):
        return "list"
    if isinstance(node, (ast.Dict, ast.DictComp)):
        return "dict"
    if isinstance(node, (ast.Set, ast.SetComp)):
        return "set"
    if isinstance(node, ast.Tuple):
        return "tuple"
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
        return _literal_type(node.operand) if isinstance(node.operand, ast.Constant) else None
    return None


def _suffix_type(name: str | None) -> str | None:
    if not name:
        return None
    if name.startswith(("is_", "has_")):
        return "bool"
    if name.startswith(("n_", "num_")):
        return "int"
    if name.endswith("_path"):
        return "str"
    return None


@dataclass
class _SlotView:
    kind: str  # "param" | "return" | "variable"
    name: str | None
    func_name: str | None = None
    param_pos: int | None = None  # position among slot-bearing params
    default: ast.expr | None = None
    returns: list[ast.expr] = field(default_factory=list)
    value: ast.expr | None = None


_ANN_MARKER = re.compile(r"(->\s*|:\s*)<extra_id_\d+>")


def _demask(text: str) -> str:
    return _ANN_MARKER.sub("", text)


class _ReturnCollector(ast.NodeVisitor):
    """Return expressions of one function, not descending into nested defs."""

    def __init__(self):
        self.returns: list[ast.expr] = []
        self._depth = 0

    def visit_FunctionDef(self, node):
        self._visit_func(node)

    def visit_AsyncFunctionDef(self, node):
        self._visit_func(node)

    def _visit_func(self, node):
        if self._depth == 0:
            self._depth += 1
            for stmt in node.body:
                self.visit(stmt)
            self._depth -= 1

    def visit_Return(self, node):
        if node.value is not None:
            self.returns.append(node.value)


def _find_funcdef(tree: ast.AST):
    for node in ast.walk(tree):
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            return node
    return None


def _analyze_main(text: str, marker_base: int) -> dict[int, _SlotView]:
    """Map each marker index in the masked main code to a slot view carrying
    the information the rule cascade needs."""
    views: dict[int, _SlotView] = {}
    order: list[tuple[int, str, str | None]] = []  # (marker, kind, name)

    depth = 0
    pos = 0
    in_params = False
    for m in MARKER_RE.finditer(text):
        before = text[pos : m.start()]
        depth += before.count("(") - before.count(")")
        depth += before.count("[") - before.count("]")
        pos = m.end()
        idx = int(m.group(1))
        head = text[: m.start()].rstrip()
        if head.endswith("->"):
            order.append((idx, "return", None))
            continue
        name_match = re.search(r"([A-Za-z_]\w*)\s*:\s*$", text[: m.start()])
        name = name_match.group(1) if name_match else None
        if depth > 0:
            order.append((idx, "param", name))
        else:
            order.append((idx, "variable", name))

    try:
        tree = ast.parse(_demask(text))
    except SyntaxError:
        tree = None

    func = _find_funcdef(tree) if tree is not None else None
    func_name = func.name if func else None
    defaults: dict[str, ast.expr] = {}
    param_positions: dict[str, int] = {}
    returns: list[ast.expr] = []
    values: dict[str, ast.expr] = {}
    if func is not None:
        a = func.args
        ordered = list(a.posonlyargs) + list(a.args)
        with_defaults = ordered[len(ordered) - len(a.defaults) :] if a.defaults else []
        for arg, d in zip(with_defaults, a.defaults):
            defaults[arg.arg] = d
        for arg, d in zip(a.kwonlyargs, a.kw_defaults):
            if d is not None:
                defaults[arg.arg] = d
        pos_i = 0
        for arg in ordered:
            if arg.arg in ("self", "cls"):
                continue
            param_positions[arg.arg] = pos_i
            pos_i += 1
        collector = _ReturnCollector()
        collector.visit(func)
        returns = collector.returns
    if tree is not None:
        for node in ast.walk(tree):
            if isinstance(node, ast.Assign) and node.value is not None:
                for t in node.targets:
                    if isinstance(t, ast.Name):
                        values.setdefault(t.id, node.value)
            elif isinstance(node, ast.AnnAssign) and node.value is not None:
                if isinstance(node.target, ast.Name):
                    values.setdefault(node.target.id, node.value)

    for idx, kind, name in order:
        view = _SlotView(kind=kind, name=name, func_name=func_name)
        if kind == "param" and name:
            view.default = defaults.get(name)
            view.param_pos = param_positions.get(name)
        elif kind == "return":
            view.returns = returns
        elif kind == "variable" and name:
            view.value = values.get(name)
        views[idx] = view
    return views


@dataclass
class _SignatureIndex:
    func_returns: dict[str, str] = field(default_factory=dict)
    func_params: dict[str, dict[str, str]] = field(default_factory=dict)
    var_types: dict[str, str] = field(default_factory=dict)
    param_types: dict[str, str] = field(default_factory=dict)  # first typed param by name


def _parse_usee_segment(text: str) -> _SignatureIndex:
    index = _SignatureIndex()
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        try:
            tree = ast.parse(line)
        except SyntaxError:
            continue
        for node in tree.body:
            if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
                if node.returns is not None:
                    index.func_returns.setdefault(node.name, ast.unparse(node.returns))
                params = {}
                for arg in list(node.args.posonlyargs) + list(node.args.args) + list(
                    node.args.kwonlyargs
                ):
                    if arg.annotation is not None:
                        ann = ast.unparse(arg.annotation)
                        params[arg.arg] = ann
                        index.param_types.setdefault(arg.arg, ann)
                if params:
                    index.func_params.setdefault(node.name, params)
            elif isinstance(node, ast.AnnAssign) and isinstance(node.target, ast.Name):
                index.var_types.setdefault(node.target.id, ast.unparse(node.annotation))
    return index


def _expr_type(node: ast.expr, sigs: _SignatureIndex) -> str | None:
    lit = _literal_type(node)
    if lit:
        return lit
    if isinstance(node, ast.Call):
        name = None
        if isinstance(node.func, ast.Name):
            name = node.func.id
        elif isinstance(node.func, ast.Attribute):
            name = node.func.attr
        if name:
            return sigs.func_returns.get(name)
        return None
    if isinstance(node, ast.Name):
        return sigs.var_types.get(node.id)
    return None


_CALL_HEAD = re.compile(r"[A-Za-z_]\w*\s*\(")


def _find_calls(text: str, func_name: str) -> list[str]:
    """Balanced-paren argument lists of calls to func_name in the text."""
    out = []
    pattern = re.compile(rf"(?<![\w])({re.escape(func_name)})\s*\(")
    for m in pattern.finditer(text):
        depth = 1
        i = m.end()
        while i < len(text) and depth:
            if text[i] == "(":
                depth += 1
            elif text[i] == ")":
                depth -= 1
            i += 1
        if depth == 0:
            out.append(text[m.end() : i - 1])
    return out


def _argument_flow(view: _SlotView, users_text: str, sigs: _SignatureIndex) -> str | None:
    if not view.func_name or not view.name:
        return None
    for args_text in _find_calls(users_text, view.func_name):
        try:
            call = ast.parse(f"__probe__({args_text})", mode="eval").body
        except SyntaxError:
            continue
        expr = None
        for kw in call.keywords:
            if kw.arg == view.name:
                expr = kw.value
                break
        if expr is None and view.param_pos is not None and view.param_pos < len(call.args):
            candidate = call.args[view.param_pos]
            if not isinstance(candidate, ast.Starred):
                expr = candidate
        if expr is None:
            continue
        hit = _expr_type(expr, sigs)
        if hit:
            return hit
    return None


class HeuristicPredictor:
    """Deterministic rule cascade over the request text, first match wins:
    (1) literal type of a default value, initializer, or returned expression;
    (2) name-suffix conventions; (3) types copied from typed signatures
    visible in the usee segment, connected by name, returned call, or
    call-site argument flow; (4) Any."""

    name = "heuristic"
    wants_untyped_context = False

    def predict(self, request: PredictionRequest) -> PredictionResult:
        started = time.monotonic()
        views = _analyze_main(request.main_code, request.marker_base)
        sigs = _parse_usee_segment(request.usees)
        pieces: list[str] = []
        for k in range(request.marker_count):
            idx = request.marker_base + k
            view = views.get(idx)
            text = self._predict_slot(view, request, sigs) if view else None
            pieces.append(f"<extra_id_{idx}> {text or 'Any'}")
        raw = " ".join(pieces)
        types, diagnostics = parse_raw_output(raw, request.marker_count, request.marker_base)
        return PredictionResult(
            types=types,
            raw_output=raw,
            latency=time.monotonic() - started,
            diagnostics=diagnostics,
        )

    def _predict_slot(
        self, view: _SlotView, request: PredictionRequest, sigs: _SignatureIndex
    ) -> str | None:
        # Rule 1: literal evidence in the element itself.
        if view.kind == "param" and view.default is not None:
            lit = _literal_type(view.default)
            if lit:
                return lit
        if view.kind == "return":
            for expr in view.returns:
                lit = _literal_type(expr)
                if lit:
                    return lit
        if view.kind == "variable" and view.value is not None:
            lit = _literal_type(view.value)
            if lit:
                return lit
        # Rule 2: name suffixes.
        rule2 = _suffix_type(view.name if view.kind != "return" else view.func_name)
        if rule2:
            return rule2
        # Rule 3: typed signatures visible in context.
        if view.kind == "param" and view.name:
            hit = sigs.var_types.get(view.name) or sigs.param_types.get(view.name)
            if hit:
                return hit
            hit = _argument_flow(view, request.users, sigs)
            if hit:
                return hit
        if view.kind == "return":
            for expr in view.returns:
                hit = _expr_type(expr, sigs)
                if hit:
                    return hit
        if view.kind == "variable" and view.value is not None:
            hit = _expr_type(view.value, sigs)
            if hit:
                return hit
        return None


# ---------------------------------------------------------------------------
# wire backend


class HttpPredictor:
    """Client for an external model server speaking the JSON wire protocol."""

    wants_untyped_context = False

    def __init__(
        self,
        url: str,
        timeout: float = 30.0,
        retries: int = 2,
        session: requests.Session | None = None,
        max_in_flight: int = 8,
        untyped_context: bool = False,
    ):
        self.url = url
        self.timeout = timeout
        self.retries = retries
        self.session = session or requests.Session()
        self.wants_untyped_context = untyped_context
        self._slots = threading.Semaphore(max_in_flight)

    @property
    def name(self) -> str:
        return self.url

    def predict(self, request: PredictionRequest) -> PredictionResult:
        payload = {
            "preamble": request.preamble,
            "usees": request.usees,
            "main_code": request.main_code,
            "users": request.users,
            "marker_count": request.marker_count,
            "max_output_tokens": request.max_output_tokens,
            "beam_width": request.params.beam_width,
            "diversity_penalty": request.params.diversity_penalty,
        }
        started = time.monotonic()
        last_error: Exception | None = None
        with self._slots:
            for _ in range(self.retries + 1):
                try:
                    resp = self.session.post(self.url, json=payload, timeout=self.timeout)
                except requests.RequestException as e:
                    last_error = e
                    continue
                if resp.status_code >= 500:
                    last_error = BackendUnavailable(f"server error {resp.status_code}")
                    continue
                if resp.status_code != 200:
                    raise ProtocolError(f"unexpected status {resp.status_code}")
                try:
                    data = resp.json()
                    raw = data["raw_output"]
                except (ValueError, KeyError) as e:
                    raise ProtocolError(f"malformed response: {e}") from e
                types, diagnostics = parse_raw_output(
                    raw, request.marker_count, request.marker_base
                )
                return PredictionResult(
                    types=types,
                    raw_output=raw,
                    latency=time.monotonic() - started,
                    diagnostics=diagnostics,
                )
        raise BackendUnavailable(f"backend unreachable at {self.url}: {last_error}")


def make_backend(spec: str, *, timeout: float = 30.0, retries: int = 2):
    if spec == "heuristic":
        return HeuristicPredictor()
    if spec.startswith(("http://", "https://")):
        return HttpPredictor(spec, timeout=timeout, retries=retries)
    raise ValueError(f"unknown backend: {spec!r} (use 'heuristic' or a URL)")
