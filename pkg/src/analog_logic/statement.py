"""Logic statement AST, the textual DSL, and grounding against a scene.

Grammar (EBNF):

    stmt    := or
    or      := and ("|" and)*
    and     := unary ("&" unary)*
    unary   := "!" unary | quant | atom | "(" stmt ")"
    quant   := ("forall" | "exists") "[" float "]" ident "in"
               "{" ident ("," ident)* "}" ":" unary
    atom    := ident "(" ident ("," ident)* (";" ctxargs)? ")"
    ctxargs := (string | ident) ("," (string | ident))*

Connective precedence is Not > And > Or; parentheses override.  A text
context is an inline string literal; image contexts are identifiers bound
by the scene.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .domain_tree import DomainTree

ATTRS = ("x", "y", "w", "h")

# name -> (arity, affecting attribute set)
PRED_SPECS = {
    "leftof": (2, ("x", "w")),
    "rightof": (2, ("x", "w")),
    "above": (2, ("y", "h")),
    "below": (2, ("y", "h")),
    "category": (1, ("x", "y", "w", "h")),
}

Pair = tuple[str, str]  # (entity id, attribute name)


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


class ValidationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class CtxArg:
    kind: str  # "text" | "ref"
    value: str


@dataclass(frozen=True)
class Pred:
    name: str
    args: tuple[str, ...]
    contexts: tuple[CtxArg, ...] = ()
    span: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class And:
    items: tuple
    span: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Or:
    items: tuple
    span: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Not:
    item: object
    span: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Quant:
    kind: str  # "forall" | "exists"
    var: str
    elems: tuple[str, ...]
    threshold: float
    body: object
    span: tuple[int, int] = field(default=(0, 0), compare=False)


# ---------------------------------------------------------------------------
# Tokenizer / parser

_KEYWORDS = ("forall", "exists", "in")
_PUNCT = "&|!(){}[],;:"


@dataclass(frozen=True)
class _Tok:
    kind: str  # ident, keyword, float, string, punct, eof
    text: str
    line: int
    col: int


def _tokenize(src: str) -> list[_Tok]:
    toks = []
    line, col, i = 1, 1, 0
    n = len(src)
    while i < n:
        c = src[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c.isspace():
            i += 1
            col += 1
            continue
        start_col = col
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            word = src[i:j]
            kind = "keyword" if word in _KEYWORDS else "ident"
            toks.append(_Tok(kind, word, line, start_col))
            col += j - i
            i = j
        elif c.isdigit() or (c == "." and i + 1 < n and src[i + 1].isdigit()):
            j = i
            seen_dot = False
            while j < n and (src[j].isdigit() or (src[j] == "." and not seen_dot)):
                seen_dot = seen_dot or src[j] == "."
                j += 1
            toks.append(_Tok("float", src[i:j], line, start_col))
            col += j - i
            i = j
        elif c == '"':
            j = i + 1
            while j < n and src[j] != '"':
                if src[j] == "\n":
                    raise ParseError("unterminated string literal", line, start_col)
                j += 1
            if j >= n:
                raise ParseError("unterminated string literal", line, start_col)
            toks.append(_Tok("string", src[i + 1 : j], line, start_col))
            col += j - i + 1
            i = j + 1
        elif c in _PUNCT:
            toks.append(_Tok("punct", c, line, start_col))
            i += 1
            col += 1
        else:
            raise ParseError(f"unexpected character {c!r}", line, start_col)
    toks.append(_Tok("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, toks: list[_Tok]):
        self.toks = toks
        self.pos = 0

    def peek(self) -> _Tok:
        return self.toks[self.pos]

    def next(self) -> _Tok:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, kind: str, text: str | None = None) -> _Tok:
        t = self.peek()
        if t.kind != kind or (text is not None and t.text != text):
            want = text or kind
            raise ParseError(f"expected {want!r}, found {t.text or 'end of input'!r}", t.line, t.col)
        return self.next()

    def at_punct(self, ch: str) -> bool:
        t = self.peek()
        return t.kind == "punct" and t.text == ch

    # grammar rules ---------------------------------------------------

    def stmt(self):
        return self.or_()

    def or_(self):
        first = self.and_()
        items = [first]
        while self.at_punct("|"):
            self.next()
            items.append(self.and_())
        if len(items) == 1:
            return first
        return Or(tuple(items), span=_span_of(first))

    def and_(self):
        first = self.unary()
        items = [first]
        while self.at_punct("&"):
            self.next()
            items.append(self.unary())
        if len(items) == 1:
            return first
        return And(tuple(items), span=_span_of(first))

    def unary(self):
        t = self.peek()
        if t.kind == "punct" and t.text == "!":
            self.next()
            return Not(self.unary(), span=(t.line, t.col))
        if t.kind == "keyword" and t.text in ("forall", "exists"):
            return self.quant()
        if t.kind == "punct" and t.text == "(":
            self.next()
            node = self.stmt()
            self.expect("punct", ")")
            return node
        if t.kind == "ident":
            return self.atom()
        raise ParseError(f"expected a predicate, quantifier or '(', found {t.text or 'end of input'!r}", t.line, t.col)

    def quant(self):
        t = self.next()  # forall | exists
        self.expect("punct", "[")
        ft = self.expect("float")
        threshold = float(ft.text)
        if not 0.0 <= threshold <= 1.0:
            raise ParseError(f"quantifier threshold {threshold} outside [0, 1]", ft.line, ft.col)
        self.expect("punct", "]")
        var = self.expect("ident").text
        self.expect("keyword", "in")
        self.expect("punct", "{")
        elems = [self.expect("ident").text]
        while self.at_punct(","):
            self.next()
            elems.append(self.expect("ident").text)
        self.expect("punct", "}")
        self.expect("punct", ":")
        body = self.unary()
        return Quant(t.text, var, tuple(elems), threshold, body, span=(t.line, t.col))

    def atom(self):
        name_tok = self.expect("ident")
        name = name_tok.text
        if name not in PRED_SPECS:
            raise ParseError(f"unknown predicate {name!r}", name_tok.line, name_tok.col)
        arity = PRED_SPECS[name][0]
        self.expect("punct", "(")
        args = [self.expect("ident").text]
        while self.at_punct(","):
            self.next()
            args.append(self.expect("ident").text)
        contexts = []
        if self.at_punct(";"):
            self.next()
            contexts.append(self._ctxarg())
            while self.at_punct(","):
                self.next()
                contexts.append(self._ctxarg())
        self.expect("punct", ")")
        if len(args) != arity:
            raise ParseError(
                f"predicate {name!r} takes {arity} argument{'s' if arity != 1 else ''}, got {len(args)}",
                name_tok.line,
                name_tok.col,
            )
        return Pred(name, tuple(args), tuple(contexts), span=(name_tok.line, name_tok.col))

    def _ctxarg(self) -> CtxArg:
        t = self.peek()
        if t.kind == "string":
            self.next()
            return CtxArg("text", t.text)
        if t.kind == "ident":
            self.next()
            return CtxArg("ref", t.text)
        raise ParseError(f"expected a context identifier or string, found {t.text!r}", t.line, t.col)


def _span_of(node) -> tuple[int, int]:
    return getattr(node, "span", (0, 0))


def parse_statement(text: str):
    """Parse DSL text into a statement AST.

    Raises ParseError (with line/column) on malformed input, unknown
    predicate names, or arity mismatches.
    """
    p = _Parser(_tokenize(text))
    node = p.stmt()
    t = p.peek()
    if t.kind != "eof":
        raise ParseError(f"unexpected trailing input {t.text!r}", t.line, t.col)
    return node


# ---------------------------------------------------------------------------
# Pretty printer (inverse of the parser up to whitespace)

_PREC = {"or": 0, "and": 1, "unary": 2}


def pretty(node) -> str:
    return _pp(node, 0)


def _pp(node, prec: int) -> str:
    if isinstance(node, Pred):
        args = ", ".join(node.args)
        if node.contexts:
            ctx = ", ".join(f'"{c.value}"' if c.kind == "text" else c.value for c in node.contexts)
            return f"{node.name}({args}; {ctx})"
        return f"{node.name}({args})"
    if isinstance(node, And):
        body = " & ".join(_pp(x, _PREC["and"] + 1) for x in node.items)
        return f"({body})" if prec > _PREC["and"] else body
    if isinstance(node, Or):
        body = " | ".join(_pp(x, _PREC["or"] + 1) for x in node.items)
        return f"({body})" if prec > _PREC["or"] else body
    if isinstance(node, Not):
        return "!" + _pp(node.item, _PREC["unary"] + 1)
    if isinstance(node, Quant):
        elems = ", ".join(node.elems)
        body = _pp(node.body, _PREC["unary"] + 1)
        text = f"{node.kind}[{_fmt_float(node.threshold)}] {node.var} in {{{elems}}}: {body}"
        return f"({text})" if prec > _PREC["unary"] else text
    raise TypeError(f"not a statement node: {node!r}")


def _fmt_float(x: float) -> str:
    s = repr(float(x))
    return s


# ---------------------------------------------------------------------------
# Entities, contexts, grounded statements


@dataclass(frozen=True)
class Entity:
    """A scene entity: either fully fixed (constant) or partly open (variable).

    `attrs` maps each of x, y, w, h to a fixed integer or a DomainTree of
    candidate values.
    """

    id: str
    kind: str  # "constant" | "variable"
    attrs: dict

    def is_fixed(self, attr: str) -> bool:
        return not isinstance(self.attrs[attr], DomainTree)

    def interval(self, attr: str) -> tuple[int, int]:
        v = self.attrs[attr]
        if isinstance(v, DomainTree):
            return v.root
        return (v, v)


@dataclass(frozen=True)
class Context:
    id: str
    kind: str  # "image" | "text"
    payload: object


@dataclass(frozen=True)
class GroundedAtom:
    """A concrete predicate occurrence with resolved arguments."""

    name: str
    args: tuple[str, ...]
    text: str | None
    image_contexts: tuple[str, ...]
    scope: tuple[Pair, ...]        # argument attributes covered by its box
    free_pairs: tuple[Pair, ...]   # scope pairs that are tree-valued, global order
    base_box: dict                 # pair -> (lo, hi); fixed attrs are singletons

    @property
    def affecting(self) -> tuple[str, ...]:
        return PRED_SPECS[self.name][1]


@dataclass(frozen=True)
class GroundedStatement:
    """A statement resolved against a scene, ready for inference.

    `tree` is the connective skeleton with quantifiers expanded per set
    element: nodes are ("atom", i), ("min", children), ("max", children),
    ("not", child) or ("thresh", "min"|"max", t, children).
    """

    scene: object
    ast: object
    atoms: tuple[GroundedAtom, ...]
    tree: object
    free_pairs: tuple[Pair, ...]
    trees: dict
    evaluation_only: bool

    def pretty(self) -> str:
        return pretty(self.ast)

    def has_negation(self) -> bool:
        return _tree_has_not(self.tree)


def _tree_has_not(node) -> bool:
    tag = node[0]
    if tag == "atom":
        return False
    if tag == "not":
        return True
    kids = node[3] if tag == "thresh" else node[1]
    return any(_tree_has_not(c) for c in kids)


def validate(ast, scene) -> GroundedStatement:
    """Resolve a parsed statement against a scene.

    The scene must expose `entities` (ordered mapping id -> Entity) and
    `contexts` (mapping id -> Context).  The free attribute set of the
    result is exactly the union over atoms of the affecting attributes
    restricted to variable entities.
    """
    entities = scene.entities
    contexts = scene.contexts
    atoms: list[GroundedAtom] = []

    entity_order = {eid: i for i, eid in enumerate(entities)}
    attr_order = {a: i for i, a in enumerate(ATTRS)}

    def pair_key(pair: Pair):
        return (entity_order[pair[0]], attr_order[pair[1]])

    def build_atom(pred: Pred, env: dict) -> int:
        args = tuple(env.get(a, a) for a in pred.args)
        for a in args:
            if a not in entities:
                raise ValidationError(f"unresolved id {a!r} in {pred.name}")
        text = None
        images = []
        for c in pred.contexts:
            if c.kind == "text":
                if text is not None:
                    raise ValidationError(f"{pred.name} carries more than one text context")
                text = c.value
            else:
                if c.value not in contexts:
                    raise ValidationError(f"unresolved context id {c.value!r}")
                if contexts[c.value].kind != "image":
                    raise ValidationError(f"context {c.value!r} is not an image context")
                images.append(c.value)
        affect = PRED_SPECS[pred.name][1]
        scope = []
        base_box = {}
        free = []
        for a in args:
            ent = entities[a]
            for attr in affect:
                pair = (a, attr)
                if pair in base_box:
                    continue
                scope.append(pair)
                base_box[pair] = ent.interval(attr)
                if not ent.is_fixed(attr):
                    free.append(pair)
        free.sort(key=pair_key)
        atoms.append(
            GroundedAtom(pred.name, args, text, tuple(images), tuple(scope), tuple(free), base_box)
        )
        return len(atoms) - 1

    def build(node, env: dict, depth: int):
        if isinstance(node, Pred):
            return ("atom", build_atom(node, env))
        if isinstance(node, And):
            return ("min", tuple(build(x, env, depth) for x in node.items))
        if isinstance(node, Or):
            return ("max", tuple(build(x, env, depth) for x in node.items))
        if isinstance(node, Not):
            return ("not", build(node.item, env, depth))
        if isinstance(node, Quant):
            if depth > 0:
                raise ValidationError("nested quantifiers are not supported")
            if node.var in entities:
                raise ValidationError(f"quantifier variable {node.var!r} shadows a scene entity")
            for e in node.elems:
                if e not in entities:
                    raise ValidationError(f"unresolved id {e!r} in quantifier set")
            kids = tuple(build(node.body, {**env, node.var: e}, depth + 1) for e in node.elems)
            op = "min" if node.kind == "forall" else "max"
            return ("thresh", op, node.threshold, kids)
        raise TypeError(f"not a statement node: {node!r}")

    tree = build(ast, {}, 0)
    seen = set()
    free_pairs = []
    for atom in atoms:
        for pair in atom.free_pairs:
            if pair not in seen:
                seen.add(pair)
                free_pairs.append(pair)
    free_pairs.sort(key=pair_key)
    trees = {pair: entities[pair[0]].attrs[pair[1]] for pair in free_pairs}
    return GroundedStatement(
        scene=scene,
        ast=ast,
        atoms=tuple(atoms),
        tree=tree,
        free_pairs=tuple(free_pairs),
        trees=trees,
        evaluation_only=not free_pairs,
    )
