"""Text form of process trees.

Grammar (whitespace allowed between tokens):

    tree  ::= 'name' | TAU | SEQ(tree, tree, ...) | XOR(tree, tree, ...)
            | AND(tree, tree, ...) | LOOP(tree, tree)

Action names are single-quoted; a backslash escapes quotes and backslashes
inside a name. The canonical serialization uses no whitespace, so
``parse(serialize(t)) == t`` for every valid tree.
"""

from __future__ import annotations

from .model import InvalidTreeError, Operator, ProcessTree, leaf, tau

_OPERATORS = {"SEQ": Operator.SEQ, "XOR": Operator.XOR, "AND": Operator.AND, "LOOP": Operator.LOOP}
_NAMES = {v: k for k, v in _OPERATORS.items()}


class TreeParseError(ValueError):
    """Syntax error in process-tree text; ``offset`` is the byte position."""

    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class _Parser:
    def __init__(self, text: str) -> None:
        self.text = text
        self.pos = 0

    def error(self, message: str) -> TreeParseError:
        return TreeParseError(message, self.pos)

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, char: str) -> None:
        self.skip_ws()
        if self.peek() != char:
            raise self.error(f"expected {char!r}, found {self.peek()!r}" if self.peek() else f"expected {char!r}, found end of input")
        self.pos += 1

    def parse_tree(self) -> ProcessTree:
        self.skip_ws()
        ch = self.peek()
        if ch == "'":
            return leaf(self.parse_quoted_name())
        if ch.isalpha():
            word_start = self.pos
            while self.pos < len(self.text) and self.text[self.pos].isalpha():
                self.pos += 1
            word = self.text[word_start:self.pos]
            if word == "TAU":
                return tau()
            if word in _OPERATORS:
                children = self.parse_children()
                try:
                    return ProcessTree(_OPERATORS[word], children=tuple(children))
                except InvalidTreeError as exc:
                    self.pos = word_start
                    raise self.error(str(exc)) from exc
            self.pos = word_start
            raise self.error(f"unknown operator {word!r}")
        raise self.error("expected operator, TAU, or quoted action name")

    def parse_children(self) -> list[ProcessTree]:
        self.expect("(")
        children = [self.parse_tree()]
        while True:
            self.skip_ws()
            if self.peek() == ",":
                self.pos += 1
                children.append(self.parse_tree())
            elif self.peek() == ")":
                self.pos += 1
                return children
            else:
                raise self.error(f"expected ',' or ')', found {self.peek()!r}" if self.peek() else "unterminated operator, expected ')'")

    def parse_quoted_name(self) -> str:
        self.expect("'")
        out: list[str] = []
        while True:
            if self.pos >= len(self.text):
                raise self.error("unterminated action name")
            ch = self.text[self.pos]
            if ch == "\\":
                if self.pos + 1 >= len(self.text):
                    raise self.error("dangling escape in action name")
                out.append(self.text[self.pos + 1])
                self.pos += 2
            elif ch == "'":
                self.pos += 1
                name = "".join(out)
                if not name or name != name.strip():
                    raise self.error(f"invalid action name {name!r}")
                return name
            else:
                out.append(ch)
                self.pos += 1


def parse_process_tree(text: str) -> ProcessTree:
    """Parse the text grammar into a :class:`ProcessTree`.

    Raises :class:`TreeParseError` with the byte offset of the first problem,
    including operator arity violations.
    """
    parser = _Parser(text)
    tree = parser.parse_tree()
    parser.skip_ws()
    if parser.pos != len(text):
        raise parser.error("trailing input after tree")
    return tree


def _quote(name: str) -> str:
    return "'" + name.replace("\\", "\\\\").replace("'", "\\'") + "'"


def serialize_process_tree(tree: ProcessTree) -> str:
    """Canonical text form: single quotes, no whitespace; inverse of parsing."""
    if tree.op is Operator.LEAF:
        assert tree.label is not None
        return _quote(tree.label.name)
    if tree.op is Operator.TAU:
        return "TAU"
    inner = ",".join(serialize_process_tree(c) for c in tree.children)
    return f"{_NAMES[tree.op]}({inner})"
