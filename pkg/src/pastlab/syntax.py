"""Abstract syntax, parser, and pretty-printer for pGCL programs.

The concrete grammar (comments run from '#' to end of line):

    program := stmt (";" stmt)*
    stmt    := "skip" | "exit" | "bot" | IDENT ":=" aexpr
             | "while" "(" bexpr ")" "{" program "}"
             | "if" "(" bexpr ")" "{" program "}" ("else" "{" program "}")?
             | "{" program "}" "[]" "{" program "}"
             | "{" program "}" "<" aexpr ">" "{" program "}"
    aexpr   := rational | IDENT | "-" aexpr | aexpr ("+"|"-"|"*") aexpr
             | "(" aexpr ")"
    rational:= INT ("/" INT)?
    bexpr   := "true" | "false" | aexpr cmp aexpr | "not" bexpr
             | bexpr ("and"|"or") bexpr | "(" bexpr ")"
    cmp     := "=" | "!=" | "<" | "<=" | ">" | ">="

"bot" is the empty program (the terminal residue of execution); it is
accepted so that every run-time program term, not just source programs,
survives a print/parse round trip.

Statement sequences are right-nested, so structural equality of parsed
terms is well defined.  Probabilities in a probabilistic choice are
arithmetic expressions evaluated at run time; rational literals are exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Union


# ---------------------------------------------------------------------------
# Arithmetic and boolean expressions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RatLit:
    value: Fraction

    def __repr__(self):
        return f"RatLit({self.value})"


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "AExpr"


@dataclass(frozen=True)
class ABin:
    op: str  # '+', '-', '*'
    left: "AExpr"
    right: "AExpr"


AExpr = Union[RatLit, Var, Neg, ABin]


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class Cmp:
    op: str  # '=', '!=', '<', '<=', '>', '>='
    left: AExpr
    right: AExpr


@dataclass(frozen=True)
class Not:
    operand: "BExpr"


@dataclass(frozen=True)
class BBin:
    op: str  # 'and', 'or'
    left: "BExpr"
    right: "BExpr"


BExpr = Union[BoolLit, Cmp, Not, BBin]


# ---------------------------------------------------------------------------
# Programs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Empty:
    """The empty program: execution has nothing left to do."""


@dataclass(frozen=True)
class Skip:
    pass


@dataclass(frozen=True)
class Exit:
    pass


@dataclass(frozen=True)
class Assign:
    var: str
    expr: AExpr


@dataclass(frozen=True)
class Seq:
    first: "Program"
    rest: "Program"


@dataclass(frozen=True)
class ProbChoice:
    left: "Program"
    prob: AExpr
    right: "Program"


@dataclass(frozen=True)
class NondetChoice:
    left: "Program"
    right: "Program"


@dataclass(frozen=True)
class While:
    guard: BExpr
    body: "Program"


@dataclass(frozen=True)
class If:
    guard: BExpr
    then: "Program"
    orelse: "Program"


Program = Union[Empty, Skip, Exit, Assign, Seq, ProbChoice, NondetChoice, While, If]

EMPTY = Empty()
SKIP = Skip()
EXIT = Exit()


def seq_of(stmts) -> Program:
    """Right-nest a non-empty list of statements into a Seq chain."""
    stmts = list(stmts)
    if not stmts:
        return EMPTY
    prog = stmts[-1]
    for s in reversed(stmts[:-1]):
        prog = Seq(s, prog)
    return prog


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

class ParseError(ValueError):
    """Syntax error with position and the set of tokens that were expected."""

    def __init__(self, message, line, column, expected=()):
        self.line = line
        self.column = column
        self.expected = tuple(expected)
        loc = f"line {line}, column {column}"
        if expected:
            message = f"{message} at {loc} (expected one of: {', '.join(expected)})"
        else:
            message = f"{message} at {loc}"
        super().__init__(message)


KEYWORDS = {"skip", "exit", "bot", "while", "if", "else", "true", "false",
            "not", "and", "or"}

_PUNCT = ("[]", ":=", "!=", "<=", ">=", ";", "{", "}", "(", ")",
          "<", ">", "=", "+", "-", "*", "/")


@dataclass(frozen=True)
class Token:
    kind: str   # 'ident', 'int', 'punct', 'kw', 'eof'
    text: str
    line: int
    column: int


def tokenize(source: str):
    tokens = []
    line, col = 1, 1
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and source[i] != "\n":
                i += 1
            continue
        if ch.isascii() and ch.isdigit():
            j = i
            while j < n and source[j].isascii() and source[j].isdigit():
                j += 1
            tokens.append(Token("int", source[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isascii() and ch.isalpha():
            j = i
            while j < n and source[j].isascii() \
                    and (source[j].isalnum() or source[j] == "_"):
                j += 1
            text = source[i:j]
            kind = "kw" if text in KEYWORDS else "ident"
            tokens.append(Token(kind, text, line, col))
            col += j - i
            i = j
            continue
        for p in _PUNCT:
            if source.startswith(p, i):
                tokens.append(Token("punct", p, line, col))
                col += len(p)
                i += len(p)
                break
        else:
            raise ParseError(f"unexpected character {ch!r}", line, col)
    tokens.append(Token("eof", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    @property
    def cur(self) -> Token:
        return self.tokens[self.pos]

    def error(self, expected):
        tok = self.cur
        what = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise ParseError(f"unexpected {what}", tok.line, tok.column, expected)

    def at(self, text) -> bool:
        return self.cur.text == text and self.cur.kind in ("punct", "kw")

    def eat(self, text) -> Token:
        if not self.at(text):
            self.error([repr(text)])
        tok = self.cur
        self.pos += 1
        return tok

    # -- programs ----------------------------------------------------------

    def program(self) -> Program:
        stmts = [self.stmt()]
        while self.at(";"):
            self.eat(";")
            stmts.append(self.stmt())
        return seq_of(stmts)

    def stmt(self) -> Program:
        tok = self.cur
        if self.at("skip"):
            self.eat("skip")
            return SKIP
        if self.at("exit"):
            self.eat("exit")
            return EXIT
        if self.at("bot"):
            self.eat("bot")
            return EMPTY
        if self.at("while"):
            self.eat("while")
            self.eat("(")
            guard = self.bexpr()
            self.eat(")")
            self.eat("{")
            body = self.program()
            self.eat("}")
            return While(guard, body)
        if self.at("if"):
            self.eat("if")
            self.eat("(")
            guard = self.bexpr()
            self.eat(")")
            self.eat("{")
            then = self.program()
            self.eat("}")
            orelse: Program = EMPTY
            if self.at("else"):
                self.eat("else")
                self.eat("{")
                orelse = self.program()
                self.eat("}")
            return If(guard, then, orelse)
        if self.at("{"):
            self.eat("{")
            left = self.program()
            self.eat("}")
            if self.at("[]"):
                self.eat("[]")
                self.eat("{")
                right = self.program()
                self.eat("}")
                return NondetChoice(left, right)
            if self.at("<"):
                self.eat("<")
                prob = self.aexpr()
                self.eat(">")
                self.eat("{")
                right = self.program()
                self.eat("}")
                return ProbChoice(left, prob, right)
            self.error(["'[]'", "'<'"])
        if tok.kind == "ident":
            self.pos += 1
            self.eat(":=")
            return Assign(tok.text, self.aexpr())
        self.error(["statement"])

    # -- arithmetic expressions (precedence: unary -, then *, then + -) -----

    def aexpr(self) -> AExpr:
        return self.additive()

    def additive(self) -> AExpr:
        left = self.multiplicative()
        while self.at("+") or self.at("-"):
            op = self.cur.text
            self.pos += 1
            left = ABin(op, left, self.multiplicative())
        return left

    def multiplicative(self) -> AExpr:
        left = self.unary()
        while self.at("*"):
            self.eat("*")
            left = ABin("*", left, self.unary())
        return left

    def unary(self) -> AExpr:
        if self.at("-"):
            self.eat("-")
            return Neg(self.unary())
        return self.atom()

    def atom(self) -> AExpr:
        tok = self.cur
        if tok.kind == "int":
            self.pos += 1
            num = int(tok.text)
            if self.at("/"):
                self.eat("/")
                dtok = self.cur
                if dtok.kind != "int":
                    self.error(["integer denominator"])
                self.pos += 1
                den = int(dtok.text)
                if den == 0:
                    raise ParseError("malformed rational literal: zero denominator",
                                     dtok.line, dtok.column)
                return RatLit(Fraction(num, den))
            return RatLit(Fraction(num))
        if tok.kind == "ident":
            self.pos += 1
            return Var(tok.text)
        if self.at("("):
            self.eat("(")
            inner = self.aexpr()
            self.eat(")")
            return inner
        self.error(["rational", "identifier", "'-'", "'('"])

    # -- boolean expressions (precedence: not, and, or) ----------------------

    def bexpr(self) -> BExpr:
        left = self.b_and()
        while self.at("or"):
            self.eat("or")
            left = BBin("or", left, self.b_and())
        return left

    def b_and(self) -> BExpr:
        left = self.b_not()
        while self.at("and"):
            self.eat("and")
            left = BBin("and", left, self.b_not())
        return left

    def b_not(self) -> BExpr:
        if self.at("not"):
            self.eat("not")
            return Not(self.b_not())
        return self.b_atom()

    def b_atom(self) -> BExpr:
        if self.at("true"):
            self.eat("true")
            return BoolLit(True)
        if self.at("false"):
            self.eat("false")
            return BoolLit(False)
        if self.at("("):
            # Could be a parenthesised bexpr or the left arm of a comparison.
            mark = self.pos
            self.eat("(")
            try:
                inner = self.bexpr()
                self.eat(")")
                return inner
            except ParseError:
                self.pos = mark
        left = self.aexpr()
        for op in ("!=", "<=", ">=", "=", "<", ">"):
            if self.at(op):
                self.eat(op)
                return Cmp(op, left, self.aexpr())
        self.error(["comparison operator"])


def parse(source: str) -> Program:
    """Parse pGCL source text into a Program, or raise ParseError."""
    parser = _Parser(tokenize(source))
    prog = parser.program()
    if parser.cur.kind != "eof":
        parser.error(["';'", "end of input"])
    return prog


def parse_aexpr(source: str) -> AExpr:
    parser = _Parser(tokenize(source))
    expr = parser.aexpr()
    if parser.cur.kind != "eof":
        parser.error(["end of input"])
    return expr


def parse_bexpr(source: str) -> BExpr:
    parser = _Parser(tokenize(source))
    expr = parser.bexpr()
    if parser.cur.kind != "eof":
        parser.error(["end of input"])
    return expr


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------

def print_rational(q: Fraction) -> str:
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def _paren_if(text, cond):
    return f"({text})" if cond else text


def print_aexpr(e: AExpr) -> str:
    if isinstance(e, RatLit):
        if e.value < 0:
            return f"(0 - {print_rational(-e.value)})"
        return print_rational(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"-{_paren_if(print_aexpr(e.operand), isinstance(e.operand, ABin))}"
    if isinstance(e, ABin):
        left = _paren_if(print_aexpr(e.left),
                         isinstance(e.left, ABin) and e.op == "*"
                         and e.left.op in ("+", "-"))
        # Parenthesise right operands whenever reparsing could reassociate.
        right_needs = isinstance(e.right, ABin) and (
            e.op in ("-", "*") or e.right.op in ("+", "-"))
        right = _paren_if(print_aexpr(e.right), right_needs)
        return f"{left} {e.op} {right}"
    raise TypeError(f"not an arithmetic expression: {e!r}")


def print_bexpr(b: BExpr) -> str:
    if isinstance(b, BoolLit):
        return "true" if b.value else "false"
    if isinstance(b, Cmp):
        return f"{print_aexpr(b.left)} {b.op} {print_aexpr(b.right)}"
    if isinstance(b, Not):
        inner = print_bexpr(b.operand)
        if isinstance(b.operand, (BBin, Cmp)):
            inner = f"({inner})"
        return f"not {inner}"
    if isinstance(b, BBin):
        left = print_bexpr(b.left)
        if isinstance(b.left, BBin) and b.op == "and" and b.left.op == "or":
            left = f"({left})"
        right = print_bexpr(b.right)
        if isinstance(b.right, BBin):
            right = f"({right})"
        return f"{left} {b.op} {right}"
    raise TypeError(f"not a boolean expression: {b!r}")


def print_program(p: Program) -> str:
    """Render a Program as canonical single-line concrete syntax."""
    if isinstance(p, Empty):
        return "bot"
    if isinstance(p, Skip):
        return "skip"
    if isinstance(p, Exit):
        return "exit"
    if isinstance(p, Assign):
        return f"{p.var} := {print_aexpr(p.expr)}"
    if isinstance(p, Seq):
        return f"{print_program(p.first)}; {print_program(p.rest)}"
    if isinstance(p, ProbChoice):
        return (f"{{ {print_program(p.left)} }} <{print_aexpr(p.prob)}> "
                f"{{ {print_program(p.right)} }}")
    if isinstance(p, NondetChoice):
        return f"{{ {print_program(p.left)} }} [] {{ {print_program(p.right)} }}"
    if isinstance(p, While):
        return f"while ({print_bexpr(p.guard)}) {{ {print_program(p.body)} }}"
    if isinstance(p, If):
        text = f"if ({print_bexpr(p.guard)}) {{ {print_program(p.then)} }}"
        if not isinstance(p.orelse, Empty):
            text += f" else {{ {print_program(p.orelse)} }}"
        return text
    raise TypeError(f"not a program: {p!r}")
