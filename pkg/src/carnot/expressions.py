"""Tiny polynomial expression parser and JSON (de)serialization.

Coordinate variables are written ``p<i><k>`` (single digits) or
``p<i>_<k>`` for the coordinate with index ``i`` in layer ``k``; they map
to the internal label ``(k, i)``.  Supported syntax: ``+ - * ^``, integer
and rational constants (``3``, ``1/2``), parentheses.
"""

from __future__ import annotations

import re
from fractions import Fraction

from .poly import PolyFunction

_TOKEN = re.compile(
    r"\s*(?:(?P<var>p\d_?\d)|(?P<num>\d+(?:/\d+)?)|(?P<op>[-+*^()]))"
)


def _tokenize(text):
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"cannot parse polynomial at: {text[pos:]!r}")
        pos = m.end()
        if m.group("var"):
            digits = [c for c in m.group("var")[1:] if c.isdigit()]
            i, k = int(digits[0]), int(digits[1])
            out.append(("var", (k, i)))
        elif m.group("num"):
            out.append(("num", Fraction(m.group("num"))))
        else:
            out.append(("op", m.group("op")))
    return out


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else (None, None)

    def take(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def parse_sum(self):
        value = self.parse_product()
        while self.peek() == ("op", "+") or self.peek() == ("op", "-"):
            _, op = self.take()
            rhs = self.parse_product()
            value = value + rhs if op == "+" else value - rhs
        return value

    def parse_product(self):
        value = self.parse_power()
        while True:
            kind, tok = self.peek()
            if (kind, tok) == ("op", "*"):
                self.take()
                value = value * self.parse_power()
            elif kind in ("var", "num") or (kind, tok) == ("op", "("):
                value = value * self.parse_power()
            else:
                return value

    def parse_power(self):
        base = self.parse_atom()
        if self.peek() == ("op", "^"):
            self.take()
            kind, tok = self.take()
            if kind != "num" or tok.denominator != 1:
                raise ValueError("exponent must be a nonnegative integer")
            return base ** int(tok)
        return base

    def parse_atom(self):
        kind, tok = self.take()
        if kind == "var":
            return PolyFunction.variable(tok)
        if kind == "num":
            return PolyFunction.constant(tok)
        if (kind, tok) == ("op", "("):
            inner = self.parse_sum()
            if self.take() != ("op", ")"):
                raise ValueError("unbalanced parentheses")
            return inner
        if (kind, tok) == ("op", "-"):
            return -self.parse_atom()
        if (kind, tok) == ("op", "+"):
            return self.parse_atom()
        raise ValueError(f"unexpected token {tok!r}")


def parse_poly(text: str) -> PolyFunction:
    text = text.strip()
    if text.startswith("poly:"):
        text = text[len("poly:"):]
    parser = _Parser(_tokenize(text))
    value = parser.parse_sum()
    if parser.pos != len(parser.tokens):
        raise ValueError(f"trailing input in polynomial: {text!r}")
    return value


def poly_to_json(poly: PolyFunction):
    """Exponent-coefficient list form of a coordinate polynomial."""
    terms = []
    for mono, coeff in sorted(poly.terms.items(), key=lambda kv: repr(kv[0])):
        terms.append(
            {
                "mono": [[list(var), exp] for var, exp in mono],
                "num": coeff.numerator,
                "den": coeff.denominator,
            }
        )
    return terms


def poly_from_json(data) -> PolyFunction:
    out = PolyFunction.zero()
    for term in data:
        piece = PolyFunction.constant(Fraction(term["num"], term.get("den", 1)))
        for var, exp in term["mono"]:
            piece = piece * PolyFunction.variable(tuple(var), exp)
        out = out + piece
    return out
