"""Shared test grammars and vocabularies.

Five grammars cover the behaviours that matter: nesting (Dyck-1/2),
left recursion (arithmetic), mixed structures (a JSON subset), and a
statement-oriented C-like grammar with keywords.  Vocabularies follow
one recipe: every byte string up to a length cap over the grammar's
alphabet (sampled at length 3 for the two larger alphabets to keep the
naive-mask baseline tractable), a seeded handful of longer tokens, one
empty token, one byte-duplicate, and an end-of-sequence special.
"""

from __future__ import annotations

import itertools
import random

import pytest

from cfgzip import Cfg, Vocabulary, parse_grammar, validate

DYCK1 = 'root ::= "(" root ")" root | ""'

DYCK2 = 'root ::= "(" root ")" root | "[" root "]" root | ""'

ARITH = """
expr ::= expr "+" term | term
term ::= term "*" factor | factor
factor ::= "(" expr ")" | "n"
"""

JSON_MINI = """
value ::= string | number | array | object
string ::= "\\"" chars "\\""
chars ::= "" | char chars
char ::= "a" | "b"
number ::= "-" digits | digits
digits ::= digit | digit digits
digit ::= "0" | "1"
array ::= "[" "]" | "[" elements "]"
elements ::= value | value "," elements
object ::= "{" "}" | "{" members "}"
members ::= pair | pair "," members
pair ::= string ":" value
"""

MINI_C = """
program ::= stmt | stmt program
stmt ::= ";" | assign ";" | ifst | whilest | block
ifst ::= "if" "(" cond ")" stmt | "if" "(" cond ")" stmt "else" stmt
whilest ::= "while" "(" cond ")" stmt
assign ::= id "=" expr
block ::= "{" "}" | "{" stmts "}"
stmts ::= stmt | stmt stmts
cond ::= expr | expr "<" expr | expr ">" expr | expr "==" expr
expr ::= expr "+" mul | expr "-" mul | mul
mul ::= mul "*" unit | unit
unit ::= id | num | "(" expr ")" | "!" unit | id "(" ")"
id ::= "x" | "y"
num ::= digit | digit num
digit ::= "0" | "1"
"""

GRAMMARS = {
    "dyck1": DYCK1,
    "dyck2": DYCK2,
    "arith": ARITH,
    "json_mini": JSON_MINI,
    "mini_c": MINI_C,
}

# Exhaustive short-token length per grammar; alphabets above ~6 bytes get
# sampled 3-byte tokens instead of the full cube to keep naive masks fast.
EXHAUSTIVE_LEN = {"dyck1": 3, "dyck2": 3, "arith": 3, "json_mini": 2, "mini_c": 2}
SAMPLED_3BYTE = {"dyck1": 0, "dyck2": 0, "arith": 0, "json_mini": 120, "mini_c": 120}

EOS_BYTES = b"\x00"


def suite_grammar(name: str) -> Cfg:
    return validate(parse_grammar(GRAMMARS[name]))


def suite_vocabulary(name: str, long_tokens: int = 50, seed: int = 1234) -> Vocabulary:
    g = suite_grammar(name)
    alphabet = sorted(g.alphabet)
    rng = random.Random(seed)
    tokens: list[bytes] = []
    for n in range(1, EXHAUSTIVE_LEN[name] + 1):
        tokens.extend(bytes(p) for p in itertools.product(alphabet, repeat=n))
    if SAMPLED_3BYTE[name]:
        tokens.extend(
            bytes(rng.choice(alphabet) for _ in range(3)) for _ in range(SAMPLED_3BYTE[name])
        )
    for _ in range(long_tokens):
        length = rng.randint(4, 8)
        tokens.append(bytes(rng.choice(alphabet) for _ in range(length)))
    tokens.append(b"")  # tokenizers can carry empty tokens
    tokens.append(bytes([alphabet[0]]))  # deliberate byte-duplicate
    tokens.append(EOS_BYTES)
    eos = len(tokens) - 1
    return Vocabulary(tokens=tuple(tokens), specials=frozenset({eos}), eos_id=eos)


@pytest.fixture(scope="session")
def grammars() -> dict[str, Cfg]:
    return {name: suite_grammar(name) for name in GRAMMARS}


@pytest.fixture(scope="session", params=sorted(GRAMMARS))
def grammar_name(request) -> str:
    return request.param


def figure_grammar():
    """The six-production inspection grammar used for displacement goldens.

    Built directly in GNF form (J and K stay unexpanded on purpose), so it
    bypasses parse/validate.
    """
    from cfgzip import GnfGrammar

    return GnfGrammar(
        nonterminals=("A", "B", "C", "X", "Y", "Z", "J", "K"),
        alphabet=frozenset(b"abcxyz"),
        productions=(
            ("A", ord("a"), ("B", "C")),
            ("B", ord("b"), ()),
            ("C", ord("c"), ()),
            ("X", ord("x"), ("Y",)),
            ("Y", ord("y"), ("Z", "J", "K")),
            ("Z", ord("z"), ()),
        ),
        start="A",
    )


def hosted_figure_grammar():
    """The inspection grammar wrapped in a host production ``S -> s A X``,
    which makes the stack pair (A below X) actually realisable in a parse."""
    from cfgzip import GnfGrammar

    return GnfGrammar(
        nonterminals=("S", "A", "B", "C", "X", "Y", "Z", "J", "K"),
        alphabet=frozenset(b"sabcxyz"),
        productions=(
            ("S", ord("s"), ("A", "X")),
            ("A", ord("a"), ("B", "C")),
            ("B", ord("b"), ()),
            ("C", ord("c"), ()),
            ("X", ord("x"), ("Y",)),
            ("Y", ord("y"), ("Z", "J", "K")),
            ("Z", ord("z"), ()),
        ),
        start="S",
    )
