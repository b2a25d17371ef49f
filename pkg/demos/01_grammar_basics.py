"""Grammars, validation, and the brute-force oracles.

Walks through parsing the grammar file format, cleaning a grammar with
useless rules, and asking the CYK-based oracle about membership and
prefix viability.
"""

from cfgzip import (
    oracle_membership,
    oracle_prefix,
    parse_grammar,
    render_grammar,
    validate,
)

DYCK = 'root ::= "(" root ")" root | ""'

g = validate(parse_grammar(DYCK))
print("Balanced-parentheses grammar:")
print(render_grammar(g))

for w in [b"", b"()", b"(())()", b")(", b"(()"]:
    print(f"  {w!r:12} word={oracle_membership(g, w)!s:5} prefix={oracle_prefix(g, w)}")

# Validation removes rules that can never matter: `dead` cannot derive any
# terminal string, so it disappears along with the alternative using it.
messy = parse_grammar(
    """
    root ::= "a" root "b" | "" | dead "x"
    dead ::= dead "y"
    """
)
clean = validate(messy)
print("\nBefore cleaning:", [h for h, _ in messy.productions])
print("After cleaning: ", [h for h, _ in clean.productions])
print(render_grammar(clean))

# The a^n b^n language, for good measure.
for w in [b"ab", b"aabb", b"aab", b"ba"]:
    print(f"  {w!r:8} word={oracle_membership(clean, w)}")
