"""Greibach Normal Form and the one-state pushdown automaton it induces.

Converts a left-recursive arithmetic grammar to GNF, prints the result,
and runs the nondeterministic stack machine that GNF makes possible:
every production consumes exactly one byte, so parsing is a sequence of
pop-and-push moves.
"""

from cfgzip import parse_grammar, pda_accepts, pda_prefix_viable, render_gnf, to_gnf, validate

ARITH = """
expr ::= expr "+" term | term
term ::= term "*" factor | factor
factor ::= "(" expr ")" | "n"
"""

g = validate(parse_grammar(ARITH))
gnf = to_gnf(g)
print(f"{len(g.productions)} source productions -> {len(gnf.productions)} GNF productions")
print(render_gnf(gnf))

# The transition function delta(byte, symbol) lists the tails pushed when
# that symbol is popped on that byte.
print("A few transitions:")
for byte in b"n+(":
    for nt in gnf.nonterminals[:3]:
        tails = gnf.delta(byte, nt)
        if tails:
            print(f"  delta({chr(byte)!r}, {nt}) = {tails}")

print("\nPDA runs from stack (start):")
for w in [b"n", b"n+n*n", b"(n+n)*n", b"n+", b"n n"]:
    print(
        f"  {w!r:12} accepted={pda_accepts(gnf, w)!s:5} "
        f"viable-prefix={pda_prefix_viable(gnf, w)}"
    )
