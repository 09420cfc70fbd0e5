"""Reference operand split for branch headers, using Python's own parser.

Flattens unparenthesized `and`/`or` chains of the header condition and
prints one JSON line per header: [header, [operand source segments]].
Run: python3 split_conditions.py
"""
import ast
import json

HEADERS = [
    "if a and b or c:",
    "if (a and b):",
    "while x:",
    "if gen and re.match('^{0-9A-F-}{36}$', orig):",
    "if not a or b and c:",
    "while n > limit and (n % 2 == 0 or n % 3 == 0):",
    "if f(x, y and z) or [p or q][0]:",
    "if 'and' in s and t == 'or':",
    "elif x is not None and x.ok():",
    "if a if b else c and d:",
    "if (a or b) and (c or d) or e:",
    "while lambda: 1 and k:",
    "if (n := len(a)) > 10 and n < 20:",
    "if x := a and b:",
]


def parenthesized(src, node):
    # Column offsets are on the single line we parse.
    i = node.col_offset - 1
    while i >= 0 and src[i] == " ":
        i -= 1
    return i >= 0 and src[i] == "("


def flatten(src, node):
    if isinstance(node, ast.BoolOp) and not parenthesized(src, node):
        out = []
        for value in node.values:
            out.extend(flatten(src, value))
        return out
    return [ast.get_source_segment(src, node)]


for header in HEADERS:
    keyword, cond = header.split(" ", 1)
    # `elif` cannot stand alone; the condition grammar is the same as `if`.
    src = ("while " if keyword == "while" else "if ") + cond + " pass"
    expr = ast.parse(src).body[0].test
    if isinstance(expr, ast.BoolOp):
        operands = flatten(src, expr)
    else:
        operands = [cond[:-1]]
    print(json.dumps([header, operands]))
