# Collects alias values from an expression tree.
from collections import OrderedDict

from inline import Here


def unwrap_from_alias(expr):
    aliases = [
        child["value"]
        for child in expr["children"][1:]
        if child.get("kind") == "literal"
    ]
    Here().given(expr, {"children": [{"kind": "ref"}, {"kind": "literal", "value": "a"}, {"kind": "literal", "value": "b"}]}).check_eq(aliases, ["a", "b"])
    index = OrderedDict((name, i) for i, name in enumerate(aliases))
    Here().given(aliases, ["x", "y"]).check_eq(list(index.items()), [("x", 0), ("y", 1)])
    return aliases


if __name__ == "__main__":
    print(unwrap_from_alias({"children": [{"kind": "ref"}]}))
