"""Smoke test for the pyitest extension.

Build and install first:  maturin build -o dist && pip install dist/pyitest-*.whl
Then:  python3 python/smoke_test.py
"""
import json
import os
import tempfile

import pyitest

HERE = os.path.dirname(os.path.abspath(__file__))
CORPUS = os.path.join(HERE, "..", "..", "core", "tests", "corpus")

SOURCE = """\
import math
from inline import Here

# square root
root = math.isqrt(n)
Here("isqrt").given(n, 17).check_eq(root, 4)
if root > 3 and n % 2:
    Here().given(root, 4).given(n, 17).check_true(Group(1))
"""

unit = pyitest.SourceUnit(SOURCE, "sample.py")
assert unit.reconstruct() == SOURCE
kinds = [s.kind for s in unit.statements]
assert kinds == ["IMPORT", "IMPORT", "ASSIGNMENT", "INLINE_TEST", "IF_HEADER", "INLINE_TEST"], kinds
assert unit.inline_tests() == [3, 5]

stripped = pyitest.strip(SOURCE, "sample.py")
assert "Here(" not in stripped and "# square root" in stripped
assert pyitest.strip(stripped) == stripped
assert pyitest.duplicate(SOURCE, 3, "sample.py").count("Here(") == 6

decls, errors = pyitest.extract(SOURCE, "sample.py")
assert errors == []
assert [d.name for d in decls] == ["isqrt", "sample_8"]
assert decls[0].imports == ["import math"]
assert decls[1].target_kind == "IfHeader"
assert pyitest.split_conditions("if root > 3 and n % 2:") == ["root > 3", "n % 2"]
assert "_itest_case_0" in pyitest.render_program(SOURCE, "sample.py")

try:
    pyitest.SourceUnit("x = (1,\n")
except pyitest.ScanError as e:
    assert isinstance(e, pyitest.ItestError)
else:
    raise AssertionError("unbalanced source scanned")

with tempfile.TemporaryDirectory() as d:
    with open(os.path.join(d, "sample.py"), "w") as f:
        f.write(SOURCE)
    report = pyitest.run([d], jobs=2)
    assert report.counts["pass"] == 2, report.to_console()
    assert report.exit_code == 0

report = pyitest.run([CORPUS], tags=["regex"])
by_id = {o.id: o for o in report.outcomes}
assert by_id["regex_fault_9"].status == "fail"
assert by_id["regex_fault_9"].expected == "True"
assert by_id["regex_fixed_9"].status == "pass"
assert report.exit_code == 1

again = pyitest.Report.from_json(report.to_json())
assert again.to_json() == report.to_json()
assert json.loads(report.to_json())["counts"] == report.counts

print("pyitest smoke test passed: %d outcomes" % len(report))
