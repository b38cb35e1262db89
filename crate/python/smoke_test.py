"""Exercises the Python bindings against the in-process testbed.

Build with `maturin build -m crates/py/Cargo.toml` and pip install the wheel (or put the built
extension on PYTHONPATH).
"""
import json
import pathlib
import sys
import tempfile

import metarest_py as mr

ROOT = pathlib.Path(__file__).resolve().parent.parent
FIG2 = ROOT / "crates" / "core" / "fixtures" / "scripted" / "fig2"


def check(cond, what):
    print(("ok   " if cond else "FAIL ") + what)
    if not cond:
        sys.exit(1)


pet = mr.bundled_spec("petstore")
check(pet.operation_count == 19 and len(pet.operations()) == 19, "petstore has 19 operations")
check(mr.bundled_spec("usermanagement").operation_count == 28, "user management has 28 operations")
check(pet.resolve("GET", "/pet/7") == "GET /pet/{petId}", "concrete path resolves to its template")

check(mr.normalize_title("Repeat login MR 12") == "repeat_login", "title slug")
raw = "```json\n[{'id': 'MR1', 'scenario': 'Twice', 'given': 'a pet', 'when': 'read twice', 'then': 'same', },]\n```"
items = mr.parse_hlmt_list(raw)
check(len(items) == 1 and items[0]["id"] == "MR1", "loose model output is recovered")

check(mr.check_relation("equality", {"a": [1, 2]}, {"a": [1, 2]}), "equality holds")
check(not mr.check_relation("count-delta", 5, 3, delta=1), "count delta of 1 rejects 5 vs 3")

spec = mr.bundled_spec("testbed")
plan = json.loads((FIG2 / "03_emt_mr26.json").read_text())
check(mr.validate_plan(plan, spec) == [], "worked example plan is valid")

clean = mr.Testbed()
result = mr.execute_plan(plan, spec, clean.base_url)
check(result["verdict"] == "passed" and len(clean.history()) == 4, "plan passes on the correct testbed")

faulty = mr.Testbed("drop-status-update")
report = mr.run_session(spec, script_dir=str(FIG2), testbed=faulty, session_id="py",
                        out_dir=tempfile.mkdtemp())
check(report["totals"]["failed"] == 1, "session finds the injected fault")
check(report["records"][0]["result"]["failure_class"]["class"] == "relation-violation",
      "failure is a relation violation")

ours = ["POST /pet -> GET /pet/{petId}"]
check(mr.diff_sequences(ours, []) == ours, "sequence difference")
check(len(mr.canned_scenarios()) == len(mr.fault_names()) == 5, "five canned scenarios")
print("python bindings smoke test passed")
