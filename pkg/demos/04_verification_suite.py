"""Run the full oracle verification suite and print its report.

ASSERTED rows are guarantees (the process would exit nonzero if any
failed); REPORTED rows are measurements the analysis deliberately does not
promise.
"""

from typsgd.verify import all_asserted_pass, run_verification

results, error_reports = run_verification(seed=0, instances=100)

width = max(len(r.name) for r in results)
for r in results:
    status = "INFO" if r.passed is None else ("PASS" if r.passed else "FAIL")
    print(f"{r.kind:8s} {r.name:<{width}s} {status:4s}  {r.detail}")

print()
print(f"all asserted checks pass: {all_asserted_pass(results)}")
print(f"sample per-instance error report (JSON): {error_reports[0][:120]}...")
