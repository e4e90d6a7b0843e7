#!/usr/bin/env python3
# Write a run to disk, audit it, then tamper with one stored report and audit again.

import json
import tempfile
from pathlib import Path

from trustfl.harness import run_scenario, verify_dir
from trustfl.scenarios import free_rider

out = Path(tempfile.mkdtemp(prefix="trustfl-audit-"))
run = run_scenario(free_rider(rounds=5), out)
print(sorted(p.name for p in out.iterdir()))

res = verify_dir(out)
print(f"clean run: {res.rounds_checked} rounds checked, {len(res.mismatches)} mismatches")

# bump one payout in the round-2 report; the file no longer hashes to its address
cid = run.results[2].cid_report
path = out / "store" / cid
report = json.loads(path.read_text())
winner = max(report["payouts"], key=report["payouts"].get)
report["payouts"][winner] += 1_000_000
path.write_text(json.dumps(report))

for line in verify_dir(out).mismatches:
    print(line)
