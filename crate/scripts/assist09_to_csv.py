#!/usr/bin/env python3
"""Convert ASSISTments 2009 skill-builder data to the canonical interaction CSV.

    python3 scripts/assist09_to_csv.py skill_builder_data.csv data/assist09_500.csv --students 500

Rows are ordered by `order_id` within each student. Multi-skill problems appear
once per skill with a shared `order_id` and are merged into one interaction with
`;`-joined KC ids. Rows without a skill are kept with empty `kc_ids`; the loader
drops and counts them.
"""

import argparse
import csv
import random
from collections import OrderedDict


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("raw")
    ap.add_argument("out")
    ap.add_argument("--students", type=int, default=None, help="keep a random subsample of this many students")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    interactions = {}
    with open(args.raw, newline="", encoding="latin-1") as f:
        for row in csv.DictReader(f):
            key = (row["user_id"], int(row["order_id"]))
            it = interactions.setdefault(key, {"q": row["problem_id"], "y": row["correct"], "kcs": []})
            skill = (row.get("skill_id") or "").strip()
            if skill and skill not in it["kcs"]:
                it["kcs"].append(skill)

    by_student = OrderedDict()
    for (sid, order), it in sorted(interactions.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        if it["y"] not in ("0", "1"):
            continue
        by_student.setdefault(sid, []).append(it)

    students = list(by_student)
    if args.students is not None and args.students < len(students):
        students = sorted(random.Random(args.seed).sample(students, args.students))

    with open(args.out, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["student_id", "question_id", "kc_ids", "correct"])
        for sid in students:
            for it in by_student[sid]:
                w.writerow([sid, it["q"], ";".join(it["kcs"]), it["y"]])


if __name__ == "__main__":
    main()
