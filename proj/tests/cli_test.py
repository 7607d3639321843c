#!/usr/bin/env python3
"""End-to-end checks of the empdialog command line against the fixture corpus."""

import argparse
import json
import shutil
import subprocess
import sys
from pathlib import Path

SUBCOMMANDS = {
    "stats": ["--corpus", "--out", "--strict"],
    "tag": ["--corpus", "--out"],
    "bootstrap": ["--corpus", "--out-dir", "--per-label-cap"],
    "train": ["--train", "--valid", "--model", "--epochs", "--lr", "--batch", "--dim"],
    "eval": ["--model", "--test", "--out", "--confusion"],
    "annotate": ["--corpus", "--model", "--policy", "--manual", "--out"],
    "analyze": ["--annotations", "--min-freq", "--max-turns", "--out-dir"],
    "export": ["--stats", "--metrics", "--annotations", "--min-freq", "--max-turns", "--out-dir"],
}

# Frozen by hand-counting fixture25.csv.
FIXTURE_STATS = {
    "dialogues": 25,
    "turns": 92,
    "avg_turns_per_dialogue": 92 / 25,
    "max_turns": 8,
    "max_turns_dialogues": 1,
    "min_turns": 1,
    "min_turns_dialogues": 2,
    "speaker_turns": 50,
    "listener_turns": 42,
    "avg_speaker_tokens_per_turn": 396 / 50,
    "avg_listener_tokens_per_turn": 287 / 42,
    "turn_histogram": {"1": 2, "2": 4, "3": 5, "4": 9, "5": 1, "6": 3, "8": 1},
    "fraction_dialogues_up_to_4_turns": 20 / 25,
}
FIXTURE_QUESTIONING = 14
CSV_HEADER = "conv_id,utterance_idx,context,prompt,speaker_idx,utterance,selfeval,tags\n"

failures = []


def check(name, ok, detail=""):
    print(("PASS " if ok else "FAIL ") + name + (f": {detail}" if detail and not ok else ""))
    if not ok:
        failures.append(name)


def run(args, *cmd):
    return subprocess.run([args.cli, *cmd], capture_output=True, text=True)


def run_ok(args, *cmd):
    r = run(args, *cmd)
    if r.returncode != 0:
        raise RuntimeError(f"{' '.join(cmd)} exited {r.returncode}: {r.stderr.strip()}")
    return r


def close(a, b):
    if isinstance(a, float) or isinstance(b, float):
        return abs(a - b) <= 1e-12 * max(1.0, abs(b))
    return a == b


def test_help(args):
    r = run(args, "--help")
    check("app --help", r.returncode == 0 and all(c in r.stdout for c in SUBCOMMANDS), r.stdout)
    for sub, flags in SUBCOMMANDS.items():
        r = run(args, sub, "--help")
        missing = [f for f in flags if f not in r.stdout]
        check(f"{sub} --help", r.returncode == 0 and not missing, f"exit {r.returncode}, missing {missing}")


def test_usage_errors(args, fixture):
    r = run(args, "stats", "--corpus", str(fixture), "--no-such-flag")
    check("unknown flag exits 2", r.returncode == 2, f"exit {r.returncode}")
    missing = "/nonexistent/corpus.csv"
    r = run(args, "stats", "--corpus", missing)
    check("missing file exits 2 naming it", r.returncode == 2 and missing in r.stderr, f"exit {r.returncode}: {r.stderr}")


def test_stats(args, fixture):
    got = json.loads(run_ok(args, "stats", "--corpus", str(fixture)).stdout)
    bad = {k: (got.get(k), v) for k, v in FIXTURE_STATS.items() if k not in got or not close(got[k], v)}
    check("stats on fixture", not bad and set(got) == set(FIXTURE_STATS), str(bad))


def test_tag(args, fixture, work):
    out = work / "tag.csv"
    run_ok(args, "tag", "--corpus", str(fixture), "--out", str(out))
    rows = out.read_text().splitlines()
    questioning = sum(1 for r in rows[1:] if r.split(",")[3] == "questioning")
    check("tag questioning count", questioning == FIXTURE_QUESTIONING, f"{questioning}")

    empty = work / "empty.csv"
    empty.write_text(CSV_HEADER)
    out = work / "tag_empty.csv"
    run_ok(args, "tag", "--corpus", str(empty), "--out", str(out))
    check("tag on header-only corpus", out.read_text().splitlines() == rows[:1], out.read_text())


def pipeline(args, fixture, synth_csv, work):
    work.mkdir(parents=True)
    corpora = [str(fixture), str(synth_csv)]
    run_ok(args, "bootstrap", "--corpus", *corpora, "--out-dir", str(work / "splits"))
    trained = run_ok(args, "train", "--train", str(work / "splits/train.tsv"), "--valid",
                     str(work / "splits/valid.tsv"), "--model", str(work / "model.bin"), "--dim", "32",
                     "--epochs", "5").stdout
    sha = next(line.split()[1] for line in trained.splitlines() if line.startswith("model_sha256"))
    run_ok(args, "eval", "--model", str(work / "model.bin"), "--test", str(work / "splits/test.tsv"), "--out",
           str(work / "metrics.json"))
    run_ok(args, "stats", "--corpus", *corpora, "--out", str(work / "stats.json"))
    run_ok(args, "annotate", "--corpus", *corpora, "--model", str(work / "model.bin"), "--out",
           str(work / "annotations.csv"))
    run_ok(args, "analyze", "--annotations", str(work / "annotations.csv"), "--out-dir", str(work / "analysis"))
    run_ok(args, "export", "--stats", str(work / "stats.json"), "--metrics", str(work / "metrics.json"),
           "--annotations", str(work / "annotations.csv"), "--out-dir", str(work / "export"))
    return sha, (work / "export/manifest.json").read_text()


def test_pipeline(args, fixture, work):
    synth_csv = work / "synthetic.csv"
    subprocess.run([args.synth, "--dialogues", "600", "--seed", "13", "--out", str(synth_csv)], check=True)
    sha_a, manifest_a = pipeline(args, fixture, synth_csv, work / "run_a")
    sha_b, manifest_b = pipeline(args, fixture, synth_csv, work / "run_b")
    check("pipeline model sha reproducible", sha_a == sha_b, f"{sha_a} vs {sha_b}")
    check("pipeline manifest reproducible", manifest_a == manifest_b)

    try:
        import jsonschema
    except ImportError:
        print("SKIP schema validation: jsonschema not installed")
        return
    for name in ("chord", "sankey"):
        doc = json.loads((work / "run_a/export" / f"{name}.json").read_text())
        schema = json.loads((Path(args.schema_dir) / f"{name}.schema.json").read_text())
        try:
            jsonschema.validate(doc, schema)
            check(f"{name}.json matches schema", True)
        except jsonschema.ValidationError as e:
            check(f"{name}.json matches schema", False, e.message)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--cli", required=True)
    parser.add_argument("--synth", required=True)
    parser.add_argument("--fixture-dir", required=True)
    parser.add_argument("--schema-dir", required=True)
    parser.add_argument("--work-dir", required=True)
    args = parser.parse_args()

    work = Path(args.work_dir)
    shutil.rmtree(work, ignore_errors=True)
    work.mkdir(parents=True)
    fixture = Path(args.fixture_dir) / "fixture25.csv"

    test_help(args)
    test_usage_errors(args, fixture)
    test_stats(args, fixture)
    test_tag(args, fixture, work)
    test_pipeline(args, fixture, work)

    if failures:
        print(f"{len(failures)} check(s) failed: {', '.join(failures)}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
