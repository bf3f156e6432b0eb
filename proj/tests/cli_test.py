#!/usr/bin/env python3
"""End-to-end checks of the refac command line.

usage: cli_test.py <refac binary> <data dir> <golden dir>
"""
import csv
import json
import math
import os
import subprocess
import sys
import tempfile

REFAC, DATA, GOLDEN = sys.argv[1:4]
WORK = tempfile.mkdtemp(prefix="refac_cli_")
failures = []


def run(*args, env=None):
    full_env = dict(os.environ)
    full_env.pop("REFAC_SEED", None)
    if env:
        full_env.update(env)
    return subprocess.run([REFAC, *args], capture_output=True, text=True, env=full_env)


def data(name):
    return os.path.join(DATA, name)


def tmp(name):
    return os.path.join(WORK, name)


def write(name, text):
    path = tmp(name)
    with open(path, "w") as f:
        f.write(text)
    return path


def check(name, cond, detail=""):
    print(("ok   " if cond else "FAIL ") + name + (f": {detail}" if detail and not cond else ""))
    if not cond:
        failures.append(name)


def read_text(path):
    with open(path) as f:
        return f.read()


def design_config(**extra):
    cfg = {"K": 2, "equal": 80, "criterion": {"type": "refm", "p": [0.5]}, "seed": 2024}
    cfg.update(extra)
    return write(f"cfg_{len(os.listdir(WORK))}.json", json.dumps(cfg))


def case_golden_design():
    out, rep = tmp("golden_z.csv"), tmp("golden_report.json")
    r = run("design", "--config", data("design_refm.json"), "--covariates",
            data("synthetic_covariates.csv"), "--out", out, "--report", rep)
    check("design exits 0", r.returncode == 0, r.stderr)
    if r.returncode != 0:
        return
    check("design matches the golden assignment",
          read_text(out) == read_text(os.path.join(GOLDEN, "design_refm_assignment.csv")))
    report = json.loads(read_text(rep))
    check("design report is accepted", report["accepted"] is True)
    check("design report has schema_version", report["schema_version"] == 1)
    check("design report lists effects", report["effects"] == ["1", "2", "1:2"])
    with open(out) as f:
        rows = list(csv.DictReader(f))
    counts = [sum(1 for row in rows if row["z"] == str(q)) for q in range(1, 5)]
    check("design keeps group sizes", counts == [20, 20, 20, 20], str(counts))


def case_tiers_cf_design():
    rep = tmp("tcf.json")
    r = run("design", "--config", data("design_tiers_cf.json"), "--covariates",
            data("synthetic_covariates.csv"), "--out", tmp("tcf.csv"), "--report", rep)
    check("tiers_cf design exits 0", r.returncode == 0, r.stderr)
    if r.returncode == 0:
        report = json.loads(read_text(rep))
        stats = report["tier_statistics"]
        a = report["config"]["criterion"]["resolved_a"]
        check("tiers_cf statistics respect thresholds",
              len(stats) == 2 and all(s <= t for s, t in zip(stats, a)), f"{stats} vs {a}")


def case_crfe_single_draw():
    cfg = design_config(criterion={"type": "crfe"})
    rep = tmp("crfe.json")
    r = run("design", "--config", cfg, "--covariates", data("synthetic_covariates.csv"),
            "--out", tmp("crfe.csv"), "--report", rep)
    check("crfe design exits 0", r.returncode == 0, r.stderr)
    if r.returncode == 0:
        check("crfe uses one draw", json.loads(read_text(rep))["draws_attempted"] == 1)


def case_seed_precedence():
    cfg = design_config()
    outs = {}
    for tag, args, env in [("config", [], None), ("env", [], {"REFAC_SEED": "99"}),
                           ("flag", ["--seed", "99"], {"REFAC_SEED": "5"}),
                           ("env99", [], {"REFAC_SEED": "99"})]:
        out = tmp(f"seed_{tag}.csv")
        r = run("design", "--config", cfg, "--covariates", data("synthetic_covariates.csv"),
                "--out", out, *args, env=env)
        outs[tag] = read_text(out) if r.returncode == 0 else None
    check("REFAC_SEED overrides the config seed", outs["env"] != outs["config"])
    check("--seed overrides REFAC_SEED", outs["flag"] == outs["env99"])
    r = run("design", "--config", cfg, "--covariates", data("synthetic_covariates.csv"),
            env={"REFAC_SEED": "banana"})
    check("malformed REFAC_SEED exits 2", r.returncode == 2, r.stderr)


def case_max_draws():
    cfg = design_config(criterion={"type": "refm", "a": [1e-6]})
    r = run("design", "--config", cfg, "--covariates", data("synthetic_covariates.csv"),
            "--max-draws", "50", "--out", tmp("md.csv"))
    check("exhausted draw budget exits 3", r.returncode == 3, r.stderr)
    check("exhausted draw budget reports the closest draw", "closest" in r.stderr.lower(), r.stderr)


def case_degenerate_covariates():
    lines = ["unit,a,b"] + [f"u{i},{i % 7},{2 * (i % 7)}" for i in range(80)]
    cov = write("dup.csv", "\n".join(lines) + "\n")
    r = run("design", "--config", design_config(), "--covariates", cov, "--out", tmp("dup_z.csv"))
    check("collinear covariates exit 4", r.returncode == 4, r.stderr)


def case_ragged_csv():
    text = read_text(data("synthetic_covariates.csv")).splitlines()
    text[5] = text[5] + ",17"
    cov = write("ragged.csv", "\n".join(text) + "\n")
    r = run("design", "--config", design_config(), "--covariates", cov)
    check("ragged csv exits 2", r.returncode == 2, r.stderr)
    check("ragged csv names the line", "line 6" in r.stderr, r.stderr)


def case_bad_config():
    bad = write("bad.json", '{"K": 2, "equal": 81}')
    r = run("design", "--config", bad, "--covariates", data("synthetic_covariates.csv"))
    check("indivisible equal sizes exit 2", r.returncode == 2, r.stderr)
    r = run("design", "--config", write("garbage.json", "{nope"), "--covariates",
            data("synthetic_covariates.csv"))
    check("unparsable config exits 2", r.returncode == 2, r.stderr)


def analyze_config(**extra):
    cfg = {"K": 2, "equal": 80, "criterion": {"type": "refm", "p": [0.5]}, "seed": 1}
    cfg.update(extra)
    return write(f"an_{len(os.listdir(WORK))}.json", json.dumps(cfg))


def case_analyze():
    out = tmp("analysis.json")
    r = run("analyze", "--config", analyze_config(), "--data", data("synthetic_outcomes.csv"),
            "--out", out, "--draws", "10000")
    check("analyze exits 0", r.returncode == 0, r.stderr)
    if r.returncode != 0:
        return
    res = json.loads(read_text(out))
    check("analyze reports three effects", len(res["tau_hat"]) == 3)
    ok = all(iv["lower"] < iv["estimate"] < iv["upper"] for iv in res["intervals"])
    check("analyze intervals bracket the estimates", ok)
    r2 = run("analyze", "--config", analyze_config(), "--data", data("synthetic_outcomes.csv"),
             "--out", tmp("analysis2.json"), "--draws", "10000")
    check("analyze is reproducible", r2.returncode == 0 and read_text(out) == read_text(tmp("analysis2.json")))
    r = run("analyze", "--config", analyze_config(), "--data", data("synthetic_outcomes.csv"),
            "--contrast", "[[1, -1, 0]]", "--out", tmp("contrast.json"), "--draws", "10000")
    check("analyze accepts a contrast", r.returncode == 0, r.stderr)
    contrast_file = write("contrast_rows.json", "[[1, 0, 0], [0, 0, 1]]")
    r = run("analyze", "--config", analyze_config(), "--data", data("synthetic_outcomes.csv"),
            "--contrast", contrast_file, "--out", tmp("contrast2.json"), "--draws", "10000")
    check("analyze reads a contrast file", r.returncode == 0 and
          len(json.loads(read_text(tmp("contrast2.json")))["confidence_set"]["center"]) == 2, r.stderr)
    r = run("analyze", "--config", analyze_config(), "--data", data("synthetic_outcomes.csv"),
            "--contrast", "[[1, 1, 0], [2, 2, 0]]", "--draws", "10000")
    check("rank-deficient contrast exits 2", r.returncode == 2, r.stderr)


def outcome_rows():
    with open(data("synthetic_outcomes.csv")) as f:
        return list(csv.DictReader(f))


def write_rows(name, rows):
    path = tmp(name)
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
        w.writeheader()
        w.writerows(rows)
    return path


def case_analyze_group_mismatch():
    rows = outcome_rows()
    moved = next(row for row in rows if row["z"] == "2")
    moved["z"] = "1"
    r = run("analyze", "--config", analyze_config(), "--data", write_rows("mismatch.csv", rows))
    check("mismatched group counts exit 2", r.returncode == 2, r.stderr)
    check("mismatched group counts name the group", "group 1" in r.stderr, r.stderr)
    rows = outcome_rows()
    rows[0]["z"] = "5"
    r = run("analyze", "--config", analyze_config(), "--data", write_rows("badz.csv", rows))
    check("out-of-range treatment exits 2", r.returncode == 2, r.stderr)


def case_constant_outcome():
    rows = outcome_rows()
    for row in rows:
        row["y"] = "3.25"
    out = tmp("constant.json")
    r = run("analyze", "--config", analyze_config(criterion={"type": "crfe"}), "--data",
            write_rows("constant.csv", rows), "--out", out)
    check("constant outcome analyzes", r.returncode == 0, r.stderr)
    if r.returncode == 0:
        res = json.loads(read_text(out))
        tau = res["tau_hat"]
        check("constant outcome gives zero effects", all(abs(t) < 1e-12 for t in tau), str(tau))
        check("constant outcome has point intervals",
              all(iv["lower"] == iv["upper"] == iv["estimate"] for iv in res["intervals"]))
        check("constant outcome has no confidence set", res["confidence_set"] is None)


def case_k1_neyman():
    # two groups of four: treated 1..4 with y = 2,4,6,8; control with y = 1,1,2,4
    rows = ["unit,x,y,z"]
    y1, y0 = [2, 4, 6, 8], [1, 1, 2, 4]
    for i, v in enumerate(y0):
        rows.append(f"c{i},{i * 0.5 + 0.1},{v},1")
    for i, v in enumerate(y1):
        rows.append(f"t{i},{i * 0.3 - 0.2},{v},2")
    path = write("k1.csv", "\n".join(rows) + "\n")
    cfg = write("k1.json", json.dumps({"K": 1, "sizes": [4, 4], "criterion": {"type": "crfe"}}))
    out = tmp("k1_out.json")
    r = run("analyze", "--config", cfg, "--data", path, "--out", out)
    check("K=1 analysis exits 0", r.returncode == 0, r.stderr)
    if r.returncode != 0:
        return
    res = json.loads(read_text(out))
    mean = lambda v: sum(v) / len(v)
    var = lambda v: sum((x - mean(v)) ** 2 for x in v) / (len(v) - 1)
    tau = mean(y1) - mean(y0)
    se = math.sqrt(var(y1) / 4 + var(y0) / 4)
    iv = res["intervals"][0]
    check("K=1 estimate is the difference in means", abs(iv["estimate"] - tau) < 1e-12)
    check("K=1 half-width is 1.96 Neyman SE",
          abs((iv["upper"] - iv["lower"]) / 2 - 1.959963984540054 * se) < 1e-9,
          f"{iv} vs se {se}")


def case_thresholds():
    r = run("thresholds", "--L", "5", "--tier-sizes", "2,1", "--p", "0.1,0.5")
    check("thresholds exits 0", r.returncode == 0, r.stderr)
    rows = list(csv.DictReader(r.stdout.splitlines()))
    check("thresholds dims follow the tiers", [row["dim"] for row in rows] == ["10", "5"])
    a = [row["a"] for row in rows]
    back = run("thresholds", "--dims", "10,5", "--a", ",".join(a))
    rows2 = list(csv.DictReader(back.stdout.splitlines()))
    check("a to p round trip", back.returncode == 0 and
          all(abs(float(x["p"]) - p) < 1e-12 for x, p in zip(rows2, [0.1, 0.5])), back.stdout)
    r = run("thresholds", "--dims", "3", "--p", "1")
    check("p = 1 exits 2", r.returncode == 2, r.stderr)
    r = run("thresholds", "--dims", "3,4", "--p", "0.5")
    check("length mismatch exits 2", r.returncode == 2, r.stderr)


def case_simulate():
    args = ["simulate", "--spec", data("additive_spec.json"), "--designs", data("designs.json"),
            "--reps", "100", "--draws", "0", "--seed", "3"]
    r = run(*args, "--csv", tmp("sim1.csv"), "--json", tmp("sim1.json"))
    check("simulate exits 0", r.returncode == 0, r.stderr)
    r = run(*args, "--csv", tmp("sim2.csv"), "--json", tmp("sim2.json"), "--workers", "2")
    strip = lambda path: {k: v for k, v in json.loads(read_text(path)).items() if k != "workers"}
    check("simulate output ignores the worker count", r.returncode == 0 and
          read_text(tmp("sim1.csv")) == read_text(tmp("sim2.csv")) and
          strip(tmp("sim1.json")) == strip(tmp("sim2.json")))
    report = json.loads(read_text(tmp("sim1.json")))
    check("simulate json has no runtime by default", "runtime_seconds" not in report)
    r = run("simulate", "--spec", data("additive_spec.json"), "--designs", data("designs.json"),
            "--reps", "0")
    check("reps 0 exits 2", r.returncode == 2, r.stderr)


def case_sweep():
    out = tmp("sweep.csv")
    r = run("sweep", "--spec", data("additive_spec.json"), "--criterion",
            data("sweep_criterion.json"), "--p-a", "0.01", "--points", "5", "--csv", out)
    check("sweep exits 0", r.returncode == 0, r.stderr)
    if r.returncode == 0:
        rows = list(csv.DictReader(read_text(out).splitlines()))
        firsts = [float(row["p_a1"]) for row in rows]
        check("sweep grid is pinned to p_a and 1", len(rows) == 5 and firsts[0] == 0.01 and
              firsts[-1] == 1.0, str(firsts))
    r = run("sweep", "--spec", data("additive_spec.json"), "--criterion",
            data("sweep_criterion.json"), "--p-a", "0.01", "--grid", "0.001")
    check("infeasible sweep point exits 2", r.returncode == 2, r.stderr)


CASES = [case_golden_design, case_tiers_cf_design, case_crfe_single_draw, case_seed_precedence,
         case_max_draws, case_degenerate_covariates, case_ragged_csv, case_bad_config,
         case_analyze, case_analyze_group_mismatch, case_constant_outcome, case_k1_neyman,
         case_thresholds, case_simulate, case_sweep]

for case in CASES:
    case()
print(f"{len(failures)} failure(s)")
sys.exit(1 if failures else 0)
