"""Print a summary of every run directory under a root (default: runs/)."""
import csv
import json
import math
import sys
from pathlib import Path

# reference refinement errors (first dt of each column) and ripening times
REF_FIRST_ERROR = {
    ("table1", "bdf2"): 2.9454e-5, ("table1", "sdirk2"): 4.7787e-6, ("table1", "sdc2"): 6.3763e-5,
    ("table2", "bdf3"): 1.6001e-5, ("table2", "sdirk3"): 1.7259e-6, ("table2", "sdc3"): 1.2669e-5,
    ("table3", "sdc3"): 9.9462e-6,
    ("table2d", "bdf2"): 3.7891e-3, ("table2d", "sdirk2"): 1.0250e-3, ("table2d", "sdc2"): 2.3334e-3,
}
REF_RIPENING = {"ripening1d": 8317.81, "ripening1d_adaptive": 8320.03, "ripening2d": 80.10}


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def refinement(run, preset):
    print(f"  {'method':8} {'dt':>10} {'error':>12} {'order':>7}  status")
    seen = set()
    for r in rows(run / "refinement.csv"):
        err = float(r["error"])
        note = ""
        if r["method"] not in seen:
            seen.add(r["method"])
            ref = REF_FIRST_ERROR.get((preset, r["method"]))
            if ref and not math.isnan(err):
                note = f"  (x{err / ref:.2f} of reference)"
        print(f"  {r['method']:8} {float(r['dt']):10.6g} {err:12.4e} {float(r['order']):7.4f}  {r['status']}{note}")


def history(run, summary):
    h = rows(run / "history.csv")
    t = [float(r["t"]) for r in h]
    e = [float(r["energy"]) for r in h]
    probe = [float(r["probe"]) for r in h]
    de = max((b - a for a, b in zip(e, e[1:])), default=0.0)
    print(f"  t={summary['t']:.6g} steps={summary['steps']} rejects={summary['rejects']} "
          f"sweeps={summary['iterations']} wall={summary['wall_time']:.0f}s max dE={de:.2e}")
    tr = summary.get("ripening_time")
    if tr is not None:
        ref = REF_RIPENING.get(summary["preset"])
        print(f"  ripening time {tr:.2f}" + (f" (reference {ref})" if ref else ""))
    if summary["model"] in ("vch2d", "fch2d"):
        label = "phase regions" if summary["model"] == "vch2d" else "Fourier peaks"
        changes = [(t[i], probe[i]) for i in range(len(t)) if i == 0 or probe[i] != probe[i - 1]]
        print(f"  {label}: " + ", ".join(f"{c:g}@t={s:.3g}" for s, c in changes[:12])
              + (" ..." if len(changes) > 12 else ""))


def main(root):
    for run in sorted(p for p in Path(root).iterdir() if (p / "summary.json").exists()):
        s = json.loads((run / "summary.json").read_text())
        print(f"[{run.name}] preset={s['preset'] or '-'} model={s['model']} task={s['task']}")
        if s["task"] == "refine":
            refinement(run, s["preset"])
        elif s["task"] == "timing":
            for r in rows(run / "timing.csv"):
                print(f"  n={r['n']:>7} {float(r['cpu_seconds_per_sweep']):.3e} s/sweep  ratio {float(r['ratio']):.2f}")
        else:
            history(run, s)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "runs")
