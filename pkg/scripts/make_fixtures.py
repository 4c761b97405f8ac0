"""Regenerate the synthetic fixtures under tests/fixtures/.

The trace mixes the raw and human-readable Nextflow cell formats on purpose.
Usage: python scripts/make_fixtures.py [out_dir]
"""
import random
import sys
from datetime import datetime, timedelta, timezone
from pathlib import Path

HEADER = ["task_id", "hash", "native_id", "name", "status", "exit", "submit", "start", "complete",
          "duration", "realtime", "%cpu", "cpus", "memory", "peak_rss", "hostname"]

# (name, realtime ms, cpus, %cpu); the first ten mirror a published AmpliSeq extract
TASKS = [
    ("DADA2_ERR", 2576181, 6, 306.0),
    ("PICRUST", 1977266, 6, 340.0),
    ("DADA2_DENOISING", 651643, 6, 276.0),
    ("BARRNAP", 348293, 2, 198.0),
    ("DADA2_ADDSPECIES", 288655, 1, 100.0),
    ("DADA2_TAXONOMY", 204224, 16, 1310.0),
    ("DADA2_RMCHIMERA", 66396, 6, 506.0),
    ("DADA2_QUALITY1", 63627, 2, 102.0),
    ("DADA2_QUALITY1", 63645, 2, 101.0),
    ("MULTIQC", 48646, 1, 57.0),
    ("FASTQC", 41000, 2, 180.5),
    ("FASTQC", 39211, 2, 176.0),
    ("CUTADAPT", 120000, 4, 390.2),
    ("CUTADAPT", 153000, 4, 371.9),
    ("DADA2_FILTNTRIM", 95012, 4, 250.0),
    ("DADA2_MERGE", 30500, 1, 99.1),
    ("PHYLOSEQ", 12000, 1, 0.0),
    ("QIIME2_EXPORT", 7450, 1, 85.3),
    ("SAMPLESHEET_CHECK", 1500, 1, 12.0),
    ("CUSTOM_DUMPSOFTWAREVERSIONS", 0, 1, 0.0),
]
MEMORY = ["6 GB", "12 GB", "6 GB", "2 GB", "4 GB", "32 GB", "6 GB", "512 MB", "512 MB", "1 GB",
          "2147483648", "2 GB", "4 GB", "4 GB", "8 GB", "-", "1 GB", "768 MB", "128 MB", "64 MB"]


def fmt_duration(ms):
    if ms < 1000:
        return f"{ms}ms"
    s, rem = divmod(ms, 1000)
    h, s = divmod(s, 3600)
    m, s = divmod(s, 60)
    parts = [f"{h}h"] * bool(h) + [f"{m}m"] * bool(m)
    parts.append(f"{s}.{rem // 100}s" if rem and not (h or m) else f"{s}s")
    return " ".join(parts)


def main(out_dir):
    rng = random.Random(26)
    out = Path(out_dir)
    t0 = datetime(2024, 9, 26, 16, 0, 0, tzinfo=timezone.utc)
    rows = []
    cursor = t0
    for i, (name, realtime, cpus, cpu) in enumerate(TASKS):
        task_id = 40 + i
        submit = cursor
        start = submit + timedelta(milliseconds=rng.randint(200, 5000))
        complete = start + timedelta(milliseconds=realtime + rng.randint(0, 3000))
        cursor = submit + timedelta(milliseconds=rng.randint(60_000, 600_000))
        human = i % 3 != 0
        ts = (lambda t: t.strftime("%Y-%m-%d %H:%M:%S.") + f"{t.microsecond // 1000:03d}") if human else \
             (lambda t: str(int(t.timestamp() * 1000)))
        peak = str(rng.randint(50, 900) * 2**20)
        rows.append([
            str(task_id), f"{rng.getrandbits(24):06x}/{rng.getrandbits(24):06x}", str(1000 + i), name,
            "COMPLETED", "0", ts(submit), ts(start), ts(complete),
            fmt_duration(int((complete - submit).total_seconds() * 1000)),
            fmt_duration(realtime) if human else str(realtime),
            f"{cpu:.1f}%" if human else f"{cpu:.1f}",
            str(cpus), MEMORY[i], peak, "edge-01",
        ])
    # rows the default status filter must drop
    extra_start = t0 + timedelta(minutes=30)
    for task_id, status in ((60, "FAILED"), (61, "CACHED")):
        s = extra_start.strftime("%Y-%m-%d %H:%M:%S.000")
        c = (extra_start + timedelta(seconds=90)).strftime("%Y-%m-%d %H:%M:%S.000")
        rows.append([str(task_id), "ffffff/ffffff", str(2000 + task_id), "FLAKY_STEP", status, "1" if status == "FAILED" else "0",
                     s, s, c, "1m 30s", "1m 29s", "95.0%", "2", "2 GB", "1 GB", "edge-01"])
    text = "\n".join("\t".join(r) for r in [HEADER] + rows) + "\n"
    (out / "trace20.tsv").write_text(text, encoding="utf-8")

    (out / "ci3.csv").write_text(
        "# signal=average\n"
        "start,ci_g_per_kwh\n"
        "2024-09-26T15:30:00Z,120\n"
        "2024-09-26T16:45:00Z,45\n"
        "2024-09-26T17:50:00Z,210\n",
        encoding="utf-8",
    )

    lines = ["# node=edge-01", "# governor=powersave", "# date=2024-09-20", "load_pct,cpu_watts,mem_watts"]
    for k in range(11):
        load = k / 10
        watts = 18 + 70 * load + 20 * load**2 - 25 * load**3 + rng.uniform(-0.8, 0.8)
        lines.append(f"{k * 10},{watts:.2f},{2.4 + rng.uniform(-0.2, 0.2):.2f}")
    (out / "readings11.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "tests" / "fixtures")
