"""Inject each anomaly type into one clean trace and look at it as an image.

Writes one PGM per (anomaly, transform) pair into ./demo-images and prints
a few numbers that show how each transform reacts to the anomaly.
"""
from pathlib import Path

import numpy as np

from linksight import imaging, inject, traces
from linksight.traces import AnomalyKind

out = Path("demo-images")
out.mkdir(exist_ok=True)

clean = traces.generate_synthetic_normal(1, length=300, seed=3).traces[0]
print("clean trace: mean %.1f, std %.2f, min %d, max %d"
      % (clean.values.mean(), clean.values.std(), clean.values.min(), clean.values.max()))

# fixed parameters, all inside the default injection ranges
variants = {
    AnomalyKind.NONE: clean,
    AnomalyKind.SUDDEN_D: inject.inject_sudden_d(clean, start=240),
    AnomalyKind.SUDDEN_R: inject.inject_sudden_r(clean, start=120, duration=15),
    AnomalyKind.INSTA_D: inject.inject_insta_d(clean, positions=[60, 200, 270]),
    AnomalyKind.SLOW_D: inject.inject_slow_d(clean, start=10, duration=160, slope=1.0),
}

print()
print(f"{'anomaly':<9}{'kind':<10}{'min':>9}{'max':>9}{'mean':>9}")
for label, trace in variants.items():
    for kind in ("rp", "gasf", "gadf", "snapshot"):
        img = imaging.transform(trace, kind)
        cells = img.cells
        print(f"{label.value:<9}{kind:<10}{cells.min():9.3f}{cells.max():9.3f}{cells.mean():9.3f}")
        (out / f"{label.value}-{kind}.pgm").write_bytes(imaging.export_image(img, "pgm"))

# A sudden drop shows up in the RP as a bright band: every pair (i, j)
# straddling the drop differs by roughly the pre-drop RSSI level.
rp = imaging.recurrence_plot(variants[AnomalyKind.SUDDEN_D]).cells
before, after = slice(0, 239), slice(239, 300)
print()
print("SuddenD RP, mean cell before/before: %.2f" % rp[before, before].mean())
print("SuddenD RP, mean cell before/after:  %.2f" % rp[before, after].mean())

# GAF images ignore offset and scale; the RP only ignores the offset.
shifted = variants[AnomalyKind.SLOW_D].replace(values=variants[AnomalyKind.SLOW_D].values * 0.5 + 20)
for kind in ("rp", "gasf"):
    a = imaging.transform(variants[AnomalyKind.SLOW_D], kind).cells
    b = imaging.transform(shifted, kind).cells
    print(f"{kind}: max |change| after x*0.5+20 = {np.abs(a - b).max():.3g}")

print(f"\nwrote {len(list(out.glob('*.pgm')))} images to {out}/")
