"""Frame-level features of a synthetic two-harmonic voice signal.

Builds ten seconds of a 200 Hz tone whose second harmonic sits 6 dB below the
first, inserts a silent gap, and shows what the extractor reports per frame.
"""
import numpy as np

from phonotrauma.signal import AccelRecording, extract_frame_features
from phonotrauma.enums import Condition
from phonotrauma.synth import gen_harmonic_signal

FS = 11025

tone = gen_harmonic_signal(200, [1.0, 0.5], FS, duration_s=5.0, peak=0.3).samples
gap = np.zeros(2 * FS)
quiet = gen_harmonic_signal(180, [1.0, 1.0], FS, duration_s=3.0, peak=0.05).samples
rec = AccelRecording(np.concatenate([tone, gap, quiet]), FS, "demo", Condition.LAB_RAINBOW)

rows = extract_frame_features(rec)
voiced = [r for r in rows if r.voiced]
print(f"{len(rows)} frames of 50 ms, {len(voiced)} voiced")
for label, sel in [("loud 200 Hz", voiced[:5]), ("soft 180 Hz", voiced[-5:])]:
    print(label)
    for r in sel:
        print(f"  frame {r.frame_index:3d}  f0 {r.f0_hz:6.1f} Hz  H1-H2 {r.h1h2_db:6.2f} dB  NSAM {r.nsam_db:6.2f} dB")
