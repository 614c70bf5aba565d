"""
Manifest for a local IDMT-Traffic download
==========================================

Walks the audio directory of the dataset and writes the manifest CSV the
toolkit reads (``path,label,speed_kmh,mic,road``). Labels, speed, microphone
and road condition are taken from the file names, which follow

    <date-time>_<location>_<speed>Kmh_<position>_<daytime>_<weather>_<class><dir>_<mic>_<channel>[-BG].wav

e.g. ``2019-10-22-08-40_Fraunhofer-IDMT_30Kmh_1116695_M_D_CR_ME_CH12.wav``.
Class letters C, T, M map to car, truck and motorcycle; ``-BG`` files are the
no-vehicle background class. Bus events are left out. Files that do not fit
the pattern are listed and skipped, so check the summary before running.

    python demos/make_idmt_manifest.py IDMT_Traffic/audio idmt_manifest.csv [--mic SE]
    VEHICLE_AUDIO_IDMT_MANIFEST=idmt_manifest.csv pytest tests/test_acceptance.py
"""

import argparse
import re
from collections import Counter
from pathlib import Path

from vehicle_audio import ClassLabel, SampleRecord, write_manifest

NAME = re.compile(r"_(?P<speed>\d+)Kmh_\d+_[A-Z]+_(?P<weather>[DW])_(?P<cls>[A-Z])[LR]?_(?P<mic>[A-Z]+)_CH\d+"
                  r"(?P<bg>-BG)?\.wav$", re.IGNORECASE)
CLASSES = {"C": ClassLabel.CAR, "T": ClassLabel.TRUCK, "M": ClassLabel.MOTORCYCLE}
ROADS = {"D": "dry", "W": "wet"}


def parse(path: Path):
    m = NAME.search(path.name)
    if m is None:
        return None, "unparsed"
    if m["bg"]:
        label = ClassLabel.NONE
    elif m["cls"].upper() in CLASSES:
        label = CLASSES[m["cls"].upper()]
    else:
        return None, "bus" if m["cls"].upper() == "B" else "unparsed"
    return SampleRecord(str(path), label, int(m["speed"]), m["mic"].upper(), ROADS[m["weather"].upper()]), None


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("audio_dir")
    ap.add_argument("manifest")
    ap.add_argument("--mic", default=None, help="keep only this microphone (ME or SE)")
    args = ap.parse_args()

    records, skipped, unparsed = [], Counter(), []
    for path in sorted(Path(args.audio_dir).rglob("*.wav")):
        rec, why = parse(path)
        if rec is None:
            skipped[why] += 1
            if why == "unparsed":
                unparsed.append(path.name)
            continue
        if args.mic and rec.mic != args.mic.upper():
            skipped["other mic"] += 1
            continue
        records.append(rec)

    write_manifest(args.manifest, records, extended=False)
    counts = Counter(r.label.value for r in records)
    print(f"{len(records)} clips -> {args.manifest}: " + ", ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    if skipped:
        print("skipped: " + ", ".join(f"{k}={v}" for k, v in sorted(skipped.items())))
    for name in unparsed[:10]:
        print("  unparsed:", name)


if __name__ == "__main__":
    main()
