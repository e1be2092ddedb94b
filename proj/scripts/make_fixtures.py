#!/usr/bin/env python3
"""Regenerate the feeder fixtures under data/.

ieee37: IEEE 37-bus underground test feeder (4.8 kV delta, all segments
three-phase), normalized to per-unit on Vbase = 4.8 kV (line-line) and
Sbase = 2.5 MVA, so Zbase = 4.8e3**2 / 2.5e6 = 9.216 ohm.  The regulator
between the source node and 701 is not modeled; 701 is the substation bus.
Loads keep the published delta spot-load connections and kW/kvar ratings
(the 701 and 714 spot loads are not installed so the fixture carries 23
load buses).  Six inverter-based DER units are installed at otherwise
load-free buses, three switchable segments are marked, and three normally
open tie lines are added so the feeder can be reconfigured.

threebus: single-phase 3-bus star used by the closed-form oracle tests;
two lossless lines with susceptance 10 pu hang off bus 1.
"""

import csv
import json
import math
import os

OUT = os.path.join(os.path.dirname(__file__), os.pardir, "data")

ZBASE = 4.8e3 ** 2 / 2.5e6  # ohm
SBASE_KVA = 2500.0
FT_PER_MILE = 5280.0

# Line configurations: series impedance (ohm/mile) upper triangle and
# shunt susceptance (uS/mile, diagonal).  Underground concentric-neutral
# cables, phasing a-b-c.
CONFIGS = {
    721: dict(
        z11=(0.2926, 0.1973), z12=(0.0673, -0.0368), z13=(0.0337, -0.0417),
        z22=(0.2646, 0.1900), z23=(0.0673, -0.0368), z33=(0.2926, 0.1973),
        b=159.7919),
    722: dict(
        z11=(0.4751, 0.2973), z12=(0.1629, -0.0326), z13=(0.1234, -0.0607),
        z22=(0.4488, 0.2678), z23=(0.1629, -0.0326), z33=(0.4751, 0.2973),
        b=127.8306),
    723: dict(
        z11=(1.2936, 0.6713), z12=(0.4871, 0.2111), z13=(0.4585, 0.2392),
        z22=(1.3022, 0.6326), z23=(0.4871, 0.2111), z33=(1.2936, 0.6713),
        b=74.8405),
    724: dict(
        z11=(2.0952, 0.7758), z12=(0.5204, 0.2738), z13=(0.4926, 0.2123),
        z22=(2.1068, 0.7398), z23=(0.5204, 0.2738), z33=(2.0952, 0.7758),
        b=60.2483),
}

# from, to, length (ft), config
SEGMENTS = [
    (701, 702, 960, 721), (702, 705, 400, 722), (702, 713, 360, 723),
    (702, 703, 1320, 722), (703, 727, 240, 723), (703, 730, 600, 723),
    (704, 714, 80, 724), (704, 720, 800, 723), (705, 742, 320, 724),
    (705, 712, 240, 724), (706, 725, 280, 724), (707, 724, 760, 724),
    (707, 722, 120, 724), (708, 733, 320, 723), (708, 732, 320, 724),
    (709, 731, 600, 723), (709, 708, 320, 723), (710, 735, 200, 724),
    (710, 736, 1280, 724), (711, 741, 400, 723), (711, 740, 200, 724),
    (713, 704, 520, 723), (714, 718, 520, 724), (720, 707, 920, 724),
    (720, 706, 600, 723), (727, 744, 280, 723), (730, 709, 200, 723),
    (733, 734, 560, 723), (734, 737, 640, 723), (734, 710, 520, 724),
    (737, 738, 400, 723), (738, 711, 400, 723), (744, 728, 200, 724),
    (744, 729, 280, 724),
]

# Normally closed segments that carry a switch.
SWITCHED = {(710, 735), (703, 730), (727, 744)}

# Normally open tie lines: from, to, length (ft), config.
TIES = [(742, 744, 400, 724), (735, 737, 400, 723), (703, 741, 600, 723)]

# Delta spot loads: bus -> list of (terminal pair, kW, kvar).
LOADS = {
    712: [("ca", 85, 40)],
    713: [("ca", 85, 40)],
    718: [("ab", 85, 40)],
    720: [("ca", 85, 40)],
    722: [("bc", 140, 70), ("ca", 21, 10)],
    724: [("bc", 42, 21)],
    725: [("bc", 42, 21)],
    727: [("ca", 42, 21)],
    728: [("ab", 42, 21), ("bc", 42, 21), ("ca", 42, 21)],
    729: [("ab", 42, 21)],
    730: [("ca", 85, 40)],
    731: [("bc", 85, 40)],
    732: [("ca", 42, 21)],
    733: [("ab", 85, 40)],
    734: [("ca", 42, 21)],
    735: [("ca", 85, 40)],
    736: [("bc", 42, 21)],
    737: [("ab", 140, 70)],
    738: [("ab", 126, 62)],
    740: [("ca", 85, 40)],
    741: [("ca", 42, 21)],
    742: [("ab", 8, 4), ("bc", 85, 40)],
    744: [("ab", 42, 21)],
}

# Delta-connected DER units (unity power factor): bus -> (pair, kW).
DERS = {
    705: [("ab", 80, 0), ("bc", 80, 0)],
    706: [("bc", 120, 0)],
    707: [("bc", 100, 0), ("ca", 100, 0)],
    708: [("bc", 120, 0)],
    710: [("ab", 100, 0)],
    711: [("ca", 100, 0)],
}

PMU_BUSES = [701, 704, 709, 734]
METERED = [[701, 702], [702, 703], [713, 704], [720, 707],
           [709, 708], [733, 734], [737, 738]]


def cnum(re, im):
    return [re, im]


def zmat_pu(cfg, feet):
    c = CONFIGS[cfg]
    scale = feet / FT_PER_MILE / ZBASE
    rows = [[c["z11"], c["z12"], c["z13"]],
            [c["z12"], c["z22"], c["z23"]],
            [c["z13"], c["z23"], c["z33"]]]
    return [[cnum(z[0] * scale, z[1] * scale) for z in row] for row in rows]


def ysh_pu(cfg, feet):
    c = CONFIGS[cfg]
    b = c["b"] * 1e-6 * feet / FT_PER_MILE * ZBASE
    return [[cnum(0.0, b if i == j else 0.0) for j in range(3)]
            for i in range(3)]


def branch(fr, to, feet, cfg, switchable, closed):
    return dict(**{"from": fr}, to=to, phases="abc",
                z=zmat_pu(cfg, feet), ysh=ysh_pu(cfg, feet),
                switchable=switchable, closed=closed)


def make_ieee37():
    buses = sorted({b for seg in SEGMENTS for b in seg[:2]})
    assert len(buses) == 35, len(buses)
    branches = [branch(f, t, ft, cfg, (f, t) in SWITCHED, True)
                for f, t, ft, cfg in SEGMENTS]
    branches += [branch(f, t, ft, cfg, True, False) for f, t, ft, cfg in TIES]

    injections = []
    for bus in sorted(LOADS):
        terms = LOADS[bus]
        injections.append(dict(
            bus=bus, kind="load", connection="delta",
            terminals=[t[0] for t in terms],
            rating=[[t[1] / SBASE_KVA, t[2] / SBASE_KVA] for t in terms]))
    for bus in sorted(DERS):
        terms = DERS[bus]
        injections.append(dict(
            bus=bus, kind="der", connection="delta",
            terminals=[t[0] for t in terms],
            rating=[[t[1] / SBASE_KVA, t[2] / SBASE_KVA] for t in terms]))
    assert len([i for i in injections if i["kind"] == "load"]) == 23
    assert len([i for i in injections if i["kind"] == "der"]) == 6

    s3 = math.sqrt(3.0) / 2.0
    doc = dict(
        schema="feeder/1",
        name="ieee37",
        vbase_kv_ll=4.8,
        sbase_mva=2.5,
        substation=dict(bus=701, voltage=[cnum(1.0, 0.0),
                                          cnum(-0.5, -s3),
                                          cnum(-0.5, s3)]),
        buses=[dict(id=b, phases="abc") for b in buses],
        branches=branches,
        injections=injections)
    return doc


def make_ieee37_measurements():
    return dict(
        schema="measconfig/1",
        pmu_voltage=dict(buses=PMU_BUSES, sigma=1e-3),
        current_magnitude=dict(branches=METERED, sigma=1e-2),
        pseudo_injection=dict(sigma=1e-1))


def make_threebus():
    b = 10.0
    line = dict(z=[[cnum(0.0, 1.0 / b)]],
                ysh=[[cnum(0.0, 0.0)]],
                phases="a", switchable=False, closed=True)
    doc = dict(
        schema="feeder/1",
        name="threebus",
        substation=dict(bus=1, voltage=[cnum(1.0, 0.0)]),
        buses=[dict(id=1, phases="a"), dict(id=2, phases="a"),
               dict(id=3, phases="a")],
        branches=[dict(**{"from": 1}, to=2, **line),
                  dict(**{"from": 1}, to=3, **line)],
        injections=[
            dict(bus=2, kind="load", connection="wye", terminals=["a"],
                 rating=[[0.30, 0.10]]),
            dict(bus=3, kind="load", connection="wye", terminals=["a"],
                 rating=[[0.20, 0.06]]),
        ])
    return doc


def make_threebus_measurements():
    return dict(
        schema="measconfig/1",
        voltage_magnitude=dict(buses=[1, 2, 3], sigma=1e-3),
        branch_power=dict(branches=[[1, 2], [1, 3]], sigma=1e-2,
                          components="p"))


def make_profiles(path):
    load = [0.55, 0.50, 0.47, 0.45, 0.45, 0.48, 0.55, 0.65,
            0.72, 0.75, 0.78, 0.80, 0.82, 0.80, 0.78, 0.80,
            0.85, 0.95, 1.00, 0.98, 0.92, 0.82, 0.70, 0.60]
    der = [0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 0.05, 0.20,
           0.45, 0.65, 0.85, 0.95, 1.00, 1.00, 0.90, 0.75,
           0.55, 0.30, 0.10, 0.00, 0.00, 0.00, 0.00, 0.00]
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["t", "unit_class", "multiplier"])
        for t in range(24):
            w.writerow([t, "load", f"{load[t]:.4f}"])
            w.writerow([t, "der", f"{der[t]:.4f}"])


def dump(doc, name):
    path = os.path.join(OUT, name)
    with open(path, "w") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")
    print(f"wrote {path}")


def main():
    os.makedirs(OUT, exist_ok=True)
    ieee37 = make_ieee37()
    dump(ieee37, "ieee37_feeder.json")
    dump(make_ieee37_measurements(), "ieee37_measurements.json")
    dump(make_threebus(), "threebus_feeder.json")
    dump(make_threebus_measurements(), "threebus_measurements.json")
    make_profiles(os.path.join(OUT, "profiles_day.csv"))
    print(f"profiles written")

    n_phase = 3 * len(ieee37["buses"])
    n_load = len([i for i in ieee37["injections"] if i["kind"] == "load"])
    n_der = len([i for i in ieee37["injections"] if i["kind"] == "der"])
    n_meas = 2 * 3 * len(PMU_BUSES) + 3 * len(METERED) + 2 * (n_load + n_der)
    print(f"ieee37: {len(ieee37['buses'])} buses, {n_phase} phase nodes, "
          f"{len(ieee37['branches'])} branches, "
          f"{n_load} loads, {n_der} der, {n_meas} measurements")


if __name__ == "__main__":
    main()
