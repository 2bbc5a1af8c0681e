"""Regenerates data/templates/*.json.

Every alloy shares one base line set. A "dipole" is a pair of nearby lines of
equal base intensity; an alloy raises one line of a dipole and lowers the
other. Each alloy touches two dipoles (four lines), one below 2.4 MeV that no
other alloy touches and one above with a distinct (dipole, sign) pair, and
adds one or two weak lines of its own.
"""
import argparse
import json

ap = argparse.ArgumentParser()
ap.add_argument("--eps", type=float, default=0.13, help="relative intensity change of perturbed lines")
ap.add_argument("--continuum", type=float, default=5e-5, help="continuum amplitude")
ap.add_argument("--minor", type=float, default=0.02, help="scale of alloy-specific lines")
ap.add_argument("--out", default="data/templates")
args = ap.parse_args()
EPS, AMP, MINOR, OUT = args.eps, args.continuum, args.minor, args.out
DECAY = 0.0006
def r(x): return round(x, 6)

def build(material, anchors, dipoles, alloys):
    out = []
    for label, spec in alloys.items():
        factor = {}
        for idx, s in spec["dipoles"]:
            lo, hi, _ = dipoles[idx]
            factor[lo] = 1 + EPS * s
            factor[hi] = 1 - EPS * s
        lines = [{"energy_kev": e, "intensity": i} for e, i in anchors]
        for lo, hi, w in dipoles:
            lines.append({"energy_kev": lo, "intensity": r(w * factor.get(lo, 1.0))})
            lines.append({"energy_kev": hi, "intensity": r(w * factor.get(hi, 1.0))})
        lines += [{"energy_kev": e, "intensity": r(i * MINOR)} for e, i in spec["minor"]]
        lines.sort(key=lambda l: l["energy_kev"])
        out.append({"label": label, "lines": lines,
                    "continuum": {"amplitude": AMP, "decay_per_kev": DECAY}, "escape_fraction": 0.1})
    return {"material": material, "templates": out}

al_anchors = [(7724.0, 1.00), (1778.9, 0.90)]
al_dipoles = [(640.0, 800.0, 0.30), (983.0, 1160.0, 0.30), (1368.6, 1560.0, 0.25), (1950.0, 2110.0, 0.20),
              (2223.2, 2380.0, 0.25), (2754.0, 3033.9, 0.25), (4133.4, 4400.0, 0.20), (6101.0, 6400.0, 0.12)]
al_alloys = {
    "AlMg3": {"dipoles": [(0, 1), (5, 1)], "minor": [(3917.0, 0.010)]},
    "AlMn1": {"dipoles": [(1, -1), (5, -1)], "minor": [(846.8, 0.010)]},
    "AlSi1MgMn": {"dipoles": [(2, 1), (6, 1)], "minor": [(3539.0, 0.012), (4934.0, 0.008)]},
    "AlZn5Mg": {"dipoles": [(3, -1), (6, -1)], "minor": [(1077.4, 0.012)]},
    "AlCu4Mg": {"dipoles": [(4, 1), (7, 1)], "minor": [(7915.6, 0.010), (278.3, 0.010)]},
}
cu_anchors = [(7915.6, 1.00), (278.3, 0.60)]
cu_dipoles = [(159.3, 385.8, 0.30), (608.9, 869.6, 0.25), (1039.2, 1345.8, 0.25), (1481.8, 1700.0, 0.20),
              (2000.0, 2223.2, 0.20), (3361.0, 4443.1, 0.15), (5299.1, 5600.0, 0.12), (7307.3, 7637.4, 0.18)]
cu_alloys = {
    "CuZn37": {"dipoles": [(0, 1), (5, 1)], "minor": [(1115.5, 0.012)]},
    "CuZn39Pb3": {"dipoles": [(1, -1), (5, -1)], "minor": [(1077.4, 0.012), (7367.8, 0.008)]},
    "CuSn6": {"dipoles": [(2, 1), (6, 1)], "minor": [(1293.6, 0.010)]},
    "CuNi18Zn20": {"dipoles": [(3, -1), (6, -1)], "minor": [(465.0, 0.010)]},
    "CuAl10Ni5": {"dipoles": [(4, 1), (7, 1)], "minor": [(1778.9, 0.012)]},
}
for name, doc in (("aluminium_like", build("aluminium-like", al_anchors, al_dipoles, al_alloys)),
                  ("copper_like", build("copper-like", cu_anchors, cu_dipoles, cu_alloys))):
    with open(f"{OUT}/{name}.json", "w") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")
