"""How the covering lattice grows as the robustness radius shrinks."""

from enstrophy_cert.covering import LatticeSpec, lattice_count

S, CAP = 1.0, 10**12
print(f"{'delta':>8} {'rule':>6} {'N':>9} {'M':>3} {'points':>14}")
for delta in (2.0, 1.0, 0.5, 0.1, 0.01):
    for rule in ("safe", "coordinate"):
        spec = LatticeSpec.for_ball(S, delta, rule)
        count, exact = lattice_count(spec, cap=CAP)
        note = "" if exact else "  (above cap)" if count > CAP else "  (estimate)"
        print(f"{delta:8.3g} {rule:>6} {spec.N:9d} {spec.M:3d} {count:14.4g}{note}")
