"""Print the worked examples and the cup/closed-form table for a few groups."""

from h3torus import cohomres as cr
from h3torus import h3nr
from h3torus.classfield import LocalData
from h3torus.groups import FinAbGroup

EXAMPLES = [
    ((3, 3), 9, [1, 3, 9]),
    ((3, 3), 9, [1, 3, 3]),
    ((3, 3, 3), 27, [1, 3, 9]),
]


def main():
    for fs, n, degs in EXAMPLES:
        r = h3nr.unramified_h3(FinAbGroup(fs), LocalData.from_degrees(n, degs))
        print(f"G={fs} local degrees {degs}: H3_nr = {r.full_group}")
    print()
    print(f"{'G':<14}{'cup coker':<24}{'closed form':<24}Br_nr")
    for fs in [(2, 2), (2, 2, 2), (3, 3, 3), (2, 4, 4), (3, 3, 3, 3), (2, 2, 4, 4)]:
        G = FinAbGroup(fs)
        print(f"{str(fs):<14}{str(cr.cup_coker_2_2_4(G)):<24}{str(h3nr.closed_form_coker(G)):<24}"
              f"{h3nr.brauer_nr(G)}")


if __name__ == "__main__":
    main()
