"""Sweep the unknown-count comparison N1 (compound route) vs N2 (staged route).

Prints a table per state dimension; for k much smaller than n the staged
route needs far fewer unknowns, while near k = n the compound route can win.
"""

from kcontract.lin_contraction import variable_counts


def main():
    for n in (6, 8, 10, 12, 16):
        rows = []
        for k in range(1, n + 1):
            n1, n2 = variable_counts(n, k)
            rows.append((k, n1, n2, "staged" if n2 <= n1 else "compound"))
        print(f"n = {n}")
        print("  k    N1(compound)   N2(staged)   cheaper")
        for k, n1, n2, who in rows:
            print(f"  {k:<4} {n1:<14} {n2:<12} {who}")
        print()


if __name__ == "__main__":
    main()
