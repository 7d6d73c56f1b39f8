"""Dimension assignments of bracket objects, checked as formula identities."""

from pbn.dims import reference_report


def main():
    rows = reference_report()
    width = max(len(name) for name, _, _ in rows)
    for name, expected, res in rows:
        status = "ok" if res.passed == expected else "UNEXPECTED"
        verdict = "consistent" if res.passed else "inconsistent"
        print(f"{name:<{width}}  {res.lhs} == {res.rhs}  ->  {verdict} ({res.message})  [{status}]")


if __name__ == "__main__":
    main()
