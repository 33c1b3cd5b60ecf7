"""Smoke test for the compiled bindings.

Build first with ``maturin develop -m crates/polyfract-py/Cargo.toml``.
"""

import json

import polyfract_py as pf


def main() -> None:
    names = pf.examples()
    assert names[:4] == ["carpet", "folded-square", "folded-triangle", "hexa-d3"], names

    carpet = pf.example_text("carpet")
    axioms = json.loads(pf.validate(carpet))
    assert all(axioms[k]["passed"] for k in ("a1", "a2", "a3", "a4", "a5"))

    broken = json.loads(pf.validate(pf.example_text("identity-square")))
    assert not broken["a4"]["passed"]

    verdict = json.loads(pf.analyze(carpet))
    assert verdict["theorem"] == "ZJ_transitive", verdict["theorem"]

    est = json.loads(pf.scaling(carpet, 2.0, m_max=3))
    assert est["ratios"][-1] < 1.0, est["ratios"]

    svg = pf.render(carpet, 2)
    assert svg.count("<polygon") == 64

    try:
        pf.validate("not = [toml")
    except ValueError:
        pass
    else:
        raise AssertionError("malformed input accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
