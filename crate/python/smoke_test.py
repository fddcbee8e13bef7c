"""Smoke test for the hexeval_py extension module.

Builds the extension with cargo unless HEXEVAL_PY_PATH points at a directory
that already holds hexeval_py.so, then exercises parsing, grounding, solving
and the graph accessors.
"""

import os
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "crates" / "hexeval" / "tests" / "fixtures"


def build_extension() -> Path:
    subprocess.run(
        ["cargo", "build", "-p", "hexeval-py", "--release", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    out = Path(tempfile.mkdtemp(prefix="hexeval_py_"))
    shutil.copy(ROOT / "target" / "release" / "libhexeval_py.so", out / "hexeval_py.so")
    return out


def main() -> None:
    path = os.environ.get("HEXEVAL_PY_PATH")
    sys.path.insert(0, str(Path(path) if path else build_extension()))
    import hexeval_py as hx

    p = hx.parse("a | b. c :- a.")
    assert len(p) == 2, p.rules
    assert hx.solve(p) == [["a", "c"], ["b"]]
    assert len(hx.solve(p, stream=True, limit=1)) == 1
    assert "c :- a." in p.rules and p.is_ground()

    g = hx.ground(hx.Program((FIXTURES / "concat.hex").read_text()))
    assert len(g) == 5 and g.is_ground()

    reg = hx.Registry()
    reg.load_tables(str(FIXTURES / "rq.etab"))
    assert "rq" in reg.names
    swim = hx.parse((FIXTURES / "pswim.hex").read_text())
    expected = None
    for heuristic in ("monolithic", "trivial", "greedy"):
        sets = hx.solve(swim, reg, heuristic=heuristic, share_constraints=True)
        assert len(sets) == 1
        assert {"swim(outd)", "goto(altD)", "need(loc,yogamat)"} <= set(sets[0])
        expected = expected or sets
        assert sets == expected

    edges = hx.dependency_graph(swim, reg)
    assert all(kind in ("m", "n") for _, _, kind in edges)
    units, unit_edges = hx.evaluation_graph(swim, reg, heuristic="trivial")
    assert all(u < len(units) and v < len(units) for u, v in unit_edges)

    program, tables = hx.generate("rs", 1, seed=3)
    reg = hx.Registry()
    reg.add_tables(tables)
    assert hx.solve(hx.parse(program), reg)

    for bad, exc in (("p(a", hx.ParseError), ("p :- &nosuch[a]().", hx.HexevalError)):
        try:
            hx.solve(hx.parse(bad))
        except exc:
            pass
        else:
            raise AssertionError(f"{bad!r} did not raise {exc.__name__}")
    try:
        hx.ground(hx.parse("s(a). s(Y) :- s(X), &concat[X,x](Y)."), max_iter=4)
    except hx.GroundingDiverged:
        pass
    else:
        raise AssertionError("diverging program grounded")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
