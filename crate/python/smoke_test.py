"""Smoke test for the newsrisk_py extension module.

Build and install first, e.g.:
    maturin build --release -m crates/python/Cargo.toml
    pip install target/wheels/newsrisk_py-*.whl
"""

import math
import tempfile
from pathlib import Path

import newsrisk_py as nr


def main() -> None:
    q = nr.Quarter("2012Q3")
    assert str(q) == "2012Q3" and q.year == 2012 and q.index == 3
    assert q.last_day() == "2012-09-30"
    assert str(q.next()) == "2012Q4"
    assert nr.quarter_of("2016-06-30T23:59:59Z") == "2016Q2"
    assert nr.quarter_of("2016-07-01T00:00:00Z") == "2016Q3"

    # 5-cycle: every node is equivalent
    cycle = [(i, (i + 1) % 5, 1) for i in range(5)]
    c = nr.information_centrality(5, cycle)
    assert max(c) - min(c) < 1e-9, c
    # star: the hub is the most central
    star = [(0, j, 3) for j in range(1, 5)]
    s = nr.information_centrality(5, star)
    assert s[0] == max(s)
    assert nr.minmax_rescale([2.0, 4.0, 3.0]) == [0.0, 1.0, 0.5]

    # focal 0, direct neighbour 1, two-hop player 2
    r = nr.riskrank(3, [(0, 1, 1), (1, 2, 1)], 0, [1.0, 0.5, 0.0])
    assert math.isclose(r["total"], 0.609375, abs_tol=1e-12), r
    assert math.isclose(r["own"] + r["direct"] + r["indirect"], r["total"], abs_tol=1e-12)

    assert round(nr.std_outperformance(4.82, 2.82), 2) == 1.71
    assert math.isclose(nr.proportion_stderr(0.5, 50, 0.5, 50), 0.1)

    summary = nr.run_fixture(seed=7)
    assert summary["articles"] == 2000
    assert summary["std_outperformance_t1"]["21-30"] > 3

    with tempfile.TemporaryDirectory() as tmp:
        data = Path(tmp) / "data"
        out = Path(tmp) / "out"
        files = nr.write_synthetic_fixture(str(data), seed=3)
        assert all((data / f).exists() for f in files)
        config = f"""
[paths]
articles = "{data / 'articles.jsonl'}"
universe = "{data / 'universe.csv'}"
prices = "{data / 'prices.csv'}"
marketcaps = "{data / 'marketcaps.csv'}"
output = "{out}"
"""
        nr.run_pipeline(config, quarters="2011Q1..2012Q4")
        assert (out / "manifest.json").exists()
        assert "Average" in (out / "table2.txt").read_text()

    try:
        nr.Quarter("2012Q5")
    except ValueError:
        pass
    else:
        raise AssertionError("invalid quarter accepted")

    print("newsrisk_py smoke test passed")


if __name__ == "__main__":
    main()
