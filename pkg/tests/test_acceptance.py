"""The twelve acceptance criteria at their stated tolerances and runtime budgets.

Each criterion prints one PASS/FAIL line; the lines are also repeated in the
terminal summary (see conftest.py) so they appear in plain ``pytest -v`` output.
"""
import pytest

from kuramoto_wave import acceptance

ACCEPTANCE_LINES = []


@pytest.mark.parametrize("number", sorted(acceptance.CRITERIA),
                         ids=[f"c{n:02d}-{acceptance.CRITERIA[n][0].replace(' ', '-')}"
                              for n in sorted(acceptance.CRITERIA)])
def test_criterion(number):
    res = acceptance.run_criterion(number)
    line = res.line()
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert res.passed, line
    assert res.runtime <= res.budget, f"runtime {res.runtime:.1f}s exceeds budget {res.budget}s"


@pytest.mark.parametrize("fn", [acceptance.c03_symmetric_null, acceptance.c04_first_order_drift,
                                acceptance.c05_expansion, acceptance.c06_projection,
                                acceptance.c07_gap_and_decay], ids=lambda f: f.__name__)
def test_deterministic_criteria_at_finer_resolution(fn):
    ok, summary, _ = fn(n_modes=128)
    line = f"[{'PASS' if ok else 'FAIL'}] {fn.__name__} at n_modes=128: {summary}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, summary


def test_suites_and_verdicts(tmp_path):
    assert acceptance.SUITES["fast"] == tuple(range(1, 8))
    assert acceptance.SUITES["full"] == tuple(range(1, 13))
    with pytest.raises(ValueError):
        acceptance.run_suite("medium")
    res = acceptance.run_criterion(1)
    acceptance.write_verdicts([res], tmp_path / "v.csv")
    assert (tmp_path / "v.csv").read_text().count("\n") == 2


def test_bessel_oracle():
    assert acceptance.bessel_ratio_root(1.0) is None
    assert acceptance.bessel_ratio_root(0.5) is None
    r = acceptance.bessel_ratio_root(2.0)
    assert 0.8 < r < 0.9
