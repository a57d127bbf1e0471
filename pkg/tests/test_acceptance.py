"""Acceptance criteria; each test records one PASS/FAIL line in the terminal summary."""

import subprocess
import sys
import time

import numpy as np

import test_operators as ops
import test_solver as sol
import test_stls as stl
from conftest import ACCEPTANCE, cached_case
from pbeid.grid import time_derivative
from pbeid.library import TermKey, build_library, eliminate_dependent_columns
from pbeid.model import formulate_pbe, resolve_dependent_terms
from pbeid.pipeline import RunConfig, benchmark_case, run_discovery, run_noise_study
from pbeid.selector import SelectWeights, identify
from pbeid.solver import REPORTED_CLEAN_ERROR

STANDARD_CASES = list("abcdefghi") + ["k", "m", "n", "o", "p"]


def _verdict(label, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
    ACCEPTANCE.append(line)
    print(line)
    assert ok, line


def _run_properties(*fns):
    failed = []
    for fn in fns:
        try:
            fn()
        except AssertionError:
            failed.append(fn.__name__)
    return failed


def test_criterion_1_clean_identification():
    bad, worst = [], 0.0
    for cid in STANDARD_CASES:
        t0 = time.perf_counter()
        row = benchmark_case(cid)
        seconds = time.perf_counter() - t0
        worst = max(worst, seconds)
        limit = 2 * REPORTED_CLEAN_ERROR[cid]
        if not (row.matched and row.error <= limit and seconds < 300):
            bad.append(f"{cid} (matched={row.matched}, error={row.error}, limit={limit}, {seconds:.0f}s)")
    detail = f"{len(STANDARD_CASES) - len(bad)}/{len(STANDARD_CASES)} cases matched within 2x reported error"
    detail += f", slowest {worst:.1f}s"
    _verdict("1 clean-data identification", not bad, detail + ("; failing " + ", ".join(bad) if bad else ""))


def test_criterion_2_documented_exceptions():
    j = benchmark_case("j")
    j_ok = j.matched and j.error <= 30.0
    l_row = benchmark_case("l")
    l_ok = (not l_row.matched) and l_row.missing == (("agg_death", 0, 1),) and not l_row.extra
    detail = (f"(j) matched={j.matched} error={j.error:.2f}% [{'ok' if j_ok else 'deviates'}]; "
              f"(l) identified {l_row.identified}, matched={l_row.matched} "
              f"[{'ok' if l_ok else 'deviates: aggregation death y-term is found'}]")
    _verdict("2 documented exceptions (j), (l)", j_ok and l_ok, detail)


def test_criterion_3_regularizer_necessity():
    parts, ok = [], True
    for cid in "abc":
        abl = benchmark_case(cid, ablation=True).ablation
        flip = (not abl["without_at_table_weights"]["matched"]) and abl["with_at_table_weights"]["matched"]
        flip = flip and abl["matched_without"] < abl["matched_with"]
        ok &= flip
        parts.append(f"({cid}) flip={flip} sweep without={abl['matched_without']}/9 with={abl['matched_with']}/9")
    _verdict("3 regularizer necessity", ok, "; ".join(parts))


def test_criterion_4_dependency_ledger():
    fld, spec = cached_case("b")
    _, symbols, groups = eliminate_dependent_columns(build_library(fld, ("agg",)))
    b1, bx, by = TermKey("agg_birth", 0, 0), TermKey("agg_birth", 1, 0), TermKey("agg_birth", 0, 1)
    group = next((g for g in groups if set(g.members) == {b1, bx, by}), None)
    checks = {"group": group is not None}
    if group is not None:
        checks["weak B_agg(1)"] = group.weak == [b1]
        checks["strong removed"] = group.removed in (bx, by)
        alt = symbols.entry(by).alternates
        checks["OR scale 0.5"] = [a.key for a in alt] == [bx] and abs(alt[0].scale - 0.5) <= 0.005
    result = identify(fld, time_derivative(fld), SelectWeights.from_sequence(spec.weights))
    resolved = resolve_dependent_terms(formulate_pbe(result.solution, result.symbols))
    checks["resolves to B_agg(x)"] = resolved.term_set == {
        ("agg_birth", 1, 0), ("agg_death", 1, 0), ("agg_death", 0, 1)}
    failed = [k for k, v in checks.items() if not v]
    _verdict("4 dependency ledger", not failed, "all checks hold" if not failed else f"failing {failed}")


def test_criterion_5_noise_study():
    t0 = time.perf_counter()
    a = run_noise_study("a", levels=(0.01,), fractions=(1.0,), samples=100, master_seed=0)
    rate_a, mean_a = a.rates[0, 0], a.error_mean[0, 0]
    a_ok = rate_a > 0.10 and abs(mean_a - 0.20) <= 3 * 0.20
    hard = {}
    for cid in "nop":
        hard[cid] = run_noise_study(cid, levels=(0.0025,), fractions=(1.0,), samples=20, master_seed=0).rates[0, 0]
    hard_ok = all(r <= 0.10 for r in hard.values())
    minutes = (time.perf_counter() - t0) / 60
    detail = (f"(a) 1% noise success {rate_a:.2f}, mean error {mean_a:.3f}%; "
              + ", ".join(f"({c}) 0.25% noise success {r:.2f}" for c, r in hard.items())
              + f"; {minutes:.1f} min")
    _verdict("5 noise study slice", a_ok and hard_ok and minutes < 30, detail)


def test_criterion_6_operator_oracle():
    x = 0.01 + 0.01 * np.arange(1001)
    fld = ops.make_field(x, [0.0, 0.1, 0.2], lambda X, T: np.exp(-X))
    errs = {f"{p}:{bf.name}": ops._oracle_error(fld, p, bf, 1.0, 9.01) for p, bf in ops.ALL_COLUMNS}
    worst = max(errs, key=errs.get)
    _verdict("6 operator oracle", errs[worst] <= 1e-3,
             f"{len(errs)} columns, worst relative error {errs[worst]:.2e} ({worst})")


def test_criterion_7_conservation_properties():
    failed = _run_properties(
        ops.test_aggregation_conserves_mass,
        ops.test_aggregation_number_identities,
        ops.test_binary_breakage_conserves_mass,
        sol.test_fixed_pivot_aggregation_moments,
        sol.test_fixed_pivot_breakage_moments,
    )
    _verdict("7 conservation properties", not failed,
             "5 suites x 50 examples hold" if not failed else f"failing {failed}")


def test_criterion_8_stls_invariants():
    failed = _run_properties(
        stl.test_converged_coefficients_clear_threshold,
        stl.test_idempotent_on_converged_support,
        stl.test_zero_threshold_is_least_squares,
        stl.test_support_never_grows,
    )
    _verdict("8 STLS invariants", not failed, "4 suites x 200 examples hold" if not failed else f"failing {failed}")


def test_criterion_9_reproducibility(tmp_path):
    cfg = RunConfig(case="e", noise_level=0.005, noise_seed=5, fraction=0.6, subsample_seed=9)
    reports = [run_discovery(cfg).to_json() for _ in range(2)]
    same_report = reports[0] == reports[1]
    outputs = []
    for run in ("first", "second"):
        out = tmp_path / run
        cmd = [sys.executable, "-m", "pbeid.cli", "study", "e", "--levels", "0,0.005", "--fractions", "0.6,1",
               "--samples", "3", "--seed", "11", "-o", str(out)]
        subprocess.run(cmd, check=True, capture_output=True)
        outputs.append((out / "study.json").read_bytes())
    same_study = outputs[0] == outputs[1]
    _verdict("9 reproducibility", same_report and same_study,
             f"report byte-identical={same_report}, study identical across processes={same_study}")

