import pytest

from byzlab.crypto import setup_group


@pytest.fixture(scope="session")
def toy_group():
    return setup_group("test")


@pytest.fixture(scope="session")
def std_group():
    return setup_group("standard")


_CRITERIA = {
    "test_criterion_1_masking_exactness": "1 crypto-layer exactness",
    "test_criterion_2_commitment_algebra": "2 commitment algebra",
    "test_criterion_3_range_proofs_exhaustive": "3 range proofs",
    "test_criterion_4_dual_mode_equivalence": "4 dual-mode equivalence",
    "test_criterion_5_aggregator_oracles": "5 aggregator oracles",
    "test_criterion_6_gradient_vs_finite_differences": "6 gradient check",
    "test_criterion_7_bound_manipulation_laws": "7 bound-manipulation law",
    "test_criterion_8a_norm_bounds_help_prototypical": "8a norm bounds help",
    "test_criterion_8b_tail_attacks_evade_norm_bounds": "8b tail attacks evade",
    "test_criterion_8c_sybil_amplification": "8c sybil amplification",
    "test_criterion_8d_foolsgold_neutralizes_clones": "8d foolsgold vs clones",
    "test_criterion_9_byte_identical_reruns": "9 determinism",
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            name = getattr(report, "location", ("", 0, ""))[2]
            base = name.split("[")[0]
            if base in _CRITERIA:
                verdict = "PASS" if outcome == "passed" else "FAIL"
                lines.append((_CRITERIA[base], verdict))
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for label, verdict in sorted(lines):
            terminalreporter.write_line(f"criterion {label}: {verdict}")
