"""Shared fixtures: the acceptance-criteria recorder.

Each acceptance test reports its verdict through the session-scoped
``acceptance`` fixture; a terminal-summary hook then prints one pass/fail
line per criterion so the gate status is visible in a single block at the
end of the run.
"""

import pytest

CRITERIA = {
    1: "fast-detector overlap: spectral P vs closed form within 5%",
    2: "Zeno suppression: interior maximum of -P(lambda_1), tail < 5% of peak",
    3: "feedback-induced phase damping: -P(eps_u=20) < 10% of -P(eps_u=4)",
    4: "quantum/classical merge under strong extra dephasing (5%)",
    5: "perfect heat-to-work conversion identities (1e-12)",
    6: "energetics closure P+Qdot+EdotD=0; |EdotB/Qdot| <= 1e-2",
    7: "strong-measurement regime: |EdotD| <= 0.05 |P|",
    8: "local vs global agreement (2%) for small g, breakdown at g=0.5",
    9: "trajectory ensemble vs closed form (3 SE); pinned moments (5%)",
    10: "spectral machinery: table 1e-10, residual/gap, N=100->200 drift",
    11: "error probability: limits, monotonicity, closed-form value (1e-12)",
}


class AcceptanceLog:
    """Collects one verdict line per acceptance criterion."""

    def __init__(self):
        self.entries = {}

    def record(self, num, ok, detail=""):
        if num not in CRITERIA:
            raise ValueError(f"unknown criterion number {num}")
        self.entries[num] = (bool(ok), detail)


def pytest_configure(config):
    config._acceptance_log = AcceptanceLog()


@pytest.fixture(scope="session")
def acceptance(request):
    return request.config._acceptance_log


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = getattr(config, "_acceptance_log", None)
    if log is None or not log.entries:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(log.entries):
        ok, detail = log.entries[num]
        status = "PASS" if ok else "FAIL"
        line = f"criterion {num:2d} [{status}] {CRITERIA[num]}"
        if detail:
            line += f"  |  {detail}"
        terminalreporter.write_line(line)
