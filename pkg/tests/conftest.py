import json

import pytest

from chainplan import reference_chain
from chainplan.formats import chain_to_dict


@pytest.fixture
def chain():
    return reference_chain()


@pytest.fixture
def chain_file(tmp_path, chain):
    path = tmp_path / "chain.json"
    path.write_text(json.dumps(chain_to_dict(chain)))
    return path


def pytest_terminal_summary(terminalreporter):
    import report

    if report.LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(report.LINES):
            terminalreporter.write_line(report.LINES[number])
