import json

import pytest

from stalebc.cli import main


def run_cli(argv, capsys):
    """Run the CLI in-process; returns (exit code, stdout, stderr)."""
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="session")
def reproduce_run(tmp_path_factory):
    """One full ``reproduce --seed 7`` run, shared by the CLI and acceptance tests."""
    path = tmp_path_factory.mktemp("repro") / "report.json"
    code = main(["reproduce", "--seed", "7", "--json", str(path)])
    text = path.read_text()
    return {"code": code, "path": path, "text": text, "doc": json.loads(text)}


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
