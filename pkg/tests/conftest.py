from importlib import resources

import pytest

from rulesynth import parse_grammar, parse_num_grammar


def data_text(name):
    return resources.files("rulesynth").joinpath("data", name).read_text()


@pytest.fixture(scope="session")
def scan_text():
    return data_text("scan.grammar")


@pytest.fixture(scope="session")
def scan_grammar(scan_text):
    return parse_grammar(scan_text)


@pytest.fixture(scope="session")
def numbers_a():
    return parse_num_grammar(data_text("numbers_a.grammar"))


@pytest.fixture(scope="session")
def numbers_b():
    return parse_num_grammar(data_text("numbers_b.grammar"))


@pytest.fixture(scope="session")
def scan_data():
    from rulesynth import build_scan_dataset
    return build_scan_dataset()
