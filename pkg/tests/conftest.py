"""Shared fixtures and the acceptance-summary reporter."""

import datetime

import pytest

from textveil.corpus import Document, SubjectMetadata, SyntheticCorpusSpec, generate_synthetic_corpus


def make_doc(doc_id="doc-x", text="Some text.", name="Karl Andersson", pid="19850319-1234"):
    meta = SubjectMetadata(
        full_name=name,
        personal_id=pid,
        court="Forvaltningsratten i Stockholm",
        decision_date=datetime.date(2020, 5, 4),
    )
    return Document(doc_id=doc_id, raw_text=text, metadata=meta)


@pytest.fixture(scope="session")
def small_corpus():
    docs, planted = generate_synthetic_corpus(SyntheticCorpusSpec(n_docs=20, seed=11))
    return docs, planted


@pytest.fixture()
def doc():
    return make_doc()


# -- acceptance summary -------------------------------------------------

_ACCEPTANCE: dict[str, str] = {}


def pytest_configure(config):
    _ACCEPTANCE.clear()


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker and report.when == "call":
        name = marker.kwargs.get("criterion") or marker.args[0]
        _ACCEPTANCE[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, status in _ACCEPTANCE.items():
        terminalreporter.write_line(f"[{status}] {name}")
