"""Summarization gateway: templates, validation, retries, mock behavior."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from textveil.gateway import (
    DEFAULT_SECTIONS,
    SLOT,
    ChatBackendConfig,
    GatewayError,
    MockChatBackend,
    PromptTemplate,
    TransportError,
    default_template,
    extract_field,
    make_chat_backend,
    mock_seed_from_url,
    render_prompt,
    summarize,
    validate_structure,
)

from conftest import make_doc


def test_default_template_has_nine_sections():
    tpl = default_template()
    assert tpl.required_sections == DEFAULT_SECTIONS
    assert len(DEFAULT_SECTIONS) == 9
    assert tpl.preamble.count(SLOT) == 1
    assert "Replace the name of the person on trial with N.N." in tpl.preamble


def test_template_requires_single_slot():
    with pytest.raises(GatewayError):
        PromptTemplate(preamble="no slot here", required_sections=("A",))
    with pytest.raises(GatewayError):
        PromptTemplate(preamble=f"{SLOT} and {SLOT}", required_sections=("A",))
    with pytest.raises(GatewayError):
        PromptTemplate(preamble=SLOT, required_sections=())


def test_render_prompt_substitutes():
    tpl = PromptTemplate(preamble=f"A {SLOT} B", required_sections=("A",))
    assert render_prompt(tpl, "doc") == "A doc B"


def test_render_prompt_default_template():
    out = render_prompt(default_template(), "X")
    assert "Replace the name of the person on trial with N.N." in out
    assert "X" in out and SLOT not in out


def test_render_prompt_empty_text_errors():
    tpl = PromptTemplate(preamble=f"A {SLOT} B", required_sections=("A",))
    with pytest.raises(GatewayError):
        render_prompt(tpl, "")


def test_validate_all_headers_pass():
    text = "\n".join(f"{s}: body" for s in DEFAULT_SECTIONS)
    found, ok = validate_structure(text, DEFAULT_SECTIONS)
    assert ok and set(found) == set(DEFAULT_SECTIONS)


def test_validate_empty_text():
    found, ok = validate_structure("", DEFAULT_SECTIONS)
    assert found == () and not ok


def test_validate_six_of_nine_is_boundary():
    six = "\n".join(f"{s}: body" for s in DEFAULT_SECTIONS[:6])
    _, ok = validate_structure(six, DEFAULT_SECTIONS)
    assert ok
    five = "\n".join(f"{s}: body" for s in DEFAULT_SECTIONS[:5])
    _, ok = validate_structure(five, DEFAULT_SECTIONS)
    assert not ok


def test_validate_case_insensitive_and_prefixed():
    text = "## personal DETAILS: x\n- SUBSTANCE use follows"
    found, _ = validate_structure(text, DEFAULT_SECTIONS)
    assert "Personal details" in found and "Substance use" in found


def test_mock_deterministic_and_structured():
    backend = MockChatBackend(seed=5)
    out1 = backend.complete("prompt text")
    out2 = backend.complete("prompt text")
    assert out1 == out2
    assert backend.complete("other prompt") != out1
    assert MockChatBackend(seed=6).complete("prompt text") != out1
    _, ok = validate_structure(out1, DEFAULT_SECTIONS)
    assert ok


def test_mock_carries_marked_substrings():
    backend = MockChatBackend(seed=0)
    out = backend.complete("before ⟦Karl Andersson⟧ mid ⟦19850319-1234⟧ after")
    assert "Karl Andersson" in out and "19850319-1234" in out
    assert "⟦" not in out and "⟧" not in out
    personal = [l for l in out.splitlines() if l.startswith("Personal details:")][0]
    assert "Karl Andersson" in personal and "19850319-1234" in personal


def test_mock_filler_has_no_digits():
    out = MockChatBackend(seed=3).complete("plain prompt, no markers")
    assert not any(ch.isdigit() for ch in out)


def test_summarize_mock_roundtrip(doc):
    res = summarize(doc, default_template(), ChatBackendConfig(endpoint_url="mock://1"))
    assert res.doc_id == doc.doc_id and not res.flagged and res.attempts == 1
    assert len(res.sections_found) == 9


class FailingBackend:
    def __init__(self, fail_times=10**9, text=""):
        self.fail_times = fail_times
        self.text = text
        self.calls = 0

    def complete(self, prompt):
        self.calls += 1
        if self.calls <= self.fail_times:
            raise TransportError("down")
        return self.text


def test_summarize_transport_error_after_retries(doc):
    cfg = ChatBackendConfig(endpoint_url="mock://0", max_retries=1)
    backend = FailingBackend()
    with pytest.raises(GatewayError, match=doc.doc_id):
        summarize(doc, default_template(), cfg, backend=backend)
    assert backend.calls == 2


class HeaderlessBackend:
    def complete(self, prompt):
        return "\n".join(f"{s}: x" for s in DEFAULT_SECTIONS[:3])


def test_summarize_flags_invalid_structure(doc):
    cfg = ChatBackendConfig(endpoint_url="mock://0", max_retries=2)
    res = summarize(doc, default_template(), cfg, backend=HeaderlessBackend())
    assert res.flagged and res.attempts == 3
    assert len(res.sections_found) == 3


def test_summarize_recovers_after_transient_failure(doc):
    good = MockChatBackend(seed=0).complete(render_prompt(default_template(), doc.raw_text))
    cfg = ChatBackendConfig(endpoint_url="mock://0", max_retries=2)
    backend = FailingBackend(fail_times=1, text=good)
    res = summarize(doc, default_template(), cfg, backend=backend)
    assert not res.flagged and res.attempts == 2


def test_extract_field_paths():
    payload = {"message": {"content": "hi"}}
    assert extract_field(payload, "message.content") == "hi"
    payload = {"choices": [{"message": {"content": "alt"}}]}
    assert extract_field(payload, "choices.0.message.content") == "alt"
    with pytest.raises(TransportError):
        extract_field({"a": 1}, "a.b")
    with pytest.raises(TransportError):
        extract_field({"a": 1}, "a")


def test_mock_seed_parsing():
    assert mock_seed_from_url("mock://42") == 42
    assert mock_seed_from_url("mock://") == 0
    assert isinstance(make_chat_backend(ChatBackendConfig(endpoint_url="mock://7")), MockChatBackend)


def test_http_backend_wire_format(doc, monkeypatch):
    import httpx

    seen = {}

    def fake_post(url, json=None, timeout=None):
        seen["url"] = url
        seen["body"] = json
        request = httpx.Request("POST", url)
        return httpx.Response(
            200, json={"message": {"content": "Administrative details: ok"}}, request=request
        )

    monkeypatch.setattr(httpx, "post", fake_post)
    cfg = ChatBackendConfig(endpoint_url="http://localhost:9999/api/chat", model_name="m1", temperature=0.5)
    backend = make_chat_backend(cfg)
    out = backend.complete("the prompt")
    assert out == "Administrative details: ok"
    assert seen["url"] == cfg.endpoint_url
    assert seen["body"]["model"] == "m1"
    assert seen["body"]["messages"] == [{"role": "user", "content": "the prompt"}]
    assert seen["body"]["temperature"] == 0.5
    assert seen["body"]["stream"] is False


def test_http_backend_status_error_is_transport(monkeypatch):
    import httpx

    def fake_post(url, json=None, timeout=None):
        return httpx.Response(500, request=httpx.Request("POST", url))

    monkeypatch.setattr(httpx, "post", fake_post)
    backend = make_chat_backend(ChatBackendConfig(endpoint_url="http://x/api"))
    with pytest.raises(TransportError):
        backend.complete("p")


@settings(max_examples=40, deadline=None)
@given(prompt=st.text(min_size=1, max_size=300), seed=st.integers(0, 2**31))
def test_mock_pure_function_property(prompt, seed):
    backend = MockChatBackend(seed=seed)
    assert backend.complete(prompt) == backend.complete(prompt)


@settings(max_examples=30, deadline=None)
@given(
    payload=st.text(
        alphabet=st.characters(blacklist_characters="⟦⟧", blacklist_categories=("Cs",)),
        min_size=1,
        max_size=60,
    )
)
def test_mock_marker_passthrough_property(payload):
    out = MockChatBackend(seed=1).complete(f"text ⟦{payload}⟧ more")
    assert payload in out
