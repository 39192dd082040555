import pytest

from ttsfc.core import ClaimRecord, Verdict
from ttsfc.errors import (
    AllPathsUnparseable,
    DataError,
    ReplayMiss,
    TemplateError,
    TransportError,
)
from ttsfc.gateway import (
    Exemplar,
    HttpChatTransport,
    PromptTemplate,
    ReplayTransport,
    SamplingConfig,
    builtin_template,
    parse_template,
    render_prompt,
    replay_entries,
    replay_key,
    sample_paths,
)
from ttsfc.retrieval import EvidenceDoc
from ttsfc.testing import chat_script_server


def docs(*texts):
    return [EvidenceDoc(doc_id=f"d{i}", text=t) for i, t in enumerate(texts)]


CFG = SamplingConfig(model="test-model", temperature=0.45, m=1, max_tokens=64)


class TestTemplates:
    def test_builtin_loads(self):
        template = builtin_template()
        assert "{claim}" in template.input_frame
        assert len(template.exemplars) == 2

    def test_missing_claim_placeholder(self):
        with pytest.raises(TemplateError):
            PromptTemplate(system="s", exemplars=(), input_frame="{evidence} only")

    def test_duplicate_claim_placeholder(self):
        with pytest.raises(TemplateError):
            PromptTemplate(system="s", exemplars=(),
                           input_frame="{claim} {claim} {evidence}")

    def test_parse_sections_roundtrip(self):
        text = "[[system]]\nsys text\n\n[[input]]\n{claim}\n{evidence}\n"
        template = parse_template(text)
        assert template.system == "sys text"
        assert template.exemplars == ()

    def test_unknown_section(self):
        with pytest.raises(TemplateError):
            parse_template("[[bogus]]\nx\n[[system]]\ns\n[[input]]\n{claim} {evidence}")


class TestRenderPrompt:
    def setup_method(self):
        self.template = PromptTemplate(
            system="be factual",
            exemplars=(Exemplar(claim="c", evidence="e", verdict="True",
                                justification="j"),),
            input_frame="[Claim]: {claim}\n\n{evidence}\n\n{subquestions}",
        )
        self.claim = ClaimRecord(id="x", claim="water is wet")

    def test_single_evidence_block(self):
        messages = render_prompt(self.template, self.claim, docs("evidence one"))
        assert len(messages) == 2
        assert messages[0]["role"] == "system"
        assert messages[1]["content"].count("[Evidence 1]:") == 1

    def test_evidence_blocks_in_given_order(self):
        messages = render_prompt(self.template, self.claim, docs("aa", "bb", "cc"))
        body = messages[1]["content"]
        assert body.index("[Evidence 1]: aa") < body.index("[Evidence 2]: bb")
        assert body.index("[Evidence 2]: bb") < body.index("[Evidence 3]: cc")

    def test_subquestions_block(self):
        messages = render_prompt(
            self.template, self.claim, docs("e"),
            subquestions=["Is water wet?", "Is it 2021?"],
        )
        body = messages[1]["content"]
        assert "Sub-questions:" in body
        assert "1. Is water wet?" in body
        assert "2. Is it 2021?" in body

    def test_no_subquestions_no_block(self):
        messages = render_prompt(self.template, self.claim, docs("e"))
        assert "Sub-questions:" not in messages[1]["content"]

    def test_subquestions_appended_when_placeholder_absent(self):
        template = PromptTemplate(system="s", exemplars=(),
                                  input_frame="{claim}\n{evidence}")
        messages = render_prompt(template, self.claim, docs("e"),
                                 subquestions=["Q one?"])
        assert "Sub-questions:\n1. Q one?" in messages[1]["content"]

    def test_empty_evidence_rejected(self):
        with pytest.raises(DataError):
            render_prompt(self.template, self.claim, [])

    def test_byte_deterministic(self):
        a = render_prompt(self.template, self.claim, docs("e1", "e2"), ["q?"])
        b = render_prompt(self.template, self.claim, docs("e1", "e2"), ["q?"])
        assert a == b


class TestReplayTransport:
    def _messages(self):
        return [{"role": "system", "content": "s"}, {"role": "user", "content": "u"}]

    def test_serves_in_sequence(self):
        messages = self._messages()
        entries = replay_entries(messages, ["first", "second", "third"])
        transport = ReplayTransport(entries)
        contents, requests = transport.complete(messages, CFG, 2)
        assert contents == ["first", "second"]
        assert requests == 2
        contents, _ = transport.complete(messages, CFG, 1)
        assert contents == ["third"]

    def test_miss_raises(self):
        messages = self._messages()
        transport = ReplayTransport(replay_entries(messages, ["only"]))
        transport.complete(messages, CFG, 1)
        with pytest.raises(ReplayMiss):
            transport.complete(messages, CFG, 1)

    def test_unknown_prompt_raises(self):
        transport = ReplayTransport([])
        with pytest.raises(ReplayMiss):
            transport.complete(self._messages(), CFG, 1)

    def test_key_is_stable(self):
        assert replay_key(self._messages()) == replay_key(self._messages())
        other = [{"role": "user", "content": "different"}]
        assert replay_key(other) != replay_key(self._messages())


class TestSamplePaths:
    def _messages(self):
        return [{"role": "user", "content": "check the claim"}]

    def test_single_canned_response(self):
        messages = self._messages()
        transport = ReplayTransport(
            replay_entries(messages, ["[Label]: True\n[Justification]: ok"])
        )
        result = sample_paths(messages, CFG, transport)
        assert len(result.paths) == 1
        assert result.paths[0].predicted is Verdict.TRUE
        assert result.llm_calls == 1

    def test_nine_conflicting_one_true(self):
        messages = self._messages()
        contents = ["[Label]: Conflicting\n[Justification]: drift"] * 9
        contents += ["[Label]: True\n[Justification]: units match"]
        transport = ReplayTransport(replay_entries(messages, contents))
        cfg = SamplingConfig(model="m", m=10)
        result = sample_paths(messages, cfg, transport)
        verdicts = [p.predicted for p in result.paths]
        assert verdicts.count(Verdict.CONFLICTING) == 9
        assert verdicts.count(Verdict.TRUE) == 1
        assert result.llm_calls == 10

    def test_unparseable_dropped_with_count(self):
        messages = self._messages()
        contents = [
            "[Label]: True\n[Justification]: a",
            "gibberish with no markers",
            "[Label]: False\n[Justification]: b",
        ]
        transport = ReplayTransport(replay_entries(messages, contents))
        cfg = SamplingConfig(model="m", m=3)
        result = sample_paths(messages, cfg, transport)
        assert len(result.paths) == 2
        assert len(result.unparsed) == 1
        assert result.llm_calls == 3

    def test_all_unparseable_raises(self):
        messages = self._messages()
        transport = ReplayTransport(replay_entries(messages, ["junk", "junk"]))
        cfg = SamplingConfig(model="m", m=2)
        with pytest.raises(AllPathsUnparseable):
            sample_paths(messages, cfg, transport)


class TestHttpTransport:
    def test_batched_n_request(self):
        with chat_script_server([(200, ["[Label]: True", "[Label]: False"])]) as base:
            transport = HttpChatTransport(base)
            contents, requests = transport.complete(
                [{"role": "user", "content": "x"}], SamplingConfig(model="m", m=2), 2
            )
        assert contents == ["[Label]: True", "[Label]: False"]
        assert requests == 1

    def test_sequential_when_n_unsupported(self):
        script = [(200, ["one"]), (200, ["two"])]
        with chat_script_server(script) as base:
            transport = HttpChatTransport(base, supports_n=False)
            contents, requests = transport.complete(
                [{"role": "user", "content": "x"}], SamplingConfig(model="m", m=2), 2
            )
        assert contents == ["one", "two"]
        assert requests == 2

    def test_retries_on_429_then_succeeds(self):
        script = [(429, None), (200, ["ok"])]
        with chat_script_server(script) as base:
            transport = HttpChatTransport(base, backoff_s=0.01)
            contents, _ = transport.complete(
                [{"role": "user", "content": "x"}], CFG, 1
            )
        assert contents == ["ok"]

    def test_gives_up_after_bounded_retries(self):
        script = [(500, None)] * 5
        with chat_script_server(script) as base:
            transport = HttpChatTransport(base, backoff_s=0.01, max_retries=2)
            with pytest.raises(TransportError):
                transport.complete([{"role": "user", "content": "x"}], CFG, 1)

    def test_no_retry_on_4xx(self):
        script = [(404, None), (200, ["never"])]
        with chat_script_server(script) as base:
            transport = HttpChatTransport(base, backoff_s=0.01)
            with pytest.raises(TransportError):
                transport.complete([{"role": "user", "content": "x"}], CFG, 1)
