import json
import os
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import httpx
import pytest

from conftest import FIXTURES
from tabrubric.align import align
from tabrubric.compare import EXACT, MISMATCH, PARTIAL
from tabrubric.llm import (
    ALIGN_REFINE, TEMPLATES, LlmClient, LlmConfig, MissingBinding, PromptTooLarge,
    ProviderError, Timeout, parse_alignment_response, parse_tuple_response, render_prompt, request_hash,
)
from tabrubric.pipeline import evaluate
from tabrubric.table import Table

GT = Table.from_strings(["Player", "Team"], [["Ann", "Rovers"], ["Bo", "United"]])
CAND = Table.from_strings(["Player", "Club"], [["Ann", "Rvrs FC"], ["Bo", "Utd"]])


def chat(content):
    return {"choices": [{"message": {"role": "assistant", "content": content}}]}


def mock_client(handler, **cfg):
    config = LlmConfig(base_url="http://stub", model="m", **cfg)
    return LlmClient(config, transport=httpx.MockTransport(handler), sleep=lambda s: None)


def test_golden_prompt():
    a, _, _ = align(GT, CAND)
    with open(os.path.join(FIXTURES, "prompts", "align_refine.txt"), encoding="utf-8") as fh:
        golden = fh.read()
    assert render_prompt(ALIGN_REFINE, gt_table=GT, cand_table=CAND, partial_alignment=a) == golden


def test_templates_declare_placeholders():
    assert set(TEMPLATES) == {"align-refine", "compare-tuples", "direct-rubric-baseline"}
    for t in TEMPLATES.values():
        assert t.placeholders == ["cand_table", "gt_table", "partial_alignment"]


def test_missing_binding():
    with pytest.raises(MissingBinding):
        render_prompt(ALIGN_REFINE, gt_table=GT, cand_table=CAND)


def test_prompt_too_large():
    with pytest.raises(PromptTooLarge):
        render_prompt(ALIGN_REFINE, max_chars=50, gt_table=GT, cand_table=CAND, partial_alignment=None)


def test_config_from_env():
    cfg = LlmConfig.from_env({"TABX_LLM_BASE_URL": "http://x", "TABX_LLM_MODEL": "m",
                              "TABX_LLM_REPLAY": "prefer"}, replay=None, cache_dir="/tmp/c")
    assert (cfg.base_url, cfg.model, cfg.replay, cfg.cache_dir) == ("http://x", "m", "prefer", "/tmp/c")
    with pytest.raises(ValueError):
        LlmConfig(replay="sometimes")


def test_request_and_cache_then_replay(tmp_path):
    seen = []

    def handler(request):
        seen.append(json.loads(request.content))
        assert request.headers["authorization"] == "Bearer k"
        return httpx.Response(200, json=chat("hello"))

    client = mock_client(handler, api_key="k", cache_dir=str(tmp_path))
    assert client.complete("p", "t") == "hello"
    assert seen[0]["messages"][0]["content"] == "p" and "temperature" not in seen[0]
    assert os.path.exists(tmp_path / f"{request_hash('t', 'p', 'm')}.json")

    replay = mock_client(lambda r: pytest.fail("network used during replay"),
                         cache_dir=str(tmp_path), replay="strict")
    assert replay.complete("p", "t") == "hello"
    assert replay.network_calls == 0


def test_strict_replay_miss(tmp_path):
    client = mock_client(lambda r: pytest.fail("network used"), cache_dir=str(tmp_path), replay="strict")
    with pytest.raises(ProviderError, match="replay-miss"):
        client.complete("unseen", "t")


def test_client_error_not_retried():
    client = mock_client(lambda r: httpx.Response(401, text="nope"))
    with pytest.raises(ProviderError):
        client.complete("p")
    assert client.network_calls == 1


def test_malformed_provider_body():
    client = mock_client(lambda r: httpx.Response(200, json={"unexpected": True}))
    with pytest.raises(ProviderError):
        client.complete("p")


def test_timeout_after_retries():
    def handler(request):
        raise httpx.ReadTimeout("slow", request=request)

    client = mock_client(handler, max_retries=2)
    with pytest.raises(Timeout):
        client.complete("p")
    assert client.network_calls == 3


class _Always500(BaseHTTPRequestHandler):
    hits = 0

    def do_POST(self):
        type(self).hits += 1
        self.rfile.read(int(self.headers.get("Content-Length", 0)))
        self.send_response(500)
        self.end_headers()

    def log_message(self, *args):
        pass


def test_server_errors_exhaust_retries():
    server = HTTPServer(("127.0.0.1", 0), _Always500)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        cfg = LlmConfig(base_url=f"http://127.0.0.1:{server.server_port}", model="m", max_retries=2,
                        timeout=5)
        client = LlmClient(cfg, sleep=lambda s: None)
        with pytest.raises(ProviderError, match="HTTP 500"):
            client.complete("p")
        assert _Always500.hits == 3 and client.network_calls == 3
    finally:
        server.shutdown()
        server.server_close()


def test_parse_alignment_well_formed():
    raw = 'Sure.\n```json\n{"axis": "column", "gt": "Team", "cand": "Club"}\n{"axis": "row", "gt": 1, "cand": 0}\n```'
    parsed = parse_alignment_response(raw)
    assert [(p.axis, p.gt, p.cand) for p in parsed.items] == [("column", "Team", "Club"), ("row", 1, 0)]
    assert parsed.diagnostics == []


@pytest.mark.parametrize("raw", ["", None, 42, "```\n", "```\n{\"axis\": \"column\", \"gt\": \"Te",
                                 "```\n{\"axis\": \"row\"}\nnot json\n```"])
def test_parse_alignment_total(raw):
    parsed = parse_alignment_response(raw)
    assert parsed.items == []


def test_parse_truncated_keeps_complete_lines():
    raw = '```\n{"axis": "column", "gt": "A", "cand": "B"}\n{"axis": "col'
    parsed = parse_alignment_response(raw)
    assert len(parsed.items) == 1 and parsed.diagnostics


def test_parse_tuples():
    raw = ('```\n{"data_type": "number", "classification": "Partial", "magnitude": 0.1, '
           '"gt_unit": "kg", "cand_unit": "g"}\n{"data_type": "color", "classification": "exact"}\n```')
    parsed = parse_tuple_response(raw)
    assert len(parsed.items) == 1 and parsed.diagnostics
    item = parsed.items[0]
    assert item["classification"] == "partial" and item["gt_unit"].base == item["cand_unit"].base


def test_gate_rejects_incompatible_unit_claim():
    raw = chat('```\n{"data_type": "number", "classification": "exact", "magnitude": 0, '
               '"gt_unit": "kg", "cand_unit": "m"}\n```')
    client = mock_client(lambda r: httpx.Response(200, json=raw))
    gt = Table.from_strings(["k", "w"], [["a", "5 kg"], ["b", "1 kg"]])
    cand = Table.from_strings(["k", "w"], [["a", "5 m"], ["b", "1 kg"]])
    ev = evaluate(gt, cand, client=client, llm="on")
    (t,) = [t for t in ev.comparison.tuples if t.gt_row == 0 and t.gt_col == 1]
    assert t.classification == MISMATCH and not (t.note or "").startswith("llm")


def test_llm_refinement_adds_column_pair():
    reply = chat('```\n{"axis": "column", "gt": "Team", "cand": "Club"}\n```')

    def handler(request):
        body = json.loads(request.content)["messages"][0]["content"]
        if body.startswith("You are aligning"):
            return httpx.Response(200, json=reply)
        return httpx.Response(200, json=chat("no opinion"))

    off = evaluate(GT, CAND)
    on = evaluate(GT, CAND, client=mock_client(handler), llm="on")
    assert (1, 1) not in {(p.gt, p.cand) for p in off.alignment.column_map}
    assert (1, 1) in {(p.gt, p.cand) for p in on.alignment.column_map}
    assert on.report.score < off.report.score


def test_provider_failure_falls_back_unless_strict():
    client = mock_client(lambda r: httpx.Response(503), max_retries=0)
    ev = evaluate(GT, CAND, client=client, llm="on")
    assert ev.report.score == evaluate(GT, CAND).report.score
    with pytest.raises(ProviderError):
        evaluate(GT, CAND, client=mock_client(lambda r: httpx.Response(503), max_retries=0), llm="strict")


def test_replayed_abbreviation_judgement():
    gt = Table.from_strings(["Name", "City", "Age"], [["Ann", "New York City", "30"], ["Bo", "Austin", "41"]])
    cand = Table.from_strings(["Name", "City", "Age"], [["Ann", "NYC", "30"], ["Bo", "Austin", "41"]])
    off = evaluate(gt, cand)
    (t_off,) = [t for t in off.comparison.tuples if (t.gt_row, t.gt_col) == (0, 1)]
    assert t_off.classification == PARTIAL

    cfg = LlmConfig(model="fixture-model", replay="strict",
                    cache_dir=os.path.join(FIXTURES, "transcripts"))
    client = LlmClient(cfg)
    on = evaluate(gt, cand, client=client, llm="strict")
    (t_on,) = [t for t in on.comparison.tuples if (t.gt_row, t.gt_col) == (0, 1)]
    assert t_on.classification == EXACT and client.network_calls == 0
    assert on.report.score == 0
