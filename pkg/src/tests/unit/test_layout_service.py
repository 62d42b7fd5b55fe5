import json
from itertools import permutations

import httpx
import pytest

import service.layout_service as layout_service
from configs.config import MOCK_LLM_DIR, LlmConfig
from domain.layout import LayoutObject, SceneLayout
from service.service_result import ExitCode

CHICKEN = "a chicken near a desk"
DOGS = "Two dogs sitting side by side, one larger than the other, with a plate of dog food in front."
SHOES = "A pair of brown shoes placed neatly next to a black briefcase with a blue tie draped over it."
ENDPOINT = "https://llm.test/v1/chat/completions"
KEY_ENV = "BOXFIELD_TEST_LLM_KEY"

CHICKEN_JSON = json.dumps({
    "caption": CHICKEN,
    "objects": [
        {"description": "a desk", "box": [156, 106, 200, 200, 300, 150]},
        {"description": "a chicken", "box": [156, 436, 200, 150, 76, 112]},
    ],
})


def make_layout(*boxes: list[int]) -> SceneLayout:
    return SceneLayout(
        caption="scene",
        objects=[LayoutObject(description=f"object {i}", box=box) for i, box in enumerate(boxes)],
    )


def completion(content: str) -> httpx.Response:
    return httpx.Response(200, json={"choices": [{"message": {"role": "assistant", "content": content}}]})


def live_config() -> LlmConfig:
    return LlmConfig(mode="live", endpoint=ENDPOINT, api_key_env=KEY_ENV, model="gpt-4", temperature=0.5)


class TestParse:

    def test_chicken_layout(self) -> None:
        layout = layout_service.parse_layout(CHICKEN_JSON).unwrap()
        assert [o.description for o in layout.objects] == ["a desk", "a chicken"]
        assert layout.objects[1].box == [156, 436, 200, 150, 76, 112]

    def test_round_trip(self) -> None:
        layout = layout_service.parse_layout(CHICKEN_JSON).unwrap()
        assert layout_service.parse_layout(layout_service.serialize_layout(layout)).unwrap() == layout

    @pytest.mark.parametrize("text, message", [
        ('{"caption": "x", "objects": [{"description": "a", "box": [0, 0, 0, 600, 10, 10]}]}', "depth"),
        ('{"caption": "x", "objects": []}', "objects"),
        ('{"caption": "x", "objects": [{"description": " ", "box": [0, 0, 0, 1, 1, 1]}]}', "description"),
        ('{"caption": "x", "objects": [{"description": "a", "box": [0, 0, 0, 1, 1]}]}', "6"),
        ('{"caption": "x"', "JSON"),
    ])
    def test_rejects_bad_layouts(self, text, message) -> None:
        result = layout_service.parse_layout(text)
        assert result.is_failure
        assert result.exit_code == ExitCode.INPUT
        assert message in result.error

    @pytest.mark.parametrize("value", ['"156"', "156.0", "true"])
    def test_box_values_are_not_coerced(self, value) -> None:
        text = '{"caption": "x", "objects": [{"description": "a", "box": [%s, 0, 0, 10, 10, 10]}]}' % value
        result = layout_service.parse_layout(text)
        assert result.exit_code == ExitCode.INPUT
        assert "objects.0.box.0" in result.error

    def test_lenient_form_accepts_integral_floats(self) -> None:
        text = "Caption: a desk\nObjects: [('a desk', [156.0, 106, 200, 200, 300, 150])]"
        box = layout_service.parse_layout_text(text).unwrap().objects[0].box
        assert box == [156, 106, 200, 200, 300, 150]
        assert all(type(v) is int for v in box)

    @pytest.mark.parametrize("box", ["[156.5, 106, 200, 200, 300, 150]", "['156', 106, 200, 200, 300, 150]"])
    def test_lenient_form_rejects_non_integral_values(self, box) -> None:
        text = f"Caption: a desk\nObjects: [('a desk', {box})]"
        assert layout_service.parse_layout_text(text).exit_code == ExitCode.INPUT

    def test_lenient_tuple_form_with_backticks(self) -> None:
        text = (
            "Caption: `a chicken near a desk`\n"
            "Objects: [(`a desk`, [156, 106, 200, 200, 300, 150]), (‘a chicken’, [156, 436, 200, 150, 76, 112])]"
        )
        layout = layout_service.parse_layout_text(text).unwrap()
        assert layout == layout_service.parse_layout(CHICKEN_JSON).unwrap()

    def test_lenient_fenced_json(self) -> None:
        layout = layout_service.parse_layout_text(f"```json\n{CHICKEN_JSON}\n```").unwrap()
        assert layout.caption == CHICKEN

    @pytest.mark.parametrize("text", [
        "I cannot help with that",
        "Caption: a chicken",
        "Caption: a chicken\nObjects: [('a desk', [1, 2, 3)]",
    ])
    def test_lenient_form_failures(self, text) -> None:
        assert layout_service.parse_layout_text(text).exit_code == ExitCode.INPUT


class TestValidate:

    def test_disjoint_boxes(self) -> None:
        assert layout_service.validate_layout(make_layout([0, 0, 0, 100, 100, 100], [200, 0, 0, 100, 100, 100])) == []

    def test_containment(self) -> None:
        warnings = layout_service.validate_layout(make_layout([0, 0, 0, 512, 512, 512], [100, 100, 100, 50, 50, 50]))
        assert len(warnings) == 2
        assert any("целиком содержит" in w for w in warnings)

    def test_overlap(self) -> None:
        warnings = layout_service.validate_layout(make_layout([0, 0, 0, 100, 100, 100], [30, 0, 0, 100, 100, 100]))
        assert len(warnings) == 1 and "70%" in warnings[0]

    def test_small_overlap_is_fine(self) -> None:
        assert layout_service.validate_layout(make_layout([0, 0, 0, 100, 100, 100], [60, 0, 0, 100, 100, 100])) == []

    def test_order_invariant(self) -> None:
        objects = [
            LayoutObject(description="room", box=[0, 0, 0, 512, 512, 512]),
            LayoutObject(description="table", box=[100, 100, 0, 200, 200, 100]),
            LayoutObject(description="lamp", box=[150, 150, 50, 100, 100, 100]),
        ]
        results = {
            tuple(layout_service.validate_layout(SceneLayout(caption="room", objects=list(order))))
            for order in permutations(objects)
        }
        assert len(results) == 1
        assert len(next(iter(results))) >= 3


class TestRequestLayout:

    @pytest.mark.parametrize("caption, key", [
        (CHICKEN, "7a917af19886b502"),
        (DOGS, "aa21effdf367c7ec"),
        (SHOES, "4f12e10ef2fc35aa"),
    ])
    def test_fixture_key(self, caption, key) -> None:
        assert layout_service.layout_fixture_key(caption) == key

    @pytest.mark.parametrize("caption, count", [(CHICKEN, 2), (DOGS, 3), (SHOES, 2)])
    async def test_mock_fixtures(self, caption, count) -> None:
        result = await layout_service.request_layout(LlmConfig(mode="mock", mock_dir=MOCK_LLM_DIR), caption)
        assert result.is_success
        assert result.unwrap().caption == caption and len(result.unwrap().objects) == count

    async def test_mock_miss(self, tmp_path) -> None:
        result = await layout_service.request_layout(LlmConfig(mode="mock", mock_dir=tmp_path), "a cat on a mat")
        assert result.exit_code == ExitCode.EXTERNAL

    @pytest.mark.parametrize("fixture, code", [
        ("{}", ExitCode.INPUT),
        ('{"caption": "cat", "objects": [{"description": "a", "box": [400, 0, 0, 200, 10, 10]}]}', ExitCode.INPUT),
        ("not json at all", ExitCode.EXTERNAL),
    ])
    async def test_broken_fixture(self, tmp_path, fixture, code) -> None:
        (tmp_path / f"{layout_service.layout_fixture_key('cat')}.json").write_text(fixture, encoding="utf-8")
        result = await layout_service.request_layout(LlmConfig(mode="mock", mock_dir=tmp_path), "cat")
        assert result.exit_code == code

    async def test_live_without_key_sends_nothing(self, monkeypatch) -> None:
        monkeypatch.delenv(KEY_ENV, raising=False)
        calls = []
        transport = httpx.MockTransport(lambda request: calls.append(request) or completion(CHICKEN_JSON))
        result = await layout_service.request_layout(live_config(), CHICKEN, transport)
        assert result.exit_code == ExitCode.EXTERNAL
        assert calls == []

    async def test_live_request(self, monkeypatch) -> None:
        monkeypatch.setenv(KEY_ENV, "secret")
        requests: list[httpx.Request] = []

        def handler(request: httpx.Request) -> httpx.Response:
            requests.append(request)
            return completion(CHICKEN_JSON)

        result = await layout_service.request_layout(live_config(), CHICKEN, httpx.MockTransport(handler))
        assert result.unwrap().caption == CHICKEN
        assert len(requests) == 1
        assert str(requests[0].url) == ENDPOINT
        assert requests[0].headers["Authorization"] == "Bearer secret"
        body = json.loads(requests[0].content)
        assert body["model"] == "gpt-4" and body["temperature"] == 0.5
        assert [m["role"] for m in body["messages"]] == ["system", "user"]
        assert body["messages"][1]["content"] == f"Caption: {CHICKEN}"

    async def test_retries_once_on_unparseable_answer(self, monkeypatch) -> None:
        monkeypatch.setenv(KEY_ENV, "secret")
        answers = [completion("Sorry, here is nothing useful"), completion(CHICKEN_JSON)]
        transport = httpx.MockTransport(lambda request: answers.pop(0))
        result = await layout_service.request_layout(live_config(), CHICKEN, transport)
        assert result.is_success and answers == []

    async def test_gives_up_after_second_failure(self, monkeypatch) -> None:
        monkeypatch.setenv(KEY_ENV, "secret")
        calls = []
        transport = httpx.MockTransport(lambda request: calls.append(request) or completion("still nothing"))
        result = await layout_service.request_layout(live_config(), CHICKEN, transport)
        assert result.exit_code == ExitCode.EXTERNAL
        assert "still nothing" in result.error
        assert len(calls) == 2

    async def test_invalid_layout_in_answer_is_input_error(self, monkeypatch) -> None:
        monkeypatch.setenv(KEY_ENV, "secret")
        calls = []
        answer = CHICKEN_JSON.replace("[156, 106, 200, 200, 300, 150]", "[400, 106, 200, 200, 300, 150]")
        transport = httpx.MockTransport(lambda request: calls.append(request) or completion(answer))
        result = await layout_service.request_layout(live_config(), CHICKEN, transport)
        assert result.exit_code == ExitCode.INPUT
        assert "depth" in result.error
        assert len(calls) == 2

    async def test_unreadable_answer_after_invalid_one_is_external(self, monkeypatch) -> None:
        monkeypatch.setenv(KEY_ENV, "secret")
        answers = [completion('{"caption": "x", "objects": []}'), completion("nothing here")]
        transport = httpx.MockTransport(lambda request: answers.pop(0))
        result = await layout_service.request_layout(live_config(), CHICKEN, transport)
        assert result.exit_code == ExitCode.EXTERNAL

    async def test_http_error(self, monkeypatch) -> None:
        monkeypatch.setenv(KEY_ENV, "secret")
        transport = httpx.MockTransport(lambda request: httpx.Response(500, text="boom"))
        result = await layout_service.request_layout(live_config(), CHICKEN, transport)
        assert result.exit_code == ExitCode.EXTERNAL and "500" in result.error

    async def test_network_failure(self, monkeypatch) -> None:
        monkeypatch.setenv(KEY_ENV, "secret")

        def handler(request: httpx.Request) -> httpx.Response:
            raise httpx.ConnectError("no route", request=request)

        result = await layout_service.request_layout(live_config(), CHICKEN, httpx.MockTransport(handler))
        assert result.exit_code == ExitCode.EXTERNAL


class TestDataset:

    def test_reads_records(self, tmp_path) -> None:
        path = tmp_path / "dataset.jsonl"
        records = [
            {"subset": "normal", **json.loads(CHICKEN_JSON)},
            {"subset": "complex", "caption": "three", "objects": [
                {"description": f"o{i}", "box": [i * 100, 0, 0, 50, 50, 50]} for i in range(3)
            ]},
        ]
        path.write_text("\n".join(json.dumps(r) for r in records) + "\n\n", encoding="utf-8")
        loaded = layout_service.load_dataset(path).unwrap()
        assert [r.subset for r in loaded] == ["normal", "complex"]

    @pytest.mark.parametrize("line, message", [
        ('{"subset": "normal", "caption": "x", "objects": '
         '[{"description": "a", "box": [0, 0, 0, 1, 1, 1]}]}', "Строка 1"),
        ('{"subset": "huge", ' + CHICKEN_JSON[1:], "subset"),
        ("not json", "Строка 1"),
        ("[1, 2]", "Строка 1"),
    ])
    def test_rejects_bad_records(self, tmp_path, line, message) -> None:
        path = tmp_path / "dataset.jsonl"
        path.write_text(line + "\n", encoding="utf-8")
        result = layout_service.load_dataset(path)
        assert result.exit_code == ExitCode.INPUT and message in result.error

    def test_missing_file(self, tmp_path) -> None:
        assert layout_service.load_dataset(tmp_path / "missing.jsonl").exit_code == ExitCode.INPUT
