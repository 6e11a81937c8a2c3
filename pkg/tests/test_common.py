# -*- coding: utf-8 -*-
from __future__ import annotations

import io
import json

import httpx
import numpy as np
import pytest

from libs.common.hashing import content_hash, seed_from
from libs.common.http_errors import ServiceHttpError, is_retryable_error, raise_for_service
from libs.common.images import ImageRef, ImageUnresolvable, load_image_ref
from libs.common.json import dumps_document
from libs.common.logging import setup_logging
from libs.common.retry import retry_call
from libs.common.service_client import ServiceClient
from libs.contracts.schema_validator import is_valid


def test_retry_call_retries_only_retryable_errors():
    calls = []
    delays = []

    def flaky():
        calls.append(1)
        if len(calls) < 3:
            raise ServiceHttpError("x", 503, "busy")
        return "ok"

    assert retry_call(flaky, retry_if=is_retryable_error, sleep=delays.append) == "ok"
    assert len(calls) == 3
    assert len(delays) == 2 and delays[1] > delays[0]

    def bad_request():
        raise ServiceHttpError("x", 400, "bad input")

    with pytest.raises(ServiceHttpError):
        retry_call(bad_request, retry_if=is_retryable_error, sleep=delays.append)
    assert len(delays) == 2


def test_retry_call_gives_up_after_max_attempts():
    calls = []

    def always():
        calls.append(1)
        raise ServiceHttpError("x", 502, "gateway")

    with pytest.raises(ServiceHttpError):
        retry_call(always, retry_if=is_retryable_error, max_attempts=3, sleep=lambda _: None)
    assert len(calls) == 3


def test_raise_for_service_on_ok_false():
    r = httpx.Response(200, json={"ok": False, "error": "rate limited"})
    with pytest.raises(ServiceHttpError) as ei:
        raise_for_service("scorer", r)
    assert is_retryable_error(ei.value)
    assert raise_for_service("scorer", httpx.Response(200, json={"ok": True, "v": 1}))["v"] == 1


def test_image_ref_digest_and_documents(tmp_path):
    a = ImageRef.from_vector([1.0, 2.0])
    assert a.digest() == ImageRef.from_vector(np.array([1.0, 2.0])).digest()
    assert a.digest() != ImageRef.from_vector([2.0, 1.0]).digest()
    blob = ImageRef.from_bytes(b"\x89PNG")
    assert ImageRef.from_document(blob.to_document()) == blob
    assert is_valid("common/image-ref.json", a.to_document())

    np.save(tmp_path / "ref.npy", np.array([0.0, 3.0]))
    assert load_image_ref(tmp_path / "ref.npy") == ImageRef.from_vector([0.0, 3.0])
    (tmp_path / "photo.png").write_bytes(b"png")
    assert load_image_ref(tmp_path / "photo.png").content_bytes() == b"png"
    with pytest.raises(ImageUnresolvable):
        load_image_ref(tmp_path / "missing.png")


def test_hashes_are_stable():
    assert content_hash({"b": 1, "a": [1, 2]}) == content_hash({"a": [1, 2], "b": 1})
    assert seed_from(1, "x") == seed_from(1, "x")
    assert seed_from(1, "x") != seed_from(2, "x")
    assert dumps_document({"b": 1, "a": "é"}) == '{"a":"é","b":1}\n'


def test_logging_emits_json_with_event_fields():
    stream = io.StringIO()
    log = setup_logging("test-json-logger", stream=stream, level="DEBUG")
    log.info("hello", extra={"extra_fields": {"event": "UNIT_TEST", "n": 3}})
    line = json.loads(stream.getvalue().strip().splitlines()[-1])
    assert line["event"] == "UNIT_TEST"
    assert line["service"] == "test-json-logger"
    assert line["n"] == 3


def _client(handler, **kw) -> ServiceClient:
    return ServiceClient(
        service="scorer",
        base_url="http://scorer.test",
        token="secret-token",
        path="/v1/score",
        base_delay_sec=0.0,
        transport=httpx.MockTransport(handler),
        **kw,
    )


def test_service_client_validates_and_retries():
    seen = []

    def handler(request: httpx.Request) -> httpx.Response:
        seen.append(request)
        if len(seen) == 1:
            return httpx.Response(503, json={"ok": False, "error": "overloaded"})
        return httpx.Response(200, json={"ok": True, "score": 0.5})

    with _client(handler) as client:
        data = client.call(
            {"op": "score_text_image", "payload": {"text": "a dog", "image": {"vector": [1.0]}}},
            request_schema="wire/scorer-request.json",
            response_schema="wire/scorer-response.json",
        )
    assert data["score"] == 0.5
    assert len(seen) == 2
    assert seen[0].headers["Authorization"] == "Bearer secret-token"
    assert seen[0].url.path == "/v1/score"


def test_service_client_rejects_invalid_request_before_sending():
    def handler(request: httpx.Request) -> httpx.Response:
        raise AssertionError("must not be called")

    with _client(handler) as client:
        with pytest.raises(ServiceHttpError):
            client.call({"op": "nope"}, request_schema="wire/scorer-request.json", response_schema="wire/scorer-response.json")


def test_cross_file_refs_resolve_through_local_registry():
    assert is_valid("wire/scorer-request.json", {"op": "detect", "payload": {"image": {"vector": [1.0, 2.0]}}})
    assert not is_valid("wire/scorer-request.json", {"op": "detect", "payload": {"image": {"vector": []}}})
    assert not is_valid("wire/scorer-request.json", {"op": "detect", "payload": {"image": {"url": "http://x"}}})
