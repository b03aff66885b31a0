"""Logging and tracing setup.

Tracing is only wired to an exporter when OTEL_EXPORTER_OTLP_ENDPOINT is set;
otherwise the OpenTelemetry API hands out its no-op tracer.
"""

from __future__ import annotations

import logging
import os

from opentelemetry import trace

OTLP_ENDPOINT_ENV = "OTEL_EXPORTER_OTLP_ENDPOINT"

_configured = False


def tracer() -> trace.Tracer:
    return trace.get_tracer("tailgini")


def setup_logging(level: str | int | None = None) -> None:
    level = level or os.environ.get("LOG_LEVEL", "INFO")
    if isinstance(level, str):
        level = level.upper()
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def setup_observability(otlp_endpoint: str | None = None, service_name: str = "tailgini") -> bool:
    """Install an OTLP span exporter. Returns False when no endpoint is configured."""
    global _configured
    otlp_endpoint = otlp_endpoint or os.environ.get(OTLP_ENDPOINT_ENV)
    if not otlp_endpoint or _configured:
        return _configured

    from opentelemetry.exporter.otlp.proto.grpc.trace_exporter import OTLPSpanExporter
    from opentelemetry.sdk.resources import Resource
    from opentelemetry.sdk.trace import TracerProvider
    from opentelemetry.sdk.trace.export import BatchSpanProcessor

    provider = TracerProvider(resource=Resource.create({"service.name": service_name}))
    provider.add_span_processor(BatchSpanProcessor(OTLPSpanExporter(endpoint=otlp_endpoint, insecure=True)))
    trace.set_tracer_provider(provider)
    _configured = True
    logging.getLogger(__name__).info("tracing to %s", otlp_endpoint)
    return True
