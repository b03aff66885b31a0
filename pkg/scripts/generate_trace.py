from opentelemetry import trace

from tailgini.estimators import TailConfig, fit_tail_gini
from tailgini.observability import setup_logging, setup_observability, tracer
from tailgini.simulation import PRESETS, sample_model
from tailgini.workers import RngStream

if __name__ == '__main__':
    setup_logging()
    if not setup_observability():
        print('OTEL_EXPORTER_OTLP_ENDPOINT is not set; spans go to the no-op tracer.')

    with tracer().start_as_current_span("generate_trace") as span:
        sample = sample_model(PRESETS["model1a"], 5000, RngStream(1))
        fit = fit_tail_gini(sample, TailConfig.from_fractions(sample.n, 0.01))
        span.set_attribute("theta_extreme", fit.theta_extreme)
        print(f"model1a n=5000 p=0.01 -> theta_p={fit.theta_extreme:.6g} (gamma1={fit.gamma1_hat:.4f}, eta={fit.eta_hat:.4f})")

    provider = trace.get_tracer_provider()
    if hasattr(provider, "force_flush"):
        provider.force_flush()
    print('\nMake sure a collector listens on OTEL_EXPORTER_OTLP_ENDPOINT (e.g. http://localhost:4317) to view the span.')
