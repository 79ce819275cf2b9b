"""Drive the search over HTTP.

Real deployments put three model servers behind the JSON protocol
(``/v1/fill_mask``, ``/v1/generate``, ``/v1/classify``). Here the bundled
mock server plays all three roles by serving the toy world, and a run log
is written and replayed.

    python demos/04_http_backends.py
"""

import io

from promptevo import OptimizerConfig, http_backends, load_world, optimize
from promptevo.mock_server import MockBackendServer
from promptevo.runlog import (
    RunLogWriter,
    candidate_record,
    final_record,
    header_record,
    iteration_records,
    parse_runlog,
    render_report,
    verify_runlog,
)

SEED = "Write a text that expresses <em>"
world = load_world()

with MockBackendServer(world, delay=0.01) as server:
    suite = http_backends(server.url, server.url, server.url, timeout=5.0)
    cfg = OptimizerConfig(labels=world.labels, max_iterations=4)

    buf = io.StringIO()
    log = RunLogWriter(buf)
    log.write(header_record(SEED, cfg.to_json(), {"kind": "http"}))
    result = optimize(
        SEED,
        suite,
        cfg,
        on_seed=lambda c: log.write(candidate_record("seed", 0, c)),
        on_iteration=lambda rec: log.write_all(iteration_records(rec)),
    )
    log.write(final_record(result))
    print("requests served:", dict(server.calls))

# Replay checks every child's lineage against its parent before reporting.
runlog = parse_runlog(buf.getvalue().splitlines())
verify_runlog(runlog)
print(render_report(runlog))

# The same server can misbehave on demand; clients raise typed errors.
from promptevo.errors import MalformedResponse

with MockBackendServer(world) as server:
    server.faults["/v1/classify"] = "malformed"
    suite = http_backends(server.url, server.url, server.url)
    try:
        suite.classifier.classify(["joy"], world.labels)
    except MalformedResponse as exc:
        print("malformed reply ->", type(exc).__name__, exc)
