"""Command-line client for the evosearch service.

By default commands talk to an in-process instance of the service; pass
--server to target a running deployment instead.  File outputs (reports,
ledgers, CSV traces) are written by the client.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import httpx


class _InProcessClient:
    """Minimal sync facade over the ASGI app, one event loop per request."""

    def __init__(self, app):
        self._app = app

    def request(self, method: str, url: str, **kw) -> httpx.Response:
        import asyncio

        async def go():
            transport = httpx.ASGITransport(app=self._app)
            async with httpx.AsyncClient(transport=transport,
                                         base_url="http://evosearch.local",
                                         timeout=None) as client:
                return await client.request(method, url, **kw)

        return asyncio.run(go())

    def get(self, url, **kw):
        return self.request("GET", url, **kw)

    def post(self, url, **kw):
        return self.request("POST", url, **kw)

    def delete(self, url, **kw):
        return self.request("DELETE", url, **kw)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False


def _client(server: str | None):
    if server:
        return httpx.Client(base_url=server.rstrip("/"), timeout=None)
    from .service import app
    return _InProcessClient(app)


def _fail(response) -> None:
    try:
        detail = response.json().get("detail", response.text)
    except ValueError:
        detail = response.text
    raise click.ClickException(f"HTTP {response.status_code}: {detail}")


def _check(response):
    if response.status_code >= 400:
        _fail(response)
    return response.json()


def _load_json(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise click.ClickException(f"file not found: {path}")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise click.ClickException(f"{path}: invalid JSON: {exc}")


def _write_out(path: str | None, payload, label: str):
    if not path:
        return
    text = payload if isinstance(payload, str) else json.dumps(payload, indent=2) + "\n"
    Path(path).write_text(text, encoding="utf-8")
    click.echo(f"{label} written to {path}")


def _gather_config(config_path, seed, budget, models, reset_interval, problem,
                   spec, inputs, backend, ledger, report) -> dict:
    data = _load_json(config_path) if config_path else {}
    if seed is not None:
        data["seed"] = seed
    if budget is not None:
        data["budget"] = budget
    if models:
        data["model_names"] = [m.strip() for m in models.split(",") if m.strip()]
    if reset_interval is not None:
        data["reset_interval"] = reset_interval
    if problem is not None:
        data["problem"] = problem
    if spec is not None:
        data["spec"] = spec
    if inputs is not None:
        data["inputs"] = [json.loads(x) for x in inputs.split(",") if x.strip()]
    if backend is not None:
        data["backend"] = backend
    if ledger is not None:
        data["ledger"] = ledger
    if report is not None:
        data["report"] = report
    spec_path = data.get("spec")
    if spec_path and Path(spec_path).exists():
        data["spec_text"] = Path(spec_path).read_text(encoding="utf-8")
        data.pop("spec")
    return data


def _config_options(fn):
    decorators = [
        click.option("--config", "config_path", type=click.Path(), default=None,
                     help="JSON config file; flags override its fields."),
        click.option("--seed", type=int, default=None),
        click.option("--budget", type=float, default=None,
                     help="Relative-token budget per run."),
        click.option("--models", default=None,
                     help="Comma-separated model names to keep from the config."),
        click.option("--reset-interval", default=None,
                     help="tokens:N or minutes:N."),
        click.option("--problem", default=None,
                     help="capset | nat | noiso | noiso_* | prime_count | custom."),
        click.option("--spec", default=None, type=click.Path(),
                     help="Spec file overriding the builtin for the problem."),
        click.option("--inputs", default=None,
                     help="Comma-separated run-entry inputs, e.g. '8' or '8,9,10'."),
        click.option("--backend", default=None, type=click.Choice(["sandbox", "fake"])),
        click.option("--ledger", default=None, type=click.Path(),
                     help="Run ledger JSONL path."),
        click.option("--report", default=None, type=click.Path(),
                     help="Report JSON path."),
    ]
    for d in reversed(decorators):
        fn = d(fn)
    return fn


@click.group()
@click.option("--server", envvar="EVOSEARCH_SERVER", default=None,
              help="Service URL; default runs the service in-process.")
@click.pass_context
def main(ctx, server):
    """Evolutionary search over LLM-written priority functions."""
    ctx.obj = server


@main.command()
@_config_options
@click.option("--out", type=click.Path(), default=None, help="Report JSON path (client side).")
@click.pass_obj
def run(server, out, config_path, seed, budget, models, reset_interval, problem,
        spec, inputs, backend, ledger, report):
    """One full evolution run; exits 0 on a budget halt."""
    config = _gather_config(config_path, seed, budget, models, reset_interval,
                            problem, spec, inputs, backend, ledger, report)
    with _client(server) as client:
        payload = _check(client.post("/runs", json={"config": config, "wait": True}))
    rep = payload["report"]
    click.echo(f"halted by {rep['halted_by']}; best score {rep['best_score']} "
               f"(program {rep['best_program_id']})")
    click.echo(f"counts: {rep['counts']}")
    _write_out(out, rep, "report")
    if rep["halted_by"] not in ("budget", "stop"):
        sys.exit(3)


@main.command()
@_config_options
@click.option("--runs", type=int, default=8, show_default=True)
@click.option("--parallel-runs", type=int, default=1, show_default=True,
              help="Concurrent runs per model, bounded by the CPU count.")
@click.option("--out", type=click.Path(), default=None)
@click.pass_obj
def bench(server, out, runs, parallel_runs, config_path, seed, budget, models,
          reset_interval, problem, spec, inputs, backend, ledger, report):
    """R independent runs per model, aggregated Table-style."""
    config = _gather_config(config_path, seed, budget, models, reset_interval,
                            problem, spec, inputs, backend, ledger, report)
    with _client(server) as client:
        payload = _check(client.post("/bench", json={
            "config": config, "runs": runs, "parallel_runs": parallel_runs}))
    click.echo("model\tave best\tmin best\tmax best\t#max\t$/run (est)")
    for row in payload["rows"]:
        click.echo(f"{row['model']}\t{row['ave_best']}\t{row['min_best']}\t"
                   f"{row['max_best']}\t{row['count_at_max']}\t{row['cost_per_run']}"
                   + ("\t[partial]" if row["partial"] else ""))
    _write_out(out, payload, "bench report")


@main.command()
@_config_options
@click.option("--reset-profile", type=click.Choice(["short", "long"]), default=None,
              help="short = 15 min island resets, long = 60 min.")
@click.option("--checkpoint-every", type=float, default=1e4, show_default=True)
@click.option("--out", type=click.Path(), default=None, help="Trace CSV path.")
@click.pass_obj
def longrun(server, out, checkpoint_every, reset_profile, config_path, seed, budget,
            models, reset_interval, problem, spec, inputs, backend, ledger, report):
    """Single long run emitting a best-score-vs-n_R CSV trace."""
    if reset_profile:
        reset_interval = "minutes:15" if reset_profile == "short" else "minutes:60"
    config = _gather_config(config_path, seed, budget, models, reset_interval,
                            problem, spec, inputs, backend, ledger, report)
    with _client(server) as client:
        payload = _check(client.post(
            "/longrun", json={"config": config, "checkpoint_every": checkpoint_every}))
    click.echo(f"best score {payload['best_score']} after "
               f"{payload['tokens']['relative_total']} relative tokens")
    _write_out(out, payload["trace_csv"], "trace CSV")


@main.command()
@click.option("--variant", type=click.Choice(
    ["basic", "torus", "removal", "symmetric", "nextpoint", "smallmax"]),
    default="basic", show_default=True)
@click.option("--n-values", required=True,
              help="Comma list '8,16,32' or range 'start:stop:step'.")
@click.option("--baseline", type=click.Choice(["random", "l2-center", "constant"]),
              default=None)
@click.option("--priority", "priority_path", type=click.Path(), default=None,
              help="File with an evolved priority function (runs sandboxed).")
@click.option("--seed", type=int, default=0)
@click.option("--group", type=click.Choice(["axes4", "diag2", "diags4"]),
              default="diags4", show_default=True)
@click.option("--budget", type=int, default=None, help="Suggestion budget (nextpoint).")
@click.option("--out", type=click.Path(), default=None, help="Sweep CSV path.")
@click.pass_obj
def generalize(server, out, variant, n_values, baseline, priority_path, seed,
               group, budget):
    """Run a priority through a solver variant over a range of grid sizes."""
    if ":" in n_values:
        parts = [int(x) for x in n_values.split(":")]
        ns = list(range(parts[0], parts[1] + 1, parts[2] if len(parts) > 2 else 1))
    else:
        ns = [int(x) for x in n_values.split(",") if x.strip()]
    body = {"variant": variant, "n_values": ns, "baseline": baseline, "seed": seed,
            "group": group, "budget": budget}
    if priority_path:
        p = Path(priority_path)
        if not p.exists():
            raise click.ClickException(f"file not found: {priority_path}")
        body["priority_source"] = p.read_text(encoding="utf-8")
    with _client(server) as client:
        payload = _check(client.post("/generalize", json=body))
    if payload.get("warning"):
        click.echo(f"warning: {payload['warning']}", err=True)
    click.echo(payload["csv"], nl=False)
    _write_out(out, payload["csv"], "sweep CSV")
    if payload["ok_count"] == 0:
        sys.exit(4)


@main.command()
@click.argument("construction_file", type=click.Path())
@click.pass_obj
def verify(server, construction_file):
    """Verify a construction JSON file; exit 0 iff valid."""
    construction = _load_json(construction_file)
    with _client(server) as client:
        payload = _check(client.post("/verify", json={"construction": construction}))
    line = f"problem={payload['problem']} size={payload['size']}"
    if payload.get("diameter") is not None:
        line += f" diameter={payload['diameter']}"
    line += f" valid={payload['valid']}"
    click.echo(line)
    if not payload["valid"]:
        sys.exit(1)


@main.command()
@click.argument("problem", type=click.Choice(["capset", "noiso"]))
@click.argument("n", type=int)
@click.option("--geometry", type=click.Choice(["planar", "torus"]), default="planar")
@click.pass_obj
def oracle(server, problem, n, geometry):
    """Exact brute-force maximum for small n."""
    with _client(server) as client:
        payload = _check(client.get(f"/oracle/{problem}/{n}",
                                    params={"geometry": geometry}))
    click.echo(payload["max"])


@main.command()
@click.argument("name", required=False)
@click.pass_obj
def spec(server, name):
    """Print a builtin spec file (or list them)."""
    with _client(server) as client:
        if name is None:
            payload = _check(client.get("/specs"))
            click.echo("\n".join(payload["specs"]))
        else:
            payload = _check(client.get(f"/specs/{name}"))
            click.echo(payload["text"], nl=False)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8321, show_default=True)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import app
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
